#ifndef RELIGHT_H
#define RELIGHT_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum RelightStatus {
  RELIGHT_STATUS_OK = 0,
  RELIGHT_STATUS_NULL_POINTER = 1,
  RELIGHT_STATUS_INVALID_ARGUMENT = 2,
  RELIGHT_STATUS_INVALID_IMAGE = 3,
  RELIGHT_STATUS_SHAPE_MISMATCH = 4,
  RELIGHT_STATUS_MISSING_FILE = 5,
  RELIGHT_STATUS_MALFORMED_FILE = 6,
  RELIGHT_STATUS_EMPTY_SELECTION = 7,
  RELIGHT_STATUS_NON_FINITE = 8,
  RELIGHT_STATUS_MANIFEST = 9,
  RELIGHT_STATUS_IO = 10,
  RELIGHT_STATUS_INVALID_UTF8 = 11,
  RELIGHT_STATUS_PANIC = 12,
} RelightStatus;

/**
 * Prefiltered environment: source map, SH irradiance and specular chain.
 */
typedef struct RelightEnv RelightEnv;

/**
 * Per-pixel material and geometry buffers.
 */
typedef struct RelightGBuffer RelightGBuffer;

/**
 * Linear RGB image.
 */
typedef struct RelightImage RelightImage;

/**
 * Scale-aligned comparison of a prediction with ground truth.
 */
typedef struct RelightMetrics {
  double alpha;
  double psnr;
  double ssim;
  size_t valid_pixels;
  /**
   * Nonzero when the prediction had no energy and `alpha` fell back to 1.
   */
  uint8_t degenerate;
} RelightMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *relight_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *relight_version(void);

/**
 * Copies `width * height * 3` interleaved RGB doubles into a new image.
 */
enum RelightStatus relight_image_new(size_t width,
                                     size_t height,
                                     const double *rgb,
                                     struct RelightImage **out_image);

enum RelightStatus relight_image_read_exr(const char *path_utf8, struct RelightImage **out_image);

/**
 * Writes the image as a 32-bit float RGB EXR.
 */
enum RelightStatus relight_image_write_exr(const struct RelightImage *image, const char *path_utf8);

enum RelightStatus relight_image_size(const struct RelightImage *image,
                                      size_t *out_width,
                                      size_t *out_height);

/**
 * Copies the pixels out as interleaved RGB; `len` must equal `width * height * 3`.
 */
enum RelightStatus relight_image_read_pixels(const struct RelightImage *image,
                                             double *rgb_out,
                                             size_t len);

void relight_image_free(struct RelightImage *image);

/**
 * Merges `count` exposures of one scene into linear radiance.
 *
 * `saturated_out` may be null; otherwise it receives `width * height` bytes,
 * 1 where no exposure was usable and the shortest one was kept.
 */
enum RelightStatus relight_merge_exposures(const struct RelightImage *const *frames,
                                           const double *exposure_times,
                                           size_t count,
                                           struct RelightImage **out_radiance,
                                           uint8_t *saturated_out);

/**
 * Builds lighting assets from an equirectangular (+Y up) map with
 * `levels >= 2` specular mip levels.
 */
enum RelightStatus relight_env_build(const struct RelightImage *equirect,
                                     size_t levels,
                                     struct RelightEnv **out_env);

/**
 * Irradiance over π for unit normal `(nx, ny, nz)`, written to `rgb_out[3]`.
 */
enum RelightStatus relight_env_irradiance(const struct RelightEnv *env,
                                          double nx,
                                          double ny,
                                          double nz,
                                          double *rgb_out);

void relight_env_free(struct RelightEnv *env);

/**
 * Copies per-pixel buffers: `basecolor` and `normal` hold `3 * width * height`
 * values, `roughness` and `metallic` hold `width * height`.
 */
enum RelightStatus relight_gbuffer_new(size_t width,
                                       size_t height,
                                       const double *basecolor,
                                       const double *normal,
                                       const double *roughness,
                                       const double *metallic,
                                       struct RelightGBuffer **out_gbuffer);

void relight_gbuffer_free(struct RelightGBuffer *gbuffer);

/**
 * Renders linear radiance. With `focal <= 0` every pixel is viewed along
 * +Z; otherwise a pinhole camera with principal point `(cx, cy)` in pixels.
 */
enum RelightStatus relight_render(const struct RelightGBuffer *gbuffer,
                                  const struct RelightEnv *env,
                                  double focal,
                                  double cx,
                                  double cy,
                                  struct RelightImage **out_image);

/**
 * Scale-aligned PSNR and SSIM. `mask` may be null (all pixels valid);
 * otherwise it holds `width * height` bytes, nonzero marking valid pixels.
 */
enum RelightStatus relight_evaluate(const struct RelightImage *prediction,
                                    const struct RelightImage *ground_truth,
                                    const uint8_t *mask,
                                    struct RelightMetrics *out_metrics);

/**
 * Apparent solar motion during a capture offset of `dt_seconds`, in degrees
 * and in pixels of an equirectangular map `envmap_width` texels wide.
 */
enum RelightStatus relight_solar_displacement(double dt_seconds,
                                              size_t envmap_width,
                                              double *out_degrees,
                                              double *out_pixels);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELIGHT_H */
