use crate::error::{invalid, Result};
use crate::math::{normalize_vjp, Vec3};
use crate::renderer::{GBuffer, GBufferGradients, MIN_ROUGHNESS};

/// Pixel-major latent: `data[pixel * channels + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Latent {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Latent {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(invalid(format!(
                "latent of {width}x{height}x{channels} cannot hold {} values",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn pixel(&self, i: usize) -> &[f64] {
        &self.data[i * self.channels..(i + 1) * self.channels]
    }
}

/// Maps a latent to a valid G-buffer and pulls G-buffer gradients back.
pub trait Decoder: Sync {
    fn channels(&self) -> usize;
    fn decode(&self, z: &Latent) -> Result<GBuffer>;
    /// Vector-Jacobian product of [`Decoder::decode`] at `z`.
    fn vjp(&self, z: &Latent, grad: &GBufferGradients) -> Latent;
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn affine_clamped(z: f64, lo: f64, hi: f64) -> (f64, f64) {
    let v = 0.5 + 0.5 * z;
    if v <= lo {
        (lo, 0.0)
    } else if v >= hi {
        (hi, 0.0)
    } else {
        (v, 0.5)
    }
}

const FALLBACK_NORMAL: Vec3 = Vec3::new(0.0, 0.0, 1.0);

/// Eight channels per pixel: basecolor logits (3), raw normal (3), then
/// roughness and metallic as `clamp(0.5 + 0.5 z)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceDecoder;

impl ReferenceDecoder {
    pub const CHANNELS: usize = 8;

    /// Inverse of [`Decoder::decode`] for interior values, used to seed
    /// latents from known G-buffers.
    pub fn encode(g: &GBuffer) -> Latent {
        let mut data = Vec::with_capacity(g.len() * Self::CHANNELS);
        for i in 0..g.len() {
            for c in g.basecolor[i] {
                let c = c.clamp(1e-6, 1.0 - 1e-6);
                data.push((c / (1.0 - c)).ln());
            }
            data.extend_from_slice(&g.normal[i]);
            data.push(2.0 * g.roughness[i] - 1.0);
            data.push(2.0 * g.metallic[i] - 1.0);
        }
        Latent {
            width: g.width,
            height: g.height,
            channels: Self::CHANNELS,
            data,
        }
    }
}

impl Decoder for ReferenceDecoder {
    fn channels(&self) -> usize {
        Self::CHANNELS
    }

    fn decode(&self, z: &Latent) -> Result<GBuffer> {
        if z.channels != Self::CHANNELS {
            return Err(invalid("reference decoder expects 8 latent channels"));
        }
        let n = z.width * z.height;
        let mut basecolor = Vec::with_capacity(n);
        let mut normal = Vec::with_capacity(n);
        let mut roughness = Vec::with_capacity(n);
        let mut metallic = Vec::with_capacity(n);
        for i in 0..n {
            let p = z.pixel(i);
            basecolor.push([logistic(p[0]), logistic(p[1]), logistic(p[2])]);
            let raw = Vec3::new(p[3], p[4], p[5]);
            let unit = if raw.length() > 1e-8 {
                raw.normalized()
            } else {
                FALLBACK_NORMAL
            };
            normal.push(unit.to_array());
            roughness.push(affine_clamped(p[6], MIN_ROUGHNESS, 1.0).0);
            metallic.push(affine_clamped(p[7], 0.0, 1.0).0);
        }
        GBuffer::new(z.width, z.height, basecolor, normal, roughness, metallic)
    }

    fn vjp(&self, z: &Latent, grad: &GBufferGradients) -> Latent {
        let n = z.width * z.height;
        let mut out = vec![0.0; z.data.len()];
        for i in 0..n {
            let p = z.pixel(i);
            let o = &mut out[i * Self::CHANNELS..(i + 1) * Self::CHANNELS];
            for c in 0..3 {
                let s = logistic(p[c]);
                o[c] = grad.basecolor[i][c] * s * (1.0 - s);
            }
            let raw = Vec3::new(p[3], p[4], p[5]);
            if raw.length() > 1e-8 {
                let g = normalize_vjp(raw, Vec3::from_array(grad.normal[i]));
                o[3..6].copy_from_slice(&g.to_array());
            }
            o[6] = grad.roughness[i] * affine_clamped(p[6], MIN_ROUGHNESS, 1.0).1;
            o[7] = grad.metallic[i] * affine_clamped(p[7], 0.0, 1.0).1;
        }
        Latent {
            data: out,
            ..z.clone()
        }
    }
}

/// Three-channel latent driving basecolor as `clamp(offset + scale · z)`;
/// every other field comes from a fixed template. Affine in the interior,
/// which makes the measurement loss convex for dielectric scenes.
#[derive(Debug, Clone)]
pub struct AffineAlbedoDecoder {
    pub template: GBuffer,
    pub offset: f64,
    pub scale: f64,
}

impl Decoder for AffineAlbedoDecoder {
    fn channels(&self) -> usize {
        3
    }

    fn decode(&self, z: &Latent) -> Result<GBuffer> {
        if z.channels != 3 || (z.width, z.height) != self.template.dims() {
            return Err(invalid("latent does not match the albedo decoder template"));
        }
        let mut g = self.template.clone();
        for (i, cb) in g.basecolor.iter_mut().enumerate() {
            let p = z.pixel(i);
            *cb = [0, 1, 2].map(|c| (self.offset + self.scale * p[c]).clamp(0.0, 1.0));
        }
        g.validate()?;
        Ok(g)
    }

    fn vjp(&self, z: &Latent, grad: &GBufferGradients) -> Latent {
        let mut out = vec![0.0; z.data.len()];
        for i in 0..z.width * z.height {
            for c in 0..3 {
                let v = self.offset + self.scale * z.data[i * 3 + c];
                if (0.0..=1.0).contains(&v) {
                    out[i * 3 + c] = grad.basecolor[i][c] * self.scale;
                }
            }
        }
        Latent {
            data: out,
            ..z.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(dec: &dyn Decoder, z: &Latent) {
        // scalar probe: Σ w · decode(z) with fixed weights
        let g0 = dec.decode(z).unwrap();
        let mut w = GBufferGradients::zeros(z.width, z.height);
        for i in 0..g0.len() {
            w.basecolor[i] = [0.3, -0.7, 0.5];
            w.normal[i] = [0.2, 0.4, -0.9];
            w.roughness[i] = 0.8;
            w.metallic[i] = -0.6;
        }
        let probe = |zz: &Latent| {
            let g = dec.decode(zz).unwrap();
            let mut s = 0.0;
            for i in 0..g.len() {
                for c in 0..3 {
                    s += w.basecolor[i][c] * g.basecolor[i][c] + w.normal[i][c] * g.normal[i][c];
                }
                s += w.roughness[i] * g.roughness[i] + w.metallic[i] * g.metallic[i];
            }
            s
        };
        let analytic = dec.vjp(z, &w);
        let h = 1e-6;
        for k in 0..z.data.len() {
            let mut zp = z.clone();
            zp.data[k] += h;
            let mut zm = z.clone();
            zm.data[k] -= h;
            let fd = (probe(&zp) - probe(&zm)) / (2.0 * h);
            assert!((fd - analytic.data[k]).abs() < 1e-6, "k={k}: {fd} vs {}", analytic.data[k]);
        }
    }

    #[test]
    fn reference_decoder_adjoint() {
        let z = Latent::new(
            2,
            1,
            8,
            vec![0.3, -1.0, 2.0, 0.1, 0.2, 0.9, 0.2, -0.4, -0.5, 0.0, 0.7, -0.3, 0.8, 0.5, 3.0, -3.0],
        )
        .unwrap();
        fd_check(&ReferenceDecoder, &z);
    }

    #[test]
    fn encode_decode_round_trip() {
        let g = GBuffer::uniform(2, 2, [0.2, 0.5, 0.8], [0.0, 0.6, 0.8], 0.4, 0.7).unwrap();
        let back = ReferenceDecoder.decode(&ReferenceDecoder::encode(&g)).unwrap();
        for i in 0..4 {
            for c in 0..3 {
                assert!((back.basecolor[i][c] - g.basecolor[i][c]).abs() < 1e-12);
                assert!((back.normal[i][c] - g.normal[i][c]).abs() < 1e-12);
            }
            assert!((back.roughness[i] - 0.4).abs() < 1e-12);
            assert!((back.metallic[i] - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn albedo_decoder_adjoint() {
        let template = GBuffer::uniform(2, 1, [0.5; 3], [0.0, 0.0, 1.0], 0.5, 0.0).unwrap();
        let dec = AffineAlbedoDecoder {
            template,
            offset: 0.5,
            scale: 0.1,
        };
        let z = Latent::new(2, 1, 3, vec![0.3, -1.0, 2.0, 0.1, 0.2, -0.9]).unwrap();
        fd_check(&dec, &z);
    }

    #[test]
    fn degenerate_normal_falls_back() {
        let mut data = vec![0.0; 8];
        data[6] = -5.0;
        let g = ReferenceDecoder.decode(&Latent::new(1, 1, 8, data).unwrap()).unwrap();
        assert_eq!(g.normal[0], [0.0, 0.0, 1.0]);
        assert_eq!(g.roughness[0], MIN_ROUGHNESS);
    }
}
