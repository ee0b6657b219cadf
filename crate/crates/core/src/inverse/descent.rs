use rayon::prelude::*;

use super::measurement_loss;
use crate::envmap::EnvAssets;
use crate::error::{invalid, Error, Result};
use crate::imaging::{validity, LinearImage, Mask};
use crate::math::Vec3;
use crate::renderer::{render_forward, GBuffer, GBufferGradients, ViewSetup, MIN_ROUGHNESS};

/// Step halvings tried per iteration before a pixel is left where it is.
pub const MAX_HALVINGS: usize = 20;

const STEP_GROWTH: f64 = 1.5;
/// Lower bound on `n·v` kept by the normal projection.
const MIN_FACING: f64 = 0.05;
/// Iterations spent on the alternative starts before the per-pixel pick.
const EXPLORE_ITERS: usize = 60;
/// Tilt of the alternative start normals away from the view direction.
const EXPLORE_TILT_DEG: f64 = 50.0;

#[derive(Debug, Clone)]
pub struct DescentResult {
    pub gbuffer: GBuffer,
    /// Loss before the first iteration, then after each iteration.
    pub loss_history: Vec<f64>,
    pub initial_loss: f64,
    pub final_loss: f64,
}

struct Problem<'a> {
    assets: &'a EnvAssets,
    view: &'a ViewSetup,
    observed: &'a LinearImage,
    mask: Option<&'a Mask>,
    valid: Vec<bool>,
}

impl Problem<'_> {
    /// Mean squared residual from per-pixel sums, accumulated in pixel order
    /// so that element-wise smaller errors never give a larger total.
    fn total(&self, errors: &[f64]) -> f64 {
        errors.iter().sum::<f64>() / (3.0 * self.valid.iter().filter(|v| **v).count() as f64)
    }

    fn pixel_errors(&self, rendered: &LinearImage) -> Vec<f64> {
        rendered
            .pixels()
            .par_iter()
            .zip(self.observed.pixels())
            .zip(&self.valid)
            .map(|((r, o), ok)| {
                if *ok {
                    (0..3).map(|c| (r[c] - o[c]) * (r[c] - o[c])).sum()
                } else {
                    0.0
                }
            })
            .collect()
    }

    fn project_pixel(&self, g: &mut GBuffer, i: usize, fallback: [f64; 3]) {
        g.basecolor[i] = g.basecolor[i].map(|v| v.clamp(0.0, 1.0));
        g.roughness[i] = g.roughness[i].clamp(MIN_ROUGHNESS, 1.0);
        g.metallic[i] = g.metallic[i].clamp(0.0, 1.0);
        let n = Vec3::from_array(g.normal[i]);
        if !(n.is_finite() && n.length() > 1e-8) {
            g.normal[i] = fallback;
            return;
        }
        let n = n.normalized();
        let v = self.view.direction(i);
        let facing = n.dot(v);
        g.normal[i] = if facing >= MIN_FACING {
            n.to_array()
        } else {
            let perp = n - v * facing;
            let perp = if perp.length() > 1e-8 {
                perp.normalized()
            } else {
                any_perpendicular(v)
            };
            (perp * (1.0 - MIN_FACING * MIN_FACING).sqrt() + v * MIN_FACING).to_array()
        };
    }
}

fn any_perpendicular(v: Vec3) -> Vec3 {
    let a = if v.x.abs() < 0.9 {
        Vec3::new(1.0, 0.0, 0.0)
    } else {
        Vec3::new(0.0, 1.0, 0.0)
    };
    v.cross(a).normalized()
}

/// One descent trajectory with per-pixel step sizes.
#[derive(Clone)]
struct State {
    g: GBuffer,
    steps: Vec<f64>,
    errors: Vec<f64>,
    loss: f64,
    gradients: GBufferGradients,
}

impl State {
    fn new(p: &Problem, g: GBuffer, step: f64) -> Result<Self> {
        let ml = measurement_loss(&g, p.assets, p.view, p.observed, p.mask)?;
        let errors = p.pixel_errors(&ml.rendered);
        Ok(Self {
            steps: vec![step; g.len()],
            g,
            loss: p.total(&errors),
            errors,
            gradients: ml.gradients,
        })
    }

    fn iterate(&mut self, p: &Problem) -> Result<()> {
        // Rescale to gradients of the per-pixel residual sums.
        let denom = 3.0 * p.valid.iter().filter(|v| **v).count() as f64;
        let grad = &self.gradients;
        let mut pending: Vec<usize> = (0..self.g.len())
            .filter(|&i| p.valid[i] && self.errors[i] > 0.0)
            .collect();
        let mut trial = self.g.clone();
        for _ in 0..=MAX_HALVINGS {
            if pending.is_empty() {
                break;
            }
            for &i in &pending {
                let s = self.steps[i] * denom;
                for c in 0..3 {
                    trial.basecolor[i][c] = self.g.basecolor[i][c] - s * grad.basecolor[i][c];
                    trial.normal[i][c] = self.g.normal[i][c] - s * grad.normal[i][c];
                }
                trial.roughness[i] = self.g.roughness[i] - s * grad.roughness[i];
                trial.metallic[i] = self.g.metallic[i] - s * grad.metallic[i];
                p.project_pixel(&mut trial, i, self.g.normal[i]);
            }
            let rendered = render_forward(&trial, p.assets, p.view)?;
            let trial_errors = p.pixel_errors(&rendered);
            let mut rejected = Vec::new();
            for &i in &pending {
                let e = trial_errors[i];
                if !e.is_finite() {
                    return Err(Error::NonFinite(format!("residual at pixel {i}")));
                }
                if e <= self.errors[i] {
                    self.steps[i] *= STEP_GROWTH;
                } else {
                    self.steps[i] *= 0.5;
                    rejected.push(i);
                }
            }
            pending = rejected;
        }
        for &i in &pending {
            copy_pixel(&mut trial, &self.g, i);
        }
        let step_sizes = std::mem::take(&mut self.steps);
        *self = State::new(p, trial, 0.0)?;
        self.steps = step_sizes;
        Ok(())
    }
}

fn copy_pixel(dst: &mut GBuffer, src: &GBuffer, i: usize) {
    dst.basecolor[i] = src.basecolor[i];
    dst.normal[i] = src.normal[i];
    dst.roughness[i] = src.roughness[i];
    dst.metallic[i] = src.metallic[i];
}

/// Copies of `init` whose normals are tilted away from each pixel's view
/// direction in four azimuths.
fn alternative_starts(init: &GBuffer, view: &ViewSetup) -> Vec<GBuffer> {
    let (s, c) = EXPLORE_TILT_DEG.to_radians().sin_cos();
    (0..4)
        .map(|k| {
            let phi = k as f64 * std::f64::consts::FRAC_PI_2;
            let mut g = init.clone();
            for (i, n) in g.normal.iter_mut().enumerate() {
                let v = view.direction(i);
                let t1 = any_perpendicular(v);
                let t2 = v.cross(t1);
                *n = (v * c + (t1 * phi.cos() + t2 * phi.sin()) * s).normalized().to_array();
            }
            g
        })
        .collect()
}

/// Projected gradient descent on the measurement loss.
///
/// Pixels shade independently, so the loss is a sum of per-pixel terms and
/// each pixel carries its own step size: grown after an accepted move,
/// halved (up to [`MAX_HALVINGS`] times) when its residual would increase.
/// The first iterations also run from four alternative normal
/// orientations; each pixel then continues from whichever trajectory
/// reached the lowest residual. The reported loss never increases.
#[allow(clippy::too_many_arguments)]
pub fn optimize_gbuffer(
    init: &GBuffer,
    assets: &EnvAssets,
    view: &ViewSetup,
    observed: &LinearImage,
    mask: Option<&Mask>,
    iters: usize,
    step: f64,
) -> Result<DescentResult> {
    if iters == 0 {
        return Err(invalid("iters must be at least 1"));
    }
    if !(step.is_finite() && step >= 0.0) {
        return Err(invalid(format!("step {step} must be finite and non-negative")));
    }
    init.validate()?;
    if view.dims() != init.dims() {
        return Err(Error::ShapeMismatch {
            expected: init.dims(),
            actual: view.dims(),
        });
    }
    let problem = Problem {
        assets,
        view,
        observed,
        mask,
        valid: validity(mask, init.dims())?,
    };
    let mut main = State::new(&problem, init.clone(), step)?;
    let initial_loss = main.loss;
    let mut history = vec![initial_loss];
    if initial_loss == 0.0 || step == 0.0 {
        return Ok(DescentResult {
            gbuffer: init.clone(),
            loss_history: history,
            initial_loss,
            final_loss: initial_loss,
        });
    }

    let explore = iters.min(EXPLORE_ITERS);
    let mut others = alternative_starts(init, view)
        .into_iter()
        .map(|g| State::new(&problem, g, step))
        .collect::<Result<Vec<_>>>()?;
    for _ in 0..explore {
        main.iterate(&problem)?;
        for s in &mut others {
            s.iterate(&problem)?;
        }
        let best: Vec<f64> = (0..init.len())
            .map(|i| others.iter().map(|s| s.errors[i]).fold(main.errors[i], f64::min))
            .collect();
        history.push(problem.total(&best));
    }
    let mut merged = main.g.clone();
    let mut steps = main.steps.clone();
    for i in 0..init.len() {
        let mut best = main.errors[i];
        for s in &others {
            if s.errors[i] < best {
                best = s.errors[i];
                copy_pixel(&mut merged, &s.g, i);
                steps[i] = s.steps[i];
            }
        }
    }
    let mut state = State::new(&problem, merged, 0.0)?;
    state.steps = steps;

    for _ in explore..iters {
        if state.loss == 0.0 {
            break;
        }
        state.iterate(&problem)?;
        history.push(state.loss);
    }
    Ok(DescentResult {
        final_loss: state.loss,
        gbuffer: state.g,
        loss_history: history,
        initial_loss,
    })
}
