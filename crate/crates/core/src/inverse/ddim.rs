use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};

/// Linear-β diffusion schedule and its evenly spaced inference subsequence.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    /// `alpha_bar[t]` for `t = 0..=T`; `alpha_bar[0] = 1` is the clean end.
    alpha_bar: Vec<f64>,
    /// Descending, from `T` down to `0`, `K + 1` entries.
    timesteps: Vec<usize>,
    beta_start: f64,
    beta_end: f64,
}

impl DiffusionSchedule {
    pub fn linear(train_steps: usize, beta_start: f64, beta_end: f64, inference_steps: usize) -> Result<Self> {
        if train_steps < 1 || inference_steps < 1 || inference_steps > train_steps {
            return Err(invalid(format!(
                "need 1 <= K ({inference_steps}) <= T ({train_steps})"
            )));
        }
        if !(0.0 < beta_start && beta_start <= beta_end && beta_end < 1.0) {
            return Err(invalid(format!("invalid beta range [{beta_start}, {beta_end}]")));
        }
        let mut alpha_bar = Vec::with_capacity(train_steps + 1);
        alpha_bar.push(1.0);
        let mut acc = 1.0;
        for t in 1..=train_steps {
            let frac = if train_steps == 1 {
                0.0
            } else {
                (t - 1) as f64 / (train_steps - 1) as f64
            };
            acc *= 1.0 - (beta_start + (beta_end - beta_start) * frac);
            alpha_bar.push(acc);
        }
        let timesteps = (0..=inference_steps)
            .rev()
            .map(|i| ((i * train_steps) as f64 / inference_steps as f64).round() as usize)
            .collect();
        Ok(Self {
            alpha_bar,
            timesteps,
            beta_start,
            beta_end,
        })
    }

    pub fn train_steps(&self) -> usize {
        self.alpha_bar.len() - 1
    }

    pub fn inference_steps(&self) -> usize {
        self.timesteps.len() - 1
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    pub fn timesteps(&self) -> &[usize] {
        &self.timesteps
    }

    pub fn beta_range(&self) -> (f64, f64) {
        (self.beta_start, self.beta_end)
    }
}

impl Default for DiffusionSchedule {
    /// T = 1000, β linear in [1e-4, 0.02], K = 50.
    fn default() -> Self {
        Self::linear(1000, 1e-4, 0.02, 50).expect("default schedule is valid")
    }
}

/// Noise predictor `ε(x_t, t)`; must be deterministic.
pub trait Denoiser: Sync {
    fn predict_noise(&self, x: &[f64], t: usize, schedule: &DiffusionSchedule) -> Vec<f64>;
}

/// Exact noise predictor for a Gaussian prior `N(mean, σ² I)` on `x_0`.
#[derive(Debug, Clone)]
pub struct GaussianPriorDenoiser {
    pub mean: Vec<f64>,
    pub sigma: f64,
}

impl GaussianPriorDenoiser {
    pub fn new(mean: Vec<f64>, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(invalid(format!("prior sigma {sigma} must be positive")));
        }
        Ok(Self { mean, sigma })
    }

    /// Posterior mean `E[x_0 | x_t]`.
    pub fn posterior_mean(&self, x: &[f64], alpha_bar: f64) -> Vec<f64> {
        let s2 = self.sigma * self.sigma;
        let gain = alpha_bar.sqrt() * s2 / (alpha_bar * s2 + 1.0 - alpha_bar);
        x.iter()
            .zip(&self.mean)
            .map(|(xi, mu)| mu + gain * (xi - alpha_bar.sqrt() * mu))
            .collect()
    }
}

impl Denoiser for GaussianPriorDenoiser {
    fn predict_noise(&self, x: &[f64], t: usize, schedule: &DiffusionSchedule) -> Vec<f64> {
        let ab = schedule.alpha_bar(t);
        let s2 = self.sigma * self.sigma;
        let k = (1.0 - ab).sqrt() / (ab * s2 + 1.0 - ab);
        x.iter()
            .zip(&self.mean)
            .map(|(xi, mu)| k * (xi - ab.sqrt() * mu))
            .collect()
    }
}

/// Deterministic (η = 0) DDIM transition; returns `(x̂_0, x_{t_to})`.
pub fn ddim_step(
    x_t: &[f64],
    eps: &[f64],
    t_from: usize,
    t_to: usize,
    schedule: &DiffusionSchedule,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if t_from <= t_to {
        return Err(invalid(format!("timestep order violated: {t_from} -> {t_to}")));
    }
    if t_from > schedule.train_steps() {
        return Err(invalid(format!("timestep {t_from} beyond schedule")));
    }
    if x_t.len() != eps.len() {
        return Err(invalid("noise prediction has the wrong length"));
    }
    let (a_from, a_to) = (schedule.alpha_bar(t_from), schedule.alpha_bar(t_to));
    let (s_from, n_from) = (a_from.sqrt(), (1.0 - a_from).sqrt());
    let (s_to, n_to) = (a_to.sqrt(), (1.0 - a_to).sqrt());
    let x0: Vec<f64> = x_t
        .iter()
        .zip(eps)
        .map(|(x, e)| (x - n_from * e) / s_from)
        .collect();
    let next = x0.iter().zip(eps).map(|(x0, e)| s_to * x0 + n_to * e).collect();
    Ok((x0, next))
}

/// Seeded standard-normal starting latent.
pub fn initial_noise(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Unguided DDIM from seeded noise; returns the final `x̂_0`.
pub fn ddim_sample(
    denoiser: &dyn Denoiser,
    schedule: &DiffusionSchedule,
    len: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut x = initial_noise(len, seed);
    let mut x0 = x.clone();
    for pair in schedule.timesteps().windows(2) {
        let eps = denoiser.predict_noise(&x, pair[0], schedule);
        let (est, next) = ddim_step(&x, &eps, pair[0], pair[1], schedule)?;
        x0 = est;
        x = next;
    }
    Ok(x0)
}
