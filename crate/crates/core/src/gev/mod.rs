//! Generalized extreme value distribution: density, likelihood,
//! maximum-likelihood fitting and distribution moments.
//!
//! ```text
//! f(x | ξ, μ, σ) = (1/σ) t(x)^(ξ+1) exp(-t(x))
//! t(x) = (1 + ξ (x - μ)/σ)^(-1/ξ)   for ξ ≠ 0
//!        exp(-(x - μ)/σ)            for ξ = 0 (Gumbel)
//! ```
//!
//! The support is `1 + ξ (x - μ)/σ > 0`.

mod simplex;

pub use simplex::{minimize, SimplexOptions, SimplexResult};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Below this |ξ| the Gumbel formulas are used.
pub const GUMBEL_THRESHOLD: f64 = 1e-8;

/// Below this |ξ| the moment factors switch to their Taylor series.
const MOMENT_SERIES_THRESHOLD: f64 = 1e-3;

const ZETA: [f64; 7] = [
    0.0,
    0.0,
    1.644_934_066_848_226_4,
    1.202_056_903_159_594_2,
    1.082_323_233_711_138_2,
    1.036_927_755_143_369_9,
    1.017_343_061_984_449_1,
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GevError {
    #[error("invalid GEV parameters: {0}")]
    InvalidParams(String),
    #[error("empty sample")]
    EmptySample,
    #[error("{n} samples, at least {min} required")]
    InsufficientSamples { n: usize, min: usize },
    #[error("sample {index} is not finite")]
    NonFiniteSample { index: usize },
    #[error("samples have zero variance")]
    DegenerateSamples,
    #[error("fit did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("mean undefined for shape {shape} >= 1")]
    MeanUndefined { shape: f64 },
    #[error("standard deviation undefined for shape {shape} >= 1/2")]
    StdUndefined { shape: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    pub shape: f64,
    pub loc: f64,
    pub scale: f64,
}

impl GevParams {
    pub fn new(shape: f64, loc: f64, scale: f64) -> Result<Self, GevError> {
        if !(shape.is_finite() && loc.is_finite()) {
            return Err(GevError::InvalidParams(format!(
                "shape {shape} and loc {loc} must be finite"
            )));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(GevError::InvalidParams(format!(
                "scale must be positive, got {scale}"
            )));
        }
        Ok(Self { shape, loc, scale })
    }

    fn is_gumbel(&self) -> bool {
        self.shape.abs() < GUMBEL_THRESHOLD
    }

    /// `ln t(x)`, or `None` outside the support.
    fn ln_t(&self, x: f64) -> Option<f64> {
        let z = (x - self.loc) / self.scale;
        if self.is_gumbel() {
            return Some(-z);
        }
        let arg = self.shape * z;
        if arg <= -1.0 {
            return None;
        }
        Some(-arg.ln_1p() / self.shape)
    }

    pub fn in_support(&self, x: f64) -> bool {
        self.ln_t(x).is_some()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match self.ln_t(x) {
            Some(ln_t) => -self.scale.ln() + (self.shape + 1.0) * ln_t - ln_t.exp(),
            None => f64::NEG_INFINITY,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.ln_t(x) {
            Some(ln_t) => (-ln_t.exp()).exp(),
            // below the lower end point for ξ > 0, above the upper one for ξ < 0
            None if self.shape > 0.0 => 0.0,
            None => 1.0,
        }
    }

    /// Inverse CDF for `u` in (0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        let y = -u.ln();
        if self.is_gumbel() {
            self.loc - self.scale * y.ln()
        } else {
            self.loc + self.scale * ((-self.shape * y.ln()).exp_m1()) / self.shape
        }
    }

    /// Distribution mean and standard deviation.
    pub fn moments(&self) -> Result<(f64, f64), GevError> {
        gev_moments(self)
    }
}

pub fn gev_pdf(x: f64, p: &GevParams) -> f64 {
    p.pdf(x)
}

/// Sum of log densities; `-∞` when any sample lies outside the support.
pub fn gev_loglik(samples: &[f64], p: &GevParams) -> Result<f64, GevError> {
    if samples.is_empty() {
        return Err(GevError::EmptySample);
    }
    Ok(loglik_unchecked(samples, p))
}

fn loglik_unchecked(samples: &[f64], p: &GevParams) -> f64 {
    let mut total = 0.0;
    for &x in samples {
        let l = p.ln_pdf(x);
        if l == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        total += l;
    }
    total
}

/// `expm1(x)/x`, continuous at zero.
fn expm1_ratio(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.exp_m1() / x
    }
}

/// `ln Γ(1 - ξ) / ξ` from the series `γξ + Σ_{k≥2} ζ(k) ξ^k / k`.
fn ln_gamma_1m_over(shape: f64) -> f64 {
    let mut sum = EULER_GAMMA;
    let mut pow = 1.0;
    for (k, zeta) in ZETA.iter().enumerate().skip(2) {
        pow *= shape;
        sum += zeta * pow / k as f64;
    }
    sum
}

/// Returns `(Γ(1-ξ) - 1)/ξ`, the standardized mean offset.
fn mean_factor(shape: f64) -> f64 {
    if shape.abs() < MOMENT_SERIES_THRESHOLD {
        let l_over = ln_gamma_1m_over(shape);
        l_over * expm1_ratio(l_over * shape)
    } else {
        (ln_gamma(1.0 - shape).exp() - 1.0) / shape
    }
}

/// Returns `(Γ(1-2ξ) - Γ(1-ξ)²)/ξ²`, the standardized variance.
fn variance_factor(shape: f64) -> f64 {
    if shape.abs() < MOMENT_SERIES_THRESHOLD {
        // Γ(1-2ξ)/Γ(1-ξ)² = exp(D) with D = Σ_{k≥2} ζ(k) (2^k - 2) ξ^k / k
        let mut d_over = 0.0;
        let mut pow = 1.0;
        for (k, zeta) in ZETA.iter().enumerate().skip(2) {
            d_over += zeta * ((1u32 << k) - 2) as f64 / k as f64 * pow;
            pow *= shape;
        }
        let d = d_over * shape * shape;
        let gamma1 = (ln_gamma_1m_over(shape) * shape).exp();
        gamma1 * gamma1 * d_over * expm1_ratio(d)
    } else {
        let g1 = ln_gamma(1.0 - shape).exp();
        let g2 = ln_gamma(1.0 - 2.0 * shape).exp();
        (g2 - g1 * g1) / (shape * shape)
    }
}

/// Mean and standard deviation of the distribution.
pub fn gev_moments(p: &GevParams) -> Result<(f64, f64), GevError> {
    if p.shape >= 1.0 {
        return Err(GevError::MeanUndefined { shape: p.shape });
    }
    if p.shape >= 0.5 {
        return Err(GevError::StdUndefined { shape: p.shape });
    }
    let mean = p.loc + p.scale * mean_factor(p.shape);
    let std = p.scale * variance_factor(p.shape).sqrt();
    Ok((mean, std))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub min_samples: usize,
    pub max_iter: usize,
    pub ftol: f64,
    pub xtol: f64,
    /// Shape used for the moment-based starting point.
    pub initial_shape: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            min_samples: 20,
            max_iter: 2000,
            ftol: 1e-9,
            xtol: 1e-8,
            initial_shape: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub initial: GevParams,
    pub initial_loglik: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GevFit {
    pub params: GevParams,
    pub report: FitReport,
}

/// Gumbel moment-matched start: scale from the sample standard deviation,
/// location from the mean.
pub fn moment_start(samples: &[f64], shape: f64) -> Result<GevParams, GevError> {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let std = var.sqrt();
    if !(std > 0.0) || std <= 1e-12 * mean.abs().max(1.0) {
        return Err(GevError::DegenerateSamples);
    }
    let scale = std * 6f64.sqrt() / std::f64::consts::PI;
    GevParams::new(shape, mean - EULER_GAMMA * scale, scale)
}

/// Maximum-likelihood fit by Nelder–Mead over `(ξ, (μ-μ₀)/σ₀, ln(σ/σ₀))`.
/// Candidates leaving the support score `-∞` and are rejected.
pub fn gev_fit_mle(samples: &[f64], opts: &FitOptions) -> Result<GevFit, GevError> {
    if samples.len() < opts.min_samples.max(1) {
        return Err(GevError::InsufficientSamples {
            n: samples.len(),
            min: opts.min_samples,
        });
    }
    if let Some(index) = samples.iter().position(|x| !x.is_finite()) {
        return Err(GevError::NonFiniteSample { index });
    }

    let mut initial = moment_start(samples, opts.initial_shape)?;
    let mut initial_loglik = loglik_unchecked(samples, &initial);
    if !initial_loglik.is_finite() {
        initial = moment_start(samples, 0.0)?;
        initial_loglik = loglik_unchecked(samples, &initial);
    }
    let (loc0, scale0) = (initial.loc, initial.scale);

    let decode = |z: &[f64]| GevParams {
        shape: z[0],
        loc: loc0 + scale0 * z[1],
        scale: scale0 * z[2].exp(),
    };
    let objective = |z: &[f64]| {
        let p = decode(z);
        if !(p.scale.is_finite() && p.scale > 0.0) {
            return f64::INFINITY;
        }
        -loglik_unchecked(samples, &p)
    };

    let simplex_opts = SimplexOptions {
        max_iter: opts.max_iter,
        ftol: opts.ftol,
        xtol: opts.xtol,
    };
    let steps = [0.1, 0.1, 0.1];
    let mut z = vec![initial.shape, 0.0, 0.0];
    let mut best = f64::INFINITY;
    let mut iterations = 0;
    // restart from the best vertex until a fresh simplex no longer improves
    for _ in 0..8 {
        let remaining = opts.max_iter.saturating_sub(iterations);
        let result = minimize(
            objective,
            &z,
            &steps,
            &SimplexOptions {
                max_iter: remaining,
                ..simplex_opts
            },
        );
        iterations += result.iterations;
        if !result.converged {
            return Err(GevError::NotConverged { iterations });
        }
        let improvement = best - result.f;
        z = result.x;
        best = result.f;
        if improvement <= opts.ftol {
            break;
        }
    }

    let params = decode(&z);
    Ok(GevFit {
        params,
        report: FitReport {
            loglik: -best,
            iterations,
            converged: true,
            initial,
            initial_loglik,
        },
    })
}
