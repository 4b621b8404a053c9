//! Ornstein-Uhlenbeck simulation scenarios with serially correlated curves.
//!
//! Each curve is a stationary OU process sampled exactly on its grid by the
//! Markov recursion `Z(t_j) = Z(t_{j-1}) e^{-theta dt} + eps_j`. The driving
//! Brownian motions of consecutive curves are correlated through their
//! standardized increments, `e_{i+1} = rho e_i + sqrt(1 - rho^2) fresh`, which
//! gives `Cov(B_i(t), B_{i+b}(s)) = rho^b min(t, s)`. Initial values are drawn
//! independently across curves; with that choice the lagged kernels are
//! exactly [`analytic_kernel`].

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mean_diff::{CurveMatrix, SampleKind};
use crate::quadrature::EvalGrid;
use crate::weights::DesignGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OUParams {
    pub theta: f64,
    pub sigma: f64,
    pub rho_b: f64,
    /// Standard deviation of the i.i.d. observation noise.
    pub sigma_eps: f64,
}

impl Default for OUParams {
    fn default() -> Self {
        Self {
            theta: 1.0,
            sigma: 4.0,
            rho_b: 0.5,
            sigma_eps: 0.1,
        }
    }
}

impl OUParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.theta > 0.0
            && self.theta.is_finite()
            && self.sigma > 0.0
            && self.sigma.is_finite()
            && self.rho_b.abs() < 1.0
            && self.sigma_eps >= 0.0
            && self.sigma_eps.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("{self:?}")))
        }
    }

    /// `sigma^2 / (2 theta)`.
    pub fn stationary_variance(&self) -> f64 {
        self.sigma * self.sigma / (2.0 * self.theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanKind {
    /// `delta = 2`.
    Null,
    /// `delta(t) = 2 - sin(pi (2t - 1)) e^{-2 |2t - 1|}`.
    Alternative,
}

impl MeanKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MeanKind::Null => "null",
            MeanKind::Alternative => "alternative",
        }
    }
}

/// `3 sin(1.5 pi (2t - 1)) e^{-2 |2t - 1|}`.
pub fn mu_sparse(t: f64) -> f64 {
    let x = 2.0 * t - 1.0;
    3.0 * (1.5 * std::f64::consts::PI * x).sin() * (-2.0 * x.abs()).exp()
}

pub fn delta(kind: MeanKind, t: f64) -> f64 {
    match kind {
        MeanKind::Null => 2.0,
        MeanKind::Alternative => {
            let x = 2.0 * t - 1.0;
            2.0 - (std::f64::consts::PI * x).sin() * (-2.0 * x.abs()).exp()
        }
    }
}

pub fn mu_dense(kind: MeanKind, t: f64) -> f64 {
    mu_sparse(t) - delta(kind, t)
}

/// `Cov(Z_i(t), Z_{i+b}(s))`.
pub fn analytic_kernel(params: &OUParams, t: f64, s: f64, b: i64) -> f64 {
    let decay = (-params.theta * (t - s).abs()).exp();
    let origin = (-params.theta * (t + s)).exp();
    let lagged = params.rho_b.powi(b.unsigned_abs() as i32) * (decay - origin);
    let own = if b == 0 { origin } else { 0.0 };
    params.stationary_variance() * (lagged + own)
}

/// Truncation of the long-run lag sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LongRunTruncation {
    /// All lags (geometric series).
    Infinite,
    /// Lags `1..=m` with unit weights.
    Partial(usize),
    /// Lags `1..=m` with Bartlett weights `1 - b / (m + 1)`.
    Bartlett(usize),
}

/// `Gamma(t, s) + sum_b w_b (Gamma(t, s; b) + Gamma(t, s; -b))`.
pub fn analytic_longrun(params: &OUParams, t: f64, s: f64, truncation: LongRunTruncation) -> f64 {
    let lag0 = analytic_kernel(params, t, s, 0);
    let rho = params.rho_b;
    // Gamma(t, s; b) = Gamma(t, s; -b) = rho^b * base for b >= 1
    let base = params.stationary_variance()
        * ((-params.theta * (t - s).abs()).exp() - (-params.theta * (t + s)).exp());
    let factor = match truncation {
        LongRunTruncation::Infinite => rho / (1.0 - rho),
        LongRunTruncation::Partial(m) => (1..=m).map(|b| rho.powi(b as i32)).sum(),
        LongRunTruncation::Bartlett(m) => (1..=m)
            .map(|b| (1.0 - b as f64 / (m as f64 + 1.0)) * rho.powi(b as i32))
            .sum(),
    };
    lag0 + 2.0 * factor * base
}

/// Latent OU values `n × p` (no mean, no noise).
pub fn simulate_latent(params: &OUParams, n: usize, grid: &DesignGrid, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    params.validate()?;
    let pts = grid.points();
    let p = pts.len();
    let theta = params.theta;
    let var0 = params.stationary_variance();
    let decay: Vec<f64> = (0..p)
        .map(|j| {
            let prev = if j == 0 { 0.0 } else { pts[j - 1] };
            (-theta * (pts[j] - prev)).exp()
        })
        .collect();
    let step_sd: Vec<f64> = decay.iter().map(|a| (var0 * (1.0 - a * a)).sqrt()).collect();
    let rho = params.rho_b;
    let fresh_scale = (1.0 - rho * rho).sqrt();

    let mut z = DMatrix::zeros(n, p);
    let mut innov = vec![0.0; p];
    for i in 0..n {
        for e in innov.iter_mut() {
            let fresh: f64 = rng.sample(StandardNormal);
            *e = if i == 0 { fresh } else { rho * *e + fresh_scale * fresh };
        }
        let start: f64 = rng.sample(StandardNormal);
        let mut level = start * var0.sqrt();
        for j in 0..p {
            level = level * decay[j] + step_sd[j] * innov[j];
            z[(i, j)] = level;
        }
    }
    Ok(z)
}

/// Observations `mean(t_j) + Z_i(t_j) + eps_ij`.
pub fn simulate_sample(
    params: &OUParams,
    n: usize,
    grid: &DesignGrid,
    mean_fn: impl Fn(f64) -> f64,
    kind: SampleKind,
    seed: u64,
) -> Result<CurveMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_with(params, n, grid, &mean_fn, kind, &mut rng)
}

fn simulate_with(
    params: &OUParams,
    n: usize,
    grid: &DesignGrid,
    mean_fn: &dyn Fn(f64) -> f64,
    kind: SampleKind,
    rng: &mut impl Rng,
) -> Result<CurveMatrix> {
    let mut y = simulate_latent(params, n, grid, rng)?;
    let means: Vec<f64> = grid.points().iter().map(|&t| mean_fn(t)).collect();
    for i in 0..n {
        for (j, m) in means.iter().enumerate() {
            let noise: f64 = rng.sample(StandardNormal);
            y[(i, j)] += m + params.sigma_eps * noise;
        }
    }
    CurveMatrix::new(y, grid.clone(), kind)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n: usize,
    pub p: usize,
    pub n_dense: usize,
    pub p_dense: usize,
    pub mean: MeanKind,
}

impl ScenarioSpec {
    /// Dense sample size `round(n / ratio)`.
    pub fn with_ratio(n: usize, p: usize, p_dense: usize, ratio: f64, mean: MeanKind) -> Self {
        Self {
            n,
            p,
            n_dense: (n as f64 / ratio).round() as usize,
            p_dense,
            mean,
        }
    }

    /// `n / n_dense`.
    pub fn ratio(&self) -> f64 {
        self.n as f64 / self.n_dense as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n_dense < 2 || self.p < 3 || self.p_dense < 3 {
            return Err(Error::InvalidParams(format!("scenario too small: {self:?}")));
        }
        Ok(())
    }
}

/// True mean functions on the evaluation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub delta: Vec<f64>,
    pub centered_delta: Vec<f64>,
    pub mu_sparse: Vec<f64>,
    pub mu_dense: Vec<f64>,
}

impl Truth {
    pub fn on(eval_grid: &EvalGrid, kind: MeanKind) -> Self {
        let pts = eval_grid.points();
        let delta_v: Vec<f64> = pts.iter().map(|&t| delta(kind, t)).collect();
        let avg = eval_grid.integrate(&delta_v);
        Self {
            centered_delta: delta_v.iter().map(|d| d - avg).collect(),
            mu_sparse: pts.iter().map(|&t| mu_sparse(t)).collect(),
            mu_dense: pts.iter().map(|&t| mu_dense(kind, t)).collect(),
            delta: delta_v,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub sparse: CurveMatrix,
    pub dense: CurveMatrix,
    pub truth: Truth,
}

/// Sparse and dense samples on midpoint grids, simulated from independent
/// streams of one seed.
pub fn build_scenario(spec: &ScenarioSpec, params: &OUParams, eval_grid: &EvalGrid, seed: u64) -> Result<Scenario> {
    spec.validate()?;
    let sparse_grid = DesignGrid::midpoints(spec.p)?;
    let dense_grid = DesignGrid::midpoints(spec.p_dense)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let sparse = simulate_with(params, spec.n, &sparse_grid, &mu_sparse, SampleKind::Sparse, &mut rng)?;
    rng.set_stream(2);
    rng.set_word_pos(0);
    let kind = spec.mean;
    let dense = simulate_with(
        params,
        spec.n_dense,
        &dense_grid,
        &move |t| mu_dense(kind, t),
        SampleKind::Dense,
        &mut rng,
    )?;
    Ok(Scenario {
        spec: *spec,
        sparse,
        dense,
        truth: Truth::on(eval_grid, spec.mean),
    })
}
