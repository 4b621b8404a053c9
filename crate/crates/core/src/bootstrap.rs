//! Dependent multiplier bootstrap for sup-norm quantiles and uniform bands.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covkernel::check_variance;
use crate::error::{Error, Result};
use crate::mean_diff::{CurveEstimate, CurveMatrix, TwoSampleFit, TwoSampleSmoothers};
use crate::quadrature::EvalGrid;

/// Minimum number of bootstrap replicates for a quantile.
pub const MIN_REPLICATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierKind {
    /// Flat taper `1 / (2l - 1)` on `|b| < l`.
    Kappa1,
    /// Bartlett taper `max(0, (1 - |b|/l) / l)`.
    #[default]
    Kappa2,
    IidGaussian,
    Rademacher,
}

impl MultiplierKind {
    pub fn is_dependent(self) -> bool {
        matches!(self, MultiplierKind::Kappa1 | MultiplierKind::Kappa2)
    }
}

/// Scale of the base normals `W` behind tapered multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseScale {
    /// `sd(W) = (sum_b kappa(b)^2)^{-1/2}`, so every taper yields unit-variance
    /// multipliers. Coincides with [`BaseScale::StdDev`] for the flat taper.
    #[default]
    UnitVariance,
    /// `sd(W) = 1 / sqrt(q)`.
    StdDev,
    /// `Var(W) = 1 / sqrt(q)`.
    Variance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierConfig {
    pub kind: MultiplierKind,
    pub seed: u64,
    #[serde(default)]
    pub base_scale: BaseScale,
}

impl MultiplierConfig {
    pub fn new(kind: MultiplierKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            base_scale: BaseScale::default(),
        }
    }
}

/// `l(n) = floor(2 n^{1/3})`, computed exactly as the largest `l` with
/// `l^3 <= 8n`.
pub fn block_length(n: usize) -> usize {
    let target = 8 * n as u128;
    let mut l = (2.0 * (n as f64).cbrt()).floor() as u128;
    while l * l * l > target {
        l -= 1;
    }
    while (l + 1).pow(3) <= target {
        l += 1;
    }
    (l as usize).max(1)
}

/// `q(n) = 1 / (2 l(n) - 1)`.
pub fn block_q(n: usize) -> f64 {
    1.0 / (2 * block_length(n) - 1) as f64
}

/// Taper weight `kappa(b; n)`; zero for independent kinds except at `b = 0`.
pub fn taper(kind: MultiplierKind, b: i64, n: usize) -> f64 {
    let l = block_length(n) as i64;
    let ab = b.abs();
    match kind {
        MultiplierKind::Kappa1 => {
            if ab < l {
                1.0 / (2 * l - 1) as f64
            } else {
                0.0
            }
        }
        MultiplierKind::Kappa2 => ((1.0 - ab as f64 / l as f64) / l as f64).max(0.0),
        MultiplierKind::IidGaussian | MultiplierKind::Rademacher => {
            if b == 0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Channel of a multiplier sequence within one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Sparse,
    Dense,
}

/// Multipliers for replicate `replicate` on the sparse channel.
pub fn make_multipliers(n: usize, config: &MultiplierConfig, replicate: u64) -> Vec<f64> {
    make_channel_multipliers(n, config, replicate, Channel::Sparse)
}

/// Each `(seed, replicate, channel)` owns one ChaCha stream.
pub fn make_channel_multipliers(n: usize, config: &MultiplierConfig, replicate: u64, channel: Channel) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let lane = match channel {
        Channel::Sparse => 0,
        Channel::Dense => 1,
    };
    rng.set_stream(replicate.wrapping_mul(2).wrapping_add(lane));
    match config.kind {
        MultiplierKind::IidGaussian => (0..n).map(|_| rng.sample(StandardNormal)).collect(),
        MultiplierKind::Rademacher => (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect(),
        kind => {
            let l = block_length(n);
            let weights: Vec<f64> = (-(l as i64 - 1)..l as i64).map(|b| taper(kind, b, n)).collect();
            let scale = match config.base_scale {
                BaseScale::UnitVariance => 1.0 / weights.iter().map(|w| w * w).sum::<f64>().sqrt(),
                BaseScale::StdDev => (1.0 / block_q(n)).sqrt(),
                BaseScale::Variance => (1.0 / block_q(n)).sqrt().sqrt(),
            };
            // base index k stands for W_{k + 2 - l}, covering 2 - l ..= n + l - 1
            let base: Vec<f64> = (0..n + 2 * l - 2)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            (0..n).map(|i| weights.iter().enumerate().map(|(k, w)| w * base[i + k]).sum()).collect()
        }
    }
}

/// Whether residual processes are recentred by their average over curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualCentering {
    /// Residuals around the fitted means only.
    AsFitted,
    /// Additionally subtract the across-curve mean, so rows average to zero.
    #[default]
    SampleMean,
}

/// Smoothed per-curve residual processes on the evaluation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualProcesses {
    /// `n × G`.
    pub sparse: DMatrix<f64>,
    /// `n_dense × G`.
    pub dense: DMatrix<f64>,
}

fn subtract_column_means(m: &mut DMatrix<f64>) {
    let n = m.nrows() as f64;
    for mut col in m.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
}

/// `X_i^s(t) = sum_j w_j(t) (Y_ij - mu_s(t))` and
/// `X_k^d(t) = sum_j w_j(t) sum_l w_l(t_j) (Y_kl - mu_d(t))`.
pub fn residual_processes(
    sparse: &CurveMatrix,
    dense: &CurveMatrix,
    smoothers: &TwoSampleSmoothers,
    fit: &TwoSampleFit,
    centering: ResidualCentering,
) -> Result<ResidualProcesses> {
    let ws = smoothers.sparse_eval.matrix();
    let wd = smoothers.dense_at_sparse.matrix();
    if sparse.n_points() != ws.ncols() || dense.n_points() != wd.ncols() {
        return Err(Error::GridMismatch);
    }
    // weight rows sum to one, so the fitted mean can be subtracted after smoothing
    let mut xs = sparse.values() * ws.transpose();
    let composite = wd.transpose() * ws.transpose();
    let mut xd = dense.values() * composite;
    for (a, (ms, md)) in fit.sparse_mean.values.iter().zip(&fit.dense_mean.values).enumerate() {
        xs.column_mut(a).add_scalar_mut(-ms);
        xd.column_mut(a).add_scalar_mut(-md);
    }
    if centering == ResidualCentering::SampleMean {
        subtract_column_means(&mut xs);
        subtract_column_means(&mut xd);
    }
    Ok(ResidualProcesses { sparse: xs, dense: xd })
}

/// Which samples enter the bootstrap numerator and variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Both samples, dense part weighted by `n / n_dense`.
    #[default]
    Pooled,
    /// Sparse sample only; for a dense sample much larger than the sparse one.
    SparseOnly,
}

/// Prepared numerator inputs: residual processes, optionally with their
/// per-curve integrals removed, and the dense weight.
#[derive(Debug, Clone)]
pub struct BootstrapInputs {
    sparse: DMatrix<f64>,
    dense: Option<DMatrix<f64>>,
    ratio: f64,
    scale: Vec<f64>,
    centered: bool,
}

fn remove_row_integrals(m: &DMatrix<f64>, eval_grid: &EvalGrid) -> DMatrix<f64> {
    let w = eval_grid.weights();
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        let integral: f64 = row.iter().zip(w).map(|(x, w)| x * w).sum();
        row.add_scalar_mut(-integral);
    }
    out
}

impl BootstrapInputs {
    /// `variance` is the pooled variance curve (projected when `centered`).
    pub fn new(
        res: &ResidualProcesses,
        variance: &[f64],
        ratio: f64,
        centered: bool,
        regime: Regime,
        eval_grid: &EvalGrid,
    ) -> Result<Self> {
        if variance.len() != eval_grid.len() || res.sparse.ncols() != eval_grid.len() {
            return Err(Error::GridMismatch);
        }
        check_variance(eval_grid, variance)?;
        let n = res.sparse.nrows();
        let prep = |m: &DMatrix<f64>| if centered { remove_row_integrals(m, eval_grid) } else { m.clone() };
        let root_n = ((n - 1) as f64).sqrt();
        Ok(Self {
            sparse: prep(&res.sparse),
            dense: match regime {
                Regime::Pooled => Some(prep(&res.dense)),
                Regime::SparseOnly => None,
            },
            ratio,
            scale: variance.iter().map(|v| 1.0 / (root_n * v.sqrt())).collect(),
            centered,
        })
    }

    pub fn centered(&self) -> bool {
        self.centered
    }

    pub fn n_sparse(&self) -> usize {
        self.sparse.nrows()
    }

    pub fn n_dense(&self) -> usize {
        self.dense.as_ref().map_or(0, |d| d.nrows())
    }

    /// One replicate statistic `B(t)` from given multipliers.
    pub fn statistic(&self, xi: &[f64], eta: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.n_sparse() || (self.dense.is_some() && eta.len() != self.n_dense()) {
            return Err(Error::InvalidArgument("multiplier length does not match sample size".into()));
        }
        let mut num = self.sparse.tr_mul(&nalgebra::DVector::from_column_slice(xi));
        if let Some(d) = &self.dense {
            num += d.tr_mul(&nalgebra::DVector::from_column_slice(eta)) * self.ratio;
        }
        Ok(num.iter().zip(&self.scale).map(|(x, s)| x * s).collect())
    }

    /// Sup-norms of `replicates` statistics; multipliers come from
    /// `(seed, r)` so any subset of replicates is reproducible.
    pub fn sup_norms(&self, config: &MultiplierConfig, replicates: usize) -> Vec<f64> {
        const BATCH: usize = 100;
        let n = self.n_sparse();
        let nd = self.n_dense();
        let starts: Vec<usize> = (0..replicates).step_by(BATCH).collect();
        starts
            .into_par_iter()
            .flat_map_iter(|start| {
                let count = BATCH.min(replicates - start);
                let mut xi = DMatrix::zeros(count, n);
                let mut eta = DMatrix::zeros(count, nd);
                for r in 0..count {
                    let rep = (start + r) as u64;
                    xi.row_mut(r)
                        .copy_from_slice(&make_channel_multipliers(n, config, rep, Channel::Sparse));
                    if nd > 0 {
                        eta.row_mut(r)
                            .copy_from_slice(&make_channel_multipliers(nd, config, rep, Channel::Dense));
                    }
                }
                let mut num = &xi * &self.sparse;
                if let Some(d) = &self.dense {
                    num += (&eta * d) * self.ratio;
                }
                (0..count)
                    .map(|r| {
                        num.row(r)
                            .iter()
                            .zip(&self.scale)
                            .map(|(x, s)| (x * s).abs())
                            .fold(0.0, f64::max)
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    }
}

/// Statistic of one replicate given explicit multipliers.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_statistic(
    res: &ResidualProcesses,
    variance: &[f64],
    ratio: f64,
    xi: &[f64],
    eta: &[f64],
    centered: bool,
    eval_grid: &EvalGrid,
) -> Result<Vec<f64>> {
    BootstrapInputs::new(res, variance, ratio, centered, Regime::Pooled, eval_grid)?.statistic(xi, eta)
}

/// Order statistic `ceil((1 - alpha) N)` of the sup-norms.
pub fn sup_quantile(sups: &[f64], alpha: f64) -> Result<f64> {
    if sups.len() < MIN_REPLICATES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_REPLICATES} replicates, got {}",
            sups.len()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let mut sorted = sups.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // guard against 0.95 * 1000 = 950.0000000000001
    let rank = (((1.0 - alpha) * n as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(n) - 1])
}

/// Uniform confidence band and, for centered bands, the test for a constant
/// difference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandResult {
    pub t: Vec<f64>,
    pub estimate: Vec<f64>,
    pub se: Vec<f64>,
    pub quantile: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub alpha: f64,
    pub centered: bool,
    pub reject_constant: bool,
}

/// Studentized sup-statistic `sup_t |f(t)| sqrt(n - 1) / sqrt(var(t))`.
pub fn studentized_sup(values: &[f64], variance: &[f64], n: usize) -> f64 {
    let root_n = ((n - 1) as f64).sqrt();
    values
        .iter()
        .zip(variance)
        .map(|(v, var)| (v * root_n / var.sqrt()).abs())
        .fold(0.0, f64::max)
}

/// Band `estimate ± q sqrt(var) / sqrt(n - 1)`.
pub fn build_band(
    estimate: &CurveEstimate,
    variance: &[f64],
    quantile: f64,
    n: usize,
    alpha: f64,
    centered: bool,
) -> Result<BandResult> {
    if !(quantile >= 0.0) {
        return Err(Error::InvalidArgument(format!("quantile must be nonnegative, got {quantile}")));
    }
    if variance.len() != estimate.values.len() {
        return Err(Error::GridMismatch);
    }
    if n < 2 {
        return Err(Error::InvalidArgument("band needs n >= 2".into()));
    }
    check_variance(&estimate.eval_grid, variance)?;
    let root_n = ((n - 1) as f64).sqrt();
    let se: Vec<f64> = variance.iter().map(|v| v.sqrt() / root_n).collect();
    let lower = estimate.values.iter().zip(&se).map(|(e, s)| e - quantile * s).collect();
    let upper = estimate.values.iter().zip(&se).map(|(e, s)| e + quantile * s).collect();
    let reject_constant = centered && studentized_sup(&estimate.values, variance, n) > quantile;
    Ok(BandResult {
        t: estimate.eval_grid.points().to_vec(),
        estimate: estimate.values.clone(),
        se,
        quantile,
        lower,
        upper,
        alpha,
        centered,
        reject_constant,
    })
}
