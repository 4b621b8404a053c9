//! End-to-end band construction for one pair of samples.
//!
//! [`BandEngine`] precomputes every smoother for fixed grids and bandwidths,
//! so repeated fits (Monte Carlo replications, groups sharing a design) only
//! pay for the data-dependent products.

use serde::{Deserialize, Serialize};

use crate::bootstrap::{
    build_band, residual_processes, sup_quantile, BandResult, BootstrapInputs, MultiplierConfig,
    Regime, ResidualCentering,
};
use crate::covkernel::{pooled_variance, project_center, KernelField, LongRunEstimator};
use crate::error::{Error, Result};
use crate::mean_diff::{center, integral_ci, CurveMatrix, ScalarCI, TwoSampleFit, TwoSampleSmoothers};
use crate::quadrature::EvalGrid;
use crate::weights::DesignGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSettings {
    pub h: f64,
    pub h_dense: f64,
    pub degree: usize,
    pub degree_dense: usize,
    /// Sparse kernel bandwidths for lags `0..=m`.
    pub kernel_bandwidths: Vec<f64>,
    /// Dense kernel bandwidths for lags `0..=m_dense`.
    pub kernel_bandwidths_dense: Vec<f64>,
    pub alpha: f64,
    pub n_boot: usize,
    pub multiplier: MultiplierConfig,
    pub centering: ResidualCentering,
    pub regime: Regime,
}

/// Kernel estimates of one sample.
#[derive(Debug, Clone)]
pub struct SampleKernels {
    pub lag0: KernelField,
    pub long_run: KernelField,
}

#[derive(Debug, Clone)]
pub struct BandAnalysis {
    pub fit: TwoSampleFit,
    pub ratio: f64,
    pub sparse_kernels: SampleKernels,
    pub dense_kernels: SampleKernels,
    /// Diagonal of the pooled long-run kernel.
    pub variance: Vec<f64>,
    /// Diagonal of the projected pooled long-run kernel.
    pub centered_variance: Vec<f64>,
    /// Band for `delta`.
    pub delta_band: BandResult,
    /// Band for the centered difference; carries the constant-difference test.
    pub centered_band: BandResult,
    pub integral: ScalarCI,
}

#[derive(Debug, Clone)]
pub struct BandEngine {
    eval_grid: EvalGrid,
    settings: BandSettings,
    smoothers: TwoSampleSmoothers,
    sparse_kernel: LongRunEstimator,
    dense_kernel: LongRunEstimator,
}

impl BandEngine {
    pub fn new(
        sparse_grid: &DesignGrid,
        dense_grid: &DesignGrid,
        eval_grid: &EvalGrid,
        settings: BandSettings,
    ) -> Result<Self> {
        if !(settings.alpha > 0.0 && settings.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must be in (0, 1), got {}", settings.alpha)));
        }
        let smoothers = TwoSampleSmoothers::new(
            sparse_grid,
            dense_grid,
            eval_grid,
            settings.h,
            settings.h_dense,
            settings.degree,
            settings.degree_dense,
        )?;
        let sparse_kernel = LongRunEstimator::new(sparse_grid, eval_grid, &settings.kernel_bandwidths)?;
        let dense_kernel = LongRunEstimator::new(dense_grid, eval_grid, &settings.kernel_bandwidths_dense)?;
        Ok(Self {
            eval_grid: eval_grid.clone(),
            settings,
            smoothers,
            sparse_kernel,
            dense_kernel,
        })
    }

    pub fn settings(&self) -> &BandSettings {
        &self.settings
    }

    /// Replaces the multiplier seed, keeping every precomputed smoother.
    pub fn reseed(&mut self, seed: u64) {
        self.settings.multiplier.seed = seed;
    }

    pub fn eval_grid(&self) -> &EvalGrid {
        &self.eval_grid
    }

    pub fn smoothers(&self) -> &TwoSampleSmoothers {
        &self.smoothers
    }

    /// Mean fit only.
    pub fn fit(&self, sparse: &CurveMatrix, dense: &CurveMatrix) -> Result<TwoSampleFit> {
        self.smoothers.fit(sparse, dense)
    }

    /// Kernels and variance curves `(sparse, dense, pooled diagonal, projected pooled diagonal)`.
    pub fn kernels(
        &self,
        sparse: &CurveMatrix,
        dense: &CurveMatrix,
    ) -> Result<(SampleKernels, SampleKernels, Vec<f64>, Vec<f64>)> {
        let (s0, slr) = self.sparse_kernel.estimate(sparse.values())?;
        let (d0, dlr) = self.dense_kernel.estimate(dense.values())?;
        let ratio = sparse.n_curves() as f64 / dense.n_curves() as f64;
        let weight = match self.settings.regime {
            Regime::Pooled => ratio,
            Regime::SparseOnly => 0.0,
        };
        let pooled = pooled_variance(&slr, &dlr, weight)?;
        let variance = pooled.diagonal();
        let centered_variance = project_center(&pooled).diagonal();
        Ok((
            SampleKernels { lag0: s0, long_run: slr },
            SampleKernels { lag0: d0, long_run: dlr },
            variance,
            centered_variance,
        ))
    }

    pub fn run(&self, sparse: &CurveMatrix, dense: &CurveMatrix) -> Result<BandAnalysis> {
        let fit = self.fit(sparse, dense)?;
        let (sparse_kernels, dense_kernels, variance, centered_variance) = self.kernels(sparse, dense)?;
        let n = sparse.n_curves();
        let ratio = n as f64 / dense.n_curves() as f64;
        let s = &self.settings;
        let res = residual_processes(sparse, dense, &self.smoothers, &fit, s.centering)?;

        let raw = BootstrapInputs::new(&res, &variance, ratio, false, s.regime, &self.eval_grid)?;
        let q_raw = sup_quantile(&raw.sup_norms(&s.multiplier, s.n_boot), s.alpha)?;
        let cen = BootstrapInputs::new(&res, &centered_variance, ratio, true, s.regime, &self.eval_grid)?;
        let q_cen = sup_quantile(&cen.sup_norms(&s.multiplier, s.n_boot), s.alpha)?;

        let delta_band = build_band(&fit.delta, &variance, q_raw, n, s.alpha, false)?;
        let centered_band = build_band(&center(&fit.delta), &centered_variance, q_cen, n, s.alpha, true)?;

        let weight = match s.regime {
            Regime::Pooled => ratio,
            Regime::SparseOnly => 0.0,
        };
        let pooled = pooled_variance(&sparse_kernels.long_run, &dense_kernels.long_run, weight)?;
        let integral = integral_ci(&fit.delta, &pooled, n, 1.0 - s.alpha)?;

        Ok(BandAnalysis {
            fit,
            ratio,
            sparse_kernels,
            dense_kernels,
            variance,
            centered_variance,
            delta_band,
            centered_band,
            integral,
        })
    }
}
