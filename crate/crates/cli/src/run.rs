//! Orchestration behind the subcommands: bandwidth selection, bands,
//! kernels, CV traces and Monte-Carlo tables.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use dsfda_core::bootstrap::BandResult;
use dsfda_core::covkernel::{kernel_diagnostics, lag_bandwidths, KernelField, LongRunEstimator};
use dsfda_core::cv::{
    cv_delta_bandwidth, cv_kernel_bandwidth, cv_mean_bandwidth, default_candidates, make_folds, pool_results, CVResult,
};
use dsfda_core::dgp::{build_scenario, Scenario, ScenarioSpec};
use dsfda_core::mean_diff::{dense_mean, CurveMatrix};
use dsfda_core::pipeline::{BandAnalysis, BandEngine, BandSettings};
use dsfda_core::weights::DesignGrid;
use dsfda_core::{Error, EvalGrid, Result};
use serde::Serialize;
use serde_json::json;

use crate::config::{BandwidthMode, RunConfig, MIN_REPS};
use crate::ingest::{AffineTimeMap, GroupedDataset};

/// Bandwidths used for one group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selected {
    pub mode: BandwidthMode,
    pub h: f64,
    pub h_dense: f64,
    /// Sparse kernel bandwidths for lags `0..=max_lag`.
    pub kernel: Vec<f64>,
    pub kernel_dense: Vec<f64>,
}

fn required(name: &str, v: Option<f64>) -> Result<f64> {
    v.ok_or_else(|| Error::InvalidArgument(format!("bandwidth_mode = fixed needs '{name}'")))
}

fn fixed_kernels(cfg: &RunConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok((
        lag_bandwidths(required("kernel_h", cfg.kernel_h)?, cfg.max_lag, cfg.lag_factor),
        lag_bandwidths(required("kernel_h_dense", cfg.kernel_h_dense)?, cfg.max_lag_dense, cfg.lag_factor),
    ))
}

pub fn fixed_selection(cfg: &RunConfig) -> Result<Selected> {
    let (kernel, kernel_dense) = fixed_kernels(cfg)?;
    Ok(Selected {
        mode: BandwidthMode::Fixed,
        h: required("h", cfg.h)?,
        h_dense: required("h_dense", cfg.h_dense)?,
        kernel,
        kernel_dense,
    })
}

/// CV runs of one pool, per member group, and the pooled selection.
#[derive(Debug, Clone)]
pub struct PoolCv {
    pub dense_mean: Vec<CVResult>,
    pub delta: Vec<CVResult>,
    pub kernel: Vec<CVResult>,
    pub kernel_dense: Vec<CVResult>,
    pub selected: Selected,
}

fn candidates(explicit: &Option<Vec<f64>>, p: usize, count: usize) -> Vec<f64> {
    explicit.clone().unwrap_or_else(|| default_candidates(p, count))
}

/// hv-block CV over the groups of one pool. Scores are summed across
/// members, so all members share one selection. Kernel bandwidths come
/// from lag-0 CV grown by `lag_factor` per lag.
pub fn cv_pool(cfg: &RunConfig, members: &[(&CurveMatrix, &CurveMatrix)], eval: &EvalGrid) -> Result<PoolCv> {
    if members.is_empty() {
        return Err(Error::InvalidArgument("empty CV pool".into()));
    }
    let p = members.iter().map(|(s, _)| s.n_points()).min().unwrap_or(0);
    let p_dense = members.iter().map(|(_, d)| d.n_points()).min().unwrap_or(0);
    let cands = candidates(&cfg.candidates, p, cfg.n_candidates);
    let cands_dense = candidates(&cfg.candidates_dense, p_dense, cfg.n_candidates);
    let folds = |m: &CurveMatrix| make_folds(m.n_curves(), cfg.folds, cfg.gap);

    let dense_runs = members
        .iter()
        .map(|(_, d)| cv_mean_bandwidth(d, &cands_dense, cfg.degree_dense, &folds(d)?))
        .collect::<Result<Vec<_>>>()?;
    let h_dense = pool_results(&dense_runs)?.selected;

    let delta_runs = members
        .iter()
        .map(|(s, d)| {
            let dm = dense_mean(d, h_dense, cfg.degree_dense, eval)?;
            cv_delta_bandwidth(s, &dm, &cands, cfg.degree, &folds(s)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let h = pool_results(&delta_runs)?.selected;

    let kernel_runs = members
        .iter()
        .map(|(s, _)| cv_kernel_bandwidth(s, 0, &cands, &folds(s)?))
        .collect::<Result<Vec<_>>>()?;
    let kernel_dense_runs = members
        .iter()
        .map(|(_, d)| cv_kernel_bandwidth(d, 0, &cands_dense, &folds(d)?))
        .collect::<Result<Vec<_>>>()?;
    let k0 = pool_results(&kernel_runs)?.selected;
    let k0_dense = pool_results(&kernel_dense_runs)?.selected;

    Ok(PoolCv {
        selected: Selected {
            mode: BandwidthMode::Cv,
            h,
            h_dense,
            kernel: lag_bandwidths(k0, cfg.max_lag, cfg.lag_factor),
            kernel_dense: lag_bandwidths(k0_dense, cfg.max_lag_dense, cfg.lag_factor),
        },
        dense_mean: dense_runs,
        delta: delta_runs,
        kernel: kernel_runs,
        kernel_dense: kernel_dense_runs,
    })
}

/// Pools in first-appearance order with the indices of their groups.
fn pools(cfg: &RunConfig, data: &GroupedDataset) -> Vec<(String, Vec<usize>)> {
    let mut out: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, g) in data.groups.iter().enumerate() {
        let key = cfg.pool_of(&g.key);
        match out.iter_mut().find(|(k, _)| k == key) {
            Some((_, v)) => v.push(i),
            None => out.push((key.to_string(), vec![i])),
        }
    }
    out
}

/// Pool CV results and, per group, its pool index.
fn run_pools(cfg: &RunConfig, data: &GroupedDataset, eval: &EvalGrid) -> (Vec<(String, Result<PoolCv>)>, Vec<usize>) {
    let mut owner = vec![0; data.groups.len()];
    let results = pools(cfg, data)
        .into_iter()
        .enumerate()
        .map(|(k, (key, idx))| {
            for &i in &idx {
                owner[i] = k;
            }
            let members: Vec<_> = idx
                .iter()
                .map(|&i| (&data.groups[i].sparse.curves, &data.groups[i].dense.curves))
                .collect();
            (key, cv_pool(cfg, &members, eval))
        })
        .collect();
    (results, owner)
}

/// Selection per group, honouring the bandwidth mode.
pub fn select_bandwidths(cfg: &RunConfig, data: &GroupedDataset, eval: &EvalGrid) -> Vec<Result<Selected>> {
    match cfg.bandwidth_mode {
        BandwidthMode::Fixed => {
            let sel = fixed_selection(cfg);
            data.groups.iter().map(|_| sel.clone()).collect()
        }
        BandwidthMode::Cv => {
            let (results, owner) = run_pools(cfg, data, eval);
            owner
                .iter()
                .map(|&k| match &results[k].1 {
                    Ok(p) => Ok(p.selected.clone()),
                    Err(e) => Err(e.clone()),
                })
                .collect()
        }
    }
}

pub fn band_settings(cfg: &RunConfig, sel: &Selected, seed: u64) -> BandSettings {
    BandSettings {
        h: sel.h,
        h_dense: sel.h_dense,
        degree: cfg.degree,
        degree_dense: cfg.degree_dense,
        kernel_bandwidths: sel.kernel.clone(),
        kernel_bandwidths_dense: sel.kernel_dense.clone(),
        alpha: cfg.alpha,
        n_boot: cfg.n_boot,
        multiplier: cfg.multiplier_config(seed),
        centering: cfg.centering,
        regime: cfg.regime,
    }
}

pub fn eval_grid(cfg: &RunConfig) -> Result<EvalGrid> {
    EvalGrid::uniform(cfg.eval_points)
}

/// Outcome of one group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupStatus {
    pub group: String,
    pub ok: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub groups: Vec<GroupStatus>,
}

impl RunReport {
    pub fn all_ok(&self) -> bool {
        self.groups.iter().all(|g| g.ok)
    }

    fn record(&mut self, group: &str, outcome: Result<()>) {
        self.groups.push(GroupStatus {
            group: group.to_string(),
            ok: outcome.is_ok(),
            error: outcome.err().map(|e| e.to_string()),
        });
    }
}

/// File-system safe directory name for a group key.
pub fn group_dir(out: &Path, key: &str) -> PathBuf {
    let safe: String = key
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    out.join(if safe.is_empty() { "_".to_string() } else { safe })
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(f)?;
    Ok(())
}

fn make_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Band rows on the original time axis. With `flip` the band describes
/// `-delta`, so the bounds swap.
pub fn write_band_csv<W: Write>(out: W, bands: &[(&str, &BandResult)], map: &AffineTimeMap, flip: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "estimate", "se", "lower", "upper", "kind"])?;
    let sign = if flip { -1.0 } else { 1.0 };
    for (kind, b) in bands {
        for k in 0..b.t.len() {
            let (lo, hi) = if flip { (-b.upper[k], -b.lower[k]) } else { (b.lower[k], b.upper[k]) };
            w.write_record([
                map.to_original(b.t[k]).to_string(),
                (sign * b.estimate[k]).to_string(),
                b.se[k].to_string(),
                lo.to_string(),
                hi.to_string(),
                kind.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn band_summary(
    cfg: &RunConfig,
    key: &str,
    sel: &Selected,
    a: &BandAnalysis,
    n: usize,
    n_dense: usize,
) -> serde_json::Value {
    let ci = &a.integral;
    let (est, lo, hi) = if cfg.flip_sign {
        (-ci.estimate, -ci.upper, -ci.lower)
    } else {
        (ci.estimate, ci.lower, ci.upper)
    };
    let sparse_diag = kernel_diagnostics(&a.sparse_kernels.lag0, &a.sparse_kernels.long_run);
    let dense_diag = kernel_diagnostics(&a.dense_kernels.lag0, &a.dense_kernels.long_run);
    json!({
        "group": key,
        "n": n,
        "n_dense": n_dense,
        "ratio": a.ratio,
        "flip_sign": cfg.flip_sign,
        "bandwidths": sel,
        "lags": { "max_lag": cfg.max_lag, "max_lag_dense": cfg.max_lag_dense },
        "delta_band": { "quantile": a.delta_band.quantile, "alpha": a.delta_band.alpha },
        "centered_band": {
            "quantile": a.centered_band.quantile,
            "alpha": a.centered_band.alpha,
            "reject_constant": a.centered_band.reject_constant,
        },
        "reject_constant": a.centered_band.reject_constant,
        "mean_difference": { "estimate": est, "lower": lo, "upper": hi, "level": ci.level },
        "long_run_dominates": { "sparse": sparse_diag.long_run_dominates, "dense": dense_diag.long_run_dominates },
        "config": cfg,
    })
}

/// Result of `band` for one group.
#[derive(Debug, Clone)]
pub struct GroupBand {
    pub key: String,
    pub selected: Selected,
    pub analysis: BandAnalysis,
}

pub fn analyze_group(
    cfg: &RunConfig,
    sparse: &CurveMatrix,
    dense: &CurveMatrix,
    sel: &Selected,
    eval: &EvalGrid,
) -> Result<BandAnalysis> {
    BandEngine::new(sparse.grid(), dense.grid(), eval, band_settings(cfg, sel, cfg.seed))?.run(sparse, dense)
}

/// Bands for every group; writes `<out>/<group>/{band.csv, summary.json}`
/// and `<out>/summary.json`.
pub fn run_band(cfg: &RunConfig, data: &GroupedDataset) -> Result<(RunReport, Vec<GroupBand>)> {
    cfg.validate()?;
    let eval = eval_grid(cfg)?;
    make_dir(&cfg.output_dir)?;
    let selections = select_bandwidths(cfg, data, &eval);
    let mut report = RunReport { groups: Vec::new() };
    let mut bands = Vec::new();
    for (g, sel) in data.groups.iter().zip(selections) {
        let outcome = sel.and_then(|sel| {
            let a = analyze_group(cfg, &g.sparse.curves, &g.dense.curves, &sel, &eval)?;
            let dir = group_dir(&cfg.output_dir, &g.key);
            make_dir(&dir)?;
            write_band_csv(
                create(&dir.join("band.csv"))?,
                &[("delta", &a.delta_band), ("centered", &a.centered_band)],
                &data.time_map,
                cfg.flip_sign,
            )?;
            let summary = band_summary(cfg, &g.key, &sel, &a, g.sparse.curves.n_curves(), g.dense.curves.n_curves());
            write_json(&dir.join("summary.json"), &summary)?;
            bands.push(GroupBand {
                key: g.key.clone(),
                selected: sel,
                analysis: a,
            });
            Ok(())
        });
        report.record(&g.key, outcome);
    }
    write_json(
        &cfg.output_dir.join("summary.json"),
        &json!({ "groups": report.groups, "time_domain": data.time_map, "config": cfg }),
    )?;
    Ok((report, bands))
}

fn write_field_csv(path: &Path, f: &KernelField, map: &AffineTimeMap) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["t", "s", "value"])?;
    let pts = f.eval_grid.points();
    for (a, &t) in pts.iter().enumerate() {
        for (b, &s) in pts.iter().enumerate() {
            w.write_record([
                map.to_original(t).to_string(),
                map.to_original(s).to_string(),
                f.values[(a, b)].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Lag-0 and long-run kernels per group and sample; writes diagonal
/// standard deviations to `kernels.csv`, long-run fields and a summary
/// with the long-run-dominates flag (a diagnostic, not an assertion).
pub fn run_kernels(cfg: &RunConfig, data: &GroupedDataset) -> Result<RunReport> {
    cfg.validate()?;
    let eval = eval_grid(cfg)?;
    make_dir(&cfg.output_dir)?;
    let kernels: Vec<Result<(Vec<f64>, Vec<f64>)>> = match cfg.bandwidth_mode {
        BandwidthMode::Fixed => {
            let k = fixed_kernels(cfg);
            data.groups.iter().map(|_| k.clone()).collect()
        }
        BandwidthMode::Cv => select_bandwidths(cfg, data, &eval)
            .into_iter()
            .map(|s| s.map(|s| (s.kernel, s.kernel_dense)))
            .collect(),
    };
    let mut report = RunReport { groups: Vec::new() };
    for (g, bw) in data.groups.iter().zip(kernels) {
        let outcome = bw.and_then(|(ks, kd)| {
            let dir = group_dir(&cfg.output_dir, &g.key);
            make_dir(&dir)?;
            let mut rows = csv::Writer::from_writer(create(&dir.join("kernels.csv"))?);
            rows.write_record(["t", "sample", "lag0_sd", "long_run_sd"])?;
            let mut flags = serde_json::Map::new();
            for (sample, bws) in [(&g.sparse, &ks), (&g.dense, &kd)] {
                let kind = sample.curves.kind();
                let est = LongRunEstimator::new(sample.curves.grid(), &eval, bws)?;
                let (lag0, long_run) = est.estimate(sample.curves.values())?;
                let diag = kernel_diagnostics(&lag0, &long_run);
                for (k, &t) in eval.points().iter().enumerate() {
                    rows.write_record([
                        data.time_map.to_original(t).to_string(),
                        kind.to_string(),
                        diag.lag0_sd[k].to_string(),
                        diag.long_run_sd[k].to_string(),
                    ])?;
                }
                write_field_csv(&dir.join(format!("long_run_{kind}.csv")), &long_run, &data.time_map)?;
                flags.insert(
                    kind.to_string(),
                    json!({ "bandwidths": bws, "long_run_dominates": diag.long_run_dominates }),
                );
            }
            rows.flush()?;
            write_json(
                &dir.join("kernels.json"),
                &json!({ "group": g.key, "samples": flags, "config": cfg }),
            )
        });
        report.record(&g.key, outcome);
    }
    write_json(&cfg.output_dir.join("summary.json"), &json!({ "groups": report.groups, "config": cfg }))?;
    Ok(report)
}

/// Runs CV regardless of the bandwidth mode and writes per-group traces
/// `cv_{dense_mean,delta,kernel_sparse,kernel_dense}.csv` plus pooled
/// selections in `cv_summary.json`.
pub fn run_cv_trace(cfg: &RunConfig, data: &GroupedDataset) -> Result<RunReport> {
    cfg.validate()?;
    let eval = eval_grid(cfg)?;
    make_dir(&cfg.output_dir)?;
    let (results, owner) = run_pools(cfg, data, &eval);
    let mut report = RunReport { groups: Vec::new() };
    for (i, g) in data.groups.iter().enumerate() {
        let k = owner[i];
        let slot = owner[..i].iter().filter(|&&o| o == k).count();
        let outcome = match &results[k].1 {
            Err(e) => Err(e.clone()),
            Ok(pool) => (|| {
                let dir = group_dir(&cfg.output_dir, &g.key);
                make_dir(&dir)?;
                for (name, runs) in [
                    ("dense_mean", &pool.dense_mean),
                    ("delta", &pool.delta),
                    ("kernel_sparse", &pool.kernel),
                    ("kernel_dense", &pool.kernel_dense),
                ] {
                    runs[slot].write_trace_csv(create(&dir.join(format!("cv_{name}.csv")))?)?;
                }
                Ok(())
            })(),
        };
        report.record(&g.key, outcome);
    }
    let pools: Vec<serde_json::Value> = results
        .iter()
        .map(|(key, r)| match r {
            Ok(p) => json!({ "pool": key, "selected": p.selected }),
            Err(e) => json!({ "pool": key, "error": e.to_string() }),
        })
        .collect();
    write_json(
        &cfg.output_dir.join("cv_summary.json"),
        &json!({ "pools": pools, "groups": report.groups, "config": cfg }),
    )?;
    Ok(report)
}

/// One simulated scenario under the configured seed.
pub fn simulate(cfg: &RunConfig) -> Result<Scenario> {
    let eval = eval_grid(cfg)?;
    build_scenario(&cfg.scenario.spec(), &cfg.scenario.ou, &eval, cfg.seed)
}

/// One row of the Monte-Carlo table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McRow {
    pub n: usize,
    pub p: usize,
    pub n_dense: usize,
    pub p_dense: usize,
    pub scenario: String,
    pub reps: usize,
    /// Share of reps whose band for `delta` contains the truth everywhere.
    pub coverage: f64,
    pub centered_coverage: f64,
    /// Share of reps rejecting a constant difference.
    pub rejection_rate: f64,
    pub mean_sup_error: f64,
    pub mean_h: f64,
    pub mean_h_dense: f64,
}

/// Multiplier seed of a replication, kept off the data streams of the same seed.
pub fn bootstrap_seed(data_seed: u64) -> u64 {
    data_seed ^ 0x9e37_79b9_7f4a_7c15
}

fn contains(band: &BandResult, truth: &[f64]) -> bool {
    truth
        .iter()
        .zip(band.lower.iter().zip(&band.upper))
        .all(|(v, (lo, hi))| lo <= v && v <= hi)
}

/// Monte-Carlo table over `montecarlo.sizes`; replication `r` uses data
/// seed `seed + r`.
pub fn run_montecarlo(cfg: &RunConfig) -> Result<Vec<McRow>> {
    cfg.validate()?;
    let reps = cfg.montecarlo.reps;
    if reps < MIN_REPS {
        return Err(Error::InvalidArgument(format!("montecarlo needs at least {MIN_REPS} reps, got {reps}")));
    }
    let eval = eval_grid(cfg)?;
    let specs: Vec<ScenarioSpec> = if cfg.montecarlo.sizes.is_empty() {
        vec![cfg.scenario.spec()]
    } else {
        cfg.montecarlo.sizes.iter().map(|&n| cfg.scenario.spec_at(n)).collect()
    };
    specs.iter().map(|spec| montecarlo_row(cfg, spec, &eval)).collect()
}

fn montecarlo_row(cfg: &RunConfig, spec: &ScenarioSpec, eval: &EvalGrid) -> Result<McRow> {
    spec.validate()?;
    let reps = cfg.montecarlo.reps;
    let mut fixed_engine = match cfg.bandwidth_mode {
        BandwidthMode::Fixed => Some(BandEngine::new(
            &DesignGrid::midpoints(spec.p)?,
            &DesignGrid::midpoints(spec.p_dense)?,
            eval,
            band_settings(cfg, &fixed_selection(cfg)?, 0),
        )?),
        BandwidthMode::Cv => None,
    };
    let (mut cover, mut cover_c, mut reject) = (0usize, 0usize, 0usize);
    let (mut sup_err, mut sum_h, mut sum_hd) = (0.0, 0.0, 0.0);
    for r in 0..reps {
        let seed = cfg.seed.wrapping_add(r as u64);
        let sc = build_scenario(spec, &cfg.scenario.ou, eval, seed)?;
        let (a, h, hd) = match fixed_engine.as_mut() {
            Some(engine) => {
                engine.reseed(bootstrap_seed(seed));
                let s = engine.settings();
                let (h, hd) = (s.h, s.h_dense);
                (engine.run(&sc.sparse, &sc.dense)?, h, hd)
            }
            None => {
                let pool = cv_pool(cfg, &[(&sc.sparse, &sc.dense)], eval)?;
                let sel = pool.selected;
                let engine = BandEngine::new(
                    sc.sparse.grid(),
                    sc.dense.grid(),
                    eval,
                    band_settings(cfg, &sel, bootstrap_seed(seed)),
                )?;
                (engine.run(&sc.sparse, &sc.dense)?, sel.h, sel.h_dense)
            }
        };
        cover += contains(&a.delta_band, &sc.truth.delta) as usize;
        cover_c += contains(&a.centered_band, &sc.truth.centered_delta) as usize;
        reject += a.centered_band.reject_constant as usize;
        sup_err += a.fit.delta.sup_distance(&sc.truth.delta);
        sum_h += h;
        sum_hd += hd;
    }
    let m = reps as f64;
    Ok(McRow {
        n: spec.n,
        p: spec.p,
        n_dense: spec.n_dense,
        p_dense: spec.p_dense,
        scenario: spec.mean.as_str().to_string(),
        reps,
        coverage: cover as f64 / m,
        centered_coverage: cover_c as f64 / m,
        rejection_rate: reject as f64 / m,
        mean_sup_error: sup_err / m,
        mean_h: sum_h / m,
        mean_h_dense: sum_hd / m,
    })
}

pub fn write_montecarlo_csv<W: Write>(rows: &[McRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use dsfda_core::dgp::{MeanKind, OUParams};

    fn base() -> RunConfig {
        RunConfig {
            h: Some(0.45),
            h_dense: Some(0.2),
            kernel_h: Some(0.55),
            kernel_h_dense: Some(0.5),
            n_boot: 200,
            eval_points: 41,
            ..RunConfig::default()
        }
    }

    fn dataset(spec: ScenarioSpec, seed: u64) -> GroupedDataset {
        let eval = EvalGrid::uniform(41).unwrap();
        let sc = build_scenario(&spec, &OUParams::default(), &eval, seed).unwrap();
        GroupedDataset::from_scenario(&sc, "g")
    }

    #[test]
    fn fixed_mode_requires_every_bandwidth() {
        let cfg = RunConfig { kernel_h: None, ..base() };
        assert!(fixed_selection(&cfg).is_err());
        let sel = fixed_selection(&base()).unwrap();
        assert_eq!(sel.kernel.len(), 4);
        assert!((sel.kernel[3] - 0.55 * 1.1f64.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn montecarlo_rejects_too_few_reps() {
        let mut cfg = base();
        cfg.montecarlo.reps = 0;
        assert!(run_montecarlo(&cfg).is_err());
        cfg.montecarlo.reps = 49;
        assert!(run_montecarlo(&cfg).is_err());
    }

    #[test]
    fn cv_pool_shares_one_selection() {
        let cfg = RunConfig { n_candidates: 6, ..base() };
        let eval = eval_grid(&cfg).unwrap();
        let spec = ScenarioSpec { n: 40, p: 25, n_dense: 48, p_dense: 50, mean: MeanKind::Null };
        let a = dataset(spec, 1);
        let b = dataset(spec, 2);
        let (ga, gb) = (&a.groups[0], &b.groups[0]);
        let pooled = cv_pool(
            &cfg,
            &[(&ga.sparse.curves, &ga.dense.curves), (&gb.sparse.curves, &gb.dense.curves)],
            &eval,
        )
        .unwrap();
        assert_eq!(pooled.delta.len(), 2);
        let summed = pool_results(&pooled.delta).unwrap();
        assert_eq!(summed.selected, pooled.selected.h);
        assert!(pooled.selected.kernel.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn flipped_band_swaps_bounds() {
        let band = BandResult {
            t: vec![0.0, 1.0],
            estimate: vec![1.0, 2.0],
            se: vec![0.1, 0.1],
            quantile: 2.0,
            lower: vec![0.5, 1.5],
            upper: vec![1.5, 2.5],
            alpha: 0.05,
            centered: false,
            reject_constant: false,
        };
        let map = AffineTimeMap::new(0.0, 24.0).unwrap();
        let mut out = Vec::new();
        write_band_csv(&mut out, &[("delta", &band)], &map, true).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "t,estimate,se,lower,upper,kind\n0,-1,0.1,-1.5,-0.5,delta\n24,-2,0.1,-2.5,-1.5,delta\n"
        );
    }

    #[test]
    fn band_outputs_are_deterministic() {
        let spec = ScenarioSpec { n: 40, p: 25, n_dense: 48, p_dense: 50, mean: MeanKind::Null };
        let data = dataset(spec, 5);
        let root = std::env::temp_dir().join(format!("dsfda-run-test-{}", std::process::id()));
        let read = |dir: &Path| {
            (
                fs::read(dir.join("g/band.csv")).unwrap(),
                fs::read(dir.join("g/summary.json")).unwrap(),
            )
        };
        let mut outs = Vec::new();
        for _ in 0..2 {
            let cfg = RunConfig { output_dir: root.clone(), ..base() };
            let (report, bands) = run_band(&cfg, &data).unwrap();
            assert!(report.all_ok());
            assert_eq!(bands.len(), 1);
            outs.push(read(&cfg.output_dir));
        }
        assert_eq!(outs[0], outs[1]);
        let _ = fs::remove_dir_all(&root);
    }
}
