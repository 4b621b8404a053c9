//! Long-format curve CSV: `sample,group,curve_id,time,value`.
//!
//! Groups keep their order of first appearance and curves keep file order,
//! so [`write_long_csv`] re-emits an ingested file byte for byte whenever
//! the file was itself produced by that writer.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use dsfda_core::dgp::Scenario;
use dsfda_core::mean_diff::{CurveMatrix, SampleKind};
use dsfda_core::weights::DesignGrid;
use dsfda_core::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub const COLUMNS: [&str; 5] = ["sample", "group", "curve_id", "time", "value"];

/// Affine map from the original time axis onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineTimeMap {
    pub lo: f64,
    pub hi: f64,
}

impl AffineTimeMap {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidArgument(format!("time domain [{lo}, {hi}] is empty or not finite")));
        }
        Ok(Self { lo, hi })
    }

    pub fn unit() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }

    pub fn to_unit(&self, t: f64) -> f64 {
        (t - self.lo) / (self.hi - self.lo)
    }

    pub fn to_original(&self, u: f64) -> f64 {
        self.lo + u * (self.hi - self.lo)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    /// Time domain mapped onto `[0, 1]`; defaults to the observed time range.
    pub domain: Option<[f64; 2]>,
}

/// One sample of one group with its original labels.
#[derive(Debug, Clone)]
pub struct SampleData {
    pub curves: CurveMatrix,
    pub curve_ids: Vec<String>,
    /// Design points on the original axis.
    pub times: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Group {
    pub key: String,
    pub sparse: SampleData,
    pub dense: SampleData,
}

impl Group {
    pub fn sample(&self, kind: SampleKind) -> &SampleData {
        match kind {
            SampleKind::Sparse => &self.sparse,
            SampleKind::Dense => &self.dense,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroupedDataset {
    pub time_map: AffineTimeMap,
    pub groups: Vec<Group>,
}

impl GroupedDataset {
    pub fn group(&self, key: &str) -> Option<&Group> {
        self.groups.iter().find(|g| g.key == key)
    }

    /// Dataset holding one simulated scenario under `key`, on the unit axis.
    pub fn from_scenario(scenario: &Scenario, key: &str) -> Self {
        let wrap = |m: &CurveMatrix| SampleData {
            curve_ids: (0..m.n_curves()).map(|i| i.to_string()).collect(),
            times: m.grid().points().to_vec(),
            curves: m.clone(),
        };
        Self {
            time_map: AffineTimeMap::unit(),
            groups: vec![Group {
                key: key.to_string(),
                sparse: wrap(&scenario.sparse),
                dense: wrap(&scenario.dense),
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Row {
    sample: SampleKind,
    group: String,
    curve: String,
    time: f64,
    value: f64,
}

fn parse_sample(s: &str, line: u64) -> Result<SampleKind> {
    match s.trim() {
        "sparse" => Ok(SampleKind::Sparse),
        "dense" => Ok(SampleKind::Dense),
        other => Err(Error::SchemaError(format!(
            "line {line}: sample must be 'sparse' or 'dense', got '{other}'"
        ))),
    }
}

fn parse_number(s: &str, column: &str, line: u64) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::SchemaError(format!("line {line}: {column} '{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::SchemaError(format!("line {line}: {column} is not finite")));
    }
    Ok(v)
}

fn read_rows<R: Read>(reader: R, rows: &mut Vec<Row>) -> Result<()> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 5];
    for (slot, name) in idx.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::SchemaError(format!("missing column '{name}'")))?;
    }
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |k: usize| rec.get(idx[k]).unwrap_or("");
        rows.push(Row {
            sample: parse_sample(field(0), line)?,
            group: field(1).to_string(),
            curve: field(2).to_string(),
            time: parse_number(field(3), "time", line)?,
            value: parse_number(field(4), "value", line)?,
        });
    }
    Ok(())
}

pub fn ingest(paths: &[impl AsRef<Path>], options: &IngestOptions) -> Result<GroupedDataset> {
    if paths.is_empty() {
        return Err(Error::InvalidArgument("no input files".into()));
    }
    let mut rows = Vec::new();
    for p in paths {
        let file = std::fs::File::open(p.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", p.as_ref().display())))?;
        read_rows(std::io::BufReader::new(file), &mut rows)?;
    }
    assemble(rows, options)
}

pub fn ingest_reader<R: Read>(reader: R, options: &IngestOptions) -> Result<GroupedDataset> {
    let mut rows = Vec::new();
    read_rows(reader, &mut rows)?;
    assemble(rows, options)
}

/// Curves of one (group, sample) in first-appearance order, each holding
/// `(time, value)` pairs.
type CurveRows = Vec<(String, Vec<(f64, f64)>)>;

fn assemble(rows: Vec<Row>, options: &IngestOptions) -> Result<GroupedDataset> {
    if rows.is_empty() {
        return Err(Error::SchemaError("no data rows".into()));
    }
    let time_map = match options.domain {
        Some([lo, hi]) => AffineTimeMap::new(lo, hi)?,
        None => {
            let lo = rows.iter().map(|r| r.time).fold(f64::INFINITY, f64::min);
            let hi = rows.iter().map(|r| r.time).fold(f64::NEG_INFINITY, f64::max);
            AffineTimeMap::new(lo, hi)?
        }
    };
    if let Some(r) = rows.iter().find(|r| r.time < time_map.lo || r.time > time_map.hi) {
        return Err(Error::SchemaError(format!(
            "time {} of curve {} lies outside the domain [{}, {}]",
            r.time, r.curve, time_map.lo, time_map.hi
        )));
    }

    let mut order: Vec<String> = Vec::new();
    let mut buckets: HashMap<String, [CurveRows; 2]> = HashMap::new();
    let mut curve_slot: HashMap<(String, SampleKind, String), usize> = HashMap::new();
    for r in rows {
        let lane = lane(r.sample);
        let bucket = buckets.entry(r.group.clone()).or_insert_with(|| {
            order.push(r.group.clone());
            [Vec::new(), Vec::new()]
        });
        let curves = &mut bucket[lane];
        let slot = *curve_slot
            .entry((r.group.clone(), r.sample, r.curve.clone()))
            .or_insert_with(|| {
                curves.push((r.curve.clone(), Vec::new()));
                curves.len() - 1
            });
        curves[slot].1.push((r.time, r.value));
    }

    let mut groups = Vec::with_capacity(order.len());
    for key in order {
        let [sparse, dense] = buckets.remove(&key).expect("bucket for every ordered group");
        groups.push(Group {
            sparse: build_sample(&key, SampleKind::Sparse, sparse, &time_map)?,
            dense: build_sample(&key, SampleKind::Dense, dense, &time_map)?,
            key,
        });
    }
    Ok(GroupedDataset { time_map, groups })
}

fn lane(kind: SampleKind) -> usize {
    match kind {
        SampleKind::Sparse => 0,
        SampleKind::Dense => 1,
    }
}

fn build_sample(group: &str, kind: SampleKind, mut curves: CurveRows, map: &AffineTimeMap) -> Result<SampleData> {
    if curves.is_empty() {
        return Err(Error::EmptyGroup(format!("{group} (no {kind} curves)")));
    }
    for (id, obs) in curves.iter_mut() {
        obs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if obs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::SchemaError(format!(
                "curve {id} in {kind} sample of group {group} repeats a time"
            )));
        }
    }
    // The longest curve defines the grid, so a curve missing a row is the one named.
    let reference: Vec<f64> = curves
        .iter()
        .max_by_key(|(_, obs)| obs.len())
        .map(|(_, obs)| obs.iter().map(|o| o.0).collect())
        .expect("nonempty");
    let p = reference.len();
    let mut values = DMatrix::zeros(curves.len(), p);
    for (i, (id, obs)) in curves.iter().enumerate() {
        if obs.len() != p || obs.iter().zip(&reference).any(|(o, t)| o.0 != *t) {
            return Err(Error::RaggedGrid {
                group: group.to_string(),
                sample: kind.to_string(),
                curve: id.clone(),
            });
        }
        for (j, o) in obs.iter().enumerate() {
            values[(i, j)] = o.1;
        }
    }
    let grid = DesignGrid::new(reference.iter().map(|&t| map.to_unit(t)).collect())?;
    Ok(SampleData {
        curves: CurveMatrix::new(values, grid, kind)?,
        curve_ids: curves.into_iter().map(|(id, _)| id).collect(),
        times: reference,
    })
}

/// Writes every group, sparse curves before dense ones, with `{}` number
/// formatting (shortest representation that parses back to the same value).
pub fn write_long_csv<W: Write>(data: &GroupedDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for g in &data.groups {
        for kind in [SampleKind::Sparse, SampleKind::Dense] {
            let s = g.sample(kind);
            let values = s.curves.values();
            for (i, id) in s.curve_ids.iter().enumerate() {
                for (j, t) in s.times.iter().enumerate() {
                    w.write_record([
                        kind.as_str(),
                        g.key.as_str(),
                        id.as_str(),
                        &t.to_string(),
                        &values[(i, j)].to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}
