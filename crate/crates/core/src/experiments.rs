//! Config-driven experiment runner.
//!
//! Every mode writes its files into `out`, then a `manifest.json` listing each
//! file with its SHA-256, the config hash, seeds and crate version. Nothing
//! time-dependent is recorded, so identical configs give identical bytes.

use crate::cells::{CellGrid, Region};
use crate::coarse_grain::{build_field_from, cell_percolation, delta_connected, path_consistency_check, soundness_check};
use crate::geom::Point;
use crate::potentials::{MarkedConfiguration, MarkedPoint, ModelParams};
use crate::pseudo_periodic::{generate, patch, verify_hardcore, PseudoPeriodicSpec};
use crate::random_cluster::{exact_joint_enumeration, write_table_csv};
use crate::rng::substream;
use crate::sampler::{pseudo_periodic_setup, write_configuration_csv, write_jsonl, ChainState, ObservableRecord, Schedule};
use crate::site_bond::{connect_prob_many, estimate_pc_site, harris_check, write_estimates_csv, SiteBondParams};
use crate::stats::{batch_mean_ci, MeanCi};
use crate::thresholds::{report, P_C_SITE_DEFAULT};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Run(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Gibbs,
    Cluster,
    Enumerate,
    Pseudo,
    Thresholds,
    Sitebond,
    Coarse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub ell: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub burn_in: u64,
    pub sweeps: u64,
    pub thin: u64,
    /// Full invariant check every this many retained records.
    pub check_every: u64,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec { burn_in: 10_000, sweeps: 100_000, thin: 10, check_every: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSpec {
    pub beta: Vec<f64>,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SiteBondSpec {
    pub grid: Vec<f64>,
    pub n: i64,
    pub trials: usize,
    pub n_list: Vec<i64>,
    pub pc_trials: usize,
}

impl Default for SiteBondSpec {
    fn default() -> Self {
        SiteBondSpec { grid: vec![0.6, 0.7, 0.8, 0.9], n: 16, trials: 2000, n_list: vec![16, 32, 64], pc_trials: 400 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnumerateSpec {
    pub n_free: usize,
    pub instances: usize,
}

impl Default for EnumerateSpec {
    fn default() -> Self {
        EnumerateSpec { n_free: 4, instances: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PseudoSpec {
    pub cells: i64,
}

impl Default for PseudoSpec {
    fn default() -> Self {
        PseudoSpec { cells: 20 }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_window_n() -> i64 {
    8
}
fn default_chains() -> usize {
    8
}
fn default_pc() -> f64 {
    P_C_SITE_DEFAULT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Not serialised, so the hash and recorded config ignore where output goes.
    #[serde(default = "default_out", skip_serializing)]
    pub out: PathBuf,
    #[serde(default = "default_window_n")]
    pub window_n: i64,
    /// Chains per seed.
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default = "default_pc")]
    pub p_c: f64,
    pub model: ModelParams,
    pub grid: GridSpec,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub scan: ScanSpec,
    #[serde(default)]
    pub sitebond: SiteBondSpec,
    #[serde(default)]
    pub enumerate: EnumerateSpec,
    #[serde(default)]
    pub pseudo: PseudoSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let mut bad = Vec::new();
        if let Err(e) = self.model.validate() {
            bad.push(e.to_string());
        }
        if !(self.grid.ell > 0.0 && self.grid.ell.is_finite()) {
            bad.push("grid.ell must be positive".into());
        }
        if !(self.grid.rho > 0.0 && self.grid.rho < 1.0 / 6.0) {
            bad.push("grid.rho must lie in (0, 1/6)".into());
        }
        if self.window_n < 0 {
            bad.push("window_n must be non-negative".into());
        }
        if self.seeds.is_empty() {
            bad.push("seeds must not be empty".into());
        }
        if self.chains == 0 {
            bad.push("chains must be positive".into());
        }
        if self.run.thin == 0 || self.run.check_every == 0 {
            bad.push("run.thin and run.check_every must be positive".into());
        }
        let s = &self.schedule;
        if !(0.0..=1.0).contains(&s.move_fraction) || !(s.move_step > 0.0) {
            bad.push("schedule.move_fraction must lie in [0, 1] and schedule.move_step be positive".into());
        }
        if !(self.p_c > 0.0 && self.p_c < 1.0) {
            bad.push("p_c must lie in (0, 1)".into());
        }
        if self.scan.beta.iter().any(|b| !(*b >= 0.0)) || self.scan.z.iter().any(|z| !(*z > 0.0)) {
            bad.push("scan values out of range".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(ExperimentError::Invalid(bad))
        }
    }

    /// Departures from the phase-transition parameter regime.
    pub fn warnings(&self) -> Vec<String> {
        match report(&self.model, self.grid.ell, self.grid.rho, self.p_c) {
            Ok(r) => r.regime.warnings(),
            Err(e) => vec![format!("thresholds unavailable: {e}")],
        }
    }

    pub fn spec(&self) -> PseudoPeriodicSpec {
        PseudoPeriodicSpec { grid: CellGrid::new(self.grid.ell), rho: self.grid.rho }
    }

    pub fn window(&self) -> Region {
        Region::window(CellGrid::new(self.grid.ell), self.window_n)
    }
}

fn hex(b: &[u8]) -> String {
    b.iter().fold(String::new(), |mut s, x| {
        let _ = write!(s, "{x:02x}");
        s
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoarseRecord {
    pub sweep: u64,
    pub open_cells: usize,
    pub origin_spans: bool,
    /// Points of the origin cell joined to the window complement.
    pub delta_connected: usize,
    pub soundness_violations: usize,
    pub path_violations: usize,
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub seed: u64,
    pub chain: u64,
    pub records: Vec<ObservableRecord>,
    pub coarse: Vec<CoarseRecord>,
    pub violations: Vec<String>,
    pub last: MarkedConfiguration,
}

/// One chain from the pseudo-periodic start: burn-in, then `sweeps` sweeps
/// keeping every `thin`-th record.
pub fn run_chain(
    model: ModelParams,
    spec: &PseudoPeriodicSpec,
    window: &Region,
    schedule: &Schedule,
    run: &RunSpec,
    seed: u64,
    chain: u64,
    coarse: bool,
) -> Result<ChainOutput, ExperimentError> {
    let (b, f) = pseudo_periodic_setup(&model, spec, window, seed).map_err(|e| ExperimentError::Run(e.to_string()))?;
    let mut st = ChainState::init(model, window.clone(), &b, &f, seed, chain).map_err(|e| ExperimentError::Run(e.to_string()))?;
    let n = window_half_width(window);
    for _ in 0..run.burn_in {
        st.sweep(schedule);
    }
    let mut out = ChainOutput { seed, chain, records: Vec::new(), coarse: Vec::new(), violations: Vec::new(), last: MarkedConfiguration::default() };
    let origin = Region::from_cells(spec.grid, [(0, 0)]);
    for i in 1..=run.sweeps {
        let rec = st.sweep(schedule);
        if i % run.thin != 0 {
            continue;
        }
        out.records.push(rec.clone());
        if out.records.len() as u64 % run.check_every == 0 {
            if let Err(e) = st.check_invariants() {
                out.violations.push(format!("sweep {}: {e}", rec.sweep));
            }
        }
        if coarse {
            out.coarse.push(coarse_record(&st, &spec.grid, n, &origin, rec.sweep));
        }
    }
    if let Err(e) = st.check_invariants() {
        out.violations.push(format!("final: {e}"));
    }
    for c in &out.coarse {
        if c.soundness_violations + c.path_violations > 0 {
            out.violations.push(format!(
                "sweep {}: {} soundness and {} path violations",
                c.sweep, c.soundness_violations, c.path_violations
            ));
        }
    }
    out.last = st.configuration();
    Ok(out)
}

fn window_half_width(w: &Region) -> i64 {
    w.cells().map_or(0, |c| c.iter().map(|&(k, l)| k.abs().max(l.abs())).max().unwrap_or(0))
}

pub fn coarse_record(st: &ChainState, grid: &CellGrid, n: i64, origin: &Region, sweep: u64) -> CoarseRecord {
    let tri = st.triangulation();
    let mark = |v| st.mark(v);
    let field = build_field_from(tri.vertex_ids().map(|v| (tri.point(v), st.mark(v))), grid, n);
    let perc = cell_percolation(&field);
    CoarseRecord {
        sweep,
        open_cells: field.cells().filter(|&c| field.in_window(c) && field.get(c) == Some(true)).count(),
        origin_spans: perc.origin_reaches_complement,
        delta_connected: delta_connected(tri, mark, origin, &st.region),
        soundness_violations: soundness_check(tri, mark, &field).len(),
        path_violations: path_consistency_check(tri, mark, &field).len(),
    }
}

fn chain_jobs(cfg: &ExperimentConfig) -> Vec<(u64, u64)> {
    cfg.seeds.iter().flat_map(|&s| (0..cfg.chains as u64).map(move |c| (s, c))).collect()
}

fn run_chains(cfg: &ExperimentConfig, model: ModelParams, coarse: bool) -> Result<Vec<ChainOutput>, ExperimentError> {
    let spec = cfg.spec();
    let window = cfg.window();
    let mut schedule = cfg.schedule;
    if cfg.mode == Mode::Cluster {
        schedule.cluster = schedule.cluster.max(1);
    }
    chain_jobs(cfg)
        .into_par_iter()
        .map(|(s, c)| run_chain(model, &spec, &window, &schedule, &cfg.run, s, c, coarse))
        .collect()
}

/// Files written by a run, in creation order.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub files: Vec<PathBuf>,
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
    pub report: String,
}

struct Writer<'a> {
    dir: &'a Path,
    art: Artifacts,
}

impl<'a> Writer<'a> {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), ExperimentError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)?;
        self.art.files.push(path);
        Ok(())
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    mode: Mode,
    config_sha256: String,
    seeds: &'a [u64],
    warnings: &'a [String],
    violations: &'a [String],
    files: BTreeMap<String, String>,
}

pub fn run(cfg: &ExperimentConfig) -> Result<Artifacts, ExperimentError> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out)?;
    let mut w = Writer { dir: &cfg.out, art: Artifacts { warnings: cfg.warnings(), ..Default::default() } };
    w.put("config.toml", cfg.to_toml().as_bytes())?;
    let mut rep = String::new();
    match cfg.mode {
        Mode::Gibbs | Mode::Cluster | Mode::Coarse => {
            let outs = run_chains(cfg, cfg.model, cfg.mode == Mode::Coarse)?;
            for o in &outs {
                let tag = format!("s{}_c{}", o.seed, o.chain);
                let mut buf = Vec::new();
                write_jsonl(&o.records, &mut buf).map_err(|e| ExperimentError::Run(e.to_string()))?;
                w.put(&format!("observables_{tag}.jsonl"), &buf)?;
                let mut buf = Vec::new();
                write_configuration_csv(&o.last, &mut buf).map_err(|e| ExperimentError::Run(e.to_string()))?;
                w.put(&format!("checkpoint_{tag}.csv"), &buf)?;
                if cfg.mode == Mode::Coarse {
                    let mut buf = Vec::new();
                    for c in &o.coarse {
                        serde_json::to_writer(&mut buf, c).map_err(std::io::Error::from)?;
                        buf.push(b'\n');
                    }
                    w.put(&format!("coarse_{tag}.jsonl"), &buf)?;
                    let field = build_field_from(
                        o.last.points.iter().map(|m| (m.point, m.mark)),
                        &CellGrid::new(cfg.grid.ell),
                        cfg.window_n,
                    );
                    w.put(&format!("field_{tag}.txt"), field.to_text().as_bytes())?;
                }
                w.art.violations.extend(o.violations.iter().map(|v| format!("{tag}: {v}")));
            }
            let row = summarise(&outs);
            let _ = writeln!(rep, "chains = {}", outs.len());
            let _ = writeln!(rep, "records = {}", row.records);
            let _ = writeln!(rep, "dominance_mean = {:.6}", row.dominance.mean);
            let _ = writeln!(rep, "dominance_half_width = {:.6}", row.dominance.half_width);
            let _ = writeln!(rep, "n_mean = {:.3}", row.n_mean);
            if cfg.mode == Mode::Coarse {
                let _ = writeln!(rep, "spanning_frequency = {:.6}", row.spanning);
                let _ = writeln!(rep, "delta_connected_mean = {:.3}", row.delta_connected);
            }
        }
        Mode::Enumerate => {
            let mut worst: f64 = 0.0;
            for i in 0..cfg.enumerate.instances {
                let (fixed, region) = random_fixed_instance(cfg.enumerate.n_free, cfg.seeds[0], i as u64);
                let t = exact_joint_enumeration(&fixed, &region, &cfg.model).map_err(|e| ExperimentError::Run(e.to_string()))?;
                for (name, table) in [("potts", &t.potts), ("cluster", &t.cluster), ("joint", &t.joint)] {
                    let mut buf = Vec::new();
                    write_table_csv(table, &mut buf)?;
                    w.put(&format!("enum{i}_{name}.csv"), &buf)?;
                }
                let _ = writeln!(rep, "instance {i}: triangles = {}, tv_marks = {:.3e}, tv_edges = {:.3e}", t.triangles.len(), t.tv_marks, t.tv_edges);
                worst = worst.max(t.tv_marks).max(t.tv_edges);
            }
            let _ = writeln!(rep, "max_tv = {worst:.3e}");
            if worst > 1e-10 {
                w.art.violations.push(format!("marginal mismatch: total variation {worst:.3e}"));
            }
        }
        Mode::Pseudo => {
            let spec = cfg.spec();
            let c = generate(&spec, patch(cfg.pseudo.cells, cfg.pseudo.cells), cfg.seeds[0]);
            let mut buf = Vec::new();
            write_configuration_csv(&c, &mut buf).map_err(|e| ExperimentError::Run(e.to_string()))?;
            w.put("pseudo.csv", &buf)?;
            let r = verify_hardcore(&c, &spec, &cfg.model).map_err(|e| ExperimentError::Run(e.to_string()))?;
            rep.push_str(&r.to_text());
            if r.hypotheses_satisfied && !r.clean() {
                w.art.violations.push("hardcore violations under the stated hypotheses".into());
            }
        }
        Mode::Thresholds => {
            let r = report(&cfg.model, cfg.grid.ell, cfg.grid.rho, cfg.p_c).map_err(|e| ExperimentError::Run(e.to_string()))?;
            rep.push_str(&r.to_text());
        }
        Mode::Sitebond => {
            let sb = &cfg.sitebond;
            let ps: Vec<SiteBondParams> =
                sb.grid.iter().flat_map(|&p| sb.grid.iter().map(move |&pp| SiteBondParams { p, p_prime: pp })).collect();
            let est = connect_prob_many(&ps, sb.n, sb.trials, cfg.seeds[0]);
            let mut buf = Vec::new();
            write_estimates_csv(&est, &mut buf)?;
            w.put("connect.csv", &buf)?;
            let harris = harris_check(&sb.grid, sb.n, sb.trials, cfg.seeds[0]);
            let mut buf = Vec::new();
            let rows: Vec<_> = harris.iter().flat_map(|h| [h.mixed, h.site_only]).collect();
            write_estimates_csv(&rows, &mut buf)?;
            w.put("harris.csv", &buf)?;
            let failed = harris.iter().filter(|h| !h.holds).count();
            let _ = writeln!(rep, "harris_failures = {failed}");
            if failed > 0 {
                w.art.violations.push(format!("{failed} Harris-type comparisons failed"));
            }
            if sb.n_list.len() >= 2 {
                let pc = estimate_pc_site(&sb.n_list, sb.pc_trials, cfg.seeds[0]).map_err(|e| ExperimentError::Run(e.to_string()))?;
                let _ = writeln!(rep, "pc_site = {:.6}", pc.estimate);
                let _ = writeln!(rep, "pc_site_ci = [{:.6}, {:.6}]", pc.ci_lo, pc.ci_hi);
            }
        }
    }
    if cfg.mode != Mode::Thresholds {
        for v in &w.art.warnings {
            let _ = writeln!(rep, "warning = {v}");
        }
    }
    for v in &w.art.violations {
        let _ = writeln!(rep, "violation = {v}");
    }
    w.put("report.txt", rep.as_bytes())?;
    w.art.report = rep;
    write_manifest(cfg, &mut w)?;
    Ok(w.art)
}

fn write_manifest(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(), ExperimentError> {
    let mut files = BTreeMap::new();
    for f in &w.art.files {
        let bytes = std::fs::read(f)?;
        files.insert(f.file_name().unwrap().to_string_lossy().into_owned(), hex(&Sha256::digest(&bytes)));
    }
    let m = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        mode: cfg.mode,
        config_sha256: cfg.hash(),
        seeds: &cfg.seeds,
        warnings: &w.art.warnings,
        violations: &w.art.violations,
        files,
    };
    let text = serde_json::to_string_pretty(&m).map_err(std::io::Error::from)? + "\n";
    let path = w.dir.join("manifest.json");
    std::fs::write(&path, text)?;
    w.art.files.push(path);
    Ok(())
}

/// Unit square window with four frozen corners just outside and `n_free`
/// random free points inside.
pub fn random_fixed_instance(n_free: usize, seed: u64, index: u64) -> (MarkedConfiguration, Region) {
    let mut rng = substream(seed, &[0xE7, index]);
    let (min, max) = (Point::new(0.0, 0.0), Point::new(1.0, 1.0));
    let mut pts: Vec<MarkedPoint> = [(-0.1, -0.1), (1.1, -0.1), (1.1, 1.1), (-0.1, 1.1)]
        .iter()
        .map(|&(x, y)| MarkedPoint { point: Point::new(x, y), mark: 1, frozen: true })
        .collect();
    for _ in 0..n_free {
        pts.push(MarkedPoint {
            point: Point::new(rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)),
            mark: 1,
            frozen: false,
        });
    }
    (MarkedConfiguration { points: pts }, Region::Rect { min, max })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub value: f64,
    pub records: usize,
    pub dominance: MeanCi,
    pub n_mean: f64,
    pub delta_connected: f64,
    pub spanning: f64,
    pub violations: usize,
}

fn summarise(outs: &[ChainOutput]) -> ScanRow {
    // Batch means per chain, pooled as equal-weight batches.
    let mut xs = Vec::new();
    let mut batches = 0;
    for o in outs {
        xs.extend(o.records.iter().map(ObservableRecord::dominance_ratio));
        batches += 10;
    }
    let records = xs.len();
    let n_mean = outs.iter().flat_map(|o| o.records.iter().map(|r| r.n as f64)).sum::<f64>() / records.max(1) as f64;
    let coarse: Vec<&CoarseRecord> = outs.iter().flat_map(|o| o.coarse.iter()).collect();
    let k = coarse.len().max(1) as f64;
    ScanRow {
        value: f64::NAN,
        records,
        dominance: if records >= 2 { batch_mean_ci(&xs, batches.min(records)) } else { MeanCi { mean: f64::NAN, half_width: f64::INFINITY, n: records } },
        n_mean,
        delta_connected: coarse.iter().map(|c| c.delta_connected as f64).sum::<f64>() / k,
        spanning: coarse.iter().filter(|c| c.origin_spans).count() as f64 / k,
        violations: outs.iter().map(|o| o.violations.len()).sum(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScanParam {
    Beta,
    Z,
}

/// Coarse-observed chains at each value of `beta` or `z`; returns rows and the CSV text.
pub fn phase_scan(cfg: &ExperimentConfig, param: ScanParam, values: &[f64]) -> Result<(Vec<ScanRow>, String), ExperimentError> {
    cfg.validate()?;
    if values.is_empty() {
        return Err(ExperimentError::Invalid(vec!["scan list is empty".into()]));
    }
    let mut rows = Vec::new();
    for &v in values {
        let mut model = cfg.model;
        match param {
            ScanParam::Beta => model.beta = v,
            ScanParam::Z => model.z = v,
        }
        if let Err(e) = model.validate() {
            return Err(ExperimentError::Invalid(vec![e.to_string()]));
        }
        let outs = run_chains(cfg, model, true)?;
        let mut row = summarise(&outs);
        row.value = v;
        rows.push(row);
    }
    let name = match param {
        ScanParam::Beta => "beta",
        ScanParam::Z => "z",
    };
    let mut csv = format!("{name},records,dominance_mean,dominance_half_width,n_mean,delta_connected_mean,spanning_frequency,violations\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{:.6},{:.6},{:.3},{:.3},{:.6},{}",
            r.value, r.records, r.dominance.mean, r.dominance.half_width, r.n_mean, r.delta_connected, r.spanning, r.violations
        );
    }
    Ok((rows, csv))
}

/// Runs the scan and writes `phase_scan.csv` plus the manifest into `cfg.out`.
pub fn run_phase_scan(cfg: &ExperimentConfig, param: ScanParam, values: &[f64]) -> Result<Artifacts, ExperimentError> {
    let (rows, csv) = phase_scan(cfg, param, values)?;
    std::fs::create_dir_all(&cfg.out)?;
    let mut w = Writer { dir: &cfg.out, art: Artifacts { warnings: cfg.warnings(), ..Default::default() } };
    w.put("config.toml", cfg.to_toml().as_bytes())?;
    w.put("phase_scan.csv", csv.as_bytes())?;
    let total: usize = rows.iter().map(|r| r.violations).sum();
    if total > 0 {
        w.art.violations.push(format!("{total} invariant violations during the scan"));
    }
    w.art.report = csv;
    write_manifest(cfg, &mut w)?;
    Ok(w.art)
}
