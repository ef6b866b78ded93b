//! Experiment configuration and the regularizer-by-noise benchmark.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid2D, Phantom, PhantomKind};
use crate::helmholtz::GmresOptions;
use crate::inversion::{run_inversion, InversionOptions, InversionResult, Regularizer, RegularizerKind};
use crate::io::load_field;
use crate::measurement::{add_noise, ArrayConfig, ForwardModel, MeasurementMatrix, DEFAULT_RADIUS};
use crate::shearlet::ShearletSystem;

/// Phantom section of a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PhantomConfig {
    #[serde(default = "default_phantom_kind")]
    pub kind: String,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    /// Height of the smooth `C^2` background bump; 0 disables it.
    #[serde(default = "default_background")]
    pub background: f64,
    /// Field file holding the mask for `custom-mask`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            kind: default_phantom_kind(),
            amplitude: default_amplitude(),
            background: default_background(),
            mask: None,
        }
    }
}

impl PhantomConfig {
    pub fn phantom(&self) -> Result<Phantom> {
        let kind = if self.kind == "custom-mask" {
            let path = self
                .mask
                .as_ref()
                .ok_or_else(|| Error::Config("phantom kind 'custom-mask' needs a 'mask' file".into()))?;
            PhantomKind::CustomMask(load_field(path)?)
        } else {
            self.kind.parse()?
        };
        let mut p = Phantom::new(kind, self.amplitude);
        if self.background > 0.0 {
            p = p.with_background(self.background);
        }
        Ok(p)
    }
}

/// Penalty weights `alpha0`; the weight used at relative noise `delta` is
/// `alpha0 * delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Alpha0 {
    #[serde(default = "default_alpha0_shearlet")]
    pub shearlet: f64,
    #[serde(default = "default_alpha0_l1")]
    pub l1: f64,
}

impl Default for Alpha0 {
    fn default() -> Self {
        Self {
            shearlet: default_alpha0_shearlet(),
            l1: default_alpha0_l1(),
        }
    }
}

impl Alpha0 {
    pub fn get(&self, kind: RegularizerKind) -> f64 {
        match kind {
            RegularizerKind::Shearlet => self.shearlet,
            RegularizerKind::DirectLp => self.l1,
            RegularizerKind::None => 0.0,
        }
    }

    pub fn set(&mut self, kind: RegularizerKind, value: f64) {
        match kind {
            RegularizerKind::Shearlet => self.shearlet = value,
            RegularizerKind::DirectLp => self.l1 = value,
            RegularizerKind::None => {}
        }
    }
}

/// Solver tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_gmres_tol")]
    pub gmres_tol: f64,
    #[serde(default = "default_gmres_restart")]
    pub gmres_restart: usize,
    #[serde(default = "default_gmres_max_iter")]
    pub gmres_max_iter: usize,
    #[serde(default = "default_power_iterations")]
    pub power_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gmres_tol: default_gmres_tol(),
            gmres_restart: default_gmres_restart(),
            gmres_max_iter: default_gmres_max_iter(),
            power_iterations: default_power_iterations(),
        }
    }
}

impl SolverConfig {
    pub fn gmres(&self) -> GmresOptions {
        GmresOptions {
            tol: self.gmres_tol,
            restart: self.gmres_restart,
            max_iter: self.gmres_max_iter,
        }
    }
}

/// Everything needed to reproduce an inversion experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default = "default_scales")]
    pub scales: usize,
    #[serde(default = "default_wavenumber")]
    pub wavenumber: f64,
    #[serde(default = "default_transmitters")]
    pub transmitters: usize,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default)]
    pub phantom: PhantomConfig,
    #[serde(default = "default_regularizers")]
    pub regularizers: Vec<String>,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub alpha0: Alpha0,
    #[serde(default = "default_noise_levels")]
    pub noise_levels: Vec<f64>,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub real_projection: bool,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_grid_n() -> usize {
    128
}
fn default_scales() -> usize {
    4
}
fn default_wavenumber() -> f64 {
    10.0
}
fn default_transmitters() -> usize {
    8
}
fn default_radius() -> f64 {
    DEFAULT_RADIUS
}
fn default_phantom_kind() -> String {
    "centered-square".into()
}
fn default_amplitude() -> f64 {
    0.1
}
fn default_background() -> f64 {
    0.1
}
fn default_regularizers() -> Vec<String> {
    vec!["shearlet".into(), "l1".into(), "none".into()]
}
fn default_p() -> f64 {
    1.0
}
fn default_alpha0_shearlet() -> f64 {
    0.056_234_132_519_034_91
}
fn default_alpha0_l1() -> f64 {
    0.1
}
fn default_noise_levels() -> Vec<f64> {
    vec![0.08, 0.02, 0.005]
}
fn default_tau() -> f64 {
    1.6
}
fn default_seed() -> u64 {
    1
}
fn default_max_iter() -> usize {
    500
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_gmres_tol() -> f64 {
    1e-8
}
fn default_gmres_restart() -> usize {
    50
}
fn default_gmres_max_iter() -> usize {
    500
}
fn default_power_iterations() -> usize {
    5
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl ExperimentConfig {
    /// Parses and validates a JSON config; unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| {
            Error::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        Grid2D::new(self.grid_n)?;
        if self.scales == 0 {
            return bad("scales must be positive".into());
        }
        if !(self.wavenumber > 0.0) || !self.wavenumber.is_finite() {
            return bad(format!("wavenumber must be positive, got {}", self.wavenumber));
        }
        if self.transmitters == 0 {
            return bad("transmitters must be positive".into());
        }
        if !(self.radius > 0.0) {
            return bad(format!("radius must be positive, got {}", self.radius));
        }
        if !(self.phantom.amplitude >= 0.0) || !(self.phantom.background >= 0.0) {
            return bad("phantom amplitude and background must be nonnegative".into());
        }
        if self.regularizers.is_empty() {
            return bad("at least one regularizer is required".into());
        }
        for r in &self.regularizers {
            r.parse::<RegularizerKind>()?;
        }
        if !(1.0..=2.0).contains(&self.p) {
            return bad(format!("p must lie in [1, 2], got {}", self.p));
        }
        if !(self.alpha0.shearlet > 0.0) || !(self.alpha0.l1 > 0.0) {
            return bad("alpha0 values must be positive".into());
        }
        if self.noise_levels.is_empty() || self.noise_levels.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return bad("noise levels must be a nonempty list of positive numbers".into());
        }
        if !(self.tau >= 1.0) {
            return bad(format!("tau must be at least 1, got {}", self.tau));
        }
        if self.max_iter == 0 {
            return bad("maxIter must be positive".into());
        }
        let s = &self.solver;
        if !(s.gmres_tol > 0.0 && s.gmres_tol < 1.0) || s.gmres_restart == 0 || s.gmres_max_iter == 0 {
            return bad("solver settings must be positive with gmresTol in (0, 1)".into());
        }
        if s.power_iterations == 0 {
            return bad("powerIterations must be positive".into());
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::new(self.grid_n)
    }

    pub fn regularizer_kinds(&self) -> Result<Vec<RegularizerKind>> {
        self.regularizers.iter().map(|r| r.parse()).collect()
    }

    pub fn forward_model(&self) -> Result<ForwardModel> {
        ForwardModel::new(
            self.grid()?,
            self.wavenumber,
            ArrayConfig::new(self.transmitters, self.radius)?,
            self.solver.gmres(),
        )
    }

    pub fn inversion_options(&self) -> InversionOptions {
        InversionOptions {
            tau: self.tau,
            max_iter: self.max_iter,
            power_iterations: self.solver.power_iterations,
            real_projection: self.real_projection,
            seed: self.seed,
            ..InversionOptions::default()
        }
    }
}

/// Seed of the noise realization at a given level, so that every method sees
/// the same data.
pub fn noise_seed(seed: u64, level: f64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ level.to_bits()
}

/// Shared state of a benchmark: the model, the truth and its exact data.
pub struct Problem {
    pub config: ExperimentConfig,
    pub model: ForwardModel,
    pub truth: ComplexField,
    pub exact: MeasurementMatrix,
    system: Option<Arc<ShearletSystem>>,
}

impl Problem {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let model = config.forward_model()?;
        let truth = config.phantom.phantom()?.render(model.grid())?;
        let exact = model.forward(&truth)?.matrix;
        Ok(Self {
            config: config.clone(),
            model,
            truth,
            exact,
            system: None,
        })
    }

    fn system(&mut self) -> Result<Arc<ShearletSystem>> {
        if self.system.is_none() {
            self.system = Some(Arc::new(ShearletSystem::new(self.model.grid(), self.config.scales)?));
        }
        Ok(self.system.clone().expect("built above"))
    }

    /// Noisy data and its absolute noise level `eps` at relative level `delta`.
    pub fn data(&self, delta: f64) -> Result<(MeasurementMatrix, f64)> {
        add_noise(&self.exact, delta, noise_seed(self.config.seed, delta))
    }

    pub fn regularizer(&mut self, kind: RegularizerKind, alpha0: f64, delta: f64) -> Result<Regularizer> {
        let alpha = alpha0 * delta;
        match kind {
            RegularizerKind::Shearlet => Regularizer::shearlet(self.system()?, self.config.p, alpha),
            RegularizerKind::DirectLp => Regularizer::direct(self.config.p, alpha),
            RegularizerKind::None => Ok(Regularizer::None),
        }
    }

    /// One reconstruction with the configured `alpha0` of `kind`.
    pub fn invert(&mut self, kind: RegularizerKind, delta: f64) -> Result<InversionResult> {
        self.invert_with(kind, self.config.alpha0.get(kind), delta)
    }

    pub fn invert_with(&mut self, kind: RegularizerKind, alpha0: f64, delta: f64) -> Result<InversionResult> {
        let (data, eps) = self.data(delta)?;
        let reg = self.regularizer(kind, alpha0, delta)?;
        run_inversion(&self.model, &data, eps, &reg, &self.config.inversion_options(), Some(&self.truth))
    }
}

/// One benchmark row.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub method: RegularizerKind,
    pub noise: f64,
    pub alpha0: f64,
    pub rel_error: f64,
    pub iterations: usize,
    pub final_residual: f64,
    pub target: f64,
    /// `ok`, `maxiter` or `failed: <reason>`.
    pub status: String,
}

impl BenchmarkRow {
    pub fn terminated_by_discrepancy(&self) -> bool {
        self.status == "ok" && self.final_residual <= self.target
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchmarkTable {
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkTable {
    pub const HEADER: &'static str = "method,noise,alpha0,rel_error,iterations,final_residual,target,status";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.method.name(),
                r.noise,
                r.alpha0,
                r.rel_error,
                r.iterations,
                r.final_residual,
                r.target,
                r.status
            );
        }
        s
    }

    pub fn get(&self, method: RegularizerKind, noise: f64) -> Option<&BenchmarkRow> {
        self.rows.iter().find(|r| r.method == method && r.noise == noise)
    }
}

/// Runs every (regularizer, noise level) pair of the config. Failed runs are
/// recorded with a status and the harness continues. When `write` is set,
/// `results.csv` and one `history_<method>_<noise>.csv` per run go to the
/// configured output directory.
pub fn run_benchmark(config: &ExperimentConfig, write: bool) -> Result<BenchmarkTable> {
    let mut problem = Problem::new(config)?;
    let kinds = config.regularizer_kinds()?;
    let out = &config.out_dir;
    if write {
        std::fs::create_dir_all(out)?;
    }
    let mut table = BenchmarkTable::default();
    for &delta in &config.noise_levels {
        for &kind in &kinds {
            let alpha0 = config.alpha0.get(kind);
            let target = config.tau * problem.data(delta)?.1;
            let row = match problem.invert(kind, delta) {
                Ok(res) => {
                    if write {
                        let name = format!("history_{}_{}.csv", kind.name(), delta);
                        std::fs::write(out.join(name), res.history_csv())?;
                    }
                    let rel_error = crate::grid::rel_l2_error(&res.field, &problem.truth)?;
                    BenchmarkRow {
                        method: kind,
                        noise: delta,
                        alpha0,
                        rel_error,
                        iterations: res.iterations,
                        final_residual: res.final_residual,
                        target,
                        status: if res.converged { "ok".into() } else { "maxiter".into() },
                    }
                }
                Err(e) => {
                    log::error!("{} at noise {delta} failed: {e}", kind.name());
                    BenchmarkRow {
                        method: kind,
                        noise: delta,
                        alpha0,
                        rel_error: f64::NAN,
                        iterations: 0,
                        final_residual: f64::NAN,
                        target,
                        status: format!("failed: {}", e.to_string().replace(',', ";")),
                    }
                }
            };
            log::info!(
                "{:>8} noise {:<6} rel error {:.4} in {} iterations ({})",
                kind.name(),
                delta,
                row.rel_error,
                row.iterations,
                row.status
            );
            table.rows.push(row);
        }
    }
    if write {
        std::fs::write(out.join("results.csv"), table.to_csv())?;
    }
    Ok(table)
}

/// Log-spaced `alpha0` candidates covering `[1e-4, 1e-1]`, four per decade.
pub fn alpha0_grid() -> Vec<f64> {
    (0..=12).map(|i| 10f64.powf(-4.0 + i as f64 / 4.0)).collect()
}

/// Outcome of one calibration candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationPoint {
    pub alpha0: f64,
    pub rel_error: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub method: RegularizerKind,
    pub noise: f64,
    pub points: Vec<CalibrationPoint>,
    pub best: f64,
}

/// Grid search for `alpha0` at one noise level: the candidate with the
/// smallest relative error among runs that stop by the discrepancy rule, or
/// among all runs when none does.
pub fn calibrate_alpha0(
    problem: &mut Problem,
    kind: RegularizerKind,
    delta: f64,
    candidates: &[f64],
) -> Result<Calibration> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no alpha0 candidates".into()));
    }
    let mut points = Vec::with_capacity(candidates.len());
    for &a in candidates {
        let res = problem.invert_with(kind, a, delta)?;
        let rel_error = crate::grid::rel_l2_error(&res.field, &problem.truth)?;
        log::info!(
            "calibrate {} alpha0 {a:.4e}: rel error {rel_error:.4} in {} iterations{}",
            kind.name(),
            res.iterations,
            if res.converged { "" } else { " (cap)" }
        );
        points.push(CalibrationPoint {
            alpha0: a,
            rel_error,
            iterations: res.iterations,
            converged: res.converged,
        });
    }
    let pick = |only_converged: bool| {
        points
            .iter()
            .filter(|p| p.converged || !only_converged)
            .min_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
            .map(|p| p.alpha0)
    };
    let best = pick(true).or_else(|| pick(false)).expect("nonempty");
    Ok(Calibration {
        method: kind,
        noise: delta,
        points,
        best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"gridN": 64}"#).unwrap();
        assert_eq!(cfg.grid_n, 64);
        let d = ExperimentConfig::default();
        assert_eq!(cfg.scales, d.scales);
        assert_eq!(cfg.noise_levels, vec![0.08, 0.02, 0.005]);
        assert_eq!(cfg.tau, 1.6);
        assert_eq!(cfg.regularizers.len(), 3);
    }

    #[test]
    fn validation_rejects_bad_values() {
        for text in [
            r#"{"wavenumber": -10}"#,
            r#"{"gridN": 100}"#,
            r#"{"tau": 0.5}"#,
            r#"{"p": 3}"#,
            r#"{"noiseLevels": []}"#,
            r#"{"regularizers": ["tv"]}"#,
            r#"{"phantom": {"amplitude": -1}}"#,
        ] {
            assert!(ExperimentConfig::from_json(text).is_err(), "{text}");
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let err = ExperimentConfig::from_json("{\n  \"gridN\": 64,\n  \"gridSize\": 3\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("gridSize") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn json_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.noise_levels = vec![0.1, 0.01];
        cfg.alpha0.shearlet = 0.123;
        cfg.phantom.kind = "cartoon-blob".into();
        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn alpha0_grid_spans_the_range() {
        let g = alpha0_grid();
        assert_eq!(g.len(), 13);
        assert!((g[0] - 1e-4).abs() < 1e-18);
        assert!((g[12] - 1e-1).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn default_alpha0_values_lie_on_the_grid() {
        let a = Alpha0::default();
        let grid = alpha0_grid();
        for v in [a.shearlet, a.l1] {
            assert!(grid.iter().any(|g| (g - v).abs() <= 1e-15 * v), "{v}");
        }
    }

    #[test]
    fn noise_seeds_differ_by_level() {
        assert_ne!(noise_seed(1, 0.02), noise_seed(1, 0.08));
        assert_eq!(noise_seed(3, 0.02), noise_seed(3, 0.02));
    }

    #[test]
    fn single_cell_benchmark_has_one_row() {
        let cfg = ExperimentConfig::from_json(
            r#"{"gridN": 32, "scales": 2, "wavenumber": 4, "transmitters": 4,
                "regularizers": ["none"], "noiseLevels": [0.05], "maxIter": 50}"#,
        )
        .unwrap();
        let table = run_benchmark(&cfg, false).unwrap();
        assert_eq!(table.rows.len(), 1);
        let row = &table.rows[0];
        assert!(row.terminated_by_discrepancy(), "{row:?}");
        assert_eq!(table.to_csv().lines().count(), 2);
    }
}
