//! JSON scenario files and the experiment runner behind the command line.
//!
//! A run writes `summary.json` (estimates, certificates, method tags, seeds, the
//! hash of the effective configuration and the tool version) and `detail.csv`;
//! DES runs also write `customers.csv`. Identical configurations produce
//! byte-identical files regardless of the worker count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::des::{cross_validate_recursion, regeneration_stats, simulate, write_records_csv, Scenario};
use crate::error::Error;
use crate::estimation::{mc_aggregate, replicate, LossReport};
use crate::fifo_end::loynes_stationary_s;
use crate::marks::{DeclaredBounds, Dist, MarkLaw, MarkSource, MarkovModulated, Regime};
use crate::props::{inclusion_suites, pointwise_suites};
use crate::recursion::{replica_source, Mode};
use crate::stationary::{loss_report, sample_stationary, Model, SampleOptions};
use crate::weak::{boundary_mass, cesaro_distribution, invariance_distance, tightness_report};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    SampleW,
    SampleS,
    LossBegin,
    LossEnd,
    #[serde(alias = "regen")]
    Regenerativity,
    Des,
    Cesaro,
    #[serde(alias = "xval")]
    CrossValidate,
    #[serde(alias = "props")]
    PropertySuite,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::SampleW => "sample-w",
            Experiment::SampleS => "sample-s",
            Experiment::LossBegin => "loss-begin",
            Experiment::LossEnd => "loss-end",
            Experiment::Regenerativity => "regenerativity",
            Experiment::Des => "des",
            Experiment::Cesaro => "cesaro",
            Experiment::CrossValidate => "cross-validate",
            Experiment::PropertySuite => "property-suite",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceConfig {
    Deterministic {
        xi: f64,
        sigma: f64,
        dpat: f64,
    },
    Iid {
        xi: Dist,
        sigma: Dist,
        dpat: Dist,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        stream_id: u64,
        #[serde(default)]
        bounds: DeclaredBounds,
    },
    Markov {
        states: Vec<Regime>,
        transition: Vec<Vec<f64>>,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        stream_id: u64,
        #[serde(default)]
        bounds: DeclaredBounds,
    },
}

impl SourceConfig {
    pub fn build(&self) -> crate::Result<MarkSource> {
        match self {
            SourceConfig::Deterministic { xi, sigma, dpat } => MarkSource::deterministic(*xi, *sigma, *dpat),
            SourceConfig::Iid { xi, sigma, dpat, seed, stream_id, bounds } => MarkSource::iid(
                Regime { xi: xi.clone(), sigma: sigma.clone(), dpat: dpat.clone() },
                *bounds,
                *seed,
                *stream_id,
            ),
            SourceConfig::Markov { states, transition, seed, stream_id, bounds } => MarkSource::new(
                MarkLaw::Markov(MarkovModulated::new(states.clone(), transition.clone())?),
                *bounds,
                *seed,
                *stream_id,
            ),
        }
    }

    pub fn set_seed(&mut self, s: u64) {
        match self {
            SourceConfig::Deterministic { .. } => {}
            SourceConfig::Iid { seed, .. } | SourceConfig::Markov { seed, .. } => *seed = s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "one")]
    pub servers: usize,
    #[serde(default = "begin")]
    pub impatience: Model,
}

fn one() -> usize {
    1
}

fn begin() -> Model {
    Model::Begin
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { servers: 1, impatience: Model::Begin }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecutionConfig {
    pub mode: Mode,
    /// Replicas (exact modes) or recorded arrivals (forward mode).
    pub samples: usize,
    pub max_epochs: usize,
    pub max_depth: usize,
    pub warmup: usize,
    /// Customers in DES runs; steps in Cesàro runs; tuples in property suites.
    pub horizon: usize,
    /// Epoch replicas for zero-probability estimates.
    pub replicas: usize,
    pub levels: Vec<f64>,
    pub boundary_p: Vec<u32>,
}

impl Default for ExecutionConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Exact,
            samples: 10_000,
            max_epochs: 100_000,
            max_depth: 100_000,
            warmup: 100_000,
            horizon: 10_000,
            replicas: 1000,
            levels: vec![0.5, 0.9, 0.99, 0.999],
            boundary_p: vec![1, 2, 4, 8],
        }
    }
}

impl ExecutionConfig {
    fn sample_options(&self) -> SampleOptions {
        SampleOptions { mode: self.mode, max_epochs: self.max_epochs, max_depth: self.max_depth, warmup: self.warmup }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    pub source: SourceConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub execution: ExecutionConfig,
    /// Directory for report files; the command line flag takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// Failure of a run, mapped onto the process exit status.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Capability(Error),
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Io(_) => 1,
            RunError::Config(_) => 2,
            RunError::Capability(_) => 3,
            RunError::Contract(_) => 4,
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::InvalidSource(_) | Error::EmptyInput(_) => RunError::Config(e.to_string()),
            _ => RunError::Capability(e),
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// SHA-256 of the canonical JSON form, without the output directory.
    pub fn hash(&self) -> String {
        let canonical = ScenarioConfig { output: None, ..self.clone() };
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        Sha256::digest(&bytes).iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// Checks that the requested experiment has what it needs before anything runs.
    pub fn validate(&self, experiment: Experiment) -> Result<MarkSource, RunError> {
        if let Some(e) = self.experiment {
            if e != experiment {
                return Err(RunError::Config(format!(
                    "config declares experiment {} but {} was requested",
                    e.name(),
                    experiment.name()
                )));
            }
        }
        let src = self.source.build()?;
        let x = &self.execution;
        if x.samples == 0 || x.max_epochs == 0 || x.max_depth == 0 || x.horizon == 0 || x.replicas == 0 {
            return Err(RunError::Config("execution counts must be positive".into()));
        }
        if self.model.servers == 0 {
            return Err(RunError::Config("model.servers must be positive".into()));
        }
        let exact_model = match experiment {
            Experiment::SampleW | Experiment::LossBegin => Some(Model::Begin),
            Experiment::SampleS | Experiment::LossEnd => Some(Model::End),
            _ => None,
        };
        if let (Some(model), Mode::Exact) = (exact_model, x.mode) {
            for kind in [model.upper_kind(), model.lower_kind()] {
                if src.alpha_bound(kind).is_none() {
                    return Err(RunError::Capability(Error::Capability(format!(
                        "exact {} needs an alpha_bound for {}; declare {} under source.bounds or set execution.mode to \"approximate\"",
                        experiment.name(),
                        kind.name(),
                        src.bounds().missing_for(kind)
                    ))));
                }
            }
        }
        if matches!(experiment, Experiment::CrossValidate) && self.model.servers != 1 {
            return Err(RunError::Capability(Error::Capability(
                "cross-validate needs model.servers = 1".into(),
            )));
        }
        Ok(src)
    }
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: Value,
    pub detail_csv: String,
    pub customers_csv: Option<String>,
    /// Contract failures; empty on success.
    pub violations: Vec<String>,
}

fn estimate_json(e: &crate::estimation::Estimate) -> Value {
    serde_json::to_value(e).expect("estimate serializes")
}

fn loss_detail(r: &LossReport) -> String {
    let mut s = String::from("quantity,point,lower,upper,std_error,n\n");
    let mut row = |name: &str, e: &crate::estimation::Estimate| {
        let _ = writeln!(s, "{name},{},{},{},{},{}", e.point, e.lower, e.upper, e.std_error, e.n);
    };
    row("pi_hat", &r.pi_hat);
    if let Some(e) = &r.pi_hat_never_served {
        row("pi_hat_never_served", e);
    }
    row("lower_bound", &r.lower_bound);
    row("upper_bound", &r.upper_bound);
    s
}

fn run_samples(model: Model, src: &MarkSource, cfg: &ScenarioConfig) -> Result<RunOutput, RunError> {
    let x = &cfg.execution;
    let opts = x.sample_options();
    let spacing = 2 * x.max_depth;
    let draws = replicate(x.samples, |r| {
        let view = replica_source(src, r, spacing);
        let s = sample_stationary(model, &view, &opts)?;
        let loynes = match (model, s.method) {
            (Model::End, crate::Method::RenovationExact) => Some(loynes_stationary_s(&view, 0, x.max_depth)?),
            _ => None,
        };
        Ok::<_, Error>((s, loynes))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let mut detail = String::from("replica,value,method,renovation_epoch,certificate_depth\n");
    let mut violations = Vec::new();
    for (r, (s, loynes)) in draws.iter().enumerate() {
        let epoch = s.renovation_epoch.map(|e| e.to_string()).unwrap_or_default();
        let depth = s.certificate.map(|c| c.depth.to_string()).unwrap_or_default();
        let _ = writeln!(detail, "{r},{},{},{epoch},{depth}", s.value, s.method.name());
        if let Some(l) = loynes {
            if l.exact && l.value != s.value {
                violations.push(format!("replica {r}: loynes {} differs from renovation {}", l.value, s.value));
            }
        }
    }
    let values: Vec<f64> = draws.iter().map(|d| d.0.value).collect();
    let zeros: Vec<f64> = values.iter().map(|v| f64::from(u8::from(*v == 0.0))).collect();
    let method = draws[0].0.method.name();
    let summary = json!({
        "model": model.name(),
        "method": method,
        "samples": x.samples,
        "mean": estimate_json(&mc_aggregate(&values)?),
        "prob_zero": estimate_json(&mc_aggregate(&zeros)?),
        "max": values.iter().copied().fold(0.0, f64::max),
        "loynes_checked": draws.iter().filter(|d| d.1.is_some_and(|l| l.exact)).count(),
    });
    Ok(RunOutput { summary, detail_csv: detail, customers_csv: None, violations })
}

fn run_loss(model: Model, src: &MarkSource, cfg: &ScenarioConfig) -> Result<RunOutput, RunError> {
    let r = loss_report(model, src, cfg.execution.samples, &cfg.execution.sample_options())?;
    let violations = if r.bracket_ok {
        Vec::new()
    } else {
        vec![format!(
            "bounds do not bracket the loss estimate: {} <= {} <= {}",
            r.lower_bound.point, r.pi_hat.point, r.upper_bound.point
        )]
    };
    Ok(RunOutput {
        detail_csv: loss_detail(&r),
        summary: serde_json::to_value(&r).expect("report serializes"),
        customers_csv: None,
        violations,
    })
}

fn path_violations(stats: &crate::des::PathStatistics) -> Vec<String> {
    let mut v = Vec::new();
    if stats.inclusion_violations > 0 {
        v.push(format!("{} inclusion violations", stats.inclusion_violations));
    }
    if stats.sojourn_violations > 0 {
        v.push(format!("{} sojourn-window violations", stats.sojourn_violations));
    }
    if stats.idling_violations > 0 {
        v.push(format!("{} idling violations", stats.idling_violations));
    }
    if !stats.conserves_customers() {
        v.push("customer counts do not balance".into());
    }
    v
}

fn records_csv(sim: &crate::des::Simulation) -> Result<String, RunError> {
    let mut buf = Vec::new();
    write_records_csv(&sim.records, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

fn stats_detail(stats: &crate::des::PathStatistics) -> String {
    let v = serde_json::to_value(stats).expect("stats serialize");
    let mut s = String::from("statistic,value\n");
    for (k, val) in v.as_object().expect("stats are an object") {
        let _ = writeln!(s, "{k},{val}");
    }
    s
}

fn run_des(src: &MarkSource, cfg: &ScenarioConfig, regen: bool) -> Result<RunOutput, RunError> {
    let scn = Scenario::new(cfg.model.servers, cfg.model.impatience, src.clone(), cfg.execution.horizon)?;
    let sim = simulate(&scn)?;
    let violations = path_violations(&sim.stats);
    let summary = if regen {
        let rep = regeneration_stats(&scn, &sim, cfg.execution.replicas, cfg.execution.max_depth)?;
        serde_json::to_value(&rep).expect("report serializes")
    } else {
        serde_json::to_value(&sim.stats).expect("stats serialize")
    };
    Ok(RunOutput {
        summary,
        detail_csv: stats_detail(&sim.stats),
        customers_csv: Some(records_csv(&sim)?),
        violations,
    })
}

fn run_cesaro(src: &MarkSource, cfg: &ScenarioConfig) -> Result<RunOutput, RunError> {
    let x = &cfg.execution;
    let model = cfg.model.impatience;
    let mu = cesaro_distribution(src, x.horizon, model)?;
    let distance = invariance_distance(&mu, src, model)?;
    let tight = tightness_report(src, x.horizon, &x.levels, model)?;
    let boundary = x
        .boundary_p
        .iter()
        .map(|p| Ok(json!({"p": p, "mass": estimate_json(&boundary_mass(src, x.horizon, *p, model)?)})))
        .collect::<Result<Vec<_>, Error>>()?;
    let mut detail = Vec::new();
    mu.write_csv(&mut detail)?;
    let violations = if tight.ordered() {
        Vec::new()
    } else {
        vec![format!("{} steps with W above its dominating sequence", tight.pathwise_violations)]
    };
    Ok(RunOutput {
        summary: json!({
            "model": model.name(),
            "n": x.horizon,
            "atoms": mu.atoms().len(),
            "invariance_distance": distance,
            "tightness": tight,
            "boundary_mass": boundary,
        }),
        detail_csv: String::from_utf8(detail).expect("csv is utf-8"),
        customers_csv: None,
        violations,
    })
}

/// Largest tolerated gap between the simulated and the recursive workload.
pub const CROSS_VALIDATION_TOLERANCE: f64 = 1e-9;

fn run_cross_validation(src: &MarkSource, cfg: &ScenarioConfig) -> Result<RunOutput, RunError> {
    let scn = Scenario::new(1, cfg.model.impatience, src.clone(), cfg.execution.horizon)?;
    let cv = cross_validate_recursion(&scn)?;
    let worst = cv.max_workload_discrepancy.max(cv.max_l_discrepancy).max(cv.max_m_discrepancy);
    let violations = if worst <= CROSS_VALIDATION_TOLERANCE {
        Vec::new()
    } else {
        vec![format!("discrepancy {worst} above {CROSS_VALIDATION_TOLERANCE}")]
    };
    let detail = format!(
        "quantity,max_abs_discrepancy\nworkload,{}\nl,{}\nm,{}\n",
        cv.max_workload_discrepancy, cv.max_l_discrepancy, cv.max_m_discrepancy
    );
    Ok(RunOutput {
        summary: serde_json::to_value(cv).expect("report serializes"),
        detail_csv: detail,
        customers_csv: None,
        violations,
    })
}

fn run_props(src: &MarkSource, cfg: &ScenarioConfig) -> Result<RunOutput, RunError> {
    let mut suites = pointwise_suites(cfg.execution.samples, src.seed());
    suites.extend(inclusion_suites(cfg.execution.horizon, src.seed())?);
    let mut detail = String::from("suite,checked,violations\n");
    for s in &suites {
        let _ = writeln!(detail, "{},{},{}", s.name, s.checked, s.violations);
    }
    let violations = suites.iter().filter(|s| !s.passed()).map(|s| format!("{}: {}", s.name, s.violations)).collect();
    Ok(RunOutput {
        summary: json!({ "suites": suites }),
        detail_csv: detail,
        customers_csv: None,
        violations,
    })
}

/// Runs `experiment` on the configuration. Contract failures are reported in
/// `RunOutput::violations`; capability and configuration problems are errors.
pub fn run_experiment(experiment: Experiment, cfg: &ScenarioConfig) -> Result<RunOutput, RunError> {
    let src = cfg.validate(experiment)?;
    let mut out = match experiment {
        Experiment::SampleW => run_samples(Model::Begin, &src, cfg),
        Experiment::SampleS => run_samples(Model::End, &src, cfg),
        Experiment::LossBegin => run_loss(Model::Begin, &src, cfg),
        Experiment::LossEnd => run_loss(Model::End, &src, cfg),
        Experiment::Regenerativity => run_des(&src, cfg, true),
        Experiment::Des => run_des(&src, cfg, false),
        Experiment::Cesaro => run_cesaro(&src, cfg),
        Experiment::CrossValidate => run_cross_validation(&src, cfg),
        Experiment::PropertySuite => run_props(&src, cfg),
    }?;
    let effective = ScenarioConfig { experiment: Some(experiment), ..cfg.clone() };
    out.summary = json!({
        "tool": "renege",
        "version": TOOL_VERSION,
        "experiment": experiment.name(),
        "config_hash": effective.hash(),
        "seed": src.seed(),
        "stream_id": src.stream_id(),
        "mode": cfg.execution.mode,
        "contract_ok": out.violations.is_empty(),
        "violations": out.violations,
        "result": out.summary,
    });
    Ok(out)
}

/// Runs the experiment and writes the report files into `out_dir`.
pub fn run_scenario(experiment: Experiment, cfg: &ScenarioConfig, out_dir: &Path) -> Result<RunOutput, RunError> {
    let out = run_experiment(experiment, cfg)?;
    fs::create_dir_all(out_dir)?;
    let mut summary = serde_json::to_string_pretty(&out.summary).expect("summary serializes");
    summary.push('\n');
    fs::write(out_dir.join("summary.json"), summary)?;
    fs::write(out_dir.join("detail.csv"), &out.detail_csv)?;
    if let Some(c) = &out.customers_csv {
        fs::write(out_dir.join("customers.csv"), c)?;
    }
    if out.violations.is_empty() {
        Ok(out)
    } else {
        Err(RunError::Contract(out.violations.join("; ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det_cfg(sigma: f64, dpat: f64) -> ScenarioConfig {
        ScenarioConfig::from_json(&format!(
            r#"{{"source": {{"kind": "deterministic", "xi": 1.0, "sigma": {sigma}, "dpat": {dpat}}},
                "execution": {{"samples": 50, "max_epochs": 100, "max_depth": 100, "horizon": 200, "replicas": 20}}}}"#
        ))
        .unwrap()
    }

    fn expo_cfg() -> ScenarioConfig {
        ScenarioConfig::from_json(
            r#"{"source": {"kind": "iid", "seed": 4,
                "xi": {"dist": "exponential", "rate": 1.0},
                "sigma": {"dist": "exponential", "rate": 1.5},
                "dpat": {"dist": "exponential", "rate": 1.0}},
                "execution": {"samples": 100}}"#,
        )
        .unwrap()
    }

    #[test]
    fn loss_begin_deterministic() {
        let out = run_experiment(Experiment::LossBegin, &det_cfg(0.6, 0.3)).unwrap();
        let r = &out.summary["result"];
        assert_eq!(r["pi_hat"]["point"], 0.0);
        assert_eq!((r["lower_bound"]["point"].as_f64(), r["upper_bound"]["point"].as_f64()), (Some(0.0), Some(0.0)));
        assert!(out.violations.is_empty());
        assert_eq!(out.summary["version"], TOOL_VERSION);
    }

    #[test]
    fn exact_sample_on_unbounded_source_is_capability_error() {
        let err = run_experiment(Experiment::SampleW, &expo_cfg()).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("bounds.sigma and bounds.dpat"), "{err}");
    }

    #[test]
    fn config_errors_exit_two() {
        let err = ScenarioConfig::from_json(r#"{"source": {"kind": "nope"}}"#).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let mut cfg = det_cfg(0.6, 0.3);
        cfg.experiment = Some(Experiment::Des);
        assert_eq!(run_experiment(Experiment::Cesaro, &cfg).unwrap_err().exit_code(), 2);
        let bad = ScenarioConfig::from_json(
            r#"{"source": {"kind": "iid", "xi": {"dist": "uniform", "low": 0, "high": 1},
                "sigma": {"dist": "exponential", "rate": 1}, "dpat": {"dist": "exponential", "rate": 1},
                "bounds": {"sigma": 3}}}"#,
        )
        .unwrap();
        assert_eq!(run_experiment(Experiment::Des, &bad).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn replay_is_deterministic_across_workers() {
        let mut cfg = expo_cfg();
        cfg.execution.mode = Mode::Approximate;
        cfg.execution.warmup = 1000;
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_experiment(Experiment::SampleW, &cfg).unwrap())
        };
        let (a, b) = (run(1), run(3));
        assert_eq!(serde_json::to_string(&a.summary).unwrap(), serde_json::to_string(&b.summary).unwrap());
        assert_eq!(a.detail_csv, b.detail_csv);
    }

    #[test]
    fn every_experiment_runs() {
        let cfg = det_cfg(1.5, 0.2);
        for e in [Experiment::SampleS, Experiment::LossEnd, Experiment::Des, Experiment::Regenerativity, Experiment::Cesaro, Experiment::CrossValidate] {
            let out = run_experiment(e, &cfg).unwrap();
            assert!(out.violations.is_empty(), "{e:?}: {:?}", out.violations);
        }
        let mut small = det_cfg(0.6, 0.3);
        small.execution.samples = 2000;
        small.execution.horizon = 300;
        assert!(run_experiment(Experiment::PropertySuite, &small).unwrap().violations.is_empty());
    }

    #[test]
    fn files_written() {
        let dir = tempfile::tempdir().unwrap();
        run_scenario(Experiment::Des, &det_cfg(0.6, 0.3), dir.path()).unwrap();
        for f in ["summary.json", "detail.csv", "customers.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let text = fs::read_to_string(dir.path().join("summary.json")).unwrap();
        assert!(text.contains("\"config_hash\""));
    }

    #[test]
    fn markov_source_config() {
        let cfg = ScenarioConfig::from_json(
            r#"{"source": {"kind": "markov", "seed": 2,
                "states": [
                  {"xi": {"dist": "uniform", "low": 0.5, "high": 1.5}, "sigma": {"dist": "deterministic", "value": 0.2},
                   "dpat": {"dist": "deterministic", "value": 0.1}},
                  {"xi": {"dist": "uniform", "low": 0.2, "high": 0.6}, "sigma": {"dist": "deterministic", "value": 0.7},
                   "dpat": {"dist": "deterministic", "value": 0.5}}],
                "transition": [[0.9, 0.1], [0.3, 0.7]],
                "bounds": {"sigma": 0.7, "dpat": 0.5}},
                "execution": {"samples": 200, "max_epochs": 10000, "max_depth": 10000}}"#,
        )
        .unwrap();
        let out = run_experiment(Experiment::LossBegin, &cfg).unwrap();
        assert!(out.violations.is_empty());
        assert_eq!(out.summary["result"]["method"], "renovation-exact");
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = det_cfg(0.6, 0.3);
        let b = ScenarioConfig { output: Some("elsewhere".into()), ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), det_cfg(0.6, 0.31).hash());
    }
}
