//! Experiment configuration: parsing, schema checks and defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use phototransform::inversion::ReconConfig;
use phototransform::phantoms::PhantomSpec;
use phototransform::{AlphaSchedule, Grid};

/// A rejected config; `key` is the dotted path of the offending entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub msg: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, msg: impl fmt::Display) -> Self {
        ConfigError {
            key: key.into(),
            msg: msg.to_string(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error at `{}`: {}", self.key, self.msg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub count: usize,
    pub spacing: f64,
    /// Defaults to the origin that centres the grid on zero.
    #[serde(default)]
    pub origin: Option<f64>,
}

/// Either `{a_min, a_max, count}` or an explicit `alphas` list (with optional
/// `weights`, trapezoid otherwise).
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    #[serde(default)]
    pub a_min: Option<f64>,
    #[serde(default)]
    pub a_max: Option<f64>,
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default)]
    pub alphas: Option<Vec<f64>>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    /// Focal-stack samples per field `x` sample.
    #[serde(default = "default_refine")]
    pub xbar_refine: usize,
}

fn default_refine() -> usize {
    2
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default)]
    pub field: Option<PathBuf>,
    #[serde(default)]
    pub stack: Option<PathBuf>,
    #[serde(default)]
    pub adjoint: Option<PathBuf>,
    #[serde(default)]
    pub reconstruction: Option<PathBuf>,
    #[serde(default)]
    pub slice: Option<PathBuf>,
    #[serde(default)]
    pub table: Option<PathBuf>,
    #[serde(default)]
    pub report: Option<PathBuf>,
}

/// Every section is optional; a missing one takes the default `n = 1`
/// experiment's value.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub phantom: Option<PhantomSpec>,
    #[serde(default)]
    pub grids: Option<Vec<GridSpec>>,
    #[serde(default)]
    pub schedule: Option<ScheduleSpec>,
    #[serde(default)]
    pub recon: Option<ReconConfig>,
    #[serde(default)]
    pub outputs: Outputs,
}

/// Validated experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub phantom: PhantomSpec,
    pub x: Vec<Grid>,
    pub u: Vec<Grid>,
    pub schedule: AlphaSchedule,
    /// Whether `schedule` came from the config rather than the default.
    pub schedule_given: bool,
    pub xbar_refine: usize,
    pub recon: ReconConfig,
    pub outputs: Outputs,
}

const DEFAULT_COUNT: usize = 128;
const DEFAULT_EXTENT: f64 = 8.0;

fn default_phantom() -> PhantomSpec {
    PhantomSpec::Gaussian {
        center: vec![],
        width: 1.0,
    }
}

fn default_grids() -> Vec<GridSpec> {
    let g = GridSpec {
        count: DEFAULT_COUNT,
        spacing: DEFAULT_EXTENT / DEFAULT_COUNT as f64,
        origin: None,
    };
    vec![g, g]
}

fn default_schedule() -> ScheduleSpec {
    ScheduleSpec {
        a_min: Some(-8.0),
        a_max: Some(9.0),
        count: Some(257),
        alphas: None,
        weights: None,
        xbar_refine: default_refine(),
    }
}

pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    // serde would also accept a sequence of the fields in order
    if !text.trim_start().starts_with('{') {
        return Err(ConfigError::new("<root>", "the config must be a JSON object"));
    }
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." { "<root>".to_string() } else { path };
        ConfigError::new(key, e.into_inner())
    })
}

pub fn load(path: Option<&Path>) -> Result<ExperimentConfig, ConfigError> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| ConfigError::new("--config", format!("{}: {e}", p.display())))?;
            parse(&text)
        }
    }
}

impl ExperimentConfig {
    pub fn validate(self) -> Result<Experiment, ConfigError> {
        let grids = self.grids.unwrap_or_else(default_grids);
        let (x, u) = build_grids(&grids)?;
        let schedule_given = self.schedule.is_some();
        let sched = self.schedule.unwrap_or_else(default_schedule);
        let schedule = build_schedule(&sched)?;
        if sched.xbar_refine == 0 {
            return Err(ConfigError::new("schedule.xbar_refine", "must be at least 1"));
        }
        let recon = self.recon.unwrap_or_default();
        check_recon(&recon)?;
        Ok(Experiment {
            phantom: self.phantom.unwrap_or_else(default_phantom),
            x,
            u,
            schedule,
            schedule_given,
            xbar_refine: sched.xbar_refine,
            recon,
            outputs: self.outputs,
        })
    }
}

fn build_grids(specs: &[GridSpec]) -> Result<(Vec<Grid>, Vec<Grid>), ConfigError> {
    if specs.len() != 2 && specs.len() != 4 {
        return Err(ConfigError::new(
            "grids",
            format!("expected 2 (x, u) or 4 (x1, x2, u1, u2) grids, found {}", specs.len()),
        ));
    }
    let grids = specs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let g = match s.origin {
                Some(o) => Grid::new(s.count, s.spacing, o),
                None => Grid::symmetric(s.count, s.spacing),
            };
            g.map_err(|e| ConfigError::new(format!("grids[{i}]"), e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n = grids.len() / 2;
    Ok((grids[..n].to_vec(), grids[n..].to_vec()))
}

fn build_schedule(s: &ScheduleSpec) -> Result<AlphaSchedule, ConfigError> {
    let ranged = s.a_min.is_some() || s.a_max.is_some() || s.count.is_some();
    match &s.alphas {
        Some(alphas) => {
            if ranged {
                return Err(ConfigError::new("schedule", "give either alphas or a_min/a_max/count, not both"));
            }
            let built = match &s.weights {
                Some(w) => {
                    if w.len() != alphas.len() {
                        return Err(ConfigError::new(
                            "schedule.weights",
                            format!("{} weights for {} alphas", w.len(), alphas.len()),
                        ));
                    }
                    if w.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                        return Err(ConfigError::new("schedule.weights", "weights must be positive"));
                    }
                    AlphaSchedule::with_weights(alphas.clone(), w.clone())
                }
                None => AlphaSchedule::new(alphas.clone()),
            };
            built.map_err(|e| ConfigError::new("schedule.alphas", e))
        }
        None => {
            if s.weights.is_some() {
                return Err(ConfigError::new("schedule.weights", "weights need an explicit alphas list"));
            }
            let a_min = s.a_min.ok_or_else(|| ConfigError::new("schedule.a_min", "missing"))?;
            let a_max = s.a_max.ok_or_else(|| ConfigError::new("schedule.a_max", "missing"))?;
            let count = s.count.ok_or_else(|| ConfigError::new("schedule.count", "missing"))?;
            if count < 2 {
                return Err(ConfigError::new("schedule.count", format!("must be at least 2, got {count}")));
            }
            if !a_min.is_finite() || !a_max.is_finite() || !(a_max > a_min) {
                return Err(ConfigError::new("schedule.a_max", format!("need finite a_min < a_max, got [{a_min}, {a_max}]")));
            }
            AlphaSchedule::uniform(a_min, a_max, count).map_err(|e| ConfigError::new("schedule", e))
        }
    }
}

fn check_recon(r: &ReconConfig) -> Result<(), ConfigError> {
    if !(r.beta < 2.0) || !r.beta.is_finite() {
        return Err(ConfigError::new("recon.beta", format!("must be finite and < 2, got {}", r.beta)));
    }
    if let Some(b) = r.cutoff_b {
        if !(b > 0.0) || !b.is_finite() {
            return Err(ConfigError::new("recon.cutoff_b", format!("must be positive, got {b}")));
        }
    }
    if r.pad == 0 {
        return Err(ConfigError::new("recon.pad", "must be at least 1"));
    }
    Ok(())
}

impl Experiment {
    /// Preconditions of inverting `n`-dimensional data with `self.recon`.
    pub fn check_invertible(&self, n: usize) -> Result<(), ConfigError> {
        if n == 2 && !self.recon.assume_lambertian {
            return Err(ConfigError::new(
                "recon.assume_lambertian",
                "n=2 inversion is only valid for single-slope fields; set it to true",
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err_key(text: &str) -> String {
        match parse(text).and_then(ExperimentConfig::validate) {
            Err(e) => e.key,
            Ok(_) => panic!("config accepted: {text}"),
        }
    }

    #[test]
    fn empty_config_is_the_default_experiment() {
        let e = parse("{}").unwrap().validate().unwrap();
        assert_eq!(e.x.len(), 1);
        assert_eq!(e.x[0].count, 128);
        assert!(e.x[0].is_symmetric());
        assert_eq!(e.schedule.len(), 257);
        assert_eq!(e.xbar_refine, 2);
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_section() {
        assert_eq!(err_key(r#"{"shedule": {}}"#), "shedule");
        assert_eq!(err_key(r#"{"schedule": {"alphas": [0.5], "step": 1}}"#), "schedule.step");
        assert_eq!(err_key(r#"{"recon": {"betta": 0.5}}"#), "recon.betta");
        assert_eq!(err_key(r#"{"grids": [{"count": 8, "spacing": 0.5, "orign": 1}]}"#), "grids[0].orign");
        let e = parse(r#"{"recon": {"betta": 0.5}}"#).unwrap_err();
        assert!(e.msg.contains("betta"), "{}", e.msg);
    }

    #[test]
    fn type_errors_name_the_nested_key() {
        assert_eq!(err_key(r#"{"grids": [{"count": 8, "spacing": "big"}, {"count": 8, "spacing": 1}]}"#), "grids[0].spacing");
        assert_eq!(err_key(r#"{"phantom": {"kind": "gaussian", "width": 1, "colour": 2}}"#), "phantom");
    }

    #[test]
    fn schedule_through_zero_names_alphas() {
        assert_eq!(err_key(r#"{"schedule": {"alphas": [-1.0, 0.0, 2.0]}}"#), "schedule.alphas");
        assert_eq!(err_key(r#"{"schedule": {"alphas": [2.0, 1.0]}}"#), "schedule.alphas");
    }

    #[test]
    fn schedule_shape_errors() {
        assert_eq!(err_key(r#"{"schedule": {"a_min": 2, "a_max": 1, "count": 5}}"#), "schedule.a_max");
        assert_eq!(err_key(r#"{"schedule": {"a_min": -1, "count": 5}}"#), "schedule.a_max");
        assert_eq!(err_key(r#"{"schedule": {"a_min": -1, "a_max": 2, "count": 1}}"#), "schedule.count");
        assert_eq!(err_key(r#"{"schedule": {"alphas": [0.5], "count": 3}}"#), "schedule");
        assert_eq!(err_key(r#"{"schedule": {"alphas": [0.5, 2], "weights": [1]}}"#), "schedule.weights");
        assert_eq!(err_key(r#"{"schedule": {"alphas": [0.5], "xbar_refine": 0}}"#), "schedule.xbar_refine");
    }

    #[test]
    fn ranged_schedule_is_nudged_off_the_singular_nodes() {
        let e = parse(r#"{"schedule": {"a_min": -2, "a_max": 3, "count": 11}}"#)
            .unwrap()
            .validate()
            .unwrap();
        assert!(e.schedule.alphas.iter().all(|&a| a != 0.0 && a != 1.0));
    }

    #[test]
    fn grid_errors() {
        assert_eq!(err_key(r#"{"grids": [{"count": 8, "spacing": 1}]}"#), "grids");
        assert_eq!(err_key(r#"{"grids": [{"count": 1, "spacing": 1}, {"count": 8, "spacing": 1}]}"#), "grids[0]");
        let e = parse(r#"{"grids": [{"count": 4, "spacing": 1, "origin": 0}, {"count": 8, "spacing": 0.5}]}"#)
            .unwrap()
            .validate()
            .unwrap();
        assert_eq!(e.x[0].origin, 0.0);
        assert!(e.u[0].is_symmetric());
    }

    #[test]
    fn recon_checks() {
        assert_eq!(err_key(r#"{"recon": {"beta": 2.0}}"#), "recon.beta");
        assert_eq!(err_key(r#"{"recon": {"cutoff_b": -1}}"#), "recon.cutoff_b");
        let four = r#"{"count": 8, "spacing": 1}"#;
        let grids = format!(r#""grids": [{four}, {four}, {four}, {four}]"#);
        let plain = parse(&format!("{{{grids}}}")).unwrap().validate().unwrap();
        assert_eq!(plain.check_invertible(2).unwrap_err().key, "recon.assume_lambertian");
        assert!(plain.check_invertible(1).is_ok());
        let ok = format!(r#"{{{grids}, "recon": {{"assume_lambertian": true}}}}"#);
        let e = parse(&ok).unwrap().validate().unwrap();
        assert_eq!(e.x.len(), 2);
        assert!(e.check_invertible(2).is_ok());
    }

    #[test]
    fn malformed_json_is_a_config_error() {
        assert!(parse("{").is_err());
        assert_eq!(err_key("[]"), "<root>");
        assert_eq!(err_key("  [{}]"), "<root>");
        assert!(parse(" {} ").is_ok());
    }
}
