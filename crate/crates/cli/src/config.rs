//! `key = value` run configuration.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use lcdflow_core::{Grid, Params, Scenario, ScenarioOptions};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: malformed value `{value}` for `{key}`: {reason}")]
    Malformed { line: usize, key: String, value: String, reason: String },
    #[error("missing required key `{key}`")]
    Missing { key: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Spectral,
    Galerkin,
    Both,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Spectral => "spectral",
            Backend::Galerkin => "galerkin",
            Backend::Both => "both",
        }
    }
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "spectral" => Ok(Backend::Spectral),
            "galerkin" => Ok(Backend::Galerkin),
            "both" => Ok(Backend::Both),
            _ => Err("expected spectral, galerkin or both".into()),
        }
    }
}

/// Everything a batch run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub dim: usize,
    pub n: usize,
    pub length: f64,
    pub params: Params,
    pub backend: Backend,
    pub diag_interval: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub amplitude: f64,
    pub twin_epsilon: f64,
    /// Galerkin basis size; 0 selects every resolved mode.
    pub galerkin_modes: usize,
    /// Steps between checkpoints; 0 writes only the final one.
    pub checkpoint_interval: usize,
}

/// Help text listing every key and its default.
pub const KEYS_HELP: &str = "\
Configuration keys (`key = value`, `#` starts a comment):
  scenario             rest | taylor-green-2d | variable-density-2d | small-data-3d | twin (required)
  dim                  2 or 3 (default: 3 for small-data-3d, else 2)
  n                    points per axis, power of two >= 8 (default: 64 in 2D, 32 in 3D)
  length               box side (default: 2π)
  eta                  penalty width (default: 0.2)
  m1, m2               density bounds (default: 1, 2)
  dt                   time step (default: 0.001)
  t_end                final time (default: 1)
  backend              spectral | galerkin | both (default: spectral)
  diag_interval        steps between series rows (default: 10)
  output_dir           output directory (default: out)
  seed                 seed of the random initial perturbation (default: 0)
  amplitude            initial velocity and director-tilt scale (default: 1)
  twin_epsilon         twin separation (default: 1e-6)
  galerkin_modes       Galerkin basis size, 0 = all resolved modes (default: 0)
  checkpoint_interval  steps between checkpoints, a multiple of diag_interval;
                       0 = final only (default: 0)";

const KEYS: [&str; 17] = [
    "scenario",
    "dim",
    "n",
    "length",
    "eta",
    "m1",
    "m2",
    "dt",
    "t_end",
    "backend",
    "diag_interval",
    "output_dir",
    "seed",
    "amplitude",
    "twin_epsilon",
    "galerkin_modes",
    "checkpoint_interval",
];

struct Entry {
    line: usize,
    value: String,
}

fn parse_value<T: FromStr>(key: &str, e: &Entry) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    e.value.parse::<T>().map_err(|err| ConfigError::Malformed {
        line: e.line,
        key: key.into(),
        value: e.value.clone(),
        reason: err.to_string(),
    })
}

fn malformed(key: &str, e: &Entry, reason: &str) -> ConfigError {
    ConfigError::Malformed { line: e.line, key: key.into(), value: e.value.clone(), reason: reason.into() }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut entries: HashMap<&'static str, Entry> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax { line });
        }
        let known = KEYS
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| ConfigError::UnknownKey { line, key: key.into() })?;
        if entries.insert(known, Entry { line, value: value.into() }).is_some() {
            return Err(ConfigError::Duplicate { line, key: key.into() });
        }
    }

    let scenario_entry = entries.get("scenario").ok_or(ConfigError::Missing { key: "scenario".into() })?;
    let scenario: Scenario = scenario_entry
        .value
        .parse()
        .map_err(|_| malformed("scenario", scenario_entry, "unknown scenario"))?;

    let positive_f64 = |key: &'static str, default: f64| -> Result<f64, ConfigError> {
        match entries.get(key) {
            None => Ok(default),
            Some(e) => {
                let v: f64 = parse_value(key, e)?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(malformed(key, e, "must be a positive finite number"));
                }
                Ok(v)
            }
        }
    };
    let count = |key: &'static str, default: usize, min: usize| -> Result<usize, ConfigError> {
        match entries.get(key) {
            None => Ok(default),
            Some(e) => {
                let v: usize = parse_value(key, e)?;
                if v < min {
                    return Err(malformed(key, e, &format!("must be at least {min}")));
                }
                Ok(v)
            }
        }
    };

    let dim = count("dim", scenario.default_dim(), 2)?;
    if dim > 3 {
        return Err(malformed("dim", &entries["dim"], "must be 2 or 3"));
    }
    let n = count("n", if dim == 3 { 32 } else { 64 }, 8)?;
    if !n.is_power_of_two() {
        return Err(malformed("n", &entries["n"], "must be a power of two"));
    }
    let length = positive_f64("length", 2.0 * std::f64::consts::PI)?;
    let defaults = Params::default();
    let params = Params {
        eta: positive_f64("eta", defaults.eta)?,
        m1: positive_f64("m1", defaults.m1)?,
        m2: positive_f64("m2", defaults.m2)?,
        dt: positive_f64("dt", defaults.dt)?,
        t_end: positive_f64("t_end", defaults.t_end)?,
    };
    if params.m2 < params.m1 {
        let e = entries.get("m2").or_else(|| entries.get("m1")).expect("one bound was given");
        return Err(malformed(if entries.contains_key("m2") { "m2" } else { "m1" }, e, "need m1 <= m2"));
    }
    let backend = match entries.get("backend") {
        None => Backend::Spectral,
        Some(e) => parse_value("backend", e)?,
    };
    if scenario == Scenario::Twin && backend != Backend::Spectral {
        return Err(malformed("backend", &entries["backend"], "the twin scenario runs the spectral backend only"));
    }
    let output_dir = entries.get("output_dir").map_or_else(|| PathBuf::from("out"), |e| PathBuf::from(&e.value));
    let seed = match entries.get("seed") {
        None => 0,
        Some(e) => parse_value("seed", e)?,
    };
    let cfg = RunConfig {
        scenario,
        dim,
        n,
        length,
        params,
        backend,
        diag_interval: count("diag_interval", 10, 1)?,
        output_dir,
        seed,
        amplitude: positive_f64("amplitude", 1.0)?,
        twin_epsilon: positive_f64("twin_epsilon", 1e-6)?,
        galerkin_modes: count("galerkin_modes", 0, 0)?,
        checkpoint_interval: count("checkpoint_interval", 0, 0)?,
    };
    if dim != scenario.default_dim() && scenario != Scenario::Rest && scenario != Scenario::Twin {
        return Err(malformed("dim", &entries["dim"], &format!("scenario {scenario} is {}-dimensional", scenario.default_dim())));
    }
    if !cfg.checkpoint_interval.is_multiple_of(cfg.diag_interval) {
        return Err(malformed(
            "checkpoint_interval",
            &entries["checkpoint_interval"],
            "must be a multiple of diag_interval",
        ));
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn grid(&self) -> Grid {
        Grid::new(self.dim, self.n, self.length).expect("validated at parse time")
    }

    pub fn scenario_options(&self) -> ScenarioOptions {
        ScenarioOptions { amplitude: self.amplitude, seed: self.seed, twin_epsilon: self.twin_epsilon }
    }

    /// Text that parses back to this configuration.
    pub fn to_config_string(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("scenario", self.scenario.name().into());
        put("dim", self.dim.to_string());
        put("n", self.n.to_string());
        put("length", self.length.to_string());
        put("eta", p.eta.to_string());
        put("m1", p.m1.to_string());
        put("m2", p.m2.to_string());
        put("dt", p.dt.to_string());
        put("t_end", p.t_end.to_string());
        put("backend", self.backend.name().into());
        put("diag_interval", self.diag_interval.to_string());
        put("output_dir", self.output_dir.display().to_string());
        put("seed", self.seed.to_string());
        put("amplitude", self.amplitude.to_string());
        put("twin_epsilon", self.twin_epsilon.to_string());
        put("galerkin_modes", self.galerkin_modes.to_string());
        put("checkpoint_interval", self.checkpoint_interval.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse_config("scenario = rest\n").unwrap();
        assert_eq!(c.scenario, Scenario::Rest);
        assert_eq!((c.dim, c.n), (2, 64));
        assert_eq!(c.params, Params::default());
        assert_eq!(c.backend, Backend::Spectral);
        assert_eq!(c.diag_interval, 10);
        assert_eq!(c.output_dir, PathBuf::from("out"));
        assert_eq!(c.seed, 0);
    }

    #[test]
    fn three_dimensional_defaults() {
        let c = parse_config("scenario = small-data-3d").unwrap();
        assert_eq!((c.dim, c.n), (3, 32));
    }

    #[test]
    fn comments_and_blank_lines() {
        let c = parse_config("# header\n\nscenario = twin   # trailing\n dt = 0.002\n").unwrap();
        assert_eq!(c.scenario, Scenario::Twin);
        assert_eq!(c.params.dt, 0.002);
    }

    #[test]
    fn negative_dt_names_key_and_line() {
        let err = parse_config("scenario = rest\ndt = -0.1\n").unwrap_err();
        assert!(matches!(&err, ConfigError::Malformed { line: 2, key, .. } if key == "dt"), "{err}");
        assert!(err.to_string().contains("line 2") && err.to_string().contains("dt"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(
            parse_config("scenario = rest\ncolour = red").unwrap_err(),
            ConfigError::UnknownKey { line: 2, key: "colour".into() }
        );
        assert_eq!(parse_config("dt = 0.1").unwrap_err(), ConfigError::Missing { key: "scenario".into() });
        assert_eq!(parse_config("scenario rest").unwrap_err(), ConfigError::Syntax { line: 1 });
        assert!(matches!(parse_config("scenario = rest\nn = 48").unwrap_err(), ConfigError::Malformed { line: 2, .. }));
        assert!(matches!(
            parse_config("scenario = rest\nbackend = fast").unwrap_err(),
            ConfigError::Malformed { line: 2, .. }
        ));
        assert!(matches!(
            parse_config("scenario = rest\ndt = 1\ndt = 2").unwrap_err(),
            ConfigError::Duplicate { line: 3, .. }
        ));
        assert!(matches!(
            parse_config("scenario = rest\nm1 = 3").unwrap_err(),
            ConfigError::Malformed { line: 2, .. }
        ));
        assert!(parse_config("scenario = taylor-green-2d\ndim = 3").is_err());
        assert!(parse_config("scenario = twin\nbackend = both").is_err());
        assert!(parse_config("scenario = rest\ndiag_interval = 4\ncheckpoint_interval = 6").is_err());
    }

    #[test]
    fn full_config_roundtrips() {
        let text = "scenario = variable-density-2d\nn = 32\nlength = 3.5\neta = 0.15\nm1 = 0.5\nm2 = 2.5\n\
                    dt = 0.0007\nt_end = 0.3\nbackend = both\ndiag_interval = 7\noutput_dir = runs/a\n\
                    seed = 42\namplitude = 0.8\ntwin_epsilon = 1e-7\ngalerkin_modes = 100\ncheckpoint_interval = 56\n";
        let c = parse_config(text).unwrap();
        let again = parse_config(&c.to_config_string()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.to_config_string(), again.to_config_string());
    }
}
