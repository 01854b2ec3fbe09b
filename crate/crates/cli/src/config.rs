//! Run configuration: defaults, a flat `key = value` file format and
//! command-line overrides.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use fracspec::spectral_oracle::SpectrumMethod;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("bad value for `{key}`: {value:?} ({reason})")]
    Value { key: String, value: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown format `{other}` (csv or json)")),
        }
    }
}

impl Format {
    fn as_str(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

/// Everything a run depends on. Computations are deterministic, so the
/// configuration fully identifies the output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub hurst: f64,
    pub beta: f64,
    pub mu: f64,
    pub horizon: f64,
    /// Gauss-Legendre nodes on the unit interval.
    pub n_unit: usize,
    /// Graded panels of the semi-axis grid of the refined solver.
    pub n_semi: usize,
    pub gl_order: usize,
    /// Number of eigenpairs; `None` picks a default per command.
    pub n_max: Option<usize>,
    pub eps: Vec<f64>,
    pub u: Vec<f64>,
    pub spectrum: SpectrumMethod,
    /// Skip the refined columns of `eigs`.
    pub no_refine: bool,
    /// Also solve the discretized Wiener-Hopf equation in `mse`.
    pub wiener_hopf: bool,
    /// Frequency for the ν-dependent profile of `special`.
    pub nu: Option<f64>,
    /// Evaluation points of `special`; empty selects a log grid.
    pub points: Vec<f64>,
    pub quick: bool,
    pub checks: Vec<u32>,
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            hurst: 0.7,
            beta: 0.0,
            mu: 1.0,
            horizon: 1.0,
            n_unit: 1000,
            n_semi: 40,
            gl_order: fracspec::model::DEFAULT_GL_ORDER,
            n_max: None,
            eps: vec![1e-2, 1e-3, 1e-4],
            u: vec![0.5, 1.0],
            spectrum: SpectrumMethod::Oracle,
            no_refine: false,
            wiener_hopf: false,
            nu: None,
            points: Vec::new(),
            quick: false,
            checks: Vec::new(),
            format: None,
            output: None,
            threads: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Value {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    if value == "auto" || value.is_empty() {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "auto".to_string(), |x| x.to_string())
}

impl RunConfig {
    /// Set one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "hurst" => self.hurst = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "mu" => self.mu = parse(key, value)?,
            "horizon" => self.horizon = parse(key, value)?,
            "n_unit" => self.n_unit = parse(key, value)?,
            "n_semi" => self.n_semi = parse(key, value)?,
            "gl_order" => self.gl_order = parse(key, value)?,
            "n_max" => self.n_max = parse_opt(key, value)?,
            "eps" => self.eps = parse_list(key, value)?,
            "u" => self.u = parse_list(key, value)?,
            "spectrum" => self.spectrum = parse(key, value)?,
            "no_refine" => self.no_refine = parse(key, value)?,
            "wiener_hopf" => self.wiener_hopf = parse(key, value)?,
            "nu" => self.nu = parse_opt(key, value)?,
            "points" => self.points = parse_list(key, value)?,
            "quick" => self.quick = parse(key, value)?,
            "checks" => self.checks = parse_list(key, value)?,
            "format" => self.format = parse_opt(key, value)?,
            "output" => self.output = if value.is_empty() || value == "auto" { None } else { Some(value.into()) },
            "threads" => self.threads = parse_opt(key, value)?,
            _ => return Err(ConfigError::UnknownKey { line: 0, key: key.into() }),
        }
        Ok(())
    }

    /// Apply a `key = value` file on top of the current values. Blank lines
    /// and lines starting with `#` are ignored.
    pub fn apply_file(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(key.trim(), value.trim()).map_err(|e| match e {
                ConfigError::UnknownKey { key, .. } => ConfigError::UnknownKey { line: i + 1, key },
                other => other,
            })?;
        }
        Ok(())
    }

    /// Text form that [`RunConfig::apply_file`] reads back to an equal value.
    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        // `{:?}` prints the shortest text that parses back to the same float.
        kv("hurst", format!("{:?}", self.hurst));
        kv("beta", format!("{:?}", self.beta));
        kv("mu", format!("{:?}", self.mu));
        kv("horizon", format!("{:?}", self.horizon));
        kv("n_unit", self.n_unit.to_string());
        kv("n_semi", self.n_semi.to_string());
        kv("gl_order", self.gl_order.to_string());
        kv("n_max", opt(&self.n_max));
        kv("eps", self.eps.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(","));
        kv("u", self.u.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(","));
        kv("spectrum", self.spectrum.as_str().to_string());
        kv("no_refine", self.no_refine.to_string());
        kv("wiener_hopf", self.wiener_hopf.to_string());
        kv("nu", self.nu.map_or_else(|| "auto".into(), |x| format!("{x:?}")));
        kv("points", self.points.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(","));
        kv("quick", self.quick.to_string());
        kv("checks", join(&self.checks));
        kv("format", self.format.map_or_else(|| "auto".into(), |f| f.as_str().into()));
        kv("output", self.output.as_ref().map_or_else(|| "auto".into(), |p| p.display().to_string()));
        kv("threads", opt(&self.threads));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut c = RunConfig {
            hurst: 0.1 + 0.2,
            eps: vec![1e-3, 3.3e-7],
            n_max: Some(17),
            nu: Some(12.5),
            points: vec![0.1, 2.0],
            checks: vec![1, 9],
            format: Some(Format::Json),
            output: Some("out.csv".into()),
            spectrum: SpectrumMethod::FirstOrder,
            ..RunConfig::default()
        };
        c.threads = Some(3);
        let mut back = RunConfig::default();
        back.apply_file(&c.to_file_string()).unwrap();
        assert_eq!(back, c);
        let mut d = RunConfig::default();
        d.apply_file(&RunConfig::default().to_file_string()).unwrap();
        assert_eq!(d, RunConfig::default());
    }

    #[test]
    fn rejects_corrupt_files() {
        let mut c = RunConfig::default();
        assert_eq!(c.apply_file("hurst 0.5"), Err(ConfigError::Syntax { line: 1 }));
        assert!(matches!(c.apply_file("# ok\nfoo = 1"), Err(ConfigError::UnknownKey { line: 2, .. })));
        assert!(matches!(c.apply_file("eps = 1e-3,x"), Err(ConfigError::Value { .. })));
        assert!(matches!(c.apply_file("spectrum = magic"), Err(ConfigError::Value { .. })));
    }
}
