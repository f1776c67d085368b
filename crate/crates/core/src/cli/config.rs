//! Flat `key = value` configuration documents.
//!
//! Keys are case-insensitive; `#` starts a comment that runs to the end of
//! the line. Unspecified keys take the case defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;

use super::{case_mask, case_objective, default_b, default_name, GridChoice, RunSpec};
use crate::discretization::X0Mode;
use crate::model::theorem1_margins;
use crate::pdesim::Scheme;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },

    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },

    #[error("line {line}: key `{key}` expects {expected}, got `{value}`")]
    Type {
        line: usize,
        key: String,
        expected: &'static str,
        value: String,
    },

    #[error("invalid configuration: {0}")]
    Invalid(String),

    #[error("initial point is infeasible: {0}")]
    Infeasible(String),
}

const KEYS: &[&str] = &[
    "name",
    "case",
    "homogeneous",
    "a",
    "b",
    "k1",
    "k2",
    "q",
    "r",
    "sigma",
    "beta",
    "eps",
    "eps1",
    "max_iters",
    "max_backtracks",
    "s0",
    "n",
    "sim_n",
    "t_final",
    "nt",
    "scheme",
    "x0",
    "out",
    "emit_field",
    "emit_field_initial",
];

fn canonical_key(key: &str) -> Option<&'static str> {
    let lower = key.to_ascii_lowercase();
    let lower = match lower.as_str() {
        "t" => "t_final",
        other => other,
    };
    KEYS.iter().copied().find(|k| *k == lower)
}

struct Entry {
    line: usize,
    value: String,
}

impl Entry {
    fn type_error(&self, key: &str, expected: &'static str) -> ConfigError {
        ConfigError::Type {
            line: self.line,
            key: key.to_string(),
            expected,
            value: self.value.clone(),
        }
    }

    fn float(&self, key: &str) -> Result<f64, ConfigError> {
        self.value.parse().map_err(|_| self.type_error(key, "a number"))
    }

    fn uint(&self, key: &str) -> Result<usize, ConfigError> {
        self.value.parse().map_err(|_| self.type_error(key, "a non-negative integer"))
    }

    fn boolean(&self, key: &str) -> Result<bool, ConfigError> {
        match self.value.to_ascii_lowercase().as_str() {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(self.type_error(key, "`true` or `false`")),
        }
    }
}

fn tokenize(text: &str) -> Result<BTreeMap<&'static str, Entry>, ConfigError> {
    let mut entries = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            text: content.to_string(),
        })?;
        let key = key.trim();
        let canonical = canonical_key(key).ok_or_else(|| ConfigError::UnknownKey {
            line,
            key: key.to_string(),
        })?;
        let entry = Entry {
            line,
            value: value.trim().to_string(),
        };
        if entries.insert(canonical, entry).is_some() {
            return Err(ConfigError::Duplicate {
                line,
                key: canonical.to_string(),
            });
        }
    }
    Ok(entries)
}

/// Parses and validates a document, including the margin test at the
/// initial point.
pub fn parse_config(text: &str) -> Result<RunSpec, ConfigError> {
    let spec = parse_config_unchecked(text)?;
    let report = theorem1_margins(&spec.p0);
    if !report.theorem_ok {
        return Err(ConfigError::Infeasible(report.violations().join("; ")));
    }
    Ok(spec)
}

/// Parses and range-checks a document without testing feasibility.
pub fn parse_config_unchecked(text: &str) -> Result<RunSpec, ConfigError> {
    let entries = tokenize(text)?;
    let case_id = match entries.get("case") {
        Some(e) => {
            let c = e.uint("case")?;
            if !(1..=3).contains(&c) {
                return Err(ConfigError::Invalid(format!("case must be 1, 2 or 3, got {c}")));
            }
            c as u8
        }
        None => 1,
    };
    let homogeneous = match entries.get("homogeneous") {
        Some(e) => e.boolean("homogeneous")?,
        None => true,
    };
    let mut spec = RunSpec::for_case(case_id, homogeneous);

    for (&key, e) in &entries {
        match key {
            "case" | "homogeneous" => {}
            "name" => spec.name = e.value.clone(),
            "a" => spec.p0.a = e.float(key)?,
            "b" => spec.p0.b = e.float(key)?,
            "k1" => spec.p0.k1 = e.float(key)?,
            "k2" => spec.p0.k2 = e.float(key)?,
            "q" => spec.weights.q = e.float(key)?,
            "r" => spec.weights.r = e.float(key)?,
            "sigma" => spec.optimizer.sigma = e.float(key)?,
            "beta" => spec.optimizer.beta = e.float(key)?,
            "eps" => spec.optimizer.eps = e.float(key)?,
            "eps1" => spec.optimizer.eps1 = e.float(key)?,
            "max_iters" => spec.optimizer.max_iters = e.uint(key)?,
            "max_backtracks" => spec.optimizer.max_backtracks = e.uint(key)?,
            "s0" => spec.optimizer.s0 = e.float(key)?,
            "n" => {
                spec.grid = if e.value.eq_ignore_ascii_case("auto") {
                    GridChoice::Calibrated
                } else {
                    GridChoice::Fixed(
                        e.value
                            .parse()
                            .map_err(|_| e.type_error(key, "an integer or `auto`"))?,
                    )
                }
            }
            "sim_n" => spec.sim.n = e.uint(key)?,
            "t_final" => spec.sim.t_final = e.float(key)?,
            "nt" => spec.sim.nt = e.uint(key)?,
            "scheme" => {
                spec.sim.scheme = match e.value.to_ascii_lowercase().as_str() {
                    "backward-euler" => Scheme::BackwardEuler,
                    "crank-nicolson" => Scheme::CrankNicolson,
                    _ => return Err(e.type_error(key, "`backward-euler` or `crank-nicolson`")),
                }
            }
            "x0" => {
                spec.x0_mode = match e.value.to_ascii_lowercase().as_str() {
                    "identity" => X0Mode::Identity,
                    "outer-product" => X0Mode::OuterProductOfInitialField,
                    _ => return Err(e.type_error(key, "`identity` or `outer-product`")),
                }
            }
            "out" => spec.out_dir = PathBuf::from(&e.value),
            "emit_field" => spec.emit_field = e.boolean(key)?,
            "emit_field_initial" => spec.emit_field_initial = e.boolean(key)?,
            _ => unreachable!("key table and match arms disagree on `{key}`"),
        }
    }
    validate(&spec)?;
    Ok(spec)
}

fn validate(spec: &RunSpec) -> Result<(), ConfigError> {
    let invalid = |e: crate::error::CcdError| ConfigError::Invalid(e.to_string());
    if spec.name.is_empty() || spec.name.contains(['/', '\\', '#']) || spec.name.starts_with('.') {
        return Err(ConfigError::Invalid(format!(
            "name must be a plain directory name, got `{}`",
            spec.name
        )));
    }
    if spec.homogeneous && spec.p0.b != 0.0 {
        return Err(ConfigError::Invalid(format!(
            "homogeneous runs need b = 0, got {}",
            spec.p0.b
        )));
    }
    spec.p0.validate().map_err(invalid)?;
    spec.weights.validate().map_err(invalid)?;
    spec.optimizer.validate().map_err(invalid)?;
    spec.sim.validate().map_err(invalid)?;
    if let GridChoice::Fixed(n) = spec.grid {
        crate::discretization::GridConfig::new(n).map_err(invalid)?;
    }
    debug_assert_eq!(spec.p0.free_mask, case_mask(spec.case_id));
    debug_assert_eq!(spec.weights.fd, case_objective(spec.case_id));
    Ok(())
}

/// Shortest text that parses back to exactly `v`.
fn float_text(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v:?}")
    } else {
        format!("{v:e}")
    }
}

/// Writes every field of `spec` so that [`parse_config`] restores it.
/// Names and paths must not contain `#` or line breaks.
pub fn render(spec: &RunSpec) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    if spec.name != default_name(spec.case_id, spec.homogeneous) {
        kv("name", spec.name.clone());
    }
    kv("case", spec.case_id.to_string());
    kv("homogeneous", spec.homogeneous.to_string());
    kv("a", float_text(spec.p0.a));
    if spec.p0.b != default_b(spec.homogeneous) {
        kv("b", float_text(spec.p0.b));
    }
    kv("k1", float_text(spec.p0.k1));
    kv("k2", float_text(spec.p0.k2));
    kv("q", float_text(spec.weights.q));
    kv("r", float_text(spec.weights.r));
    kv("sigma", float_text(spec.optimizer.sigma));
    kv("beta", float_text(spec.optimizer.beta));
    kv("eps", float_text(spec.optimizer.eps));
    kv("eps1", float_text(spec.optimizer.eps1));
    kv("max_iters", spec.optimizer.max_iters.to_string());
    kv("max_backtracks", spec.optimizer.max_backtracks.to_string());
    kv("s0", float_text(spec.optimizer.s0));
    kv(
        "n",
        match spec.grid {
            GridChoice::Fixed(n) => n.to_string(),
            GridChoice::Calibrated => "auto".to_string(),
        },
    );
    kv("sim_n", spec.sim.n.to_string());
    kv("t_final", float_text(spec.sim.t_final));
    kv("nt", spec.sim.nt.to_string());
    kv(
        "scheme",
        match spec.sim.scheme {
            Scheme::BackwardEuler => "backward-euler",
            Scheme::CrankNicolson => "crank-nicolson",
        }
        .to_string(),
    );
    kv(
        "x0",
        match spec.x0_mode {
            X0Mode::Identity => "identity",
            X0Mode::OuterProductOfInitialField => "outer-product",
        }
        .to_string(),
    );
    kv("out", spec.out_dir.display().to_string());
    kv("emit_field", spec.emit_field.to_string());
    kv("emit_field_initial", spec.emit_field_initial.to_string());
    s
}
