//! Flat key-value run configuration with `[sections]`.
//!
//! ```text
//! [problem]
//! name = isotropic_cantilever_2d
//! nx = 96
//! ny = 32
//!
//! [optimizer]
//! tol_rel = 1e-4
//! max_iters = 200
//!
//! [output]
//! dir = runs/iso
//! snapshot_every = 10
//! ```
//!
//! `#` starts a comment. Unknown sections or keys are errors, reported with
//! their line number. Optimizer keys default to the problem's recommended
//! options, so a minimal config only names the problem and the output
//! directory.

use simpl_core::optimizer::OptOptions;
use simpl_core::polytope::Polytope;
use simpl_core::problems::{
    build_isotropic_cantilever, build_orthotropic_cantilever, BuiltProblem, IsoConfig,
    OrthoConfig,
};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "line {n}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: Option<usize>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

/// Which benchmark to run.
#[derive(Debug, Clone)]
pub enum ProblemChoice {
    Isotropic(IsoConfig),
    Orthotropic(OrthoConfig),
}

impl ProblemChoice {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemChoice::Isotropic(_) => "isotropic_cantilever_2d",
            ProblemChoice::Orthotropic(_) => "orthotropic_cantilever_2d",
        }
    }

    pub fn grid(&self) -> (usize, usize) {
        match self {
            ProblemChoice::Isotropic(c) => (c.nx, c.ny),
            ProblemChoice::Orthotropic(c) => (c.nx, c.ny),
        }
    }

    pub fn build(&self) -> simpl_core::Result<BuiltProblem> {
        match self {
            ProblemChoice::Isotropic(c) => build_isotropic_cantilever(c),
            ProblemChoice::Orthotropic(c) => build_orthotropic_cantilever(c),
        }
    }
}

/// Fully interpreted run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: ProblemChoice,
    /// Overrides applied on top of the problem's recommended options.
    optimizer_overrides: Vec<(String, f64)>,
    pub output_dir: PathBuf,
    /// Iterations between field snapshots; 0 disables them.
    pub snapshot_every: usize,
}

impl RunConfig {
    /// Parse and interpret a config file. Relative paths inside the file
    /// (the orthotropic `polytope_file`) resolve against the config's
    /// directory.
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err(None, format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::from_text(&text, base)
    }

    pub fn from_text(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
        let entries = parse_entries(text)?;
        let mut used: Vec<bool> = vec![false; entries.len()];

        let mut lookup = |section: &str, key: &str| -> Option<(usize, String)> {
            for (i, e) in entries.iter().enumerate() {
                if e.section == section && e.key == key {
                    used[i] = true;
                    return Some((e.line, e.value.clone()));
                }
            }
            None
        };

        let (name_line, name) = lookup("problem", "name")
            .ok_or_else(|| err(None, "missing [problem] name"))?;

        let f64_at = |line: usize, v: &str| -> Result<f64, ConfigError> {
            v.parse::<f64>()
                .map_err(|_| err(Some(line), format!("cannot parse '{v}' as a number")))
        };
        let usize_at = |line: usize, v: &str| -> Result<usize, ConfigError> {
            v.parse::<usize>()
                .map_err(|_| err(Some(line), format!("cannot parse '{v}' as a count")))
        };

        let problem = match name.as_str() {
            "isotropic_cantilever_2d" => {
                let mut cfg = IsoConfig::default();
                if let Some((l, v)) = lookup("problem", "nx") {
                    cfg.nx = usize_at(l, &v)?;
                }
                if let Some((l, v)) = lookup("problem", "ny") {
                    cfg.ny = usize_at(l, &v)?;
                }
                if let Some((l, v)) = lookup("problem", "filter_epsilon") {
                    cfg.filter_epsilon = f64_at(l, &v)?;
                }
                if let Some((l, v)) = lookup("problem", "simp_exponent") {
                    cfg.simp_exponent = f64_at(l, &v)?;
                }
                ProblemChoice::Isotropic(cfg)
            }
            "orthotropic_cantilever_2d" => {
                let mut cfg = OrthoConfig::default();
                if let Some((l, v)) = lookup("problem", "nx") {
                    cfg.nx = usize_at(l, &v)?;
                }
                if let Some((l, v)) = lookup("problem", "ny") {
                    cfg.ny = usize_at(l, &v)?;
                }
                if let Some((l, v)) = lookup("problem", "filter_epsilon") {
                    cfg.filter_epsilon = f64_at(l, &v)?;
                }
                if let Some((l, v)) = lookup("problem", "num_angles") {
                    cfg.num_angles = usize_at(l, &v)?;
                }
                if let Some((l, v)) = lookup("problem", "orientation_exponent") {
                    let p = usize_at(l, &v)?;
                    cfg.exponent = p as u32;
                }
                if let Some((l, v)) = lookup("problem", "min_void_fraction") {
                    cfg.min_void_fraction = f64_at(l, &v)?;
                }
                if let Some((l, v)) = lookup("problem", "initial_psi") {
                    let parts: Vec<f64> = v
                        .split(|c: char| c == ',' || c.is_whitespace())
                        .filter(|s| !s.is_empty())
                        .map(|s| f64_at(l, s))
                        .collect::<Result<_, _>>()?;
                    if parts.len() != 3 {
                        return Err(err(Some(l), "initial_psi needs exactly 3 components"));
                    }
                    cfg.initial_psi = [parts[0], parts[1], parts[2]];
                }
                if let Some((l, v)) = lookup("problem", "polytope_file") {
                    let path = base_dir.join(&v);
                    let text = std::fs::read_to_string(&path).map_err(|e| {
                        err(Some(l), format!("cannot read {}: {e}", path.display()))
                    })?;
                    let p = Polytope::from_vertex_text(&text)
                        .map_err(|e| err(Some(l), format!("{}: {e}", path.display())))?;
                    cfg.polytope_override = Some(p);
                }
                ProblemChoice::Orthotropic(cfg)
            }
            other => {
                return Err(err(
                    Some(name_line),
                    format!(
                        "unknown problem '{other}' (expected isotropic_cantilever_2d or orthotropic_cantilever_2d)"
                    ),
                ))
            }
        };

        let mut optimizer_overrides = Vec::new();
        for key in [
            "c1",
            "tol_abs",
            "tol_rel",
            "alpha0",
            "alpha_min",
            "alpha_max",
            "max_iters",
            "max_backtracks",
            "latent_bound",
        ] {
            if let Some((l, v)) = lookup("optimizer", key) {
                optimizer_overrides.push((key.to_string(), f64_at(l, &v)?));
            }
        }
        for key in ["tolerance", "max_sweeps"] {
            if let Some((l, v)) = lookup("projection", key) {
                optimizer_overrides.push((format!("projection.{key}"), f64_at(l, &v)?));
            }
        }

        let output_dir = lookup("output", "dir")
            .map(|(_, v)| base_dir.join(v))
            .unwrap_or_else(|| base_dir.join("out"));
        let snapshot_every = match lookup("output", "snapshot_every") {
            Some((l, v)) => usize_at(l, &v)?,
            None => 0,
        };

        for (e, u) in entries.iter().zip(&used) {
            if !u {
                return Err(err(
                    Some(e.line),
                    format!("unknown key '{}' in section [{}]", e.key, e.section),
                ));
            }
        }

        Ok(RunConfig {
            problem,
            optimizer_overrides,
            output_dir,
            snapshot_every,
        })
    }

    /// Apply the optimizer overrides to the problem's recommendation and
    /// validate the result.
    pub fn optimizer_options(&self, recommended: OptOptions) -> Result<OptOptions, ConfigError> {
        let mut opts = recommended;
        for (key, v) in &self.optimizer_overrides {
            let v = *v;
            match key.as_str() {
                "c1" => opts.c1 = v,
                "tol_abs" => opts.tol_abs = v,
                "tol_rel" => opts.tol_rel = v,
                "alpha0" => opts.alpha0 = v,
                "alpha_min" => opts.alpha_min = v,
                "alpha_max" => opts.alpha_max = v,
                "max_iters" => opts.max_iters = v as usize,
                "max_backtracks" => opts.max_backtracks = v as usize,
                "latent_bound" => opts.latent_bound = v,
                "projection.tolerance" => opts.projection.tolerance = v,
                "projection.max_sweeps" => opts.projection.max_sweeps = v as usize,
                _ => unreachable!("override keys are filtered at parse time"),
            }
        }
        opts.validate()
            .map_err(|e| err(None, format!("invalid optimizer options: {e}")))?;
        Ok(opts)
    }
}

struct Entry {
    line: usize,
    section: String,
    key: String,
    value: String,
}

fn parse_entries(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut entries = Vec::new();
    let mut section = String::new();
    let mut seen: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(Some(line_no), "unterminated section header"))?
                .trim();
            if !matches!(name, "problem" | "optimizer" | "projection" | "output") {
                return Err(err(Some(line_no), format!("unknown section [{name}]")));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(Some(line_no), "expected 'key = value'"))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if section.is_empty() {
            return Err(err(Some(line_no), "key outside any [section]"));
        }
        if value.is_empty() {
            return Err(err(Some(line_no), format!("empty value for '{key}'")));
        }
        if let Some(first) = seen.insert((section.clone(), key.clone()), line_no) {
            return Err(err(
                Some(line_no),
                format!("duplicate key '{key}' (first set on line {first})"),
            ));
        }
        entries.push(Entry {
            line: line_no,
            section: section.clone(),
            key,
            value,
        });
    }
    Ok(entries)
}
