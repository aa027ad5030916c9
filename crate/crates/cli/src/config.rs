//! Experiment configuration: flat `key = value` lines grouped under
//! `[section]` headers, `#` comments, comma-separated lists.
//!
//! ```text
//! [geometry]
//! L = 5.1
//! u_av = 1
//!
//! [run]
//! kind = adaptive
//! output = out/adaptive
//! reference = out/reference/reference
//!
//! [adaptive]
//! tol = 1e-2
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serp_core::adapt::{AdaptIndicator, AdaptiveConfig, ErrorScale};
use serp_core::linsolve::LinearSolver;
use serp_core::Geometry;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}:{line}:{column}: {message}")]
    Syntax {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub enum RunKind {
    /// Fine solution on the whole channel, written as mesh + field files.
    Reference {
        h: f64,
        grading: Option<f64>,
    },
    SweepInterface {
        h: f64,
        x_gamma: Vec<f64>,
    },
    SweepMesh {
        x_gamma: Option<f64>,
        h: Vec<f64>,
    },
    Adaptive {
        config: AdaptiveConfig<f64>,
        /// `None`: pick the interface from `tol_gamma`. `Some(None)`: no
        /// interface at all.
        x_gamma: Option<Option<f64>>,
    },
    Single {
        x_gamma: Option<f64>,
        h: f64,
    },
}

impl RunKind {
    pub fn name(&self) -> &'static str {
        match self {
            RunKind::Reference { .. } => "reference",
            RunKind::SweepInterface { .. } => "sweep_interface",
            RunKind::SweepMesh { .. } => "sweep_mesh",
            RunKind::Adaptive { .. } => "adaptive",
            RunKind::Single { .. } => "single",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub geometry: Geometry,
    pub kind: RunKind,
    pub output: PathBuf,
    /// Path prefix of a reference: `<prefix>.mesh` and `<prefix>.field`.
    pub reference: Option<PathBuf>,
    pub degree: usize,
    pub scale: ErrorScale,
    pub solver: LinearSolver,
    /// A row violates reliability when `η < (1 - slack) e`.
    pub reliability_slack: f64,
    /// Rows whose relative error is below this are not checked: the
    /// reference itself is not that accurate.
    pub trust_floor: f64,
}

const KINDS: [&str; 5] = ["reference", "sweep_interface", "sweep_mesh", "adaptive", "single"];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
    key_column: usize,
    value_column: usize,
    used: bool,
}

struct Parsed {
    path: String,
    /// section → key → entry
    sections: BTreeMap<String, (usize, BTreeMap<String, Entry>)>,
}

impl Parsed {
    fn syntax(&self, line: usize, column: usize, message: impl Into<String>) -> ConfigError {
        ConfigError::Syntax {
            path: self.path.clone(),
            line,
            column,
            message: message.into(),
        }
    }

    fn take(&mut self, section: &str, key: &str) -> Option<Entry> {
        let entry = self.sections.get_mut(section)?.1.get_mut(key)?;
        entry.used = true;
        Some(entry.clone())
    }

    fn number(&mut self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        let Some(e) = self.take(section, key) else {
            return Ok(None);
        };
        parse_number(&e.value).map(Some).ok_or_else(|| {
            self.syntax(
                e.line,
                e.value_column,
                format!("{key}: expected a number, found {:?}", e.value),
            )
        })
    }

    fn number_or(&mut self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.number(section, key)?.unwrap_or(default))
    }

    /// A number or `none`; `Ok(None)` when the key is absent.
    fn optional_number(&mut self, section: &str, key: &str) -> Result<Option<Option<f64>>, ConfigError> {
        let Some(e) = self.take(section, key) else {
            return Ok(None);
        };
        if e.value == "none" {
            return Ok(Some(None));
        }
        parse_number(&e.value).map(|v| Some(Some(v))).ok_or_else(|| {
            self.syntax(
                e.line,
                e.value_column,
                format!("{key}: expected a number or none, found {:?}", e.value),
            )
        })
    }

    fn list(&mut self, section: &str, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(e) = self.take(section, key) else {
            return Ok(None);
        };
        let mut out = Vec::new();
        let mut offset = 0;
        for item in e.value.split(',') {
            let lead = item.len() - item.trim_start().len();
            let t = item.trim();
            let v = parse_number(t).ok_or_else(|| {
                self.syntax(
                    e.line,
                    e.value_column + offset + lead,
                    format!("{key}: expected a number, found {t:?}"),
                )
            })?;
            out.push(v);
            offset += item.len() + 1;
        }
        Ok(Some(out))
    }

    fn integer(&mut self, section: &str, key: &str) -> Result<Option<usize>, ConfigError> {
        let Some(e) = self.take(section, key) else {
            return Ok(None);
        };
        e.value.parse().map(Some).map_err(|_| {
            self.syntax(
                e.line,
                e.value_column,
                format!("{key}: expected an integer, found {:?}", e.value),
            )
        })
    }

    fn boolean(&mut self, section: &str, key: &str) -> Result<Option<bool>, ConfigError> {
        let Some(e) = self.take(section, key) else {
            return Ok(None);
        };
        match e.value.as_str() {
            "true" => Ok(Some(true)),
            "false" => Ok(Some(false)),
            v => Err(self.syntax(
                e.line,
                e.value_column,
                format!("{key}: expected true or false, found {v:?}"),
            )),
        }
    }

    fn choice(
        &mut self,
        section: &str,
        key: &str,
        options: &[&str],
    ) -> Result<Option<(String, usize, usize)>, ConfigError> {
        let Some(e) = self.take(section, key) else {
            return Ok(None);
        };
        if options.contains(&e.value.as_str()) {
            Ok(Some((e.value, e.line, e.value_column)))
        } else {
            Err(self.syntax(
                e.line,
                e.value_column,
                format!("{key}: expected one of {}, found {:?}", options.join(", "), e.value),
            ))
        }
    }

    fn string(&mut self, section: &str, key: &str) -> Option<String> {
        self.take(section, key).map(|e| e.value)
    }
}

fn parse_number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn tokenize(path: &str, text: &str) -> Result<Parsed, ConfigError> {
    let mut parsed = Parsed {
        path: path.to_string(),
        sections: BTreeMap::new(),
    };
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        if let Some(rest) = trimmed.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return Err(parsed.syntax(line, indent + 1, "unterminated section header"));
            };
            let name = name.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(parsed.syntax(line, indent + 2, format!("invalid section name {name:?}")));
            }
            if parsed.sections.contains_key(name) {
                return Err(parsed.syntax(line, indent + 2, format!("section [{name}] appears twice")));
            }
            parsed.sections.insert(name.to_string(), (line, BTreeMap::new()));
            current = Some(name.to_string());
            continue;
        }
        let Some(eq) = content.find('=') else {
            return Err(parsed.syntax(line, indent + 1, "expected `key = value` or `[section]`"));
        };
        let key = content[..eq].trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(parsed.syntax(line, indent + 1, format!("invalid key {key:?}")));
        }
        let after = &content[eq + 1..];
        let value = after.trim();
        let value_column = eq + 2 + (after.len() - after.trim_start().len());
        if value.is_empty() {
            return Err(parsed.syntax(line, value_column, format!("{key}: missing value")));
        }
        let Some(section) = current.clone() else {
            return Err(parsed.syntax(line, indent + 1, format!("{key}: key outside of any section")));
        };
        let keys = &mut parsed.sections.get_mut(&section).expect("current section exists").1;
        if keys.contains_key(key) {
            return Err(parsed.syntax(line, indent + 1, format!("{key}: duplicate key in [{section}]")));
        }
        keys.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line,
                key_column: indent + 1,
                value_column,
                used: false,
            },
        );
    }
    Ok(parsed)
}

/// Parses configuration text. Relative paths are resolved against `base`.
pub fn parse_config(text: &str, path: &str, base: &Path) -> Result<ExperimentConfig, ConfigError> {
    let mut p = tokenize(path, text)?;
    let invalid = |message: String| ConfigError::Invalid {
        path: path.to_string(),
        message,
    };

    for (name, (line, _)) in &p.sections {
        let known = name == "geometry" || name == "run" || KINDS.contains(&name.as_str());
        if !known {
            return Err(p.syntax(*line, 2, format!("unknown section [{name}]")));
        }
    }

    let bench = Geometry::benchmark();
    let l = p.number_or("geometry", "L", bench.l)?;
    let r = p.number_or("geometry", "R", bench.r)?;
    let w = p.number_or("geometry", "W", bench.w)?;
    let l_out = p.number_or("geometry", "L_out", bench.l_out)?;
    let u_av = p.number_or("geometry", "u_av", bench.u_av)?;
    let geometry = Geometry::new(l, r, w, l_out, u_av).map_err(|e| invalid(format!("[geometry]: {e}")))?;

    let Some((kind, _, _)) = p.choice("run", "kind", &KINDS)? else {
        let line = p.sections.get("run").map_or(1, |s| s.0);
        return Err(p.syntax(line, 1, "[run] needs a kind"));
    };
    for other in KINDS.iter().filter(|&&k| k != kind) {
        if let Some((line, _)) = p.sections.get(*other) {
            return Err(p.syntax(*line, 2, format!("section [{other}] does not apply to kind = {kind}")));
        }
    }

    let resolve = |s: String| {
        let path = PathBuf::from(s);
        if path.is_absolute() {
            path
        } else {
            base.join(path)
        }
    };
    let output = resolve(p.string("run", "output").unwrap_or_else(|| format!("out/{kind}")));
    let reference = p.string("run", "reference").map(resolve);
    let degree = p.integer("run", "degree")?.unwrap_or(2);
    if !(1..=3).contains(&degree) {
        return Err(invalid(format!("[run] degree must be 1, 2 or 3, got {degree}")));
    }
    let scale = match p.choice("run", "scale", &["relative", "absolute"])? {
        Some((s, ..)) if s == "absolute" => ErrorScale::Absolute,
        _ => ErrorScale::Relative,
    };
    let solver = match p.choice("run", "solver", &["cholesky", "pcg"])? {
        Some((s, ..)) if s == "pcg" => LinearSolver::Pcg {
            rel_tol: 1e-12,
            max_iter: 100_000,
        },
        _ => LinearSolver::Cholesky,
    };
    let reliability_slack = p.number_or("run", "reliability_slack", 0.02)?;
    let trust_floor = p.number_or("run", "trust_floor", 5e-4)?;
    if !(0.0..1.0).contains(&reliability_slack) || trust_floor < 0.0 {
        return Err(invalid(
            "[run] reliability_slack must lie in [0, 1) and trust_floor be nonnegative".into(),
        ));
    }

    let positive = |name: &str, v: f64| {
        if v > 0.0 {
            Ok(v)
        } else {
            Err(invalid(format!("{name} must be positive, got {v}")))
        }
    };
    let kind = match kind.as_str() {
        "reference" => {
            let h = positive("h", p.number_or("reference", "h", 0.005)?)?;
            let grading = p.optional_number("reference", "grading")?.unwrap_or(Some(0.5));
            RunKind::Reference { h, grading }
        }
        "sweep_interface" => {
            let h = positive("h", p.number_or("sweep_interface", "h", 0.04)?)?;
            let x_gamma = p
                .list("sweep_interface", "x_gamma")?
                .unwrap_or_else(|| vec![0.1, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.4, 4.6, 4.8, 5.0, 5.08]);
            RunKind::SweepInterface { h, x_gamma }
        }
        "sweep_mesh" => {
            let x_gamma = p.optional_number("sweep_mesh", "x_gamma")?.unwrap_or(Some(4.6));
            let h = p.list("sweep_mesh", "h")?.unwrap_or_else(|| vec![0.08, 0.04, 0.02]);
            for &v in &h {
                positive("h", v)?;
            }
            RunKind::SweepMesh { x_gamma, h }
        }
        "adaptive" => {
            let tol = p.number_or("adaptive", "tol", 1e-2)?;
            let mut c = AdaptiveConfig::new(&geometry, tol);
            c.degree = degree;
            c.scale = scale;
            c.solver = solver;
            c.tol_gamma = p.number_or("adaptive", "tol_gamma", c.tol_gamma)?;
            c.dx = p.number_or("adaptive", "dx", c.dx)?;
            c.delta = p.number_or("adaptive", "delta", c.delta)?;
            c.re = p.number_or("adaptive", "re", c.re)?;
            c.coarse_h = p.number_or("adaptive", "coarse_h", c.coarse_h)?;
            c.initial_h = p.number_or("adaptive", "initial_h", c.initial_h)?;
            c.max_iters = p.integer("adaptive", "max_iters")?.unwrap_or(c.max_iters);
            c.coarsen = p.boolean("adaptive", "coarsen")?.unwrap_or(c.coarsen);
            c.refine.h_floor = p.number_or("adaptive", "h_floor", c.refine.h_floor)?;
            c.refine.max_elements = p.integer("adaptive", "max_elements")?.unwrap_or(c.refine.max_elements);
            if let Some((s, ..)) = p.choice("adaptive", "indicator", &["patch_sum", "literal"])? {
                c.indicator = if s == "literal" {
                    AdaptIndicator::Literal
                } else {
                    AdaptIndicator::PatchSum
                };
            }
            c.validate().map_err(|e| invalid(format!("[adaptive]: {e}")))?;
            let x_gamma = p.optional_number("adaptive", "x_gamma")?;
            RunKind::Adaptive { config: c, x_gamma }
        }
        "single" => {
            let x_gamma = p.optional_number("single", "x_gamma")?.unwrap_or(Some(4.6));
            let h = positive("h", p.number_or("single", "h", 0.04)?)?;
            RunKind::Single { x_gamma, h }
        }
        _ => unreachable!("kind validated against KINDS"),
    };

    for (section, (_, keys)) in &p.sections {
        if let Some((key, e)) = keys.iter().find(|(_, e)| !e.used) {
            return Err(p.syntax(e.line, e.key_column, format!("unknown key {key:?} in [{section}]")));
        }
    }

    if let Some(prefix) = &reference {
        for ext in ["mesh", "field"] {
            let f = prefix.with_extension(ext);
            if !f.is_file() {
                return Err(invalid(format!("reference file {} does not exist", f.display())));
            }
        }
    }

    Ok(ExperimentConfig {
        geometry,
        kind,
        output,
        reference,
        degree,
        scale,
        solver,
        reliability_slack,
        trust_floor,
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, &path.display().to_string(), base)
}
