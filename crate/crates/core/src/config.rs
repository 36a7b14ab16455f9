//! Flat, human-editable run configuration: `key = value` lines grouped
//! under `[section]` headers, `#` comments. Parsing reports *every*
//! violation it finds, each tagged with its line number, instead of
//! stopping at the first. Outputs embed a SHA-256 hash of the raw config
//! bytes so any CSV can be traced back to the exact configuration.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use crate::bias::{BiasConfig, EpsRule, EtaRule};
use crate::bound::BoundConfig;
use crate::error::{Error, Result};
use crate::gmap::{parse_gmap, GMap};
use crate::harness::{Design, ExperimentConfig};
use crate::kink::KinkMap;
use crate::linalg::min_symmetric_eigenvalue;
use crate::loss::Loss;

#[derive(Clone, Debug)]
pub struct ModelSection {
    pub d: usize,
    pub g: GMap,
    pub f: KinkMap,
    pub loss: Loss,
}

#[derive(Clone, Debug)]
pub struct MomentsSection {
    pub beta_hat: DVector<f64>,
    pub sigma_hat: DMatrix<f64>,
    pub n: usize,
}

#[derive(Clone, Debug)]
pub struct BoundSection {
    pub beta0: Vec<f64>,
    pub sigma: DMatrix<f64>,
    pub cfg: BoundConfig,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub model: Option<ModelSection>,
    /// Standalone bias settings (defaults patched by the [bias] section).
    pub bias: BiasConfig,
    pub bound: Option<BoundSection>,
    pub moments: Option<MomentsSection>,
    pub experiment: Option<ExperimentConfig>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// SHA-256 of the raw config bytes, embedded in every output.
    pub hash: String,
}

pub fn config_hash(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    let digest = h.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

struct Entry {
    line: usize,
    value: String,
    used: std::cell::Cell<bool>,
}

#[derive(Default)]
struct Section {
    line: usize,
    entries: Vec<(String, Entry)>,
}

impl Section {
    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, e)| {
            e.used.set(true);
            e
        })
    }
}

#[derive(Default)]
struct Violations(Vec<String>);

impl Violations {
    fn push(&mut self, line: usize, msg: impl Into<String>) {
        self.0.push(format!("line {line}: {}", msg.into()));
    }
}

const KNOWN_SECTIONS: &[&str] = &["model", "bias", "bound", "moments", "experiment", "io"];

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut sections: Vec<(String, Section)> = Vec::new();
    let mut violations = Violations::default();
    let mut current: Option<usize> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim().to_string();
            if !KNOWN_SECTIONS.contains(&name.as_str()) {
                violations.push(line_no, format!("unknown section [{name}]"));
            }
            current = Some(sections.len());
            sections.push((
                name,
                Section {
                    line: line_no,
                    ..Section::default()
                },
            ));
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            violations.push(line_no, format!("expected key = value, got '{line}'"));
            continue;
        };
        let Some(cur) = current else {
            violations.push(line_no, "key outside any [section]".to_string());
            continue;
        };
        sections[cur].1.entries.push((
            key.trim().to_string(),
            Entry {
                line: line_no,
                value: value.trim().to_string(),
                used: std::cell::Cell::new(false),
            },
        ));
    }

    let find = |name: &str| -> Option<&Section> {
        sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
    };

    let model = find("model").map(|s| parse_model(s, &mut violations));
    let bias_patch = find("bias").map(|s| parse_bias_patch(s, &mut violations));
    let mut bias = BiasConfig::default();
    if let Some(p) = &bias_patch {
        p.apply(&mut bias);
    }
    let bound = find("bound").map(|s| parse_bound(s, &mut violations));
    let moments = find("moments").map(|s| parse_moments(s, &mut violations));
    let experiment = find("experiment").map(|s| {
        parse_experiment(
            s,
            bias_patch.as_ref(),
            model.as_ref().and_then(|m| m.as_ref().map(|m| m.loss)),
            &mut violations,
        )
    });

    let mut data = None;
    let mut out = None;
    if let Some(io) = find("io") {
        if let Some(e) = io.get("data") {
            data = Some(PathBuf::from(&e.value));
        }
        if let Some(e) = io.get("out") {
            out = Some(PathBuf::from(&e.value));
        }
    }

    // Unused keys are most likely typos.
    for (name, section) in &sections {
        for (key, entry) in &section.entries {
            if !entry.used.get() {
                violations.push(entry.line, format!("unknown key '{key}' in [{name}]"));
            }
        }
    }

    // Cross-field consistency.
    let model = model.flatten();
    if let Some(m) = &model {
        if m.loss.trunc.is_finite() && bias.m1 < m.loss.trunc {
            let line = find("model").map(|s| s.line).unwrap_or(0);
            violations.push(
                line,
                format!(
                    "m1 = {} must be >= the loss truncation level trunc_m = {}",
                    bias.m1, m.loss.trunc
                ),
            );
        }
    }
    if let (Some(m), Some(b)) = (&model, &bound) {
        if let Some(b) = b {
            if b.beta0.len() != m.d {
                let line = find("bound").map(|s| s.line).unwrap_or(0);
                violations.push(
                    line,
                    format!("beta0 has length {}, model d = {}", b.beta0.len(), m.d),
                );
            }
        }
    }

    if !violations.0.is_empty() {
        return Err(Error::Config(violations.0));
    }
    Ok(RunConfig {
        model,
        bias,
        bound: bound.flatten(),
        moments: moments.flatten(),
        experiment: experiment.flatten(),
        data,
        out,
        hash: config_hash(text),
    })
}

fn parse_model(s: &Section, v: &mut Violations) -> Option<ModelSection> {
    let mut ok = true;
    let d = match s.get("d") {
        Some(e) => match e.value.parse::<usize>() {
            Ok(d) if d >= 1 => Some(d),
            _ => {
                v.push(e.line, format!("d must be a positive integer, got '{}'", e.value));
                None
            }
        },
        None => {
            v.push(s.line, "[model] requires d = <dimension>");
            None
        }
    };
    let g = match (s.get("g"), d) {
        (Some(e), Some(d)) => match parse_gmap(&e.value, d) {
            Ok(g) => Some(g),
            Err(err) => {
                v.push(e.line, err.to_string());
                None
            }
        },
        (None, _) => {
            v.push(s.line, "[model] requires g = <map expression>");
            ok = false;
            None
        }
        _ => None,
    };
    let f = match s.get("f") {
        Some(e) => match KinkMap::parse(&e.value) {
            Ok(f) => f,
            Err(err) => {
                v.push(e.line, err.to_string());
                ok = false;
                KinkMap::Identity
            }
        },
        None => KinkMap::Identity,
    };
    let trunc = match s.get("trunc_m") {
        Some(e) => {
            if e.value == "inf" {
                f64::INFINITY
            } else {
                match e.value.parse::<f64>() {
                    Ok(t) if t > 0.0 => t,
                    _ => {
                        v.push(e.line, format!("trunc_m must be positive or 'inf', got '{}'", e.value));
                        ok = false;
                        f64::INFINITY
                    }
                }
            }
        }
        None => f64::INFINITY,
    };
    let loss = match s.get("loss") {
        Some(e) => match Loss::parse(&e.value, trunc) {
            Ok(l) => l,
            Err(err) => {
                v.push(e.line, err.to_string());
                ok = false;
                Loss::squared()
            }
        },
        None => {
            let mut l = Loss::squared();
            l.trunc = trunc;
            l
        }
    };
    match (d, g, ok) {
        (Some(d), Some(g), true) => Some(ModelSection { d, g, f, loss }),
        _ => None,
    }
}

#[derive(Default)]
struct BiasPatch {
    draws: Option<usize>,
    m1: Option<f64>,
    eps: Option<EpsRule>,
    eta: Option<EtaRule>,
    c_grid: Option<usize>,
    r_grid: Option<usize>,
    r_starts: Option<usize>,
    r_iters: Option<usize>,
    r_tol: Option<f64>,
    antithetic: Option<bool>,
    seed: Option<u64>,
}

impl BiasPatch {
    fn apply(&self, cfg: &mut BiasConfig) {
        if let Some(x) = self.draws {
            cfg.draws = x;
        }
        if let Some(x) = self.m1 {
            cfg.m1 = x;
        }
        if let Some(x) = self.eps {
            cfg.eps = x;
        }
        if let Some(x) = self.eta {
            cfg.eta = x;
        }
        if let Some(x) = self.c_grid {
            cfg.c_grid = x;
        }
        if let Some(x) = self.r_grid {
            cfg.r_search.grid_pts = x;
        }
        if let Some(x) = self.r_starts {
            cfg.r_search.starts = x;
        }
        if let Some(x) = self.r_iters {
            cfg.r_search.max_iters = x;
        }
        if let Some(x) = self.r_tol {
            cfg.r_search.tol = x;
        }
        if let Some(x) = self.antithetic {
            cfg.antithetic = x;
        }
        if let Some(x) = self.seed {
            cfg.seed = x;
        }
    }
}

fn get_parse<T: std::str::FromStr>(
    s: &Section,
    key: &str,
    what: &str,
    v: &mut Violations,
) -> Option<T> {
    let e = s.get(key)?;
    match e.value.parse::<T>() {
        Ok(x) => Some(x),
        Err(_) => {
            v.push(e.line, format!("{key} must be {what}, got '{}'", e.value));
            None
        }
    }
}

/// `n^(-1/3)`-style rule or a fixed positive number.
fn parse_eps(text: &str) -> std::result::Result<EpsRule, String> {
    let t = text.trim();
    if let Some(rest) = t.strip_prefix("n^(") {
        let Some(inner) = rest.strip_suffix(')') else {
            return Err("missing ')' in eps rule".into());
        };
        let inner = inner.trim();
        let exp: f64 = if let Some((num, den)) = inner.split_once('/') {
            let n: f64 = num.trim().parse().map_err(|_| "bad exponent")?;
            let d: f64 = den.trim().parse().map_err(|_| "bad exponent")?;
            n / d
        } else {
            inner.parse().map_err(|_| "bad exponent")?
        };
        if exp >= 0.0 {
            return Err(format!("eps rule exponent must be negative, got {exp}"));
        }
        Ok(EpsRule::PowerLaw { exponent: -exp })
    } else {
        let val: f64 = t.parse().map_err(|_| format!("bad eps value '{t}'"))?;
        if val <= 0.0 {
            return Err(format!("eps must be > 0, got {val}"));
        }
        Ok(EpsRule::Fixed(val))
    }
}

fn parse_bias_patch(s: &Section, v: &mut Violations) -> BiasPatch {
    let mut p = BiasPatch {
        draws: get_parse(s, "draws", "a positive integer", v),
        m1: get_parse(s, "m1", "a number", v),
        c_grid: get_parse(s, "c_grid", "an integer >= 2", v),
        r_grid: get_parse(s, "r_grid", "an integer >= 2", v),
        r_starts: get_parse(s, "r_starts", "an integer", v),
        r_iters: get_parse(s, "r_iters", "an integer", v),
        r_tol: get_parse(s, "r_tol", "a number", v),
        antithetic: get_parse(s, "antithetic", "true or false", v),
        seed: get_parse(s, "seed", "an unsigned integer", v),
        ..BiasPatch::default()
    };
    if let Some(e) = s.get("eps") {
        match parse_eps(&e.value) {
            Ok(r) => p.eps = Some(r),
            Err(msg) => v.push(e.line, msg),
        }
    }
    if let Some(e) = s.get("eta") {
        if e.value == "default" {
            p.eta = Some(EtaRule::Default);
        } else {
            match e.value.parse::<f64>() {
                Ok(x) if x >= 0.0 => p.eta = Some(EtaRule::Fixed(x)),
                _ => v.push(e.line, format!("eta must be 'default' or a number, got '{}'", e.value)),
            }
        }
    }
    p
}

fn parse_vector(text: &str) -> std::result::Result<Vec<f64>, String> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad number '{}'", t.trim()))
        })
        .collect()
}

fn parse_matrix(text: &str) -> std::result::Result<DMatrix<f64>, String> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(parse_vector)
        .collect::<std::result::Result<_, _>>()?;
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err("ragged matrix rows".into());
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &flat))
}

fn get_matrix(s: &Section, key: &str, v: &mut Violations) -> Option<DMatrix<f64>> {
    let e = s.get(key)?;
    match parse_matrix(&e.value) {
        Ok(m) => {
            if min_symmetric_eigenvalue(&m) <= crate::linalg::EIG_FLOOR {
                v.push(
                    e.line,
                    format!("{key} is not positive definite; an invertible covariance is required"),
                );
                None
            } else {
                Some(m)
            }
        }
        Err(msg) => {
            v.push(e.line, msg);
            None
        }
    }
}

fn parse_bound(s: &Section, v: &mut Violations) -> Option<BoundSection> {
    let beta0 = match s.get("beta0") {
        Some(e) => match parse_vector(&e.value) {
            Ok(b) => Some(b),
            Err(msg) => {
                v.push(e.line, msg);
                None
            }
        },
        None => {
            v.push(s.line, "[bound] requires beta0 = <vector>");
            None
        }
    };
    let sigma = if s.get("sigma").is_some() {
        get_matrix(s, "sigma", v)
    } else {
        v.push(s.line, "[bound] requires sigma = <matrix>");
        None
    };
    let mut cfg = BoundConfig::default();
    if let Some(x) = get_parse(s, "mc_size", "a positive integer", v) {
        cfg.mc_size = x;
    }
    if let Some(x) = get_parse(s, "c_grid", "an integer >= 2", v) {
        cfg.c_grid = x;
    }
    if let Some(x) = get_parse(s, "c_max", "a number", v) {
        cfg.c_max = x;
    }
    if let Some(e) = s.get("box_radius") {
        if e.value == "auto" {
            cfg.box_radius = None;
        } else {
            match e.value.parse::<f64>() {
                Ok(x) if x > 0.0 => cfg.box_radius = Some(x),
                _ => v.push(e.line, format!("box_radius must be 'auto' or positive, got '{}'", e.value)),
            }
        }
    }
    if let Some(x) = get_parse(s, "r_grid", "an integer >= 2", v) {
        cfg.r_search.grid_pts = x;
    }
    if let Some(x) = get_parse(s, "r_starts", "an integer", v) {
        cfg.r_search.starts = x;
    }
    if let Some(x) = get_parse(s, "r_iters", "an integer", v) {
        cfg.r_search.max_iters = x;
    }
    if let Some(x) = get_parse(s, "r_tol", "a number", v) {
        cfg.r_search.tol = x;
    }
    if let Some(x) = get_parse(s, "antithetic", "true or false", v) {
        cfg.antithetic = x;
    }
    if let Some(x) = get_parse(s, "seed", "an unsigned integer", v) {
        cfg.seed = x;
    }
    Some(BoundSection {
        beta0: beta0?,
        sigma: sigma?,
        cfg,
    })
}

fn parse_moments(s: &Section, v: &mut Violations) -> Option<MomentsSection> {
    let beta_hat = match s.get("beta_hat") {
        Some(e) => match parse_vector(&e.value) {
            Ok(b) => Some(DVector::from_vec(b)),
            Err(msg) => {
                v.push(e.line, msg);
                None
            }
        },
        None => {
            v.push(s.line, "[moments] requires beta_hat = <vector>");
            None
        }
    };
    let sigma_hat = if s.get("sigma_hat").is_some() {
        get_matrix(s, "sigma_hat", v)
    } else {
        v.push(s.line, "[moments] requires sigma_hat = <matrix>");
        None
    };
    let n = match s.get("n") {
        Some(e) => match e.value.parse::<usize>() {
            Ok(n) if n >= 1 => Some(n),
            _ => {
                v.push(e.line, format!("n must be a positive integer, got '{}'", e.value));
                None
            }
        },
        None => {
            v.push(s.line, "[moments] requires n = <sample size>");
            None
        }
    };
    let (beta_hat, sigma_hat, n) = (beta_hat?, sigma_hat?, n?);
    if sigma_hat.nrows() != beta_hat.len() {
        v.push(
            s.line,
            format!(
                "sigma_hat is {}x{} but beta_hat has length {}",
                sigma_hat.nrows(),
                sigma_hat.ncols(),
                beta_hat.len()
            ),
        );
        return None;
    }
    Some(MomentsSection {
        beta_hat,
        sigma_hat,
        n,
    })
}

fn parse_delta_grid(text: &str) -> std::result::Result<Vec<f64>, String> {
    let t = text.trim();
    if let Some(rest) = t.strip_prefix("linspace(") {
        let Some(inner) = rest.strip_suffix(')') else {
            return Err("missing ')' in linspace".into());
        };
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err("linspace needs (start, stop, count)".into());
        }
        let a: f64 = parts[0].parse().map_err(|_| "bad linspace start")?;
        let b: f64 = parts[1].parse().map_err(|_| "bad linspace stop")?;
        let k: usize = parts[2].parse().map_err(|_| "bad linspace count")?;
        if k < 2 {
            return Err("linspace count must be >= 2".into());
        }
        Ok(crate::bias::linspace(a, b, k))
    } else {
        parse_vector(t)
    }
}

fn parse_experiment(
    s: &Section,
    bias_patch: Option<&BiasPatch>,
    model_loss: Option<Loss>,
    v: &mut Violations,
) -> Option<ExperimentConfig> {
    let design = match s.get("design") {
        Some(e) => match Design::parse(&e.value) {
            Ok(d) => d,
            Err(err) => {
                v.push(e.line, err.to_string());
                Design::MaxOfMeans
            }
        },
        None => Design::MaxOfMeans,
    };
    let master_seed: u64 = get_parse(s, "master_seed", "an unsigned integer", v).unwrap_or(0);
    let mut cfg = match s.get("scale") {
        Some(e) if e.value == "full" => ExperimentConfig::full_scale(design, master_seed),
        Some(e) if e.value == "desk" => ExperimentConfig::desk_scale(design, master_seed),
        Some(e) => {
            v.push(e.line, format!("scale must be desk or full, got '{}'", e.value));
            ExperimentConfig::desk_scale(design, master_seed)
        }
        None => ExperimentConfig::desk_scale(design, master_seed),
    };
    if let Some(loss) = model_loss {
        cfg.loss = loss;
    }
    if let Some(x) = get_parse(s, "n", "a positive integer", v) {
        cfg.n = x;
    }
    if let Some(x) = get_parse(s, "reps", "a positive integer", v) {
        cfg.reps = x;
    }
    if let Some(e) = s.get("delta0") {
        match parse_delta_grid(&e.value) {
            Ok(g) => cfg.delta0_grid = g,
            Err(msg) => v.push(e.line, msg),
        }
    }
    if s.get("sigma").is_some() {
        if let Some(m) = get_matrix(s, "sigma", v) {
            cfg.sigma = m;
        }
    }
    if let Some(x) = get_parse(s, "reuse_xi", "true or false", v) {
        cfg.reuse_xi = x;
    }
    if let Some(p) = bias_patch {
        p.apply(&mut cfg.bias);
    }
    Some(cfg)
}
