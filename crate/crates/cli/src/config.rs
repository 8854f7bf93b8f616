//! Run configuration: a flat `key = value` text format.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! line    := blank | comment | entry
//! comment := '#' any*
//! entry   := key ws* '=' ws* value ws* ('#' any*)?
//! key     := [A-Za-z0-9_.]+
//! ```
//!
//! Lists are comma separated (`masses = 0, 0.01`). A key may appear at most
//! once. Every key not listed in [`KEYS`] is rejected, except `window.<p>`,
//! which is passed through to the window family as parameter `p`.

use crate::error::{CliError, Result};
use indexmap::IndexMap;
use rgpt_core::flow::CouplingVector;
use rgpt_core::lattice::{LaplacianSign, TorusSpec, ZeroMode};
use rgpt_core::window::{Params, WindowRegistry};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Recognised keys with their defaults, in canonical order.
pub const KEYS: &[(&str, &str)] = &[
    ("d", "4"),
    ("L", "2"),
    ("N", "5"),
    ("masses", "0"),
    ("zero_mode", "drop"),
    ("window", "bump"),
    ("ab", "3"),
    ("g", "0"),
    ("nu", "0"),
    ("y", "0"),
    ("z", "0"),
    ("lam_a", "0"),
    ("lam_b", "0"),
    ("q_a", "0"),
    ("q_b", "0"),
    ("j_start", "1"),
    ("j_end", "auto"),
    ("omega", "2"),
    ("out", "out"),
    ("laplacian_sign", "moment_identity"),
    ("memory_budget", "8589934592"),
    ("divergence", "1000"),
    ("seed", "20240101"),
    ("tol.closure", "1e-9"),
    ("tol.beta_pair", "0.25"),
    ("tol.beta_extrap", "0.10"),
    ("tol.range", "1e-2"),
    ("tol.bound_factor", "10"),
    ("tol.cubic_factor", "2"),
    ("tol.roundtrip", "1e-12"),
    ("tol.symbolic", "1e-12"),
    ("tol.gbar_asym", "0.3"),
    ("tol.comparability", "2"),
    ("tol.scale_gap", "3"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct Tolerances {
    pub closure: f64,
    pub beta_pair: f64,
    pub beta_extrap: f64,
    pub range: f64,
    pub bound_factor: f64,
    pub cubic_factor: f64,
    pub roundtrip: f64,
    pub symbolic: f64,
    pub gbar_asym: f64,
    pub comparability: f64,
    pub scale_gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub spec: TorusSpec,
    pub masses: Vec<f64>,
    pub zero_mode: ZeroMode,
    pub window_family: String,
    pub window_params: Params,
    /// a − b = ab · e_1.
    pub ab: i64,
    pub v0: CouplingVector,
    pub j_start: usize,
    /// Exclusive end of the flow range.
    pub j_end: usize,
    pub omega: f64,
    pub out: PathBuf,
    pub sign: LaplacianSign,
    pub memory_budget: u64,
    pub divergence: f64,
    pub seed: u64,
    pub tol: Tolerances,
    /// Resolved `key = value` pairs in canonical order; the hash is taken
    /// over this text.
    pub canonical: String,
}

fn parse_lines(text: &str) -> Result<IndexMap<String, String>> {
    let mut out = IndexMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", no + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        let key_ok = !k.is_empty()
            && k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.');
        if !key_ok {
            return Err(CliError::Config(format!("line {}: bad key `{k}`", no + 1)));
        }
        if v.is_empty() {
            return Err(CliError::Config(format!("line {}: empty value for `{k}`", no + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(CliError::Config(format!("line {}: duplicate key `{k}`", no + 1)));
        }
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn finite(key: &str, v: &str) -> Result<f64> {
    let x: f64 = num(key, v)?;
    if !x.is_finite() {
        return Err(CliError::Config(format!("`{key}` must be finite, got {v}")));
    }
    Ok(x)
}

fn positive(key: &str, v: &str) -> Result<f64> {
    let x = finite(key, v)?;
    if x <= 0.0 {
        return Err(CliError::Config(format!("`{key}` must be positive, got {v}")));
    }
    Ok(x)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_entries(parse_lines(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parse a file (if any) and then apply `key=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut entries = match path {
            Some(p) => parse_lines(
                &std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
            )?,
            None => IndexMap::new(),
        };
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override `{o}`: expected key=value")))?;
            entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        Self::from_entries(entries)
    }

    pub fn default_config() -> Self {
        Self::from_entries(IndexMap::new()).expect("defaults are valid")
    }

    fn from_entries(mut given: IndexMap<String, String>) -> Result<Self> {
        let mut window_params = Params::new();
        let mut window_keys: Vec<(String, String)> = Vec::new();
        for (k, v) in given.iter() {
            if let Some(p) = k.strip_prefix("window.") {
                window_params.insert(p.to_string(), finite(k, v)?);
                window_keys.push((k.clone(), v.clone()));
            } else if !KEYS.iter().any(|(name, _)| name == k) {
                return Err(CliError::Config(format!("unknown key `{k}`")));
            }
        }
        given.retain(|k, _| !k.starts_with("window."));
        let mut r: IndexMap<&str, String> = IndexMap::new();
        for (k, def) in KEYS {
            r.insert(k, given.get(*k).cloned().unwrap_or_else(|| def.to_string()));
        }
        let get = |k: &str| r[k].as_str();

        let d: usize = num("d", get("d"))?;
        let l: usize = num("L", get("L"))?;
        let n: usize = num("N", get("N"))?;
        let spec = TorusSpec::new(d, l, n).map_err(|e| CliError::Config(e.to_string()))?;

        let masses = get("masses")
            .split(',')
            .map(|s| finite("masses", s.trim()))
            .collect::<Result<Vec<f64>>>()?;
        if masses.iter().any(|m| *m < 0.0) {
            return Err(CliError::Config("masses must be nonnegative".into()));
        }
        let zero_mode = match get("zero_mode") {
            "drop" => ZeroMode::Drop,
            "forbid" => ZeroMode::Forbid,
            o => return Err(CliError::Config(format!("`zero_mode`: expected drop|forbid, got `{o}`"))),
        };
        if zero_mode == ZeroMode::Forbid && masses.contains(&0.0) {
            return Err(CliError::Config("m² = 0 needs zero_mode = drop".into()));
        }
        let window_family = get("window").to_string();
        // Build once so that bad families or parameters fail here.
        WindowRegistry::builtin()
            .create(&window_family, &window_params)
            .map_err(|e| CliError::Config(e.to_string()))?;

        let ab: i64 = num("ab", get("ab"))?;
        if ab < 1 || ab as usize >= spec.side() / 2 {
            return Err(CliError::Config(format!(
                "`ab` must lie in 1..{}, got {ab}",
                spec.side() / 2
            )));
        }
        let v0 = CouplingVector {
            g: finite("g", get("g"))?,
            nu: finite("nu", get("nu"))?,
            y: finite("y", get("y"))?,
            z: finite("z", get("z"))?,
            lam_a: finite("lam_a", get("lam_a"))?,
            lam_b: finite("lam_b", get("lam_b"))?,
            q_a: finite("q_a", get("q_a"))?,
            q_b: finite("q_b", get("q_b"))?,
        };
        let j_start: usize = num("j_start", get("j_start"))?;
        let j_end: usize = match get("j_end") {
            "auto" => n,
            v => num("j_end", v)?,
        };
        if j_end > n || j_start > j_end {
            return Err(CliError::Config(format!(
                "flow range {j_start}..{j_end} must satisfy j_start ≤ j_end ≤ N = {n}"
            )));
        }
        let omega = positive("omega", get("omega"))?;
        if omega <= 1.0 {
            return Err(CliError::Config(format!("`omega` must exceed 1, got {omega}")));
        }
        let sign = LaplacianSign::parse(get("laplacian_sign")).ok_or_else(|| {
            CliError::Config(format!(
                "`laplacian_sign`: expected moment_identity|literal, got `{}`",
                get("laplacian_sign")
            ))
        })?;
        let tol = Tolerances {
            closure: positive("tol.closure", get("tol.closure"))?,
            beta_pair: positive("tol.beta_pair", get("tol.beta_pair"))?,
            beta_extrap: positive("tol.beta_extrap", get("tol.beta_extrap"))?,
            range: positive("tol.range", get("tol.range"))?,
            bound_factor: positive("tol.bound_factor", get("tol.bound_factor"))?,
            cubic_factor: positive("tol.cubic_factor", get("tol.cubic_factor"))?,
            roundtrip: positive("tol.roundtrip", get("tol.roundtrip"))?,
            symbolic: positive("tol.symbolic", get("tol.symbolic"))?,
            gbar_asym: positive("tol.gbar_asym", get("tol.gbar_asym"))?,
            comparability: positive("tol.comparability", get("tol.comparability"))?,
            scale_gap: positive("tol.scale_gap", get("tol.scale_gap"))?,
        };

        let mut canonical = String::new();
        for (k, v) in &r {
            canonical.push_str(&format!("{k} = {v}\n"));
        }
        window_keys.sort();
        for (k, v) in &window_keys {
            canonical.push_str(&format!("{k} = {v}\n"));
        }
        Ok(RunConfig {
            spec,
            masses,
            zero_mode,
            window_family,
            window_params,
            ab,
            v0,
            j_start,
            j_end,
            omega,
            out: PathBuf::from(get("out")),
            sign,
            memory_budget: num("memory_budget", get("memory_budget"))?,
            divergence: positive("divergence", get("divergence"))?,
            seed: num("seed", get("seed"))?,
            tol,
            canonical,
        })
    }

    /// SHA-256 of the canonical text without `out`, hex encoded. Where the
    /// files go does not change what they contain.
    pub fn hash(&self) -> String {
        let text: String = self
            .canonical
            .lines()
            .filter(|l| !l.starts_with("out = "))
            .map(|l| format!("{l}\n"))
            .collect();
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Hash of the keys that determine the decomposition alone.
    pub fn decomposition_hash(&self) -> String {
        let keep = ["d", "L", "N", "masses", "zero_mode", "window", "laplacian_sign"];
        let text: String = self
            .canonical
            .lines()
            .filter(|l| {
                let k = l.split(" = ").next().unwrap_or("");
                keep.contains(&k) || k.starts_with("window.")
            })
            .map(|l| format!("{l}\n"))
            .collect();
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
