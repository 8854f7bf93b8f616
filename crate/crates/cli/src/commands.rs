//! The `decompose`, `coeffs`, `flow`, `derive` and `export` subcommands.
//!
//! Outputs for mass index i go to `<out>/decomp/m<i>/`, `<out>/coeffs_m<i>.csv`
//! and `<out>/trajectory_m<i>.csv`.

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output::{fmt_f64, read_csv, write_csv, write_json, write_text, Table};
use rgpt_core::coeffs::{
    ab_offset, bound_profiles, check_assumptions, coalescence_scale, mass_scale, FlowCoefficients,
    RawMoments,
};
use rgpt_core::decomp::{build_decomposition, BuildOptions, DecompManifest, ScaleDecomposition};
use rgpt_core::flow::{iterate_flow, FlowOptions, FlowTables, Trajectory, TrajectoryRow};
use rgpt_core::lattice::{DumpMeta, Kernel, LaplacianSign};
use rgpt_core::window::{WindowProfile, WindowRegistry};
use rgpt_symbolic::flow_table::{compare, derive_flow_table, expected_flow_table};
use rgpt_symbolic::loc::{Convention, LocOptions, Phase};
use serde_json::{json, Value};
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

pub fn window(cfg: &RunConfig) -> Result<Box<dyn WindowProfile>> {
    Ok(WindowRegistry::builtin().create(&cfg.window_family, &cfg.window_params)?)
}

pub fn build_options(cfg: &RunConfig) -> BuildOptions {
    BuildOptions { zero_mode: cfg.zero_mode, sign: cfg.sign, memory_budget: cfg.memory_budget }
}

pub fn build(cfg: &RunConfig, m2: f64) -> Result<ScaleDecomposition> {
    Ok(build_decomposition(cfg.spec, m2, window(cfg)?.as_ref(), build_options(cfg))?)
}

fn decomp_dir(cfg: &RunConfig, i: usize) -> PathBuf {
    cfg.out.join("decomp").join(format!("m{i}"))
}

/// Write slice dumps, their metadata and a manifest for every mass.
pub fn decompose(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let hash = cfg.hash();
    let mut written = Vec::new();
    for (i, &m2) in cfg.masses.iter().enumerate() {
        let dec = build(cfg, m2)?;
        let dir = decomp_dir(cfg, i);
        fs::create_dir_all(&dir)?;
        let mut files = Vec::new();
        for j in 1..=cfg.spec.n {
            let name = format!("slice_{j}.rfk");
            let mut out = BufWriter::new(fs::File::create(dir.join(&name))?);
            dec.slice(j)?.write_dump(&mut out, m2)?;
            let meta = DumpMeta {
                d: cfg.spec.d,
                l: cfg.spec.l,
                n: cfg.spec.n,
                side: cfg.spec.side(),
                mass: m2,
                zero_mode: cfg.zero_mode,
                laplacian_sign: cfg.sign,
                label: if j == cfg.spec.n { format!("C_{j},{j}") } else { format!("C_{j}") },
            };
            write_json(&dir.join(format!("slice_{j}.json")), &hash, serde_json::to_value(meta)?)?;
            written.push(dir.join(&name));
            files.push(name);
        }
        let manifest = dec.manifest(&files);
        let path = dir.join("manifest.json");
        write_json(
            &path,
            &hash,
            json!({ "decomposition_hash": cfg.decomposition_hash(), "manifest": manifest }),
        )?;
        written.push(path);
    }
    Ok(written)
}

/// Read back a decomposition written by [`decompose`], if one exists for the
/// same decomposition-relevant settings.
pub fn load(cfg: &RunConfig, i: usize) -> Result<Option<ScaleDecomposition>> {
    let dir = decomp_dir(cfg, i);
    let path = dir.join("manifest.json");
    if !path.is_file() {
        return Ok(None);
    }
    let v: Value = serde_json::from_str(&fs::read_to_string(&path)?)?;
    if v["decomposition_hash"].as_str() != Some(cfg.decomposition_hash().as_str()) {
        log::info!("{} was written for different settings; rebuilding", path.display());
        return Ok(None);
    }
    let manifest: DecompManifest = serde_json::from_value(v["manifest"].clone())?;
    let mut kernels = Vec::new();
    for s in &manifest.scales {
        let mut r = BufReader::new(fs::File::open(dir.join(&s.file))?);
        let (k, _) = Kernel::read_dump(&mut r)?;
        kernels.push(k);
    }
    let remainder = kernels.pop().ok_or_else(|| CliError::MissingInput(path.display().to_string()))?;
    Ok(Some(ScaleDecomposition::from_slices(cfg.spec, manifest.mass, kernels, remainder, cfg.sign)?))
}

pub fn load_or_build(cfg: &RunConfig, i: usize) -> Result<ScaleDecomposition> {
    match load(cfg, i)? {
        Some(d) => Ok(d),
        None => build(cfg, cfg.masses[i]),
    }
}

pub const COEFF_COLUMNS: [&str; 25] = [
    "j", "beta", "theta", "etap", "xip", "pip", "sigma", "zeta", "omega", "eta", "xi", "pi", "w1",
    "w2", "w3", "wss", "w2ss", "w3ss", "wdw1", "wdwss", "gwss", "wbar1", "wbarss", "C00", "Cab",
];

/// Greek coefficient columns, the series exported for plotting.
pub const GREEK: [&str; 11] =
    ["beta", "theta", "etap", "xip", "pip", "sigma", "zeta", "omega", "eta", "xi", "pi"];

pub fn coeff_row(f: &FlowCoefficients, r: &RawMoments) -> Vec<String> {
    let vals = [
        f.beta, f.theta, f.etap, f.xip, f.pip, f.sigma, f.zeta, f.omega, f.eta, f.xi, f.pi, r.w1,
        r.w2, r.w3, r.wss, r.w2ss, r.w3ss, r.wdw1, r.wdwss, r.gwss, f.wbar1, f.wbarss, r.c00,
        r.cab,
    ];
    std::iter::once(f.j.to_string()).chain(vals.iter().map(|v| fmt_f64(*v))).collect()
}

/// Coefficient rows for j = 1..N−1 (j = 0 has w_0 = 0).
pub fn coeff_rows(t: &FlowTables) -> Vec<Vec<String>> {
    t.fc.iter().filter(|f| f.j >= 1).map(|f| coeff_row(f, &t.raw[f.j])).collect()
}

fn opt_scale(s: Option<i64>) -> Value {
    s.map_or(Value::String("inf".into()), |k| json!(k))
}

pub fn coeffs(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let hash = cfg.hash();
    let ab = ab_offset(cfg.spec.d, cfg.ab);
    let mut written = Vec::new();
    for (i, &m2) in cfg.masses.iter().enumerate() {
        let dec = load_or_build(cfg, i)?;
        let t = FlowTables::build(&dec, &ab)?;
        let path = cfg.out.join(format!("coeffs_m{i}.csv"));
        write_csv(&path, &hash, &COEFF_COLUMNS, &coeff_rows(&t))?;
        written.push(path);
        let fc: Vec<FlowCoefficients> = t.fc.iter().filter(|f| f.j >= 1).copied().collect();
        let report = check_assumptions(&fc, cfg.omega, 0.0);
        let path = cfg.out.join(format!("coeffs_m{i}.json"));
        write_json(
            &path,
            &hash,
            json!({
                "mass": m2,
                "laplacian_sign": cfg.sign.name(),
                "j_m": opt_scale(mass_scale(m2, cfg.spec.l)),
                "j_omega": opt_scale(report.j_omega),
                "a2": report.a2,
                "bound_profiles": bound_profiles(&fc, &t.raw, cfg.spec.l),
            }),
        )?;
        written.push(path);
    }
    Ok(written)
}

pub fn trajectory_rows(t: &Trajectory) -> Vec<Vec<String>> {
    t.rows
        .iter()
        .map(|r: &TrajectoryRow| {
            std::iter::once(r.j.to_string()).chain(r.values().iter().map(|v| fmt_f64(*v))).collect()
        })
        .collect()
}

pub fn run_flow(cfg: &RunConfig, dec: &ScaleDecomposition) -> Result<Trajectory> {
    let t = FlowTables::build(dec, &ab_offset(cfg.spec.d, cfg.ab))?;
    let j_ab = coalescence_scale(cfg.spec.l, cfg.ab as f64);
    let opts = FlowOptions { divergence: cfg.divergence };
    Ok(iterate_flow(&cfg.v0, &t, cfg.j_start..cfg.j_end, j_ab, opts)?)
}

pub fn flow(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let hash = cfg.hash();
    let mut written = Vec::new();
    for (i, &m2) in cfg.masses.iter().enumerate() {
        let dec = load_or_build(cfg, i)?;
        let traj = run_flow(cfg, &dec)?;
        let path = cfg.out.join(format!("trajectory_m{i}.csv"));
        write_csv(&path, &hash, &TrajectoryRow::COLUMNS, &trajectory_rows(&traj))?;
        written.push(path);
        let path = cfg.out.join(format!("flow_m{i}.json"));
        write_json(
            &path,
            &hash,
            json!({ "mass": m2, "diverged": false, "summary": traj.summary }),
        )?;
        written.push(path);
    }
    Ok(written)
}

pub fn convention(sign: LaplacianSign) -> Convention {
    match sign {
        LaplacianSign::MomentIdentity => Convention::MomentIdentity,
        LaplacianSign::Literal => Convention::Literal,
    }
}

fn phase_name(p: Phase) -> &'static str {
    match p {
        Phase::BelowJab => "below_jab",
        Phase::AtOrAboveJab => "at_or_above_jab",
    }
}

/// Derive the table in both phases, with the comparison to the closed form.
pub fn derive(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let hash = cfg.hash();
    let mut text = format!("# laplacian_sign = {}\n", cfg.sign.name());
    let mut sections = serde_json::Map::new();
    for phase in [Phase::BelowJab, Phase::AtOrAboveJab] {
        let opts = LocOptions { convention: convention(cfg.sign), phase };
        let table = derive_flow_table(opts)?;
        let cmp = compare(&table, &expected_flow_table(phase));
        text.push_str(&format!("\n[{}]\n{table}\ncomparison with the closed form:\n{cmp}", phase_name(phase)));
        sections.insert(
            phase_name(phase).into(),
            json!({ "table": table.to_json(), "comparison": cmp.to_json(), "all_match": cmp.all_match() }),
        );
    }
    let txt = cfg.out.join("flow_table.txt");
    write_text(&txt, &hash, &text)?;
    let js = cfg.out.join("flow_table.json");
    write_json(&js, &hash, json!({ "laplacian_sign": cfg.sign.name(), "phases": sections }))?;
    Ok(vec![txt, js])
}

/// Which artifact a CSV is.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArtifactKind {
    Coefficients,
    Trajectory,
}

pub const TRAJECTORY_SERIES: [&str; 6] =
    ["g", "nu", "gbar", "residual_g", "residual_z", "residual_mu"];

pub fn detect_kind(t: &Table) -> Result<ArtifactKind> {
    if t.column("residual_g").is_some() {
        Ok(ArtifactKind::Trajectory)
    } else if t.column("beta").is_some() {
        Ok(ArtifactKind::Coefficients)
    } else {
        Err(CliError::Config(format!("unrecognised columns {:?}", t.header)))
    }
}

/// Long-format (series, j, value) rows, grouped by series in column order.
pub fn long_format(t: &Table, kind: ArtifactKind) -> Result<Vec<Vec<String>>> {
    let series: &[&str] = match kind {
        ArtifactKind::Coefficients => &GREEK,
        ArtifactKind::Trajectory => &TRAJECTORY_SERIES,
    };
    let jcol = t.column("j").ok_or_else(|| CliError::Config("no `j` column".into()))?;
    let mut out = Vec::new();
    for s in series {
        let c = t.column(s).ok_or_else(|| CliError::Config(format!("no `{s}` column")))?;
        for r in &t.rows {
            out.push(vec![s.to_string(), r[jcol].clone(), r[c].clone()]);
        }
    }
    Ok(out)
}

pub fn export_plotdata(input: &Path, output: &Path) -> Result<ArtifactKind> {
    let t = read_csv(input)?;
    let kind = detect_kind(&t)?;
    let rows = long_format(&t, kind)?;
    let hash = t.hash.clone().unwrap_or_default();
    write_csv(output, &hash, &["series", "j", "value"], &rows)?;
    Ok(kind)
}
