//! Numeric comparison of a symbolic flow table with `flow::phi_pt`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rgpt_core::coeffs::{greek_coefficients, RawMoments};
use rgpt_core::flow::{phi_pt, CouplingVector};
use rgpt_symbolic::flow_table::{all_symbols, FlowTable, COUPLINGS};
use rgpt_symbolic::loc::Phase;
use rgpt_symbolic::Result;
use serde::Serialize;
use std::collections::HashMap;

/// One random binding of every table symbol.
#[derive(Clone, Debug)]
pub struct Binding {
    pub env: HashMap<String, f64>,
    pub v: CouplingVector,
    pub raw: RawMoments,
    pub next: RawMoments,
    pub phase: Phase,
    pub j_ab: usize,
}

fn moments(env: &HashMap<String, f64>, j: usize, suffix: &str) -> RawMoments {
    let m = |n: &str| env[&format!("{n}{suffix}")];
    RawMoments {
        j,
        w1: m("w1"),
        w2: m("w2"),
        w3: m("w3"),
        wss: m("wss"),
        w2ss: m("w2ss"),
        w3ss: m("w3ss"),
        wdw1: m("wdw1"),
        wdwss: m("wdwss"),
        gwss: m("gwss"),
        c00: 0.0,
        cab: 0.0,
    }
}

/// Draw every symbol uniformly from [−bound, bound]. `phase` selects j_ab
/// relative to the scale j = 3.
pub fn random_binding(rng: &mut impl Rng, bound: f64, phase: Phase) -> Binding {
    let env: HashMap<String, f64> =
        all_symbols().into_iter().map(|s| (s, rng.gen_range(-bound..=bound))).collect();
    let j = 3;
    let mut raw = moments(&env, j, "");
    raw.c00 = env["C00"];
    raw.cab = env["w_ab+"] - env["w_ab"];
    let next = moments(&env, j + 1, "+");
    let v = CouplingVector {
        g: env["g"],
        nu: env["nu"],
        y: env["y"],
        z: env["z"],
        lam_a: env["lam_a"],
        lam_b: env["lam_b"],
        q_a: env["q_a"],
        q_b: env["q_b"],
    };
    let j_ab = match phase {
        Phase::BelowJab => j + 2,
        Phase::AtOrAboveJab => j + 1,
    };
    Binding { env, v, raw, next, phase, j_ab }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CrossReport {
    pub bindings: usize,
    /// Per coupling, the largest |table − phi_pt| over all bindings.
    pub max_dev: Vec<(String, f64)>,
}

impl CrossReport {
    pub fn max(&self) -> f64 {
        self.max_dev.iter().map(|(_, d)| *d).fold(0.0, f64::max)
    }
}

/// Evaluate `table(phase)` and `phi_pt` on `count` bindings, alternating the
/// two phases.
pub fn cross_check(
    table: impl Fn(Phase) -> FlowTable,
    count: usize,
    bound: f64,
    seed: u64,
) -> Result<CrossReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tables = [table(Phase::BelowJab), table(Phase::AtOrAboveJab)];
    let mut max_dev: Vec<(String, f64)> = COUPLINGS.iter().map(|c| (c.to_string(), 0.0)).collect();
    for i in 0..count {
        let phase = if i % 2 == 0 { Phase::BelowJab } else { Phase::AtOrAboveJab };
        let b = random_binding(&mut rng, bound, phase);
        let t = &tables[i % 2];
        let sym = t.evaluate(&b.env)?;
        let fc = greek_coefficients(&b.raw, &b.next);
        let num = phi_pt(&b.v, &fc, &b.raw, &b.next, b.j_ab);
        for ((name, val), (_, n)) in sym.iter().zip(num.fields()) {
            let slot = max_dev.iter_mut().find(|(c, _)| c == name).expect("known coupling");
            slot.1 = slot.1.max((val - n).abs());
        }
    }
    Ok(CrossReport { bindings: count, max_dev })
}
