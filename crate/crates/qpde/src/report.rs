//! Plain-text summaries printed by the command line.

use std::fmt::Write as _;

use crate::config::EstimationMode;
use crate::pipeline::{CompressMetrics, PrepareSummary, ReorderReport, StageOutcome};

pub fn stage_line(o: &StageOutcome) -> String {
    let status = if o.cached { "unchanged" } else { "written" };
    format!("{}: {} (key {})", o.stage.name(), status, &o.key[..12])
}

pub fn prepare_report(s: &PrepareSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "qubits {}  terms {}", s.n_qubits, s.n_terms);
    let _ = writeln!(out, "ground energy {:.6}", s.ground_energy);
    let branch = match s.mode {
        EstimationMode::Gap => "excited",
        EstimationMode::Fci => "vacuum",
    };
    let _ = writeln!(out, "{} energy {:.6}  difference {:.6}", branch, s.branch_energy, s.difference);
    if let (Some(g), Some(gap)) = (s.exact_ground_energy, s.exact_gap) {
        let _ = writeln!(out, "exact ground energy {:.6}  exact gap {:.6}", g, gap);
    }
    if let Some(p) = s.prior_energy {
        let _ = writeln!(out, "bond-limited energy {:.6}  mu_init {:.6}", p, s.suggested_mu_init);
    }
    if let Some(o) = &s.ordering {
        let _ = writeln!(out, "ordering cost {:.6} -> {:.6}  {:?}", o.cost_before, o.cost_after, o.permutation);
    }
    for d in &s.diagnostics {
        let _ = writeln!(
            out,
            "{}: <N> {:.6}  var(N) {:.2e}  <Sz> {:.6}",
            d.state, d.n_mean, d.n_variance, d.sz_mean
        );
    }
    out
}

pub fn compress_report(m: &CompressMetrics) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "f(U_prep) {:.6} at depth {}", m.f_prep, m.d_prep);
    let _ = writeln!(out, "delta(U_evol) {:.4e} at depth {}", m.delta_evol, m.d_evol);
    let _ = writeln!(
        out,
        "delta Trotter first order {:.4e}  second order {:.4e}",
        m.delta_trotter_first, m.delta_trotter_second
    );
    let _ = writeln!(out, "two-qubit gates per one-step circuit {}", m.gate_count_one_step);
    for (name, s) in [("prep", &m.prep), ("evol", &m.evol)] {
        let _ = writeln!(
            out,
            "{}: {} sweeps, {} updates, {:.2} contractions/update, {} violations",
            name, s.sweeps, s.gate_updates, s.contractions_per_update, s.violations
        );
    }
    out
}

pub fn estimate_report(mode: EstimationMode, mu: f64, sigma: f64, energy: Option<f64>, iterations: usize, converged: bool) -> String {
    let state = if converged { "converged" } else { "not converged" };
    match (mode, energy) {
        (EstimationMode::Fci, Some(e)) => format!("energy {:.6} ± {:.6} ({} iterations, {})\n", e, sigma, iterations, state),
        _ => format!("gap {:.6} ± {:.6} ({} iterations, {})\n", mu, sigma, iterations, state),
    }
}

pub fn reorder_report(r: &ReorderReport) -> String {
    format!("cost {:.6} -> {:.6}\npermutation {:?}\n", r.cost_before, r.cost_after, r.permutation)
}
