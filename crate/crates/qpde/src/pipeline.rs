//! The prepare → compress → estimate pipeline and orbital reordering.
//!
//! Each stage writes into its own directory under `output_dir` together with a
//! `manifest.json` that records a SHA-256 key of every input the stage reads
//! and the SHA-256 of every file it wrote. A stage whose key and files are
//! unchanged is skipped.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qpde_core::brickwall::{init_circuit, two_qubit_gate_count};
use qpde_core::compress::{compress, delta_from_trace, mpo_delta, CompressionStats, CompressionTarget, SweepConfig};
use qpde_core::dmrg::{dmrg_excited, dmrg_ground, expectation, DmrgSchedule};
use qpde_core::estimator::{run_fci, run_qpde, EstimationTrace, FitOutcome};
use qpde_core::fermion::{exchange_matrix, hubbard_1d, integrals_to_qubit_hamiltonian, validate_permutation};
use qpde_core::mpo::{hamiltonian_to_mpo, trotter_product, trotterized_reference, TrotterOrder};
use qpde_core::mps::{build_superposition, MatrixProductState};
use qpde_core::ordering::{ga_reorder, ordering_cost};
use qpde_core::pauli::{PauliTerm, QubitHamiltonian};
use qpde_core::rng::derive_seed;
use qpde_core::statevector::QpdeModel;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{EstimationMode, ModelConfig, OrderingChoice, RunConfig};
use crate::container::{read_circuit, read_mpo, read_mps, sha256_hex, write_circuit, write_mpo, write_mps};
use crate::error::{QpdeError, Result};
use crate::fcidump::parse_fcidump;

/// Largest system solved exactly alongside DMRG in the prepare diagnostics.
pub const EXACT_CHECK_QUBITS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Prepare,
    Compress,
    Estimate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Prepare => "prepare",
            Stage::Compress => "compress",
            Stage::Estimate => "estimate",
        }
    }
}

/// Paths of every artifact below an output directory.
#[derive(Clone, Debug)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn dir(&self, stage: Stage) -> PathBuf {
        self.root.join(stage.name())
    }

    pub fn manifest(&self, stage: Stage) -> PathBuf {
        self.dir(stage).join("manifest.json")
    }

    pub fn hamiltonian(&self) -> PathBuf {
        self.dir(Stage::Prepare).join("hamiltonian.json")
    }

    pub fn ground(&self) -> PathBuf {
        self.dir(Stage::Prepare).join("ground.mps")
    }

    pub fn excited(&self) -> PathBuf {
        self.dir(Stage::Prepare).join("excited.mps")
    }

    pub fn superposition(&self) -> PathBuf {
        self.dir(Stage::Prepare).join("superposition.mps")
    }

    pub fn u_ref(&self) -> PathBuf {
        self.dir(Stage::Prepare).join("u_ref.mpo")
    }

    pub fn prepare_summary(&self) -> PathBuf {
        self.dir(Stage::Prepare).join("summary.json")
    }

    pub fn prep_circuit(&self) -> PathBuf {
        self.dir(Stage::Compress).join("prep.circuit")
    }

    pub fn evol_circuit(&self) -> PathBuf {
        self.dir(Stage::Compress).join("evol.circuit")
    }

    pub fn metrics(&self) -> PathBuf {
        self.dir(Stage::Compress).join("metrics.json")
    }

    pub fn convergence(&self) -> PathBuf {
        self.dir(Stage::Compress).join("convergence.csv")
    }

    pub fn trace(&self) -> PathBuf {
        self.dir(Stage::Estimate).join("trace.json")
    }

    pub fn probabilities(&self) -> PathBuf {
        self.dir(Stage::Estimate).join("probabilities.csv")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub key: String,
    /// File name → SHA-256 of its contents.
    pub files: BTreeMap<String, String>,
}

/// Result of running one stage.
#[derive(Clone, Debug, PartialEq)]
pub struct StageOutcome {
    pub stage: Stage,
    pub key: String,
    pub cached: bool,
    pub files: BTreeMap<String, String>,
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| QpdeError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| QpdeError::io(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| QpdeError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(QpdeError::MissingArtifact(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| QpdeError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| QpdeError::Container {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn key_of(value: &serde_json::Value) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(value)?))
}

/// The manifest of `stage` when it is intact, i.e. every listed file still has its recorded hash.
pub fn intact_manifest(layout: &Layout, stage: Stage) -> Result<Option<Manifest>> {
    let path = layout.manifest(stage);
    if !path.exists() {
        return Ok(None);
    }
    let m: Manifest = read_json(&path)?;
    for (name, hash) in &m.files {
        let p = layout.dir(stage).join(name);
        if !p.exists() || hash_file(&p)? != *hash {
            return Ok(None);
        }
    }
    Ok(Some(m))
}

fn cached(layout: &Layout, stage: Stage, key: &str) -> Result<Option<StageOutcome>> {
    Ok(intact_manifest(layout, stage)?.filter(|m| m.key == key).map(|m| StageOutcome {
        stage,
        key: m.key,
        cached: true,
        files: m.files,
    }))
}

fn finish(layout: &Layout, stage: Stage, key: String, written: &[PathBuf]) -> Result<StageOutcome> {
    let mut files = BTreeMap::new();
    for p in written {
        files.insert(file_name(p), hash_file(p)?);
    }
    let m = Manifest {
        stage: stage.name().to_string(),
        key: key.clone(),
        files: files.clone(),
    };
    write_json(&layout.manifest(stage), &m)?;
    Ok(StageOutcome {
        stage,
        key,
        cached: false,
        files,
    })
}

/// Key of the upstream stage, which must be intact and built from the same configuration.
fn upstream_key(layout: &Layout, stage: Stage, expected: &str) -> Result<String> {
    match intact_manifest(layout, stage)? {
        Some(m) if m.key == expected => Ok(m.key),
        _ => Err(QpdeError::MissingArtifact(layout.manifest(stage))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub label: String,
    pub coefficient: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianFile {
    pub n_qubits: usize,
    pub n_terms: usize,
    /// Coefficient of the identity string.
    pub constant: f64,
    pub terms: Vec<TermRecord>,
}

impl HamiltonianFile {
    pub fn from_hamiltonian(h: &QubitHamiltonian) -> Self {
        let h = h.simplify();
        Self {
            n_qubits: h.n_qubits,
            n_terms: h.terms.len(),
            constant: h.constant(),
            terms: h
                .terms
                .iter()
                .map(|t| TermRecord {
                    label: t.label(),
                    coefficient: t.coefficient,
                })
                .collect(),
        }
    }

    pub fn to_hamiltonian(&self) -> Result<QubitHamiltonian> {
        let terms = self
            .terms
            .iter()
            .map(|t| PauliTerm::from_label(t.coefficient, &t.label))
            .collect::<qpde_core::Result<Vec<_>>>()?;
        Ok(QubitHamiltonian::from_terms(self.n_qubits, terms)?)
    }
}

/// Particle-number and spin moments of a prepared state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorDiagnostic {
    pub state: String,
    pub energy: f64,
    pub n_mean: f64,
    pub n_variance: f64,
    pub sz_mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingSummary {
    pub permutation: Vec<usize>,
    pub cost_before: f64,
    pub cost_after: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrepareSummary {
    pub mode: EstimationMode,
    pub n_qubits: usize,
    pub n_terms: usize,
    pub ground_energy: f64,
    /// Energy of the second branch: the excited state, or the vacuum in FCI mode.
    pub branch_energy: f64,
    /// `branch_energy − ground_energy`, where the likelihood peaks.
    pub difference: f64,
    /// Bond-limited DMRG energy used to seed the FCI prior.
    pub prior_energy: Option<f64>,
    pub suggested_mu_init: f64,
    pub exact_ground_energy: Option<f64>,
    pub exact_gap: Option<f64>,
    pub ordering: Option<OrderingSummary>,
    pub diagnostics: Vec<SectorDiagnostic>,
    pub dmrg_sweep_energies: Vec<Vec<f64>>,
    pub u_ref_bond_dims: Vec<usize>,
}

fn number_operators(n: usize) -> Result<(QubitHamiltonian, QubitHamiltonian, QubitHamiltonian)> {
    let label = |zs: &[usize]| -> String { (0..n).map(|k| if zs.contains(&k) { 'Z' } else { 'I' }).collect() };
    let a = n as f64 / 2.0;
    let mut num = vec![PauliTerm::from_label(a, &label(&[]))?];
    let mut sq = vec![PauliTerm::from_label(a * a + n as f64 / 4.0, &label(&[]))?];
    let mut sz = Vec::new();
    for k in 0..n {
        num.push(PauliTerm::from_label(-0.5, &label(&[k]))?);
        sq.push(PauliTerm::from_label(-a, &label(&[k]))?);
        let s = if k % 2 == 0 { 1.0 } else { -1.0 };
        sz.push(PauliTerm::from_label(-0.25 * s, &label(&[k]))?);
        for j in 0..k {
            sq.push(PauliTerm::from_label(0.5, &label(&[j, k]))?);
        }
    }
    if n % 2 == 1 {
        sz.push(PauliTerm::from_label(0.25, &label(&[]))?);
    }
    Ok((
        QubitHamiltonian::from_terms(n, num)?.simplify(),
        QubitHamiltonian::from_terms(n, sq)?.simplify(),
        QubitHamiltonian::from_terms(n, sz)?.simplify(),
    ))
}

fn diagnose(name: &str, psi: &MatrixProductState, h: &qpde_core::mpo::MatrixProductOperator, n: usize) -> Result<SectorDiagnostic> {
    let (num, sq, sz) = number_operators(n)?;
    let e = |op: &QubitHamiltonian| -> Result<f64> { Ok(expectation(psi, &hamiltonian_to_mpo(op)?)?.re) };
    let n_mean = e(&num)?;
    Ok(SectorDiagnostic {
        state: name.to_string(),
        energy: expectation(psi, h)?.re,
        n_mean,
        n_variance: (e(&sq)? - n_mean * n_mean).max(0.0),
        sz_mean: e(&sz)?,
    })
}

/// Qubit Hamiltonian of the configured model and the orbital ordering used.
pub fn build_hamiltonian(cfg: &RunConfig) -> Result<(QubitHamiltonian, Option<OrderingSummary>)> {
    match &cfg.model {
        ModelConfig::Hubbard { n_s, t, u } => Ok((hubbard_1d(*n_s, *t, *u).simplify(), None)),
        ModelConfig::Fcidump {
            path,
            ordering,
            permutation,
        } => {
            let ints = parse_fcidump(path)?;
            let n = ints.n_orb;
            let k = exchange_matrix(&ints);
            let identity: Vec<usize> = (0..n).collect();
            let perm = match ordering {
                OrderingChoice::None => identity.clone(),
                OrderingChoice::Ga => {
                    if n < 2 {
                        identity.clone()
                    } else {
                        ga_reorder(&k, n, &cfg.ga_config(), cfg.ga.seed)?.best.perm
                    }
                }
                OrderingChoice::Explicit => {
                    let p = permutation.clone().unwrap_or_default();
                    validate_permutation(&p, n).map_err(|e| QpdeError::Config(format!("model.permutation: {}", e)))?;
                    p
                }
            };
            let summary = OrderingSummary {
                cost_before: ordering_cost(&k, &identity)?,
                cost_after: ordering_cost(&k, &perm)?,
                permutation: perm.clone(),
            };
            Ok((integrals_to_qubit_hamiltonian(&ints, &perm)?.simplify(), Some(summary)))
        }
    }
}

fn prepare_key(cfg: &RunConfig) -> Result<String> {
    let fcidump_hash = match &cfg.model {
        ModelConfig::Fcidump { path, .. } => {
            if !path.exists() {
                return Err(QpdeError::Parse {
                    path: path.display().to_string(),
                    line: 0,
                    message: "file not found".into(),
                });
            }
            Some(hash_file(path)?)
        }
        ModelConfig::Hubbard { .. } => None,
    };
    key_of(&json!({
        "stage": "prepare",
        "version": env!("CARGO_PKG_VERSION"),
        "model": cfg.model,
        "fcidump_sha256": fcidump_hash,
        "ga": cfg.ga,
        "dmrg": cfg.dmrg,
        "mode": cfg.estimation.mode,
        "dt": cfg.estimation.dt,
        "reference_slices": cfg.compression.reference_slices,
        "cutoff": cfg.compression.cutoff,
    }))
}

/// Hamiltonian, DMRG states, superposition MPS and `U_ref`.
pub fn prepare(cfg: &RunConfig) -> Result<StageOutcome> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.output_dir);
    let key = prepare_key(cfg)?;
    if let Some(hit) = cached(&layout, Stage::Prepare, &key)? {
        return Ok(hit);
    }
    let (h, ordering) = build_hamiltonian(cfg)?;
    let n = h.n_qubits;
    if n < 2 {
        return Err(QpdeError::Config("model: at least two qubits are required".into()));
    }
    let hmpo = hamiltonian_to_mpo(&h)?;
    let sched = cfg.dmrg_schedule();
    let seed = cfg.dmrg.seed;
    let ground = dmrg_ground(&hmpo, &sched, derive_seed(seed, &[0]))?;
    let mut sweeps = vec![ground.sweep_energies.clone()];
    let (branch, prior_energy) = match cfg.estimation.mode {
        EstimationMode::Gap => {
            let ex = dmrg_excited(&hmpo, &[ground.state.clone()], &sched, derive_seed(seed, &[1]))?;
            sweeps.push(ex.sweep_energies.clone());
            (ex.state, None)
        }
        EstimationMode::Fci => {
            let cheap = DmrgSchedule::uniform(cfg.dmrg.fci_prior_sweeps, cfg.dmrg.fci_prior_bond, sched.svd_cutoff);
            let prior = dmrg_ground(&hmpo, &cheap, derive_seed(seed, &[2]))?;
            (MatrixProductState::product_state(&vec![0u8; n]), Some(prior.energy))
        }
    };
    let branch_energy = expectation(&branch, &hmpo)?.re;
    let sup = build_superposition(&ground.state, &branch)?;
    let u_ref = trotterized_reference(&h, cfg.estimation.dt, cfg.compression.reference_slices, cfg.compression.cutoff)?;
    let (exact_ground_energy, exact_gap) = if n <= EXACT_CHECK_QUBITS {
        let (g, gap) = qpde_core::spectrum::spectral_gap(&h, 1e-8)?;
        (Some(g), Some(gap))
    } else {
        (None, None)
    };
    let diagnostics = vec![
        diagnose("ground", &ground.state, &hmpo, n)?,
        diagnose(
            match cfg.estimation.mode {
                EstimationMode::Gap => "excited",
                EstimationMode::Fci => "vacuum",
            },
            &branch,
            &hmpo,
            n,
        )?,
    ];
    let suggested_mu_init = match (cfg.estimation.mode, prior_energy) {
        (EstimationMode::Fci, Some(p)) => branch_energy - p,
        _ => 0.0,
    };
    let summary = PrepareSummary {
        mode: cfg.estimation.mode,
        n_qubits: n,
        n_terms: h.terms.len(),
        ground_energy: ground.energy,
        branch_energy,
        difference: branch_energy - ground.energy,
        prior_energy,
        suggested_mu_init,
        exact_ground_energy,
        exact_gap,
        ordering,
        diagnostics,
        dmrg_sweep_energies: sweeps,
        u_ref_bond_dims: u_ref.bond_dims(),
    };
    let meta = |e: f64| BTreeMap::from([("energy".to_string(), json!(e))]);
    write_json(&layout.hamiltonian(), &HamiltonianFile::from_hamiltonian(&h))?;
    write_mps(&layout.ground(), &ground.state, meta(ground.energy))?;
    write_mps(&layout.excited(), &branch, meta(branch_energy))?;
    write_mps(&layout.superposition(), &sup, BTreeMap::new())?;
    write_mpo(
        &layout.u_ref(),
        &u_ref,
        BTreeMap::from([
            ("dt".to_string(), json!(cfg.estimation.dt)),
            ("slices".to_string(), json!(cfg.compression.reference_slices)),
        ]),
    )?;
    write_json(&layout.prepare_summary(), &summary)?;
    finish(
        &layout,
        Stage::Prepare,
        key,
        &[
            layout.hamiltonian(),
            layout.ground(),
            layout.excited(),
            layout.superposition(),
            layout.u_ref(),
            layout.prepare_summary(),
        ],
    )
}

pub fn read_prepare_summary(layout: &Layout) -> Result<PrepareSummary> {
    read_json(&layout.prepare_summary())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub sweeps: usize,
    pub gate_updates: u64,
    pub contractions: u64,
    pub contractions_per_update: f64,
    pub flops: u64,
    pub violations: u64,
    pub worst_decrease: f64,
    pub worst_cache_drift: f64,
    pub initial_objective: f64,
    pub final_objective: f64,
}

impl UpdateStats {
    fn new(s: &CompressionStats, initial: f64, last: f64) -> Self {
        Self {
            sweeps: s.sweeps,
            gate_updates: s.gate_updates,
            contractions: s.contractions,
            contractions_per_update: s.contractions_per_update(),
            flops: s.flops,
            violations: s.violations,
            worst_decrease: s.worst_decrease,
            worst_cache_drift: s.worst_cache_drift,
            initial_objective: initial,
            final_objective: last,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressMetrics {
    pub n_qubits: usize,
    pub d_prep: usize,
    pub d_evol: usize,
    /// `f = Re <MPS|U_prep|0…0>`.
    pub f_prep: f64,
    pub delta_evol: f64,
    pub delta_trotter_first: f64,
    pub delta_trotter_second: f64,
    /// Whether `δ_second ≤ δ_evol ≤ δ_first`.
    pub between_trotter_orders: bool,
    /// Two-qubit gates of the estimation circuit with one evolution step.
    pub gate_count_one_step: usize,
    pub prep: UpdateStats,
    pub evol: UpdateStats,
}

fn compress_key(cfg: &RunConfig, prepare: &str) -> Result<String> {
    key_of(&json!({
        "stage": "compress",
        "prepare": prepare,
        "compression": cfg.compression,
    }))
}

/// Compresses `U_prep` and `U_evol` and reports `f`, `δ` and the Trotter baselines.
pub fn compress_stage(cfg: &RunConfig) -> Result<StageOutcome> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.output_dir);
    let pkey = upstream_key(&layout, Stage::Prepare, &prepare_key(cfg)?)?;
    let key = compress_key(cfg, &pkey)?;
    if let Some(hit) = cached(&layout, Stage::Compress, &key)? {
        return Ok(hit);
    }
    let c = &cfg.compression;
    let h: HamiltonianFile = read_json(&layout.hamiltonian())?;
    let h = h.to_hamiltonian()?;
    let sup = read_mps(&layout.superposition())?;
    let u_ref = read_mpo(&layout.u_ref())?;
    let n = u_ref.n_sites();
    let prep0 = init_circuit(n + 1, c.d_prep, c.init_scale, derive_seed(c.seed, &[0]))?;
    let evol0 = init_circuit(n, c.d_evol, c.init_scale, derive_seed(c.seed, &[1]))?;
    let prep = compress(&prep0, &CompressionTarget::state(&sup), &SweepConfig::new(c.sweeps_prep))?;
    let evol = compress(&evol0, &CompressionTarget::operator(&u_ref), &SweepConfig::new(c.sweeps_evol))?;
    let t1 = trotter_product(&h, cfg.estimation.dt, 1, TrotterOrder::First, c.cutoff)?;
    let t2 = trotter_product(&h, cfg.estimation.dt, 1, TrotterOrder::Second, c.cutoff)?;
    let delta_evol = delta_from_trace(evol.final_objective(), n);
    let delta_trotter_first = mpo_delta(&u_ref, &t1)?;
    let delta_trotter_second = mpo_delta(&u_ref, &t2)?;
    let metrics = CompressMetrics {
        n_qubits: n,
        d_prep: c.d_prep,
        d_evol: c.d_evol,
        f_prep: prep.final_objective(),
        delta_evol,
        delta_trotter_first,
        delta_trotter_second,
        between_trotter_orders: delta_trotter_second <= delta_evol && delta_evol <= delta_trotter_first,
        gate_count_one_step: two_qubit_gate_count(n, c.d_prep, c.d_evol, 1),
        prep: UpdateStats::new(&prep.stats, prep.initial_objective, prep.final_objective()),
        evol: UpdateStats::new(&evol.stats, evol.initial_objective, evol.final_objective()),
    };
    let meta = |k: &str, v: f64| BTreeMap::from([(k.to_string(), json!(v))]);
    write_circuit(&layout.prep_circuit(), &prep.circuit, meta("f", metrics.f_prep))?;
    write_circuit(&layout.evol_circuit(), &evol.circuit, meta("delta", delta_evol))?;
    write_json(&layout.metrics(), &metrics)?;
    let mut w = csv::Writer::from_path(layout.convergence()).map_err(|e| QpdeError::Serialize(e.to_string()))?;
    w.write_record(["sweep", "f_prep", "delta_evol"]).map_err(|e| QpdeError::Serialize(e.to_string()))?;
    for s in 0..prep.history.len().max(evol.history.len()) {
        let f = prep.history.get(s).map(|v| v.to_string()).unwrap_or_default();
        let d = evol.history.get(s).map(|&v| delta_from_trace(v, n).to_string()).unwrap_or_default();
        w.write_record([(s + 1).to_string(), f, d]).map_err(|e| QpdeError::Serialize(e.to_string()))?;
    }
    w.flush().map_err(|e| QpdeError::io(layout.convergence(), e))?;
    drop(w);
    finish(
        &layout,
        Stage::Compress,
        key,
        &[layout.prep_circuit(), layout.evol_circuit(), layout.metrics(), layout.convergence()],
    )
}

pub fn read_metrics(layout: &Layout) -> Result<CompressMetrics> {
    read_json(&layout.metrics())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateFile {
    pub mode: EstimationMode,
    pub mu_init: f64,
    /// Energy of the vacuum branch in FCI mode.
    pub reference_energy: Option<f64>,
    /// `reference_energy − μ` in FCI mode.
    pub energy: Option<f64>,
    pub mu: f64,
    pub sigma: f64,
    pub converged: bool,
    /// Two-qubit gates of the circuit run at each iteration.
    pub gate_counts: Vec<usize>,
    pub trace: EstimationTrace,
}

/// Headline numbers of `trace.json`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct EstimateSummary {
    pub mode: EstimationMode,
    pub mu_init: f64,
    pub energy: Option<f64>,
    pub mu: f64,
    pub sigma: f64,
    pub converged: bool,
    pub gate_counts: Vec<usize>,
}

pub fn read_estimate_summary(layout: &Layout) -> Result<EstimateSummary> {
    read_json(&layout.trace())
}

/// One CSV row per iteration and grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityRow {
    pub iteration: usize,
    pub t: f64,
    pub steps: usize,
    pub epsilon: f64,
    pub ideal: f64,
    pub noisy: f64,
    pub sampled: f64,
    /// `sampled` divided by the largest sampled value of the iteration.
    pub sampled_normalized: f64,
    pub noisy_normalized: f64,
    pub fit_mu: Option<f64>,
    pub fit_var: Option<f64>,
}

pub fn probability_rows(trace: &EstimationTrace) -> Vec<ProbabilityRow> {
    let mut rows = Vec::new();
    for rec in &trace.iterations {
        let max_s = rec.sampled.iter().copied().fold(0.0, f64::max);
        let max_n = rec.noisy.iter().copied().fold(0.0, f64::max);
        let norm = |v: f64, m: f64| if m > 0.0 { v / m } else { 0.0 };
        let (fit_mu, fit_var) = match &rec.fit {
            FitOutcome::Ok(f) => (Some(f.mu), Some(f.var)),
            _ => (None, None),
        };
        for k in 0..rec.epsilon_grid.len() {
            rows.push(ProbabilityRow {
                iteration: rec.iteration,
                t: rec.t,
                steps: rec.steps,
                epsilon: rec.epsilon_grid[k],
                ideal: rec.ideal[k],
                noisy: rec.noisy[k],
                sampled: rec.sampled[k],
                sampled_normalized: norm(rec.sampled[k], max_s),
                noisy_normalized: norm(rec.noisy[k], max_n),
                fit_mu,
                fit_var,
            });
        }
    }
    rows
}

fn estimate_key(cfg: &RunConfig, compress: &str) -> Result<String> {
    key_of(&json!({
        "stage": "estimate",
        "compress": compress,
        "estimation": cfg.estimation,
    }))
}

/// Runs the Bayesian loop on the compressed circuits.
pub fn estimate_stage(cfg: &RunConfig) -> Result<StageOutcome> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.output_dir);
    let pkey = upstream_key(&layout, Stage::Prepare, &prepare_key(cfg)?)?;
    let ckey = upstream_key(&layout, Stage::Compress, &compress_key(cfg, &pkey)?)?;
    let key = estimate_key(cfg, &ckey)?;
    if let Some(hit) = cached(&layout, Stage::Estimate, &key)? {
        return Ok(hit);
    }
    let summary = read_prepare_summary(&layout)?;
    let prep = read_circuit(&layout.prep_circuit())?;
    let evol = read_circuit(&layout.evol_circuit())?;
    let mut model = QpdeModel::from_circuits(&prep, &evol, cfg.estimation.dt)?;
    let mu_init = cfg.estimation.mu_init.unwrap_or(summary.suggested_mu_init);
    let est = cfg.estimator_config(mu_init);
    est.validate()?;
    let (trace, reference_energy, energy) = match cfg.estimation.mode {
        EstimationMode::Gap => (run_qpde(&mut model, &est)?, None, None),
        EstimationMode::Fci => {
            let r = run_fci(&mut model, &est, summary.branch_energy)?;
            (r.trace, Some(summary.branch_energy), Some(r.energy))
        }
    };
    let n = evol.n_qubits();
    let file = EstimateFile {
        mode: cfg.estimation.mode,
        mu_init,
        reference_energy,
        energy,
        mu: trace.estimate.mu,
        sigma: trace.estimate.sigma(),
        converged: trace.converged(),
        gate_counts: trace
            .iterations
            .iter()
            .map(|r| two_qubit_gate_count(n, prep.depth(), evol.depth(), r.steps))
            .collect(),
        trace,
    };
    write_json(&layout.trace(), &file)?;
    let mut w = csv::Writer::from_path(layout.probabilities()).map_err(|e| QpdeError::Serialize(e.to_string()))?;
    for row in probability_rows(&file.trace) {
        w.serialize(row).map_err(|e| QpdeError::Serialize(e.to_string()))?;
    }
    w.flush().map_err(|e| QpdeError::io(layout.probabilities(), e))?;
    drop(w);
    finish(&layout, Stage::Estimate, key, &[layout.trace(), layout.probabilities()])
}

/// All three stages in order.
pub fn run_all(cfg: &RunConfig) -> Result<Vec<StageOutcome>> {
    Ok(vec![prepare(cfg)?, compress_stage(cfg)?, estimate_stage(cfg)?])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReorderReport {
    pub source: String,
    pub n_orb: usize,
    pub permutation: Vec<usize>,
    pub cost_before: f64,
    pub cost_after: f64,
    pub history: Vec<f64>,
}

/// GA orbital ordering of an FCIDUMP file.
pub fn reorder(path: &Path, ga: &qpde_core::ordering::GaConfig, seed: u64) -> Result<ReorderReport> {
    let ints = parse_fcidump(path)?;
    let n = ints.n_orb;
    let k = exchange_matrix(&ints);
    let identity: Vec<usize> = (0..n).collect();
    let before = ordering_cost(&k, &identity)?;
    let (perm, after, history) = if n < 2 {
        (identity, before, Vec::new())
    } else {
        let r = ga_reorder(&k, n, ga, seed)?;
        (r.best.perm, r.best.cost, r.history)
    };
    Ok(ReorderReport {
        source: path.display().to_string(),
        n_orb: n,
        permutation: perm,
        cost_before: before,
        cost_after: after,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_operators_on_basis_states() {
        let (num, sq, sz) = number_operators(4).unwrap();
        let psi = MatrixProductState::product_state(&[1, 0, 1, 1]);
        let e = |op: &QubitHamiltonian| expectation(&psi, &hamiltonian_to_mpo(op).unwrap()).unwrap().re;
        assert!((e(&num) - 3.0).abs() < 1e-12);
        assert!((e(&sq) - 9.0).abs() < 1e-12);
        assert!((e(&sz) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn hamiltonian_file_roundtrip() {
        let h = hubbard_1d(3, 1.0, 4.0).simplify();
        let f = HamiltonianFile::from_hamiltonian(&h);
        let text = serde_json::to_string(&f).unwrap();
        let back: HamiltonianFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_hamiltonian().unwrap(), h);
    }
}
