//! One PASS/FAIL line per acceptance criterion, run concurrently.

use std::path::Path;
use std::time::{Duration, Instant};

use qpde::config::EstimationMode;
use qpde::pipeline::{read_estimate_summary, read_metrics, read_prepare_summary, run_all, Layout};
use qpde::RunConfig;
use qpde_core::brickwall::{init_circuit, two_qubit_gate_count};
use qpde_core::compress::{compress, concatenation_errors, delta_from_trace, CompressionTarget, SweepConfig};
use qpde_core::dmrg::{dmrg_excited, dmrg_ground, DmrgSchedule};
use qpde_core::estimator::{run_estimation, EstimatorConfig, FitOutcome};
use qpde_core::fermion::{exchange_matrix, hubbard_1d};
use qpde_core::linalg::expm_i_hermitian;
use qpde_core::mpo::{hamiltonian_to_mpo, mpo_from_dense, mpo_to_dense, trotter_product, trotterized_reference, TrotterOrder};
use qpde_core::mps::MatrixProductState;
use qpde_core::ordering::{ga_reorder, GaConfig};
use qpde_core::pauli::QubitHamiltonian;
use qpde_core::rng::{derive_seed, Rng};
use qpde_core::spectrum::{eigenpairs, spectral_gap};
use qpde_core::statevector::{Evolution, NoiseSpec, QpdeModel, Statevector};
use qpde_core::{DenseTensor, C64};

const DT: f64 = 0.1;
const E_GROUND: f64 = -20.911;
const GAP: f64 = 0.254;

struct Outcome {
    id: usize,
    pass: bool,
    detail: String,
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    x >= lo && x <= hi
}

fn timed(limit: Duration, start: Instant) -> (bool, String) {
    let e = start.elapsed();
    (e < limit, format!("{:.1}s of {}s", e.as_secs_f64(), limit.as_secs()))
}

fn verdict(id: usize, checks: &[(bool, String)]) -> Outcome {
    Outcome {
        id,
        pass: checks.iter().all(|c| c.0),
        detail: checks
            .iter()
            .map(|(ok, s)| format!("{}{}", if *ok { "" } else { "[x] " }, s))
            .collect::<Vec<_>>()
            .join("; "),
    }
}

fn hubbard8() -> QubitHamiltonian {
    hubbard_1d(4, 1.0, 10.0).simplify()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let h = hubbard8();
    let (g, gap) = spectral_gap(&h, 1e-8).unwrap();
    let hm = hamiltonian_to_mpo(&h).unwrap();
    let sched = DmrgSchedule::hubbard();
    let dg = dmrg_ground(&hm, &sched, 1).unwrap();
    let de = dmrg_excited(&hm, &[dg.state.clone()], &sched, 2).unwrap();
    let dgap = de.energy - dg.energy;
    verdict(
        1,
        &[
            ((g - E_GROUND).abs() <= 1e-3, format!("exact E0 {:.5}", g)),
            ((gap - GAP).abs() <= 2e-3, format!("exact gap {:.5}", gap)),
            ((dg.energy - E_GROUND).abs() <= 1e-3, format!("DMRG E0 {:.5}", dg.energy)),
            ((dgap - GAP).abs() <= 2e-3, format!("DMRG gap {:.5}", dgap)),
            timed(Duration::from_secs(60), start),
        ],
    )
}

/// Criteria 2, 3, 4 and the monotonicity part of 10 share the default gap pipeline.
fn gap_pipeline(dir: &Path) -> Vec<Outcome> {
    let start = Instant::now();
    let cfg = RunConfig {
        output_dir: dir.to_path_buf(),
        ..RunConfig::default()
    };
    run_all(&cfg).unwrap();
    let layout = Layout::new(dir);
    let m = read_metrics(&layout).unwrap();
    let est5 = read_estimate_summary(&layout).unwrap();
    let elapsed5 = start.elapsed();
    let start10 = Instant::now();
    let mut cfg10 = cfg.clone();
    cfg10.compression.d_evol = 10;
    run_all(&cfg10).unwrap();
    let est10 = read_estimate_summary(&layout).unwrap();
    let elapsed10 = start10.elapsed();

    let c2 = verdict(
        2,
        &[
            (
                within(m.delta_trotter_first, 2.2e-2 * 0.95, 2.2e-2 * 1.05),
                format!("first-order {:.4e}", m.delta_trotter_first),
            ),
            (
                within(m.delta_trotter_second, 1.6e-3 * 0.95, 1.6e-3 * 1.05),
                format!("second-order {:.4e}", m.delta_trotter_second),
            ),
            (
                within(m.delta_evol, 1e-3, 1e-2) && m.evol.sweeps == 1000,
                format!("compressed d_evol=5 {:.4e} after {} sweeps", m.delta_evol, m.evol.sweeps),
            ),
            (elapsed5 < Duration::from_secs(1800), format!("{:.1}s of 1800s", elapsed5.as_secs_f64())),
        ],
    );
    let c3 = verdict(
        3,
        &[
            (m.f_prep >= 0.985, format!("f(U_prep) {:.5} at d_prep={}", m.f_prep, m.d_prep)),
            (elapsed5 < Duration::from_secs(1200), format!("{:.1}s of 1200s", elapsed5.as_secs_f64())),
        ],
    );
    let c4 = verdict(
        4,
        &[
            (within(est5.mu, 0.204, 0.244), format!("d_evol=5 mu {:.5}", est5.mu)),
            (est5.sigma <= 0.01, format!("sigma {:.5} (bound 0.01)", est5.sigma)),
            ((est10.mu - 0.254).abs() <= 0.020, format!("d_evol=10 mu {:.5}", est10.mu)),
            (
                elapsed5.max(elapsed10) < Duration::from_secs(3600),
                format!("{:.1}s and {:.1}s of 3600s", elapsed5.as_secs_f64(), elapsed10.as_secs_f64()),
            ),
        ],
    );
    let monotone = verdict(
        10,
        &[(
            m.evol.violations == 0 && m.prep.violations == 0,
            format!(
                "monotonicity: {} violations in {} evol updates, {} in {} prep updates",
                m.evol.violations, m.evol.gate_updates, m.prep.violations, m.prep.gate_updates
            ),
        )],
    );
    vec![c2, c3, c4, monotone]
}

fn criterion_5(dir: &Path) -> Outcome {
    let start = Instant::now();
    let mut cfg = RunConfig {
        output_dir: dir.to_path_buf(),
        ..RunConfig::default()
    };
    cfg.estimation.mode = EstimationMode::Fci;
    run_all(&cfg).unwrap();
    let layout = Layout::new(dir);
    let est = read_estimate_summary(&layout).unwrap();
    let prep = read_prepare_summary(&layout).unwrap();
    let e = est.energy.unwrap();
    verdict(
        5,
        &[
            (within(e, -20.91, -20.82), format!("energy {:.5} (mu_init {:.4})", e, prep.suggested_mu_init)),
            (est.sigma <= 0.01, format!("sigma {:.5} (bound 0.01)", est.sigma)),
            timed(Duration::from_secs(3600), start),
        ],
    )
}

/// Exact two-branch model of the 8-qubit Hubbard gap with a dense step operator.
fn exact_gap_model() -> QpdeModel {
    let h = hubbard8();
    let pairs = eigenpairs(&h).unwrap();
    let g = &pairs[0];
    let e = pairs.iter().find(|p| p.0 > g.0 + 1e-8).unwrap();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps: Vec<C64> = g.1.iter().map(|z| z * s).collect();
    amps.extend(e.1.iter().map(|z| z * s));
    let phi = Statevector::from_amplitudes(amps).unwrap();
    let u = expm_i_hermitian(&h.to_dense().unwrap(), -DT).unwrap();
    QpdeModel::new(phi, Evolution::Dense(u), DT).unwrap()
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut runs = Vec::new();
    let mut floor_err: f64 = 0.0;
    for p in [0.0, 0.3, 0.9] {
        let mut model = exact_gap_model();
        let cfg = EstimatorConfig {
            shots: None,
            p_dep: p,
            ..EstimatorConfig::default()
        };
        let tr = run_estimation(&mut model, &cfg).unwrap();
        let n = model.n_qubits();
        let floor = p / 2f64.powi(n as i32);
        for r in &tr.iterations {
            for (ideal, noisy) in r.ideal.iter().zip(&r.noisy) {
                floor_err = floor_err.max((noisy - (1.0 - p) * ideal - floor).abs());
            }
        }
        floor_err = floor_err.max((NoiseSpec::new(p).unwrap().floor(n) - floor).abs());
        let mus: Vec<f64> = tr
            .iterations
            .iter()
            .map(|r| match &r.fit {
                FitOutcome::Ok(f) => f.mu,
                FitOutcome::Failed { .. } => f64::NAN,
            })
            .collect();
        runs.push(mus);
    }
    let same_len = runs.iter().all(|r| r.len() == runs[0].len());
    let mut worst: f64 = 0.0;
    for r in &runs[1..] {
        for (a, b) in runs[0].iter().zip(r) {
            worst = worst.max((a - b).abs());
        }
    }
    verdict(
        6,
        &[
            (
                same_len && worst <= 1e-6,
                format!("max fitted-mu spread {:.2e} over {} iterations", worst, runs[0].len()),
            ),
            (floor_err <= 1e-12, format!("floor error {:.2e}", floor_err)),
            timed(Duration::from_secs(300), start),
        ],
    )
}

fn frobenius(a: &DenseTensor, b: &DenseTensor) -> f64 {
    a.sub(b).unwrap().norm()
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut checks = Vec::new();
    for n_s in [2usize, 3] {
        let h = hubbard_1d(n_s, 1.0, 10.0).simplify();
        let n = h.n_qubits;
        let v = expm_i_hermitian(&h.to_dense().unwrap(), -DT).unwrap();
        let trotter1 = mpo_to_dense(&trotter_product(&h, DT, 1, TrotterOrder::First, 1e-12).unwrap()).unwrap();
        let u_ref = trotterized_reference(&h, DT, 100, 1e-12).unwrap();
        let c0 = init_circuit(n, 5, 0.01, 3).unwrap();
        let compressed = compress(&c0, &CompressionTarget::operator(&u_ref), &SweepConfig::new(300))
            .unwrap()
            .circuit
            .to_dense()
            .unwrap();
        for (name, u) in [("trotter-1", trotter1), ("compressed", compressed)] {
            let one = frobenius(&v, &u);
            let (mut vk, mut uk) = (v.clone(), u.clone());
            let mut holds = true;
            let mut tightest: f64 = 0.0;
            let lib = concatenation_errors(&v, &u, 10).unwrap();
            for k in 1..=10usize {
                if k > 1 {
                    vk = vk.matmul(&v).unwrap();
                    uk = uk.matmul(&u).unwrap();
                }
                let lhs = frobenius(&vk, &uk);
                let rhs = k as f64 * one;
                holds &= lhs <= rhs * (1.0 + 1e-10) + 1e-13;
                holds &= (lib[k - 1].0 - lhs).abs() <= 1e-10 && (lib[k - 1].1 - rhs).abs() <= 1e-10;
                if k > 1 {
                    tightest = tightest.max(lhs / rhs);
                }
            }
            checks.push((holds, format!("{}q {} max ratio {:.3} for k>1", n, name, tightest)));
        }
    }
    checks.push(timed(Duration::from_secs(300), start));
    verdict(7, &checks)
}

fn heap_permutations(k: usize, p: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
    if k <= 1 {
        visit(p);
        return;
    }
    for i in 0..k - 1 {
        heap_permutations(k - 1, p, visit);
        if k % 2 == 0 {
            p.swap(i, k - 1);
        } else {
            p.swap(0, k - 1);
        }
    }
    heap_permutations(k - 1, p, visit);
}

/// `Σ_{i<j} 2 K_ij (pos_i − pos_j)²` with `perm[k]` the orbital at site `k`.
fn brute_cost(k: &[f64], perm: &[usize]) -> f64 {
    let n = perm.len();
    let mut pos = vec![0usize; n];
    for (site, &orb) in perm.iter().enumerate() {
        pos[orb] = site;
    }
    let mut c = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d = pos[i] as f64 - pos[j] as f64;
            c += 2.0 * k[i * n + j] * d * d;
        }
    }
    c
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::new(8);
    let (mut hits, mut never_worse) = (0, true);
    let instances = 20;
    for inst in 0..instances {
        let n = 4 + inst % 5;
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = rng.uniform().powi(2);
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        let mut best = f64::INFINITY;
        let mut p: Vec<usize> = (0..n).collect();
        heap_permutations(n, &mut p, &mut |perm| best = best.min(brute_cost(&k, perm)));
        let identity: Vec<usize> = (0..n).collect();
        let ga = ga_reorder(&k, n, &GaConfig::default(), derive_seed(8, &[inst as u64])).unwrap();
        let cost = brute_cost(&k, &ga.best.perm);
        never_worse &= cost <= brute_cost(&k, &identity) + 1e-12;
        if (cost - best).abs() <= 1e-9 * best.max(1.0) {
            hits += 1;
        }
    }
    verdict(
        8,
        &[
            (hits * 100 >= 95 * instances, format!("optimum in {}/{} instances", hits, instances)),
            (never_worse, "never above identity cost".to_string()),
            timed(Duration::from_secs(600), start),
        ],
    )
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let h = hubbard_1d(10, 1.0, 10.0).simplify();
    let u_ref = trotterized_reference(&h, DT, 100, 1e-12).unwrap();
    let c0 = init_circuit(20, 5, 0.01, derive_seed(0, &[1])).unwrap();
    let r = compress(&c0, &CompressionTarget::operator(&u_ref), &SweepConfig::new(5000)).unwrap();
    let d = delta_from_trace(r.final_objective(), 20);
    let mut checks = vec![
        (within(d, 3e-3, 9e-3), format!("20-qubit delta {:.4e} after {} sweeps", d, r.stats.sweeps)),
        timed(Duration::from_secs(4 * 3600), start),
    ];
    match std::env::var_os("QPDE_HEXATRIENE_FCIDUMP") {
        Some(path) => checks.extend(hexatriene(Path::new(&path))),
        None => checks.push((true, "hexatriene FCIDUMP not supplied".to_string())),
    }
    verdict(9, &checks)
}

/// Conditional part: ordering cost and exact gap of a supplied hexatriene active space.
fn hexatriene(path: &Path) -> Vec<(bool, String)> {
    let ints = qpde::fcidump::parse_fcidump(path).unwrap();
    let r = qpde::pipeline::reorder(path, &GaConfig::default(), 0).unwrap();
    let k = exchange_matrix(&ints);
    let identity: Vec<usize> = (0..ints.n_orb).collect();
    let before = brute_cost(&k, &identity);
    let h = qpde_core::fermion::integrals_to_qubit_hamiltonian(&ints, &r.permutation).unwrap().simplify();
    let n = h.n_qubits;
    let sector: Vec<f64> = eigenpairs(&h)
        .unwrap()
        .into_iter()
        .filter(|(_, v)| {
            let idx = v.iter().position(|z| z.norm() > 1e-6).unwrap_or(0);
            let occ = (0..n).filter(|&q| idx >> (n - 1 - q) & 1 == 1).count();
            let up = (0..n).step_by(2).filter(|&q| idx >> (n - 1 - q) & 1 == 1).count() as i64;
            occ == ints.n_elec && 2 * up - occ as i64 == ints.ms2
        })
        .map(|p| p.0)
        .collect();
    let gap = sector.iter().copied().find(|&e| e > sector[0] + 1e-8).unwrap_or(f64::NAN) - sector[0];
    vec![
        ((before - 0.0754).abs() <= 5e-4, format!("cost before {:.4}", before)),
        (r.cost_after <= 0.0160, format!("cost after {:.4}", r.cost_after)),
        ((gap - 0.125).abs() <= 1e-3, format!("exact gap {:.4}", gap)),
    ]
}

fn criterion_10_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::new(10);
    let mut worst_mps: f64 = 0.0;
    for n in 1..=12 {
        let v: Vec<C64> = (0..1usize << n).map(|_| rng.complex_normal()).collect();
        let back = MatrixProductState::from_dense(&v, 0.0).unwrap().to_dense().unwrap();
        let scale = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let err = v.iter().zip(&back).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt() / scale;
        worst_mps = worst_mps.max(err);
    }
    let mut worst_mpo: f64 = 0.0;
    for n in 1..=7 {
        let dim = 1usize << n;
        let data: Vec<C64> = (0..dim * dim).map(|_| rng.complex_normal()).collect();
        let u = DenseTensor::new(vec![dim, dim], data).unwrap();
        let back = mpo_to_dense(&mpo_from_dense(&u, 0.0).unwrap()).unwrap();
        worst_mpo = worst_mpo.max(frobenius(&u, &back) / u.norm());
    }
    let h12 = hubbard_1d(6, 1.0, 10.0).simplify();
    let mut x: Vec<C64> = (0..1usize << 12).map(|_| rng.complex_normal()).collect();
    let nx = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    x.iter_mut().for_each(|z| *z /= nx);
    let dense_h = mpo_to_dense(&hamiltonian_to_mpo(&h12).unwrap()).unwrap();
    let via_mpo = dense_h.matmul(&DenseTensor::new(vec![1 << 12, 1], x.clone()).unwrap()).unwrap();
    let via_paulis = h12.apply(&x);
    let worst_h = via_mpo
        .data()
        .iter()
        .zip(&via_paulis)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let count = two_qubit_gate_count(8, 6, 5, 2);
    verdict(
        10,
        &[
            (worst_mps <= 1e-10, format!("MPS 1..12 qubits {:.1e}", worst_mps)),
            (worst_mpo <= 1e-10, format!("MPO 1..7 qubits {:.1e}", worst_mpo)),
            (worst_h <= 1e-10, format!("12-qubit Hamiltonian MPO {:.1e}", worst_h)),
            (count == 270, format!("gate count {}", count)),
            timed(Duration::from_secs(600), start),
        ],
    )
}

#[test]
fn acceptance_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let gap_dir = dir.path().join("gap");
    let fci_dir = dir.path().join("fci");
    let mut outcomes: Vec<Outcome> = std::thread::scope(|s| {
        let jobs = vec![
            s.spawn(|| vec![criterion_1()]),
            s.spawn(|| gap_pipeline(&gap_dir)),
            s.spawn(|| vec![criterion_5(&fci_dir)]),
            s.spawn(|| vec![criterion_6()]),
            s.spawn(|| vec![criterion_7()]),
            s.spawn(|| vec![criterion_8()]),
            s.spawn(|| vec![criterion_9()]),
            s.spawn(|| vec![criterion_10_oracles()]),
        ];
        jobs.into_iter().flat_map(|j| j.join().unwrap()).collect()
    });
    outcomes.sort_by_key(|o| o.id);
    let mut merged: Vec<Outcome> = Vec::new();
    for o in outcomes {
        match merged.last_mut() {
            Some(last) if last.id == o.id => {
                last.pass &= o.pass;
                last.detail = format!("{}; {}", last.detail, o.detail);
            }
            _ => merged.push(o),
        }
    }
    for o in &merged {
        println!("criterion {:>2}: {}  {}", o.id, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed: Vec<usize> = merged.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    assert_eq!(merged.len(), 10);
    assert!(failed.is_empty(), "failed criteria: {:?}", failed);
}
