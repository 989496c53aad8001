use qpde_core::ordering::{ga_reorder, ordering_cost, GaConfig};
use qpde_core::rng::Rng;

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    heap(n, &mut p, &mut out);
    out
}

fn heap(k: usize, p: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(p.clone());
        return;
    }
    for i in 0..k - 1 {
        heap(k - 1, p, out);
        if k % 2 == 0 {
            p.swap(i, k - 1);
        } else {
            p.swap(0, k - 1);
        }
    }
    heap(k - 1, p, out);
}

fn random_exchange(n: usize, rng: &mut Rng) -> Vec<f64> {
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in i + 1..n {
            let v = rng.uniform() * rng.uniform();
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

#[test]
fn ga_matches_exhaustive_search() {
    let mut rng = Rng::new(2024);
    let mut hits = 0;
    let instances = 20;
    for inst in 0..instances {
        let n = 5 + inst % 4;
        let k = random_exchange(n, &mut rng);
        let brute = permutations(n)
            .iter()
            .map(|p| ordering_cost(&k, p).unwrap())
            .fold(f64::INFINITY, f64::min);
        let ga = ga_reorder(&k, n, &GaConfig::default(), 100 + inst as u64).unwrap();
        assert!(ga.best.cost <= ga.initial_cost + 1e-12);
        assert!(ga.history.windows(2).all(|w| w[1] <= w[0]));
        if (ga.best.cost - brute).abs() <= 1e-9 * brute.max(1.0) {
            hits += 1;
        } else {
            eprintln!("instance {} n={} ga={} brute={}", inst, n, ga.best.cost, brute);
        }
    }
    assert!(hits * 100 >= 95 * instances, "{} of {}", hits, instances);
}

#[test]
fn cost_is_reversal_invariant() {
    let mut rng = Rng::new(3);
    let k = random_exchange(7, &mut rng);
    for p in permutations(7).iter().step_by(97) {
        let r: Vec<usize> = p.iter().rev().copied().collect();
        let a = ordering_cost(&k, p).unwrap();
        let b = ordering_cost(&k, &r).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn ga_is_deterministic() {
    let mut rng = Rng::new(4);
    let k = random_exchange(6, &mut rng);
    let a = ga_reorder(&k, 6, &GaConfig::default(), 9).unwrap();
    let b = ga_reorder(&k, 6, &GaConfig::default(), 9).unwrap();
    assert_eq!(a, b);
}
