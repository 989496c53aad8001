//! Bayesian phase-difference estimation with Gaussian beliefs.
//!
//! Each iteration picks `t = 1.8/σ²_prior` (rounded to a multiple of `Δt`),
//! evaluates the all-zero probability on an `m`-point grid around `μ_prior`,
//! fits a Gaussian peak to the (sampled) probabilities and multiplies the
//! prior by the fitted likelihood.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::statevector::{sample_probability, NoiseSpec, QpdeModel};

/// Posterior variance at which the loop stops.
pub const VARIANCE_TARGET: f64 = 0.005;
/// `t = TIME_FACTOR / σ²_prior`.
pub const TIME_FACTOR: f64 = 1.8;
/// Shift applied to `μ_init` when a run is retried.
pub const MU_RETRY_SHIFT: f64 = 0.01;

const FIT_MAX_ITER: usize = 200;
const AMPLITUDE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GaussianBelief {
    pub mu: f64,
    pub var: f64,
}

impl GaussianBelief {
    pub fn new(mu: f64, var: f64) -> Result<Self> {
        if !mu.is_finite() || !(var > 0.0) || !var.is_finite() {
            return Err(Error::InvalidArgument(alloc::format!("belief ({}, {})", mu, var)));
        }
        Ok(Self { mu, var })
    }

    pub fn sigma(&self) -> f64 {
        libm::sqrt(self.var)
    }
}

/// Product of two Gaussians.
pub fn bayes_update(prior: GaussianBelief, lh: GaussianBelief) -> Result<GaussianBelief> {
    let s = prior.var + lh.var;
    GaussianBelief::new(
        (prior.var * lh.mu + lh.var * prior.mu) / s,
        prior.var * lh.var / s,
    )
}

/// Half-width of the ε grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GridWidth {
    /// `σ²_prior`.
    #[default]
    Variance,
    /// `σ_prior`.
    Sigma,
}

/// `m` equally spaced points on `[μ − w, μ + w]`.
pub fn epsilon_grid(prior: GaussianBelief, m: usize, width: GridWidth) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(Error::InvalidArgument(alloc::format!("grid of {} points", m)));
    }
    let w = match width {
        GridWidth::Variance => prior.var,
        GridWidth::Sigma => prior.sigma(),
    };
    let (lo, hi) = (prior.mu - w, prior.mu + w);
    Ok((0..m)
        .map(|k| {
            if k == m - 1 {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (m - 1) as f64
            }
        })
        .collect())
}

/// `1.8/σ²` rounded to the nearest positive multiple of `dt`.
pub fn choose_time(prior: GaussianBelief, dt: f64) -> Result<f64> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(alloc::format!("time step {}", dt)));
    }
    Ok(choose_steps(prior, dt) as f64 * dt)
}

fn choose_steps(prior: GaussianBelief, dt: f64) -> usize {
    let raw = TIME_FACTOR / prior.var / dt;
    (libm::round(raw + 1e-9) as usize).max(1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub mu: f64,
    pub var: f64,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, thiserror::Error)]
#[serde(rename_all = "snake_case")]
pub enum FitFailure {
    #[error("fewer than four points")]
    TooFewPoints,
    #[error("probabilities are flat")]
    Flat,
    #[error("no start converged")]
    Diverged,
    #[error("fitted variance is not positive")]
    NonPositiveVariance,
    #[error("fitted amplitude is below the noise floor")]
    BelowFloor,
}

/// Least-squares fit of `baseline + A·exp(−(ε−μ)²/(2σ²))`.
///
/// `baseline` is the known depolarizing floor; the amplitude absorbs the
/// `(1 − p)` factor, so the fitted peak is unchanged by noise. Levenberg-Marquardt
/// is started from `init`, from the grid maximum with `init.var`, and from the
/// grid maximum with the moment-matched variance; the lowest residual wins.
pub fn gaussian_fit(points: &[(f64, f64)], init: GaussianBelief, baseline: f64) -> core::result::Result<GaussianFit, FitFailure> {
    if points.len() < 4 {
        return Err(FitFailure::TooFewPoints);
    }
    let ys: Vec<f64> = points.iter().map(|p| p.1 - baseline).collect();
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let (ymin, ymax) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    if !(ymax > ymin) || !(ymax > AMPLITUDE_FLOOR) {
        return Err(FitFailure::Flat);
    }
    let (xlo, xhi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let span = (xhi - xlo).max(f64::MIN_POSITIVE);
    let imax = argmax(&ys);
    let wsum: f64 = ys.iter().map(|y| y.max(0.0)).sum();
    let mean: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y.max(0.0)).sum::<f64>() / wsum;
    let moment = xs.iter().zip(&ys).map(|(x, y)| (x - mean) * (x - mean) * y.max(0.0)).sum::<f64>() / wsum;
    let moment = if moment > 0.0 { moment } else { init.var };
    let starts = [
        (init.mu, init.var),
        (xs[imax], init.var),
        (xs[imax], moment),
    ];
    let mut best: Option<GaussianFit> = None;
    let mut failure = FitFailure::Diverged;
    for (mu0, var0) in starts {
        match levenberg_marquardt(&xs, &ys, [ymax, mu0, libm::log(var0)], span) {
            Some(f) => {
                if !(f.var > 0.0) || !f.var.is_finite() {
                    failure = FitFailure::NonPositiveVariance;
                } else if !(f.amplitude > AMPLITUDE_FLOOR) {
                    failure = FitFailure::BelowFloor;
                } else if f.mu < xlo - span || f.mu > xhi + span {
                    failure = FitFailure::Diverged;
                } else if best.is_none_or(|b| f.residual < b.residual) {
                    best = Some(f);
                }
            }
            None => {}
        }
    }
    best.ok_or(failure)
}

fn argmax(v: &[f64]) -> usize {
    let mut k = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[k] {
            k = i;
        }
    }
    k
}

fn residuals(xs: &[f64], ys: &[f64], p: [f64; 3]) -> (f64, Vec<[f64; 4]>) {
    let var = libm::exp(p[2]);
    let mut sse = 0.0;
    let rows = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let d = x - p[1];
            let g = libm::exp(-d * d / (2.0 * var));
            let r = p[0] * g - y;
            sse += r * r;
            [r, g, p[0] * g * d / var, p[0] * g * d * d / (2.0 * var)]
        })
        .collect();
    (sse, rows)
}

/// Parameters `(A, μ, ln σ²)`; damping is scaled by the diagonal of `JᵀJ`.
fn levenberg_marquardt(xs: &[f64], ys: &[f64], mut p: [f64; 3], span: f64) -> Option<GaussianFit> {
    let (mut sse, mut rows) = residuals(xs, ys, p);
    let mut lambda = 1e-3;
    for _ in 0..FIT_MAX_ITER {
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for row in &rows {
            let j = Vector3::new(row[1], row[2], row[3]);
            jtj += j * j.transpose();
            jtr += j * row[0];
        }
        let mut improved = false;
        let mut small = false;
        while lambda < 1e16 {
            let mut a = jtj;
            for k in 0..3 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2]];
            if !trial.iter().all(|v| v.is_finite()) {
                lambda *= 10.0;
                continue;
            }
            let (s, r) = residuals(xs, ys, trial);
            small = (step[0] / p[0]).abs() < 1e-12 && (step[1] / span).abs() < 1e-12 && step[2].abs() < 1e-12;
            if s <= sse {
                p = trial;
                sse = s;
                rows = r;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 2.0;
        }
        if !improved || small || sse == 0.0 {
            break;
        }
    }
    let f = GaussianFit {
        amplitude: p[0],
        mu: p[1],
        var: libm::exp(p[2]),
        residual: sse,
    };
    (f.mu.is_finite() && f.amplitude.is_finite() && sse.is_finite()).then_some(f)
}

/// Source of ideal all-zero probabilities `p₀(ε, t)`.
pub trait LikelihoodModel {
    /// Qubits including the ancilla.
    fn n_qubits(&self) -> usize;
    fn dt(&self) -> f64;
    fn ideal_probability(&mut self, epsilon: f64, t: f64) -> Result<f64>;
}

impl LikelihoodModel for QpdeModel {
    fn n_qubits(&self) -> usize {
        QpdeModel::n_qubits(self)
    }

    fn dt(&self) -> f64 {
        QpdeModel::dt(self)
    }

    fn ideal_probability(&mut self, epsilon: f64, t: f64) -> Result<f64> {
        Ok(self.probability(epsilon, t, NoiseSpec::noiseless())?.ideal)
    }
}

/// Exact two-branch likelihood `½(1 + cos((Δ − ε)t))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CosineModel {
    pub difference: f64,
    pub n_qubits: usize,
    pub dt: f64,
}

impl LikelihoodModel for CosineModel {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn ideal_probability(&mut self, epsilon: f64, t: f64) -> Result<f64> {
        Ok(0.5 * (1.0 + libm::cos((self.difference - epsilon) * t)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EstimatorConfig {
    pub mu_init: f64,
    pub var_init: f64,
    pub m: usize,
    /// Shots per grid point; `None` uses the exact probabilities.
    pub shots: Option<u64>,
    pub p_dep: f64,
    pub max_iter: usize,
    pub max_restarts: usize,
    pub var_target: f64,
    pub grid_width: GridWidth,
    pub master_seed: u64,
    /// Repeat a failed run once from `μ_init + 0.01`.
    pub retry_shifted: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            mu_init: 0.0,
            var_init: 4.0,
            m: 21,
            shots: Some(10_000),
            p_dep: 0.0,
            max_iter: 15,
            max_restarts: 3,
            var_target: VARIANCE_TARGET,
            grid_width: GridWidth::Variance,
            master_seed: 0,
            retry_shifted: true,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        GaussianBelief::new(self.mu_init, self.var_init)?;
        NoiseSpec::new(self.p_dep)?;
        if self.m < 4 {
            return Err(Error::InvalidArgument(alloc::format!("m = {} (need at least 4)", self.m)));
        }
        if self.shots == Some(0) {
            return Err(Error::InvalidArgument("shots must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        if !(self.var_target > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!("variance target {}", self.var_target)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FitOutcome {
    Ok(GaussianFit),
    Failed { reason: FitFailure },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub t: f64,
    pub steps: usize,
    pub prior: GaussianBelief,
    pub epsilon_grid: Vec<f64>,
    pub ideal: Vec<f64>,
    pub noisy: Vec<f64>,
    pub sampled: Vec<f64>,
    pub fit: FitOutcome,
    /// `None` when the fit failed and the prior was re-centred.
    pub posterior: Option<GaussianBelief>,
    /// Grid half-width times `t` stays below π.
    pub aliasing_ok: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxIterations,
    FitFailed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimationTrace {
    pub config: EstimatorConfig,
    /// `μ_init` actually used (shifted on a retry).
    pub mu_init_used: f64,
    pub restarts: usize,
    pub iterations: Vec<IterationRecord>,
    pub estimate: GaussianBelief,
    pub termination: Termination,
}

impl EstimationTrace {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

/// Algorithm loop; repeats once from `μ_init + 0.01` if the first attempt ends in a fit failure.
pub fn run_estimation<M: LikelihoodModel>(model: &mut M, cfg: &EstimatorConfig) -> Result<EstimationTrace> {
    cfg.validate()?;
    let first = run_once(model, cfg, cfg.mu_init)?;
    if first.termination == Termination::FitFailed && cfg.retry_shifted {
        return run_once(model, cfg, cfg.mu_init + MU_RETRY_SHIFT);
    }
    Ok(first)
}

fn run_once<M: LikelihoodModel>(model: &mut M, cfg: &EstimatorConfig, mu_init: f64) -> Result<EstimationTrace> {
    let noise = NoiseSpec::new(cfg.p_dep)?;
    let n = model.n_qubits();
    let floor = noise.floor(n);
    let dt = model.dt();
    let mut prior = GaussianBelief::new(mu_init, cfg.var_init)?;
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut restarts = 0;
    let mut successes = 0;
    let mut termination = Termination::MaxIterations;
    while successes < cfg.max_iter {
        let steps = choose_steps(prior, dt);
        let t = steps as f64 * dt;
        let grid = epsilon_grid(prior, cfg.m, cfg.grid_width)?;
        let mut ideal = Vec::with_capacity(cfg.m);
        let mut noisy = Vec::with_capacity(cfg.m);
        let mut sampled = Vec::with_capacity(cfg.m);
        for (k, &eps) in grid.iter().enumerate() {
            let p0 = model.ideal_probability(eps, t)?.clamp(0.0, 1.0);
            let p = noise.apply(p0, n);
            ideal.push(p0);
            noisy.push(p);
            sampled.push(match cfg.shots {
                Some(shots) => sample_probability(p, shots, derive_seed(cfg.master_seed, &[records.len() as u64, k as u64]))?,
                None => p,
            });
        }
        let points: Vec<(f64, f64)> = grid.iter().copied().zip(sampled.iter().copied()).collect();
        let half = (grid[cfg.m - 1] - grid[0]) / 2.0;
        let mut record = IterationRecord {
            iteration: records.len(),
            t,
            steps,
            prior,
            aliasing_ok: half * t < core::f64::consts::PI,
            fit: FitOutcome::Failed {
                reason: FitFailure::Diverged,
            },
            posterior: None,
            epsilon_grid: grid,
            ideal,
            noisy,
            sampled,
        };
        match gaussian_fit(&points, prior, floor) {
            Ok(fit) => {
                let post = bayes_update(prior, GaussianBelief::new(fit.mu, fit.var)?)?;
                record.fit = FitOutcome::Ok(fit);
                record.posterior = Some(post);
                records.push(record);
                prior = post;
                successes += 1;
                if post.var <= cfg.var_target {
                    termination = Termination::Converged;
                    break;
                }
            }
            Err(reason) => {
                let peak = record.epsilon_grid[argmax(&record.sampled)];
                record.fit = FitOutcome::Failed { reason };
                records.push(record);
                if restarts >= cfg.max_restarts {
                    termination = Termination::FitFailed;
                    break;
                }
                restarts += 1;
                prior = GaussianBelief::new(peak, prior.var)?;
            }
        }
    }
    Ok(EstimationTrace {
        config: *cfg,
        mu_init_used: mu_init,
        restarts,
        iterations: records,
        estimate: prior,
        termination,
    })
}

/// Gap estimation: the peak sits at `E_excited − E_ground`.
pub fn run_qpde<M: LikelihoodModel>(model: &mut M, cfg: &EstimatorConfig) -> Result<EstimationTrace> {
    run_estimation(model, cfg)
}

/// Energy estimate of an FCI-mode run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FciEstimate {
    pub trace: EstimationTrace,
    /// `E_reference − μ`.
    pub energy: f64,
    pub sigma: f64,
}

/// Ground-energy estimation against a reference branch of known energy
/// (the vacuum); the peak sits at `E_reference − E_ground`.
pub fn run_fci<M: LikelihoodModel>(model: &mut M, cfg: &EstimatorConfig, reference_energy: f64) -> Result<FciEstimate> {
    let trace = run_estimation(model, cfg)?;
    Ok(FciEstimate {
        energy: reference_energy - trace.estimate.mu,
        sigma: trace.estimate.sigma(),
        trace,
    })
}

/// Short description used in reports.
pub fn describe(trace: &EstimationTrace) -> String {
    alloc::format!(
        "{:?} after {} iterations: {} ± {}",
        trace.termination,
        trace.iterations.len(),
        trace.estimate.mu,
        trace.estimate.sigma()
    )
}
