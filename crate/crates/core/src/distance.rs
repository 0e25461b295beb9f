//! Distance estimation from MPC delay differences.
//!
//! Each delay difference `delta = tau_b - tau_a` of an error-free MPC is bounded
//! by `|c (delta - eps)| <= d`. With directions uniform on the sphere the
//! differences are uniform on that interval, which makes the distance the
//! half-width of a uniform distribution.

use crate::error::{Error, Result};
use crate::geometry::C_M_PER_NS;
use crate::observation::Observation;
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::special::ln_box_probability;

/// Lower bound of the numeric distance search, avoiding the `d^-K` singularity.
pub const MIN_DISTANCE_M: f64 = 1e-6;
/// Largest per-observer MPC count for permutation enumeration.
pub const MAX_PERMUTATION_K: usize = 8;

const HARD_TOL: f64 = 1e-12;
const MAX_RESTARTS: usize = 6;
const NOASSOC_STARTS: usize = 5;

/// Delay differences of one observer.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeltaGroup {
    pub deltas_ns: Vec<f64>,
    /// Standard deviation of each delay difference; zero entries are exact.
    pub sigmas_ns: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeltaObservation {
    pub groups: Vec<DeltaGroup>,
    /// Inter-node clock offset when the nodes are synchronized.
    pub known_eps_ns: Option<f64>,
    /// One clock offset per observer instead of a common one.
    pub per_observer_offsets: bool,
}

impl DeltaObservation {
    /// Error-free delay differences grouped by observer.
    pub fn new(groups: Vec<Vec<f64>>) -> Self {
        Self {
            groups: groups
                .into_iter()
                .map(|deltas_ns| DeltaGroup {
                    deltas_ns,
                    sigmas_ns: None,
                })
                .collect(),
            known_eps_ns: None,
            per_observer_offsets: false,
        }
    }

    pub fn with_sigmas(mut self, sigmas: Vec<Vec<f64>>) -> Self {
        for (g, s) in self.groups.iter_mut().zip(sigmas) {
            g.sigmas_ns = Some(s);
        }
        self
    }

    pub fn with_known_eps(mut self, eps_ns: f64) -> Self {
        self.known_eps_ns = Some(eps_ns);
        self
    }

    pub fn with_per_observer_offsets(mut self) -> Self {
        self.per_observer_offsets = true;
        self
    }

    /// Delay differences of associated MPC pairs; sigmas combine both sides.
    pub fn from_observation(obs: &Observation) -> Result<Self> {
        obs.require_paired()?;
        let any_sigma = obs
            .observers
            .iter()
            .flat_map(|s| s.a.iter().chain(&s.b))
            .any(|m| m.sigma_ns.is_some());
        let groups = obs
            .observers
            .iter()
            .map(|s| DeltaGroup {
                deltas_ns: s.a.iter().zip(&s.b).map(|(a, b)| b.delay_ns - a.delay_ns).collect(),
                sigmas_ns: any_sigma.then(|| s.a.iter().zip(&s.b).map(|(a, b)| a.sigma().hypot(b.sigma())).collect()),
            })
            .collect();
        Ok(Self {
            groups,
            known_eps_ns: None,
            per_observer_offsets: false,
        })
    }

    pub fn total_k(&self) -> usize {
        self.groups.iter().map(|g| g.deltas_ns.len()).sum()
    }

    fn sigma(&self, o: usize, k: usize) -> f64 {
        self.groups[o].sigmas_ns.as_ref().map_or(0.0, |s| s[k])
    }

    fn has_errors(&self) -> bool {
        self.groups
            .iter()
            .any(|g| g.sigmas_ns.as_ref().is_some_and(|s| s.iter().any(|&v| v > 0.0)))
    }

    fn mean_sigma(&self) -> f64 {
        let v: Vec<f64> = self
            .groups
            .iter()
            .filter_map(|g| g.sigmas_ns.as_ref())
            .flatten()
            .copied()
            .filter(|&s| s > 0.0)
            .collect();
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }

    /// The same data with A and B swapped.
    fn mirrored(&self) -> Self {
        let mut m = self.clone();
        for g in &mut m.groups {
            g.deltas_ns.iter_mut().for_each(|x| *x = -*x);
        }
        m.known_eps_ns = self.known_eps_ns.map(|e| -e);
        m
    }

    fn all_deltas(&self) -> impl Iterator<Item = f64> + '_ {
        self.groups.iter().flat_map(|g| g.deltas_ns.iter().copied())
    }

    fn validate(&self) -> Result<()> {
        for g in &self.groups {
            if g.deltas_ns.iter().any(|d| !d.is_finite()) {
                return Err(Error::InvalidArgument("delay differences must be finite".into()));
            }
            if let Some(s) = &g.sigmas_ns {
                if s.len() != g.deltas_ns.len() {
                    return Err(Error::InvalidArgument("one sigma per delay difference required".into()));
                }
                if s.iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
                    return Err(Error::InvalidArgument("sigmas must be finite and non-negative".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMethod {
    ClosedFormMle,
    ClosedFormMvue,
    NumericMle,
    NoAssociation,
    FullyAsync,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedFormVariant {
    Mle,
    Mvue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceEstimate {
    pub d_hat_m: f64,
    /// Common clock offset; in synchronized mode this echoes the known value.
    pub eps_hat_ns: Option<f64>,
    /// Per-observer offsets when each observer has its own clock offset.
    pub eps_per_observer_ns: Vec<f64>,
    /// Interval of maximizing per-observer offsets (zero-error case).
    pub eps_intervals_ns: Vec<(f64, f64)>,
    pub loglik: f64,
    pub method: DistanceMethod,
    pub iterations: usize,
}

impl DistanceEstimate {
    fn simple(d: f64, eps: Option<f64>, loglik: f64, method: DistanceMethod, iterations: usize) -> Self {
        Self {
            d_hat_m: d,
            eps_hat_ns: eps,
            eps_per_observer_ns: Vec::new(),
            eps_intervals_ns: Vec::new(),
            loglik,
            method,
            iterations,
        }
    }
}

/// `ln P(|x - W| <= h)`, with a hard indicator tolerant to rounding for exact entries.
fn ln_soft_indicator(x: f64, h: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        ln_box_probability(x, h, sigma)
    } else if x.abs() <= h * (1.0 + HARD_TOL) + HARD_TOL {
        0.0
    } else {
        f64::NEG_INFINITY
    }
}

fn loglik_with(obs: &DeltaObservation, d_m: f64, eps_of: impl Fn(usize) -> f64) -> f64 {
    let h = d_m / C_M_PER_NS;
    let mut total = -(obs.total_k() as f64) * d_m.ln();
    for (o, g) in obs.groups.iter().enumerate() {
        let eps = eps_of(o);
        for (k, &delta) in g.deltas_ns.iter().enumerate() {
            total += ln_soft_indicator(delta - eps, h, obs.sigma(o, k));
            if total == f64::NEG_INFINITY {
                return total;
            }
        }
    }
    total
}

/// Log-likelihood of distance `d_m` and common clock offset `eps_ns`.
pub fn distance_loglik(obs: &DeltaObservation, d_m: f64, eps_ns: f64) -> Result<f64> {
    if !(d_m > 0.0) {
        return Err(Error::NonpositiveDistanceHypothesis(d_m));
    }
    Ok(loglik_with(obs, d_m, |_| eps_ns))
}

/// Log-likelihood with one clock offset per observer.
pub fn distance_loglik_per_observer(obs: &DeltaObservation, d_m: f64, eps_ns: &[f64]) -> Result<f64> {
    if !(d_m > 0.0) {
        return Err(Error::NonpositiveDistanceHypothesis(d_m));
    }
    if eps_ns.len() != obs.groups.len() {
        return Err(Error::InvalidArgument("one clock offset per observer required".into()));
    }
    Ok(loglik_with(obs, d_m, |o| eps_ns[o]))
}

/// Velocity likelihood: the distance likelihood at `d = v * elapsed`.
pub fn velocity_loglik(obs: &DeltaObservation, elapsed_s: f64, v_m_per_s: f64, eps_ns: f64) -> Result<f64> {
    if !(elapsed_s > 0.0) {
        return Err(Error::InvalidArgument(format!("elapsed time must be positive, got {elapsed_s}")));
    }
    distance_loglik(obs, v_m_per_s * elapsed_s, eps_ns)
}

fn loglik_or_inf(obs: &DeltaObservation, d: f64, eps: f64) -> f64 {
    if d > 0.0 {
        loglik_with(obs, d, |_| eps)
    } else {
        f64::INFINITY
    }
}

/// Closed-form estimators for error-free delay differences.
pub fn estimate_distance_closedform(obs: &DeltaObservation, variant: ClosedFormVariant) -> Result<DistanceEstimate> {
    obs.validate()?;
    let k = obs.total_k();
    let method = match variant {
        ClosedFormVariant::Mle => DistanceMethod::ClosedFormMle,
        ClosedFormVariant::Mvue => DistanceMethod::ClosedFormMvue,
    };
    match obs.known_eps_ns {
        Some(eps) => {
            if k < 1 {
                return Err(Error::InsufficientMpcs { needed: 1, got: k });
            }
            let mle = C_M_PER_NS * obs.all_deltas().map(|x| (x - eps).abs()).fold(0.0, f64::max);
            let d = match variant {
                ClosedFormVariant::Mle => mle,
                ClosedFormVariant::Mvue => (k + 1) as f64 / k as f64 * mle,
            };
            Ok(DistanceEstimate::simple(d, Some(eps), loglik_or_inf(obs, d, eps), method, 0))
        }
        None => {
            let needed = match variant {
                ClosedFormVariant::Mle => 1,
                ClosedFormVariant::Mvue => 2,
            };
            if k < needed {
                return Err(Error::InsufficientMpcs { needed, got: k });
            }
            let (lo, hi) = obs
                .all_deltas()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
            let mle = 0.5 * C_M_PER_NS * (hi - lo);
            let eps = 0.5 * (hi + lo);
            let d = match variant {
                ClosedFormVariant::Mle => mle,
                ClosedFormVariant::Mvue => (k + 1) as f64 / (k - 1) as f64 * mle,
            };
            Ok(DistanceEstimate::simple(d, Some(eps), loglik_or_inf(obs, d, eps), method, 0))
        }
    }
}

/// Runs Nelder–Mead repeatedly from `x0` until a restart no longer improves.
fn polish(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], steps: &[f64]) -> Result<(Vec<f64>, f64, usize)> {
    let opts = NelderMeadOptions::default();
    let mut best = nelder_mead(&mut f, x0, steps, &opts)?;
    let mut iterations = best.iterations;
    for _ in 0..MAX_RESTARTS {
        let small: Vec<f64> = steps.iter().map(|s| 0.1 * s).collect();
        let next = nelder_mead(&mut f, &best.x, &small, &opts)?;
        iterations += next.iterations;
        let improved = best.f - next.f;
        if next.f < best.f {
            best = next;
        }
        if !(improved > 1e-12) {
            break;
        }
    }
    Ok((best.x, best.f, iterations))
}

/// Maximum-likelihood distance (and clock offset unless known).
///
/// Without measurement errors this is the closed-form MLE. Otherwise the
/// likelihood is maximized numerically from the closed form and from the best
/// point of a 5x5 grid around it.
pub fn estimate_distance_mle(obs: &DeltaObservation) -> Result<DistanceEstimate> {
    obs.validate()?;
    if obs.per_observer_offsets {
        return estimate_distance_fullyasync(obs);
    }
    let k = obs.total_k();
    let needed = if obs.known_eps_ns.is_some() { 1 } else { 2 };
    if k < needed {
        return Err(Error::InsufficientMpcs { needed, got: k });
    }
    let cf = estimate_distance_closedform(obs, ClosedFormVariant::Mle)?;
    if !obs.has_errors() {
        return Ok(cf);
    }
    // Solving the mirrored problem as well makes the result exactly symmetric under A/B swap.
    let direct = numeric_mle(obs, &cf)?;
    let swapped = obs.mirrored();
    let mirror = numeric_mle(&swapped, &estimate_distance_closedform(&swapped, ClosedFormVariant::Mle)?)?;
    let iterations = direct.iterations + mirror.iterations;
    let mirror_eps = mirror.eps_hat_ns.map(|e| -e);
    let tie = (direct.loglik - mirror.loglik).abs() <= 1e-12 * direct.loglik.abs().max(1.0);
    let mut best = if tie {
        DistanceEstimate {
            d_hat_m: 0.5 * (direct.d_hat_m + mirror.d_hat_m),
            eps_hat_ns: direct.eps_hat_ns.zip(mirror_eps).map(|(a, b)| 0.5 * (a + b)),
            loglik: 0.5 * (direct.loglik + mirror.loglik),
            ..direct
        }
    } else if direct.loglik > mirror.loglik {
        direct
    } else {
        DistanceEstimate {
            eps_hat_ns: mirror_eps,
            ..mirror
        }
    };
    if let Some(eps) = obs.known_eps_ns {
        best.eps_hat_ns = Some(eps);
    }
    best.iterations = iterations;
    Ok(best)
}

fn numeric_mle(obs: &DeltaObservation, cf: &DistanceEstimate) -> Result<DistanceEstimate> {
    let sigma = obs.mean_sigma();
    let d0 = cf.d_hat_m.max(C_M_PER_NS * sigma).max(10.0 * MIN_DISTANCE_M);
    let d_step = (0.1 * d0).max(0.5 * C_M_PER_NS * sigma);
    let cost_d = |d: f64, eps: f64| {
        if d < MIN_DISTANCE_M {
            f64::INFINITY
        } else {
            -loglik_with(obs, d, |_| eps)
        }
    };
    let d_factors = [0.5, 0.75, 1.0, 1.5, 2.0];

    match obs.known_eps_ns {
        Some(eps) => {
            let f = |x: &[f64]| cost_d(x[0], eps);
            let grid_best = d_factors
                .iter()
                .map(|m| d0 * m)
                .min_by(|a, b| f(&[*a]).total_cmp(&f(&[*b])))
                .unwrap_or(d0);
            let mut best: Option<(Vec<f64>, f64)> = None;
            let mut iterations = 0;
            for start in [d0, grid_best] {
                let (x, v, it) = polish(f, &[start], &[d_step])?;
                iterations += it;
                if best.as_ref().is_none_or(|b| v < b.1) {
                    best = Some((x, v));
                }
            }
            let (x, v) = best.expect("at least one start");
            Ok(DistanceEstimate::simple(x[0], Some(eps), -v, DistanceMethod::NumericMle, iterations))
        }
        None => {
            let eps0 = cf.eps_hat_ns.unwrap_or(0.0);
            let eps_step = (0.5 * sigma).max(1e-4);
            let f = |x: &[f64]| cost_d(x[0], x[1]);
            let mut grid_best = (vec![d0, eps0], f(&[d0, eps0]));
            for m in d_factors {
                for j in -2..=2 {
                    let p = vec![d0 * m, eps0 + j as f64 * sigma];
                    let v = f(&p);
                    if v < grid_best.1 {
                        grid_best = (p, v);
                    }
                }
            }
            let mut best: Option<(Vec<f64>, f64)> = None;
            let mut iterations = 0;
            for start in [vec![d0, eps0], grid_best.0] {
                let (x, v, it) = polish(f, &start, &[d_step, eps_step])?;
                iterations += it;
                if best.as_ref().is_none_or(|b| v < b.1) {
                    best = Some((x, v));
                }
            }
            let (x, v) = best.expect("at least one start");
            Ok(DistanceEstimate::simple(x[0], Some(x[1]), -v, DistanceMethod::NumericMle, iterations))
        }
    }
}

/// Which closed-form RMSE law to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmseCase {
    /// Distance MVUE with unknown clock offset.
    AsyncDist,
    /// Clock-offset estimate, in ns.
    EpsOffset,
    /// Distance MVUE with known clock offset.
    SyncDist,
}

/// RMSE of the closed-form estimators when `c * delta` is iid uniform on `(-d, d)`.
pub fn analytic_rmse(d_m: f64, k: usize, case: RmseCase) -> Result<f64> {
    let kf = k as f64;
    match case {
        RmseCase::AsyncDist => {
            if k < 2 {
                return Err(Error::InsufficientMpcs { needed: 2, got: k });
            }
            Ok(d_m * 2f64.sqrt() / ((kf - 1.0) * (kf + 2.0)).sqrt())
        }
        RmseCase::EpsOffset => {
            if k < 1 {
                return Err(Error::InsufficientMpcs { needed: 1, got: k });
            }
            Ok(d_m / C_M_PER_NS * 2f64.sqrt() / ((kf + 1.0) * (kf + 2.0)).sqrt())
        }
        RmseCase::SyncDist => {
            if k < 1 {
                return Err(Error::InsufficientMpcs { needed: 1, got: k });
            }
            Ok(d_m / (kf * (kf + 2.0)).sqrt())
        }
    }
}

/// Distance and per-observer clock offsets when every observer has its own offset.
///
/// Without measurement errors any offset in `[max_o - d/c, min_o + d/c]` is a
/// maximizer; the midpoint is reported and the interval kept as a diagnostic.
pub fn estimate_distance_fullyasync(obs: &DeltaObservation) -> Result<DistanceEstimate> {
    obs.validate()?;
    if obs.groups.is_empty() {
        return Err(Error::InsufficientMpcs { needed: 2, got: 0 });
    }
    for g in &obs.groups {
        if g.deltas_ns.len() < 2 {
            return Err(Error::InsufficientMpcs {
                needed: 2,
                got: g.deltas_ns.len(),
            });
        }
    }
    let ranges: Vec<(f64, f64)> = obs
        .groups
        .iter()
        .map(|g| {
            g.deltas_ns
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
        })
        .collect();
    let d_cf = 0.5 * C_M_PER_NS * ranges.iter().map(|(lo, hi)| hi - lo).fold(0.0, f64::max);
    let mids: Vec<f64> = ranges.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
    let h = d_cf / C_M_PER_NS;
    let intervals: Vec<(f64, f64)> = ranges.iter().map(|(lo, hi)| (hi - h, lo + h)).collect();

    if !obs.has_errors() {
        let loglik = if d_cf > 0.0 {
            loglik_with(obs, d_cf, |o| mids[o])
        } else {
            f64::INFINITY
        };
        return Ok(DistanceEstimate {
            d_hat_m: d_cf,
            eps_hat_ns: None,
            eps_per_observer_ns: mids,
            eps_intervals_ns: intervals,
            loglik,
            method: DistanceMethod::FullyAsync,
            iterations: 0,
        });
    }

    let sigma = obs.mean_sigma();
    let d0 = d_cf.max(C_M_PER_NS * sigma).max(10.0 * MIN_DISTANCE_M);
    let f = |x: &[f64]| {
        if x[0] < MIN_DISTANCE_M {
            f64::INFINITY
        } else {
            -loglik_with(obs, x[0], |o| x[o + 1])
        }
    };
    let mut start = vec![d0];
    start.extend(&mids);
    let mut steps = vec![(0.1 * d0).max(0.5 * C_M_PER_NS * sigma)];
    steps.extend(std::iter::repeat_n((0.5 * sigma).max(1e-4), mids.len()));
    let (x, v, iterations) = polish(f, &start, &steps)?;
    let eps = x[1..].to_vec();
    Ok(DistanceEstimate {
        d_hat_m: x[0],
        eps_hat_ns: None,
        eps_intervals_ns: eps.iter().map(|&e| (e, e)).collect(),
        eps_per_observer_ns: eps,
        loglik: -v,
        method: DistanceMethod::FullyAsync,
        iterations,
    })
}

/// Calls `visit` with every permutation of `0..n` (Heap's algorithm).
pub(crate) fn for_each_permutation(n: usize, mut visit: impl FnMut(&[usize])) {
    let mut p: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    visit(&p);
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            visit(&p);
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Permanent of a square matrix with non-negative entries, by dynamic programming over column subsets.
pub(crate) fn permanent(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 0 {
        return 1.0;
    }
    let mut dp = vec![0.0f64; 1 << n];
    dp[0] = 1.0;
    for mask in 0usize..(1 << n) {
        let v = dp[mask];
        if v == 0.0 {
            continue;
        }
        let row = mask.count_ones() as usize;
        if row == n {
            continue;
        }
        for (col, &w) in m[row].iter().enumerate() {
            if mask & (1 << col) == 0 && w != 0.0 {
                dp[mask | (1 << col)] += v * w;
            }
        }
    }
    dp[(1 << n) - 1]
}

/// Per-observer matrices of candidate delay differences `b_l - a_k` and their sigmas.
struct PairMatrix {
    x: Vec<Vec<f64>>,
    s: Vec<Vec<f64>>,
}

impl PairMatrix {
    fn ln_permanent(&self, d_m: f64, eps: f64) -> f64 {
        let h = d_m / C_M_PER_NS;
        let mut ln_scale = 0.0;
        let mut rows = Vec::with_capacity(self.x.len());
        for (xr, sr) in self.x.iter().zip(&self.s) {
            let ln_row: Vec<f64> = xr.iter().zip(sr).map(|(&x, &s)| ln_soft_indicator(x - eps, h, s)).collect();
            let top = ln_row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if top == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            ln_scale += top;
            rows.push(ln_row.iter().map(|v| (v - top).exp()).collect());
        }
        let p = permanent(&rows);
        if p > 0.0 {
            p.ln() + ln_scale
        } else {
            f64::NEG_INFINITY
        }
    }
}

fn pair_matrices(obs: &Observation) -> Result<Vec<PairMatrix>> {
    obs.require_paired()?;
    let mut out = Vec::new();
    for s in &obs.observers {
        let k = s.a.len();
        if k > MAX_PERMUTATION_K {
            return Err(Error::PermutationBudgetExceeded {
                k,
                cap: MAX_PERMUTATION_K,
            });
        }
        if k == 0 {
            continue;
        }
        out.push(PairMatrix {
            x: s.a.iter().map(|a| s.b.iter().map(|b| b.delay_ns - a.delay_ns).collect()).collect(),
            s: s.a.iter().map(|a| s.b.iter().map(|b| a.sigma().hypot(b.sigma())).collect()).collect(),
        });
    }
    Ok(out)
}

fn noassoc_loglik(mats: &[PairMatrix], k_total: usize, d_m: f64, eps: f64) -> f64 {
    let mut total = -(k_total as f64) * d_m.ln();
    for m in mats {
        total += m.ln_permanent(d_m, eps);
        if total == f64::NEG_INFINITY {
            break;
        }
    }
    total
}

/// Zero-error log-score `-K ln d + sum_o ln C_o`, where `C_o` counts consistent permutations.
fn zero_sigma_score(mats: &[PairMatrix], k_total: usize, d_m: f64, eps: f64) -> f64 {
    let h = d_m / C_M_PER_NS;
    let mut ln_count = 0.0;
    for m in mats {
        let ind: Vec<Vec<f64>> = m
            .x
            .iter()
            .map(|r| r.iter().map(|&x| if ln_soft_indicator(x - eps, h, 0.0) == 0.0 { 1.0 } else { 0.0 }).collect())
            .collect();
        let c = permanent(&ind);
        if c == 0.0 {
            return f64::NEG_INFINITY;
        }
        ln_count += c.ln();
    }
    if d_m > 0.0 {
        ln_count - k_total as f64 * d_m.ln()
    } else {
        f64::INFINITY
    }
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Finite set of zero-error hypotheses `(d, eps)`, scored and sorted best first.
fn zero_sigma_candidates(mats: &[PairMatrix], k_total: usize, sync_eps: Option<f64>) -> Vec<(f64, f64, f64)> {
    let mut largest = Vec::new();
    let mut smallest = Vec::new();
    let mut sync_d = Vec::new();
    for m in mats {
        let k = m.x.len();
        for_each_permutation(k, |p| {
            let vals = (0..k).map(|i| m.x[i][p[i]]);
            match sync_eps {
                Some(eps) => sync_d.push(C_M_PER_NS * vals.map(|x| (x - eps).abs()).fold(0.0, f64::max)),
                None => {
                    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
                    largest.push(hi);
                    smallest.push(lo);
                }
            }
        });
    }
    let mut hyps: Vec<(f64, f64)> = match sync_eps {
        Some(eps) => sorted_unique(sync_d).into_iter().map(|d| (d, eps)).collect(),
        None => {
            let (ls, ss) = (sorted_unique(largest), sorted_unique(smallest));
            let mut h = Vec::with_capacity(ls.len() * ss.len());
            for &l in &ls {
                for &s in &ss {
                    if l >= s {
                        h.push((0.5 * C_M_PER_NS * (l - s), 0.5 * (l + s)));
                    }
                }
            }
            h
        }
    };
    hyps.retain(|&(d, e)| d.is_finite() && e.is_finite());
    let mut scored: Vec<(f64, f64, f64)> = hyps
        .into_iter()
        .map(|(d, e)| (d, e, zero_sigma_score(mats, k_total, d, e)))
        .filter(|c| c.2 > f64::NEG_INFINITY)
        .collect();
    scored.sort_by(better_candidate);
    scored
}

/// Ordering: higher score first, then smaller distance, then smaller `|eps|`.
fn better_candidate(a: &(f64, f64, f64), b: &(f64, f64, f64)) -> std::cmp::Ordering {
    let tie = (a.2 - b.2).abs() <= 1e-12 * a.2.abs().max(1.0) || (a.2.is_infinite() && a.2 == b.2);
    if !tie {
        return b.2.total_cmp(&a.2);
    }
    a.0.total_cmp(&b.0).then(a.1.abs().total_cmp(&b.1.abs()))
}

/// Joint distance/clock-offset MLE when the A-to-B MPC association is unknown.
///
/// The likelihood sums over all associations, i.e. it is a product of matrix
/// permanents. With exact delays it is maximized over a finite hypothesis set;
/// otherwise by local search seeded from the best exact-delay hypotheses.
pub fn estimate_distance_noassoc(obs: &Observation, sync_eps_ns: Option<f64>) -> Result<DistanceEstimate> {
    let mats = pair_matrices(obs)?;
    let k_total: usize = mats.iter().map(|m| m.x.len()).sum();
    let needed = if sync_eps_ns.is_some() { 1 } else { 2 };
    if k_total < needed {
        return Err(Error::InsufficientMpcs { needed, got: k_total });
    }
    let has_errors = mats.iter().any(|m| m.s.iter().flatten().any(|&s| s > 0.0));
    let candidates = zero_sigma_candidates(&mats, k_total, sync_eps_ns);

    if !has_errors {
        let (d, eps, score) = *candidates
            .first()
            .ok_or_else(|| Error::InvalidArgument("no consistent hypothesis".into()))?;
        return Ok(DistanceEstimate::simple(d, Some(eps), score, DistanceMethod::NoAssociation, 0));
    }

    let sigmas: Vec<f64> = mats.iter().flat_map(|m| m.s.iter().flatten().copied()).filter(|&s| s > 0.0).collect();
    let sigma = sigmas.iter().sum::<f64>() / sigmas.len() as f64;
    let d_floor = (C_M_PER_NS * sigma).max(10.0 * MIN_DISTANCE_M);
    let f = |d: f64, eps: f64| {
        if d < MIN_DISTANCE_M {
            f64::INFINITY
        } else {
            -noassoc_loglik(&mats, k_total, d, eps)
        }
    };
    let mut starts: Vec<(f64, f64)> = candidates
        .iter()
        .take(NOASSOC_STARTS)
        .map(|&(d, e, _)| (d.max(d_floor), e))
        .collect();
    if starts.is_empty() {
        let all: Vec<f64> = mats.iter().flat_map(|m| m.x.iter().flatten().copied()).collect();
        let mid = all.iter().sum::<f64>() / all.len() as f64;
        starts.push((d_floor, sync_eps_ns.unwrap_or(mid)));
    }
    let mut best: Option<(f64, f64, f64)> = None;
    let mut iterations = 0;
    for (d0, e0) in starts {
        let d_step = (0.1 * d0).max(0.5 * C_M_PER_NS * sigma);
        let (x, v, it) = match sync_eps_ns {
            Some(eps) => {
                let (x, v, it) = polish(|x: &[f64]| f(x[0], eps), &[d0], &[d_step])?;
                (vec![x[0], eps], v, it)
            }
            None => polish(|x: &[f64]| f(x[0], x[1]), &[d0, e0], &[d_step, (0.5 * sigma).max(1e-4)])?,
        };
        iterations += it;
        if best.is_none_or(|b| v < b.2) {
            best = Some((x[0], x[1], v));
        }
    }
    let (d, eps, v) = best.expect("at least one start");
    Ok(DistanceEstimate::simple(d, Some(eps), -v, DistanceMethod::NoAssociation, iterations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observation::{MeasuredMpc, ObserverSets};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn closed_form_examples() {
        let obs = DeltaObservation::new(vec![vec![1.0, 2.0, 3.0, 5.0]]);
        let mle = estimate_distance_closedform(&obs, ClosedFormVariant::Mle).unwrap();
        let mvue = estimate_distance_closedform(&obs, ClosedFormVariant::Mvue).unwrap();
        assert!(close(mle.d_hat_m, 0.599585, 1e-6));
        assert!(close(mvue.d_hat_m, 0.999308, 1e-6));
        assert_eq!(mle.eps_hat_ns, Some(3.0));
        assert_eq!(mvue.eps_hat_ns, Some(3.0));

        let same = DeltaObservation::new(vec![vec![4.0, 4.0, 4.0]]);
        let e = estimate_distance_closedform(&same, ClosedFormVariant::Mvue).unwrap();
        assert_eq!((e.d_hat_m, e.eps_hat_ns), (0.0, Some(4.0)));

        let one = DeltaObservation::new(vec![vec![4.0]]);
        assert!(matches!(
            estimate_distance_closedform(&one, ClosedFormVariant::Mvue),
            Err(Error::InsufficientMpcs { .. })
        ));
    }

    #[test]
    fn sync_closed_form() {
        let obs = DeltaObservation::new(vec![vec![-2.0, 1.0]]).with_known_eps(0.0);
        let e = estimate_distance_mle(&obs).unwrap();
        assert!(close(e.d_hat_m, 0.599585, 1e-6));
        let d = 1.5;
        let h = d / C_M_PER_NS;
        let obs = DeltaObservation::new(vec![vec![0.3 + h, 0.3 - h, 0.3]]).with_known_eps(0.3);
        let mle = estimate_distance_closedform(&obs, ClosedFormVariant::Mle).unwrap();
        let mvue = estimate_distance_closedform(&obs, ClosedFormVariant::Mvue).unwrap();
        assert!(close(mle.d_hat_m, d, 1e-12));
        assert!(close(mvue.d_hat_m, 4.0 / 3.0 * d, 1e-12));
    }

    #[test]
    fn loglik_examples() {
        let obs = DeltaObservation::new(vec![vec![0.0, 1.0]]);
        let d = 2.0 * C_M_PER_NS;
        assert!(close(distance_loglik(&obs, d, 0.5).unwrap(), -2.0 * d.ln(), 1e-12));
        assert_eq!(distance_loglik(&obs, d, 5.0).unwrap(), f64::NEG_INFINITY);
        assert!(matches!(distance_loglik(&obs, 0.0, 0.0), Err(Error::NonpositiveDistanceHypothesis(_))));

        let g = DeltaObservation::new(vec![vec![0.7]]).with_sigmas(vec![vec![1.0]]);
        let d = C_M_PER_NS;
        let expected = (0.682_689_492_137_086 / d).ln();
        assert!(close(distance_loglik(&g, d, 0.7).unwrap(), expected, 1e-12));
    }

    #[test]
    fn velocity_support_boundary() {
        let obs = DeltaObservation::new(vec![vec![0.0, 2.0]]);
        let vmin = C_M_PER_NS * 1.0 / 2.0;
        assert!(close(vmin, 0.149896, 1e-6));
        assert!(velocity_loglik(&obs, 2.0, vmin * 1.0001, 1.0).unwrap().is_finite());
        assert_eq!(velocity_loglik(&obs, 2.0, vmin * 0.999, 1.0).unwrap(), f64::NEG_INFINITY);
        let a = velocity_loglik(&obs, 1.0, 0.8, 1.0).unwrap();
        let b = velocity_loglik(&obs, 2.0, 0.4, 1.0).unwrap();
        assert_eq!(a, distance_loglik(&obs, 0.8, 1.0).unwrap());
        assert!(close(a, b, 1e-12));
    }

    #[test]
    fn analytic_rmse_examples() {
        assert!(close(analytic_rmse(2.5, 12, RmseCase::AsyncDist).unwrap(), 0.284901, 1e-6));
        assert!(close(analytic_rmse(2.5, 12, RmseCase::SyncDist).unwrap(), 0.192880, 1e-6));
        assert!(close(analytic_rmse(2.5, 12, RmseCase::EpsOffset).unwrap(), 0.87415, 1e-4));
        assert!(analytic_rmse(2.5, 1, RmseCase::AsyncDist).is_err());
    }

    #[test]
    fn fully_async_examples() {
        let obs = DeltaObservation::new(vec![vec![0.0, 2.0], vec![10.0, 13.0, 11.0]]).with_per_observer_offsets();
        let e = estimate_distance_fullyasync(&obs).unwrap();
        assert!(close(e.d_hat_m, 0.449689, 1e-6));
        assert_eq!(e.eps_per_observer_ns, vec![1.0, 11.5]);
        assert!(close(e.eps_intervals_ns[0].0, 0.5, 1e-12) && close(e.eps_intervals_ns[0].1, 1.5, 1e-12));

        let single = DeltaObservation::new(vec![vec![1.0, 2.0, 3.0, 5.0]]);
        let fa = estimate_distance_fullyasync(&single).unwrap();
        let cf = estimate_distance_closedform(&single, ClosedFormVariant::Mle).unwrap();
        assert_eq!(fa.d_hat_m, cf.d_hat_m);
        assert_eq!(fa.eps_per_observer_ns[0], cf.eps_hat_ns.unwrap());
    }

    #[test]
    fn small_sigma_converges_to_closed_form() {
        let deltas = vec![vec![0.4, -1.1, 2.3, 0.9, -0.2]];
        let obs = DeltaObservation::new(deltas.clone()).with_sigmas(vec![vec![1e-6; 5]]);
        let cf = estimate_distance_closedform(&DeltaObservation::new(deltas), ClosedFormVariant::Mle).unwrap();
        let e = estimate_distance_mle(&obs).unwrap();
        assert!((e.d_hat_m - cf.d_hat_m).abs() < 1e-4, "{} vs {}", e.d_hat_m, cf.d_hat_m);
    }

    #[test]
    fn permutations_and_permanents() {
        let mut n = 0;
        for_each_permutation(5, |_| n += 1);
        assert_eq!(n, 120);
        let ones = vec![vec![1.0; 4]; 4];
        assert_eq!(permanent(&ones), 24.0);
        let m = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        assert_eq!(permanent(&m), 10.0);
    }

    fn sets(a: &[f64], b: &[f64]) -> ObserverSets {
        ObserverSets {
            a: a.iter().map(|&t| MeasuredMpc::new(t)).collect(),
            b: b.iter().map(|&t| MeasuredMpc::new(t)).collect(),
        }
    }

    #[test]
    fn noassoc_single_mpc_observers_match_mle() {
        let obs = Observation {
            observers: vec![sets(&[10.0], &[11.0]), sets(&[20.0], &[23.5]), sets(&[5.0], &[4.0])],
        };
        let na = estimate_distance_noassoc(&obs, None).unwrap();
        let mle = estimate_distance_mle(&DeltaObservation::from_observation(&obs).unwrap()).unwrap();
        assert!(close(na.d_hat_m, mle.d_hat_m, 1e-12));
        assert!(close(na.eps_hat_ns.unwrap(), mle.eps_hat_ns.unwrap(), 1e-12));
    }

    #[test]
    fn noassoc_well_separated_matches_known_association() {
        let a = [10.0, 40.0, 70.0, 100.0];
        let b = [10.5, 39.8, 70.9, 100.1];
        let obs = Observation {
            observers: vec![sets(&a, &b)],
        };
        let na = estimate_distance_noassoc(&obs, None).unwrap();
        let mle = estimate_distance_mle(&DeltaObservation::from_observation(&obs).unwrap()).unwrap();
        assert!(close(na.d_hat_m, mle.d_hat_m, 1e-12));
    }

    #[test]
    fn noassoc_budget() {
        let a: Vec<f64> = (0..9).map(f64::from).collect();
        let obs = Observation {
            observers: vec![sets(&a, &a)],
        };
        assert!(matches!(
            estimate_distance_noassoc(&obs, None),
            Err(Error::PermutationBudgetExceeded { .. })
        ));
    }
}
