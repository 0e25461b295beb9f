//! Relative position estimation from MPC delays and directions.
//!
//! Two linear models are supported. The delay-difference model projects the
//! relative position onto one vector per MPC (`s^T d = c (delta - eps)`); the
//! raw-delay model reconstructs `d` per MPC from both delays and both
//! directions and solves jointly for the clock offsets.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{projection_vector, ProjectionMode, Vec3, C_M_PER_NS};
use crate::observation::{Observation, PairedMpc};
use crate::optim::{nelder_mead, NelderMeadOptions};

/// Largest accepted condition number of a normal matrix.
pub const MAX_CONDITION: f64 = 1e10;

/// Stacked projection model: column `k` of `e` is `[s_k; 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSystem {
    pub e: DMatrix<f64>,
    pub s: Vec<Vec3>,
    pub observers: Vec<usize>,
    pub mode: ProjectionMode,
}

pub fn build_projection_system(mpcs: &[PairedMpc], mode: ProjectionMode) -> Result<ProjectionSystem> {
    let s = mpcs
        .iter()
        .map(|m| projection_vector(&m.dir_a, &m.dir_b, mode))
        .collect::<Result<Vec<Vec3>>>()?;
    let mut e = DMatrix::zeros(4, s.len());
    for (k, v) in s.iter().enumerate() {
        e.fixed_view_mut::<3, 1>(0, k).copy_from(v);
        e[(3, k)] = 1.0;
    }
    Ok(ProjectionSystem {
        e,
        s,
        observers: mpcs.iter().map(|m| m.observer).collect(),
        mode,
    })
}

/// Raw-delay model `G x = t` with three rows per MPC.
#[derive(Debug, Clone, PartialEq)]
pub struct TauSystem {
    pub g: DMatrix<f64>,
    pub t: DVector<f64>,
    /// Column offset of each observer's unknowns, `None` for observers without MPCs.
    pub observer_slots: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionEstimate {
    pub d_hat: Vec3,
    /// Inter-node clock offset (ns), when part of the model.
    pub eps_hat_ns: Option<f64>,
    /// Per-observer inter-node offsets in fully asynchronous mode.
    pub eps_per_observer_ns: Vec<Option<f64>>,
    /// Per-observer offsets of node A's delay measurements (raw-delay model).
    pub eps_a_per_observer_ns: Vec<Option<f64>>,
    pub residual_norm: f64,
    /// Condition number of the normal matrix.
    pub condition: f64,
}

impl PositionEstimate {
    fn plain(d_hat: Vec3) -> Self {
        Self {
            d_hat,
            eps_hat_ns: None,
            eps_per_observer_ns: Vec::new(),
            eps_a_per_observer_ns: Vec::new(),
            residual_norm: 0.0,
            condition: 1.0,
        }
    }
}

/// Least-squares solution of `a x = y` by SVD, with the normal-matrix condition number.
fn lstsq(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    if a.nrows() < a.ncols() {
        return Err(Error::RankDeficient {
            condition: f64::INFINITY,
        });
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { (smax / smin).powi(2) } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::RankDeficient { condition });
    }
    let x = svd
        .solve(y, 0.0)
        .map_err(|_| Error::RankDeficient { condition })?;
    Ok((x, condition))
}

/// Observer slots for the observers that actually contribute MPCs.
fn observer_slots(n_observers: usize, mpcs: &[PairedMpc]) -> (Vec<Option<usize>>, usize) {
    let mut present = vec![false; n_observers];
    for m in mpcs {
        present[m.observer] = true;
    }
    let mut next = 0;
    let slots = present
        .iter()
        .map(|&p| {
            p.then(|| {
                next += 1;
                next - 1
            })
        })
        .collect();
    (slots, next)
}

/// How the delay-difference model treats clock offsets and noise.
#[derive(Debug, Clone, PartialEq)]
pub enum DeltaMode {
    /// Ordinary least squares for `d` and a common offset.
    Lse,
    /// Gaussian MLE with error mean `mu_ns` and covariance `sigma_ns2` (ns, ns²).
    WeightedMle { mu_ns: DVector<f64>, sigma_ns2: DMatrix<f64> },
    /// Known inter-node clock offset.
    Sync { eps_ns: f64 },
    /// One unknown offset per observer.
    FullyAsync,
}

fn whiten(a: &mut DMatrix<f64>, y: &mut DVector<f64>, cov: &DMatrix<f64>) -> Result<()> {
    let k = y.len();
    if cov.nrows() != k || cov.ncols() != k {
        return Err(Error::InvalidArgument(format!("covariance must be {k}x{k}")));
    }
    let diagonal = (0..k).all(|i| (0..k).all(|j| i == j || cov[(i, j)] == 0.0));
    if diagonal {
        for i in 0..k {
            let v = cov[(i, i)];
            if !(v > 0.0) {
                return Err(Error::InvalidArgument("covariance must be positive definite".into()));
            }
            let w = 1.0 / v.sqrt();
            a.row_mut(i).scale_mut(w);
            y[i] *= w;
        }
        return Ok(());
    }
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("covariance must be positive definite".into()))?;
    let l = chol.l();
    let solve = |m: &DMatrix<f64>| l.solve_lower_triangular(m).expect("non-singular factor");
    *a = solve(a);
    *y = solve(&DMatrix::from_column_slice(k, 1, y.as_slice())).column(0).into_owned();
    Ok(())
}

/// Relative position from delay differences.
pub fn estimate_position_by_delta(obs: &Observation, mode: &DeltaMode, proj: ProjectionMode) -> Result<PositionEstimate> {
    let mpcs = obs.paired_mpcs()?;
    if mpcs.is_empty() {
        return Err(Error::InsufficientMpcs { needed: 1, got: 0 });
    }
    let sys = build_projection_system(&mpcs, proj)?;
    let k = mpcs.len();
    let delta: DVector<f64> = DVector::from_iterator(k, mpcs.iter().map(PairedMpc::delta_ns));

    match mode {
        DeltaMode::Lse | DeltaMode::WeightedMle { .. } => {
            let mut a = sys.e.transpose();
            let mut y = C_M_PER_NS * &delta;
            if let DeltaMode::WeightedMle { mu_ns, sigma_ns2 } = mode {
                if mu_ns.len() != k {
                    return Err(Error::InvalidArgument(format!("mean vector must have {k} entries")));
                }
                y -= C_M_PER_NS * mu_ns;
                whiten(&mut a, &mut y, sigma_ns2)?;
            }
            let (x, condition) = lstsq(&a, &y)?;
            let residual_norm = (&a * &x - &y).norm();
            Ok(PositionEstimate {
                d_hat: Vec3::new(x[0], x[1], x[2]),
                eps_hat_ns: Some(x[3] / C_M_PER_NS),
                residual_norm,
                condition,
                ..PositionEstimate::plain(Vec3::zeros())
            })
        }
        DeltaMode::Sync { eps_ns } => {
            let a = sys.e.rows(0, 3).transpose();
            let y = C_M_PER_NS * delta.add_scalar(-eps_ns);
            let (x, condition) = lstsq(&a, &y)?;
            Ok(PositionEstimate {
                d_hat: Vec3::new(x[0], x[1], x[2]),
                eps_hat_ns: Some(*eps_ns),
                residual_norm: (&a * &x - &y).norm(),
                condition,
                ..PositionEstimate::plain(Vec3::zeros())
            })
        }
        DeltaMode::FullyAsync => {
            let (slots, n) = observer_slots(obs.n_observers(), &mpcs);
            if slots.iter().any(Option::is_none) || k < 3 + n {
                return Err(Error::InsufficientMpcs { needed: 3 + obs.n_observers(), got: k });
            }
            let mut a = DMatrix::zeros(k, 3 + n);
            for (i, m) in mpcs.iter().enumerate() {
                a.fixed_view_mut::<1, 3>(i, 0).copy_from(&sys.s[i].transpose());
                a[(i, 3 + slots[m.observer].expect("present"))] = 1.0;
            }
            let y = C_M_PER_NS * &delta;
            let (x, condition) = lstsq(&a, &y)?;
            let per_obs = slots.iter().map(|s| s.map(|j| x[3 + j] / C_M_PER_NS)).collect();
            Ok(PositionEstimate {
                d_hat: Vec3::new(x[0], x[1], x[2]),
                eps_per_observer_ns: per_obs,
                residual_norm: (&a * &x - &y).norm(),
                condition,
                ..PositionEstimate::plain(Vec3::zeros())
            })
        }
    }
}

/// Clock-offset least-squares estimate for a known relative position.
pub fn estimate_clock_offset_given_d(obs: &Observation, d_known: &Vec3, proj: ProjectionMode) -> Result<f64> {
    let mpcs = obs.paired_mpcs()?;
    if mpcs.is_empty() {
        return Err(Error::InsufficientMpcs { needed: 1, got: 0 });
    }
    let mut sum = 0.0;
    for m in &mpcs {
        let s = projection_vector(&m.dir_a, &m.dir_b, proj)?;
        sum += m.delta_ns() - s.dot(d_known) / C_M_PER_NS;
    }
    Ok(sum / mpcs.len() as f64)
}

/// Maximizes a user likelihood of the delay-difference residuals over `(d, c eps)`.
///
/// `loglik` receives the residuals `delta - (s^T d + c eps) / c` in ns. The
/// search starts at the least-squares estimate.
pub fn estimate_position_general_mle(
    obs: &Observation,
    proj: ProjectionMode,
    loglik: impl Fn(&[f64]) -> f64,
) -> Result<PositionEstimate> {
    let start = estimate_position_by_delta(obs, &DeltaMode::Lse, proj)?;
    let mpcs = obs.paired_mpcs()?;
    let sys = build_projection_system(&mpcs, proj)?;
    let deltas: Vec<f64> = mpcs.iter().map(PairedMpc::delta_ns).collect();
    let mut residual = vec![0.0; deltas.len()];
    let f = |x: &[f64]| {
        for (k, r) in residual.iter_mut().enumerate() {
            let proj = sys.e[(0, k)] * x[0] + sys.e[(1, k)] * x[1] + sys.e[(2, k)] * x[2] + x[3];
            *r = deltas[k] - proj / C_M_PER_NS;
        }
        -loglik(&residual)
    };
    let x0 = [start.d_hat.x, start.d_hat.y, start.d_hat.z, C_M_PER_NS * start.eps_hat_ns.unwrap_or(0.0)];
    let scale = (start.residual_norm / (deltas.len() as f64).sqrt()).max(1e-3);
    let m = nelder_mead(f, &x0, &[scale; 4], &NelderMeadOptions::default())?;
    Ok(PositionEstimate {
        d_hat: Vec3::new(m.x[0], m.x[1], m.x[2]),
        eps_hat_ns: Some(m.x[3] / C_M_PER_NS),
        ..start
    })
}

/// How the raw-delay model treats clock offsets.
#[derive(Debug, Clone, PartialEq)]
pub enum TauMode {
    /// Unknown inter-node offset and unknown per-observer offsets of node A.
    Joint,
    /// All per-observer offsets known, for node A and node B.
    Sync { eps_a_ns: Vec<f64>, eps_b_ns: Vec<f64> },
    /// Unknown per-observer offsets on both sides.
    FullyAsync,
}

/// Builds the joint raw-delay system for the joint or fully asynchronous mode.
pub fn build_tau_system(obs: &Observation, fully_async: bool) -> Result<TauSystem> {
    let mpcs = obs.paired_mpcs()?;
    let (slots, n) = observer_slots(obs.n_observers(), &mpcs);
    let cols = if fully_async { 3 + 2 * n } else { 4 + n };
    let mut g = DMatrix::zeros(3 * mpcs.len(), cols);
    let mut t = DVector::zeros(3 * mpcs.len());
    for (i, m) in mpcs.iter().enumerate() {
        crate::geometry::check_unit(&m.dir_a)?;
        crate::geometry::check_unit(&m.dir_b)?;
        let r = 3 * i;
        let slot = slots[m.observer].expect("present");
        let diff = m.dir_b - m.dir_a;
        g.fixed_view_mut::<3, 3>(r, 0).fill_with_identity();
        let (col_b, col_ab) = if fully_async { (3 + slot, 3 + n + slot) } else { (3, 4 + slot) };
        g.fixed_view_mut::<3, 1>(r, col_b).copy_from(&m.dir_b);
        g.fixed_view_mut::<3, 1>(r, col_ab).copy_from(&diff);
        let ti = C_M_PER_NS * m.tau_b_ns * m.dir_b - C_M_PER_NS * m.tau_a_ns * m.dir_a;
        t.fixed_rows_mut::<3>(r).copy_from(&ti);
    }
    Ok(TauSystem {
        g,
        t,
        observer_slots: slots,
    })
}

/// Relative position from raw per-side delays and directions.
pub fn estimate_position_by_tau(obs: &Observation, mode: &TauMode) -> Result<PositionEstimate> {
    let mpcs = obs.paired_mpcs()?;
    if mpcs.is_empty() {
        return Err(Error::InsufficientMpcs { needed: 1, got: 0 });
    }
    match mode {
        TauMode::Sync { eps_a_ns, eps_b_ns } => {
            if eps_a_ns.len() != obs.n_observers() || eps_b_ns.len() != obs.n_observers() {
                return Err(Error::InvalidArgument("one known offset per observer and side required".into()));
            }
            let mut sum = Vec3::zeros();
            for m in &mpcs {
                crate::geometry::check_unit(&m.dir_a)?;
                crate::geometry::check_unit(&m.dir_b)?;
                let tb = m.tau_b_ns - eps_b_ns[m.observer];
                let ta = m.tau_a_ns - eps_a_ns[m.observer];
                sum += C_M_PER_NS * tb * m.dir_b - C_M_PER_NS * ta * m.dir_a;
            }
            let d_hat = sum / mpcs.len() as f64;
            let residual_norm = mpcs
                .iter()
                .map(|m| {
                    let tb = m.tau_b_ns - eps_b_ns[m.observer];
                    let ta = m.tau_a_ns - eps_a_ns[m.observer];
                    (C_M_PER_NS * tb * m.dir_b - C_M_PER_NS * ta * m.dir_a - d_hat).norm_squared()
                })
                .sum::<f64>()
                .sqrt();
            Ok(PositionEstimate {
                residual_norm,
                ..PositionEstimate::plain(d_hat)
            })
        }
        TauMode::Joint | TauMode::FullyAsync => {
            let fully_async = matches!(mode, TauMode::FullyAsync);
            let sys = build_tau_system(obs, fully_async)?;
            let (x, condition) = lstsq(&sys.g, &sys.t)?;
            let residual_norm = (&sys.g * &x - &sys.t).norm();
            let n = sys.observer_slots.iter().flatten().count();
            let offsets = |base: usize| -> Vec<Option<f64>> {
                sys.observer_slots
                    .iter()
                    .map(|s| s.map(|j| x[base + j] / C_M_PER_NS))
                    .collect()
            };
            let d_hat = Vec3::new(x[0], x[1], x[2]);
            let est = if fully_async {
                PositionEstimate {
                    eps_per_observer_ns: offsets(3),
                    eps_a_per_observer_ns: offsets(3 + n),
                    ..PositionEstimate::plain(d_hat)
                }
            } else {
                PositionEstimate {
                    eps_hat_ns: Some(x[3] / C_M_PER_NS),
                    eps_a_per_observer_ns: offsets(4),
                    ..PositionEstimate::plain(d_hat)
                }
            };
            Ok(PositionEstimate {
                residual_norm,
                condition,
                ..est
            })
        }
    }
}

/// Large-K approximation `3 c sigma / sqrt(K)` of the delay-difference LSE position RMSE.
pub fn approx_position_rmse(sigma_ns: f64, k: usize) -> Result<f64> {
    if k < 4 {
        return Err(Error::InsufficientMpcs { needed: 4, got: k });
    }
    if !(sigma_ns > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma_ns}")));
    }
    Ok(3.0 * C_M_PER_NS * sigma_ns / (k as f64).sqrt())
}
