//! Association of A-side and B-side MPCs of each observer.
//!
//! The cost of pairing two MPCs combines their direction mismatch with their
//! mean-centred delay mismatch. Pairs whose directions differ by more than a
//! gate angle cannot be matched. MPCs left unpaired are charged a fixed cost,
//! so a pair is rejected when pairing it would cost more than leaving it out.

use crate::assignment::hungarian_lexicographic;
use crate::channel::{AssociationTruth, PathId};
use crate::error::{Error, Result};
use crate::observation::{MeasuredMpc, Observation, ObserverSets};

#[derive(Debug, Clone, PartialEq)]
pub enum MuMode {
    /// Centre delays on the mean delay of each set.
    MeanDelay,
    /// Centre delays on known per-observer clock offsets of node A and node B.
    KnownOffset { eps_a_ns: Vec<f64>, eps_b_ns: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssocParams {
    /// Weight of the delay term; `None` uses the inverse delay spread of the A-side set.
    pub lambda_per_ns: Option<f64>,
    pub angle_gate_deg: f64,
    pub mu_mode: MuMode,
    pub use_observer_directions: bool,
    pub unmatched: Unmatched,
}

/// Treatment of MPCs left without a partner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Unmatched {
    /// Each unpaired MPC costs as much as a direction mismatch at the gate angle.
    GateCost,
    /// Leaving one A-side and one B-side MPC unpaired costs this much in total.
    Cost(f64),
    /// Pair as many MPCs as the gate allows, then minimize cost.
    MaximizePairs,
}

impl Unmatched {
    /// Cost of one unpaired A/B couple, `None` for [`Unmatched::MaximizePairs`].
    pub fn pair_cost(self, angle_gate_deg: f64) -> Option<f64> {
        match self {
            Unmatched::GateCost => Some(2.0 * (2.0 - 2.0 * angle_gate_deg.to_radians().cos())),
            Unmatched::Cost(u) => Some(u),
            Unmatched::MaximizePairs => None,
        }
    }
}

impl Default for AssocParams {
    fn default() -> Self {
        Self {
            lambda_per_ns: None,
            angle_gate_deg: 30.0,
            mu_mode: MuMode::MeanDelay,
            use_observer_directions: false,
            unmatched: Unmatched::GateCost,
        }
    }
}

impl AssocParams {
    pub fn with_lambda(lambda_per_ns: f64) -> Self {
        Self {
            lambda_per_ns: Some(lambda_per_ns),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if let Some(l) = self.lambda_per_ns {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::InvalidArgument(format!("lambda must be non-negative, got {l}")));
            }
        }
        if !(self.angle_gate_deg > 0.0 && self.angle_gate_deg <= 180.0) {
            return Err(Error::InvalidArgument(format!(
                "angle gate must lie in (0, 180], got {}",
                self.angle_gate_deg
            )));
        }
        if let Unmatched::Cost(u) = self.unmatched {
            if !(u.is_finite() && u > 0.0) {
                return Err(Error::InvalidArgument(format!("unmatched cost must be positive, got {u}")));
            }
        }
        Ok(())
    }
}

/// Association of one observer.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverAssociation {
    /// B-side index matched to each A-side index, `None` when rejected.
    pub mapping: Vec<Option<usize>>,
    pub cost: f64,
}

impl ObserverAssociation {
    /// B-side indices without a partner.
    pub fn rejected_b(&self, n_b: usize) -> Vec<usize> {
        let mut used = vec![false; n_b];
        for &l in self.mapping.iter().flatten() {
            used[l] = true;
        }
        (0..n_b).filter(|&l| !used[l]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    pub observers: Vec<ObserverAssociation>,
    pub total_cost: f64,
}

impl Association {
    /// Re-pairs the observation according to the association, dropping rejected MPCs.
    pub fn apply(&self, obs: &Observation) -> Observation {
        Observation {
            observers: obs
                .observers
                .iter()
                .zip(&self.observers)
                .map(|(s, a)| {
                    let pairs: Vec<(usize, usize)> =
                        a.mapping.iter().enumerate().filter_map(|(k, l)| l.map(|l| (k, l))).collect();
                    ObserverSets {
                        a: pairs.iter().map(|&(k, _)| s.a[k]).collect(),
                        b: pairs.iter().map(|&(_, l)| s.b[l]).collect(),
                    }
                })
                .collect(),
        }
    }
}

/// Pairing cost of two MPCs, `f64::INFINITY` when their directions exceed the gate angle.
pub fn association_cost(a: &MeasuredMpc, b: &MeasuredMpc, params: &AssocParams, mu_a: f64, mu_b: f64) -> f64 {
    let lambda = params.lambda_per_ns.unwrap_or(0.0);
    let mut cost = 0.0;
    if let (Some(ea), Some(eb)) = (a.dir, b.dir) {
        let angle = ea.dot(&eb).clamp(-1.0, 1.0).acos().to_degrees();
        if angle > params.angle_gate_deg {
            return f64::INFINITY;
        }
        cost += (eb - ea).norm_squared();
    }
    if params.use_observer_directions {
        if let (Some(fa), Some(fb)) = (a.observer_dir, b.observer_dir) {
            cost += (fb - fa).norm_squared();
        }
    }
    let mismatch = (b.delay_ns - mu_b) - (a.delay_ns - mu_a);
    cost + (lambda * mismatch).powi(2)
}

fn mean_delay(set: &[MeasuredMpc]) -> f64 {
    set.iter().map(|m| m.delay_ns).sum::<f64>() / set.len().max(1) as f64
}

fn delay_spread(set: &[MeasuredMpc]) -> f64 {
    let mu = mean_delay(set);
    (set.iter().map(|m| (m.delay_ns - mu).powi(2)).sum::<f64>() / set.len().max(1) as f64).sqrt()
}

/// Optimal association of one observer's sets.
pub fn associate_observer(
    set_a: &[MeasuredMpc],
    set_b: &[MeasuredMpc],
    params: &AssocParams,
    mu: (f64, f64),
) -> Result<ObserverAssociation> {
    params.validate()?;
    let k = set_a.len();
    if set_b.len() != k {
        return Err(Error::CountMismatch {
            observer: 0,
            a: k,
            b: set_b.len(),
        });
    }
    let mut resolved = params.clone();
    if resolved.lambda_per_ns.is_none() {
        let spread = delay_spread(set_a);
        resolved.lambda_per_ns = Some(if spread > 0.0 { 1.0 / spread } else { 0.0 });
    }
    let raw: Vec<Vec<f64>> = set_a
        .iter()
        .map(|a| set_b.iter().map(|b| association_cost(a, b, &resolved, mu.0, mu.1)).collect())
        .collect();
    let finite_sum: f64 = raw.iter().flatten().filter(|c| c.is_finite()).sum();
    let row_to_col = match resolved.unmatched.pair_cost(resolved.angle_gate_deg) {
        None => {
            let sentinel = 1.0 + 2.0 * finite_sum;
            let cost: Vec<Vec<f64>> = raw
                .iter()
                .map(|r| r.iter().map(|&c| if c.is_finite() { c } else { sentinel }).collect())
                .collect();
            hungarian_lexicographic(&cost).row_to_col
        }
        Some(u) => {
            // Dummy rows and columns absorb unpaired MPCs at half the pair-rejection cost each.
            let big = 1.0 + 2.0 * (finite_sum + k as f64 * u);
            let n = 2 * k;
            let mut cost = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    cost[i][j] = match (i < k, j < k) {
                        (true, true) => {
                            if raw[i][j].is_finite() {
                                raw[i][j]
                            } else {
                                big
                            }
                        }
                        (true, false) => if j - k == i { 0.5 * u } else { big },
                        (false, true) => if i - k == j { 0.5 * u } else { big },
                        (false, false) => 0.0,
                    };
                }
            }
            let mut r = hungarian_lexicographic(&cost).row_to_col;
            r.truncate(k);
            r
        }
    };
    let mut total = 0.0;
    let mapping = row_to_col
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            (j < k && raw[i][j].is_finite()).then(|| {
                total += raw[i][j];
                j
            })
        })
        .collect();
    Ok(ObserverAssociation { mapping, cost: total })
}

fn per_observer_mu(obs: &Observation, params: &AssocParams, o: usize) -> Result<(f64, f64)> {
    let s = &obs.observers[o];
    match &params.mu_mode {
        MuMode::MeanDelay => Ok((mean_delay(&s.a), mean_delay(&s.b))),
        MuMode::KnownOffset { eps_a_ns, eps_b_ns } => match (eps_a_ns.get(o), eps_b_ns.get(o)) {
            (Some(&a), Some(&b)) => Ok((a, b)),
            _ => Err(Error::InvalidArgument("one known offset per observer and side required".into())),
        },
    }
}

/// Optimal association of every observer.
pub fn associate(obs: &Observation, params: &AssocParams) -> Result<Association> {
    obs.require_paired()?;
    let mut observers = Vec::with_capacity(obs.n_observers());
    let mut total = 0.0;
    for (o, s) in obs.observers.iter().enumerate() {
        let mu = per_observer_mu(obs, params, o)?;
        let a = associate_observer(&s.a, &s.b, params, mu).map_err(|e| match e {
            Error::CountMismatch { a, b, .. } => Error::CountMismatch { observer: o, a, b },
            other => other,
        })?;
        total += a.cost;
        observers.push(a);
    }
    Ok(Association {
        observers,
        total_cost: total,
    })
}

/// Pairs the i-th smallest A-side delay with the i-th smallest B-side delay.
pub fn associate_by_delay_sort(obs: &Observation) -> Result<Association> {
    obs.require_paired()?;
    let observers = obs
        .observers
        .iter()
        .map(|s| {
            let order = |set: &[MeasuredMpc]| {
                let mut idx: Vec<usize> = (0..set.len()).collect();
                idx.sort_by(|&i, &j| set[i].delay_ns.total_cmp(&set[j].delay_ns).then(i.cmp(&j)));
                idx
            };
            let (oa, ob) = (order(&s.a), order(&s.b));
            let mut mapping = vec![None; s.a.len()];
            for (&i, &j) in oa.iter().zip(&ob) {
                mapping[i] = Some(j);
            }
            ObserverAssociation { mapping, cost: 0.0 }
        })
        .collect();
    Ok(Association {
        observers,
        total_cost: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssocEval {
    pub correct: bool,
    pub n_errors: usize,
    /// Matched pairs in which both MPCs are alien.
    pub n_alien: usize,
}

/// Scores an association against ground-truth path identities.
///
/// A matched pair is an error when the path identities differ, unless both
/// MPCs are alien (have no counterpart on the other side).
pub fn evaluate_association(assoc: &Association, truth: &AssociationTruth) -> AssocEval {
    let mut n_errors = 0;
    let mut n_alien = 0;
    for (a, (ids_a, ids_b)) in assoc.observers.iter().zip(&truth.observers) {
        let alien = |id: PathId, other: &[PathId]| !other.contains(&id);
        for (k, l) in a.mapping.iter().enumerate() {
            let Some(l) = *l else { continue };
            let (pa, pb) = (ids_a[k], ids_b[l]);
            if alien(pa, ids_b) && alien(pb, ids_a) {
                n_alien += 1;
            } else if pa != pb {
                n_errors += 1;
            }
        }
    }
    AssocEval {
        correct: n_errors == 0,
        n_errors,
        n_alien,
    }
}
