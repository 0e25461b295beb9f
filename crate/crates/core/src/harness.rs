//! Monte Carlo experiments over sampled scenarios.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::{associate, associate_by_delay_sort, AssocParams, MuMode, Unmatched};
use crate::channel::{corrupt_directions, ChannelConfig, ChannelModel};
use crate::distance::{
    estimate_distance_closedform, estimate_distance_mle, estimate_distance_noassoc, ClosedFormVariant,
    DeltaObservation,
};
use crate::error::{Error, Result};
use crate::geometry::{ProjectionMode, Vec3};
use crate::observation::Observation;
use crate::position::{estimate_position_by_delta, estimate_position_by_tau, DeltaMode, TauMode};
use crate::rng::{substream, Purpose};

/// Estimators available to experiments and to the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EstimatorKind {
    /// Closed-form distance MVUE, unknown clock offset.
    Mvue,
    /// Closed-form distance MVUE, known clock offsets.
    MvueSync,
    /// Distance MLE, unknown clock offset.
    Mle,
    /// Distance MLE, known clock offsets.
    MleSync,
    /// Distance MLE without MPC association.
    Na,
    /// Distance MVUE after associating by delay order.
    Sort,
    /// Position LSE from delay differences.
    Dd,
    /// Position LSE from delay differences, known clock offsets.
    DdSync,
    /// Position LSE from delay differences with plane-wave projections.
    Pwa,
    /// `Dd` after cost-based association.
    Ddn,
    /// Joint position and clock-offset LSE from raw delays.
    Tau,
    /// Raw-delay reconstruction with known clock offsets.
    TauSync,
    /// `Tau` after cost-based association.
    Tna,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 13] = [
        Self::Mvue,
        Self::MvueSync,
        Self::Mle,
        Self::MleSync,
        Self::Na,
        Self::Sort,
        Self::Dd,
        Self::DdSync,
        Self::Pwa,
        Self::Ddn,
        Self::Tau,
        Self::TauSync,
        Self::Tna,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Mvue => "MVUE",
            Self::MvueSync => "MVUE_SYNC",
            Self::Mle => "MLE",
            Self::MleSync => "MLE_SYNC",
            Self::Na => "NA",
            Self::Sort => "SORT",
            Self::Dd => "DD",
            Self::DdSync => "DD_SYNC",
            Self::Pwa => "PWA",
            Self::Ddn => "DDN",
            Self::Tau => "TAU",
            Self::TauSync => "TAU_SYNC",
            Self::Tna => "TNA",
        }
    }

    /// Whether the estimator returns a position vector rather than a distance.
    pub fn is_position(self) -> bool {
        matches!(
            self,
            Self::Dd | Self::DdSync | Self::Pwa | Self::Ddn | Self::Tau | Self::TauSync | Self::Tna
        )
    }

    pub fn needs_clock_offsets(self) -> bool {
        matches!(self, Self::MvueSync | Self::MleSync | Self::DdSync | Self::TauSync)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == up)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown estimator `{s}`")))
    }
}

/// Known per-observer clock offsets of both nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockOffsets {
    pub eps_a_ns: Vec<f64>,
    pub eps_b_ns: Vec<f64>,
}

/// Side information available to the estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorContext {
    pub clock: Option<ClockOffsets>,
    pub assoc: AssocParams,
    /// Each observer has its own inter-node clock offset.
    pub fully_async: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimate {
    Distance { d_hat_m: f64, eps_hat_ns: Option<f64> },
    Position { d_hat: Vec3, eps_hat_ns: Option<f64> },
}

impl Estimate {
    pub fn distance_m(&self) -> f64 {
        match self {
            Estimate::Distance { d_hat_m, .. } => *d_hat_m,
            Estimate::Position { d_hat, .. } => d_hat.norm(),
        }
    }
}

fn synchronized(obs: &Observation, clock: &ClockOffsets) -> Result<Observation> {
    if clock.eps_a_ns.len() != obs.n_observers() || clock.eps_b_ns.len() != obs.n_observers() {
        return Err(Error::InvalidArgument("one known offset per observer and side required".into()));
    }
    let mut out = obs.clone();
    for (o, s) in out.observers.iter_mut().enumerate() {
        s.a.iter_mut().for_each(|m| m.delay_ns -= clock.eps_a_ns[o]);
        s.b.iter_mut().for_each(|m| m.delay_ns -= clock.eps_b_ns[o]);
    }
    Ok(out)
}

fn position(d_hat: Vec3, eps_hat_ns: Option<f64>) -> Estimate {
    Estimate::Position { d_hat, eps_hat_ns }
}

/// Runs one estimator on an observation given in ground-truth (or file) pairing order.
pub fn run_estimator(kind: EstimatorKind, obs: &Observation, ctx: &EstimatorContext) -> Result<Estimate> {
    let clock = || {
        ctx.clock
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("{kind} requires known clock offsets")))
    };
    let delta_mode = if ctx.fully_async { DeltaMode::FullyAsync } else { DeltaMode::Lse };
    let tau_mode = if ctx.fully_async { TauMode::FullyAsync } else { TauMode::Joint };
    let distance = |d: crate::distance::DistanceEstimate| Estimate::Distance {
        d_hat_m: d.d_hat_m,
        eps_hat_ns: d.eps_hat_ns,
    };
    let mvue = |o: &Observation, sync: bool| -> Result<Estimate> {
        let mut delta = DeltaObservation::from_observation(o)?;
        if sync {
            delta = delta.with_known_eps(0.0);
        }
        estimate_distance_closedform(&delta, ClosedFormVariant::Mvue).map(distance)
    };
    match kind {
        EstimatorKind::Mvue => mvue(obs, false),
        EstimatorKind::MvueSync => mvue(&synchronized(obs, clock()?)?, true),
        EstimatorKind::Mle | EstimatorKind::MleSync => {
            let source = if kind == EstimatorKind::MleSync { synchronized(obs, clock()?)? } else { obs.clone() };
            let mut delta = DeltaObservation::from_observation(&source)?;
            if kind == EstimatorKind::MleSync {
                delta = delta.with_known_eps(0.0);
            } else if ctx.fully_async {
                delta = delta.with_per_observer_offsets();
            }
            estimate_distance_mle(&delta).map(distance)
        }
        EstimatorKind::Na => estimate_distance_noassoc(obs, None).map(distance),
        EstimatorKind::Sort => mvue(&associate_by_delay_sort(obs)?.apply(obs), false),
        EstimatorKind::Dd | EstimatorKind::Pwa => {
            let proj = if kind == EstimatorKind::Pwa { ProjectionMode::PlaneWave } else { ProjectionMode::Exact };
            estimate_position_by_delta(obs, &delta_mode, proj).map(|e| position(e.d_hat, e.eps_hat_ns))
        }
        EstimatorKind::DdSync => {
            let sync = synchronized(obs, clock()?)?;
            estimate_position_by_delta(&sync, &DeltaMode::Sync { eps_ns: 0.0 }, ProjectionMode::Exact)
                .map(|e| position(e.d_hat, None))
        }
        EstimatorKind::Ddn => {
            let paired = associate(obs, &ctx.assoc)?.apply(obs);
            estimate_position_by_delta(&paired, &delta_mode, ProjectionMode::Exact).map(|e| position(e.d_hat, e.eps_hat_ns))
        }
        EstimatorKind::Tau => estimate_position_by_tau(obs, &tau_mode).map(|e| position(e.d_hat, e.eps_hat_ns)),
        EstimatorKind::TauSync => {
            let c = clock()?;
            estimate_position_by_tau(
                obs,
                &TauMode::Sync {
                    eps_a_ns: c.eps_a_ns.clone(),
                    eps_b_ns: c.eps_b_ns.clone(),
                },
            )
            .map(|e| position(e.d_hat, None))
        }
        EstimatorKind::Tna => {
            let paired = associate(obs, &ctx.assoc)?.apply(obs);
            estimate_position_by_tau(&paired, &tau_mode).map(|e| position(e.d_hat, e.eps_hat_ns))
        }
    }
}

/// Experiment parameter that a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    DistanceM,
    KPerObserver,
    DirectionErrorDeg,
    NAlien,
    TxPowerScaleDb,
    PLos,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            Self::DistanceM => "distance_m",
            Self::KPerObserver => "k_per_observer",
            Self::DirectionErrorDeg => "direction_error_deg",
            Self::NAlien => "n_alien",
            Self::TxPowerScaleDb => "tx_power_scale_db",
            Self::PLos => "p_los",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVar,
    pub values: Vec<f64>,
}

/// Association settings of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssociationConfig {
    /// Defaults to the inverse RMS delay spread of the channel model.
    pub lambda_per_ns: Option<f64>,
    pub angle_gate_deg: f64,
    /// Centre delays on the true clock offsets instead of the set means.
    pub known_offsets: bool,
    /// Cost of leaving a pair unmatched; defaults to twice the direction cost at the gate angle.
    pub unmatched_cost: Option<f64>,
    /// Pair as many MPCs as the gate allows instead of charging unmatched MPCs.
    pub maximize_pairs: bool,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        Self {
            lambda_per_ns: None,
            angle_gate_deg: 30.0,
            known_offsets: false,
            unmatched_cost: None,
            maximize_pairs: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub channel: ChannelConfig,
    /// Node B sits at `[distance_m, 0, 0]` relative to node A.
    pub distance_m: f64,
    pub direction_error_deg: f64,
    pub n_alien: usize,
    pub sweep: Option<Sweep>,
    pub estimators: Vec<EstimatorKind>,
    pub trials: usize,
    pub seed: u64,
    pub association: AssociationConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            channel: ChannelConfig::default(),
            distance_m: 2.5,
            direction_error_deg: 0.0,
            n_alien: 0,
            sweep: None,
            estimators: vec![EstimatorKind::Mvue, EstimatorKind::Dd],
            trials: 1000,
            seed: 1,
            association: AssociationConfig::default(),
        }
    }
}

/// Settings of one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub value: f64,
    pub channel: ChannelConfig,
    pub distance_m: f64,
    pub direction_error_deg: f64,
    pub n_alien: usize,
}

fn as_count(field: &str, v: f64) -> Result<usize> {
    if v.is_finite() && v >= 0.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(Error::config(field, format!("must be a non-negative integer, got {v}")))
    }
}

impl ExperimentConfig {
    /// Expands the sweep into validated grid points.
    pub fn grid(&self) -> Result<Vec<GridPoint>> {
        let base = GridPoint {
            value: f64::NAN,
            channel: self.channel.clone(),
            distance_m: self.distance_m,
            direction_error_deg: self.direction_error_deg,
            n_alien: self.n_alien,
        };
        let points = match &self.sweep {
            None => vec![GridPoint {
                value: self.distance_m,
                ..base
            }],
            Some(sweep) => {
                if sweep.values.is_empty() {
                    return Err(Error::config("sweep.values", "grid must not be empty"));
                }
                sweep
                    .values
                    .iter()
                    .map(|&v| {
                        let mut p = GridPoint { value: v, ..base.clone() };
                        match sweep.variable {
                            SweepVar::DistanceM => p.distance_m = v,
                            SweepVar::KPerObserver => p.channel.k_per_observer = as_count("sweep.values", v)?,
                            SweepVar::DirectionErrorDeg => p.direction_error_deg = v,
                            SweepVar::NAlien => p.n_alien = as_count("sweep.values", v)?,
                            SweepVar::TxPowerScaleDb => p.channel.tx_power_scale_db = v,
                            SweepVar::PLos => p.channel.p_los = v,
                        }
                        Ok(p)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        for p in &points {
            p.channel.validate()?;
            if !(p.distance_m.is_finite() && p.distance_m >= 0.0) {
                return Err(Error::config("distance_m", format!("must be non-negative, got {}", p.distance_m)));
            }
            if !(p.direction_error_deg.is_finite() && p.direction_error_deg >= 0.0) {
                return Err(Error::config("direction_error_deg", "must be non-negative"));
            }
            let total = p.channel.n_observers * p.channel.k_per_observer;
            if p.n_alien > total {
                return Err(Error::config("n_alien", format!("{} exceeds the {total} MPCs per scenario", p.n_alien)));
            }
        }
        Ok(points)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.estimators.is_empty() {
            return Err(Error::config("estimators", "select at least one estimator"));
        }
        if let Some(l) = self.association.lambda_per_ns {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::config("association.lambda_per_ns", "must be non-negative"));
            }
        }
        if !(self.association.angle_gate_deg > 0.0 && self.association.angle_gate_deg <= 180.0) {
            return Err(Error::config("association.angle_gate_deg", "must lie in (0, 180]"));
        }
        if let Some(u) = self.association.unmatched_cost {
            if !(u.is_finite() && u > 0.0) {
                return Err(Error::config("association.unmatched_cost", "must be positive"));
            }
        }
        self.grid().map(|_| ())
    }

    pub fn sweep_name(&self) -> &'static str {
        self.sweep
            .as_ref()
            .map_or(SweepVar::DistanceM.name(), |s| s.variable.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub sweep_value: f64,
    pub estimator: EstimatorKind,
    pub rmse_m: f64,
    /// Mean signed error; for positions the norm of the mean error vector.
    pub bias_m: f64,
    pub median_abs_err_m: f64,
    pub trials: usize,
    pub failures: usize,
    /// Standard error of `rmse_m`.
    pub stderr_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmseReport {
    pub sweep_var: String,
    pub rows: Vec<ReportRow>,
}

impl RmseReport {
    pub fn row(&self, sweep_value: f64, estimator: EstimatorKind) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.estimator == estimator && (r.sweep_value == sweep_value || (r.sweep_value.is_nan() && sweep_value.is_nan())))
    }
}

/// Error of one estimate: the signed distance error, or the position error vector.
#[derive(Debug, Clone, Copy, PartialEq)]
enum TrialError {
    Distance(f64),
    Position(Vec3),
}

fn summarize(value: f64, kind: EstimatorKind, errors: &[Option<TrialError>]) -> ReportRow {
    let ok: Vec<TrialError> = errors.iter().flatten().copied().collect();
    let n = ok.len();
    let failures = errors.len() - n;
    let sq: Vec<f64> = ok
        .iter()
        .map(|e| match e {
            TrialError::Distance(x) => x * x,
            TrialError::Position(v) => v.norm_squared(),
        })
        .collect();
    let mut abs: Vec<f64> = sq.iter().map(|s| s.sqrt()).collect();
    let (rmse, bias, median, stderr) = if n == 0 {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    } else {
        let mse = sq.iter().sum::<f64>() / n as f64;
        let rmse = mse.sqrt();
        let bias = if kind.is_position() {
            let mut mean = Vec3::zeros();
            for e in &ok {
                if let TrialError::Position(v) = e {
                    mean += v;
                }
            }
            (mean / n as f64).norm()
        } else {
            ok.iter()
                .map(|e| match e {
                    TrialError::Distance(x) => *x,
                    TrialError::Position(v) => v.norm(),
                })
                .sum::<f64>()
                / n as f64
        };
        abs.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 { abs[n / 2] } else { 0.5 * (abs[n / 2 - 1] + abs[n / 2]) };
        let stderr = if n > 1 && rmse > 0.0 {
            let var = sq.iter().map(|s| (s - mse).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt() / (2.0 * rmse)
        } else {
            0.0
        };
        (rmse, bias, median, stderr)
    };
    ReportRow {
        sweep_value: value,
        estimator: kind,
        rmse_m: rmse,
        bias_m: bias,
        median_abs_err_m: median,
        trials: errors.len(),
        failures,
        stderr_m: stderr,
    }
}

/// Runs every grid point and estimator of the experiment.
///
/// Trial `t` of grid point `p` draws all of its randomness from substreams
/// keyed by `(seed, p, t)`, so the report is reproducible regardless of
/// thread scheduling. Estimator errors are counted as failures.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RmseReport> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for (p, point) in cfg.grid()?.into_iter().enumerate() {
        let model = ChannelModel::new(point.channel.clone())?;
        let lambda = cfg
            .association
            .lambda_per_ns
            .unwrap_or(1.0 / model.profile().rms_delay_spread_ns());
        let relative = Vec3::new(point.distance_m, 0.0, 0.0);
        let estimators = &cfg.estimators;

        let trials: Vec<Vec<Option<TrialError>>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| -> Result<Vec<Option<TrialError>>> {
                let key = |purpose| substream(cfg.seed, p as u64, t as u64, purpose);
                let mut scenario = model.sample_scenario(&relative, &mut key(Purpose::Scenario))?;
                if point.direction_error_deg > 0.0 {
                    scenario = corrupt_directions(&scenario, point.direction_error_deg, &mut key(Purpose::Directions))?;
                }
                if point.n_alien > 0 {
                    match model.inject_aliens(&scenario, point.n_alien, &mut key(Purpose::Aliens)) {
                        Ok(s) => scenario = s,
                        Err(Error::RejectionBudgetExceeded(_)) => return Ok(vec![None; estimators.len()]),
                        Err(e) => return Err(e),
                    }
                }
                let clock = ClockOffsets {
                    eps_a_ns: scenario.eps_a_per_obs.clone(),
                    eps_b_ns: scenario.eps_b_per_obs.clone(),
                };
                let mu_mode = if cfg.association.known_offsets {
                    MuMode::KnownOffset {
                        eps_a_ns: clock.eps_a_ns.clone(),
                        eps_b_ns: clock.eps_b_ns.clone(),
                    }
                } else {
                    MuMode::MeanDelay
                };
                let ctx = EstimatorContext {
                    clock: Some(clock),
                    assoc: AssocParams {
                        lambda_per_ns: Some(lambda),
                        angle_gate_deg: cfg.association.angle_gate_deg,
                        mu_mode,
                        use_observer_directions: false,
                        unmatched: match (cfg.association.maximize_pairs, cfg.association.unmatched_cost) {
                            (true, _) => Unmatched::MaximizePairs,
                            (false, Some(u)) => Unmatched::Cost(u),
                            (false, None) => Unmatched::GateCost,
                        },
                    },
                    fully_async: point.channel.per_observer_offsets,
                };
                let obs = scenario.observation();
                let truth = scenario.relative_position();
                Ok(estimators
                    .iter()
                    .map(|&kind| {
                        run_estimator(kind, &obs, &ctx).ok().map(|e| match e {
                            Estimate::Distance { d_hat_m, .. } => TrialError::Distance(d_hat_m - point.distance_m),
                            Estimate::Position { d_hat, .. } => TrialError::Position(d_hat - truth),
                        })
                    })
                    .collect())
            })
            .collect::<Result<Vec<_>>>()?;

        for (j, &kind) in estimators.iter().enumerate() {
            let errors: Vec<Option<TrialError>> = trials.iter().map(|t| t[j]).collect();
            rows.push(summarize(point.value, kind, &errors));
        }
    }
    Ok(RmseReport {
        sweep_var: cfg.sweep_name().to_string(),
        rows,
    })
}

/// Smallest MPC count for which the delay-difference scheme beats received-signal-strength ranging.
///
/// `alpha` is the path-loss exponent and `sigma_sh_db` the shadowing standard deviation.
pub fn rss_beat_threshold(alpha: f64, sigma_sh_db: f64) -> Result<u64> {
    if !(alpha > 0.0 && sigma_sh_db > 0.0) {
        return Err(Error::InvalidArgument("alpha and sigma_sh must be positive".into()));
    }
    let x = 10.0 * std::f64::consts::SQRT_2 / std::f64::consts::LN_10 * alpha / sigma_sh_db;
    Ok(((x * x + 2.25).sqrt() - 0.5).ceil() as u64)
}

/// Whether `k` MPCs beat two-way time-of-arrival ranging with equal delay accuracy.
///
/// The delay-difference RMSE `3 c sigma / sqrt(K)` (with `sqrt(2) sigma` per
/// difference) is below `c sigma` exactly when `K > 18`.
pub fn toa_beat_criterion(k: u64) -> bool {
    k > 9 * 2
}
