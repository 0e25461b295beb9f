//! Stochastic channel model for Monte Carlo scenarios.
//!
//! Observers sit on a sphere around node A. Each observer contributes a fixed
//! number of MPCs; NLOS excess delays follow a double-exponential power delay
//! profile (PDP) and directions are uniform on the sphere. Delay-error standard
//! deviations follow from a per-path SINR through the ranging Cramér–Rao bound.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{mpc_pair_from_virtual_source, MpcGeometry, Vec3, C_M_PER_NS};
use crate::observation::{MeasuredMpc, Observation, ObserverSets};

const ALIEN_REDRAW_BUDGET: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub n_observers: usize,
    pub k_per_observer: usize,
    pub observer_radius_m: f64,
    pub p_los: f64,
    pub gamma_rise_ns: f64,
    pub gamma_1_ns: f64,
    /// Total diffuse power of the PDP.
    pub omega_1: f64,
    pub chi: f64,
    /// Noise power spectral density, mW/GHz.
    pub n0: f64,
    /// Squared LOS amplitude at 1 m.
    pub e1: f64,
    pub xi_nlos_db: f64,
    /// Two-sided Nyquist bandwidth in GHz.
    pub bandwidth_ghz: f64,
    /// Excess delays are drawn from the PDP restricted to `[0, pdp_truncation_ns]`.
    pub pdp_truncation_ns: f64,
    pub pdp_grid_ns: f64,
    /// Scales transmit power, i.e. both `e1` and `omega_1`.
    pub tx_power_scale_db: f64,
    pub measurement_errors: bool,
    pub clock_offset_std_ns: f64,
    /// Independent clock offsets per observer instead of one inter-node offset.
    pub per_observer_offsets: bool,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            n_observers: 3,
            k_per_observer: 4,
            observer_radius_m: 5.0,
            p_los: 0.5,
            gamma_rise_ns: 10.0,
            gamma_1_ns: 30.0,
            omega_1: 1.5e-6,
            chi: 0.9,
            n0: 5e-9,
            e1: 2.5e-5,
            xi_nlos_db: -5.0,
            bandwidth_ghz: 2.0,
            pdp_truncation_ns: 225.0,
            pdp_grid_ns: 0.01,
            tx_power_scale_db: 0.0,
            measurement_errors: true,
            clock_offset_std_ns: 50.0,
            per_observer_offsets: false,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be positive, got {v}")))
            }
        };
        if self.n_observers < 1 {
            return Err(Error::config("n_observers", "must be at least 1"));
        }
        if self.k_per_observer < 1 {
            return Err(Error::config("k_per_observer", "must be at least 1"));
        }
        positive("observer_radius_m", self.observer_radius_m)?;
        if !(0.0..=1.0).contains(&self.p_los) {
            return Err(Error::config("p_los", format!("must lie in [0, 1], got {}", self.p_los)));
        }
        positive("gamma_rise_ns", self.gamma_rise_ns)?;
        positive("gamma_1_ns", self.gamma_1_ns)?;
        positive("omega_1", self.omega_1)?;
        if !(0.0..=1.0).contains(&self.chi) {
            return Err(Error::config("chi", format!("must lie in [0, 1], got {}", self.chi)));
        }
        positive("n0", self.n0)?;
        positive("e1", self.e1)?;
        if !self.xi_nlos_db.is_finite() {
            return Err(Error::config("xi_nlos_db", "must be finite"));
        }
        positive("bandwidth_ghz", self.bandwidth_ghz)?;
        positive("pdp_grid_ns", self.pdp_grid_ns)?;
        if !(self.pdp_truncation_ns.is_finite() && self.pdp_truncation_ns >= 10.0 * self.pdp_grid_ns) {
            return Err(Error::config("pdp_truncation_ns", "must span at least ten grid cells"));
        }
        if !self.tx_power_scale_db.is_finite() {
            return Err(Error::config("tx_power_scale_db", "must be finite"));
        }
        if !(self.clock_offset_std_ns.is_finite() && self.clock_offset_std_ns >= 0.0) {
            return Err(Error::config("clock_offset_std_ns", "must be non-negative"));
        }
        Ok(())
    }

    /// Minimum path delay, that of the LOS path to an observer.
    pub fn tau_min_ns(&self) -> f64 {
        self.observer_radius_m / C_M_PER_NS
    }

    /// Effective mean-square bandwidth in GHz.
    pub fn beta_ghz(&self) -> f64 {
        self.bandwidth_ghz / 12f64.sqrt()
    }

    fn power_scale(&self) -> f64 {
        10f64.powf(self.tx_power_scale_db / 10.0)
    }

    fn xi_nlos(&self) -> f64 {
        10f64.powf(self.xi_nlos_db / 10.0)
    }
}

/// PDP value `S(tau) = A (1 - chi e^{-tau/gamma_rise}) e^{-tau/gamma_1}`, integrating to `omega_1`.
pub fn pdp_value(excess_delay_ns: f64, cfg: &ChannelConfig) -> f64 {
    let (gr, g1, chi) = (cfg.gamma_rise_ns, cfg.gamma_1_ns, cfg.chi);
    let omega = cfg.omega_1 * cfg.power_scale();
    let a = omega * (g1 + gr) / (g1 * (g1 + gr * (1.0 - chi)));
    let t = excess_delay_ns.max(0.0);
    a * (1.0 - chi * (-t / gr).exp()) * (-t / g1).exp()
}

/// SINR (linear) and delay standard deviation (ns) of a path.
pub fn measurement_sigma(path_amp_sq: f64, excess_delay_ns: f64, cfg: &ChannelConfig) -> (f64, f64) {
    let tp = 1.0 / cfg.bandwidth_ghz;
    let sinr = path_amp_sq / (cfg.n0 + tp * pdp_value(excess_delay_ns, cfg));
    let sigma = 1.0 / (PI * cfg.beta_ghz() * (8.0 * sinr).sqrt());
    (sinr, sigma)
}

/// Squared path amplitude by the Friis law, `xi E1 / (c tau)^2`.
pub fn friis_amp_sq(tau_ns: f64, xi: f64, cfg: &ChannelConfig) -> f64 {
    let len = C_M_PER_NS * tau_ns;
    xi * cfg.e1 * cfg.power_scale() / (len * len)
}

/// Inverse-CDF sampler for the truncated, normalized PDP.
#[derive(Debug, Clone)]
pub struct DelayProfile {
    step: f64,
    cdf: Vec<f64>,
    mean_ns: f64,
    rms_ns: f64,
}

impl DelayProfile {
    pub fn new(cfg: &ChannelConfig) -> Self {
        let step = cfg.pdp_grid_ns;
        let n = (cfg.pdp_truncation_ns / step).round() as usize;
        let density: Vec<f64> = (0..=n).map(|i| pdp_value(i as f64 * step, cfg)).collect();
        let mut cdf = Vec::with_capacity(n + 1);
        let (mut mass, mut m1, mut m2) = (0.0, 0.0, 0.0);
        cdf.push(0.0);
        for i in 0..n {
            let (t0, t1) = (i as f64 * step, (i + 1) as f64 * step);
            let (p0, p1) = (density[i], density[i + 1]);
            mass += 0.5 * step * (p0 + p1);
            m1 += 0.5 * step * (p0 * t0 + p1 * t1);
            m2 += 0.5 * step * (p0 * t0 * t0 + p1 * t1 * t1);
            cdf.push(mass);
        }
        for v in &mut cdf {
            *v /= mass;
        }
        let mean = m1 / mass;
        let rms = (m2 / mass - mean * mean).sqrt();
        Self {
            step,
            cdf,
            mean_ns: mean,
            rms_ns: rms,
        }
    }

    /// Mean excess delay of the sampled distribution.
    pub fn mean_excess_delay_ns(&self) -> f64 {
        self.mean_ns
    }

    /// RMS delay spread of the sampled distribution.
    pub fn rms_delay_spread_ns(&self) -> f64 {
        self.rms_ns
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        ((i - 1) as f64 + frac) * self.step
    }
}

/// Opaque identifier of a propagation path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PathId(pub u32);

/// One MPC of one observer, seen at both nodes.
///
/// `path_id_a` and `path_id_b` agree unless the B-side entry was replaced by an alien.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mpc {
    pub observer: usize,
    pub index: usize,
    pub path_id_a: PathId,
    pub path_id_b: PathId,
    pub geometry: MpcGeometry,
    pub tau_meas_a_ns: f64,
    pub tau_meas_b_ns: f64,
    pub dir_meas_a: Vec3,
    pub dir_meas_b: Vec3,
    pub sigma_a_ns: f64,
    pub sigma_b_ns: f64,
    pub sinr_a: f64,
    pub sinr_b: f64,
    pub is_los: bool,
    pub is_alien: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub pos_a: Vec3,
    pub pos_b: Vec3,
    pub observers: Vec<Vec3>,
    pub eps_ns: f64,
    pub eps_a_per_obs: Vec<f64>,
    pub eps_b_per_obs: Vec<f64>,
    pub mpcs: Vec<Vec<Mpc>>,
    next_path: u32,
}

impl Scenario {
    pub fn relative_position(&self) -> Vec3 {
        self.pos_b - self.pos_a
    }

    pub fn distance_m(&self) -> f64 {
        self.relative_position().norm()
    }

    /// Measured MPC sets in ground-truth association order.
    pub fn observation(&self) -> Observation {
        let observers = self
            .mpcs
            .iter()
            .map(|ms| {
                let side = |tau: f64, dir: Vec3, sigma: f64| MeasuredMpc {
                    delay_ns: tau,
                    dir: Some(dir),
                    sigma_ns: (sigma > 0.0).then_some(sigma),
                    observer_dir: None,
                };
                ObserverSets {
                    a: ms.iter().map(|m| side(m.tau_meas_a_ns, m.dir_meas_a, m.sigma_a_ns)).collect(),
                    b: ms.iter().map(|m| side(m.tau_meas_b_ns, m.dir_meas_b, m.sigma_b_ns)).collect(),
                }
            })
            .collect();
        Observation { observers }
    }

    /// Ground-truth path identities for scoring associations.
    pub fn truth(&self) -> AssociationTruth {
        AssociationTruth {
            observers: self
                .mpcs
                .iter()
                .map(|ms| {
                    (
                        ms.iter().map(|m| m.path_id_a).collect(),
                        ms.iter().map(|m| m.path_id_b).collect(),
                    )
                })
                .collect(),
        }
    }

    /// Per-observer `eps_b - eps_a`.
    pub fn inter_node_offsets(&self) -> Vec<f64> {
        self.eps_a_per_obs
            .iter()
            .zip(&self.eps_b_per_obs)
            .map(|(a, b)| b - a)
            .collect()
    }

    pub fn n_mpcs(&self) -> usize {
        self.mpcs.iter().map(Vec::len).sum()
    }

    fn fresh_path(&mut self) -> PathId {
        let id = PathId(self.next_path);
        self.next_path += 1;
        id
    }
}

/// Path identities per observer, `(A side, B side)`, in input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociationTruth {
    pub observers: Vec<(Vec<PathId>, Vec<PathId>)>,
}

pub fn uniform_direction<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let v: [f64; 3] = UnitSphere.sample(rng);
    Vec3::from(v).normalize()
}

/// A channel configuration with its precomputed delay sampler.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    cfg: ChannelConfig,
    profile: DelayProfile,
}

struct SidePath {
    geometry: MpcGeometry,
    excess_a: f64,
    xi: f64,
    is_los: bool,
}

impl ChannelModel {
    pub fn new(cfg: ChannelConfig) -> Result<Self> {
        cfg.validate()?;
        let profile = DelayProfile::new(&cfg);
        Ok(Self { cfg, profile })
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.cfg
    }

    pub fn profile(&self) -> &DelayProfile {
        &self.profile
    }

    fn noise<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> f64 {
        if sigma > 0.0 {
            Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
        } else {
            0.0
        }
    }

    fn nlos_path<R: Rng + ?Sized>(&self, pos_a: &Vec3, pos_b: &Vec3, rng: &mut R) -> SidePath {
        loop {
            let excess = self.profile.sample(rng);
            let tau_a = self.cfg.tau_min_ns() + excess;
            let dir_a = uniform_direction(rng);
            let source = pos_a - C_M_PER_NS * tau_a * dir_a;
            if let Ok(geometry) = mpc_pair_from_virtual_source(&source, pos_a, pos_b) {
                return SidePath {
                    geometry,
                    excess_a: excess,
                    xi: self.cfg.xi_nlos(),
                    is_los: false,
                };
            }
        }
    }

    /// SINR and sigma of one side, given the path delay and the LOS delay of that side.
    fn side_quality(&self, tau_ns: f64, excess_ns: f64, xi: f64) -> (f64, f64) {
        let (sinr, sigma) = measurement_sigma(friis_amp_sq(tau_ns, xi, &self.cfg), excess_ns, &self.cfg);
        if self.cfg.measurement_errors {
            (sinr, sigma)
        } else {
            (sinr, 0.0)
        }
    }

    /// Samples a scenario with node A at the origin and node B at `relative`.
    pub fn sample_scenario<R: Rng + ?Sized>(&self, relative: &Vec3, rng: &mut R) -> Result<Scenario> {
        if !relative.iter().all(|v| v.is_finite()) {
            return Err(Error::config("relative_position", "must be finite"));
        }
        let cfg = &self.cfg;
        let pos_a = Vec3::zeros();
        let pos_b = *relative;
        let clock = Normal::new(0.0, cfg.clock_offset_std_ns.max(f64::MIN_POSITIVE)).expect("valid std");
        let draw_clock = |rng: &mut R| if cfg.clock_offset_std_ns > 0.0 { clock.sample(rng) } else { 0.0 };
        let eps = draw_clock(rng);

        let mut scenario = Scenario {
            pos_a,
            pos_b,
            observers: Vec::with_capacity(cfg.n_observers),
            eps_ns: eps,
            eps_a_per_obs: Vec::with_capacity(cfg.n_observers),
            eps_b_per_obs: Vec::with_capacity(cfg.n_observers),
            mpcs: Vec::with_capacity(cfg.n_observers),
            next_path: 0,
        };
        for o in 0..cfg.n_observers {
            let observer = pos_a + cfg.observer_radius_m * uniform_direction(rng);
            let los = rng.gen_bool(cfg.p_los);
            let eps_a = draw_clock(rng);
            let eps_b = if cfg.per_observer_offsets { eps_a + draw_clock(rng) } else { eps_a + eps };
            let tau_los_b = (observer - pos_b).norm() / C_M_PER_NS;

            let mut list = Vec::with_capacity(cfg.k_per_observer);
            for k in 0..cfg.k_per_observer {
                let path = if los && k == 0 {
                    match mpc_pair_from_virtual_source(&observer, &pos_a, &pos_b) {
                        Ok(geometry) => SidePath {
                            geometry,
                            excess_a: 0.0,
                            xi: 1.0,
                            is_los: true,
                        },
                        Err(_) => self.nlos_path(&pos_a, &pos_b, rng),
                    }
                } else {
                    self.nlos_path(&pos_a, &pos_b, rng)
                };
                let g = path.geometry;
                let excess_b = (g.tau_b_ns - tau_los_b).max(0.0);
                let (sinr_a, sigma_a) = self.side_quality(g.tau_a_ns, path.excess_a, path.xi);
                let (sinr_b, sigma_b) = self.side_quality(g.tau_b_ns, excess_b, path.xi);
                let id = scenario.fresh_path();
                list.push(Mpc {
                    observer: o,
                    index: k,
                    path_id_a: id,
                    path_id_b: id,
                    geometry: g,
                    tau_meas_a_ns: g.tau_a_ns + self.noise(sigma_a, rng) + eps_a,
                    tau_meas_b_ns: g.tau_b_ns + self.noise(sigma_b, rng) + eps_b,
                    dir_meas_a: g.dir_a,
                    dir_meas_b: g.dir_b,
                    sigma_a_ns: sigma_a,
                    sigma_b_ns: sigma_b,
                    sinr_a,
                    sinr_b,
                    is_los: path.is_los,
                    is_alien: false,
                });
            }
            scenario.observers.push(observer);
            scenario.eps_a_per_obs.push(eps_a);
            scenario.eps_b_per_obs.push(eps_b);
            scenario.mpcs.push(list);
        }
        Ok(scenario)
    }

    /// Replaces `n_alien` randomly chosen B-side MPCs by fresh draws that keep the B-side delay order.
    pub fn inject_aliens<R: Rng + ?Sized>(&self, scenario: &Scenario, n_alien: usize, rng: &mut R) -> Result<Scenario> {
        let total = scenario.n_mpcs();
        if n_alien > total {
            return Err(Error::config("n_alien", format!("{n_alien} exceeds the {total} available MPCs")));
        }
        let mut out = scenario.clone();
        if n_alien == 0 {
            return Ok(out);
        }
        let slots: Vec<(usize, usize)> = out
            .mpcs
            .iter()
            .enumerate()
            .flat_map(|(o, ms)| (0..ms.len()).map(move |k| (o, k)))
            .collect();
        let chosen = rand::seq::index::sample(rng, total, n_alien).into_vec();
        for idx in chosen {
            let (o, k) = slots[idx];
            let observer = out.observers[o];
            let tau_los_b = (observer - out.pos_b).norm() / C_M_PER_NS;
            let others: Vec<f64> = out.mpcs[o]
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(_, m)| m.tau_meas_b_ns)
                .collect();
            let rank = |t: f64| others.iter().filter(|&&x| x < t).count();
            let old_rank = rank(out.mpcs[o][k].tau_meas_b_ns);
            let eps_b = out.eps_b_per_obs[o];

            let mut accepted = None;
            for _ in 0..ALIEN_REDRAW_BUDGET {
                let path = self.nlos_path(&out.pos_a, &out.pos_b, rng);
                let g = path.geometry;
                let excess_b = (g.tau_b_ns - tau_los_b).max(0.0);
                let (sinr_b, sigma_b) = self.side_quality(g.tau_b_ns, excess_b, path.xi);
                let tau_meas = g.tau_b_ns + self.noise(sigma_b, rng) + eps_b;
                if rank(tau_meas) == old_rank {
                    accepted = Some((g, tau_meas, sigma_b, sinr_b));
                    break;
                }
            }
            let Some((g, tau_meas, sigma_b, sinr_b)) = accepted else {
                return Err(Error::RejectionBudgetExceeded(ALIEN_REDRAW_BUDGET));
            };
            let id = out.fresh_path();
            let m = &mut out.mpcs[o][k];
            m.path_id_b = id;
            m.geometry.tau_b_ns = g.tau_b_ns;
            m.geometry.dir_b = g.dir_b;
            m.geometry.virtual_source = None;
            m.tau_meas_b_ns = tau_meas;
            m.dir_meas_b = g.dir_b;
            m.sigma_b_ns = sigma_b;
            m.sinr_b = sinr_b;
            m.is_alien = true;
        }
        Ok(out)
    }
}

/// Perturbs every measured direction by a cone angle `|alpha|`, `alpha ~ N(0, sigma_dir^2)`.
pub fn corrupt_directions<R: Rng + ?Sized>(scenario: &Scenario, sigma_dir_deg: f64, rng: &mut R) -> Result<Scenario> {
    if !(sigma_dir_deg.is_finite() && sigma_dir_deg >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma_dir must be non-negative, got {sigma_dir_deg}")));
    }
    let mut out = scenario.clone();
    if sigma_dir_deg == 0.0 {
        return Ok(out);
    }
    let alpha = Normal::new(0.0, sigma_dir_deg.to_radians()).expect("valid std");
    for m in out.mpcs.iter_mut().flatten() {
        m.dir_meas_a = perturb_direction(&m.geometry.dir_a, alpha.sample(rng).abs(), rng);
        m.dir_meas_b = perturb_direction(&m.geometry.dir_b, alpha.sample(rng).abs(), rng);
    }
    Ok(out)
}

/// Rotates `e` by `angle` towards a uniformly random azimuth.
pub fn perturb_direction<R: Rng + ?Sized>(e: &Vec3, angle: f64, rng: &mut R) -> Vec3 {
    let helper = if e.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = e.cross(&helper).normalize();
    let v = e.cross(&u);
    let phi = rng.gen_range(0.0..2.0 * PI);
    (angle.cos() * e + angle.sin() * (phi.cos() * u + phi.sin() * v)).normalize()
}

/// One-shot scenario sampling; prefer [`ChannelModel`] when sampling repeatedly.
pub fn sample_scenario<R: Rng + ?Sized>(cfg: &ChannelConfig, relative: &Vec3, rng: &mut R) -> Result<Scenario> {
    ChannelModel::new(cfg.clone())?.sample_scenario(relative, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn los_sinr_and_sigma() {
        let cfg = ChannelConfig::default();
        let amp = friis_amp_sq(cfg.observer_radius_m / C_M_PER_NS, 1.0, &cfg);
        assert!((amp / cfg.n0 - 200.0).abs() < 1e-9);
        let (sinr, sigma) = measurement_sigma(amp, 0.0, &cfg);
        assert!((10.0 * sinr.log10() - 20.85).abs() < 0.01);
        assert!((C_M_PER_NS * sigma * 1e3 - 5.3).abs() < 0.1);
        let s1 = measurement_sigma(amp, 0.0, &ChannelConfig { n0: 0.0, ..cfg.clone() });
        let s2 = measurement_sigma(2.0 * amp, 0.0, &ChannelConfig { n0: 0.0, ..cfg.clone() });
        assert!((s1.1 / s2.1 - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn pdp_integrates_to_omega() {
        let cfg = ChannelConfig::default();
        let step = 0.01;
        let total: f64 = (0..200_000).map(|i| pdp_value((i as f64 + 0.5) * step, &cfg) * step).sum();
        assert!((total / cfg.omega_1 - 1.0).abs() < 1e-6);
        assert!(pdp_value(1e4, &cfg) < 1e-150);
    }

    #[test]
    fn friis_inverse_square() {
        let cfg = ChannelConfig::default();
        let a = friis_amp_sq(10.0, 1.0, &cfg);
        let b = friis_amp_sq(20.0, 1.0, &cfg);
        assert_eq!(a, 4.0 * b);
    }

    #[test]
    fn zero_distance_gives_zero_true_differences() {
        let model = ChannelModel::new(ChannelConfig::default()).unwrap();
        let s = model.sample_scenario(&Vec3::zeros(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        for m in s.mpcs.iter().flatten() {
            assert_eq!(m.geometry.tau_b_ns - m.geometry.tau_a_ns, 0.0);
        }
    }

    #[test]
    fn aliens_keep_b_order() {
        let model = ChannelModel::new(ChannelConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = model.sample_scenario(&Vec3::new(2.5, 0.0, 0.0), &mut rng).unwrap();
        let order = |s: &Scenario| -> Vec<Vec<usize>> {
            s.mpcs
                .iter()
                .map(|ms| {
                    let mut idx: Vec<usize> = (0..ms.len()).collect();
                    idx.sort_by(|&i, &j| ms[i].tau_meas_b_ns.total_cmp(&ms[j].tau_meas_b_ns));
                    idx
                })
                .collect()
        };
        let all = model.inject_aliens(&s, 12, &mut rng).unwrap();
        assert!(all.mpcs.iter().flatten().all(|m| m.is_alien));
        assert_eq!(order(&s), order(&all));
        assert_eq!(model.inject_aliens(&s, 0, &mut rng).unwrap(), s);
        assert!(model.inject_aliens(&s, 13, &mut rng).is_err());
    }
}
