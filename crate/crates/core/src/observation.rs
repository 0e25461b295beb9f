//! What the estimators get to see: measured per-side MPC sets grouped by observer.


use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// One measured MPC on one side (node A or node B).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasuredMpc {
    pub delay_ns: f64,
    pub dir: Option<Vec3>,
    pub sigma_ns: Option<f64>,
    /// Direction at the observer, used only by the optional association term.
    pub observer_dir: Option<Vec3>,
}

impl MeasuredMpc {
    pub fn new(delay_ns: f64) -> Self {
        Self {
            delay_ns,
            dir: None,
            sigma_ns: None,
            observer_dir: None,
        }
    }

    pub fn with_dir(mut self, dir: Vec3) -> Self {
        self.dir = Some(dir);
        self
    }

    pub fn with_sigma(mut self, sigma_ns: f64) -> Self {
        self.sigma_ns = Some(sigma_ns);
        self
    }

    pub(crate) fn sigma(&self) -> f64 {
        self.sigma_ns.unwrap_or(0.0)
    }
}

/// The A-side and B-side MPC sets of one observer.
///
/// When the sets are associated, `a[k]` and `b[k]` belong to the same path.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObserverSets {
    pub a: Vec<MeasuredMpc>,
    pub b: Vec<MeasuredMpc>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Observation {
    pub observers: Vec<ObserverSets>,
}

/// A paired MPC with both directions available.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedMpc {
    pub observer: usize,
    pub tau_a_ns: f64,
    pub tau_b_ns: f64,
    pub dir_a: Vec3,
    pub dir_b: Vec3,
    pub sigma_a_ns: f64,
    pub sigma_b_ns: f64,
}

impl PairedMpc {
    pub fn delta_ns(&self) -> f64 {
        self.tau_b_ns - self.tau_a_ns
    }
}

impl Observation {
    pub fn n_observers(&self) -> usize {
        self.observers.len()
    }

    /// Checks that every observer has equally many MPCs on both sides.
    pub fn require_paired(&self) -> Result<()> {
        for (o, s) in self.observers.iter().enumerate() {
            if s.a.len() != s.b.len() {
                return Err(Error::CountMismatch {
                    observer: o,
                    a: s.a.len(),
                    b: s.b.len(),
                });
            }
        }
        Ok(())
    }

    /// Number of associated pairs.
    pub fn total_pairs(&self) -> usize {
        self.observers.iter().map(|s| s.a.len().min(s.b.len())).sum()
    }

    /// All pairs in observer order, with directions.
    pub fn paired_mpcs(&self) -> Result<Vec<PairedMpc>> {
        self.require_paired()?;
        let mut out = Vec::with_capacity(self.total_pairs());
        for (o, s) in self.observers.iter().enumerate() {
            for (a, b) in s.a.iter().zip(&s.b) {
                let (Some(dir_a), Some(dir_b)) = (a.dir, b.dir) else {
                    return Err(Error::MissingDirections);
                };
                out.push(PairedMpc {
                    observer: o,
                    tau_a_ns: a.delay_ns,
                    tau_b_ns: b.delay_ns,
                    dir_a,
                    dir_b,
                    sigma_a_ns: a.sigma(),
                    sigma_b_ns: b.sigma(),
                });
            }
        }
        Ok(out)
    }

    /// Copy with directions stripped, as seen by a delay-only receiver.
    pub fn without_directions(&self) -> Observation {
        let mut out = self.clone();
        for s in &mut out.observers {
            for m in s.a.iter_mut().chain(s.b.iter_mut()) {
                m.dir = None;
                m.observer_dir = None;
            }
        }
        out
    }
}
