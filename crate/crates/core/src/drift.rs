//! Clock-laser drift with stepped linear compensation and per-shot jitter.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// RNG domain for laser jitter draws.
pub(crate) const JITTER_DOMAIN: u64 = 1;
/// RNG domain for atom-number projection noise.
pub(crate) const PROJECTION_DOMAIN: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftModel {
    /// Free-running linear drift, Hz/s.
    pub linear_rate: f64,
    /// Rate removed by the stepped compensation, Hz/s.
    pub compensation_rate: f64,
    /// Interval between compensation steps, s.
    pub compensation_step_period: f64,
    /// Uncompensated curvature, Hz/s².
    pub quadratic_residual: f64,
    /// Standard deviation of the per-shot frequency jitter, Hz.
    pub shot_jitter_sigma: f64,
    pub seed: u64,
}

impl Default for DriftModel {
    fn default() -> Self {
        DriftModel {
            linear_rate: 0.0684,
            compensation_rate: 0.0684,
            compensation_step_period: 10.0,
            quadratic_residual: 2e-5,
            shot_jitter_sigma: 1.5,
            seed: 0,
        }
    }
}

impl DriftModel {
    /// A model that never offsets the laser.
    pub fn quiet() -> Self {
        DriftModel {
            linear_rate: 0.0,
            compensation_rate: 0.0,
            compensation_step_period: 1.0,
            quadratic_residual: 0.0,
            shot_jitter_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.shot_jitter_sigma >= 0.0 && self.shot_jitter_sigma.is_finite()) {
            return Err(Error::invalid("shot_jitter_sigma", format!("must be ≥ 0, got {}", self.shot_jitter_sigma)));
        }
        if !(self.compensation_step_period > 0.0 && self.compensation_step_period.is_finite()) {
            return Err(Error::invalid(
                "compensation_step_period",
                format!("must be > 0, got {}", self.compensation_step_period),
            ));
        }
        if ![self.linear_rate, self.compensation_rate, self.quadratic_residual].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("linear_rate", "drift rates must be finite"));
        }
        Ok(())
    }
}

/// Deterministic laser offset at wall-clock time `t_wall`, Hz.
pub fn drift_offset(t_wall: f64, model: &DriftModel) -> f64 {
    let steps = (t_wall / model.compensation_step_period).floor();
    model.linear_rate * t_wall - model.compensation_rate * model.compensation_step_period * steps
        + model.quadratic_residual * t_wall * t_wall
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce5_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator keyed on `(seed, domain, index)`; independent of call order.
pub(crate) fn keyed_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(domain)));
    rng.set_stream(index);
    rng
}

/// Laser offset for one shot: drift at `t_wall` plus Gaussian jitter keyed on
/// `(seed, shot_index)`.
pub fn sample_shot_offset(shot_index: u64, t_wall: f64, model: &DriftModel) -> f64 {
    let drift = drift_offset(t_wall, model);
    if model.shot_jitter_sigma == 0.0 {
        return drift;
    }
    let z: f64 = StandardNormal.sample(&mut keyed_rng(model.seed, JITTER_DOMAIN, shot_index));
    drift + model.shot_jitter_sigma * z
}
