//! Bounded shot noise, Hoeffding radii, and the per-round confidence schedule.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, invalid_config, AletError, Result};
use crate::oracle::CostOracle;
use crate::torus::TorusPoint;

/// Domain tags keeping independent random substreams apart.
pub mod stream {
    pub const NOISE: u64 = 0x006e_6f69_7365;
    pub const FLATS: u64 = 0x0066_6c61_7473;
    pub const SLICES: u64 = 0x0073_6c69_6365;
    pub const AUDIT: u64 = 0x0061_7564_6974;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the substream addressed by `parts` under `master`.
pub fn substream_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |h, &p| splitmix64(h ^ splitmix64(p)))
}

pub fn substream_rng(master: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(master, parts))
}

/// How confidence radii are produced round by round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum NoiseMode {
    /// Exact oracle: estimates are the true cost and radii are zero.
    Exact,
    /// Fixed `n_shots` per query; the radius follows the `α_t` schedule.
    Scheduled,
    /// Shots grow per round so the radius stays at or below `target`.
    FixedRadius { target: f64 },
}

/// Outcome range, shot budget and seed of the shot-noise model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Width `R` of the outcome range `[−R/2, R/2]`.
    pub range: f64,
    pub n_shots: u64,
    pub master_seed: u64,
    pub mode: NoiseMode,
}

impl NoiseSpec {
    pub fn exact() -> Self {
        Self {
            range: 1.0,
            n_shots: 1,
            master_seed: 0,
            mode: NoiseMode::Exact,
        }
    }

    pub fn scheduled(range: f64, n_shots: u64, master_seed: u64) -> Self {
        Self {
            range,
            n_shots,
            master_seed,
            mode: NoiseMode::Scheduled,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.mode, NoiseMode::Exact)
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_exact() {
            return Ok(());
        }
        if !(self.range > 0.0 && self.range.is_finite()) {
            return Err(invalid_config(format!("noise range {} must be positive", self.range)));
        }
        if self.n_shots == 0 {
            return Err(invalid_config("n_shots must be at least 1"));
        }
        if let NoiseMode::FixedRadius { target } = self.mode {
            if !(target > 0.0 && target.is_finite()) {
                return Err(invalid_config(format!("target radius {target} must be positive")));
            }
        }
        Ok(())
    }

    /// Shots used for every query of a round run at level `alpha`.
    pub fn shots_for_level(&self, alpha: f64) -> Result<u64> {
        match self.mode {
            NoiseMode::Exact => Ok(0),
            NoiseMode::Scheduled => Ok(self.n_shots),
            NoiseMode::FixedRadius { target } => {
                let need = shots_for_radius(target, alpha, self.range)?;
                Ok(need.max(self.n_shots))
            }
        }
    }

    /// Confidence radius shared by all queries of a round at level `alpha`.
    pub fn radius_for_level(&self, alpha: f64) -> Result<f64> {
        match self.mode {
            NoiseMode::Exact => Ok(0.0),
            _ => rad(self.shots_for_level(alpha)?, alpha, self.range),
        }
    }
}

/// Unbiased cost estimate with its Hoeffding radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyEstimate {
    pub value: f64,
    pub radius: f64,
    pub level: f64,
    pub n_shots: u64,
}

/// Where an evaluation happens; addresses its random substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EvalContext {
    pub flat: u64,
    pub round: u64,
    pub center: u64,
}

/// Hoeffding radius `R √(ln(2/α) / (2 n))`.
pub fn rad(n_shots: u64, alpha: f64, range: f64) -> Result<f64> {
    if n_shots == 0 {
        return Err(invalid_arg("n_shots must be at least 1"));
    }
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(invalid_arg(format!("confidence level {alpha} outside (0, 2]")));
    }
    if !(range > 0.0) {
        return Err(invalid_arg(format!("range {range} must be positive")));
    }
    Ok(range * ((2.0 / alpha).ln() / (2.0 * n_shots as f64)).sqrt())
}

/// Smallest shot count whose Hoeffding radius is at most `target`.
pub fn shots_for_radius(target: f64, alpha: f64, range: f64) -> Result<u64> {
    if !(target > 0.0) {
        return Err(invalid_arg(format!("target radius {target} must be positive")));
    }
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(invalid_arg(format!("confidence level {alpha} outside (0, 2]")));
    }
    let need = (range * range * (2.0 / alpha).ln() / (2.0 * target * target)).ceil();
    if !(need < 1e15) {
        return Err(AletError::ResourceLimit(format!(
            "radius {target} at level {alpha} needs {need:e} shots"
        )));
    }
    let mut n = (need as u64).max(1);
    // guard against the ceil landing one short after rounding
    while rad(n, alpha, range)? > target {
        n += 1;
    }
    Ok(n)
}

/// Per-point level `α_t = 6 δ / (π² t² N_t)` for round `t ≥ 1`.
pub fn alpha_schedule(t: u64, n_t: u64, delta_noise: f64) -> f64 {
    assert!(t >= 1 && n_t >= 1, "schedule is indexed from t = 1 with N_t ≥ 1");
    6.0 * delta_noise / (PI * PI * (t as f64).powi(2) * n_t as f64)
}

/// One noisy evaluation at level `alpha`, reproducible from the context.
pub fn noisy_eval<O: CostOracle + ?Sized>(
    oracle: &O,
    theta: &TorusPoint,
    spec: &NoiseSpec,
    ctx: EvalContext,
    alpha: f64,
) -> Result<NoisyEstimate> {
    if spec.is_exact() {
        return Ok(NoisyEstimate {
            value: oracle.cost(theta),
            radius: 0.0,
            level: alpha,
            n_shots: 0,
        });
    }
    let n_shots = spec.shots_for_level(alpha)?;
    let radius = rad(n_shots, alpha, spec.range)?;
    let mut rng = substream_rng(
        spec.master_seed,
        &[stream::NOISE, ctx.flat, ctx.round, ctx.center],
    );
    let value = oracle.sample_mean(theta, n_shots, spec.range, &mut rng)?;
    Ok(NoisyEstimate {
        value,
        radius,
        level: alpha,
        n_shots,
    })
}
