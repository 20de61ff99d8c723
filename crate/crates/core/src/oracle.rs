//! Cost oracles: exact evaluation, bounded-shot sampling, and ground truth.

use rand::RngCore;
use rand_distr::{Binomial, Distribution};

use crate::error::{invalid_config, Result};
use crate::torus::{FlatSpec, TorusPoint};

/// A periodic cost on `T^p` that can be evaluated exactly and sampled with
/// bounded single-shot outcomes.
pub trait CostOracle: Send + Sync {
    /// Dimension `p` of the parameter torus.
    fn dim(&self) -> usize;

    /// Exact cost `C(θ)`.
    fn cost(&self, theta: &TorusPoint) -> f64;

    /// Mean of `n_shots` independent outcomes, each in `[−range/2, range/2]`,
    /// whose expectation is `C(θ)`.
    ///
    /// The default draws from the two-point distribution on `±range/2`.
    fn sample_mean(
        &self,
        theta: &TorusPoint,
        n_shots: u64,
        range: f64,
        rng: &mut dyn RngCore,
    ) -> Result<f64> {
        two_point_mean(self.cost(theta), n_shots, range, rng)
    }

    /// Outcome range the oracle's own sampler guarantees, if it has one.
    fn native_range(&self) -> Option<f64> {
        None
    }
}

/// Analytically known optimum of a synthetic landscape.
pub trait GroundTruth {
    /// Global minimum value `C*`.
    fn min_value(&self) -> f64;

    /// Upper bound on the cost over the whole torus.
    fn max_value(&self) -> f64;

    /// A valid global Lipschitz constant.
    fn lipschitz(&self) -> f64;

    /// Geodesic distance from `θ` to the global minimum set `M`.
    fn distance_to_min_set(&self, theta: &TorusPoint) -> f64;

    /// Minimum of the cost restricted to a flat.
    fn flat_min_value(&self, flat: &FlatSpec) -> f64;

    /// One minimizer of the cost over a flat, in the flat's local chart.
    fn flat_minimizer(&self, flat: &FlatSpec) -> Vec<f64>;

    /// Whether the flat meets the global minimum set.
    fn flat_hits_min_set(&self, flat: &FlatSpec) -> bool;
}

/// Mean of `n_shots` outcomes `±range/2` with `P(+range/2) = 1/2 + c/range`.
pub fn two_point_mean(c: f64, n_shots: u64, range: f64, rng: &mut dyn RngCore) -> Result<f64> {
    let half = range / 2.0;
    if c.abs() > half * (1.0 + 1e-12) {
        return Err(invalid_config(format!(
            "cost {c} outside the outcome range [-{half}, {half}]; increase the noise range"
        )));
    }
    if n_shots == 0 {
        return Err(invalid_config("n_shots must be at least 1"));
    }
    let p = (0.5 + c / range).clamp(0.0, 1.0);
    let ups = Binomial::new(n_shots, p)
        .map_err(|e| invalid_config(format!("binomial parameters: {e}")))?
        .sample(rng);
    Ok(half * (2.0 * ups as f64 / n_shots as f64 - 1.0))
}
