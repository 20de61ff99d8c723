//! Global search over randomly translated flats with a shared axis set.
//!
//! Each flat runs the single-flat engine with budget `δ_noise/ℓ`; flats whose
//! terminal minimum lies within `β_T = L r_T + 2R_T` of the best one are kept,
//! and their survivors form the output region with `ε = 5 L r_T + 8 R_T`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{run_flat, EngineConfig, FlatResult};
use crate::error::{invalid_arg, invalid_config, AletError, Result};
use crate::noise::{stream, substream_rng};
use crate::oracle::{CostOracle, GroundTruth};
use crate::torus::{FlatSpec, TorusPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalConfig {
    /// Axis set `V` of every flat (size `r + 1`).
    pub axes: Vec<usize>,
    /// Fiber-regularity constant `A ≥ 1`.
    pub regularity: f64,
    pub delta_int: f64,
    pub delta_noise: f64,
    /// Engine template; its `delta_noise` is replaced by `δ_noise/ℓ`.
    pub engine: EngineConfig,
    /// Seed of the flat translations.
    pub master_seed: u64,
}

impl GlobalConfig {
    pub fn validate(&self, p: usize) -> Result<()> {
        if !(self.regularity >= 1.0 && self.regularity.is_finite()) {
            return Err(invalid_config(format!(
                "regularity constant {} must be at least 1",
                self.regularity
            )));
        }
        for (name, v) in [("δ_int", self.delta_int), ("δ_noise", self.delta_noise)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(invalid_config(format!("{name} = {v} outside (0, 1)")));
            }
        }
        if self.delta_int + self.delta_noise > 1.0 {
            return Err(invalid_config("δ_int + δ_noise must not exceed 1"));
        }
        FlatSpec::new(self.axes.clone(), TorusPoint::zeros(p))
            .map_err(|e| invalid_config(format!("flat axes: {e}")))?;
        self.engine.validate()
    }

    pub fn n_flats(&self) -> usize {
        num_flats(self.regularity, self.delta_int)
    }

    /// Engine configuration of each flat, with the split noise budget.
    pub fn per_flat_engine(&self) -> EngineConfig {
        EngineConfig {
            delta_noise: self.delta_noise / self.n_flats() as f64,
            ..self.engine
        }
    }
}

/// `ℓ = max(1, ⌈A ln(1/δ_int)⌉)`.
pub fn num_flats(regularity: f64, delta_int: f64) -> usize {
    ((regularity * (1.0 / delta_int).ln() - 1e-12).ceil()).max(1.0) as usize
}

/// The `ℓ` flats of a run: shared axes, bases uniform on `T^p`.
pub fn sample_flats(cfg: &GlobalConfig, p: usize) -> Result<Vec<FlatSpec>> {
    (0..cfg.n_flats())
        .map(|j| {
            let mut rng = substream_rng(cfg.master_seed, &[stream::FLATS, j as u64]);
            FlatSpec::new(cfg.axes.clone(), TorusPoint::uniform(p, &mut rng))
        })
        .collect()
}

/// `β_T = L r_T + 2 R_T`.
pub fn selection_band(lipschitz: f64, r_t: f64, rad_t: f64) -> f64 {
    lipschitz * r_t + 2.0 * rad_t
}

/// Returns `J_keep` (positions in `results`) and `Ĉ_min`.
pub fn select_flats(results: &[&FlatResult], beta: f64) -> Result<(Vec<usize>, f64)> {
    if results.is_empty() {
        return Err(invalid_arg("no flat results to select from"));
    }
    let mins: Vec<f64> = results.iter().map(|r| r.min_estimate()).collect();
    let c_min = mins.iter().copied().fold(f64::INFINITY, f64::min);
    let keep = (0..results.len())
        .filter(|&j| mins[j] <= c_min + beta)
        .collect();
    Ok((keep, c_min))
}

/// Survivors of one kept flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivorPatch {
    pub flat_index: usize,
    pub radius: f64,
    pub centers: Vec<Vec<f64>>,
}

/// A flat whose run stopped with an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedFlat {
    pub flat_index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalResult {
    pub flats: Vec<FlatSpec>,
    /// Engine results, aligned with `flats`; `None` for excluded flats.
    pub results: Vec<Option<FlatResult>>,
    pub excluded: Vec<ExcludedFlat>,
    /// Indices into `flats` of `J_keep`.
    pub kept_flats: Vec<usize>,
    pub s_out: Vec<SurvivorPatch>,
    pub epsilon: f64,
    pub c_hat_min: f64,
    pub beta: f64,
    pub r_t: f64,
    /// Largest terminal confidence radius over flats.
    pub rad_t: f64,
    pub per_flat_delta: f64,
    pub total_queries: u64,
    /// False when any flat was excluded.
    pub certified: bool,
}

/// `ε = 5 L r_T + 8 R_T`.
pub fn global_epsilon(lipschitz: f64, r_t: f64, rad_t: f64) -> f64 {
    5.0 * lipschitz * r_t + 8.0 * rad_t
}

/// Runs all flats and selects the output region.
///
/// Flats that end in a certificate anomaly are excluded and the run is marked
/// non-certified; other engine errors abort the run.
pub fn run_global<O: CostOracle + ?Sized>(cfg: &GlobalConfig, oracle: &O) -> Result<GlobalResult> {
    let p = oracle.dim();
    cfg.validate(p)?;
    let flats = sample_flats(cfg, p)?;
    let engine = cfg.per_flat_engine();
    let outcomes: Vec<Result<FlatResult>> = flats
        .par_iter()
        .enumerate()
        .map(|(j, flat)| run_flat(flat, oracle, &engine, j as u64))
        .collect();

    let mut results = Vec::with_capacity(flats.len());
    let mut excluded = Vec::new();
    for (j, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(r) => results.push(Some(r)),
            Err(e @ AletError::CertificateAnomaly { .. }) => {
                excluded.push(ExcludedFlat {
                    flat_index: j,
                    reason: e.to_string(),
                });
                results.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let alive: Vec<(usize, &FlatResult)> = results
        .iter()
        .enumerate()
        .filter_map(|(j, r)| r.as_ref().map(|r| (j, r)))
        .collect();
    if alive.is_empty() {
        return Err(AletError::CertificateAnomaly {
            round: 0,
            detail: "every flat ended in a certificate anomaly".into(),
        });
    }
    let r_t = alive[0].1.terminal_radius();
    let rad_t = alive
        .iter()
        .map(|(_, r)| r.terminal_rad())
        .fold(0.0, f64::max);
    let lipschitz = engine.lipschitz;
    let beta = selection_band(lipschitz, r_t, rad_t);
    let refs: Vec<&FlatResult> = alive.iter().map(|(_, r)| *r).collect();
    let (keep, c_hat_min) = select_flats(&refs, beta)?;
    let kept_flats: Vec<usize> = keep.iter().map(|&k| alive[k].0).collect();
    let s_out = keep
        .iter()
        .map(|&k| SurvivorPatch {
            flat_index: alive[k].0,
            radius: alive[k].1.terminal_radius(),
            centers: alive[k].1.survivors.centers.clone(),
        })
        .collect();
    let total_queries = alive.iter().map(|(_, r)| r.total_queries).sum();
    Ok(GlobalResult {
        certified: excluded.is_empty(),
        flats,
        excluded,
        kept_flats,
        s_out,
        epsilon: global_epsilon(lipschitz, r_t, rad_t),
        c_hat_min,
        beta,
        r_t,
        rad_t,
        per_flat_delta: engine.delta_noise,
        total_queries,
        results,
    })
}

/// Realized quality of an output region against analytic ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthMetrics {
    /// `max C − C*` over survivor centers and sampled ball points.
    pub max_excess: f64,
    /// `max C − C*` over survivor centers only.
    pub max_center_excess: f64,
    /// Smallest distance from a survivor center to the minimum set.
    pub min_dist_to_min_set: f64,
    /// Whether any sampled flat meets the minimum set.
    pub any_flat_hits: bool,
    pub points_checked: u64,
}

/// A uniform point of the Euclidean `d`-ball of radius `r` around `center`.
pub fn sample_in_ball<R: Rng + ?Sized>(center: &[f64], r: f64, rng: &mut R) -> Vec<f64> {
    let d = center.len();
    let dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let len = r * rng.random::<f64>().powf(1.0 / d as f64);
    center
        .iter()
        .zip(&dir)
        .map(|(c, u)| c + len * u / norm)
        .collect()
}

/// Evaluates `result` against the landscape, sampling `per_ball` extra points
/// in each survivor ball.
pub fn truth_metrics<G: GroundTruth + CostOracle + ?Sized>(
    result: &GlobalResult,
    truth: &G,
    per_ball: usize,
    seed: u64,
) -> TruthMetrics {
    let c_star = truth.min_value();
    let mut m = TruthMetrics {
        max_excess: f64::NEG_INFINITY,
        max_center_excess: f64::NEG_INFINITY,
        min_dist_to_min_set: f64::INFINITY,
        any_flat_hits: result.flats.iter().any(|f| truth.flat_hits_min_set(f)),
        points_checked: 0,
    };
    for patch in &result.s_out {
        let flat = &result.flats[patch.flat_index];
        let mut rng = substream_rng(seed, &[stream::AUDIT, patch.flat_index as u64]);
        for c in &patch.centers {
            let x = flat.embed(c);
            let excess = truth.cost(&x) - c_star;
            m.max_center_excess = m.max_center_excess.max(excess);
            m.max_excess = m.max_excess.max(excess);
            m.min_dist_to_min_set = m.min_dist_to_min_set.min(truth.distance_to_min_set(&x));
            m.points_checked += 1;
            for _ in 0..per_ball {
                let y = flat.embed(&sample_in_ball(c, patch.radius, &mut rng));
                m.max_excess = m.max_excess.max(truth.cost(&y) - c_star);
                m.points_checked += 1;
            }
        }
    }
    m
}
