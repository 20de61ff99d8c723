//! Adaptive Lipschitz elimination on a single flat.
//!
//! Round `t` covers the current survivor set by a net at radius `r_t`, queries
//! every center at level `α = 6δ/(π² (t+1)² N_t)`, and keeps a center unless
//! `LCB > UCB* + L r_t`. The next survivor set is the current one intersected
//! with the kept balls, so survivor sets form a decreasing chain.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, invalid_config, AletError, Result};
use crate::noise::{alpha_schedule, noisy_eval, rad, shots_for_radius, EvalContext, NoiseSpec, NoisyEstimate};
use crate::oracle::CostOracle;
use crate::torus::{covering_number_bound, grid_net, torus_dist, unit_ball_volume, CoveringNet, FlatSpec, Lattice, BOUNDARY_TOL};

/// Relative slack when comparing a radius against the stopping radius.
const RADIUS_TOL: f64 = 1e-12;

/// Parameters of a single-flat run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Shrink factor `Δ > 1`.
    pub shrink: f64,
    /// Initial radius `r_0`.
    pub r0: f64,
    /// Stopping radius `r_fin`.
    pub r_fin: f64,
    /// Lipschitz bound `L`.
    pub lipschitz: f64,
    /// Failure budget `δ_noise` of the confidence intervals.
    pub delta_noise: f64,
    pub noise: NoiseSpec,
    /// Covering constant `C1 ≥ 1` used by planning.
    pub c1: f64,
}

impl EngineConfig {
    /// Defaults `Δ = 2`, `r_0 = π√d`, `C1 = 1`.
    pub fn new(d: usize, lipschitz: f64, r_fin: f64, delta_noise: f64, noise: NoiseSpec) -> Self {
        Self {
            shrink: 2.0,
            r0: default_r0(d),
            r_fin,
            lipschitz,
            delta_noise,
            noise,
            c1: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.shrink > 1.0 && self.shrink.is_finite()) {
            return Err(invalid_config(format!("shrink factor {} must exceed 1", self.shrink)));
        }
        if !(self.r_fin > 0.0 && self.r_fin <= self.r0 && self.r0.is_finite()) {
            return Err(invalid_config(format!(
                "radii must satisfy 0 < r_fin ≤ r0, got r_fin = {}, r0 = {}",
                self.r_fin, self.r0
            )));
        }
        if !(self.lipschitz >= 0.0 && self.lipschitz.is_finite()) {
            return Err(invalid_config(format!(
                "Lipschitz bound {} must be non-negative",
                self.lipschitz
            )));
        }
        if !(self.delta_noise > 0.0 && self.delta_noise < 1.0) {
            return Err(invalid_config(format!(
                "δ_noise = {} outside (0, 1)",
                self.delta_noise
            )));
        }
        if !(self.c1 >= 1.0) {
            return Err(invalid_config(format!("covering constant {} must be ≥ 1", self.c1)));
        }
        self.noise.validate()
    }

    /// Number of rounds after round 0: the smallest `T` with
    /// `r_0 / Δ^T ≤ r_fin`.
    pub fn final_round(&self) -> usize {
        let mut r = self.r0;
        let mut t = 0;
        while r > self.r_fin * (1.0 + RADIUS_TOL) {
            r /= self.shrink;
            t += 1;
        }
        t
    }
}

/// `π√d`: one ball of this radius covers `T^d`.
pub fn default_r0(d: usize) -> f64 {
    PI * (d as f64).sqrt()
}

/// Accounting for one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub radius: f64,
    /// Net size `N_t`.
    pub n_centers: usize,
    pub ucb_star: f64,
    pub kept_count: usize,
    pub queries_so_far: u64,
    /// Confidence radius shared by the round's estimates.
    pub rad: f64,
    /// Per-point level `α_t`.
    pub alpha: f64,
    pub n_shots: u64,
    pub min_lcb: f64,
    /// `3 L r_t + 4 rad_t`: the guarantee if the run stopped after this round.
    pub epsilon: f64,
}

/// Net and keep decisions of one round, retained for auditing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSnapshot {
    pub net: CoveringNet,
    /// Positions in `net` of the kept centers.
    pub kept: Vec<usize>,
    pub estimates: Vec<NoisyEstimate>,
}

impl RoundSnapshot {
    pub fn kept_centers(&self) -> Vec<Vec<f64>> {
        self.kept.iter().map(|&i| self.net.center(i)).collect()
    }
}

/// Kept centers of the final round with their estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivorSet {
    pub radius: f64,
    /// Centers in the flat's local chart.
    pub centers: Vec<Vec<f64>>,
    pub estimates: Vec<NoisyEstimate>,
}

impl SurvivorSet {
    /// Survivor with the smallest estimate (first index on ties).
    pub fn best(&self) -> Option<(&[f64], &NoisyEstimate)> {
        let mut best: Option<usize> = None;
        for (i, e) in self.estimates.iter().enumerate() {
            if best.is_none_or(|b| e.value < self.estimates[b].value) {
                best = Some(i);
            }
        }
        best.map(|i| (self.centers[i].as_slice(), &self.estimates[i]))
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatResult {
    pub flat: FlatSpec,
    pub survivors: SurvivorSet,
    pub rounds: Vec<RoundRecord>,
    pub epsilon_t: f64,
    pub total_queries: u64,
    #[serde(skip)]
    pub snapshots: Vec<RoundSnapshot>,
}

impl FlatResult {
    /// Terminal confidence radius `rad_T`.
    pub fn terminal_rad(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.rad)
    }

    pub fn terminal_radius(&self) -> f64 {
        self.survivors.radius
    }

    /// Smallest survivor estimate `min Ĉ_T`.
    pub fn min_estimate(&self) -> f64 {
        self.survivors
            .estimates
            .iter()
            .map(|e| e.value)
            .fold(f64::INFINITY, f64::min)
    }
}

/// True iff `lcb > ucb_star + L r_t`: the ball is certified suboptimal.
pub fn elimination_certificate(lcb: f64, ucb_star: f64, lipschitz: f64, r_t: f64) -> bool {
    lcb > ucb_star + lipschitz * r_t
}

/// `ε_T = 3 L r_T + 4 rad_T`.
pub fn epsilon_t(lipschitz: f64, r_t: f64, rad_t: f64) -> f64 {
    3.0 * lipschitz * r_t + 4.0 * rad_t
}

/// Runs elimination on `flat` until the radius reaches `r_fin`.
///
/// `flat_id` addresses the noise substreams, so distinct flats of one
/// multi-flat run draw independent noise.
pub fn run_flat<O: CostOracle + ?Sized>(
    flat: &FlatSpec,
    oracle: &O,
    cfg: &EngineConfig,
    flat_id: u64,
) -> Result<FlatResult> {
    run_flat_rounds(flat, oracle, cfg, flat_id, None)
}

/// As [`run_flat`], stopping early after round `max_round` if given. Every
/// prefix of a run is itself a valid run at the radius reached.
pub fn run_flat_rounds<O: CostOracle + ?Sized>(
    flat: &FlatSpec,
    oracle: &O,
    cfg: &EngineConfig,
    flat_id: u64,
    max_round: Option<usize>,
) -> Result<FlatResult> {
    cfg.validate()?;
    if oracle.dim() != flat.ambient_dim() {
        return Err(invalid_config(format!(
            "oracle dimension {} does not match flat ambient dimension {}",
            oracle.dim(),
            flat.ambient_dim()
        )));
    }
    let d = flat.dim();
    let mut net = grid_net(d, cfg.r0)?;
    if net.is_empty() {
        return Err(invalid_config("initial net is empty"));
    }

    let mut rounds = Vec::new();
    let mut snapshots: Vec<RoundSnapshot> = Vec::new();
    let mut queries = 0u64;
    // interval containing the flat minimum on the good event
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    let mut t = 0usize;
    loop {
        let r_t = net.radius;
        let n_t = net.len();
        let alpha = alpha_schedule(t as u64 + 1, n_t as u64, cfg.delta_noise);
        let estimates: Vec<NoisyEstimate> = net
            .indices
            .par_iter()
            .map(|&idx| {
                let x = flat.embed(&net.lattice.coords(idx));
                let ctx = EvalContext {
                    flat: flat_id,
                    round: t as u64,
                    center: idx,
                };
                noisy_eval(oracle, &x, &cfg.noise, ctx, alpha)
            })
            .collect::<Result<_>>()?;
        queries += n_t as u64;

        let rad_t = estimates.iter().map(|e| e.radius).fold(0.0, f64::max);
        let ucb_star = estimates
            .iter()
            .map(|e| e.value + e.radius)
            .fold(f64::INFINITY, f64::min);
        let min_lcb = estimates
            .iter()
            .map(|e| e.value - e.radius)
            .fold(f64::INFINITY, f64::min);
        let kept: Vec<usize> = (0..n_t)
            .filter(|&i| {
                let e = &estimates[i];
                !elimination_certificate(e.value - e.radius, ucb_star, cfg.lipschitz, r_t)
            })
            .collect();
        if kept.is_empty() {
            return Err(AletError::CertificateAnomaly {
                round: t,
                detail: format!("all {n_t} centers eliminated"),
            });
        }
        lower = lower.max(min_lcb - cfg.lipschitz * r_t);
        upper = upper.min(ucb_star);
        if lower > upper + BOUNDARY_TOL * (1.0 + upper.abs()) {
            return Err(AletError::CertificateAnomaly {
                round: t,
                detail: format!(
                    "confidence bounds are inconsistent: lower bound {lower} exceeds upper bound {upper}"
                ),
            });
        }

        rounds.push(RoundRecord {
            t,
            radius: r_t,
            n_centers: n_t,
            ucb_star,
            kept_count: kept.len(),
            queries_so_far: queries,
            rad: rad_t,
            alpha,
            n_shots: estimates.first().map_or(0, |e| e.n_shots),
            min_lcb,
            epsilon: epsilon_t(cfg.lipschitz, r_t, rad_t),
        });
        let done = r_t <= cfg.r_fin * (1.0 + RADIUS_TOL) || max_round.is_some_and(|m| t >= m);
        let next = if done {
            None
        } else {
            Some(net.refine(&kept, r_t / cfg.shrink)?)
        };
        snapshots.push(RoundSnapshot {
            net,
            kept,
            estimates,
        });
        match next {
            Some(n) => net = n,
            None => break,
        }
        t += 1;
    }

    let last = snapshots.last().expect("at least one round");
    let survivors = SurvivorSet {
        radius: last.net.radius,
        centers: last.kept_centers(),
        estimates: last.kept.iter().map(|&i| last.estimates[i]).collect(),
    };
    let record = rounds.last().expect("at least one round");
    Ok(FlatResult {
        flat: flat.clone(),
        epsilon_t: record.epsilon,
        survivors,
        rounds,
        total_queries: queries,
        snapshots,
    })
}

/// Checks that survivor sets are nested round over round.
///
/// For each round `t + 1`: the net is exactly the refinement of round `t`'s
/// kept centers, the kept centers belong to that net, and every kept center
/// lies within `r_t + r_{t+1}` of a round-`t` kept center.
pub fn check_monotonicity(result: &FlatResult, shrink: f64) -> std::result::Result<(), String> {
    for (t, pair) in result.snapshots.windows(2).enumerate() {
        let (prev, next) = (&pair[0], &pair[1]);
        let expect = prev
            .net
            .refine(&prev.kept, prev.net.radius / shrink)
            .map_err(|e| e.to_string())?;
        if expect.indices != next.net.indices || expect.lattice != next.net.lattice {
            return Err(format!("round {}: net is not the refinement of round {t}", t + 1));
        }
        if next.kept.iter().any(|&i| i >= next.net.len()) {
            return Err(format!("round {}: kept position outside the net", t + 1));
        }
        let parents = prev.kept_centers();
        let reach = prev.net.radius + next.net.radius + BOUNDARY_TOL;
        for c in next.kept_centers() {
            if !parents.iter().any(|p| torus_dist(p, &c) <= reach) {
                return Err(format!(
                    "round {}: kept center {c:?} outside the round-{t} kept balls",
                    t + 1
                ));
            }
        }
    }
    Ok(())
}

/// Resolution plan for a target accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolutionPlan {
    /// Radius `ε/(6L)` that spends half the budget on discretization.
    pub r_target: f64,
    /// Terminal radius actually reached, `r_0 / Δ^T ≤ r_target`.
    pub r_final: f64,
    pub rounds: usize,
    /// Shots per query so that `4 rad_T ≤ ε/2`.
    pub n_shots: u64,
    /// Pre-estimate of the terminal net size used for `α_T`.
    pub n_final_estimate: u64,
}

/// Splits `ε` evenly between `3 L r_T` and `4 rad_T`.
///
/// `N_T` is estimated as the larger of the volume bound and the full lattice
/// at the terminal radius, so the planned shots cover any survivor pattern.
#[allow(clippy::too_many_arguments)]
pub fn plan_resolution(
    epsilon: f64,
    lipschitz: f64,
    range: f64,
    delta_noise: f64,
    d: usize,
    shrink: f64,
    r0: f64,
    c1: f64,
) -> Result<ResolutionPlan> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid_arg(format!("target ε = {epsilon} must be positive")));
    }
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(invalid_arg(format!("Lipschitz bound {lipschitz} must be positive")));
    }
    if !(shrink > 1.0) || !(r0 > 0.0) {
        return Err(invalid_arg("need Δ > 1 and r0 > 0"));
    }
    if !(delta_noise > 0.0 && delta_noise < 1.0) {
        return Err(invalid_arg(format!("δ_noise = {delta_noise} outside (0, 1)")));
    }
    let r_target = epsilon / (6.0 * lipschitz);
    let rounds = if r0 <= r_target {
        0
    } else {
        ((r0 / r_target).ln() / shrink.ln() - 1e-9).ceil() as usize
    };
    let r_final = r0 / shrink.powi(rounds as i32);
    let volume = covering_number_bound(d, r_final.min(std::f64::consts::TAU), c1)?;
    let grid = Lattice::for_radius(d, r_final)?
        .size()
        .map_or(f64::INFINITY, |s| s as f64);
    let n_est = volume.max(grid).ceil();
    if !(n_est < 1e18) {
        return Err(AletError::ResourceLimit(format!(
            "terminal net estimate {n_est:e} is too large"
        )));
    }
    let n_final_estimate = n_est as u64;
    let alpha = alpha_schedule(rounds as u64 + 1, n_final_estimate.max(1), delta_noise);
    let n_shots = shots_for_radius(epsilon / 8.0, alpha, range)?;
    debug_assert!(rad(n_shots, alpha, range)? <= epsilon / 8.0);
    Ok(ResolutionPlan {
        r_target,
        r_final,
        rounds,
        n_shots,
        n_final_estimate,
    })
}

/// `C0 κ_d^{-1} (6πL/ε_eff)^d`.
pub fn query_bound(d: usize, lipschitz: f64, eps_eff: f64, c0: f64) -> Result<f64> {
    if !(eps_eff > 0.0) || d == 0 {
        return Err(invalid_arg("need ε_eff > 0 and d ≥ 1"));
    }
    Ok(c0 / unit_ball_volume(d) * (6.0 * PI * lipschitz / eps_eff).powi(d as i32))
}

/// Natural logarithm of [`query_bound`], which grows like
/// `d log d + d log(L/ε_eff)`.
pub fn query_bound_log(d: usize, lipschitz: f64, eps_eff: f64, c0: f64) -> Result<f64> {
    if !(eps_eff > 0.0) || d == 0 || !(lipschitz > 0.0) || !(c0 > 0.0) {
        return Err(invalid_arg("need ε_eff, L, C0 > 0 and d ≥ 1"));
    }
    Ok(c0.ln() - unit_ball_volume(d).ln() + d as f64 * (6.0 * PI * lipschitz / eps_eff).ln())
}

/// Per-round trace as CSV with columns `t,r_t,N_t,ucb_star,kept,queries_cum`.
pub fn trace_csv(rounds: &[RoundRecord]) -> String {
    let mut out = String::from("t,r_t,N_t,ucb_star,kept,queries_cum\n");
    for r in rounds {
        let _ = writeln!(
            out,
            "{},{:.16e},{},{:.16e},{},{}",
            r.t, r.radius, r.n_centers, r.ucb_star, r.kept_count, r.queries_so_far
        );
    }
    out
}
