//! Slice-length statistics of tube minimum sets under random flat translations.
//!
//! For a flat with axes `N ∪ {fiber}` the slice of the minimum set is an
//! interval of length `X(b)` that depends only on the base coordinates `b`.
//! This module computes the moments of `X` exactly and by Monte Carlo, and the
//! Paley–Zygmund ratio `(E X)² / E X²` that lower-bounds the hit probability.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::landscape::TubeDentSet;
use crate::noise::{stream, substream_rng};
use crate::torus::TAU;

const CHUNK: u64 = 4096;

/// Closed-form slice model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DentSliceModel {
    /// Full-circle fibers over an arc `[0, width]` of the first base axis.
    Band { m: usize, width: f64 },
    Tube { tube: TubeDentSet },
}

impl DentSliceModel {
    pub fn tube(&self) -> Result<TubeDentSet> {
        match self {
            Self::Band { m, width } => TubeDentSet::band(*m, *width),
            Self::Tube { tube } => Ok(tube.clone()),
        }
    }

    pub fn exact(&self) -> Result<ExactMoments> {
        let t = self.tube()?;
        let mean = t.mean_slice_length();
        let second_moment = t.second_moment();
        Ok(ExactMoments {
            mean,
            second_moment,
            hit_probability: t.hit_probability(),
            pz_ratio: pz_ratio(mean, second_moment),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactMoments {
    pub mean: f64,
    pub second_moment: f64,
    pub hit_probability: f64,
    pub pz_ratio: f64,
}

/// Monte-Carlo estimates with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceStats {
    pub n_samples: u64,
    pub mean: f64,
    pub se_mean: f64,
    pub second_moment: f64,
    pub se_second_moment: f64,
    pub pz_bound: f64,
    /// Delta-method standard error of `pz_bound`.
    pub se_pz: f64,
    pub hit_freq: f64,
    pub se_hit_freq: f64,
}

fn pz_ratio(mean: f64, second_moment: f64) -> f64 {
    if second_moment > 0.0 {
        mean * mean / second_moment
    } else {
        0.0
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    fn value(&self) -> f64 {
        self.s + self.c
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Partial {
    x: Sum,
    x2: Sum,
    x3: Sum,
    x4: Sum,
    hits: u64,
}

/// Moments of `X(b)` for `b` uniform on `T^{m−1}`.
///
/// Samples are drawn in fixed chunks with their own substreams and reduced in
/// chunk order, so results do not depend on the thread count.
pub fn slice_moments(model: &DentSliceModel, n_samples: u64, seed: u64) -> Result<SliceStats> {
    if n_samples == 0 {
        return Err(invalid_arg("n_samples must be at least 1"));
    }
    let tube = model.tube()?;
    let base_dim = tube.m() - 1;
    let chunks = n_samples.div_ceil(CHUNK);
    let partials: Vec<Partial> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream_rng(seed, &[stream::SLICES, c]);
            let count = CHUNK.min(n_samples - c * CHUNK);
            let mut p = Partial::default();
            let mut b = vec![0.0; base_dim];
            for _ in 0..count {
                for v in b.iter_mut() {
                    *v = rng.random::<f64>() * TAU;
                }
                let x = tube.slice_length(&b);
                p.x.add(x);
                p.x2.add(x * x);
                p.x3.add(x * x * x);
                p.x4.add(x * x * x * x);
                p.hits += u64::from(x > 0.0);
            }
            p
        })
        .collect();
    let mut total = Partial::default();
    for p in &partials {
        total.x.add(p.x.value());
        total.x2.add(p.x2.value());
        total.x3.add(p.x3.value());
        total.x4.add(p.x4.value());
        total.hits += p.hits;
    }
    let n = n_samples as f64;
    let m1 = total.x.value() / n;
    let m2 = total.x2.value() / n;
    let m3 = total.x3.value() / n;
    let m4 = total.x4.value() / n;
    let var_x = (m2 - m1 * m1).max(0.0);
    let var_x2 = (m4 - m2 * m2).max(0.0);
    let cov = m3 - m1 * m2;
    let hit = total.hits as f64 / n;
    let pz = pz_ratio(m1, m2);
    let se_pz = if m2 > 0.0 {
        let g1 = 2.0 * m1 / m2;
        let g2 = -m1 * m1 / (m2 * m2);
        ((g1 * g1 * var_x + 2.0 * g1 * g2 * cov + g2 * g2 * var_x2).max(0.0) / n).sqrt()
    } else {
        0.0
    };
    Ok(SliceStats {
        n_samples,
        mean: m1,
        se_mean: (var_x / n).sqrt(),
        second_moment: m2,
        se_second_moment: (var_x2 / n).sqrt(),
        pz_bound: pz,
        se_pz,
        hit_freq: hit,
        se_hit_freq: (hit * (1.0 - hit) / n).sqrt(),
    })
}

/// `(E X)² / E X²`, or 0 when every slice is empty.
pub fn pz_hit_bound(stats: &SliceStats) -> f64 {
    pz_ratio(stats.mean, stats.second_moment)
}

/// Both sides of the translation-average identity
/// `E X = (2π)^{−(m−1)} K H^m(M)` with `K = 1` for coordinate-aligned sets.
pub fn translation_average_check(model: &DentSliceModel) -> Result<(f64, f64)> {
    let tube = model.tube()?;
    let lhs = tube.mean_slice_length();
    let rhs = TAU.powi(-(tube.m() as i32 - 1)) * tube.volume();
    Ok((lhs, rhs))
}

/// `sup_b X(b) / E X` and the regularity constant of the model.
pub fn fiber_regularity_check(model: &DentSliceModel) -> Result<(f64, f64)> {
    let tube = model.tube()?;
    let mu = tube.mean_slice_length();
    if !(mu > 0.0) {
        return Err(invalid_arg("slice model has zero mean slice length"));
    }
    Ok((2.0 * tube.rho_max() / mu, tube.regularity_constant()?))
}

/// Stats CSV with columns `model,n,mean,se_mean,m2,se_m2,pz,hit_freq`.
pub fn stats_csv(rows: &[(String, SliceStats)]) -> String {
    let mut out = String::from("model,n,mean,se_mean,m2,se_m2,pz,hit_freq\n");
    for (id, s) in rows {
        let _ = writeln!(
            out,
            "{id},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            s.n_samples, s.mean, s.se_mean, s.second_moment, s.se_second_moment, s.pz_bound, s.hit_freq
        );
    }
    out
}
