//! Geodesic geometry of the flat torus `T^p = (R / 2πZ)^p`.
//!
//! Points are stored with every coordinate reduced into `[0, 2π)`. Flats are
//! coordinate-aligned: a flat fixes all coordinates of a base point except the
//! ones listed in its axis set, which range over a full circle each.
//!
//! Covering nets are axis-aligned lattices. A net of radius `ρ` in dimension
//! `d` uses `n = ceil(2π / s)` points per axis with nominal spacing
//! `s = 2ρ/√d`; the points are spread uniformly, so the realized spacing is
//! `2π/n ≤ s` and every point of `T^d` lies within `ρ` of a lattice point.
//! Centers are addressed by a linear lattice index, which keeps survivor sets
//! exact across rounds.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, AletError, Result};

pub const TAU: f64 = 2.0 * PI;

/// Tolerance used when classifying values against the period boundary and
/// when comparing distances against radii.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Upper bound on the number of centers a single net may hold.
pub const MAX_NET_SIZE: u64 = 50_000_000;

/// Reduces an angle into `[0, 2π)`.
#[allow(clippy::manual_range_contains)]
pub fn wrap_angle(x: f64) -> f64 {
    let r = x - TAU * (x / TAU).floor();
    if r >= TAU - BOUNDARY_TOL || r < 0.0 {
        0.0
    } else {
        r
    }
}

/// Circular distance between two angles, in `[0, π]`.
pub fn angle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Geodesic distance between coordinate slices of equal length.
pub(crate) fn torus_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = angle_dist(*x, *y);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// A point of `T^p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TorusPoint {
    coords: Vec<f64>,
}

impl TorusPoint {
    /// Wraps raw angles into the fundamental domain.
    pub fn wrap(raw: &[f64]) -> Result<Self> {
        if raw.is_empty() {
            return Err(invalid_arg("torus point needs at least one coordinate"));
        }
        if let Some(i) = raw.iter().position(|x| !x.is_finite()) {
            return Err(invalid_arg(format!("coordinate {i} is not finite")));
        }
        Ok(Self {
            coords: raw.iter().map(|&x| wrap_angle(x)).collect(),
        })
    }

    pub fn zeros(p: usize) -> Self {
        assert!(p >= 1, "torus dimension must be positive");
        Self {
            coords: vec![0.0; p],
        }
    }

    /// Draws a point from the normalized Haar measure.
    pub fn uniform<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Self {
        assert!(p >= 1, "torus dimension must be positive");
        Self {
            coords: (0..p).map(|_| wrap_angle(rng.random::<f64>() * TAU)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

/// Reduces each coordinate modulo `2π`.
pub fn wrap(raw: &[f64]) -> Result<TorusPoint> {
    TorusPoint::wrap(raw)
}

/// `min_{k ∈ Z^p} ‖x − y + 2πk‖₂`.
pub fn geodesic_dist(x: &TorusPoint, y: &TorusPoint) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(invalid_arg(format!(
            "dimension mismatch: {} vs {}",
            x.dim(),
            y.dim()
        )));
    }
    Ok(torus_dist(&x.coords, &y.coords))
}

/// A coordinate-aligned geodesic flat `E(v, V)`: the base point `v` with the
/// coordinates listed in `axes` left free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatSpec {
    axes: Vec<usize>,
    base: TorusPoint,
}

impl FlatSpec {
    pub fn new(axes: Vec<usize>, base: TorusPoint) -> Result<Self> {
        if axes.is_empty() {
            return Err(invalid_arg("a flat needs at least one axis"));
        }
        let p = base.dim();
        for (j, &a) in axes.iter().enumerate() {
            if a >= p {
                return Err(invalid_arg(format!(
                    "axis {a} out of range for a {p}-dimensional torus"
                )));
            }
            if axes[..j].contains(&a) {
                return Err(invalid_arg(format!("axis {a} listed twice")));
            }
        }
        Ok(Self { axes, base })
    }

    /// Dimension `r + 1` of the flat.
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.base.dim()
    }

    pub fn axes(&self) -> &[usize] {
        &self.axes
    }

    pub fn base(&self) -> &TorusPoint {
        &self.base
    }

    /// Maps local chart coordinates to the ambient torus.
    pub fn embed(&self, local: &[f64]) -> TorusPoint {
        assert_eq!(local.len(), self.axes.len(), "local chart dimension");
        let mut coords = self.base.coords.clone();
        for (&axis, &offset) in self.axes.iter().zip(local) {
            coords[axis] = wrap_angle(coords[axis] + offset);
        }
        TorusPoint { coords }
    }

    /// Local chart coordinates of an ambient point lying on the flat.
    pub fn local_of(&self, point: &TorusPoint) -> Vec<f64> {
        self.axes
            .iter()
            .map(|&a| wrap_angle(point.coords[a] - self.base.coords[a]))
            .collect()
    }
}

/// A point of a flat, in the flat's local chart.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatPoint<'a> {
    flat: &'a FlatSpec,
    local: Vec<f64>,
}

impl<'a> FlatPoint<'a> {
    pub fn new(flat: &'a FlatSpec, local: &[f64]) -> Result<Self> {
        if local.len() != flat.dim() {
            return Err(invalid_arg(format!(
                "flat has dimension {}, got {} local coordinates",
                flat.dim(),
                local.len()
            )));
        }
        let local = TorusPoint::wrap(local)?.into_coords();
        Ok(Self { flat, local })
    }

    pub fn local(&self) -> &[f64] {
        &self.local
    }

    pub fn embed(&self) -> TorusPoint {
        self.flat.embed(&self.local)
    }

    /// Distance within the flat's subtorus metric.
    pub fn dist(&self, other: &FlatPoint<'_>) -> f64 {
        torus_dist(&self.local, &other.local)
    }
}

/// Embeds a flat-local point (convenience wrapper around [`FlatSpec::embed`]).
pub fn embed(q: &FlatPoint<'_>) -> TorusPoint {
    q.embed()
}

/// Uniform axis lattice on `T^d` with `per_axis` points per circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lattice {
    pub dim: usize,
    pub per_axis: u64,
}

impl Lattice {
    /// The lattice used for nets of radius `rho`.
    pub fn for_radius(dim: usize, rho: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid_arg("net dimension must be positive"));
        }
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(invalid_arg(format!("net radius must be positive, got {rho}")));
        }
        let spacing = 2.0 * rho / (dim as f64).sqrt();
        let raw = (TAU / spacing - 1e-9).ceil().max(1.0);
        if raw > MAX_NET_SIZE as f64 {
            return Err(AletError::ResourceLimit(format!(
                "net of radius {rho} needs {raw} points per axis"
            )));
        }
        Ok(Self {
            dim,
            per_axis: raw as u64,
        })
    }

    pub fn spacing(&self) -> f64 {
        TAU / self.per_axis as f64
    }

    /// Total number of lattice points, or `None` on overflow.
    pub fn size(&self) -> Option<u64> {
        let mut total: u64 = 1;
        for _ in 0..self.dim {
            total = total.checked_mul(self.per_axis)?;
        }
        Some(total)
    }

    /// Per-axis integer coordinates of a linear index (axis 0 varies fastest).
    pub fn digits(&self, index: u64) -> Vec<u64> {
        let mut rest = index;
        (0..self.dim)
            .map(|_| {
                let k = rest % self.per_axis;
                rest /= self.per_axis;
                k
            })
            .collect()
    }

    pub fn index_of(&self, digits: &[u64]) -> u64 {
        digits
            .iter()
            .rev()
            .fold(0u64, |acc, &k| acc * self.per_axis + k)
    }

    /// Local coordinates of a lattice point.
    pub fn coords(&self, index: u64) -> Vec<f64> {
        let h = self.spacing();
        self.digits(index).into_iter().map(|k| k as f64 * h).collect()
    }
}

/// A covering net: lattice centers whose `radius`-balls cover a region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringNet {
    pub lattice: Lattice,
    pub radius: f64,
    /// Sorted, distinct linear lattice indices.
    pub indices: Vec<u64>,
}

impl CoveringNet {
    pub fn dim(&self) -> usize {
        self.lattice.dim
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn center(&self, i: usize) -> Vec<f64> {
        self.lattice.coords(self.indices[i])
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        self.indices.iter().map(|&k| self.lattice.coords(k)).collect()
    }

    /// Distance from a local point to the nearest center.
    pub fn nearest_dist(&self, x: &[f64]) -> f64 {
        self.indices
            .iter()
            .map(|&k| torus_dist(&self.lattice.coords(k), x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Refines around the centers at positions `kept` of this net.
    pub fn refine(&self, kept: &[usize], r_new: f64) -> Result<CoveringNet> {
        let centers: Vec<Vec<f64>> = kept.iter().map(|&i| self.center(i)).collect();
        refine_net(self.dim(), &centers, self.radius, r_new)
    }
}

/// Full lattice net covering `T^d` at radius `rho`.
pub fn grid_net(d: usize, rho: f64) -> Result<CoveringNet> {
    let lattice = Lattice::for_radius(d, rho)?;
    let size = lattice
        .size()
        .filter(|&s| s <= MAX_NET_SIZE)
        .ok_or_else(|| {
            AletError::ResourceLimit(format!(
                "net of radius {rho} in dimension {d} exceeds {MAX_NET_SIZE} centers"
            ))
        })?;
    Ok(CoveringNet {
        lattice,
        radius: rho,
        indices: (0..size).collect(),
    })
}

/// An `r_new`-cover of `∪ B(kept_i, r_old)`: the points of the global
/// `r_new` lattice within `r_old + r_new` of some kept center.
pub fn refine_net(d: usize, kept: &[Vec<f64>], r_old: f64, r_new: f64) -> Result<CoveringNet> {
    if !(r_new < r_old) {
        return Err(invalid_arg(format!(
            "refinement must shrink the radius: r_new = {r_new}, r_old = {r_old}"
        )));
    }
    let lattice = Lattice::for_radius(d, r_new)?;
    if kept.is_empty() {
        return Ok(CoveringNet {
            lattice,
            radius: r_new,
            indices: Vec::new(),
        });
    }
    if let Some(c) = kept.iter().find(|c| c.len() != d) {
        return Err(invalid_arg(format!(
            "kept center has dimension {}, expected {d}",
            c.len()
        )));
    }

    let n = lattice.per_axis;
    let h = lattice.spacing();
    let reach = r_old + r_new;
    let half_span = (reach / h).ceil() as u64;
    let full_axis = 2 * half_span + 1 >= n;

    let mut out: Vec<u64> = Vec::new();
    let mut digits = vec![0u64; d];
    for center in kept {
        let ranges: Vec<Vec<u64>> = center
            .iter()
            .map(|&x| {
                if full_axis {
                    (0..n).collect()
                } else {
                    let c = (wrap_angle(x) / h).round() as i64;
                    (-(half_span as i64)..=half_span as i64)
                        .map(|o| (c + o).rem_euclid(n as i64) as u64)
                        .collect()
                }
            })
            .collect();
        let mut pos = vec![0usize; d];
        loop {
            for a in 0..d {
                digits[a] = ranges[a][pos[a]];
            }
            let coords: Vec<f64> = digits.iter().map(|&k| k as f64 * h).collect();
            if torus_dist(&coords, center) <= reach + BOUNDARY_TOL {
                out.push(lattice.index_of(&digits));
            }
            // odometer step
            let mut a = 0;
            loop {
                if a == d {
                    break;
                }
                pos[a] += 1;
                if pos[a] < ranges[a].len() {
                    break;
                }
                pos[a] = 0;
                a += 1;
            }
            if a == d {
                break;
            }
        }
        if out.len() as u64 > 4 * MAX_NET_SIZE {
            return Err(AletError::ResourceLimit(
                "refined net exceeds the center limit".into(),
            ));
        }
    }
    out.sort_unstable();
    out.dedup();
    if out.len() as u64 > MAX_NET_SIZE {
        return Err(AletError::ResourceLimit(format!(
            "refined net has {} centers",
            out.len()
        )));
    }
    Ok(CoveringNet {
        lattice,
        radius: r_new,
        indices: out,
    })
}

/// Volume `κ_d = π^{d/2} / Γ(d/2 + 1)` of the Euclidean unit ball.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => TAU / d as f64 * unit_ball_volume(d - 2),
    }
}

/// Volume bound `C1 κ_d^{-1} (2π/ρ)^d` on the covering number of `T^d`.
pub fn covering_number_bound(d: usize, rho: f64, c1: f64) -> Result<f64> {
    if !(rho > 0.0 && rho <= TAU) {
        return Err(invalid_arg(format!("radius {rho} outside (0, 2π]")));
    }
    if !(c1 >= 1.0) {
        return Err(invalid_arg(format!("covering constant {c1} must be ≥ 1")));
    }
    Ok(c1 / unit_ball_volume(d) * (TAU / rho).powi(d as i32))
}
