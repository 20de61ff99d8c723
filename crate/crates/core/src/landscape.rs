//! Analytic periodic landscapes with exactly known minimum sets.
//!
//! [`DentLandscape`] is the separable Morse–Bott well
//! `C*+ Σ_{i∈N} λ_i (1 − cos(θ_i − θ*_i))`, minimal exactly on the subtorus
//! `θ_N = θ*_N`. [`TubeDentLandscape`] adds a squared-distance penalty that
//! confines the minimum set to a tube over a product-of-arcs base, which is
//! the shape needed to make random flats miss the minimum set.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::oracle::{CostOracle, GroundTruth};
use crate::torus::{angle_dist, wrap_angle, FlatSpec, TorusPoint, BOUNDARY_TOL, TAU};

fn check_axes(p: usize, groups: &[&[usize]]) -> Result<()> {
    let mut seen = vec![false; p];
    for &a in groups.iter().flat_map(|g| g.iter()) {
        if a >= p {
            return Err(invalid_arg(format!("axis {a} out of range for p = {p}")));
        }
        if seen[a] {
            return Err(invalid_arg(format!("axis {a} used twice")));
        }
        seen[a] = true;
    }
    Ok(())
}

fn check_normal_part(axes: &[usize], offsets: &[f64], curvatures: &[f64]) -> Result<()> {
    if axes.len() != offsets.len() || axes.len() != curvatures.len() {
        return Err(invalid_arg(
            "normal axes, offsets and curvatures must have equal length",
        ));
    }
    if let Some(l) = curvatures.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(invalid_arg(format!("curvature {l} must be positive")));
    }
    if offsets.iter().any(|x| !x.is_finite()) {
        return Err(invalid_arg("minimizer offsets must be finite"));
    }
    Ok(())
}

/// Separable Morse–Bott dent with normal axes `N` and tangential axes free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DentLandscape {
    p: usize,
    normal_axes: Vec<usize>,
    offsets: Vec<f64>,
    curvatures: Vec<f64>,
    floor: f64,
}

impl DentLandscape {
    pub fn new(
        p: usize,
        normal_axes: Vec<usize>,
        offsets: Vec<f64>,
        curvatures: Vec<f64>,
        floor: f64,
    ) -> Result<Self> {
        if normal_axes.is_empty() {
            return Err(invalid_arg("a dent needs at least one normal axis"));
        }
        check_axes(p, &[&normal_axes])?;
        check_normal_part(&normal_axes, &offsets, &curvatures)?;
        if !floor.is_finite() {
            return Err(invalid_arg("floor must be finite"));
        }
        let offsets = offsets.into_iter().map(wrap_angle).collect();
        Ok(Self {
            p,
            normal_axes,
            offsets,
            curvatures,
            floor,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Normal rank `r = |N|`.
    pub fn rank(&self) -> usize {
        self.normal_axes.len()
    }

    pub fn normal_axes(&self) -> &[usize] {
        &self.normal_axes
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn curvatures(&self) -> &[f64] {
        &self.curvatures
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    fn normal_terms(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.normal_axes
            .iter()
            .zip(&self.offsets)
            .zip(&self.curvatures)
            .map(|((&a, &o), &l)| (a, o, l))
    }

    pub fn cost_at(&self, theta: &[f64]) -> f64 {
        self.floor
            + self
                .normal_terms()
                .map(|(a, o, l)| l * (1.0 - (theta[a] - o).cos()))
                .sum::<f64>()
    }

    /// Exact gradient.
    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.p];
        for (a, o, l) in self.normal_terms() {
            g[a] = l * (theta[a] - o).sin();
        }
        g
    }

    /// Tight Lipschitz constant `sqrt(Σ λ_i²)`.
    pub fn lipschitz_constant(&self) -> f64 {
        self.curvatures.iter().map(|l| l * l).sum::<f64>().sqrt()
    }

    pub fn distance_to_dent(&self, theta: &[f64]) -> f64 {
        self.normal_terms()
            .map(|(a, o, _)| angle_dist(theta[a], o).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// A point of the minimum set with the given tangential coordinates.
    pub fn point_on_dent(&self, tangential: &TorusPoint) -> TorusPoint {
        let mut c = tangential.coords().to_vec();
        for (a, o, _) in self.normal_terms() {
            c[a] = o;
        }
        TorusPoint::wrap(&c).expect("finite coordinates")
    }
}

impl CostOracle for DentLandscape {
    fn dim(&self) -> usize {
        self.p
    }

    fn cost(&self, theta: &TorusPoint) -> f64 {
        self.cost_at(theta.coords())
    }
}

impl GroundTruth for DentLandscape {
    fn min_value(&self) -> f64 {
        self.floor
    }

    fn max_value(&self) -> f64 {
        self.floor + 2.0 * self.curvatures.iter().sum::<f64>()
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz_constant()
    }

    fn distance_to_min_set(&self, theta: &TorusPoint) -> f64 {
        self.distance_to_dent(theta.coords())
    }

    fn flat_min_value(&self, flat: &FlatSpec) -> f64 {
        let base = flat.base().coords();
        self.floor
            + self
                .normal_terms()
                .filter(|(a, _, _)| !flat.axes().contains(a))
                .map(|(a, o, l)| l * (1.0 - (base[a] - o).cos()))
                .sum::<f64>()
    }

    fn flat_minimizer(&self, flat: &FlatSpec) -> Vec<f64> {
        let base = flat.base().coords();
        flat.axes()
            .iter()
            .map(|&axis| {
                self.normal_terms()
                    .find(|(a, _, _)| *a == axis)
                    .map_or(0.0, |(a, o, _)| wrap_angle(o - base[a]))
            })
            .collect()
    }

    fn flat_hits_min_set(&self, flat: &FlatSpec) -> bool {
        let base = flat.base().coords();
        self.normal_terms()
            .filter(|(a, _, _)| !flat.axes().contains(a))
            .all(|(a, o, _)| angle_dist(base[a], o) <= BOUNDARY_TOL)
    }
}

/// Closed arc `[start, start + length]` of the circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub start: f64,
    pub length: f64,
}

impl Arc {
    pub fn full() -> Self {
        Self {
            start: 0.0,
            length: TAU,
        }
    }

    pub fn centered(center: f64, half_width: f64) -> Self {
        Self {
            start: wrap_angle(center - half_width),
            length: 2.0 * half_width,
        }
    }

    pub fn is_full(&self) -> bool {
        self.length >= TAU - BOUNDARY_TOL
    }

    pub fn contains(&self, x: f64) -> bool {
        self.is_full() || (x - self.start).rem_euclid(TAU) <= self.length + BOUNDARY_TOL
    }

    /// Circular distance from `x` to the arc.
    pub fn dist(&self, x: f64) -> f64 {
        if self.contains(x) {
            0.0
        } else {
            angle_dist(x, self.start).min(angle_dist(x, self.start + self.length))
        }
    }

    /// The point of the arc nearest to `x`.
    pub fn nearest(&self, x: f64) -> f64 {
        if self.contains(x) {
            x
        } else if angle_dist(x, self.start) <= angle_dist(x, self.start + self.length) {
            self.start
        } else {
            wrap_angle(self.start + self.length)
        }
    }

    fn overlap(&self, other: &Arc) -> f64 {
        if self.is_full() {
            return other.length.min(TAU);
        }
        if other.is_full() {
            return self.length;
        }
        let (a0, b0) = (wrap_angle(self.start), wrap_angle(other.start));
        [-TAU, 0.0, TAU]
            .iter()
            .map(|k| {
                let lo = a0.max(b0 + k);
                let hi = (a0 + self.length).min(b0 + k + other.length);
                (hi - lo).max(0.0)
            })
            .sum()
    }
}

/// One piece of the tube: a product of base arcs with constant half-width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeCell {
    pub arcs: Vec<Arc>,
    pub half_width: f64,
}

impl TubeCell {
    pub fn measure(&self) -> f64 {
        self.arcs.iter().map(|a| a.length.min(TAU)).product()
    }

    pub fn contains(&self, b: &[f64]) -> bool {
        self.arcs.iter().zip(b).all(|(arc, &x)| arc.contains(x))
    }
}

/// A minimum set whose slices by flats are intervals of length `2ρ(b)` over
/// a base set `B ⊂ T^{m−1}`, with `ρ` piecewise constant on product-of-arcs
/// cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeDentSet {
    m: usize,
    cells: Vec<TubeCell>,
}

impl TubeDentSet {
    pub fn new(m: usize, cells: Vec<TubeCell>) -> Result<Self> {
        if m == 0 {
            return Err(invalid_arg("tube dimension m must be at least 1"));
        }
        for (i, cell) in cells.iter().enumerate() {
            if cell.arcs.len() != m - 1 {
                return Err(invalid_arg(format!(
                    "cell {i} has {} arcs, expected {}",
                    cell.arcs.len(),
                    m - 1
                )));
            }
            if !(cell.half_width > 0.0 && cell.half_width <= PI) {
                return Err(invalid_arg(format!(
                    "cell {i} half-width {} outside (0, π]",
                    cell.half_width
                )));
            }
            if let Some(a) = cell
                .arcs
                .iter()
                .find(|a| !(a.length > 0.0 && a.length <= TAU + BOUNDARY_TOL) || !a.start.is_finite())
            {
                return Err(invalid_arg(format!("cell {i} has invalid arc {a:?}")));
            }
        }
        for i in 0..cells.len() {
            for j in 0..i {
                let overlap = cells[i]
                    .arcs
                    .iter()
                    .zip(&cells[j].arcs)
                    .all(|(a, b)| a.overlap(b) > 1e-12);
                if overlap || m == 1 {
                    return Err(invalid_arg(format!("cells {j} and {i} overlap")));
                }
            }
        }
        let cells = cells
            .into_iter()
            .map(|c| TubeCell {
                arcs: c
                    .arcs
                    .into_iter()
                    .map(|a| Arc {
                        start: wrap_angle(a.start),
                        length: a.length.min(TAU),
                    })
                    .collect(),
                half_width: c.half_width,
            })
            .collect();
        Ok(Self { m, cells })
    }

    /// A band: the slice is a full circle over an arc `[0, width]` of the
    /// first base axis, and empty elsewhere.
    pub fn band(m: usize, width: f64) -> Result<Self> {
        if m < 2 {
            return Err(invalid_arg("a band needs a base of dimension at least 1"));
        }
        let mut arcs = vec![Arc::full(); m - 1];
        arcs[0] = Arc {
            start: 0.0,
            length: width,
        };
        Self::new(
            m,
            vec![TubeCell {
                arcs,
                half_width: PI,
            }],
        )
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn cells(&self) -> &[TubeCell] {
        &self.cells
    }

    fn base_volume(&self) -> f64 {
        TAU.powi(self.m as i32 - 1)
    }

    /// Measure of the base set `B`.
    pub fn base_measure(&self) -> f64 {
        self.cells.iter().map(TubeCell::measure).sum()
    }

    pub fn rho_min(&self) -> f64 {
        self.cells.iter().map(|c| c.half_width).fold(f64::INFINITY, f64::min)
    }

    pub fn rho_max(&self) -> f64 {
        self.cells.iter().map(|c| c.half_width).fold(0.0, f64::max)
    }

    pub fn cell_at(&self, b: &[f64]) -> Option<&TubeCell> {
        self.cells.iter().find(|c| c.contains(b))
    }

    /// Slice length `X(b)`: `2ρ(b)` on `B`, zero elsewhere.
    pub fn slice_length(&self, b: &[f64]) -> f64 {
        assert_eq!(b.len(), self.m - 1, "base point dimension");
        self.cell_at(b).map_or(0.0, |c| 2.0 * c.half_width)
    }

    /// `A = (ρ_max/ρ_min) (2π)^{m−1} / |B|`.
    pub fn regularity_constant(&self) -> Result<f64> {
        let measure = self.base_measure();
        if !(measure > 0.0) {
            return Err(invalid_arg("tube base set has zero measure"));
        }
        Ok(self.rho_max() / self.rho_min() * self.base_volume() / measure)
    }

    /// Probability that a uniform base point lies in `B`.
    pub fn hit_probability(&self) -> f64 {
        self.base_measure() / self.base_volume()
    }

    /// Exact `E_b X(b)` as a probability-weighted average over cells.
    pub fn mean_slice_length(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| c.measure() / self.base_volume() * 2.0 * c.half_width)
            .sum()
    }

    /// Exact `E_b X(b)²`.
    pub fn second_moment(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| c.measure() / self.base_volume() * (2.0 * c.half_width).powi(2))
            .sum()
    }

    /// `m`-dimensional volume of the tube (base measure times fiber length).
    pub fn volume(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| 2.0 * c.half_width * c.measure())
            .sum()
    }
}

/// Dent whose minimum set is `{θ_N = θ*_N} × tube`.
///
/// The tangential coordinates are the fiber axis followed by the base axes.
/// Off the tube the cost grows by `κ · dist(θ_T, tube)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeDentLandscape {
    p: usize,
    normal_axes: Vec<usize>,
    offsets: Vec<f64>,
    curvatures: Vec<f64>,
    fiber_axis: usize,
    base_axes: Vec<usize>,
    fiber_center: f64,
    tube: TubeDentSet,
    penalty: f64,
    floor: f64,
}

/// Normal-rank and tube parameters for [`TubeDentLandscape::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeDentParams {
    pub p: usize,
    pub normal_axes: Vec<usize>,
    pub offsets: Vec<f64>,
    pub curvatures: Vec<f64>,
    pub fiber_axis: usize,
    pub base_axes: Vec<usize>,
    pub fiber_center: f64,
    pub penalty: f64,
    pub floor: f64,
}

impl TubeDentLandscape {
    pub fn new(params: TubeDentParams, tube: TubeDentSet) -> Result<Self> {
        let TubeDentParams {
            p,
            normal_axes,
            offsets,
            curvatures,
            fiber_axis,
            base_axes,
            fiber_center,
            penalty,
            floor,
        } = params;
        check_axes(p, &[&normal_axes, &[fiber_axis], &base_axes])?;
        if normal_axes.len() + 1 + base_axes.len() != p {
            return Err(invalid_arg(
                "normal, fiber and base axes must partition the coordinates",
            ));
        }
        check_normal_part(&normal_axes, &offsets, &curvatures)?;
        if tube.m() != base_axes.len() + 1 {
            return Err(invalid_arg(format!(
                "tube dimension {} does not match {} base axes",
                tube.m(),
                base_axes.len()
            )));
        }
        if !(penalty > 0.0 && penalty.is_finite()) {
            return Err(invalid_arg(format!("penalty {penalty} must be positive")));
        }
        if tube.cells().is_empty() {
            return Err(invalid_arg("tube has no cells"));
        }
        if !floor.is_finite() || !fiber_center.is_finite() {
            return Err(invalid_arg("floor and fiber center must be finite"));
        }
        Ok(Self {
            p,
            normal_axes,
            offsets: offsets.into_iter().map(wrap_angle).collect(),
            curvatures,
            fiber_axis,
            base_axes,
            fiber_center: wrap_angle(fiber_center),
            tube,
            penalty,
            floor,
        })
    }

    pub fn tube(&self) -> &TubeDentSet {
        &self.tube
    }

    pub fn normal_axes(&self) -> &[usize] {
        &self.normal_axes
    }

    pub fn fiber_axis(&self) -> usize {
        self.fiber_axis
    }

    pub fn base_axes(&self) -> &[usize] {
        &self.base_axes
    }

    /// The axis set `N ∪ {fiber}` of flats whose slices are the tube fibers.
    pub fn slicing_axes(&self) -> Vec<usize> {
        let mut axes = self.normal_axes.clone();
        axes.push(self.fiber_axis);
        axes
    }

    fn normal_terms(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.normal_axes
            .iter()
            .zip(&self.offsets)
            .zip(&self.curvatures)
            .map(|((&a, &o), &l)| (a, o, l))
    }

    /// Tangential axes paired with each cell's arc on that axis.
    fn cell_arcs<'a>(&'a self, cell: &'a TubeCell) -> impl Iterator<Item = (usize, Arc)> + 'a {
        std::iter::once((
            self.fiber_axis,
            Arc::centered(self.fiber_center, cell.half_width),
        ))
        .chain(self.base_axes.iter().copied().zip(cell.arcs.iter().copied()))
    }

    fn cell_sq_dist(&self, cell: &TubeCell, theta: &[f64], skip: &[usize]) -> f64 {
        self.cell_arcs(cell)
            .filter(|(a, _)| !skip.contains(a))
            .map(|(a, arc)| arc.dist(theta[a]).powi(2))
            .sum()
    }

    /// Squared distance of the tangential coordinates to the tube.
    fn tube_sq_dist(&self, theta: &[f64], skip: &[usize]) -> f64 {
        self.tube
            .cells()
            .iter()
            .map(|c| self.cell_sq_dist(c, theta, skip))
            .fold(f64::INFINITY, f64::min)
    }

    fn normal_cost(&self, theta: &[f64], skip: &[usize]) -> f64 {
        self.normal_terms()
            .filter(|(a, _, _)| !skip.contains(a))
            .map(|(a, o, l)| l * (1.0 - (theta[a] - o).cos()))
            .sum()
    }

    pub fn cost_at(&self, theta: &[f64]) -> f64 {
        self.floor + self.normal_cost(theta, &[]) + self.penalty * self.tube_sq_dist(theta, &[])
    }

    /// Base coordinates `b` of a point.
    pub fn base_of(&self, theta: &[f64]) -> Vec<f64> {
        self.base_axes.iter().map(|&a| theta[a]).collect()
    }
}

impl CostOracle for TubeDentLandscape {
    fn dim(&self) -> usize {
        self.p
    }

    fn cost(&self, theta: &TorusPoint) -> f64 {
        self.cost_at(theta.coords())
    }
}

impl GroundTruth for TubeDentLandscape {
    fn min_value(&self) -> f64 {
        self.floor
    }

    fn max_value(&self) -> f64 {
        let m = self.tube.m() as f64;
        self.floor + 2.0 * self.curvatures.iter().sum::<f64>() + self.penalty * PI * PI * m
    }

    /// `sqrt(Σ λ_i² + (2κ π √m)²)`: the penalty gradient is at most
    /// `2κ dist ≤ 2κ π √m`, on coordinates disjoint from the normal ones.
    fn lipschitz(&self) -> f64 {
        let m = self.tube.m() as f64;
        let tangential = 2.0 * self.penalty * PI * m.sqrt();
        (self.curvatures.iter().map(|l| l * l).sum::<f64>() + tangential * tangential).sqrt()
    }

    fn distance_to_min_set(&self, theta: &TorusPoint) -> f64 {
        let c = theta.coords();
        let normal: f64 = self
            .normal_terms()
            .map(|(a, o, _)| angle_dist(c[a], o).powi(2))
            .sum();
        (normal + self.tube_sq_dist(c, &[])).sqrt()
    }

    fn flat_min_value(&self, flat: &FlatSpec) -> f64 {
        let base = flat.base().coords();
        self.floor
            + self.normal_cost(base, flat.axes())
            + self.penalty * self.tube_sq_dist(base, flat.axes())
    }

    fn flat_minimizer(&self, flat: &FlatSpec) -> Vec<f64> {
        let base = flat.base().coords();
        let best = self
            .tube
            .cells()
            .iter()
            .min_by(|a, b| {
                self.cell_sq_dist(a, base, flat.axes())
                    .total_cmp(&self.cell_sq_dist(b, base, flat.axes()))
            })
            .expect("tube has cells");
        let mut target = base.to_vec();
        for (a, o, _) in self.normal_terms() {
            target[a] = o;
        }
        for (a, arc) in self.cell_arcs(best) {
            target[a] = arc.nearest(base[a]);
        }
        flat.axes()
            .iter()
            .map(|&a| wrap_angle(target[a] - base[a]))
            .collect()
    }

    fn flat_hits_min_set(&self, flat: &FlatSpec) -> bool {
        let base = flat.base().coords();
        let normal_ok = self
            .normal_terms()
            .filter(|(a, _, _)| !flat.axes().contains(a))
            .all(|(a, o, _)| angle_dist(base[a], o) <= BOUNDARY_TOL);
        normal_ok && self.tube_sq_dist(base, flat.axes()) <= BOUNDARY_TOL * BOUNDARY_TOL
    }
}
