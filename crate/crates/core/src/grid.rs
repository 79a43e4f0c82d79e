//! Uniform weighted grids on boxes in R^d, node sets and node fields.
//!
//! Node ordering is row-major with the last axis varying fastest. Node
//! measures use the trapezoidal rule (half weight per box face a node lies
//! on) times the cell average of the weight, so the total measure of a
//! constant-weight box is its volume.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{FinepotError, Result};

/// Padded coordinates; axes beyond `dim` are zero.
pub type Point = [f64; 3];

/// Sub-samples per axis used to average the weight over a node's cell.
const WEIGHT_QUADRATURE: usize = 4;

/// Converts a coordinate slice into a padded [`Point`].
pub fn to_point(x: &[f64]) -> Point {
    let mut out = [0.0; 3];
    for (o, v) in out.iter_mut().zip(x) {
        *o = *v;
    }
    out
}

pub fn distance(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    Constant,
    /// w(x) = |x - center|^alpha
    Power { alpha: f64, center: Vec<f64> },
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec::Constant
    }
}

impl WeightSpec {
    /// Muckenhoupt-type window `-dim < alpha < dim (p - 1)`.
    pub fn check_admissible(&self, dim: usize, p: f64) -> Result<()> {
        if p <= 1.0 || !p.is_finite() {
            return Err(FinepotError::InvalidExponent(p));
        }
        if let WeightSpec::Power { alpha, .. } = self {
            let lo = -(dim as f64);
            let hi = dim as f64 * (p - 1.0);
            if !(*alpha > lo && *alpha < hi) {
                return Err(FinepotError::InadmissibleWeight {
                    alpha: *alpha,
                    dim,
                    p,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, WeightSpec::Constant)
    }

    pub fn eval(&self, x: &Point) -> f64 {
        match self {
            WeightSpec::Constant => 1.0,
            WeightSpec::Power { alpha, center } => distance(x, &to_point(center)).powf(*alpha),
        }
    }
}

/// The discrete ambient space: a uniform grid with node measures.
#[derive(Clone)]
pub struct GridDomain {
    dim: usize,
    shape: [usize; 3],
    strides: [usize; 3],
    lower: Point,
    upper: Point,
    h: f64,
    weight: WeightSpec,
    measure: Vec<f64>,
    /// bit `a` set when the node is the last one along axis `a`
    last: Vec<u8>,
    epsilon_floor: f64,
}

impl fmt::Debug for GridDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridDomain")
            .field("shape", &self.shape())
            .field("bounds", &self.bounds())
            .field("h", &self.h)
            .field("weight", &self.weight)
            .finish()
    }
}

impl GridDomain {
    /// Builds the grid. The weight exponent is checked for local
    /// integrability here; the p-dependent admissibility window is checked by
    /// [`GridDomain::check_p`] when an operation fixes p.
    pub fn new(
        dim: usize,
        bounds: &[(f64, f64)],
        resolution: &[usize],
        weight: WeightSpec,
    ) -> Result<Arc<GridDomain>> {
        if !(1..=3).contains(&dim) {
            return Err(FinepotError::InvalidDomain(format!("dim must be 1..=3, got {dim}")));
        }
        if bounds.len() != dim || resolution.len() != dim {
            return Err(FinepotError::InvalidDomain(format!(
                "expected {dim} bounds and resolutions, got {} and {}",
                bounds.len(),
                resolution.len()
            )));
        }
        let mut shape = [1usize; 3];
        let mut lower = [0.0; 3];
        let mut upper = [0.0; 3];
        let mut h = f64::NAN;
        for a in 0..dim {
            let (lo, hi) = bounds[a];
            let n = resolution[a];
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(FinepotError::InvalidDomain(format!(
                    "degenerate bounds [{lo}, {hi}] on axis {a}"
                )));
            }
            if n < 3 {
                return Err(FinepotError::InvalidDomain(format!(
                    "need at least 3 nodes per axis, got {n} on axis {a}"
                )));
            }
            let ha = (hi - lo) / (n - 1) as f64;
            if a == 0 {
                h = ha;
            } else if ((ha - h) / h).abs() > 1e-9 {
                return Err(FinepotError::InvalidDomain(format!(
                    "spacing must be uniform across axes ({h} vs {ha})"
                )));
            }
            shape[a] = n;
            lower[a] = lo;
            upper[a] = hi;
        }
        if let WeightSpec::Power { alpha, center } = &weight {
            if center.len() != dim {
                return Err(FinepotError::InvalidDomain(format!(
                    "weight center has {} coordinates, expected {dim}",
                    center.len()
                )));
            }
            if !alpha.is_finite() || *alpha <= -(dim as f64) {
                return Err(FinepotError::InadmissibleWeight {
                    alpha: *alpha,
                    dim,
                    p: f64::NAN,
                    lo: -(dim as f64),
                    hi: f64::INFINITY,
                });
            }
        }
        let strides = [shape[1] * shape[2], shape[2], 1];
        let len = shape[0] * shape[1] * shape[2];
        let mut grid = GridDomain {
            dim,
            shape,
            strides,
            lower,
            upper,
            h,
            weight,
            measure: Vec::with_capacity(len),
            last: Vec::with_capacity(len),
            epsilon_floor: 1e-8,
        };
        for i in 0..len {
            let idx = grid.multi_index(i);
            let mut bits = 0u8;
            for a in 0..dim {
                if idx[a] == shape[a] - 1 {
                    bits |= 1 << a;
                }
            }
            grid.last.push(bits);
            let m = grid.cell_measure(&idx);
            grid.measure.push(m);
        }
        Ok(Arc::new(grid))
    }

    /// Convenience constructor for a cube `[lo, hi]^dim` with `n` nodes per axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, n: usize, weight: WeightSpec) -> Result<Arc<GridDomain>> {
        GridDomain::new(dim, &vec![(lo, hi); dim], &vec![n; dim], weight)
    }

    fn cell_measure(&self, idx: &[usize; 3]) -> f64 {
        let h = self.h;
        let mut face_factor = 1.0;
        // Cell extent along each axis, clipped to the box.
        let mut cell_lo = [0.0; 3];
        let mut cell_hi = [0.0; 3];
        for a in 0..self.dim {
            let x = self.lower[a] + idx[a] as f64 * h;
            cell_lo[a] = (x - 0.5 * h).max(self.lower[a]);
            cell_hi[a] = (x + 0.5 * h).min(self.upper[a]);
            if idx[a] == 0 || idx[a] == self.shape[a] - 1 {
                face_factor *= 0.5;
            }
        }
        let vol = h.powi(self.dim as i32) * face_factor;
        if self.weight.is_constant() {
            return vol;
        }
        let q = WEIGHT_QUADRATURE;
        let mut total = 0.0;
        let mut count = 0usize;
        let reps = [q, if self.dim > 1 { q } else { 1 }, if self.dim > 2 { q } else { 1 }];
        for s0 in 0..reps[0] {
            for s1 in 0..reps[1] {
                for s2 in 0..reps[2] {
                    let s = [s0, s1, s2];
                    let mut x = [0.0; 3];
                    for a in 0..self.dim {
                        let t = (s[a] as f64 + 0.5) / q as f64;
                        x[a] = cell_lo[a] + t * (cell_hi[a] - cell_lo[a]);
                    }
                    total += self.weight.eval(&x);
                    count += 1;
                }
            }
        }
        vol * total / count as f64
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape[..self.dim]
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        (0..self.dim).map(|a| (self.lower[a], self.upper[a])).collect()
    }

    pub fn weight(&self) -> &WeightSpec {
        &self.weight
    }

    pub fn epsilon_floor(&self) -> f64 {
        self.epsilon_floor
    }

    pub fn measure(&self, i: usize) -> f64 {
        self.measure[i]
    }

    pub fn measures(&self) -> &[f64] {
        &self.measure
    }

    pub fn total_measure(&self) -> f64 {
        self.measure.iter().sum()
    }

    /// Longest box edge.
    pub fn extent(&self) -> f64 {
        (0..self.dim)
            .map(|a| self.upper[a] - self.lower[a])
            .fold(0.0, f64::max)
    }

    pub fn check_p(&self, p: f64) -> Result<()> {
        self.weight.check_admissible(self.dim, p)
    }

    pub fn multi_index(&self, i: usize) -> [usize; 3] {
        [
            i / self.strides[0],
            (i / self.strides[1]) % self.shape[1],
            i % self.shape[2],
        ]
    }

    pub fn flat_index(&self, idx: &[usize; 3]) -> usize {
        idx[0] * self.strides[0] + idx[1] * self.strides[1] + idx[2]
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn coords(&self, i: usize) -> Point {
        let idx = self.multi_index(i);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.lower[a] + idx[a] as f64 * self.h;
        }
        x
    }

    pub fn is_last(&self, i: usize, axis: usize) -> bool {
        self.last[i] & (1 << axis) != 0
    }

    /// True when the node lies on a face of the box.
    pub fn on_box_face(&self, i: usize) -> bool {
        let idx = self.multi_index(i);
        (0..self.dim).any(|a| idx[a] == 0 || idx[a] == self.shape[a] - 1)
    }

    /// The difference pair `(j0, j1)` used for the gradient of node `i` along
    /// `axis`: forward `(i, i+e)` except on the last node, where the
    /// backward pair `(i-e, i)` is used.
    #[inline]
    pub fn stencil_pair(&self, i: usize, axis: usize) -> (usize, usize) {
        let s = self.strides[axis];
        if self.is_last(i, axis) {
            (i - s, i)
        } else {
            (i, i + s)
        }
    }

    /// Node nearest to a point (clamped into the box).
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let x = to_point(x);
        let mut idx = [0usize; 3];
        for a in 0..self.dim {
            let t = ((x[a] - self.lower[a]) / self.h).round();
            idx[a] = t.clamp(0.0, (self.shape[a] - 1) as f64) as usize;
        }
        self.flat_index(&idx)
    }

    /// Whether the closed ball lies inside the box (up to rounding).
    pub fn contains_ball(&self, x: &[f64], r: f64) -> bool {
        let x = to_point(x);
        let slack = 1e-9 * self.h;
        (0..self.dim).all(|a| x[a] - r >= self.lower[a] - slack && x[a] + r <= self.upper[a] + slack)
    }

    /// Visits the nodes whose coordinates lie in the axis-aligned box
    /// `[x - r, x + r]`, in increasing index order.
    pub fn for_each_in_cube(&self, x: &Point, r: f64, mut f: impl FnMut(usize)) {
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for a in 0..3 {
            if a >= self.dim {
                lo[a] = 0;
                hi[a] = 0;
                continue;
            }
            let l = ((x[a] - r - self.lower[a]) / self.h).ceil() - 1.0;
            let u = ((x[a] + r - self.lower[a]) / self.h).floor() + 1.0;
            let max = (self.shape[a] - 1) as f64;
            if u < 0.0 || l > max {
                return;
            }
            lo[a] = l.clamp(0.0, max) as usize;
            hi[a] = u.clamp(0.0, max) as usize;
        }
        for i0 in lo[0]..=hi[0] {
            for i1 in lo[1]..=hi[1] {
                for i2 in lo[2]..=hi[2] {
                    f(self.flat_index(&[i0, i1, i2]));
                }
            }
        }
    }

    /// Measure of the nodes with `|y - x| < r`.
    pub fn ball_measure(&self, x: &[f64], r: f64) -> f64 {
        let c = to_point(x);
        let mut m = 0.0;
        self.for_each_in_cube(&c, r, |i| {
            if distance(&self.coords(i), &c) < r {
                m += self.measure[i];
            }
        });
        m
    }

    /// Largest ratio mu(B(x,2r)) / mu(B(x,r)) over balls centred at the
    /// given points with radii between `4h` and a quarter of the box extent,
    /// restricted to balls with B(x,2r) inside the box.
    pub fn doubling_constant_estimate(&self, centers: &[Vec<f64>]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in centers {
            let mut r = 4.0 * self.h;
            while r <= 0.25 * self.extent() {
                if self.contains_ball(c, 2.0 * r) {
                    let inner = self.ball_measure(c, r);
                    if inner > 0.0 {
                        worst = worst.max(self.ball_measure(c, 2.0 * r) / inner);
                    }
                }
                r *= 1.5;
            }
        }
        worst
    }
}

/// Structural equality of two grids (same lattice and weight).
pub fn same_domain(a: &Arc<GridDomain>, b: &Arc<GridDomain>) -> bool {
    Arc::ptr_eq(a, b)
        || (a.dim == b.dim && a.shape == b.shape && a.lower == b.lower && a.h == b.h && a.weight == b.weight)
}

/// A subset of grid nodes.
#[derive(Debug, Clone)]
pub struct NodeSet {
    domain: Arc<GridDomain>,
    mask: Vec<bool>,
}

impl PartialEq for NodeSet {
    fn eq(&self, other: &Self) -> bool {
        same_domain(&self.domain, &other.domain) && self.mask == other.mask
    }
}

impl NodeSet {
    pub fn empty(domain: &Arc<GridDomain>) -> NodeSet {
        NodeSet {
            domain: domain.clone(),
            mask: vec![false; domain.len()],
        }
    }

    pub fn full(domain: &Arc<GridDomain>) -> NodeSet {
        NodeSet {
            domain: domain.clone(),
            mask: vec![true; domain.len()],
        }
    }

    pub fn from_mask(domain: &Arc<GridDomain>, mask: Vec<bool>) -> Result<NodeSet> {
        if mask.len() != domain.len() {
            return Err(FinepotError::Precondition(format!(
                "mask has {} entries, domain has {} nodes",
                mask.len(),
                domain.len()
            )));
        }
        Ok(NodeSet {
            domain: domain.clone(),
            mask,
        })
    }

    /// Node-centre rasterization of a predicate on coordinates.
    pub fn from_predicate(domain: &Arc<GridDomain>, pred: impl Fn(&Point) -> bool) -> NodeSet {
        let mask = (0..domain.len()).map(|i| pred(&domain.coords(i))).collect();
        NodeSet {
            domain: domain.clone(),
            mask,
        }
    }

    pub fn from_indices(domain: &Arc<GridDomain>, indices: &[usize]) -> NodeSet {
        let mut s = NodeSet::empty(domain);
        for &i in indices {
            s.mask[i] = true;
        }
        s
    }

    /// Closed ball `|y - x| <= r`.
    pub fn closed_ball(domain: &Arc<GridDomain>, x: &[f64], r: f64) -> NodeSet {
        let c = to_point(x);
        let mut s = NodeSet::empty(domain);
        let tol = 1e-12 * domain.h();
        domain.for_each_in_cube(&c, r, |i| {
            if distance(&domain.coords(i), &c) <= r + tol {
                s.mask[i] = true;
            }
        });
        s
    }

    /// Open ball `|y - x| < r`.
    pub fn open_ball(domain: &Arc<GridDomain>, x: &[f64], r: f64) -> NodeSet {
        let c = to_point(x);
        let mut s = NodeSet::empty(domain);
        let tol = 1e-12 * domain.h();
        domain.for_each_in_cube(&c, r, |i| {
            if distance(&domain.coords(i), &c) < r - tol {
                s.mask[i] = true;
            }
        });
        s
    }

    /// Nodes not on any face of the box.
    pub fn box_interior(domain: &Arc<GridDomain>) -> NodeSet {
        let mask = (0..domain.len()).map(|i| !domain.on_box_face(i)).collect();
        NodeSet {
            domain: domain.clone(),
            mask,
        }
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.mask[i]
    }

    pub fn insert(&mut self, i: usize) {
        self.mask[i] = true;
    }

    pub fn remove(&mut self, i: usize) {
        self.mask[i] = false;
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn is_all(&self) -> bool {
        self.mask.iter().all(|&b| b)
    }

    pub fn indices(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn measure(&self) -> f64 {
        self.iter().map(|i| self.domain.measure(i)).sum()
    }

    fn check(&self, other: &NodeSet) -> Result<()> {
        if same_domain(&self.domain, &other.domain) {
            Ok(())
        } else {
            Err(FinepotError::DomainMismatch)
        }
    }

    fn zip(&self, other: &NodeSet, f: impl Fn(bool, bool) -> bool) -> Result<NodeSet> {
        self.check(other)?;
        let mask = self.mask.iter().zip(&other.mask).map(|(&a, &b)| f(a, b)).collect();
        Ok(NodeSet {
            domain: self.domain.clone(),
            mask,
        })
    }

    pub fn union(&self, other: &NodeSet) -> Result<NodeSet> {
        self.zip(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &NodeSet) -> Result<NodeSet> {
        self.zip(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &NodeSet) -> Result<NodeSet> {
        self.zip(other, |a, b| a && !b)
    }

    pub fn complement(&self) -> NodeSet {
        NodeSet {
            domain: self.domain.clone(),
            mask: self.mask.iter().map(|&b| !b).collect(),
        }
    }

    pub fn is_subset(&self, other: &NodeSet) -> Result<bool> {
        self.check(other)?;
        Ok(self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b))
    }
}

/// Per-node real values. Infinite values are only meaningful where the
/// consuming operation documents them (obstacles may be `-inf`).
#[derive(Clone)]
pub struct ScalarField {
    domain: Arc<GridDomain>,
    values: Vec<f64>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 8;
        write!(f, "ScalarField {{ shape: {:?}, values: ", self.domain.shape())?;
        let mut list = f.debug_list();
        list.entries(self.values.iter().take(SHOWN));
        if self.values.len() > SHOWN {
            list.entry(&format_args!("... {} more", self.values.len() - SHOWN));
        }
        list.finish()?;
        f.write_str(" }")
    }
}

impl PartialEq for ScalarField {
    fn eq(&self, other: &Self) -> bool {
        same_domain(&self.domain, &other.domain) && self.values == other.values
    }
}

impl ScalarField {
    pub fn constant(domain: &Arc<GridDomain>, c: f64) -> ScalarField {
        ScalarField {
            domain: domain.clone(),
            values: vec![c; domain.len()],
        }
    }

    pub fn from_values(domain: &Arc<GridDomain>, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != domain.len() {
            return Err(FinepotError::Precondition(format!(
                "field has {} values, domain has {} nodes",
                values.len(),
                domain.len()
            )));
        }
        Ok(ScalarField {
            domain: domain.clone(),
            values,
        })
    }

    pub fn from_fn(domain: &Arc<GridDomain>, f: impl Fn(&Point) -> f64) -> ScalarField {
        let values = (0..domain.len()).map(|i| f(&domain.coords(i))).collect();
        ScalarField {
            domain: domain.clone(),
            values,
        }
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn set(&mut self, i: usize, v: f64) {
        self.values[i] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            domain: self.domain.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        if !same_domain(&self.domain, &other.domain) {
            return Err(FinepotError::DomainMismatch);
        }
        Ok(ScalarField {
            domain: self.domain.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn same_domain_as(&self, set: &NodeSet) -> bool {
        same_domain(&self.domain, &set.domain)
    }

    pub fn all_finite_on(&self, set: &NodeSet) -> bool {
        set.iter().all(|i| self.values[i].is_finite())
    }

    /// Largest absolute value over a set (0 for an empty set).
    pub fn sup_abs_on(&self, set: &NodeSet) -> f64 {
        set.iter().map(|i| self.values[i].abs()).fold(0.0, f64::max)
    }

    pub fn sup_distance(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_1d_measure() {
        let d = GridDomain::new(1, &[(0.0, 3.0)], &[301], WeightSpec::Constant).unwrap();
        assert_eq!(d.len(), 301);
        assert!((d.h() - 0.01).abs() < 1e-15);
        for i in 1..300 {
            assert!((d.measure(i) - 0.01).abs() < 1e-15);
        }
        assert!((d.total_measure() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn square_total_measure() {
        let d = GridDomain::cube(2, -2.0, 2.0, 129, WeightSpec::Constant).unwrap();
        let h2 = d.h() * d.h();
        let centre = d.nearest_node(&[0.0, 0.0]);
        assert!((d.measure(centre) - h2).abs() < 1e-15);
        assert!(((d.total_measure() - 16.0) / 16.0).abs() < 1e-9);
    }

    #[test]
    fn weight_window() {
        let w = |alpha: f64| WeightSpec::Power {
            alpha,
            center: vec![0.0, 0.0],
        };
        assert!(w(-1.0).check_admissible(2, 2.0).is_ok());
        assert!(w(-3.0).check_admissible(2, 2.0).is_err());
        assert!(w(2.0).check_admissible(2, 2.0).is_err());
        assert!(w(1.5).check_admissible(2, 2.0).is_ok());
        assert!(GridDomain::cube(2, -1.0, 1.0, 33, w(-3.0)).is_err());
        let d = GridDomain::cube(2, -1.0, 1.0, 33, w(-1.0)).unwrap();
        assert!(d.measures().iter().all(|m| m.is_finite() && *m > 0.0));
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridDomain::new(2, &[(0.0, 1.0), (0.0, 1.0)], &[2, 3], WeightSpec::Constant).is_err());
        assert!(GridDomain::new(1, &[(1.0, 1.0)], &[5], WeightSpec::Constant).is_err());
        assert!(GridDomain::new(2, &[(0.0, 1.0), (0.0, 2.0)], &[5, 5], WeightSpec::Constant).is_err());
        assert!(GridDomain::new(4, &[(0.0, 1.0); 4], &[5; 4], WeightSpec::Constant).is_err());
    }

    #[test]
    fn row_major_ordering() {
        let d = GridDomain::new(2, &[(0.0, 2.0), (0.0, 3.0)], &[3, 4], WeightSpec::Constant).unwrap();
        assert_eq!(d.coords(1), [0.0, 1.0, 0.0]);
        assert_eq!(d.coords(4), [1.0, 0.0, 0.0]);
        assert_eq!(d.stencil_pair(0, 0), (0, 4));
        assert_eq!(d.stencil_pair(3, 1), (2, 3));
        assert_eq!(d.stencil_pair(11, 0), (7, 11));
    }

    #[test]
    fn doubling_surrogate() {
        let c = GridDomain::cube(2, -1.0, 1.0, 65, WeightSpec::Constant).unwrap();
        let centers = vec![vec![0.0, 0.0], vec![0.3, -0.2], vec![-0.5, 0.5]];
        assert!(c.doubling_constant_estimate(&centers) < 5.0);
        let w = GridDomain::cube(
            2,
            -1.0,
            1.0,
            65,
            WeightSpec::Power {
                alpha: -1.0,
                center: vec![0.0, 0.0],
            },
        )
        .unwrap();
        assert!(w.doubling_constant_estimate(&centers) < 8.0);
    }

    #[test]
    fn set_algebra() {
        let d = GridDomain::cube(2, -1.0, 1.0, 9, WeightSpec::Constant).unwrap();
        let a = NodeSet::closed_ball(&d, &[0.0, 0.0], 0.5);
        let b = NodeSet::from_predicate(&d, |x| x[0] > 0.0);
        let u = a.union(&b).unwrap();
        let i = a.intersection(&b).unwrap();
        assert_eq!(u.count() + i.count(), a.count() + b.count());
        assert!(i.is_subset(&a).unwrap());
        assert_eq!(a.difference(&b).unwrap().count(), a.count() - i.count());
        assert_eq!(a.complement().count(), d.len() - a.count());
        let other = GridDomain::cube(2, -1.0, 1.0, 11, WeightSpec::Constant).unwrap();
        assert!(a.union(&NodeSet::empty(&other)).is_err());
    }
}
