//! Wiener-type thinness at resolvable scales, finely open sets, fine
//! boundaries and positivity sets.
//!
//! At a point `x` the dyadic terms are
//!
//! ```text
//! t_k = ( cp(E ∩ B(x, r_k), B(x, 2 r_k)) / cp(B(x, r_k), B(x, 2 r_k)) )^{1/(p-1)},   r_k = R0 2^{-k}
//! ```
//!
//! with both balls open. Open inner balls keep the rasterized segment
//! `E ∩ B(x, r)` from overshooting its length by a cell, which otherwise
//! shows up as an O(h/r) drift of the terms of self-similar sets. The integral over `dr/r`
//! becomes `sum t_k log 2`. Verdicts only speak about the scales the grid
//! resolves.

use serde::{Deserialize, Serialize};

use crate::capacity::{variational_capacity, DEFAULT_TOL};
use crate::error::{FinepotError, Result};
use crate::grid::{distance, to_point, GridDomain, NodeSet, ScalarField, WeightSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Thin,
    NotThin,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WienerOptions {
    /// Geometric-decay margin: thin if the median successive ratio is ≤ 1 - delta.
    pub delta: f64,
    /// Smallness threshold on terms.
    pub tau: f64,
    /// Slack when comparing a profile with the single-node profile.
    pub sigma: f64,
    pub tol: f64,
}

impl Default for WienerOptions {
    fn default() -> Self {
        WienerOptions {
            delta: 0.2,
            tau: 1e-3,
            sigma: 0.25,
            tol: DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WienerProfile {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    pub terms: Vec<f64>,
    /// Terms of the single node nearest the center: the smallest nonempty
    /// set the grid can represent.
    pub node_floor: Vec<f64>,
    pub numerators: Vec<f64>,
    pub denominators: Vec<f64>,
    pub partial_sum: f64,
    pub verdict: Verdict,
    /// Median ratio of successive positive terms (NaN when undefined).
    pub q: f64,
}

/// Largest K such that the smallest inner radius is still ≥ 2h, i.e. the
/// outer ball spans at least 8 nodes per axis.
pub fn max_scales(domain: &GridDomain, r0: f64) -> usize {
    let ratio = r0 / (2.0 * domain.h());
    if ratio < 1.0 {
        0
    } else {
        (ratio * (1.0 + 1e-12)).log2().floor() as usize
    }
}

/// Effective dimension at `x`: `dim + alpha` at the centre of a power
/// weight, `dim` elsewhere.
fn local_dimension(domain: &GridDomain, x: &[f64]) -> f64 {
    let n = domain.dim() as f64;
    match domain.weight() {
        WeightSpec::Power { alpha, center } if distance(&to_point(center), &to_point(x)) < 0.5 * domain.h() => {
            n + alpha
        }
        _ => n,
    }
}

/// Whether a single point is polar at `x` for this exponent and weight.
pub fn points_polar(domain: &GridDomain, x: &[f64], p: f64) -> bool {
    p <= local_dimension(domain, x)
}

/// Growth per halving of the terms of a fixed finite cluster of nodes when
/// p < n: `cp(C, B(2r))` levels off while `cp(B(r), B(2r)) ~ r^{n-p}`, so
/// the term grows like `r^{-(n-p)/(p-1)}`.
fn cluster_growth(domain: &GridDomain, x: &[f64], p: f64) -> f64 {
    let n = local_dimension(domain, x);
    if p < n {
        2f64.powf((n - p) / (p - 1.0))
    } else {
        1.0
    }
}

fn ball_scale(domain: &GridDomain, x: &[f64], r: f64, p: f64) -> f64 {
    domain.ball_measure(x, 2.0 * r) / r.powf(p)
}

/// Denominator capacities `cp(B(x,r_k), B(x,2r_k))`.
fn denominators(domain: &std::sync::Arc<GridDomain>, x: &[f64], radii: &[f64], p: f64, tol: f64) -> Result<Vec<f64>> {
    radii
        .iter()
        .map(|&r| {
            let inner = NodeSet::open_ball(domain, x, r);
            let outer = NodeSet::open_ball(domain, x, 2.0 * r);
            Ok(variational_capacity(&inner, &outer, p, tol)?.value)
        })
        .collect()
}

fn numerator(e: &NodeSet, x: &[f64], r: f64, p: f64, den: f64, tol: f64) -> Result<f64> {
    let domain = e.domain();
    let inner = NodeSet::open_ball(domain, x, r);
    let part = e.intersection(&inner)?;
    if part.is_empty() {
        return Ok(0.0);
    }
    if part == inner {
        return Ok(den);
    }
    let outer = NodeSet::open_ball(domain, x, 2.0 * r);
    Ok(variational_capacity(&part, &outer, p, tol)?.value)
}

fn term(num: f64, den: f64, zero: f64, p: f64) -> f64 {
    if den < zero {
        return 1.0;
    }
    (num / den).clamp(0.0, 1.0).powf(1.0 / (p - 1.0))
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn classify(
    domain: &GridDomain,
    x: &[f64],
    p: f64,
    terms: &[f64],
    floor: &[f64],
    opts: &WienerOptions,
) -> (Verdict, f64) {
    let ratios: Vec<f64> = terms
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .collect();
    let q = median(ratios);
    let last = *terms.last().unwrap();
    if last <= opts.tau || q <= 1.0 - opts.delta {
        return (Verdict::Thin, q);
    }
    if points_polar(domain, x, p) {
        // Thinness is decided at small scales, so only the finest half of
        // the profile is compared with the single-node floor.
        let fine = terms.len() / 2;
        let point_like = terms[fine..]
            .iter()
            .zip(&floor[fine..])
            .all(|(&t, &f)| t <= (1.0 + opts.sigma) * f);
        if point_like {
            return (Verdict::Thin, q);
        }
        // Terms growing toward the grid scale at the rate of a fixed cluster.
        let growth = cluster_growth(domain, x, p);
        if growth >= 1.0 + 2.0 * opts.delta && q >= 1.0 + 0.5 * (growth - 1.0) {
            return (Verdict::Thin, q);
        }
    }
    if terms.iter().all(|&t| t >= opts.tau) {
        return (Verdict::NotThin, q);
    }
    (Verdict::Inconclusive, q)
}

fn validate(domain: &GridDomain, x: &[f64], p: f64, r0: f64, k: usize) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(FinepotError::InvalidExponent(p));
    }
    domain.check_p(p)?;
    if x.len() != domain.dim() {
        return Err(FinepotError::Precondition(format!(
            "center has {} coordinates, grid has dimension {}",
            x.len(),
            domain.dim()
        )));
    }
    if !(r0 > 0.0) || !domain.contains_ball(x, 2.0 * r0) {
        return Err(FinepotError::BallOutsideGrid {
            center: x.to_vec(),
            radius: 2.0 * r0,
        });
    }
    let max = max_scales(domain, r0);
    if k > max {
        return Err(FinepotError::TooManyScales { requested: k, max });
    }
    Ok(())
}

/// Dyadic Wiener profile of `E` at `x` over radii `R0 2^{-k}`, `k = 0..=K`.
pub fn wiener_profile(e: &NodeSet, x: &[f64], p: f64, r0: f64, k: usize) -> Result<WienerProfile> {
    wiener_profile_with(e, x, p, r0, k, &WienerOptions::default())
}

pub fn wiener_profile_with(
    e: &NodeSet,
    x: &[f64],
    p: f64,
    r0: f64,
    k: usize,
    opts: &WienerOptions,
) -> Result<WienerProfile> {
    let domain = e.domain();
    validate(domain, x, p, r0, k)?;
    let radii: Vec<f64> = (0..=k).map(|j| r0 * 0.5f64.powi(j as i32)).collect();
    let dens = denominators(domain, x, &radii, p, opts.tol)?;
    let floors = floor_numerators(domain, x, &radii, p, &dens, opts.tol)?;
    profile_from_parts(e, x, p, &radii, &dens, &floors, opts)
}

/// Numerators of the single node nearest `x`.
fn floor_numerators(
    domain: &std::sync::Arc<GridDomain>,
    x: &[f64],
    radii: &[f64],
    p: f64,
    dens: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    let node = NodeSet::from_indices(domain, &[domain.nearest_node(x)]);
    radii
        .iter()
        .zip(dens)
        .map(|(&r, &den)| numerator(&node, x, r, p, den, tol))
        .collect()
}

fn profile_from_parts(
    e: &NodeSet,
    x: &[f64],
    p: f64,
    radii: &[f64],
    dens: &[f64],
    floors: &[f64],
    opts: &WienerOptions,
) -> Result<WienerProfile> {
    let domain = e.domain();
    let mut terms = Vec::with_capacity(radii.len());
    let mut nums = Vec::with_capacity(radii.len());
    let mut floor = Vec::with_capacity(radii.len());
    for ((&r, &den), &fl) in radii.iter().zip(dens).zip(floors) {
        let zero = 1e-12 * ball_scale(domain, x, r, p);
        let num = numerator(e, x, r, p, den, opts.tol)?;
        terms.push(term(num, den, zero, p));
        nums.push(num);
        floor.push(term(fl, den, zero, p));
    }
    let partial_sum = terms.iter().sum::<f64>() * std::f64::consts::LN_2;
    let (verdict, q) = classify(domain, x, p, &terms, &floor, opts);
    Ok(WienerProfile {
        center: x.to_vec(),
        radii: radii.to_vec(),
        terms,
        node_floor: floor,
        numerators: nums,
        denominators: dens.to_vec(),
        partial_sum,
        verdict,
        q,
    })
}

/// Which nodes to test and at which scales.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sampling {
    /// Test every `stride`-th node along each axis (1 = all nodes).
    pub stride: usize,
    /// Explicit points; when nonempty, replaces the strided lattice.
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    /// Outermost inner radius; defaults to `2h * 2^scales`.
    #[serde(default)]
    pub r0: Option<f64>,
    pub scales: usize,
    #[serde(default)]
    pub options: Option<WienerOptions>,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            stride: 1,
            points: Vec::new(),
            r0: None,
            scales: 2,
            options: None,
        }
    }
}

impl Sampling {
    fn radius(&self, domain: &GridDomain) -> f64 {
        self.r0.unwrap_or(2.0 * domain.h() * 2f64.powi(self.scales as i32))
    }

    fn candidates(&self, domain: &GridDomain, within: &NodeSet) -> Vec<usize> {
        if !self.points.is_empty() {
            let mut v: Vec<usize> = self.points.iter().map(|x| domain.nearest_node(x)).collect();
            v.dedup();
            return v.into_iter().filter(|&i| within.contains(i)).collect();
        }
        let stride = self.stride.max(1);
        within
            .iter()
            .filter(|&i| {
                let idx = domain.multi_index(i);
                (0..domain.dim()).all(|a| idx[a] % stride == 0)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PointVerdict {
    pub node: usize,
    pub x: Vec<f64>,
    pub verdict: Verdict,
    pub partial_sum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FineOpenness {
    FinelyOpen,
    NotFinelyOpen,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct FineOpenReport {
    pub aggregate: FineOpenness,
    pub points: Vec<PointVerdict>,
    /// Sample nodes too close to the box for `B(x, 2 R0)`.
    pub skipped: Vec<usize>,
    pub r0: f64,
    pub scales: usize,
}

/// Evaluates profiles of several sets at many points, sharing denominator
/// solves between points where the grid is translation invariant.
struct ProfileRunner<'a> {
    domain: &'a std::sync::Arc<GridDomain>,
    p: f64,
    radii: Vec<f64>,
    opts: WienerOptions,
    shared: Option<(Vec<f64>, Vec<f64>)>,
}

impl<'a> ProfileRunner<'a> {
    fn new(domain: &'a std::sync::Arc<GridDomain>, p: f64, sampling: &Sampling) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(FinepotError::InvalidExponent(p));
        }
        domain.check_p(p)?;
        let r0 = sampling.radius(domain);
        let max = max_scales(domain, r0);
        if sampling.scales > max {
            return Err(FinepotError::TooManyScales {
                requested: sampling.scales,
                max,
            });
        }
        Ok(ProfileRunner {
            domain,
            p,
            radii: (0..=sampling.scales).map(|j| r0 * 0.5f64.powi(j as i32)).collect(),
            opts: sampling.options.unwrap_or_default(),
            shared: None,
        })
    }

    fn fits(&self, i: usize) -> bool {
        let x = self.domain.coords(i);
        self.domain.contains_ball(&x[..self.domain.dim()], 2.0 * self.radii[0])
    }

    fn profile(&mut self, e: &NodeSet, i: usize) -> Result<WienerProfile> {
        let x = self.domain.coords(i)[..self.domain.dim()].to_vec();
        let compute = |x: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
            let dens = denominators(self.domain, x, &self.radii, self.p, self.opts.tol)?;
            let floors = floor_numerators(self.domain, x, &self.radii, self.p, &dens, self.opts.tol)?;
            Ok((dens, floors))
        };
        let (dens, floors) = if self.domain.weight().is_constant() {
            // Rasterized balls centred at nodes are translates of each other.
            if self.shared.is_none() {
                self.shared = Some(compute(&x)?);
            }
            self.shared.clone().unwrap()
        } else {
            compute(&x)?
        };
        profile_from_parts(e, &x, self.p, &self.radii, &dens, &floors, &self.opts)
    }
}

/// Tests whether `X \ V` is thin at the sampled points of `V`.
pub fn is_finely_open(v: &NodeSet, p: f64, sampling: &Sampling) -> Result<FineOpenReport> {
    if v.is_empty() {
        return Err(FinepotError::Precondition("V must be nonempty".into()));
    }
    let domain = v.domain();
    let mut runner = ProfileRunner::new(domain, p, sampling)?;
    let exterior = v.complement();
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for i in sampling.candidates(domain, v) {
        if !runner.fits(i) {
            skipped.push(i);
            continue;
        }
        let prof = runner.profile(&exterior, i)?;
        points.push(PointVerdict {
            node: i,
            x: prof.center.clone(),
            verdict: prof.verdict,
            partial_sum: prof.partial_sum,
        });
    }
    let aggregate = if points.iter().any(|pv| pv.verdict == Verdict::NotThin) {
        FineOpenness::NotFinelyOpen
    } else if !points.is_empty() && points.iter().all(|pv| pv.verdict == Verdict::Thin) {
        FineOpenness::FinelyOpen
    } else {
        FineOpenness::Inconclusive
    };
    Ok(FineOpenReport {
        aggregate,
        points,
        skipped,
        r0: runner.radii[0],
        scales: sampling.scales,
    })
}

#[derive(Debug, Clone)]
pub struct FineBoundaryReport {
    pub boundary: NodeSet,
    pub inconclusive: NodeSet,
    pub skipped: NodeSet,
    pub evaluated: usize,
}

/// Sampled nodes where the opposite side is not thin: `x ∈ E` with
/// `X \ E` not thin at `x`, or `x ∉ E` with `E` not thin at `x`.
pub fn fine_boundary(e: &NodeSet, p: f64, sampling: &Sampling) -> Result<FineBoundaryReport> {
    let domain = e.domain();
    let mut runner = ProfileRunner::new(domain, p, sampling)?;
    let outside = e.complement();
    let mut boundary = NodeSet::empty(domain);
    let mut inconclusive = NodeSet::empty(domain);
    let mut skipped = NodeSet::empty(domain);
    let mut evaluated = 0;
    for i in sampling.candidates(domain, &NodeSet::full(domain)) {
        if !runner.fits(i) {
            skipped.insert(i);
            continue;
        }
        let other = if e.contains(i) { &outside } else { e };
        evaluated += 1;
        match runner.profile(other, i)?.verdict {
            Verdict::NotThin => boundary.insert(i),
            Verdict::Inconclusive => inconclusive.insert(i),
            Verdict::Thin => {}
        }
    }
    Ok(FineBoundaryReport {
        boundary,
        inconclusive,
        skipped,
        evaluated,
    })
}

/// `{x : u(x) > threshold}`. NaN values never belong to the set.
pub fn positivity_set(u: &ScalarField, threshold: f64) -> NodeSet {
    let mask = u.values().iter().map(|&v| v > threshold).collect();
    NodeSet::from_mask(u.domain(), mask).expect("mask length matches domain")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> std::sync::Arc<GridDomain> {
        // node at the origin, h = 1/32
        GridDomain::new(2, &[(-1.0, 31.0 / 32.0), (-1.0, 31.0 / 32.0)], &[64, 64], WeightSpec::Constant).unwrap()
    }

    #[test]
    fn full_ball_terms_are_one() {
        let d = grid();
        let e = NodeSet::closed_ball(&d, &[0.0, 0.0], 0.5);
        let prof = wiener_profile(&e, &[0.0, 0.0], 2.0, 0.25, 2).unwrap();
        assert!(prof.terms.iter().all(|&t| t == 1.0));
        assert_eq!(prof.verdict, Verdict::NotThin);
    }

    #[test]
    fn empty_set_is_thin() {
        let d = grid();
        let prof = wiener_profile(&NodeSet::empty(&d), &[0.0, 0.0], 2.0, 0.25, 2).unwrap();
        assert!(prof.terms.iter().all(|&t| t == 0.0));
        assert_eq!(prof.verdict, Verdict::Thin);
        assert_eq!(prof.partial_sum, 0.0);
    }

    #[test]
    fn scale_limits() {
        let d = grid();
        assert_eq!(max_scales(&d, 0.25), 2);
        let e = NodeSet::empty(&d);
        assert!(matches!(
            wiener_profile(&e, &[0.0, 0.0], 2.0, 0.25, 3),
            Err(FinepotError::TooManyScales { .. })
        ));
        assert!(matches!(
            wiener_profile(&e, &[0.8, 0.0], 2.0, 0.25, 1),
            Err(FinepotError::BallOutsideGrid { .. })
        ));
    }

    #[test]
    fn positivity() {
        let d = grid();
        let u = ScalarField::from_fn(&d, |x| x[0]);
        let s = positivity_set(&u, 0.0);
        assert!(s.iter().all(|i| d.coords(i)[0] > 0.0));
        assert!(positivity_set(&ScalarField::constant(&d, 0.0), 0.0).is_empty());
    }

    #[test]
    fn polar_points() {
        let d = grid();
        assert!(points_polar(&d, &[0.0, 0.0], 2.0));
        assert!(!points_polar(&d, &[0.0, 0.0], 3.0));
        let w = GridDomain::new(
            2,
            &[(-1.0, 31.0 / 32.0), (-1.0, 31.0 / 32.0)],
            &[64, 64],
            WeightSpec::Power {
                alpha: 1.5,
                center: vec![0.0, 0.0],
            },
        )
        .unwrap();
        assert!(points_polar(&w, &[0.0, 0.0], 3.0));
        assert!(!points_polar(&w, &[0.5, 0.0], 3.0));
    }
}
