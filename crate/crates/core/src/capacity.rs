//! Sobolev capacity `Cp(E)` and variational (condenser) capacity `cp(E, A)`.
//!
//! Both are convex minimizations of the nodal p-energy. The ambient space is
//! the bounded grid box, so Sobolev capacities depend on the box; the box is
//! echoed in every result.

use std::sync::Arc;

use serde::Serialize;

use crate::energy::{self, pow_half};
use crate::error::{FinepotError, Result};
use crate::grid::{GridDomain, NodeSet, ScalarField};
use crate::solver::{nonconvergence, EnergyProblem, SolverOptions};

pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct CapacityResult {
    pub value: f64,
    /// Minimizing potential, in [0, 1].
    pub potential: ScalarField,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub eps_final: f64,
    /// Box the capacity was computed in.
    pub ambient_bounds: Vec<(f64, f64)>,
}

/// JSON-facing view of a [`CapacityResult`].
#[derive(Debug, Clone, Serialize)]
pub struct CapacitySummary {
    pub value: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub eps_final: f64,
    pub ambient_bounds: Vec<(f64, f64)>,
    pub potential_ref: Option<String>,
}

impl CapacityResult {
    pub fn summary(&self, potential_ref: Option<String>) -> CapacitySummary {
        CapacitySummary {
            value: self.value,
            iterations: self.iterations,
            kkt_residual: self.kkt_residual,
            eps_final: self.eps_final,
            ambient_bounds: self.ambient_bounds.clone(),
            potential_ref,
        }
    }

    fn trivial(domain: &Arc<GridDomain>, value: f64, potential: ScalarField) -> CapacityResult {
        CapacityResult {
            value,
            potential,
            iterations: 0,
            kkt_residual: 0.0,
            eps_final: 0.0,
            ambient_bounds: domain.bounds(),
        }
    }
}

fn check_exponent(domain: &GridDomain, p: f64) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(FinepotError::InvalidExponent(p));
    }
    domain.check_p(p)
}

fn solver_options(tol: f64) -> SolverOptions {
    SolverOptions {
        tol: if tol > 0.0 && tol.is_finite() { tol } else { DEFAULT_TOL },
        ..SolverOptions::default()
    }
}

/// Largest side of the coordinate bounding box of a set, at least one cell.
pub(crate) fn set_extent(set: &NodeSet) -> f64 {
    let domain = set.domain();
    let dim = domain.dim();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for i in set.iter() {
        let x = domain.coords(i);
        for a in 0..dim {
            lo[a] = lo[a].min(x[a]);
            hi[a] = hi[a].max(x[a]);
        }
    }
    let side = (0..dim).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
    if side.is_finite() {
        side.max(domain.h())
    } else {
        domain.h()
    }
}

/// Total eps = 0 energy over the whole grid.
fn grid_energy(u: &ScalarField, p: f64) -> Result<f64> {
    energy::energy_on(u, &NodeSet::full(u.domain()), p)
}

/// `cp(E, A)`: minimal p-energy of potentials equal to 1 on `E`, 0 off `A`.
pub fn variational_capacity(e: &NodeSet, a: &NodeSet, p: f64, tol: f64) -> Result<CapacityResult> {
    let domain = e.domain().clone();
    check_exponent(&domain, p)?;
    if !e.is_subset(a)? {
        return Err(FinepotError::Precondition("E must be a subset of A".into()));
    }
    if a.is_all() {
        return Err(FinepotError::NoExterior);
    }
    let start: Vec<f64> = (0..domain.len()).map(|i| if e.contains(i) { 1.0 } else { 0.0 }).collect();
    if e.is_empty() {
        return Ok(CapacityResult::trivial(&domain, 0.0, ScalarField::constant(&domain, 0.0)));
    }
    let free: Vec<bool> = (0..domain.len()).map(|i| a.contains(i) && !e.contains(i)).collect();
    let length = set_extent(a);
    let problem = EnergyProblem::new(&domain, p, &free, None, false, 1.0 / length, length);
    let out = problem
        .minimize(&start, &solver_options(tol))
        .map_err(|o| nonconvergence(&domain, o))?;
    // Truncation to [0, 1] shrinks every axis difference, so it never raises
    // the nodal energy; the clamped field is still a minimizer.
    let potential = ScalarField::from_values(&domain, out.values.iter().map(|v| v.clamp(0.0, 1.0)).collect())?;
    Ok(CapacityResult {
        value: grid_energy(&potential, p)?,
        potential,
        iterations: out.iterations,
        kkt_residual: out.kkt_residual,
        eps_final: out.eps_final,
        ambient_bounds: domain.bounds(),
    })
}

/// `Cp(E)`: minimal `sum mu |f|^p + E_p(f)` over `f = 1` on `E`.
pub fn sobolev_capacity(e: &NodeSet, p: f64, tol: f64) -> Result<CapacityResult> {
    let domain = e.domain().clone();
    check_exponent(&domain, p)?;
    if e.is_empty() {
        return Ok(CapacityResult::trivial(&domain, 0.0, ScalarField::constant(&domain, 0.0)));
    }
    let start: Vec<f64> = (0..domain.len()).map(|i| if e.contains(i) { 1.0 } else { 0.0 }).collect();
    let free: Vec<bool> = (0..domain.len()).map(|i| !e.contains(i)).collect();
    let length = domain.extent();
    let problem = EnergyProblem::new(&domain, p, &free, None, true, 1.0 / length, length);
    let out = problem
        .minimize(&start, &solver_options(tol))
        .map_err(|o| nonconvergence(&domain, o))?;
    let potential = ScalarField::from_values(&domain, out.values.iter().map(|v| v.clamp(0.0, 1.0)).collect())?;
    let value = sobolev_norm_p(&potential, p)?;
    Ok(CapacityResult {
        value,
        potential,
        iterations: out.iterations,
        kkt_residual: out.kkt_residual,
        eps_final: out.eps_final,
        ambient_bounds: domain.bounds(),
    })
}

/// `sum_i mu_i |f_i|^p + E_p(f)` over the whole grid.
pub fn sobolev_norm_p(f: &ScalarField, p: f64) -> Result<f64> {
    let domain = f.domain();
    let mass: f64 = (0..domain.len())
        .map(|i| domain.measure(i) * pow_half(f.get(i) * f.get(i), p))
        .sum();
    Ok(mass + grid_energy(f, p)?)
}

/// `cp(E_sub, A)`; a finite value certifies that `E_sub` is a p-strict
/// subset of `A` at this resolution.
pub fn strictness_modulus(a: &NodeSet, e_sub: &NodeSet, p: f64) -> Result<f64> {
    Ok(variational_capacity(e_sub, a, p, DEFAULT_TOL)?.value)
}
