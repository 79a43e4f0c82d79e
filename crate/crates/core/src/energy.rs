//! Nodal p-energy: the discrete stand-in for the integral of g_u^p.
//!
//! Every module uses the same definition. At node i the gradient is the
//! vector of axis differences `(u[j1] - u[j0]) / h` from
//! [`GridDomain::stencil_pair`], and
//!
//! ```text
//! E(u; R) = sum_{i in R} mu_i * (|d_i|^2 + eps^2)^{p/2}
//! ```

use crate::error::{FinepotError, Result};
use crate::grid::{GridDomain, NodeSet, ScalarField};

#[derive(Debug, Clone)]
pub struct EnergyReport {
    pub total: f64,
    /// mu_i * g_i^p on the region, zero elsewhere
    pub density: Vec<f64>,
    /// g_i at every node
    pub gradient: Vec<f64>,
    /// nodes of the region whose stencil is one-sided (box faces)
    pub one_sided: Vec<bool>,
}

/// Axis differences of `u` at node `i`.
#[inline]
pub fn node_differences(domain: &GridDomain, u: &[f64], i: usize) -> [f64; 3] {
    let mut d = [0.0; 3];
    let inv_h = 1.0 / domain.h();
    for (a, da) in d.iter_mut().enumerate().take(domain.dim()) {
        let (j0, j1) = domain.stencil_pair(i, a);
        *da = (u[j1] - u[j0]) * inv_h;
    }
    d
}

#[inline]
fn sq_norm(d: &[f64; 3]) -> f64 {
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

/// Energy contribution of one node: `mu_i (|d_i|^2 + eps^2)^{p/2}`.
#[inline]
pub fn node_energy(domain: &GridDomain, u: &[f64], i: usize, p: f64, eps: f64) -> f64 {
    let d = node_differences(domain, u, i);
    let s = sq_norm(&d) + eps * eps;
    domain.measure(i) * pow_half(s, p)
}

/// `s^{p/2}` with exact shortcuts for p = 2 and s = 0.
#[inline]
pub(crate) fn pow_half(s: f64, p: f64) -> f64 {
    if p == 2.0 {
        s
    } else if s == 0.0 {
        0.0
    } else {
        s.powf(0.5 * p)
    }
}

pub fn gradient_magnitude(u: &ScalarField, eps: f64) -> ScalarField {
    let domain = u.domain();
    let values = (0..domain.len())
        .map(|i| (sq_norm(&node_differences(domain, u.values(), i)) + eps * eps).sqrt())
        .collect();
    ScalarField::from_values(domain, values).expect("length matches domain")
}

pub fn p_energy(u: &ScalarField, region: &NodeSet, p: f64, eps: f64) -> Result<EnergyReport> {
    if p <= 1.0 || !p.is_finite() {
        return Err(FinepotError::InvalidExponent(p));
    }
    if !u.same_domain_as(region) {
        return Err(FinepotError::DomainMismatch);
    }
    let domain = u.domain();
    let g = gradient_magnitude(u, eps);
    let mut density = vec![0.0; domain.len()];
    let mut one_sided = vec![false; domain.len()];
    let mut total = 0.0;
    // Sequential sum in node order keeps the result deterministic.
    for i in region.iter() {
        let e = domain.measure(i) * pow_half(g.get(i) * g.get(i), p);
        density[i] = e;
        total += e;
        one_sided[i] = (0..domain.dim()).any(|a| domain.is_last(i, a));
    }
    Ok(EnergyReport {
        total,
        density,
        gradient: g.into_values(),
        one_sided,
    })
}

/// Total energy over a region with eps = 0, as a plain number.
pub fn energy_on(u: &ScalarField, region: &NodeSet, p: f64) -> Result<f64> {
    Ok(p_energy(u, region, p, 0.0)?.total)
}

/// Nodes whose gradient depends on at least one node of `vars`.
pub fn dependents(vars: &NodeSet) -> NodeSet {
    let domain = vars.domain();
    let mut out = NodeSet::empty(domain);
    for j in vars.iter() {
        for i in stencil_users(domain, j) {
            out.insert(i);
        }
    }
    out
}

/// Nodes whose gradient stencil contains node `j`.
pub fn stencil_users(domain: &GridDomain, j: usize) -> impl Iterator<Item = usize> + '_ {
    let idx = domain.multi_index(j);
    let shape = domain.shape().to_vec();
    let mut out: Vec<usize> = Vec::with_capacity(1 + 2 * domain.dim());
    out.push(j);
    for a in 0..domain.dim() {
        let s = domain.stride(a);
        // j is the forward partner of j - e_a
        if idx[a] > 0 {
            out.push(j - s);
        }
        // j is the backward partner of the last node j + e_a
        if idx[a] + 2 == shape[a] {
            out.push(j + s);
        }
    }
    out.sort_unstable();
    out.dedup();
    out.into_iter()
}

/// Local energy over the given nodes (eps = 0), summed in the given order.
#[cfg(test)]
pub(crate) fn energy_over(domain: &GridDomain, u: &[f64], nodes: &[usize], p: f64) -> f64 {
    nodes.iter().map(|&i| node_energy(domain, u, i, p, 0.0)).sum()
}

/// The pairing `sum_i mu_i |d_i|^{p-2} d_i . D_i e_j` of the energy flux with
/// the nodal hat at `j` (the directional derivative of the eps = 0 energy,
/// divided by p).
pub fn hat_pairing(domain: &GridDomain, u: &[f64], j: usize, p: f64) -> f64 {
    let inv_h = 1.0 / domain.h();
    let mut total = 0.0;
    for i in stencil_users(domain, j) {
        let d = node_differences(domain, u, i);
        let s = sq_norm(&d);
        if s == 0.0 {
            continue;
        }
        let w = domain.measure(i) * if p == 2.0 { 1.0 } else { s.powf(0.5 * (p - 2.0)) };
        let mut dot = 0.0;
        for (a, da) in d.iter().enumerate().take(domain.dim()) {
            let (j0, j1) = domain.stencil_pair(i, a);
            let mut c = 0.0;
            if j1 == j {
                c += inv_h;
            }
            if j0 == j {
                c -= inv_h;
            }
            dot += da * c;
        }
        total += w * dot;
    }
    total
}
