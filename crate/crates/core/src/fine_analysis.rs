//! Pasting, min-combination, removability of small sets, and the measure
//! trimmed stand-ins for fine lsc/usc regularization and fine limits.
//!
//! Exceptional sets of zero capacity have no grid meaning, so fine
//! liminf/limsup are approximated by discarding a fraction `trim` of the
//! neighbourhood measure at the extremes before taking inf/sup.

use serde::{Deserialize, Serialize};

use crate::capacity::{sobolev_capacity, DEFAULT_TOL};
use crate::error::{FinepotError, Result};
use crate::grid::{distance, to_point, NodeSet, ScalarField};
use crate::variational::{dependent_nodes, local_energy, verify, VerifyKind, VerifyReport};

pub const DEFAULT_TRIM: f64 = 0.05;

fn finite_on(u: &ScalarField, set: &NodeSet, what: &str) -> Result<()> {
    if !u.same_domain_as(set) {
        return Err(FinepotError::DomainMismatch);
    }
    if let Some(i) = set.iter().find(|&i| !u.get(i).is_finite()) {
        return Err(FinepotError::Precondition(format!("{what} is not finite at node {i}")));
    }
    Ok(())
}

/// `min(u1, u2)` on `U1`, `u2` everywhere else.
pub fn paste(u1_set: &NodeSet, u2_set: &NodeSet, u1: &ScalarField, u2: &ScalarField) -> Result<ScalarField> {
    if !u1_set.is_subset(u2_set)? {
        return Err(FinepotError::Precondition("U1 must be a subset of U2".into()));
    }
    finite_on(u1, u1_set, "u1")?;
    finite_on(u2, u2_set, "u2")?;
    let mut out = u2.clone();
    for i in u1_set.iter() {
        out.set(i, u1.get(i).min(u2.get(i)));
    }
    Ok(out)
}

/// Pointwise minimum.
pub fn min_combine(u: &ScalarField, v: &ScalarField, set: &NodeSet) -> Result<ScalarField> {
    finite_on(u, set, "u")?;
    finite_on(v, set, "v")?;
    u.zip_with(v, f64::min)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RemovalOptions {
    pub kind: VerifyKind,
    pub n_tests: usize,
    pub seed: u64,
    /// Smallness threshold for the capacity proxy of E.
    pub capacity_threshold: Option<f64>,
}

impl Default for RemovalOptions {
    fn default() -> Self {
        RemovalOptions {
            kind: VerifyKind::Superminimizer,
            n_tests: 100,
            seed: 0,
            capacity_threshold: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RemovalReport {
    pub verify: VerifyReport,
    /// Sobolev capacity of E, the discrete smallness proxy.
    pub capacity_proxy: f64,
    pub below_threshold: Option<bool>,
    /// eps = 0 energy of the extension over the nodes depending on U ∪ E.
    pub energy: f64,
    pub extended: ScalarField,
    /// Nodes whose values were filled.
    pub filled: usize,
}

/// Extends `u` to `U ∪ E` and verifies it there.
///
/// Nodes of `E \ U` where `u` has no finite value take the value of the
/// nearest node of `U` (ties go to the largest value); finite values already
/// present are kept, being one admissible choice of extension.
pub fn remove_and_verify(u: &ScalarField, set: &NodeSet, e: &NodeSet, p: f64, opts: &RemovalOptions) -> Result<RemovalReport> {
    let domain = u.domain();
    let v_set = set.union(e)?;
    let mut extended = u.clone();
    let mut filled = 0;
    let sources: Vec<usize> = set.iter().filter(|&i| u.get(i).is_finite()).collect();
    for j in e.iter() {
        if set.contains(j) || u.get(j).is_finite() {
            continue;
        }
        let x = domain.coords(j);
        let mut best: Option<(f64, f64)> = None;
        for &i in &sources {
            let dist = distance(&domain.coords(i), &x);
            let val = u.get(i);
            best = match best {
                Some((bd, bv)) if dist > bd + 1e-12 * domain.h() => Some((bd, bv)),
                Some((bd, bv)) if (dist - bd).abs() <= 1e-12 * domain.h() => Some((bd.min(dist), bv.max(val))),
                _ => Some((dist, val)),
            };
        }
        let (_, val) = best.ok_or_else(|| FinepotError::Precondition("U has no finite values to extend from".into()))?;
        extended.set(j, val);
        filled += 1;
    }
    let report = verify(&extended, &v_set, p, opts.kind, opts.n_tests, opts.seed)?;
    let capacity_proxy = if e.is_empty() {
        0.0
    } else {
        sobolev_capacity(e, p, DEFAULT_TOL)?.value
    };
    let deps = dependent_nodes(domain, v_set.iter());
    let energy = local_energy(domain, extended.values(), &deps, p);
    Ok(RemovalReport {
        verify: report,
        capacity_proxy,
        below_threshold: opts.capacity_threshold.map(|t| capacity_proxy <= t),
        energy,
        extended,
        filled,
    })
}

/// Inf and sup after discarding up to `trim` of the total measure from each
/// end of the value distribution. At least one node always survives.
pub fn trimmed_range(samples: &mut [(f64, f64)], trim: f64) -> (f64, f64) {
    assert!(!samples.is_empty());
    samples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let total: f64 = samples.iter().map(|s| s.1).sum();
    let budget = trim * total * (1.0 + 1e-12);
    let n = samples.len();
    let mut lo = 0;
    let mut acc = 0.0;
    while lo + 1 < n && acc + samples[lo].1 <= budget {
        acc += samples[lo].1;
        lo += 1;
    }
    let mut hi = n - 1;
    acc = 0.0;
    while hi > lo && acc + samples[hi].1 <= budget {
        acc += samples[hi].1;
        hi -= 1;
    }
    (samples[lo].0, samples[hi].0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizeMode {
    Lsc,
    Usc,
}

/// Radius of the regularization neighbourhood, in cells.
pub const REGULARIZE_CELLS: f64 = 3.0;

/// Discrete fine lsc (usc) regularization on U.
///
/// At `x ∈ U` the value is raised (lowered) to the trimmed inf (sup) of `u`
/// over the punctured ball `B(x, 3h) \ {x}` when that exceeds (falls below)
/// `u(x)`; this is repeated until nothing changes. The result is monotone in
/// `u`, idempotent, removes isolated downward (upward) spikes and leaves
/// fields without such spikes untouched.
pub fn fine_regularize(u: &ScalarField, set: &NodeSet, mode: RegularizeMode, trim: f64) -> Result<ScalarField> {
    finite_on(u, set, "u")?;
    if !(0.0..0.5).contains(&trim) {
        return Err(FinepotError::Precondition(format!("trim fraction {trim} must lie in [0, 0.5)")));
    }
    let domain = u.domain();
    let radius = REGULARIZE_CELLS * domain.h();
    let nodes = set.indices();
    let neighbours: Vec<Vec<usize>> = nodes
        .iter()
        .map(|&i| {
            let c = domain.coords(i);
            let mut nb = Vec::new();
            domain.for_each_in_cube(&c, radius, |j| {
                if j != i && distance(&domain.coords(j), &c) <= radius + 1e-12 * domain.h() && u.get(j).is_finite() {
                    nb.push(j);
                }
            });
            nb
        })
        .collect();
    let mut v = u.values().to_vec();
    let mut buf = Vec::new();
    loop {
        let mut changed = false;
        for (k, &i) in nodes.iter().enumerate() {
            if neighbours[k].is_empty() {
                continue;
            }
            buf.clear();
            buf.extend(neighbours[k].iter().map(|&j| (v[j], domain.measure(j))));
            let (lo, hi) = trimmed_range(&mut buf, trim);
            let next = match mode {
                RegularizeMode::Lsc => v[i].max(lo),
                RegularizeMode::Usc => v[i].min(hi),
            };
            if next != v[i] {
                v[i] = next;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    ScalarField::from_values(domain, v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitVerdict {
    Exists,
    NoLimit,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct FineLimitProbe {
    pub center: Vec<f64>,
    /// Outer radius of each annulus `B(z, r_k) \ B(z, r_k / 2)`.
    pub radii: Vec<f64>,
    pub node_counts: Vec<usize>,
    pub raw_inf: Vec<f64>,
    pub raw_sup: Vec<f64>,
    pub trimmed_inf: Vec<f64>,
    pub trimmed_sup: Vec<f64>,
    pub trim: f64,
    pub verdict: LimitVerdict,
    /// Midpoint of the innermost trimmed range.
    pub limit: Option<f64>,
    /// Extremes are discarded by measure, not by capacity.
    pub trimming: &'static str,
}

impl FineLimitProbe {
    pub fn trimmed_oscillation(&self) -> Vec<f64> {
        self.trimmed_sup.iter().zip(&self.trimmed_inf).map(|(s, i)| s - i).collect()
    }

    pub fn raw_oscillation(&self) -> Vec<f64> {
        self.raw_sup.iter().zip(&self.raw_inf).map(|(s, i)| s - i).collect()
    }
}

pub const MIN_ANNULUS_NODES: usize = 16;

/// Trimmed and raw inf/sup of `u` on dyadic annuli around `z`, from the
/// outside in, for as long as an annulus holds at least 16 nodes.
pub fn fine_limit_probe(u: &ScalarField, z: &[f64], r0: f64, trim: f64) -> Result<FineLimitProbe> {
    let domain = u.domain();
    if z.len() != domain.dim() {
        return Err(FinepotError::Precondition("center dimension does not match the grid".into()));
    }
    if !(0.0..0.5).contains(&trim) {
        return Err(FinepotError::Precondition(format!("trim fraction {trim} must lie in [0, 0.5)")));
    }
    if !(r0 > 0.0) || !domain.contains_ball(z, r0) {
        return Err(FinepotError::BallOutsideGrid {
            center: z.to_vec(),
            radius: r0,
        });
    }
    let c = to_point(z);
    let mut samples_by_ring: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut radii = Vec::new();
    let mut r = r0;
    loop {
        let mut ring = Vec::new();
        domain.for_each_in_cube(&c, r, |i| {
            let d = distance(&domain.coords(i), &c);
            if d < r && d >= 0.5 * r && u.get(i).is_finite() {
                ring.push((u.get(i), domain.measure(i)));
            }
        });
        if ring.len() < MIN_ANNULUS_NODES {
            break;
        }
        samples_by_ring.push(ring);
        radii.push(r);
        r *= 0.5;
    }
    let mut probe = FineLimitProbe {
        center: z.to_vec(),
        radii,
        node_counts: Vec::new(),
        raw_inf: Vec::new(),
        raw_sup: Vec::new(),
        trimmed_inf: Vec::new(),
        trimmed_sup: Vec::new(),
        trim,
        verdict: LimitVerdict::Inconclusive,
        limit: None,
        trimming: "measure",
    };
    for mut ring in samples_by_ring {
        probe.node_counts.push(ring.len());
        let (lo, hi) = trimmed_range(&mut ring, trim);
        probe.raw_inf.push(ring[0].0);
        probe.raw_sup.push(ring[ring.len() - 1].0);
        probe.trimmed_inf.push(lo);
        probe.trimmed_sup.push(hi);
    }
    let osc = probe.trimmed_oscillation();
    if let (Some(&first), Some(&last)) = (osc.first(), osc.last()) {
        let scale = probe
            .trimmed_sup
            .iter()
            .chain(&probe.trimmed_inf)
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1.0);
        let tiny = 1e-9 * scale;
        let tail = &osc[osc.len().saturating_sub(3)..];
        let non_increasing = tail.windows(2).all(|w| w[1] <= w[0] + tiny);
        probe.verdict = if last <= tiny || (osc.len() >= 2 && non_increasing && last <= 0.5 * first) {
            LimitVerdict::Exists
        } else if osc.len() >= 2 && osc.iter().all(|&o| o >= 0.8 * first) && first > tiny {
            LimitVerdict::NoLimit
        } else {
            LimitVerdict::Inconclusive
        };
        let k = osc.len() - 1;
        probe.limit = Some(0.5 * (probe.trimmed_inf[k] + probe.trimmed_sup[k]));
    }
    Ok(probe)
}
