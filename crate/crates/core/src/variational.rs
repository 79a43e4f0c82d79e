//! Obstacle and Dirichlet problems on node-set domains, and the two tests
//! for the (super/sub)minimizer property: energy comparison against
//! perturbations, and the sign of the discrete weak-form pairing.
//!
//! "Quasi-everywhere" is read pointwise: the grid has no nonempty polar sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::capacity::{set_extent, DEFAULT_TOL};
use crate::energy::{hat_pairing, node_energy, stencil_users};
use crate::error::{FinepotError, Result};
use crate::grid::{same_domain, to_point, distance, GridDomain, NodeSet, ScalarField};
use crate::solver::{nonconvergence, EnergyProblem, SolverOptions};

/// Minimize the p-energy over `{v = f off U, v ≥ psi on U}`.
#[derive(Debug, Clone)]
pub struct ObstacleProblem {
    pub domain_set: NodeSet,
    /// Boundary data; must be finite everywhere.
    pub f: ScalarField,
    /// Obstacle; `-inf` marks unconstrained nodes.
    pub psi: ScalarField,
    pub p: f64,
    pub tol: f64,
    /// Newton iteration cap over the whole continuation.
    pub max_iterations: usize,
}

impl ObstacleProblem {
    pub fn new(u: NodeSet, f: ScalarField, psi: ScalarField, p: f64, tol: f64) -> ObstacleProblem {
        ObstacleProblem {
            domain_set: u,
            f,
            psi,
            p,
            tol,
            max_iterations: SolverOptions::default().max_iterations,
        }
    }

    /// The trivial obstacle `psi = -inf`.
    pub fn dirichlet(u: NodeSet, f: ScalarField, p: f64, tol: f64) -> ObstacleProblem {
        let psi = ScalarField::constant(f.domain(), f64::NEG_INFINITY);
        ObstacleProblem::new(u, f, psi, p, tol)
    }

    fn tol(&self) -> f64 {
        if self.tol > 0.0 && self.tol.is_finite() {
            self.tol
        } else {
            DEFAULT_TOL
        }
    }

    /// Oscillation of the finite data, at least 1e-300.
    fn data_range(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in self.f.values() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        for i in self.domain_set.iter() {
            let v = self.psi.get(i);
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        hi - lo
    }

    /// Absolute tolerance on values: `tol * max(1, range of data)`.
    pub fn value_tol(&self) -> f64 {
        self.tol() * self.data_range().max(1.0)
    }

    fn validate(&self) -> Result<()> {
        let domain = self.f.domain();
        if !self.f.same_domain_as(&self.domain_set) || !self.psi.same_domain_as(&self.domain_set) {
            return Err(FinepotError::DomainMismatch);
        }
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(FinepotError::InvalidExponent(self.p));
        }
        domain.check_p(self.p)?;
        if self.domain_set.is_all() {
            return Err(FinepotError::NoExterior);
        }
        if let Some(i) = self.f.values().iter().position(|v| !v.is_finite()) {
            return Err(FinepotError::Precondition(format!("boundary data is not finite at node {i}")));
        }
        for i in self.domain_set.iter() {
            let v = self.psi.get(i);
            if v.is_nan() || v == f64::INFINITY {
                return Err(FinepotError::Infeasible(format!("obstacle is {v} at node {i}")));
            }
        }
        Ok(())
    }

    /// The canonical feasible field: `max(f, psi)` on U, `f` elsewhere.
    pub fn feasible_start(&self) -> ScalarField {
        let domain = self.f.domain();
        let values = (0..domain.len())
            .map(|i| {
                if self.domain_set.contains(i) {
                    self.f.get(i).max(self.psi.get(i))
                } else {
                    self.f.get(i)
                }
            })
            .collect();
        ScalarField::from_values(domain, values).expect("full-length field")
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: ScalarField,
    /// eps = 0 energy over the nodes whose gradient depends on U.
    pub energy: f64,
    pub contact_set: NodeSet,
    /// Normalized projected-gradient residual of the solver.
    pub kkt_residual: f64,
    /// Normalized complementarity residual of the eps = 0 pairing.
    pub complementarity: f64,
    pub iterations: usize,
    pub value_tol: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub energy: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub complementarity: f64,
    pub contact_count: usize,
}

impl SolveReport {
    pub fn summary(&self) -> SolveSummary {
        SolveSummary {
            energy: self.energy,
            iterations: self.iterations,
            kkt_residual: self.kkt_residual,
            complementarity: self.complementarity,
            contact_count: self.contact_set.count(),
        }
    }
}

/// Nodes whose gradient depends on a node of `vars`, in increasing order.
pub fn dependent_nodes(domain: &GridDomain, vars: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut mark = vec![false; domain.len()];
    let mut out = Vec::new();
    for j in vars {
        for i in stencil_users(domain, j) {
            if !mark[i] {
                mark[i] = true;
                out.push(i);
            }
        }
    }
    out.sort_unstable();
    out
}

pub(crate) fn local_energy(domain: &GridDomain, u: &[f64], nodes: &[usize], p: f64) -> f64 {
    nodes.iter().map(|&i| node_energy(domain, u, i, p, 0.0)).sum()
}

pub fn solve_obstacle(prob: &ObstacleProblem) -> Result<SolveReport> {
    solve_obstacle_from(prob, None)
}

/// Solves from a given start; off U the start is replaced by `f` and on U it
/// is raised to the obstacle.
pub fn solve_obstacle_from(prob: &ObstacleProblem, start: Option<&ScalarField>) -> Result<SolveReport> {
    prob.validate()?;
    let domain = prob.f.domain().clone();
    let u_set = &prob.domain_set;
    let mut init = prob.feasible_start().into_values();
    if let Some(s) = start {
        if !s.same_domain_as(u_set) {
            return Err(FinepotError::DomainMismatch);
        }
        for i in u_set.iter() {
            let v = s.get(i);
            if !v.is_finite() {
                return Err(FinepotError::Precondition(format!("start is not finite at node {i}")));
            }
            init[i] = v.max(prob.psi.get(i));
        }
    }
    let length = set_extent(u_set);
    let range = prob.data_range();
    let grad_scale = if range > 0.0 { range / length } else { 1.0 / length };
    let lower: Vec<f64> = prob.psi.values().to_vec();
    let has_obstacle = u_set.iter().any(|i| prob.psi.get(i) > f64::NEG_INFINITY);
    let problem = EnergyProblem::new(
        &domain,
        prob.p,
        u_set.mask(),
        if has_obstacle { Some(&lower) } else { None },
        false,
        grad_scale,
        length,
    );
    let opts = SolverOptions {
        tol: prob.tol(),
        max_iterations: prob.max_iterations,
        ..SolverOptions::default()
    };
    let out = problem.minimize(&init, &opts).map_err(|o| nonconvergence(&domain, o))?;
    let solution = ScalarField::from_values(&domain, out.values)?;
    let value_tol = prob.value_tol();
    let mut contact_set = NodeSet::empty(&domain);
    for i in u_set.iter() {
        if solution.get(i) <= prob.psi.get(i) + value_tol {
            contact_set.insert(i);
        }
    }
    let deps = dependent_nodes(&domain, u_set.iter());
    let energy = local_energy(&domain, solution.values(), &deps, prob.p);
    let complementarity = complementarity_residual(&solution, u_set, &contact_set, prob.p, grad_scale, length);
    Ok(SolveReport {
        solution,
        energy,
        contact_set,
        kkt_residual: out.kkt_residual,
        complementarity,
        iterations: out.iterations,
        value_tol,
        p: prob.p,
    })
}

pub fn solve_dirichlet(u: &NodeSet, f: &ScalarField, p: f64, tol: f64) -> Result<SolveReport> {
    solve_obstacle(&ObstacleProblem::dirichlet(u.clone(), f.clone(), p, tol))
}

/// Largest violation of `pairing = 0` off contact and `pairing ≥ 0` on
/// contact, with the pairing divided by the node measure and by
/// `s^{p-1} / L`.
fn complementarity_residual(u: &ScalarField, set: &NodeSet, contact: &NodeSet, p: f64, grad_scale: f64, length: f64) -> f64 {
    let domain = u.domain();
    let norm = grad_scale.powf(p - 1.0) / length;
    set.iter()
        .map(|j| {
            let g = hat_pairing(domain, u.values(), j, p) / domain.measure(j) / norm;
            if contact.contains(j) {
                (-g).max(0.0)
            } else {
                g.abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Lower envelope check of random admissible perturbations: the smallest
/// `E(v) - E(solution)` over `n` fields `v = max(solution + phi, psi)`, with
/// `phi` a random signed bump supported in U.
pub fn optimality_margin(prob: &ObstacleProblem, report: &SolveReport, n: usize, seed: u64) -> f64 {
    let domain = report.solution.domain();
    let u_set = &prob.domain_set;
    let deps = dependent_nodes(domain, u_set.iter());
    let base = local_energy(domain, report.solution.values(), &deps, prob.p);
    let scale = report.solution.sup_abs_on(u_set).max(1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = u_set.indices();
    let diam = set_extent(u_set);
    let mut worst = f64::INFINITY;
    let mut v = report.solution.values().to_vec();
    for _ in 0..n {
        let bump = random_bump(&mut rng, domain, &nodes, diam, scale);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let support = bump.support(domain, u_set);
        for &(i, w) in &support {
            v[i] = (report.solution.get(i) + sign * w).max(prob.psi.get(i));
        }
        let e = local_energy(domain, &v, &deps, prob.p);
        worst = worst.min(e - base);
        for &(i, _) in &support {
            v[i] = report.solution.get(i);
        }
    }
    worst
}

/// `solution_1 ≤ solution_2 + 10 tol` everywhere.
pub fn comparison_check(r1: &SolveReport, r2: &SolveReport) -> Result<bool> {
    if !same_domain(r1.solution.domain(), r2.solution.domain()) {
        return Err(FinepotError::DomainMismatch);
    }
    let slack = 10.0 * r1.value_tol.max(r2.value_tol);
    Ok(r1
        .solution
        .values()
        .iter()
        .zip(r2.solution.values())
        .all(|(a, b)| *a <= *b + slack))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyKind {
    Superminimizer,
    Subminimizer,
    Minimizer,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub kind: VerifyKind,
    pub passed: bool,
    /// Smallest margin over all tests; negative beyond tolerance means failure.
    pub worst_margin: f64,
    pub n_tests: usize,
    /// The worst failing test function, if any.
    pub witness: Option<ScalarField>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub kind: VerifyKind,
    pub passed: bool,
    pub worst_margin: f64,
    pub n_tests: usize,
    pub has_witness: bool,
}

impl VerifyReport {
    pub fn summary(&self) -> VerifySummary {
        VerifySummary {
            kind: self.kind,
            passed: self.passed,
            worst_margin: self.worst_margin,
            n_tests: self.n_tests,
            has_witness: self.witness.is_some(),
        }
    }

    fn merge(self, other: VerifyReport, kind: VerifyKind) -> VerifyReport {
        let (worst_margin, witness) = if self.worst_margin <= other.worst_margin {
            (self.worst_margin, self.witness.or(other.witness))
        } else {
            (other.worst_margin, other.witness.or(self.witness))
        };
        VerifyReport {
            kind,
            passed: self.passed && other.passed,
            worst_margin,
            n_tests: self.n_tests + other.n_tests,
            witness,
        }
    }
}

/// `A * max(0, rho - |x - c|)` restricted to U.
struct Bump {
    center: [f64; 3],
    rho: f64,
    amp: f64,
}

impl Bump {
    fn support(&self, domain: &GridDomain, set: &NodeSet) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        domain.for_each_in_cube(&self.center, self.rho, |i| {
            if set.contains(i) {
                let w = self.amp * (self.rho - distance(&domain.coords(i), &self.center)).max(0.0);
                if w > 0.0 {
                    out.push((i, w));
                }
            }
        });
        out
    }
}

fn random_bump(rng: &mut ChaCha8Rng, domain: &GridDomain, nodes: &[usize], diam: f64, scale: f64) -> Bump {
    let c = domain.coords(nodes[rng.gen_range(0..nodes.len())]);
    let lo = 2.0 * domain.h();
    let hi = (0.25 * diam).max(lo);
    let rho = if hi > lo { rng.gen_range(lo..hi) } else { lo };
    let amp = rng.gen_range(0.1..10.0) * scale;
    Bump { center: c, rho, amp }
}

/// Energy comparison test of the one-sided property: every `phi ≥ 0`
/// (superminimizer) or `phi ≤ 0` (subminimizer) supported in U must satisfy
/// `E(u + phi) ≥ E(u) - tol` on the nodes whose gradient `phi` touches.
pub fn verify(u: &ScalarField, set: &NodeSet, p: f64, kind: VerifyKind, n_tests: usize, seed: u64) -> Result<VerifyReport> {
    match kind {
        VerifyKind::Minimizer => {
            let sup = verify_one_sided(u, set, p, 1.0, n_tests, seed)?;
            let sub = verify_one_sided(u, set, p, -1.0, n_tests, seed)?;
            Ok(sup.merge(sub, VerifyKind::Minimizer))
        }
        VerifyKind::Superminimizer => verify_one_sided(u, set, p, 1.0, n_tests, seed),
        VerifyKind::Subminimizer => verify_one_sided(u, set, p, -1.0, n_tests, seed),
    }
}

pub fn verify_superminimizer(u: &ScalarField, set: &NodeSet, p: f64, n_tests: usize, seed: u64) -> Result<VerifyReport> {
    verify(u, set, p, VerifyKind::Superminimizer, n_tests, seed)
}

fn check_field(u: &ScalarField, set: &NodeSet, p: f64) -> Result<()> {
    if !u.same_domain_as(set) {
        return Err(FinepotError::DomainMismatch);
    }
    if !(p > 1.0) || !p.is_finite() {
        return Err(FinepotError::InvalidExponent(p));
    }
    let domain = u.domain();
    for i in dependent_nodes(domain, set.iter()) {
        for a in 0..domain.dim() {
            let (j0, j1) = domain.stencil_pair(i, a);
            if !u.get(j0).is_finite() || !u.get(j1).is_finite() {
                return Err(FinepotError::Precondition(format!("field is not finite near node {i}")));
            }
        }
    }
    Ok(())
}

/// Magnitude used to size test functions: sup of |u| over U and its stencils.
fn field_scale(u: &ScalarField, set: &NodeSet) -> f64 {
    let deps = dependent_nodes(u.domain(), set.iter());
    let s = deps.iter().map(|&i| u.get(i).abs()).fold(0.0, f64::max);
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

fn verify_one_sided(u: &ScalarField, set: &NodeSet, p: f64, sign: f64, n_tests: usize, seed: u64) -> Result<VerifyReport> {
    check_field(u, set, p)?;
    let kind = if sign > 0.0 {
        VerifyKind::Superminimizer
    } else {
        VerifyKind::Subminimizer
    };
    let domain = u.domain();
    if set.is_empty() {
        return Ok(VerifyReport {
            kind,
            passed: true,
            worst_margin: f64::INFINITY,
            n_tests: 0,
            witness: None,
        });
    }
    let scale = field_scale(u, set);
    let mut work = u.values().to_vec();
    let mut worst = f64::INFINITY;
    let mut worst_fail = f64::INFINITY;
    let mut witness: Option<Vec<(usize, f64)>> = None;
    let mut count = 0usize;
    let mut run = |phi: &[(usize, f64)], worst: &mut f64, worst_fail: &mut f64, witness: &mut Option<Vec<(usize, f64)>>| {
        let deps = dependent_nodes(domain, phi.iter().map(|&(i, _)| i));
        let before = local_energy(domain, &work, &deps, p);
        for &(i, w) in phi {
            work[i] += sign * w;
        }
        let after = local_energy(domain, &work, &deps, p);
        for &(i, _) in phi {
            work[i] = u.get(i);
        }
        let margin = after - before;
        let tol = 1e-8 * (1.0 + before.abs());
        *worst = worst.min(margin);
        if margin < -tol && margin < *worst_fail {
            *worst_fail = margin;
            *witness = Some(phi.to_vec());
        }
    };
    // Single-node hats over a ladder of heights.
    for j in set.iter() {
        for height in [1.0, 1e-2, 1e-4, 1e-6] {
            run(&[(j, height * scale)], &mut worst, &mut worst_fail, &mut witness);
            count += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = set.indices();
    let diam = set_extent(set);
    for _ in 0..n_tests {
        let bump = random_bump(&mut rng, domain, &nodes, diam, scale);
        let phi = bump.support(domain, set);
        if phi.is_empty() {
            continue;
        }
        run(&phi, &mut worst, &mut worst_fail, &mut witness);
        count += 1;
    }
    let witness = witness.map(|phi| {
        let mut f = ScalarField::constant(u.domain(), 0.0);
        for (i, w) in phi {
            f.set(i, sign * w);
        }
        f
    });
    Ok(VerifyReport {
        kind,
        passed: witness.is_none(),
        worst_margin: worst,
        n_tests: count,
        witness,
    })
}

/// Sign test of the discrete weak form: for every hat at `j ∈ U`, the
/// pairing `sum_i mu_i |d_i|^{p-2} d_i . D_i e_j`, divided by `mu_j`, must be
/// ≥ -tol (superminimizer) or ≤ tol (subminimizer).
pub fn verify_weak_form(u: &ScalarField, set: &NodeSet, p: f64, kind: VerifyKind) -> Result<VerifyReport> {
    check_field(u, set, p)?;
    let domain = u.domain();
    let length = set_extent(set);
    let range = {
        let deps = dependent_nodes(domain, set.iter());
        let lo = deps.iter().map(|&i| u.get(i)).fold(f64::INFINITY, f64::min);
        let hi = deps.iter().map(|&i| u.get(i)).fold(f64::NEG_INFINITY, f64::max);
        (hi - lo).max(0.0)
    };
    let grad = (range / length).max(1.0 / length);
    let tol = 1e-7 * grad.powf(p - 1.0) / length;
    let signs: &[f64] = match kind {
        VerifyKind::Superminimizer => &[1.0],
        VerifyKind::Subminimizer => &[-1.0],
        VerifyKind::Minimizer => &[1.0, -1.0],
    };
    let mut worst = f64::INFINITY;
    let mut worst_node = None;
    let mut count = 0;
    for j in set.iter() {
        let g = hat_pairing(domain, u.values(), j, p) / domain.measure(j);
        for &s in signs {
            count += 1;
            let m = s * g;
            if m < worst {
                worst = m;
                worst_node = Some((j, s));
            }
        }
    }
    let passed = worst >= -tol || set.is_empty();
    let witness = if passed {
        None
    } else {
        worst_node.map(|(j, s)| {
            let mut f = ScalarField::constant(u.domain(), 0.0);
            f.set(j, s);
            f
        })
    };
    Ok(VerifyReport {
        kind,
        passed,
        worst_margin: worst,
        n_tests: count,
        witness,
    })
}

/// Nodes of U nearest to a point; convenient for building witnesses.
pub fn nearest_in(set: &NodeSet, x: &[f64]) -> Option<usize> {
    let domain = set.domain();
    let c = to_point(x);
    set.iter().min_by(|&a, &b| {
        distance(&domain.coords(a), &c)
            .partial_cmp(&distance(&domain.coords(b), &c))
            .unwrap()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::WeightSpec;

    fn line(n: usize) -> std::sync::Arc<GridDomain> {
        GridDomain::new(1, &[(0.0, 1.0)], &[n], WeightSpec::Constant).unwrap()
    }

    #[test]
    fn constants_minimize() {
        let d = GridDomain::cube(2, -1.0, 1.0, 17, WeightSpec::Constant).unwrap();
        let u = NodeSet::box_interior(&d);
        let f = ScalarField::constant(&d, 2.5);
        for p in [1.5, 2.0, 3.0] {
            let r = solve_dirichlet(&u, &f, p, DEFAULT_TOL).unwrap();
            assert!(r.solution.sup_distance(&f) < 1e-12);
            assert_eq!(r.energy, 0.0);
        }
    }

    #[test]
    fn tent_obstacle_closed_form() {
        let n = 101;
        let d = line(n);
        let h = d.h();
        let u = NodeSet::box_interior(&d);
        let f = ScalarField::constant(&d, 0.0);
        let psi = ScalarField::from_fn(&d, |x| 0.25 - (x[0] - 0.5).abs());
        let r = solve_obstacle(&ObstacleProblem::new(u, f, psi, 2.0, DEFAULT_TOL)).unwrap();
        let exact = ScalarField::from_fn(&d, |x| x[0].min(1.0 - x[0]) / 2.0);
        assert!(r.solution.sup_distance(&exact) <= 2.0 * h);
        assert!((r.energy - 0.25).abs() <= 2.0 * h);
        assert_eq!(r.contact_set.indices(), vec![n / 2]);
        assert!(r.complementarity <= DEFAULT_TOL);
    }

    #[test]
    fn infeasible_obstacle_rejected() {
        let d = line(11);
        let u = NodeSet::box_interior(&d);
        let f = ScalarField::constant(&d, 0.0);
        let psi = ScalarField::from_fn(&d, |x| if (x[0] - 0.5).abs() < 1e-9 { f64::INFINITY } else { 0.0 });
        assert!(matches!(
            solve_obstacle(&ObstacleProblem::new(u, f, psi, 2.0, DEFAULT_TOL)),
            Err(FinepotError::Infeasible(_))
        ));
    }

    #[test]
    fn no_exterior_rejected() {
        let d = line(11);
        let f = ScalarField::constant(&d, 0.0);
        assert!(matches!(
            solve_dirichlet(&NodeSet::full(&d), &f, 2.0, DEFAULT_TOL),
            Err(FinepotError::NoExterior)
        ));
    }

    #[test]
    fn tents_in_weak_form() {
        let d = line(21);
        // keep clear of the half-weight face nodes
        let set = NodeSet::from_predicate(&d, |x| x[0] > 0.12 && x[0] < 0.88);
        let concave = ScalarField::from_fn(&d, |x| x[0].min(1.0 - x[0]));
        let convex = concave.map(|v| -v);
        for p in [1.5, 2.0, 3.0] {
            assert!(verify_weak_form(&concave, &set, p, VerifyKind::Superminimizer).unwrap().passed);
            assert!(!verify_weak_form(&concave, &set, p, VerifyKind::Subminimizer).unwrap().passed);
            assert!(!verify_weak_form(&convex, &set, p, VerifyKind::Superminimizer).unwrap().passed);
            assert!(verify_superminimizer(&concave, &set, p, 20, 1).unwrap().passed);
            assert!(!verify_superminimizer(&convex, &set, p, 20, 1).unwrap().passed);
        }
    }

    #[test]
    fn solved_fields_are_minimizers() {
        let d = GridDomain::cube(2, -1.0, 1.0, 21, WeightSpec::Constant).unwrap();
        let set = NodeSet::open_ball(&d, &[0.0, 0.0], 0.8);
        let f = ScalarField::from_fn(&d, |x| x[0] * x[0] - 0.5 * x[1] + (2.0 * x[1]).sin());
        for p in [1.5, 2.0, 3.0] {
            let r = solve_dirichlet(&set, &f, p, DEFAULT_TOL).unwrap();
            let v = verify(&r.solution, &set, p, VerifyKind::Minimizer, 30, 7).unwrap();
            assert!(v.passed, "p={p} margin {}", v.worst_margin);
            assert!(verify_weak_form(&r.solution, &set, p, VerifyKind::Minimizer).unwrap().passed);
        }
    }

    #[test]
    fn comparison_of_shifted_data() {
        let d = GridDomain::cube(2, -1.0, 1.0, 17, WeightSpec::Constant).unwrap();
        let set = NodeSet::open_ball(&d, &[0.0, 0.0], 0.7);
        let f1 = ScalarField::from_fn(&d, |x| x[0]);
        let f2 = f1.map(|v| v + 1.0);
        let r1 = solve_dirichlet(&set, &f1, 2.0, DEFAULT_TOL).unwrap();
        let r2 = solve_dirichlet(&set, &f2, 2.0, DEFAULT_TOL).unwrap();
        assert!(comparison_check(&r1, &r2).unwrap());
        assert!(!comparison_check(&r2, &r1).unwrap());
        let diff = r2.solution.zip_with(&r1.solution, |a, b| a - b).unwrap();
        assert!(diff.values().iter().all(|v| (v - 1.0).abs() < 1e-9));
    }
}
