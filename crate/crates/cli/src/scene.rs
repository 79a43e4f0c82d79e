//! Rasterizes the geometry and field bindings of a scenario.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use finepot::grid::{distance, to_point, Point};
use finepot::{GridDomain, NodeSet, ScalarField};

use crate::config::{CuspProfile, FieldSpec, Scenario, SetSpec};
use crate::error::CliError;

pub struct Scene {
    pub domain: Arc<GridDomain>,
    pub sets: BTreeMap<String, NodeSet>,
    pub fields: BTreeMap<String, ScalarField>,
}

fn precondition(what: &str, message: impl Into<String>) -> CliError {
    CliError::TaskPrecondition {
        task: what.to_string(),
        message: message.into(),
    }
}

fn check_len(what: &str, v: &[f64], dim: usize) -> Result<(), CliError> {
    if v.len() != dim {
        return Err(CliError::Parse(format!(
            "{what}: expected {dim} coordinates, got {}",
            v.len()
        )));
    }
    Ok(())
}

impl Scene {
    /// `base` resolves relative file paths.
    pub fn build(s: &Scenario, base: &Path) -> Result<Scene, CliError> {
        let d = &s.domain;
        let bounds: Vec<(f64, f64)> = d.bounds.iter().map(|b| (b[0], b[1])).collect();
        let domain = GridDomain::new(d.dim, &bounds, &d.resolution, d.weight.clone()).map_err(|e| CliError::Task {
            task: "domain".into(),
            source: e,
        })?;
        domain.check_p(d.p).map_err(|e| CliError::Task {
            task: "domain".into(),
            source: e,
        })?;
        let mut scene = Scene {
            domain,
            sets: BTreeMap::new(),
            fields: BTreeMap::new(),
        };
        for name in s.sets.keys() {
            scene.build_set(s, name)?;
        }
        for (name, spec) in &s.fields {
            let f = scene.build_field(name, spec, base)?;
            scene.fields.insert(name.clone(), f);
        }
        Ok(scene)
    }

    fn build_set(&mut self, s: &Scenario, name: &str) -> Result<NodeSet, CliError> {
        if let Some(set) = self.sets.get(name) {
            return Ok(set.clone());
        }
        let dom = self.domain.clone();
        let dim = dom.dim();
        let what = format!("set '{name}'");
        let h = dom.h();
        let set = match &s.sets[name] {
            SetSpec::Ball { center, radius, closed } => {
                check_len(&what, center, dim)?;
                if *closed {
                    NodeSet::closed_ball(&dom, center, *radius)
                } else {
                    NodeSet::open_ball(&dom, center, *radius)
                }
            }
            SetSpec::Box { lower, upper } => {
                check_len(&what, lower, dim)?;
                check_len(&what, upper, dim)?;
                let tol = 1e-9 * h;
                NodeSet::from_predicate(&dom, |x| (0..dim).all(|a| x[a] >= lower[a] - tol && x[a] <= upper[a] + tol))
            }
            SetSpec::Segment { from, to, half_width } => {
                check_len(&what, from, dim)?;
                check_len(&what, to, dim)?;
                let (a, b) = (to_point(from), to_point(to));
                let w = half_width.unwrap_or(0.5 * h) * (1.0 + 1e-9);
                NodeSet::from_predicate(&dom, |x| segment_distance(x, &a, &b) <= w)
            }
            SetSpec::Cusp {
                tip,
                axis,
                length,
                profile,
                scale,
            } => {
                check_len(&what, tip, dim)?;
                check_len(&what, axis, dim)?;
                let norm = axis.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !(norm > 0.0) {
                    return Err(CliError::Parse(format!("{what}: axis must be nonzero")));
                }
                let t = to_point(tip);
                let ax: Point = to_point(&axis.iter().map(|v| v / norm).collect::<Vec<_>>());
                let profile = *profile;
                NodeSet::from_predicate(&dom, |x| {
                    let rel = [x[0] - t[0], x[1] - t[1], x[2] - t[2]];
                    let along = rel[0] * ax[0] + rel[1] * ax[1] + rel[2] * ax[2];
                    if along < 0.0 || along > *length {
                        return false;
                    }
                    let perp = distance(&rel, &[along * ax[0], along * ax[1], along * ax[2]]);
                    let width = match profile {
                        CuspProfile::Exp if along > 0.0 => (-1.0 / along).exp(),
                        CuspProfile::Exp => 0.0,
                        CuspProfile::Power { beta } => along.powf(beta),
                    };
                    perp <= scale * width
                })
            }
            SetSpec::Point { at } => {
                check_len(&what, at, dim)?;
                NodeSet::from_indices(&dom, &[dom.nearest_node(at)])
            }
            SetSpec::Halfspace { normal, offset } => {
                check_len(&what, normal, dim)?;
                NodeSet::from_predicate(&dom, |x| (0..dim).map(|a| x[a] * normal[a]).sum::<f64>() > *offset)
            }
            SetSpec::Interior => NodeSet::box_interior(&dom),
            SetSpec::Full => NodeSet::full(&dom),
            SetSpec::Empty => NodeSet::empty(&dom),
            SetSpec::Union(names) | SetSpec::Intersection(names) => {
                let union = matches!(&s.sets[name], SetSpec::Union(_));
                let mut acc = if union {
                    NodeSet::empty(&dom)
                } else {
                    NodeSet::full(&dom)
                };
                for n in names {
                    let part = self.build_set(s, n)?;
                    acc = if union { acc.union(&part) } else { acc.intersection(&part) }.expect("same domain");
                }
                acc
            }
            SetSpec::Difference(names) => {
                let Some((first, rest)) = names.split_first() else {
                    return Err(CliError::Parse(format!("{what}: difference needs at least one operand")));
                };
                let mut acc = self.build_set(s, first)?;
                for n in rest {
                    let part = self.build_set(s, n)?;
                    acc = acc.difference(&part).expect("same domain");
                }
                acc
            }
            SetSpec::Complement(other) => self.build_set(s, other)?.complement(),
        };
        self.sets.insert(name.to_string(), set.clone());
        Ok(set)
    }

    fn build_field(&self, name: &str, spec: &FieldSpec, base: &Path) -> Result<ScalarField, CliError> {
        let dom = &self.domain;
        let dim = dom.dim();
        let what = format!("field '{name}'");
        let h = dom.h();
        // radial closed forms: value at the centre node, floored radius elsewhere
        let radial = |center: &[f64], center_value: Option<f64>, g: &dyn Fn(f64) -> f64| -> Result<ScalarField, CliError> {
            check_len(&what, center, dim)?;
            let c = to_point(center);
            Ok(ScalarField::from_fn(dom, |x| {
                let r = distance(x, &c);
                match center_value {
                    Some(v) if r < 0.5 * h => v,
                    _ => g(r.max(0.5 * h)),
                }
            }))
        };
        let f = match spec {
            FieldSpec::Constant { value } => ScalarField::constant(dom, *value),
            FieldSpec::Affine { gradient, offset } => {
                check_len(&what, gradient, dim)?;
                ScalarField::from_fn(dom, |x| offset + (0..dim).map(|a| gradient[a] * x[a]).sum::<f64>())
            }
            FieldSpec::Log {
                center,
                coefficient,
                offset,
                center_value,
            } => radial(center, *center_value, &|r| coefficient * r.ln() + offset)?,
            FieldSpec::Power {
                center,
                exponent,
                coefficient,
                offset,
                center_value,
            } => radial(center, *center_value, &|r| coefficient * r.powf(*exponent) + offset)?,
            FieldSpec::Distance { to } => {
                check_len(&what, to, dim)?;
                let c = to_point(to);
                ScalarField::from_fn(dom, |x| distance(x, &c))
            }
            FieldSpec::Cone {
                center,
                radius,
                height,
                offset,
            } => {
                check_len(&what, center, dim)?;
                if !(*radius > 0.0) {
                    return Err(CliError::Parse(format!("{what}: radius must be positive")));
                }
                let c = to_point(center);
                ScalarField::from_fn(dom, |x| height * (1.0 - distance(x, &c) / radius).max(0.0) + offset)
            }
            FieldSpec::File { path } => {
                let full = base.join(path);
                let text = std::fs::read_to_string(&full).map_err(|e| CliError::Io {
                    path: full.display().to_string(),
                    message: e.to_string(),
                })?;
                finepot::io::read_field_csv(dom, &text).map_err(|m| precondition(&what, m))?
            }
        };
        Ok(f)
    }
}

fn segment_distance(x: &Point, a: &Point, b: &Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
    let t = if len2 > 0.0 {
        (((x[0] - a[0]) * ab[0] + (x[1] - a[1]) * ab[1] + (x[2] - a[2]) * ab[2]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    distance(x, &[a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]])
}
