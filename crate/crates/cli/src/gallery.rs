//! Scenarios bundled with the binary.

use crate::config::Scenario;
use crate::error::CliError;

pub const GALLERY: &[(&str, &str)] = &[
    ("annulus-capacity", include_str!("../scenarios/annulus-capacity.toml")),
    ("point-thinness", include_str!("../scenarios/point-thinness.toml")),
    ("point-capacity", include_str!("../scenarios/point-capacity.toml")),
    ("log-annulus", include_str!("../scenarios/log-annulus.toml")),
    ("cusp-fine-limit", include_str!("../scenarios/cusp-fine-limit.toml")),
    ("punctured-disk", include_str!("../scenarios/punctured-disk.toml")),
    ("power-square", include_str!("../scenarios/power-square.toml")),
    ("pasting-demo", include_str!("../scenarios/pasting-demo.toml")),
    ("removability-demo", include_str!("../scenarios/removability-demo.toml")),
];

pub fn names() -> Vec<&'static str> {
    GALLERY.iter().map(|(n, _)| *n).collect()
}

pub fn source(name: &str) -> Result<&'static str, CliError> {
    GALLERY
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| CliError::UnknownScenario {
            name: name.to_string(),
            suggestions: suggest(name),
        })
}

pub fn load(name: &str) -> Result<Scenario, CliError> {
    Scenario::from_toml(source(name)?)
}

/// Gallery names close to `name`, best first.
pub fn suggest(name: &str) -> Vec<String> {
    let mut scored: Vec<(f64, &str)> = names()
        .into_iter()
        .map(|n| (strsim::jaro_winkler(name, n), n))
        .filter(|(s, n)| *s >= 0.7 || n.contains(name))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.into_iter().take(3).map(|(_, n)| n.to_string()).collect()
}

/// One line per scenario: name, task count and description.
pub fn listing() -> String {
    let mut out = String::new();
    for (name, text) in GALLERY {
        let s = Scenario::from_toml(text).expect("bundled scenarios parse");
        out.push_str(&format!("{name:<20} {:>2} tasks  {}\n", s.tasks.len(), s.description));
    }
    out
}
