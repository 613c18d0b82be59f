//! Bundled scenario fixtures, resolvable by bare name in place of a path.

pub const EXAMPLE1: &str = include_str!("../fixtures/example1.toml");
pub const EXAMPLE2: &str = include_str!("../fixtures/example2.toml");
pub const EXAMPLE1_NOMINAL_MONITORED: &str =
    include_str!("../fixtures/example1_nominal_monitored.toml");

/// Returns the bundled document for a fixture name, if any.
pub fn by_name(name: &str) -> Option<&'static str> {
    match name {
        "example1" => Some(EXAMPLE1),
        "example2" => Some(EXAMPLE2),
        "example1_nominal_monitored" => Some(EXAMPLE1_NOMINAL_MONITORED),
        _ => None,
    }
}

pub const NAMES: &[&str] = &["example1", "example2", "example1_nominal_monitored"];
