//! Shared fixtures for the benchmarks.

use octacage_core::config::CageConfig;

/// Default configuration with a reduced volume rule.
pub fn config_with_points(points: usize) -> CageConfig {
    let mut c = CageConfig::default();
    c.quadrature.points = points;
    c
}
