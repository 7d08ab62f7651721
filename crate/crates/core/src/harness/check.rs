//! Complementarity check of the configured media and maps.

use crate::error::Result;
use crate::geometry::Point;
use crate::harness::ExperimentConfig;
use crate::transforms::{check_reflecting_complementary, kelvin_pair, ComplementarityOptions, ComplementarityReport};

/// Runs the checker on `(F, G)` from `[check]`, defaulting to the Kelvin pair of the layout.
pub fn run_check_complementary(cfg: &ExperimentConfig) -> Result<ComplementarityReport> {
    cfg.validate()?;
    let media = cfg.media()?;
    let (kf, kg) = kelvin_pair(media.layout());
    let f = match &cfg.check.f {
        Some(spec) => spec.build()?,
        None => kf,
    };
    let g = match &cfg.check.g {
        Some(spec) => spec.build()?,
        None => kg,
    };
    let opts = ComplementarityOptions {
        domain_samples: cfg.check.domain_samples,
        boundary_samples: cfg.check.boundary_samples,
        tolerance: cfg.check.tol,
        include_sigma: cfg.check.include_sigma,
        seed: cfg.seed,
        x1: Point::zeros(),
        x2: Point::zeros(),
        ..ComplementarityOptions::default()
    };
    Ok(check_reflecting_complementary(&media, &f, &g, &opts))
}
