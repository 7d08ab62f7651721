//! Exact per-mode solver for the radial quasistatic configuration.

pub mod compat;
pub mod limit;
pub mod mode;
pub mod norms;
pub mod solver;

use rayon::prelude::*;

use crate::error::Result;
use crate::geometry::{RadialLayout, SourceSpec};

pub use compat::{classify_source, compatibility_test, compatibility_test_with, limit_mode_norms, CompatibilityOptions, CompatibilityStatus, CompatibilityVerdict};
pub use limit::{assemble_ni, solve_mode_limit, LimitTriple, RadialField};
pub use mode::{ModeSolution, Side};
pub use norms::{energy_identity, energy_identity_residual, interface_jumps, mode_h1_norm, mode_h1_norm_sq, mode_l2_norm_sq, mode_seminorm_sq};
pub use solver::{free_space_mode, solve_mode, solve_mode_delta, solve_radial, RadialProblem};

/// Number of modes kept when summing norms at loss `δ`: `max(32, ⌈4 ln(1/δ)⌉)`.
pub fn mode_truncation(delta: f64) -> u32 {
    let n = (4.0 * (1.0 / delta).ln()).ceil();
    if n.is_finite() && n > 32.0 {
        n as u32
    } else {
        32
    }
}

/// Solves every source mode at loss `δ` concurrently; modes above `n_max` are dropped.
pub fn solve_source_delta(layout: &RadialLayout, source: &SourceSpec, delta: f64, n_max: Option<u32>) -> Result<RadialField> {
    let modes: Vec<u32> = source.modes().into_iter().filter(|&n| n_max.map_or(true, |m| n <= m)).collect();
    let sols = modes
        .par_iter()
        .map(|&n| solve_mode_delta(layout, n, &source.mode_rings(n), delta))
        .collect::<Result<Vec<_>>>()?;
    Ok(RadialField::new(sols))
}

/// Free-space field of every source mode.
pub fn solve_source_free(layout: &RadialLayout, source: &SourceSpec, n_max: Option<u32>) -> Result<RadialField> {
    let modes: Vec<u32> = source.modes().into_iter().filter(|&n| n_max.map_or(true, |m| n <= m)).collect();
    let sols = modes
        .par_iter()
        .map(|&n| free_space_mode(layout.outer_radius(), n, &source.mode_rings(n)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RadialField::new(sols))
}

/// Limit triples of every source mode.
pub fn solve_source_limit(layout: &RadialLayout, source: &SourceSpec, n_max: Option<u32>) -> Result<Vec<LimitTriple>> {
    let modes: Vec<u32> = source.modes().into_iter().filter(|&n| n_max.map_or(true, |m| n <= m)).collect();
    modes
        .par_iter()
        .map(|&n| solve_mode_limit(layout, n, &source.mode_rings(n)))
        .collect()
}

/// `NI(f)` for the Kelvin pair of the layout.
pub fn limit_field(layout: &RadialLayout, source: &SourceSpec, n_max: Option<u32>) -> Result<RadialField> {
    let triples = solve_source_limit(layout, source, n_max)?;
    let modes = triples.iter().map(|t| t.assemble(layout)).collect::<Result<Vec<_>>>()?;
    Ok(RadialField::new(modes))
}

/// Mode-summed `‖·‖²_{H¹}` over `lo < r < hi`.
pub fn field_h1_norm_sq(field: &RadialField, lo: f64, hi: f64) -> Result<f64> {
    field.modes().iter().map(|m| mode_h1_norm_sq(m, lo, hi)).sum()
}

/// Mode-summed `‖·‖²_{L²}` over `lo < r < hi`.
pub fn field_l2_norm_sq(field: &RadialField, lo: f64, hi: f64) -> Result<f64> {
    field.modes().iter().map(|m| mode_l2_norm_sq(m, lo, hi)).sum()
}

/// Mode-wise `‖a − b‖²_{L²}` over `lo < r < hi`; modes missing on one side count as zero there.
pub fn field_l2_distance_sq(a: &RadialField, b: &RadialField, lo: f64, hi: f64) -> Result<f64> {
    let mut ns: Vec<u32> = a.modes().iter().chain(b.modes()).map(|m| m.n()).collect();
    ns.sort_unstable();
    ns.dedup();
    let mut total = 0.0;
    for n in ns {
        let d = match (a.mode(n), b.mode(n)) {
            (Some(x), Some(y)) => x.restrict(lo, hi)?.sub(&y.restrict(lo, hi)?)?,
            (Some(x), None) => x.clone(),
            (None, Some(y)) => y.clone(),
            (None, None) => unreachable!(),
        };
        total += mode_l2_norm_sq(&d, lo, hi)?;
    }
    Ok(total)
}
