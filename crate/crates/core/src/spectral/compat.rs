//! Finite-mode decision procedure for source compatibility.

use serde::Serialize;

use crate::error::Result;
use crate::geometry::{RadialLayout, C64};
use crate::spectral::limit::solve_mode_limit;
use crate::spectral::norms::mode_h1_norm_sq;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CompatibilityStatus {
    Compatible,
    Incompatible,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatibilityVerdict {
    pub status: CompatibilityStatus,
    /// Geometric-mean growth factor of the per-mode norms over the last `window` modes.
    pub ratio: f64,
    /// Cumulative sums of squared per-mode norms.
    pub partial_sums: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompatibilityOptions {
    pub window: usize,
    pub lower: f64,
    pub upper: f64,
    pub min_modes: usize,
}

impl Default for CompatibilityOptions {
    fn default() -> Self {
        Self { window: 8, lower: 0.95, upper: 1.05, min_modes: 16 }
    }
}

/// Classifies a sequence of per-mode norms. Fewer than `min_modes` entries are inconclusive.
pub fn compatibility_test_with(norms: &[f64], opts: &CompatibilityOptions) -> CompatibilityVerdict {
    let partial_sums = norms
        .iter()
        .scan(0.0, |acc, m| {
            *acc += m * m;
            Some(*acc)
        })
        .collect();
    if norms.len() < opts.min_modes.max(opts.window + 1) {
        return CompatibilityVerdict { status: CompatibilityStatus::Inconclusive, ratio: f64::NAN, partial_sums };
    }
    let last = norms[norms.len() - 1];
    let first = norms[norms.len() - 1 - opts.window];
    let ratio = if last == 0.0 {
        0.0
    } else if first == 0.0 {
        f64::INFINITY
    } else {
        (last / first).powf(1.0 / opts.window as f64)
    };
    let status = if ratio < opts.lower {
        CompatibilityStatus::Compatible
    } else if ratio > opts.upper {
        CompatibilityStatus::Incompatible
    } else {
        CompatibilityStatus::Inconclusive
    };
    CompatibilityVerdict { status, ratio, partial_sums }
}

pub fn compatibility_test(norms: &[f64]) -> CompatibilityVerdict {
    compatibility_test_with(norms, &CompatibilityOptions::default())
}

/// `(‖Uₙ‖² + ‖Vₙ‖²)^{1/2}` in `H¹(Ω₃ ∖ Ω₂)` for `n = 0..=n_max`, given the rings of each mode.
pub fn limit_mode_norms(layout: &RadialLayout, n_max: u32, rings_of: impl Fn(u32) -> Vec<(f64, C64)> + Sync) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    (0..=n_max)
        .into_par_iter()
        .map(|n| {
            let t = solve_mode_limit(layout, n, &rings_of(n))?;
            let u = mode_h1_norm_sq(&t.u, layout.r2(), layout.r3())?;
            let v = mode_h1_norm_sq(&t.v, layout.r2(), layout.r3())?;
            Ok((u + v).sqrt())
        })
        .collect()
}

/// Verdict for a ring source. Norms run to at least `min_modes − 1` so that finitely many
/// modes read as a vanishing tail rather than an inconclusive short sequence.
pub fn classify_source(layout: &RadialLayout, source: &crate::geometry::SourceSpec) -> Result<CompatibilityVerdict> {
    let opts = CompatibilityOptions::default();
    let top = source.modes().last().copied().unwrap_or(0);
    let n_max = top.max(opts.min_modes as u32 - 1);
    let norms = limit_mode_norms(layout, n_max, |n| source.mode_rings(n))?;
    Ok(compatibility_test_with(&norms, &opts))
}
