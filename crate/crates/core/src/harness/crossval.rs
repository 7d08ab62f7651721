//! Spectral against FEM on radial configurations.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::error_norms;
use crate::geometry::{LossCoefficient, RegionTag};
use crate::harness::{ExperimentConfig, FemContext};
use crate::spectral;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossvalRow {
    pub h: f64,
    pub delta: f64,
    pub l2_rel: f64,
    pub h1_rel: f64,
    /// Whether the row is held to the tolerances.
    pub held: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceOrder {
    pub delta: f64,
    pub h_coarse: f64,
    pub h_fine: f64,
    pub l2_order: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossvalReport {
    pub rows: Vec<CrossvalRow>,
    pub orders: Vec<ConvergenceOrder>,
    pub pass: bool,
}

/// Relative L² and H¹ discrepancies per `(h, δ)`; rows are ordered by `h`, then by the schedule.
pub fn run_cross_validation(cfg: &ExperimentConfig) -> Result<CrossvalReport> {
    cfg.validate()?;
    let layout = cfg.layout()?;
    let media = cfg.media()?;
    let cv = &cfg.crossval;
    let Some((a, _)) = media.radial_isotropic() else {
        return Err(Error::Refused("cross-validation needs radial isotropic media".into()));
    };
    if cfg.sweep.k != 0.0 {
        return Err(Error::Refused("cross-validation needs k = 0".into()));
    }
    let src = cfg.source();
    let scaled = src.scaled(1.0 / a);
    let n_max = scaled.modes().last().copied();
    let deltas: Vec<f64> = if cv.force_unit { vec![cv.deltas[0]] } else { cv.deltas.clone() };
    let references = deltas
        .par_iter()
        .map(|&d| {
            if cv.force_unit {
                spectral::solve_source_free(&layout, &scaled, n_max)
            } else {
                spectral::solve_source_delta(&layout, &scaled, d, n_max)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for &h in &cv.hs {
        let ctx = FemContext::new(&media, &src, h, 0.0)?;
        let errs = deltas
            .par_iter()
            .zip(&references)
            .map(|(&d, reference)| {
                let loss = if cv.force_unit { LossCoefficient::unit() } else { LossCoefficient::new(d) };
                let (u, _, _) = ctx.solve(loss)?;
                Ok(error_norms(&u, reference, &RegionTag::ALL))
            })
            .collect::<Result<Vec<_>>>()?;
        for (&delta, e) in deltas.iter().zip(&errs) {
            let held = cv.enforce_all || (h <= cv.tol_h * (1.0 + 1e-12) && delta >= cv.tol_min_delta);
            let (l2_rel, h1_rel) = (e.l2_rel(), e.h1_rel());
            let pass = !held || (l2_rel <= cv.l2_tol && h1_rel <= cv.h1_tol);
            rows.push(CrossvalRow { h, delta, l2_rel, h1_rel, held, pass });
        }
    }
    let mut orders = Vec::new();
    for (j, &delta) in deltas.iter().enumerate() {
        let same: Vec<&CrossvalRow> = rows.iter().skip(j).step_by(deltas.len()).collect();
        for w in same.windows(2) {
            orders.push(ConvergenceOrder {
                delta,
                h_coarse: w[0].h,
                h_fine: w[1].h,
                l2_order: (w[0].l2_rel / w[1].l2_rel).ln() / (w[0].h / w[1].h).ln(),
            });
        }
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(CrossvalReport { rows, orders, pass })
}
