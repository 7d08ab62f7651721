//! δ-sweeps, the invisibility check and the blow-up fit.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{energy_identity_residual, error_norms, field_norms, Field};
use crate::geometry::{LossCoefficient, RadialLayout, RegionTag, SourceSpec};
use crate::harness::{annulus_grid, backend, sup_relative, Backend, ExperimentConfig, FemContext};
use crate::spectral::{
    self, classify_source, field_h1_norm_sq, field_l2_distance_sq, field_l2_norm_sq, mode_truncation, CompatibilityStatus,
    CompatibilityVerdict, RadialField,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    pub h1_norm_total: f64,
    pub h1_norm_shell: f64,
    #[serde(rename = "l2_err_vs_NI")]
    pub l2_err_vs_ni: f64,
    pub sup_err_outside_r3: f64,
    pub energy_residual: f64,
}

impl SweepRow {
    pub const HEADER: [&'static str; 6] =
        ["delta", "h1_norm_total", "h1_norm_shell", "l2_err_vs_NI", "sup_err_outside_r3", "energy_residual"];

    pub fn values(&self) -> [f64; 6] {
        [self.delta, self.h1_norm_total, self.h1_norm_shell, self.l2_err_vs_ni, self.sup_err_outside_r3, self.energy_residual]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    /// `"spectral"` or `"fem"`.
    pub path: &'static str,
    pub rows: Vec<SweepRow>,
    /// Losses of the schedule the path did not run.
    pub skipped: Vec<f64>,
}

impl SweepReport {
    /// Every energy residual within `tol` and every entry finite.
    pub fn passes(&self, tol: f64) -> bool {
        self.rows.iter().all(|r| r.values().iter().all(|v| v.is_finite() && *v >= 0.0) && r.energy_residual <= tol)
    }
}

fn truncation(cfg: &ExperimentConfig, source: &SourceSpec, delta: f64) -> u32 {
    cfg.sweep.modes.unwrap_or_else(|| {
        if delta > 0.0 {
            mode_truncation(delta)
        } else {
            source.modes().last().copied().unwrap_or(0)
        }
    })
}

/// Sample points of `r3 + margin < |x| < R`.
fn outer_grid(cfg: &ExperimentConfig, layout: &RadialLayout) -> Vec<crate::geometry::Point> {
    let margin = cfg.invisibility.margin.unwrap_or(0.1 * layout.r3());
    annulus_grid(layout.r3() + margin, layout.outer_radius(), cfg.sweep.radial_samples, cfg.sweep.angular_samples)
}

fn relative(err_sq: f64, ref_sq: f64) -> f64 {
    if ref_sq > 0.0 {
        (err_sq / ref_sq).sqrt()
    } else {
        err_sq.sqrt()
    }
}

fn spectral_row(cfg: &ExperimentConfig, layout: &RadialLayout, src: &SourceSpec, delta: f64) -> Result<SweepRow> {
    let n_max = Some(truncation(cfg, src, delta));
    let big_r = layout.outer_radius();
    let ni = spectral::limit_field(layout, src, n_max)?;
    let u = if delta > 0.0 { spectral::solve_source_delta(layout, src, delta, n_max)? } else { ni.clone() };
    let free = spectral::solve_source_free(layout, src, n_max)?;
    let grid = outer_grid(cfg, layout);
    let energy_residual = if delta > 0.0 {
        u.modes()
            .iter()
            .map(|m| spectral::energy_identity_residual(layout, m, &src.mode_rings(m.n()), delta))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    Ok(SweepRow {
        delta,
        h1_norm_total: field_h1_norm_sq(&u, 0.0, big_r)?.sqrt(),
        h1_norm_shell: field_h1_norm_sq(&u, layout.r1(), layout.r2())?.sqrt(),
        l2_err_vs_ni: relative(field_l2_distance_sq(&u, &ni, 0.0, big_r)?, field_l2_norm_sq(&ni, 0.0, big_r)?),
        sup_err_outside_r3: sup_relative(|x| u.value(x), |x| free.value(x), &grid),
        energy_residual,
    })
}

/// Spectral `NI(f)` and free field, available for radial isotropic media at `k = 0`.
fn spectral_references(cfg: &ExperimentConfig, layout: &RadialLayout, src: &SourceSpec) -> Result<Option<(RadialField, RadialField)>> {
    let media = cfg.media()?;
    match media.radial_isotropic() {
        Some((a, _)) if cfg.sweep.k == 0.0 => {
            let s = src.scaled(1.0 / a);
            let n_max = s.modes().last().copied();
            Ok(Some((spectral::limit_field(layout, &s, n_max)?, spectral::solve_source_free(layout, &s, n_max)?)))
        }
        _ => Ok(None),
    }
}

fn fem_rows(cfg: &ExperimentConfig, deltas: &[f64]) -> Result<Vec<SweepRow>> {
    let layout = cfg.layout()?;
    let src = cfg.source();
    let ctx = FemContext::new(&cfg.media()?, &src, cfg.sweep.h, cfg.sweep.k)?;
    let grid = outer_grid(cfg, &layout);
    let solved = deltas.par_iter().map(|&d| ctx.solve(LossCoefficient::new(d))).collect::<Result<Vec<_>>>()?;
    let refs = spectral_references(cfg, &layout, &src)?;
    let (free_fem, smallest): (Option<Field>, Option<&Field>) = match &refs {
        Some(_) => (None, None),
        None => (Some(ctx.solve(LossCoefficient::unit())?.0), solved.last().map(|s| &s.0)),
    };
    solved
        .iter()
        .zip(deltas)
        .map(|((u, sys, load), &delta)| {
            let all = field_norms(u, &RegionTag::ALL);
            let (l2, sup) = match (&refs, &free_fem, smallest) {
                (Some((ni, free)), _, _) => {
                    let e = error_norms(u, ni, &RegionTag::ALL);
                    (e.l2_rel(), sup_relative(ctx.sampler(u), |x| free.value(x), &grid))
                }
                (None, Some(free), Some(last)) => {
                    let d = field_norms(&u.sub(last)?, &RegionTag::ALL).l2;
                    let s = field_norms(last, &RegionTag::ALL).l2;
                    (if s > 0.0 { d / s } else { d }, sup_relative(ctx.sampler(u), ctx.sampler(free), &grid))
                }
                _ => unreachable!("references exist on one branch"),
            };
            Ok(SweepRow {
                delta,
                h1_norm_total: all.h1,
                h1_norm_shell: field_norms(u, &[RegionTag::Shell]).h1,
                l2_err_vs_ni: l2,
                sup_err_outside_r3: sup,
                energy_residual: energy_identity_residual(u, sys, load)?,
            })
        })
        .collect()
}

/// One row per loss of the schedule, ordered as the schedule.
pub fn run_delta_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let layout = cfg.layout()?;
    let media = cfg.media()?;
    match backend(cfg, &media)? {
        Backend::Spectral { a } => {
            let src = cfg.source().scaled(1.0 / a);
            let rows = cfg
                .sweep
                .deltas
                .par_iter()
                .map(|&d| spectral_row(cfg, &layout, &src, d))
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepReport { path: "spectral", rows, skipped: Vec::new() })
        }
        Backend::Fem => {
            let (run, skipped): (Vec<f64>, Vec<f64>) =
                cfg.sweep.deltas.iter().partition(|&&d| d >= cfg.sweep.fem_min_delta);
            let rows = if run.is_empty() { Vec::new() } else { fem_rows(cfg, &run)? };
            Ok(SweepReport { path: "fem", rows, skipped })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvisibilityRow {
    pub delta: f64,
    pub sup_rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvisibilityReport {
    pub margin: f64,
    pub rows: Vec<InvisibilityRow>,
    /// Errors never increase as the loss decreases.
    pub monotone: bool,
    /// Monotone, and every row with `δ ≤ tol_delta` is below `tol`.
    pub pass: bool,
}

/// Sup-relative distance of `u_δ` from the free field on `r3 + margin < |x| < R`.
pub fn run_invisibility_check(cfg: &ExperimentConfig) -> Result<InvisibilityReport> {
    cfg.validate()?;
    let layout = cfg.layout()?;
    let media = cfg.media()?;
    let src = cfg.source();
    if let Some(r) = src.rings.iter().find(|r| r.r0 <= layout.r3()) {
        return Err(Error::Refused(format!(
            "ring at r0 = {} lies inside the image disk r <= {}; use the blow-up check",
            r.r0,
            layout.r3()
        )));
    }
    let margin = cfg.invisibility.margin.unwrap_or(0.1 * layout.r3());
    let grid = outer_grid(cfg, &layout);
    let deltas: Vec<f64> = cfg.sweep.deltas.iter().copied().filter(|&d| d > 0.0).collect();
    let errors: Vec<f64> = match backend(cfg, &media)? {
        Backend::Spectral { a } => {
            let s = src.scaled(1.0 / a);
            deltas
                .par_iter()
                .map(|&d| {
                    let n_max = Some(truncation(cfg, &s, d));
                    let u = spectral::solve_source_delta(&layout, &s, d, n_max)?;
                    let free = spectral::solve_source_free(&layout, &s, n_max)?;
                    Ok(sup_relative(|x| u.value(x), |x| free.value(x), &grid))
                })
                .collect::<Result<_>>()?
        }
        Backend::Fem => {
            let ctx = FemContext::new(&media, &src, cfg.sweep.h, cfg.sweep.k)?;
            let free = ctx.solve(LossCoefficient::unit())?.0;
            deltas
                .iter()
                .filter(|&&d| d >= cfg.sweep.fem_min_delta)
                .map(|&d| {
                    let u = ctx.solve(LossCoefficient::new(d))?.0;
                    Ok(sup_relative(ctx.sampler(&u), ctx.sampler(&free), &grid))
                })
                .collect::<Result<_>>()?
        }
    };
    let rows: Vec<InvisibilityRow> =
        deltas.iter().zip(&errors).map(|(&delta, &sup_rel_err)| InvisibilityRow { delta, sup_rel_err }).collect();
    let monotone = rows.windows(2).all(|w| w[1].sup_rel_err <= w[0].sup_rel_err);
    let tol = &cfg.invisibility;
    let pass = monotone && rows.iter().filter(|r| r.delta <= tol.tol_delta).all(|r| r.sup_rel_err < tol.tol);
    Ok(InvisibilityReport { margin, rows, monotone, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupReport {
    pub verdict: CompatibilityVerdict,
    pub deltas: Vec<f64>,
    pub norms: Vec<f64>,
    /// Losses entering the fit of `ln ‖u_δ‖ = c − γ ln δ`.
    pub fit_deltas: Vec<f64>,
    pub gamma: f64,
    pub r_squared: f64,
    pub pass: bool,
}

impl BlowupReport {
    /// `‖u_b‖ / ‖u_a‖` for two losses of the schedule.
    pub fn growth(&self, a: f64, b: f64) -> Option<f64> {
        let find = |d: f64| self.deltas.iter().position(|&x| (x - d).abs() <= 1e-12 * d).map(|i| self.norms[i]);
        Some(find(b)? / find(a)?)
    }
}

/// Least-squares slope and `R²` of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (slope, intercept, r2)
}

/// Fits `‖u_δ‖_{H¹(Ω)} ∝ δ^{−γ}`; refuses sources the classifier does not call incompatible.
pub fn run_blowup_check(cfg: &ExperimentConfig) -> Result<BlowupReport> {
    cfg.validate()?;
    let layout = cfg.layout()?;
    let media = cfg.media()?;
    let src = cfg.source();
    let Some((a, _)) = media.radial_isotropic() else {
        return Err(Error::Refused("the compatibility classifier needs radial isotropic media".into()));
    };
    let verdict = classify_source(&layout, &src)?;
    if verdict.status != CompatibilityStatus::Incompatible {
        return Err(Error::Refused(format!(
            "source is {:?} (mode growth ratio {:.4}); the norm stays bounded as δ → 0",
            verdict.status, verdict.ratio
        )));
    }
    let deltas: Vec<f64> = cfg.sweep.deltas.iter().copied().filter(|&d| d > 0.0).collect();
    let norms: Vec<f64> = match backend(cfg, &media)? {
        Backend::Spectral { .. } => {
            let s = src.scaled(1.0 / a);
            deltas
                .par_iter()
                .map(|&d| {
                    let u = spectral::solve_source_delta(&layout, &s, d, Some(truncation(cfg, &s, d)))?;
                    Ok(field_h1_norm_sq(&u, 0.0, layout.outer_radius())?.sqrt())
                })
                .collect::<Result<_>>()?
        }
        Backend::Fem => {
            let ctx = FemContext::new(&media, &src, cfg.sweep.h, cfg.sweep.k)?;
            deltas
                .iter()
                .map(|&d| Ok(field_norms(&ctx.solve(LossCoefficient::new(d))?.0, &RegionTag::ALL).h1))
                .collect::<Result<_>>()?
        }
    };
    let skip = cfg.blowup.fit_skip.min(deltas.len());
    let fit_deltas = deltas[skip..].to_vec();
    if fit_deltas.len() < 2 {
        return Err(Error::Config(vec!["blowup.fit_skip: fewer than two losses left to fit".into()]));
    }
    let x: Vec<f64> = fit_deltas.iter().map(|d| d.ln()).collect();
    let y: Vec<f64> = norms[skip..].iter().map(|n| n.ln()).collect();
    let (slope, _, r_squared) = linear_fit(&x, &y);
    let gamma = -slope;
    let pass = gamma > 0.0 && r_squared > cfg.blowup.min_r_squared;
    Ok(BlowupReport { verdict, deltas, norms, fit_deltas, gamma, r_squared, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::SourceEntry;

    fn rings(n: u32, n_to: Option<u32>, r0: f64) -> ExperimentConfig {
        ExperimentConfig::baseline(vec![SourceEntry { n, n_to, re: 1.0, im: 0.0, r0 }])
    }

    #[test]
    fn empty_source_gives_zero_rows() {
        let cfg = ExperimentConfig::baseline(Vec::new());
        let rep = run_delta_sweep(&cfg).unwrap();
        assert_eq!(rep.rows.len(), 5);
        assert!(rep.rows.iter().all(|r| r.values()[1..].iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn compatible_sweep_converges() {
        let rep = run_delta_sweep(&rings(0, Some(20), 5.0)).unwrap();
        assert_eq!(rep.path, "spectral");
        let l2: Vec<f64> = rep.rows.iter().map(|r| r.l2_err_vs_ni).collect();
        assert!(l2.windows(2).all(|w| w[1] < w[0]), "{l2:?}");
        assert!(rep.passes(1e-9));
    }

    #[test]
    fn limit_row() {
        let mut cfg = rings(0, Some(20), 5.0);
        cfg.sweep.deltas = vec![1e-2, 0.0];
        let rep = run_delta_sweep(&cfg).unwrap();
        assert_eq!(rep.rows[1].l2_err_vs_ni, 0.0);
        assert!(rep.rows[1].h1_norm_total > 0.0);
    }

    #[test]
    fn invisibility_refuses_inner_sources() {
        assert!(matches!(run_invisibility_check(&rings(2, None, 3.0)), Err(Error::Refused(_))));
        let rep = run_invisibility_check(&ExperimentConfig::baseline(Vec::new())).unwrap();
        assert!(rep.rows.iter().all(|r| r.sup_rel_err == 0.0) && rep.pass);
    }

    #[test]
    fn blowup_refuses_compatible_sources() {
        assert!(matches!(run_blowup_check(&rings(3, None, 3.0)), Err(Error::Refused(_))));
        assert!(matches!(run_blowup_check(&rings(0, Some(20), 5.0)), Err(Error::Refused(_))));
    }

    #[test]
    fn fit_recovers_a_power_law() {
        let x: Vec<f64> = [1e-1f64, 1e-2, 1e-3].iter().map(|d| d.ln()).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (s, c, r2) = linear_fit(&x, &y);
        assert!((s + 0.5).abs() < 1e-12 && (c - 2.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fem_path_runs_non_radial_media() {
        let text = r#"
[layout]
r1 = 1.0
r2 = 2.0
R = 8.0
[media]
kind = "matrix-table"
regions = [{a = [1.0, 0.0, 1.0]}, {a = [1.5, 0.2, 1.0]}, {a = [1.0, 0.0, 1.0]}, {a = [1.0, 0.0, 1.0]}]
[[source]]
n = 1
r0 = 5.0
[sweep]
deltas = [1e-1, 1e-2, 1e-3]
h = 0.2
"#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        let rep = run_delta_sweep(&cfg).unwrap();
        assert_eq!(rep.path, "fem");
        assert_eq!(rep.rows.len(), 2);
        assert_eq!(rep.skipped, vec![1e-3]);
        assert_eq!(rep.rows[1].l2_err_vs_ni, 0.0);
        assert!(rep.passes(1e-9), "{rep:?}");
    }
}
