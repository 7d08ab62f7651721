//! Experiment orchestration: δ-sweeps, invisibility and blow-up checks, cross-validation,
//! complementarity checks and static artifacts.

pub mod check;
pub mod config;
pub mod crossval;
pub mod output;
pub mod render;
pub mod sweep;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{self, AssembledSystem, Field, Mesh, PointLocator};
use crate::geometry::{LossCoefficient, MediaSpec, Point, RadialLayout, SourceSpec, C64};

pub use check::run_check_complementary;
pub use config::{ExperimentConfig, SolverPath};
pub use crossval::{run_cross_validation, CrossvalReport, CrossvalRow};
pub use render::{render_config, render_field_svg, render_panels_svg, MeshSampler, Panel, Sampled};
pub use sweep::{
    run_blowup_check, run_delta_sweep, run_invisibility_check, BlowupReport, InvisibilityReport, InvisibilityRow,
    SweepReport, SweepRow,
};

/// Which solver an experiment runs on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    /// Separated variables; sources are divided by the isotropic `a`.
    Spectral { a: f64 },
    Fem,
}

pub fn backend(cfg: &ExperimentConfig, media: &MediaSpec) -> Result<Backend> {
    let radial = media.radial_isotropic().filter(|_| cfg.sweep.k == 0.0);
    match (cfg.sweep.path, radial) {
        (SolverPath::Fem, _) => Ok(Backend::Fem),
        (_, Some((a, _))) => Ok(Backend::Spectral { a }),
        (SolverPath::Spectral, None) => Err(Error::Config(vec![
            "sweep.path: the spectral path needs radial isotropic media and k = 0".into(),
        ])),
        (SolverPath::Auto, None) => Ok(Backend::Fem),
    }
}

/// Polar grid on `lo < |x| < hi`, cell-centred in both directions.
pub fn annulus_grid(lo: f64, hi: f64, radial: usize, angular: usize) -> Vec<Point> {
    let mut pts = Vec::with_capacity(radial * angular);
    for i in 0..radial {
        let r = lo + (hi - lo) * (i as f64 + 0.5) / radial as f64;
        for j in 0..angular {
            let t = std::f64::consts::TAU * (j as f64 + 0.5) / angular as f64;
            pts.push(Point::new(r * t.cos(), r * t.sin()));
        }
    }
    pts
}

/// `max |u − v| / max |v|` over the samples, or the absolute maximum when `v` vanishes.
pub fn sup_relative(u: impl Fn(Point) -> C64, v: impl Fn(Point) -> C64, pts: &[Point]) -> f64 {
    let (mut err, mut scale) = (0.0f64, 0.0f64);
    for &x in pts {
        let b = v(x);
        err = err.max((u(x) - b).norm());
        scale = scale.max(b.norm());
    }
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

/// Mesh with vertex circles at every ring radius.
pub fn source_mesh(layout: &RadialLayout, h: f64, source: &SourceSpec) -> Result<Mesh> {
    let mut radii: Vec<f64> = source.rings.iter().map(|r| r.r0).collect();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    fem::generate_disk_mesh_with(layout, h, &radii)
}

/// A mesh, its locator and the problem data for repeated FEM solves.
pub struct FemContext {
    pub mesh: Arc<Mesh>,
    pub locator: PointLocator,
    pub media: MediaSpec,
    pub source: SourceSpec,
    pub k: f64,
}

impl FemContext {
    pub fn new(media: &MediaSpec, source: &SourceSpec, h: f64, k: f64) -> Result<Self> {
        let mesh = Arc::new(source_mesh(media.layout(), h, source)?);
        let locator = PointLocator::new(&mesh);
        Ok(Self { mesh, locator, media: media.clone(), source: source.clone(), k })
    }

    /// Field, system and load vector for one loss coefficient.
    pub fn solve(&self, loss: LossCoefficient) -> Result<(Field, AssembledSystem, Vec<C64>)> {
        let sys = fem::assemble_system(&self.mesh, &self.media, loss, self.k)?;
        let load = fem::source_load(&self.mesh, &self.source, &loss)?;
        let field = fem::solve_forward(&self.mesh, &sys, &load)?;
        Ok((field, sys, load))
    }

    pub fn sampler(&self, field: &Field) -> impl Fn(Point) -> C64 + '_ {
        let f = field.clone();
        move |x| f.eval(&self.locator, x).unwrap_or(C64::new(0.0, 0.0))
    }
}
