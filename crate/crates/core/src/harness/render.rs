//! Deterministic SVG heatmaps of `|Re u|` with the interface circles overlaid.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{Field, PointLocator};
use crate::geometry::{LossCoefficient, Point, RadialLayout, C64};
use crate::harness::config::RenderField;
use crate::harness::{backend, Backend, ExperimentConfig, FemContext};
use crate::spectral::{self, mode_truncation, RadialField};

/// Anything that can be evaluated pointwise in the disk.
pub trait Sampled: Sync {
    fn sample(&self, x: Point) -> Option<C64>;
}

impl Sampled for RadialField {
    fn sample(&self, x: Point) -> Option<C64> {
        Some(self.value(x))
    }
}

/// A FEM field with its point locator.
pub struct MeshSampler<'a> {
    pub field: &'a Field,
    pub locator: PointLocator,
}

impl<'a> MeshSampler<'a> {
    pub fn new(field: &'a Field) -> Self {
        Self { locator: PointLocator::new(field.mesh()), field }
    }
}

impl Sampled for MeshSampler<'_> {
    fn sample(&self, x: Point) -> Option<C64> {
        self.field.eval(&self.locator, x)
    }
}

pub struct Panel<'a> {
    pub title: String,
    pub field: &'a dyn Sampled,
}

const LEVELS: usize = 64;
const STOPS: [(f64, [f64; 3]); 5] = [
    (0.0, [13.0, 8.0, 135.0]),
    (0.25, [126.0, 3.0, 168.0]),
    (0.5, [204.0, 71.0, 120.0]),
    (0.75, [248.0, 149.0, 64.0]),
    (1.0, [240.0, 249.0, 33.0]),
];

fn colour(level: usize) -> String {
    let t = level as f64 / (LEVELS - 1) as f64;
    let k = STOPS.windows(2).position(|w| t <= w[1].0).unwrap_or(STOPS.len() - 2);
    let (t0, c0) = STOPS[k];
    let (t1, c1) = STOPS[k + 1];
    let s = (t - t0) / (t1 - t0);
    let c: Vec<u8> = (0..3).map(|i| (c0[i] + s * (c1[i] - c0[i])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Levels per pixel, `None` outside the disk or wherever the field is undefined.
fn raster(layout: &RadialLayout, f: &dyn Sampled, w: usize, h: usize) -> Vec<Option<usize>> {
    let big_r = layout.outer_radius();
    let values: Vec<Option<f64>> = (0..w * h)
        .into_par_iter()
        .map(|p| {
            let (i, j) = (p % w, p / w);
            let x = Point::new(big_r * (2.0 * (i as f64 + 0.5) / w as f64 - 1.0), big_r * (1.0 - 2.0 * (j as f64 + 0.5) / h as f64));
            if x.norm() >= big_r {
                return None;
            }
            f.sample(x).map(|u| u.re.abs())
        })
        .collect();
    let peak = values.iter().flatten().fold(0.0f64, |a, &b| if b.is_finite() { a.max(b) } else { a });
    values
        .into_iter()
        .map(|v| {
            v.map(|v| if peak > 0.0 && v.is_finite() { ((v / peak) * (LEVELS - 1) as f64).round() as usize } else { 0 })
        })
        .collect()
}

/// Panels side by side, each `width × height` pixels over `[−R, R]²`.
pub fn render_panels_svg(layout: &RadialLayout, panels: &[Panel], width: usize, height: usize, max_pixels: usize) -> Result<String> {
    let pixels = width * height * panels.len().max(1);
    if pixels > max_pixels {
        return Err(Error::RasterTooLarge { pixels, cap: max_pixels });
    }
    let big_r = layout.outer_radius();
    let title_h = 16;
    let total_w = width * panels.len().max(1);
    let total_h = height + title_h;
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total_w}" height="{total_h}" viewBox="0 0 {total_w} {total_h}" shape-rendering="crispEdges">"#).unwrap();
    writeln!(s, r##"<rect width="{total_w}" height="{total_h}" fill="#ffffff"/>"##).unwrap();
    for (k, panel) in panels.iter().enumerate() {
        let ox = k * width;
        writeln!(s, r#"<g transform="translate({ox},{title_h})">"#).unwrap();
        let levels = raster(layout, panel.field, width, height);
        for j in 0..height {
            let mut i = 0;
            while i < width {
                let Some(level) = levels[j * width + i] else {
                    i += 1;
                    continue;
                };
                let start = i;
                while i < width && levels[j * width + i] == Some(level) {
                    i += 1;
                }
                writeln!(s, r#"<rect x="{start}" y="{j}" width="{}" height="1" fill="{}"/>"#, i - start, colour(level)).unwrap();
            }
        }
        let scale = width.min(height) as f64 / (2.0 * big_r);
        let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
        for r in [layout.r1(), layout.r2(), layout.r3(), big_r] {
            writeln!(s, r##"<circle cx="{cx:.3}" cy="{cy:.3}" r="{:.3}" fill="none" stroke="#ffffff" stroke-width="1"/>"##, r * scale).unwrap();
        }
        writeln!(s, "</g>").unwrap();
        let title = panel.title.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
        writeln!(s, r#"<text x="{}" y="12" font-family="monospace" font-size="12">{title}</text>"#, ox + 4).unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn render_field_svg(layout: &RadialLayout, field: &dyn Sampled, width: usize, height: usize, max_pixels: usize) -> Result<String> {
    render_panels_svg(layout, &[Panel { title: "|Re u|".into(), field }], width, height, max_pixels)
}

/// Renders the field selected by `[render]`: spectral for radial isotropic media at `k = 0`,
/// FEM otherwise (where only `delta` and `free` are available).
pub fn render_config(cfg: &ExperimentConfig) -> Result<String> {
    cfg.validate()?;
    let layout = cfg.layout()?;
    let media = cfg.media()?;
    let r = &cfg.render;
    let pixels = r.width * r.height * if r.field == RenderField::Compare { 2 } else { 1 };
    if pixels > r.max_pixels {
        return Err(Error::RasterTooLarge { pixels, cap: r.max_pixels });
    }
    let delta_title = format!("u_delta, delta = {:e}", r.delta);
    match backend(cfg, &media)? {
        Backend::Spectral { a } => {
            let src = cfg.source().scaled(1.0 / a);
            let n_max = cfg.sweep.modes.or_else(|| Some(mode_truncation(r.delta)));
            let delta = || spectral::solve_source_delta(&layout, &src, r.delta, n_max);
            let limit = || spectral::limit_field(&layout, &src, n_max);
            let (fields, titles): (Vec<RadialField>, Vec<String>) = match r.field {
                RenderField::Delta => (vec![delta()?], vec![delta_title]),
                RenderField::Limit => (vec![limit()?], vec!["NI(f)".into()]),
                RenderField::Free => (vec![spectral::solve_source_free(&layout, &src, n_max)?], vec!["free space".into()]),
                RenderField::Compare => (vec![limit()?, delta()?], vec!["NI(f)".into(), delta_title]),
            };
            let panels: Vec<Panel> =
                fields.iter().zip(titles).map(|(f, title)| Panel { title, field: f as &dyn Sampled }).collect();
            render_panels_svg(&layout, &panels, r.width, r.height, r.max_pixels)
        }
        Backend::Fem => {
            let ctx = FemContext::new(&media, &cfg.source(), cfg.sweep.h, cfg.sweep.k)?;
            let (loss, title) = match r.field {
                RenderField::Delta => (LossCoefficient::new(r.delta), delta_title),
                RenderField::Free => (LossCoefficient::unit(), "free space".into()),
                _ => return Err(Error::Refused("the limit field is only available on the spectral path".into())),
            };
            let field = ctx.solve(loss)?.0;
            let sampler = MeshSampler::new(&field);
            render_panels_svg(&layout, &[Panel { title, field: &sampler }], r.width, r.height, r.max_pixels)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SourceSpec;
    use crate::spectral;

    fn layout() -> RadialLayout {
        RadialLayout::new(1.0, 2.0, 8.0).unwrap()
    }

    #[test]
    fn zero_field_is_uniform() {
        let zero = RadialField::new(Vec::new());
        let svg = render_field_svg(&layout(), &zero, 40, 40, 10_000).unwrap();
        let fills: std::collections::BTreeSet<&str> =
            svg.match_indices("fill=\"#").map(|(i, _)| &svg[i + 6..i + 13]).collect();
        assert_eq!(fills.len(), 2, "{fills:?}");
        assert_eq!(svg.matches("<circle").count(), 4);
    }

    #[test]
    fn deterministic_and_capped() {
        let l = layout();
        let src = SourceSpec::multi_mode(5.0, 0..=6, C64::new(1.0, 0.0));
        let u = spectral::solve_source_delta(&l, &src, 1e-2, None).unwrap();
        let a = render_field_svg(&l, &u, 64, 64, 1 << 20).unwrap();
        let b = render_field_svg(&l, &u, 64, 64, 1 << 20).unwrap();
        assert_eq!(a, b);
        assert!(matches!(render_field_svg(&l, &u, 2000, 2000, 1 << 20), Err(Error::RasterTooLarge { .. })));
    }

    #[test]
    fn config_render_is_byte_stable() {
        use crate::harness::config::SourceEntry;
        let mut cfg = ExperimentConfig::baseline(vec![SourceEntry { n: 0, n_to: Some(20), re: 1.0, im: 0.0, r0: 5.0 }]);
        cfg.render.width = 48;
        cfg.render.height = 48;
        let a = render_config(&cfg).unwrap();
        assert_eq!(a, render_config(&cfg).unwrap());
        assert_eq!(a.matches("<text").count(), 2);
        cfg.render.max_pixels = 100;
        assert!(matches!(render_config(&cfg), Err(Error::RasterTooLarge { .. })));
    }

    #[test]
    fn colour_ramp_ends() {
        assert_eq!(colour(0), "#0d0887");
        assert_eq!(colour(LEVELS - 1), "#f0f921");
    }
}
