//! TOML experiment configuration.
//!
//! ```toml
//! [layout]
//! r1 = 1.0
//! r2 = 2.0
//! R = 8.0
//!
//! [media]
//! kind = "isotropic-const"
//! a = 1.0
//! sigma = 1.0
//!
//! [[source]]
//! n = 0
//! n_to = 20
//! re = 1.0
//! r0 = 5.0
//!
//! [sweep]
//! deltas = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5]
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{MediaSpec, RadialLayout, RegionMedium, RingSource, SourceSpec, C64};
use crate::transforms::MapSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    pub r1: f64,
    pub r2: f64,
    #[serde(rename = "R")]
    pub outer: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionEntry {
    /// `[a11, a12, a22]`
    pub a: [f64; 3],
    #[serde(default = "one")]
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MediaConfig {
    IsotropicConst {
        #[serde(default = "one")]
        a: f64,
        #[serde(default = "one")]
        sigma: f64,
    },
    /// Entries for core, shell, image and outer regions, in that order.
    MatrixTable { regions: Vec<RegionEntry> },
}

impl Default for MediaConfig {
    fn default() -> Self {
        MediaConfig::IsotropicConst { a: 1.0, sigma: 1.0 }
    }
}

/// One ring, or one ring per mode in `n..=n_to` with the same amplitude and radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceEntry {
    pub n: u32,
    #[serde(default)]
    pub n_to: Option<u32>,
    #[serde(default = "one")]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    pub r0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverPath {
    /// Spectral for radial isotropic media at `k = 0`, FEM otherwise.
    #[default]
    Auto,
    Spectral,
    Fem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Strictly decreasing and positive; a trailing `0` requests the spectral limit row.
    pub deltas: Vec<f64>,
    /// Fixed mode truncation; `max(32, ⌈4 ln(1/δ)⌉)` when absent.
    pub modes: Option<u32>,
    pub h: f64,
    pub k: f64,
    pub path: SolverPath,
    /// The FEM path drops smaller losses.
    pub fem_min_delta: f64,
    pub energy_tol: f64,
    pub radial_samples: usize,
    pub angular_samples: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            deltas: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
            modes: None,
            h: 0.05,
            k: 0.0,
            path: SolverPath::Auto,
            fem_min_delta: 1e-2,
            energy_tol: 1e-9,
            radial_samples: 32,
            angular_samples: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvisibilityConfig {
    /// Width of the excluded band above `r3`; `0.1·r3` when absent.
    pub margin: Option<f64>,
    pub tol: f64,
    /// Rows with `δ ≤ tol_delta` must meet `tol`.
    pub tol_delta: f64,
}

impl Default for InvisibilityConfig {
    fn default() -> Self {
        Self { margin: None, tol: 1e-2, tol_delta: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlowupConfig {
    /// Number of the largest losses left out of the fit.
    pub fit_skip: usize,
    pub min_r_squared: f64,
}

impl Default for BlowupConfig {
    fn default() -> Self {
        Self { fit_skip: 1, min_r_squared: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrossvalConfig {
    pub hs: Vec<f64>,
    pub deltas: Vec<f64>,
    pub l2_tol: f64,
    pub h1_tol: f64,
    /// Rows with `h ≤ tol_h` and `δ ≥ tol_min_delta` are held to the tolerances.
    pub tol_h: f64,
    pub tol_min_delta: f64,
    /// Hold every row to the tolerances.
    pub enforce_all: bool,
    /// Replace the shell by the background (`s ≡ 1`) and compare with the free-space field.
    pub force_unit: bool,
}

impl Default for CrossvalConfig {
    fn default() -> Self {
        Self {
            hs: vec![0.05, 0.025],
            deltas: vec![1e-1, 1e-2],
            l2_tol: 0.02,
            h1_tol: 0.05,
            tol_h: 0.05,
            tol_min_delta: 1e-2,
            enforce_all: false,
            force_unit: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderField {
    Delta,
    Limit,
    Free,
    /// `NI(f)` and `u_δ` side by side.
    #[default]
    Compare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderConfig {
    pub width: usize,
    pub height: usize,
    pub max_pixels: usize,
    pub field: RenderField,
    pub delta: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { width: 200, height: 200, max_pixels: 1 << 22, field: RenderField::Compare, delta: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckConfig {
    /// Kelvin maps at `r2`, `r3` when absent.
    pub f: Option<MapSpec>,
    pub g: Option<MapSpec>,
    pub tol: f64,
    pub domain_samples: usize,
    pub boundary_samples: usize,
    pub include_sigma: bool,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self { f: None, g: None, tol: 1e-8, domain_samples: 2048, boundary_samples: 512, include_sigma: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Sampling seed for the checkers.
    #[serde(default)]
    pub seed: u64,
    pub layout: LayoutConfig,
    #[serde(default)]
    pub media: MediaConfig,
    #[serde(default, rename = "source")]
    pub sources: Vec<SourceEntry>,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub invisibility: InvisibilityConfig,
    #[serde(default)]
    pub blowup: BlowupConfig,
    #[serde(default)]
    pub crossval: CrossvalConfig,
    #[serde(default)]
    pub render: RenderConfig,
    #[serde(default)]
    pub check: CheckConfig,
}

fn one() -> f64 {
    1.0
}

fn schedule_errors(path: &str, deltas: &[f64], allow_limit: bool, out: &mut Vec<String>) {
    if deltas.is_empty() {
        out.push(format!("{path}: must not be empty"));
    }
    for (i, &d) in deltas.iter().enumerate() {
        let terminal_zero = allow_limit && d == 0.0 && i + 1 == deltas.len() && i > 0;
        if !(d.is_finite() && (d > 0.0 || terminal_zero)) {
            out.push(format!("{path}[{i}]: {d} must be positive (only a trailing 0 is allowed)"));
        }
        if i > 0 && !(d < deltas[i - 1]) {
            out.push(format!("{path}[{i}]: schedule must be strictly decreasing"));
        }
    }
}

impl ExperimentConfig {
    /// A baseline on layout (1, 2, 8) with the given sources and defaults elsewhere.
    pub fn baseline(sources: Vec<SourceEntry>) -> Self {
        Self {
            seed: 0,
            layout: LayoutConfig { r1: 1.0, r2: 2.0, outer: 8.0 },
            media: MediaConfig::default(),
            sources,
            sweep: SweepConfig::default(),
            invisibility: InvisibilityConfig::default(),
            blowup: BlowupConfig::default(),
            crossval: CrossvalConfig::default(),
            render: RenderConfig::default(),
            check: CheckConfig::default(),
        }
    }

    /// Parses and validates; every problem is reported with its path.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string().trim().to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let mut e = Vec::new();
        let layout = match self.layout() {
            Ok(l) => Some(l),
            Err(err) => {
                e.push(format!("layout: {err}"));
                None
            }
        };
        match &self.media {
            MediaConfig::IsotropicConst { a, sigma } => {
                if !(a.is_finite() && *a > 0.0) {
                    e.push(format!("media.a: {a} must be positive"));
                }
                if !(sigma.is_finite() && *sigma > 0.0) {
                    e.push(format!("media.sigma: {sigma} must be positive"));
                }
            }
            MediaConfig::MatrixTable { regions } => {
                if regions.len() != 4 {
                    e.push(format!("media.regions: expected 4 entries (core, shell, image, outer), got {}", regions.len()));
                }
                for (i, r) in regions.iter().enumerate() {
                    let [a11, a12, a22] = r.a;
                    if !(a11 > 0.0 && a11 * a22 - a12 * a12 > 0.0) {
                        e.push(format!("media.regions[{i}].a: matrix must be symmetric positive definite"));
                    }
                    if !(r.sigma.is_finite() && r.sigma > 0.0) {
                        e.push(format!("media.regions[{i}].sigma: {} must be positive", r.sigma));
                    }
                }
            }
        }
        for (i, s) in self.sources.iter().enumerate() {
            if let Some(to) = s.n_to {
                if to < s.n {
                    e.push(format!("source[{i}].n_to: {to} is below n = {}", s.n));
                }
            }
            if !(s.re.is_finite() && s.im.is_finite()) {
                e.push(format!("source[{i}]: amplitude must be finite"));
            }
            if let Some(l) = &layout {
                let tol = l.interface_tolerance();
                if !(s.r0 > 0.0 && s.r0 < l.outer_radius() - tol) {
                    e.push(format!("source[{i}].r0: {} must lie in (0, R)", s.r0));
                } else if l.interfaces().iter().any(|&r| (s.r0 - r).abs() <= tol) {
                    e.push(format!("source[{i}].r0: {} lies on an interface circle", s.r0));
                }
            }
        }
        let sw = &self.sweep;
        schedule_errors("sweep.deltas", &sw.deltas, true, &mut e);
        if !(sw.h > 0.0) {
            e.push(format!("sweep.h: {} must be positive", sw.h));
        }
        if !(sw.k >= 0.0 && sw.k.is_finite()) {
            e.push(format!("sweep.k: {} must be nonnegative", sw.k));
        }
        if !(sw.fem_min_delta > 0.0) {
            e.push("sweep.fem_min_delta: must be positive".into());
        }
        if sw.radial_samples == 0 || sw.angular_samples == 0 {
            e.push("sweep: sample counts must be positive".into());
        }
        if let Some(m) = self.invisibility.margin {
            if !(m >= 0.0) {
                e.push(format!("invisibility.margin: {m} must be nonnegative"));
            }
        }
        let cv = &self.crossval;
        schedule_errors("crossval.deltas", &cv.deltas, false, &mut e);
        for (i, &h) in cv.hs.iter().enumerate() {
            if !(h > 0.0) {
                e.push(format!("crossval.hs[{i}]: {h} must be positive"));
            }
        }
        if cv.hs.is_empty() {
            e.push("crossval.hs: must not be empty".into());
        }
        let r = &self.render;
        if r.width == 0 || r.height == 0 {
            e.push("render: width and height must be positive".into());
        }
        if !(r.delta > 0.0) {
            e.push(format!("render.delta: {} must be positive", r.delta));
        }
        if !(self.check.tol > 0.0) {
            e.push("check.tol: must be positive".into());
        }
        if e.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(e))
        }
    }

    pub fn layout(&self) -> Result<RadialLayout> {
        RadialLayout::new(self.layout.r1, self.layout.r2, self.layout.outer)
    }

    pub fn media(&self) -> Result<MediaSpec> {
        let layout = self.layout()?;
        Ok(match &self.media {
            MediaConfig::IsotropicConst { a, sigma } => MediaSpec::isotropic(layout, *a, *sigma),
            MediaConfig::MatrixTable { regions } => {
                let t: [RegionEntry; 4] = regions
                    .clone()
                    .try_into()
                    .map_err(|_| Error::Config(vec!["media.regions: expected 4 entries".into()]))?;
                MediaSpec::region_table(layout, t.map(|r| RegionMedium { a: r.a, sigma: r.sigma }))
            }
        })
    }

    pub fn source(&self) -> SourceSpec {
        let rings = self
            .sources
            .iter()
            .flat_map(|s| {
                let amplitude = C64::new(s.re, s.im);
                (s.n..=s.n_to.unwrap_or(s.n)).map(move |n| RingSource { n, amplitude, r0: s.r0 })
            })
            .collect();
        SourceSpec::rings(rings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[layout]
r1 = 1.0
r2 = 2.0
R = 8.0

[[source]]
n = 0
n_to = 20
r0 = 5.0
"#;

    #[test]
    fn parses_the_baseline() {
        let cfg = ExperimentConfig::from_toml_str(BASE).unwrap();
        assert_eq!(cfg.source().rings.len(), 21);
        assert_eq!(cfg.sweep.deltas.len(), 5);
        assert_eq!(cfg.media().unwrap().radial_isotropic(), Some((1.0, 1.0)));
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn reports_every_problem_with_a_path() {
        let text = format!("{BASE}\n[sweep]\ndeltas = [1e-2, 1e-1, -1.0]\nh = 0\n");
        let Err(Error::Config(errs)) = ExperimentConfig::from_toml_str(&text) else { panic!() };
        assert!(errs.iter().any(|e| e.starts_with("sweep.deltas[1]")), "{errs:?}");
        assert!(errs.iter().any(|e| e.starts_with("sweep.deltas[2]")));
        assert!(errs.iter().any(|e| e.starts_with("sweep.h")));
    }

    #[test]
    fn terminal_zero_is_the_limit_row() {
        let text = format!("{BASE}\n[sweep]\ndeltas = [1e-1, 1e-2, 0.0]\n");
        assert!(ExperimentConfig::from_toml_str(&text).is_ok());
        let text = format!("{BASE}\n[sweep]\ndeltas = [0.0]\n");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn rejects_sources_on_interfaces_and_unknown_keys() {
        let text = BASE.replace("r0 = 5.0", "r0 = 4.0");
        let Err(Error::Config(errs)) = ExperimentConfig::from_toml_str(&text) else { panic!() };
        assert!(errs[0].starts_with("source[0].r0"));
        assert!(ExperimentConfig::from_toml_str(&format!("{BASE}\nbogus = 1\n")).is_err());
    }

    #[test]
    fn matrix_table_media() {
        let text = format!(
            "{BASE}\n[media]\nkind = \"matrix-table\"\nregions = [{{a = [1.0, 0.0, 1.0]}}, {{a = [2.0, 0.1, 1.0]}}, {{a = [1.0, 0.0, 1.0]}}, {{a = [1.0, 0.0, 1.0]}}]\n"
        );
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg.media().unwrap().radial_isotropic(), None);
        let bad = text.replace("[2.0, 0.1, 1.0]", "[1.0, 2.0, 1.0]");
        let Err(Error::Config(errs)) = ExperimentConfig::from_toml_str(&bad) else { panic!() };
        assert!(errs[0].starts_with("media.regions[1].a"));
    }
}
