//! Nested radial layout, region tags, the loss coefficient and material fields.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix2, SymmetricEigen, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;
pub type C64 = Complex64;

/// Relative tolerance used when checking `r3 = r2²/r1`.
const R3_REL_TOL: f64 = 1e-12;

/// Concentric radii `r1 < r2 < r3 < R` with `r3 = r2²/r1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialLayout {
    r1: f64,
    r2: f64,
    r3: f64,
    #[serde(rename = "R")]
    outer: f64,
}

impl RadialLayout {
    /// Builds the layout from the core radius, the shell radius and the domain radius;
    /// the image radius is derived as `r2²/r1`.
    pub fn new(r1: f64, r2: f64, outer: f64) -> Result<Self> {
        if !(r1.is_finite() && r2.is_finite() && outer.is_finite()) {
            return Err(Error::InvalidLayout("radii must be finite".into()));
        }
        if r1 <= 0.0 {
            return Err(Error::InvalidLayout(format!("r1 = {r1} must be positive")));
        }
        if r2 <= r1 {
            return Err(Error::InvalidLayout(format!(
                "radii not strictly increasing: r1 = {r1}, r2 = {r2}"
            )));
        }
        let r3 = r2 * r2 / r1;
        if outer <= r3 {
            return Err(Error::InvalidLayout(format!(
                "R = {outer} must exceed r3 = r2²/r1 = {r3}"
            )));
        }
        Ok(Self { r1, r2, r3, outer })
    }

    /// Re-validates a layout whose fields came from deserialization.
    pub fn validated(self) -> Result<Self> {
        let fresh = Self::new(self.r1, self.r2, self.outer)?;
        if ((self.r3 - fresh.r3) / fresh.r3).abs() > R3_REL_TOL {
            return Err(Error::InvalidLayout(format!(
                "r3 = {} differs from r2²/r1 = {}",
                self.r3, fresh.r3
            )));
        }
        Ok(fresh)
    }

    pub fn r1(&self) -> f64 {
        self.r1
    }

    pub fn r2(&self) -> f64 {
        self.r2
    }

    pub fn r3(&self) -> f64 {
        self.r3
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer
    }

    /// Dilation factor of `G ∘ F` for the Kelvin pair, `(r3/r2)²`.
    pub fn core_dilation(&self) -> f64 {
        (self.r3 / self.r2).powi(2)
    }

    pub fn interfaces(&self) -> [f64; 3] {
        [self.r1, self.r2, self.r3]
    }

    pub fn interface_tolerance(&self) -> f64 {
        1e-12 * self.outer
    }

    /// Region of a radius. Radii within tolerance of `r1`, `r2`, `r3` or beyond `R` are rejected.
    pub fn region_of_radius(&self, r: f64) -> Result<RegionTag> {
        let tol = self.interface_tolerance();
        if r > self.outer + tol || r < 0.0 {
            return Err(Error::OutsideDomain { x: r, y: 0.0 });
        }
        if self.interfaces().iter().any(|&ri| (r - ri).abs() <= tol) {
            return Err(Error::OnInterface { x: r, y: 0.0 });
        }
        Ok(self.region_of_radius_lenient(r))
    }

    /// Region of a radius without interface rejection; interface radii go to the inner side.
    pub fn region_of_radius_lenient(&self, r: f64) -> RegionTag {
        if r <= self.r1 {
            RegionTag::Core
        } else if r <= self.r2 {
            RegionTag::Shell
        } else if r <= self.r3 {
            RegionTag::Image
        } else {
            RegionTag::Outer
        }
    }

    pub fn classify(&self, x: Point) -> Result<RegionTag> {
        self.region_of_radius(x.norm()).map_err(|e| relocate(e, x))
    }

    /// `s_δ(x)`: `−1 + iδ` in the shell and `1` elsewhere.
    pub fn s_delta(&self, delta: f64, x: Point) -> Result<C64> {
        if delta < 0.0 || !delta.is_finite() {
            return Err(Error::InvalidMedia(format!("loss δ = {delta} must be finite and ≥ 0")));
        }
        let tag = self.classify(x)?;
        Ok(LossCoefficient::new(delta).s_delta(tag))
    }
}

fn relocate(e: Error, x: Point) -> Error {
    match e {
        Error::OnInterface { .. } => Error::OnInterface { x: x.x, y: x.y },
        Error::OutsideDomain { .. } => Error::OutsideDomain { x: x.x, y: x.y },
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionTag {
    /// Ω₁
    Core,
    /// Ω₂ ∖ Ω₁, the negative-index shell
    Shell,
    /// Ω₃ ∖ Ω₂, the region cancelled by the shell
    Image,
    /// Ω ∖ Ω₃
    Outer,
}

impl RegionTag {
    pub const ALL: [RegionTag; 4] = [Self::Core, Self::Shell, Self::Image, Self::Outer];

    /// Integer id used by the mesh exchange format (1..=4).
    pub fn id(self) -> u8 {
        match self {
            Self::Core => 1,
            Self::Shell => 2,
            Self::Image => 3,
            Self::Outer => 4,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            1 => Some(Self::Core),
            2 => Some(Self::Shell),
            3 => Some(Self::Image),
            4 => Some(Self::Outer),
            _ => None,
        }
    }

    /// Inside Ω₃.
    pub fn is_inside_image_disk(self) -> bool {
        self != Self::Outer
    }
}

impl fmt::Display for RegionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Core => "core",
            Self::Shell => "shell",
            Self::Image => "image",
            Self::Outer => "outer",
        };
        f.write_str(s)
    }
}

/// The loss parameter and the sign pattern it modulates.
///
/// `unit()` replaces the shell coefficient by `+1` (and its sign by `+1`), which turns the
/// problem into the free-space one while keeping the same discretisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossCoefficient {
    pub delta: f64,
    pub forced_unit: bool,
}

impl LossCoefficient {
    pub fn new(delta: f64) -> Self {
        Self { delta, forced_unit: false }
    }

    pub fn unit() -> Self {
        Self { delta: 0.0, forced_unit: true }
    }

    pub fn s_delta(&self, tag: RegionTag) -> C64 {
        match tag {
            RegionTag::Shell if !self.forced_unit => C64::new(-1.0, self.delta),
            _ => C64::new(1.0, 0.0),
        }
    }

    /// `s₀`, the sign carried by the source term.
    pub fn s0(&self, tag: RegionTag) -> f64 {
        match tag {
            RegionTag::Shell if !self.forced_unit => -1.0,
            _ => 1.0,
        }
    }
}

pub type MatrixField = Arc<dyn Fn(Point) -> Mat2 + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type ComplexField = Arc<dyn Fn(Point) -> C64 + Send + Sync>;

/// Constant symmetric matrix and scalar for one region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionMedium {
    /// `[a11, a12, a22]`
    pub a: [f64; 3],
    pub sigma: f64,
}

impl RegionMedium {
    pub fn isotropic(a: f64, sigma: f64) -> Self {
        Self { a: [a, 0.0, a], sigma }
    }

    pub fn matrix(&self) -> Mat2 {
        Mat2::new(self.a[0], self.a[1], self.a[1], self.a[2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MediaKind {
    IsotropicConst { a: f64, sigma: f64 },
    RegionTable([RegionMedium; 4]),
    Custom,
}

/// Matrix field `A`, scalar field `Σ` and the ellipticity bound `Λ` on a layout.
#[derive(Clone)]
pub struct MediaSpec {
    layout: RadialLayout,
    a: MatrixField,
    sigma: ScalarField,
    ellipticity: f64,
    kind: MediaKind,
}

impl fmt::Debug for MediaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MediaSpec")
            .field("layout", &self.layout)
            .field("ellipticity", &self.ellipticity)
            .field("kind", &self.kind)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MediaReport {
    pub samples: usize,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl MediaSpec {
    pub fn isotropic(layout: RadialLayout, a: f64, sigma: f64) -> Self {
        let lambda = a.max(1.0 / a);
        Self {
            layout,
            a: Arc::new(move |_| Mat2::identity() * a),
            sigma: Arc::new(move |_| sigma),
            ellipticity: lambda,
            kind: MediaKind::IsotropicConst { a, sigma },
        }
    }

    /// Piecewise-constant media indexed `[core, shell, image, outer]`.
    pub fn region_table(layout: RadialLayout, table: [RegionMedium; 4]) -> Self {
        let mut lambda: f64 = 1.0;
        for m in &table {
            let eig = SymmetricEigen::new(m.matrix()).eigenvalues;
            for &e in eig.iter() {
                if e > 0.0 {
                    lambda = lambda.max(e).max(1.0 / e);
                }
            }
        }
        let t = table;
        let a: MatrixField = Arc::new(move |x: Point| {
            t[region_index(layout.region_of_radius_lenient(x.norm()))].matrix()
        });
        let sigma: ScalarField =
            Arc::new(move |x: Point| t[region_index(layout.region_of_radius_lenient(x.norm()))].sigma);
        Self { layout, a, sigma, ellipticity: lambda * (1.0 + 1e-12), kind: MediaKind::RegionTable(table) }
    }

    pub fn custom(layout: RadialLayout, a: MatrixField, sigma: ScalarField, ellipticity: f64) -> Self {
        Self { layout, a, sigma, ellipticity, kind: MediaKind::Custom }
    }

    pub fn layout(&self) -> &RadialLayout {
        &self.layout
    }

    pub fn kind(&self) -> &MediaKind {
        &self.kind
    }

    pub fn ellipticity(&self) -> f64 {
        self.ellipticity
    }

    pub fn a_at(&self, x: Point) -> Mat2 {
        (self.a)(x)
    }

    pub fn sigma_at(&self, x: Point) -> f64 {
        (self.sigma)(x)
    }

    pub fn a_field(&self) -> MatrixField {
        self.a.clone()
    }

    pub fn sigma_field(&self) -> ScalarField {
        self.sigma.clone()
    }

    /// `Some((a, σ))` when `A = a·I` and `Σ = σ` hold everywhere, which is what the
    /// separated-variables solver needs.
    pub fn radial_isotropic(&self) -> Option<(f64, f64)> {
        match &self.kind {
            MediaKind::IsotropicConst { a, sigma } => Some((*a, *sigma)),
            MediaKind::RegionTable(t) => {
                let first = t[0];
                let same = t.iter().all(|m| m == &first);
                (same && first.a[1] == 0.0 && first.a[0] == first.a[2]).then_some((first.a[0], first.sigma))
            }
            MediaKind::Custom => None,
        }
    }

    /// Samples `A` and `Σ` on a quasi-random point set in the disk and checks
    /// `(1/Λ)|ξ|² ≤ ⟨Aξ, ξ⟩ ≤ Λ|ξ|²`, symmetry and `0 < inf Σ ≤ sup Σ < ∞`.
    pub fn validate(&self, samples: usize, seed: u64) -> Result<MediaReport> {
        let points = disk_quasi_random(self.layout.outer_radius(), samples, seed);
        let lambda = self.ellipticity;
        let mut report = MediaReport {
            samples: points.len(),
            min_eigenvalue: f64::INFINITY,
            max_eigenvalue: f64::NEG_INFINITY,
            sigma_min: f64::INFINITY,
            sigma_max: f64::NEG_INFINITY,
        };
        for x in points {
            let a = self.a_at(x);
            if !a.iter().all(|v| v.is_finite()) || (a[(0, 1)] - a[(1, 0)]).abs() > 1e-12 * a.norm() {
                return Err(Error::InvalidMedia(format!("A is not a finite symmetric matrix at ({}, {})", x.x, x.y)));
            }
            let eig = SymmetricEigen::new(a).eigenvalues;
            for &e in eig.iter() {
                report.min_eigenvalue = report.min_eigenvalue.min(e);
                report.max_eigenvalue = report.max_eigenvalue.max(e);
                if e < 1.0 / lambda || e > lambda {
                    return Err(Error::InvalidMedia(format!(
                        "eigenvalue {e} of A at ({}, {}) leaves [1/Λ, Λ] = [{}, {}]",
                        x.x,
                        x.y,
                        1.0 / lambda,
                        lambda
                    )));
                }
            }
            let s = self.sigma_at(x);
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidMedia(format!("Σ = {s} at ({}, {}) is not positive and finite", x.x, x.y)));
            }
            report.sigma_min = report.sigma_min.min(s);
            report.sigma_max = report.sigma_max.max(s);
        }
        Ok(report)
    }
}

fn region_index(tag: RegionTag) -> usize {
    tag.id() as usize - 1
}

fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Halton(2, 3) points mapped area-uniformly onto the disk of the given radius;
/// the seed shifts the starting index.
pub fn disk_quasi_random(radius: f64, count: usize, seed: u64) -> Vec<Point> {
    let start = 1 + (seed % 1_000_003);
    (0..count as u64)
        .map(|k| {
            let u = halton(start + k, 2);
            let v = halton(start + k, 3);
            let r = radius * u.sqrt();
            let t = std::f64::consts::TAU * v;
            Point::new(r * t.cos(), r * t.sin())
        })
        .collect()
}

/// One ring source `c · δ(r − r0)/r · e^{inθ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingSource {
    pub n: u32,
    pub amplitude: C64,
    pub r0: f64,
}

/// A superposition of ring sources, optionally with an L² density for the FEM path.
#[derive(Clone, Default)]
pub struct SourceSpec {
    pub rings: Vec<RingSource>,
    pub density: Option<ComplexField>,
}

impl fmt::Debug for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceSpec")
            .field("rings", &self.rings)
            .field("density", &self.density.as_ref().map(|_| "<fn>"))
            .finish()
    }
}

impl SourceSpec {
    pub fn rings(rings: Vec<RingSource>) -> Self {
        Self { rings, density: None }
    }

    /// Unit-amplitude rings at one radius for every mode in `modes`.
    pub fn multi_mode(r0: f64, modes: impl IntoIterator<Item = u32>, amplitude: C64) -> Self {
        Self::rings(modes.into_iter().map(|n| RingSource { n, amplitude, r0 }).collect())
    }

    pub fn validate(&self, layout: &RadialLayout) -> Result<()> {
        let tol = layout.interface_tolerance();
        for ring in &self.rings {
            if !(ring.r0 > 0.0 && ring.r0 < layout.outer_radius() - tol) {
                return Err(Error::InvalidSource(format!(
                    "ring radius {} must lie strictly inside (0, R = {})",
                    ring.r0,
                    layout.outer_radius()
                )));
            }
            if (ring.r0 - layout.r1()).abs() <= tol || (ring.r0 - layout.r2()).abs() <= tol {
                return Err(Error::InvalidSource(format!(
                    "ring radius {} lies on a material interface",
                    ring.r0
                )));
            }
            if !(ring.amplitude.re.is_finite() && ring.amplitude.im.is_finite()) {
                return Err(Error::InvalidSource("amplitude must be finite".into()));
            }
        }
        Ok(())
    }

    /// Distinct modes carried by the rings, ascending.
    pub fn modes(&self) -> Vec<u32> {
        let mut m: Vec<u32> = self.rings.iter().map(|r| r.n).collect();
        m.sort_unstable();
        m.dedup();
        m
    }

    /// `(r0, amplitude)` pairs of mode `n`.
    pub fn mode_rings(&self, n: u32) -> Vec<(f64, C64)> {
        self.rings.iter().filter(|r| r.n == n).map(|r| (r.r0, r.amplitude)).collect()
    }

    pub fn min_radius(&self) -> Option<f64> {
        self.rings.iter().map(|r| r.r0).min_by(f64::total_cmp)
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_none() && self.rings.iter().all(|r| r.amplitude == C64::new(0.0, 0.0))
    }

    /// Scales every amplitude, e.g. to absorb a constant isotropic `A = a·I`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rings: self.rings.iter().map(|r| RingSource { amplitude: r.amplitude * factor, ..*r }).collect(),
            density: self.density.clone().map(|d| -> ComplexField { Arc::new(move |x| d(x) * factor) }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> RadialLayout {
        RadialLayout::new(1.0, 2.0, 8.0).unwrap()
    }

    #[test]
    fn layout_derives_image_radius() {
        let l = base();
        assert_eq!((l.r1(), l.r2(), l.r3(), l.outer_radius()), (1.0, 2.0, 4.0, 8.0));
    }

    #[test]
    fn layout_rejects_degenerate_and_small_domain() {
        assert!(matches!(RadialLayout::new(1.0, 1.0, 8.0), Err(Error::InvalidLayout(_))));
        assert!(matches!(RadialLayout::new(1.0, 2.0, 3.0), Err(Error::InvalidLayout(_))));
        assert!(matches!(RadialLayout::new(1.0, 2.0, 4.0), Err(Error::InvalidLayout(_))));
        assert!(RadialLayout::new(-1.0, 2.0, 8.0).is_err());
    }

    #[test]
    fn s_delta_values() {
        let l = base();
        assert_eq!(l.s_delta(0.1, Point::new(1.5, 0.0)).unwrap(), C64::new(-1.0, 0.1));
        assert_eq!(l.s_delta(0.1, Point::new(5.0, 0.0)).unwrap(), C64::new(1.0, 0.0));
        assert_eq!(l.s_delta(0.0, Point::new(1.5, 0.0)).unwrap(), C64::new(-1.0, 0.0));
        assert!(matches!(l.s_delta(0.1, Point::new(2.0, 0.0)), Err(Error::OnInterface { .. })));
        assert!(matches!(l.s_delta(0.1, Point::new(0.0, 1.0)), Err(Error::OnInterface { .. })));
    }

    #[test]
    fn classify_regions() {
        let l = base();
        assert_eq!(l.classify(Point::new(0.5, 0.0)).unwrap(), RegionTag::Core);
        assert_eq!(l.classify(Point::new(3.0, 0.0)).unwrap(), RegionTag::Image);
        assert_eq!(l.classify(Point::new(6.0, 0.0)).unwrap(), RegionTag::Outer);
        assert!(l.classify(Point::new(4.0 + 1e-13, 0.0)).is_err());
        assert!(matches!(l.classify(Point::new(9.0, 0.0)), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn media_validation_catches_eigenvalue_excursions() {
        let l = base();
        let ok = MediaSpec::isotropic(l, 2.0, 1.0);
        let rep = ok.validate(10_000, 0).unwrap();
        assert!((rep.min_eigenvalue - 2.0).abs() < 1e-14);
        let a: MatrixField = Arc::new(|x: Point| if x.norm() > 6.0 { Mat2::identity() * 5.0 } else { Mat2::identity() });
        let bad = MediaSpec::custom(l, a, Arc::new(|_| 1.0), 2.0);
        assert!(matches!(bad.validate(10_000, 0), Err(Error::InvalidMedia(_))));
        let neg_sigma = MediaSpec::custom(l, Arc::new(|_| Mat2::identity()), Arc::new(|_| -1.0), 2.0);
        assert!(neg_sigma.validate(100, 0).is_err());
    }

    #[test]
    fn region_table_radial_detection() {
        let l = base();
        let iso = [RegionMedium::isotropic(1.0, 1.0); 4];
        assert_eq!(MediaSpec::region_table(l, iso).radial_isotropic(), Some((1.0, 1.0)));
        let mut t = iso;
        t[2] = RegionMedium::isotropic(2.0, 1.0);
        let m = MediaSpec::region_table(l, t);
        assert_eq!(m.radial_isotropic(), None);
        assert_eq!(m.a_at(Point::new(3.0, 0.0)), Mat2::identity() * 2.0);
    }

    #[test]
    fn source_validation() {
        let l = base();
        assert!(SourceSpec::multi_mode(5.0, 0..3, C64::new(1.0, 0.0)).validate(&l).is_ok());
        assert!(SourceSpec::multi_mode(2.0, 0..3, C64::new(1.0, 0.0)).validate(&l).is_err());
        assert!(SourceSpec::multi_mode(8.0, 0..3, C64::new(1.0, 0.0)).validate(&l).is_err());
    }

    proptest::proptest! {
        #[test]
        fn image_radius_monotone(r1 in 0.1f64..2.0, gap in 0.05f64..2.0, bump in 0.01f64..0.5) {
            let r2 = r1 + gap;
            let big = 100.0;
            let base = RadialLayout::new(r1, r2, big).unwrap().r3();
            let wider = RadialLayout::new(r1, r2 + bump, big).unwrap().r3();
            let fatter_core = RadialLayout::new(r1 + bump.min(gap / 2.0), r2, big).unwrap().r3();
            proptest::prop_assert!(wider > base);
            proptest::prop_assert!(fatter_core < base);
        }

        #[test]
        fn shell_loss_is_exact(delta in 1e-8f64..10.0, r in 1.0001f64..1.9999, t in 0.0f64..6.28) {
            let l = RadialLayout::new(1.0, 2.0, 8.0).unwrap();
            let s = l.s_delta(delta, Point::new(r * t.cos(), r * t.sin())).unwrap();
            proptest::prop_assert_eq!(s.re, -1.0);
            proptest::prop_assert_eq!(s.im, delta);
            let outside = l.s_delta(delta, Point::new(5.0 * t.cos(), 5.0 * t.sin())).unwrap();
            proptest::prop_assert_eq!(outside, C64::new(1.0, 0.0));
        }
    }
}
