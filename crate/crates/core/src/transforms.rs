//! Diffeomorphisms of the plane, the push-forward of coefficients under them, and
//! sampled verifiers for reflecting complementarity and for the change-of-variables identities.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{MediaSpec, Mat2, Point, RadialLayout, RegionTag, C64};

/// Below this `|det DT|` a push-forward is rejected.
pub const SINGULAR_JACOBIAN: f64 = 1e-14;

pub type PointMap = Arc<dyn Fn(Point) -> Point + Send + Sync>;
pub type JacobianMap = Arc<dyn Fn(Point) -> Mat2 + Send + Sync>;

/// A user-supplied map. Without an analytic Jacobian, central differences with step
/// `1e-6 · max(|x|, scale)` are used.
#[derive(Clone)]
pub struct CustomMap {
    pub forward: PointMap,
    pub inverse: PointMap,
    pub jacobian: Option<JacobianMap>,
    pub scale: f64,
}

#[derive(Clone)]
pub enum MapKind {
    Identity,
    Kelvin { center: Point, radius: f64 },
    Dilation { center: Point, factor: f64 },
    Rotation { center: Point, angle: f64 },
    /// Applied first to last.
    Composition(Vec<Diffeomorphism>),
    Custom(CustomMap),
}

/// Where a map is meant to be evaluated. `outer` may be infinite and `inner = 0` means a disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Plane,
    Annulus { center: [f64; 2], inner: f64, outer: f64 },
}

impl Domain {
    pub fn contains(&self, x: Point) -> bool {
        match *self {
            Domain::Plane => true,
            Domain::Annulus { center, inner, outer } => {
                let r = (x - Point::new(center[0], center[1])).norm();
                r > inner && r < outer
            }
        }
    }
}

#[derive(Clone)]
pub struct Diffeomorphism {
    kind: MapKind,
    domain: Domain,
}

impl fmt::Debug for Diffeomorphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            MapKind::Identity => write!(f, "Identity"),
            MapKind::Kelvin { center, radius } => write!(f, "Kelvin({}, {}; {radius})", center.x, center.y),
            MapKind::Dilation { center, factor } => write!(f, "Dilation({}, {}; {factor})", center.x, center.y),
            MapKind::Rotation { center, angle } => write!(f, "Rotation({}, {}; {angle})", center.x, center.y),
            MapKind::Composition(maps) => f.debug_list().entries(maps).finish(),
            MapKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Diffeomorphism {
    pub fn identity() -> Self {
        Self { kind: MapKind::Identity, domain: Domain::Plane }
    }

    /// Inversion `x ↦ c + ρ²(x − c)/|x − c|²`; self-inverse, fixes the circle `|x − c| = ρ`.
    pub fn kelvin(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::DomainMismatch(format!("Kelvin radius {radius} must be positive")));
        }
        Ok(Self {
            kind: MapKind::Kelvin { center, radius },
            domain: Domain::Annulus { center: [center.x, center.y], inner: 0.0, outer: f64::INFINITY },
        })
    }

    pub fn dilation(factor: f64) -> Result<Self> {
        Self::dilation_about(Point::zeros(), factor)
    }

    pub fn dilation_about(center: Point, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::DomainMismatch(format!("dilation factor {factor} must be positive")));
        }
        Ok(Self { kind: MapKind::Dilation { center, factor }, domain: Domain::Plane })
    }

    pub fn rotation(center: Point, angle: f64) -> Self {
        Self { kind: MapKind::Rotation { center, angle }, domain: Domain::Plane }
    }

    pub fn custom(map: CustomMap, domain: Domain) -> Self {
        Self { kind: MapKind::Custom(map), domain }
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    /// `g ∘ f`, checked on `samples`: each sample must be mappable by `f`, and its image must
    /// lie in the domain of `g` and be mappable by `g`.
    pub fn compose(g: &Self, f: &Self, samples: &[Point]) -> Result<Self> {
        for &x in samples {
            let y = f.forward(x)?;
            if !g.domain.contains(y) {
                return Err(Error::DomainMismatch(format!(
                    "f({}, {}) = ({}, {}) is outside the domain of g",
                    x.x, x.y, y.x, y.y
                )));
            }
            g.forward(y)?;
        }
        Ok(Self::compose_unchecked(g, f))
    }

    pub fn compose_unchecked(g: &Self, f: &Self) -> Self {
        let mut chain = Vec::new();
        for m in [f, g] {
            match &m.kind {
                MapKind::Composition(inner) => chain.extend(inner.iter().cloned()),
                MapKind::Identity => {}
                _ => chain.push(m.clone()),
            }
        }
        Self { kind: MapKind::Composition(chain), domain: f.domain }
    }

    pub fn forward(&self, x: Point) -> Result<Point> {
        match &self.kind {
            MapKind::Identity => Ok(x),
            MapKind::Kelvin { center, radius } => invert_in_circle(*center, *radius, x),
            MapKind::Dilation { center, factor } => Ok(center + (x - center) * *factor),
            MapKind::Rotation { center, angle } => Ok(center + rotation_matrix(*angle) * (x - center)),
            MapKind::Composition(maps) => maps.iter().try_fold(x, |p, m| m.forward(p)),
            MapKind::Custom(c) => Ok((c.forward)(x)),
        }
    }

    pub fn inverse(&self, y: Point) -> Result<Point> {
        match &self.kind {
            MapKind::Identity => Ok(y),
            MapKind::Kelvin { center, radius } => invert_in_circle(*center, *radius, y),
            MapKind::Dilation { center, factor } => Ok(center + (y - center) / *factor),
            MapKind::Rotation { center, angle } => Ok(center + rotation_matrix(-*angle) * (y - center)),
            MapKind::Composition(maps) => maps.iter().rev().try_fold(y, |p, m| m.inverse(p)),
            MapKind::Custom(c) => Ok((c.inverse)(y)),
        }
    }

    /// `DT(x)`, the Jacobian of the forward map.
    pub fn jacobian(&self, x: Point) -> Result<Mat2> {
        match &self.kind {
            MapKind::Identity => Ok(Mat2::identity()),
            MapKind::Kelvin { center, radius } => {
                let d = x - center;
                let r2 = d.norm_squared();
                if r2 <= (1e-14 * radius).powi(2) {
                    return Err(Error::ExcludedPoint { x: x.x, y: x.y });
                }
                let s = radius * radius / r2;
                Ok((Mat2::identity() - d * d.transpose() * (2.0 / r2)) * s)
            }
            MapKind::Dilation { factor, .. } => Ok(Mat2::identity() * *factor),
            MapKind::Rotation { angle, .. } => Ok(rotation_matrix(*angle)),
            MapKind::Composition(maps) => {
                let mut p = x;
                let mut jac = Mat2::identity();
                for m in maps {
                    jac = m.jacobian(p)? * jac;
                    p = m.forward(p)?;
                }
                Ok(jac)
            }
            MapKind::Custom(c) => match &c.jacobian {
                Some(j) => Ok(j(x)),
                None => Ok(central_difference_jacobian(&*c.forward, x, 1e-6 * x.norm().max(c.scale))),
            },
        }
    }

    /// `|det DT(x)|`
    pub fn jacobian_det(&self, x: Point) -> Result<f64> {
        Ok(self.jacobian(x)?.determinant().abs())
    }
}

fn invert_in_circle(center: Point, radius: f64, x: Point) -> Result<Point> {
    let d = x - center;
    let r2 = d.norm_squared();
    if r2 <= (1e-14 * radius).powi(2) {
        return Err(Error::ExcludedPoint { x: x.x, y: x.y });
    }
    Ok(center + d * (radius * radius / r2))
}

fn rotation_matrix(angle: f64) -> Mat2 {
    let (s, c) = angle.sin_cos();
    Mat2::new(c, -s, s, c)
}

pub fn central_difference_jacobian(f: &(dyn Fn(Point) -> Point + Send + Sync), x: Point, step: f64) -> Mat2 {
    let mut j = Mat2::zeros();
    for k in 0..2 {
        let mut e = Point::zeros();
        e[k] = step;
        let col = (f(x + e) - f(x - e)) / (2.0 * step);
        j.set_column(k, &col);
    }
    j
}

/// `T_*a(y) = DT(x) a(x) DT(x)ᵀ / |det DT(x)|` with `x = T⁻¹(y)`.
pub fn push_forward_matrix(t: &Diffeomorphism, a: &(dyn Fn(Point) -> Mat2 + Send + Sync), y: Point) -> Result<Mat2> {
    let x = t.inverse(y)?;
    let d = t.jacobian(x)?;
    let det = d.determinant().abs();
    if det < SINGULAR_JACOBIAN {
        return Err(Error::SingularJacobian { x: x.x, y: x.y, det });
    }
    Ok(d * a(x) * d.transpose() / det)
}

/// `T_*s(y) = s(x) / |det DT(x)|`; the same rule serves `Σ` and source densities.
pub fn push_forward_scalar(t: &Diffeomorphism, s: &(dyn Fn(Point) -> f64 + Send + Sync), y: Point) -> Result<f64> {
    let x = t.inverse(y)?;
    let det = t.jacobian_det(x)?;
    if det < SINGULAR_JACOBIAN {
        return Err(Error::SingularJacobian { x: x.x, y: x.y, det });
    }
    Ok(s(x) / det)
}

/// The Kelvin transforms in `∂Ω₂` and `∂Ω₃` of a radial layout, with their natural domains
/// (`Ω₂ ∖ {0}` for `F`, everything beyond `r3` for `G`).
pub fn kelvin_pair(layout: &RadialLayout) -> (Diffeomorphism, Diffeomorphism) {
    let o = Point::zeros();
    let f = Diffeomorphism::kelvin(o, layout.r2())
        .expect("positive radius")
        .with_domain(Domain::Annulus { center: [0.0, 0.0], inner: 0.0, outer: layout.r2() * (1.0 + 0.05) });
    let g = Diffeomorphism::kelvin(o, layout.r3())
        .expect("positive radius")
        .with_domain(Domain::Annulus { center: [0.0, 0.0], inner: layout.r3() * (1.0 - 0.05), outer: f64::INFINITY });
    (f, g)
}

/// Map selection as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MapSpec {
    Identity,
    Kelvin {
        #[serde(default)]
        center: [f64; 2],
        radius: f64,
    },
    Dilation {
        factor: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    Rotation {
        angle: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// Applied in list order.
    Composition { maps: Vec<MapSpec> },
}

impl MapSpec {
    pub fn build(&self) -> Result<Diffeomorphism> {
        let p = |c: &[f64; 2]| Point::new(c[0], c[1]);
        match self {
            MapSpec::Identity => Ok(Diffeomorphism::identity()),
            MapSpec::Kelvin { center, radius } => Diffeomorphism::kelvin(p(center), *radius),
            MapSpec::Dilation { factor, center } => Diffeomorphism::dilation_about(p(center), *factor),
            MapSpec::Rotation { angle, center } => Ok(Diffeomorphism::rotation(p(center), *angle)),
            MapSpec::Composition { maps } => {
                let built = maps.iter().map(MapSpec::build).collect::<Result<Vec<_>>>()?;
                Ok(built.iter().fold(Diffeomorphism::identity(), |acc, m| Diffeomorphism::compose_unchecked(m, &acc)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplementarityOptions {
    pub domain_samples: usize,
    pub boundary_samples: usize,
    pub tolerance: f64,
    /// Check `F_*Σ = Σ` too; only meaningful for `k > 0`.
    pub include_sigma: bool,
    pub seed: u64,
    /// Excluded point of `F` in Ω₁.
    pub x1: Point,
    /// Excluded point of `G ∘ F`'s image in Ω₃.
    pub x2: Point,
    /// Collar half-width around `∂Ω₂`, `∂Ω₃`, as a fraction of `r2`.
    pub collar: f64,
}

impl Default for ComplementarityOptions {
    fn default() -> Self {
        Self {
            domain_samples: 2048,
            boundary_samples: 512,
            tolerance: 1e-8,
            include_sigma: false,
            seed: 0,
            x1: Point::zeros(),
            x2: Point::zeros(),
            collar: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplementarityReport {
    /// `max |F_*A − A|` (and `|F_*Σ − Σ|` when requested) over samples of `Ω₃ ∖ Ω₂`.
    pub cond_asigma_maxerr: f64,
    /// `max |F(x) − x|` over `∂Ω₂`.
    pub boundary_fix_maxerr_f: f64,
    /// `max |G(x) − x|` over `∂Ω₃`.
    pub boundary_fix_maxerr_g: f64,
    /// `F` sends the shell into the image annulus and `G` sends the exterior of `Ω₃` into `Ω₃`.
    pub mapping_ok: bool,
    /// `G ∘ F` maps `Ω₁ ∖ {x1}` regularly into `Ω₃` and tends to `x2` at `x1`.
    pub composition_ok: bool,
    /// `F`, `G` stay regular on the collars around `∂Ω₂`, `∂Ω₃`.
    pub extension_ok: bool,
    pub verdict: bool,
}

impl ComplementarityReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "verdict": self.verdict,
            "errors": {
                "cond_ASigma": self.cond_asigma_maxerr,
                "boundary_fix_F": self.boundary_fix_maxerr_f,
                "boundary_fix_G": self.boundary_fix_maxerr_g,
                "mapping_ok": self.mapping_ok,
                "composition_ok": self.composition_ok,
                "extension_ok": self.extension_ok,
            }
        })
    }
}

fn annulus_sample(rng: &mut ChaCha8Rng, inner: f64, outer: f64) -> Point {
    let lo = inner * (1.0 + 1e-9);
    let hi = outer * (1.0 - 1e-9);
    let u: f64 = rng.random();
    let r = (lo * lo + u * (hi * hi - lo * lo)).sqrt();
    let t = std::f64::consts::TAU * rng.random::<f64>();
    Point::new(r * t.cos(), r * t.sin())
}

fn circle_points(radius: f64, count: usize) -> impl Iterator<Item = Point> {
    (0..count).map(move |k| {
        let t = std::f64::consts::TAU * (k as f64 + 0.5) / count as f64;
        Point::new(radius * t.cos(), radius * t.sin())
    })
}

fn max_abs(m: &Mat2) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Samples the conditions defining reflecting complementary media for `(A, Σ)` on a radial
/// layout. Never fails: malformed maps surface as infinite errors or failed flags.
pub fn check_reflecting_complementary(
    media: &MediaSpec,
    f: &Diffeomorphism,
    g: &Diffeomorphism,
    opts: &ComplementarityOptions,
) -> ComplementarityReport {
    let layout = media.layout();
    let (r1, r2, r3) = (layout.r1(), layout.r2(), layout.r3());
    let outer = layout.outer_radius();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let a = media.a_field();
    let sigma = media.sigma_field();

    let mut cond = 0.0f64;
    let mut mapping_ok = true;
    for _ in 0..opts.domain_samples {
        let y = annulus_sample(&mut rng, r2, r3);
        let preimage_in_shell = f
            .inverse(y)
            .map(|x| x.norm() > r1 && x.norm() < r2)
            .unwrap_or(false);
        if !preimage_in_shell {
            mapping_ok = false;
        }
        let err_a = match push_forward_matrix(f, &*a, y) {
            Ok(m) => max_abs(&(m - a(y))),
            Err(_) => f64::INFINITY,
        };
        cond = cond.max(err_a);
        if opts.include_sigma {
            let err_s = match push_forward_scalar(f, &*sigma, y) {
                Ok(s) => (s - sigma(y)).abs(),
                Err(_) => f64::INFINITY,
            };
            cond = cond.max(err_s);
        }
    }
    for _ in 0..opts.domain_samples / 4 {
        let x = annulus_sample(&mut rng, r1, r2);
        let ok = f.forward(x).map(|y| y.norm() > r2 && y.norm() < r3).unwrap_or(false);
        mapping_ok &= ok;
        let y = annulus_sample(&mut rng, r3, outer);
        let ok = g.forward(y).map(|z| z.norm() < r3).unwrap_or(false);
        mapping_ok &= ok;
    }

    let fix = |m: &Diffeomorphism, radius: f64| {
        circle_points(radius, opts.boundary_samples)
            .map(|x| m.forward(x).map(|y| (y - x).norm()).unwrap_or(f64::INFINITY))
            .fold(0.0f64, f64::max)
    };
    let bf = fix(f, r2);
    let bg = fix(g, r3);

    let gf = Diffeomorphism::compose_unchecked(g, f);
    let mut composition_ok = true;
    let mut det_sign = 0.0f64;
    for _ in 0..opts.domain_samples / 4 {
        let x = annulus_sample(&mut rng, 0.0, r1);
        if (x - opts.x1).norm() < 1e-9 * r1 {
            continue;
        }
        match (gf.forward(x), gf.jacobian(x)) {
            (Ok(z), Ok(j)) => {
                let det = j.determinant();
                if z.norm() >= r3 || !det.is_finite() || det.abs() < SINGULAR_JACOBIAN {
                    composition_ok = false;
                } else if det_sign == 0.0 {
                    det_sign = det.signum();
                } else if det.signum() != det_sign {
                    composition_ok = false;
                }
            }
            _ => composition_ok = false,
        }
    }
    let eps = 1e-7 * r1;
    for dir in [Point::new(1.0, 0.0), Point::new(0.0, 1.0), Point::new(-1.0, 0.0), Point::new(0.0, -1.0)] {
        let near = gf.forward(opts.x1 + dir * eps).map(|z| (z - opts.x2).norm()).unwrap_or(f64::INFINITY);
        if !(near <= 1e-4 * r3) {
            composition_ok = false;
        }
    }

    let collar = opts.collar * r2;
    let mut extension_ok = true;
    for (m, radius) in [(f, r2), (g, r3)] {
        for offset in [-collar, -0.5 * collar, 0.5 * collar, collar] {
            for x in circle_points(radius + offset, 64) {
                let ok = m
                    .jacobian(x)
                    .map(|j| j.determinant().is_finite() && j.determinant().abs() >= SINGULAR_JACOBIAN)
                    .unwrap_or(false);
                extension_ok &= ok;
            }
        }
    }

    let tol = opts.tolerance;
    let verdict = cond <= tol
        && bf <= tol * outer
        && bg <= tol * outer
        && mapping_ok
        && composition_ok
        && extension_ok;
    ComplementarityReport {
        cond_asigma_maxerr: cond,
        boundary_fix_maxerr_f: bf,
        boundary_fix_maxerr_g: bg,
        mapping_ok,
        composition_ok,
        extension_ok,
        verdict,
    }
}

/// Builds media whose shell is the reflection of the image region through `f`:
/// `A_shell = (f⁻¹)_* A_image`, `Σ_shell = (f⁻¹)_* Σ_image`. The result is reflecting
/// complementary with respect to `f` by construction.
pub fn reflect_image_into_shell(media: &MediaSpec, f: &Diffeomorphism) -> MediaSpec {
    let layout = *media.layout();
    let a = media.a_field();
    let sigma = media.sigma_field();
    let fa = f.clone();
    let fs = f.clone();
    let a_new = {
        let a = a.clone();
        Arc::new(move |x: Point| {
            if layout.region_of_radius_lenient(x.norm()) == RegionTag::Shell {
                // (f⁻¹)_* A at x: pull the image value back through f.
                let y = fa.forward(x).expect("shell point is not excluded");
                let d_inv = fa.jacobian(x).expect("regular on the shell").try_inverse().expect("invertible");
                let det = d_inv.determinant().abs();
                d_inv * a(y) * d_inv.transpose() / det
            } else {
                a(x)
            }
        }) as crate::geometry::MatrixField
    };
    let sigma_new = {
        let sigma = sigma.clone();
        Arc::new(move |x: Point| {
            if layout.region_of_radius_lenient(x.norm()) == RegionTag::Shell {
                let y = fs.forward(x).expect("shell point is not excluded");
                let det = fs.jacobian_det(x).expect("regular on the shell");
                sigma(y) * det
            } else {
                sigma(x)
            }
        }) as crate::geometry::ScalarField
    };
    let lambda = media.ellipticity();
    MediaSpec::custom(layout, a_new, sigma_new, lambda)
}

/// Fields given in closed form, so that their composition with a map can be evaluated exactly.
pub trait ClosedFormField: Send + Sync {
    fn value(&self, x: Point) -> C64;
    fn gradient(&self, x: Point) -> [C64; 2];
}

#[derive(Debug, Clone)]
pub struct ChangeOfVariablesOptions {
    /// Circle `Γ` fixed by the map, `(center, radius)`.
    pub interface: (Point, f64),
    /// Interior samples of the image domain where the transformed PDE is checked.
    pub interior_samples: Vec<Point>,
    pub boundary_samples: usize,
    /// Finite-difference step relative to the interface radius.
    pub fd_step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChangeOfVariablesReport {
    /// `max |div(T_*a ∇v) − T_*f|` over samples, relative to the flux scale.
    pub pde_residual: f64,
    /// `max |T_*a ∇v·η + a ∇u·η|` on `Γ`, relative to `max |a ∇u·η|`.
    pub flux_flip_residual: f64,
    /// `max |T_*a ∇v·η − a ∇u·η|` on `Γ`, relative likewise; small for maps that do not reflect.
    pub flux_continuity_residual: f64,
}

fn mat_vec_c(m: &Mat2, v: [C64; 2]) -> [C64; 2] {
    [v[0] * m[(0, 0)] + v[1] * m[(0, 1)], v[0] * m[(1, 0)] + v[1] * m[(1, 1)]]
}

/// Fourth-order central-difference divergence of a complex vector field.
fn divergence(q: &dyn Fn(Point) -> Result<[C64; 2]>, y: Point, h: f64) -> Result<C64> {
    let mut div = C64::new(0.0, 0.0);
    for k in 0..2 {
        let mut e = Point::zeros();
        e[k] = h;
        let qp1 = q(y + e)?[k];
        let qm1 = q(y - e)?[k];
        let qp2 = q(y + e * 2.0)?[k];
        let qm2 = q(y - e * 2.0)?[k];
        div += (-qp2 + qp1 * 8.0 - qm1 * 8.0 + qm2) / (12.0 * h);
    }
    Ok(div)
}

/// Checks that `v = u ∘ T⁻¹` solves the pushed-forward equation and that the conormal flux of
/// `v` flips sign across the fixed interface `Γ`.
pub fn verify_change_of_variables(
    t: &Diffeomorphism,
    u: &dyn ClosedFormField,
    a: &(dyn Fn(Point) -> Mat2 + Send + Sync),
    opts: &ChangeOfVariablesOptions,
) -> Result<ChangeOfVariablesReport> {
    let (center, rho) = opts.interface;
    let gamma: Vec<Point> = circle_points(rho, opts.boundary_samples.max(1)).map(|p| p + center).collect();
    for &x in &gamma {
        let y = t.forward(x)?;
        if (y - x).norm() > 1e-10 * rho {
            return Err(Error::DomainMismatch(format!(
                "map does not fix the interface at ({}, {})",
                x.x, x.y
            )));
        }
    }
    for offset in [-0.05 * rho, 0.05 * rho] {
        for x in circle_points(rho + offset, 64) {
            let det = t.jacobian_det(x + center).unwrap_or(0.0);
            if !(det.is_finite() && det >= SINGULAR_JACOBIAN) {
                return Err(Error::DomainMismatch(
                    "map has no regular extension in a collar of the interface".into(),
                ));
            }
        }
    }

    let grad_v = |y: Point| -> Result<[C64; 2]> {
        let x = t.inverse(y)?;
        let d = t.jacobian(x)?;
        let dinv_t = d
            .try_inverse()
            .ok_or(Error::SingularJacobian { x: x.x, y: x.y, det: 0.0 })?
            .transpose();
        Ok(mat_vec_c(&dinv_t, u.gradient(x)))
    };
    let flux_v = |y: Point| -> Result<[C64; 2]> {
        let pa = push_forward_matrix(t, a, y)?;
        Ok(mat_vec_c(&pa, grad_v(y)?))
    };
    let flux_u = |x: Point| -> Result<[C64; 2]> { Ok(mat_vec_c(&a(x), u.gradient(x))) };

    let h = opts.fd_step * rho;
    let mut max_res = 0.0f64;
    let mut max_scale = 0.0f64;
    for &y in &opts.interior_samples {
        let x = t.inverse(y)?;
        let f_x = divergence(&flux_u, x, h * (x - center).norm().max(1e-3 * rho) / rho)?;
        let tf = f_x / t.jacobian_det(x)?;
        let div_q = divergence(&flux_v, y, h * (y - center).norm().max(1e-3 * rho) / rho)?;
        let q = flux_v(y)?;
        let qn = (q[0].norm_sqr() + q[1].norm_sqr()).sqrt();
        max_res = max_res.max((div_q - tf).norm());
        max_scale = max_scale.max(qn / (y - center).norm().max(1e-3 * rho) + tf.norm());
    }

    let mut flip = 0.0f64;
    let mut cont = 0.0f64;
    let mut scale = 0.0f64;
    for &x in &gamma {
        let eta = (x - center) / (x - center).norm();
        let fv = flux_v(x)?;
        let fu = flux_u(x)?;
        let nv = fv[0] * eta.x + fv[1] * eta.y;
        let nu = fu[0] * eta.x + fu[1] * eta.y;
        flip = flip.max((nv + nu).norm());
        cont = cont.max((nv - nu).norm());
        scale = scale.max(nu.norm());
    }
    let rel = |v: f64, s: f64| if s > 0.0 { v / s } else { v };
    Ok(ChangeOfVariablesReport {
        pde_residual: rel(max_res, max_scale),
        flux_flip_residual: rel(flip, scale),
        flux_continuity_residual: rel(cont, scale),
    })
}
