//! Direct solves, the transmission problem with a duplicated trace along `∂Ω₃`, and discrete norms.

use std::sync::Arc;

use faer::prelude::*;
use faer::Mat;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::assemble::{apply_region_stiffness, assemble_system, p1_gradients, AssembledSystem, TRI7};
use crate::fem::mesh::Mesh;
use crate::geometry::{LossCoefficient, MediaSpec, Point, RegionTag, C64};
use crate::spectral::RadialField;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Required relative residual of every direct solve.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Piecewise-linear field. On `Outer` triangles the vertex values are `values + outer_jump`,
/// which realises a prescribed jump across `∂Ω₃`.
#[derive(Debug, Clone)]
pub struct Field {
    mesh: Arc<Mesh>,
    values: Vec<C64>,
    outer_jump: Option<Vec<C64>>,
    residual: f64,
}

impl Field {
    pub fn new(mesh: Arc<Mesh>, values: Vec<C64>) -> Result<Self> {
        if values.len() != mesh.vertices.len() {
            return Err(Error::DomainMismatch(format!("{} values for {} vertices", values.len(), mesh.vertices.len())));
        }
        Ok(Self { mesh, values, outer_jump: None, residual: 0.0 })
    }

    pub fn zero(mesh: Arc<Mesh>) -> Self {
        let n = mesh.vertices.len();
        Self { mesh, values: vec![ZERO; n], outer_jump: None, residual: 0.0 }
    }

    /// Nodal interpolant of `f`, with the branch of each triangle chosen by its region.
    pub fn interpolate(mesh: Arc<Mesh>, f: impl Fn(Point) -> C64) -> Self {
        let values = mesh.vertices.iter().map(|&p| f(p)).collect();
        Self { mesh, values, outer_jump: None, residual: 0.0 }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn outer_jump(&self) -> Option<&[C64]> {
        self.outer_jump.as_deref()
    }

    /// Relative residual reached by the solve that produced this field.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn triangle_values(&self, t: usize) -> [C64; 3] {
        let tri = self.mesh.triangles[t];
        let outer = self.mesh.tags[t] == RegionTag::Outer;
        tri.map(|v| {
            let base = self.values[v];
            match (&self.outer_jump, outer) {
                (Some(j), true) => base + j[v],
                _ => base,
            }
        })
    }

    /// Value at `x` by barycentric interpolation; `None` outside the mesh.
    pub fn eval(&self, locator: &crate::fem::mesh::PointLocator, x: Point) -> Option<C64> {
        let (t, l) = locator.locate(&self.mesh, x)?;
        let v = self.triangle_values(t);
        Some(v[0] * l[0] + v[1] * l[1] + v[2] * l[2])
    }

    pub fn scaled(&self, c: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        if let Some(j) = out.outer_jump.as_mut() {
            j.iter_mut().for_each(|v| *v *= c);
        }
        out
    }

    /// Pointwise difference of two fields on the same mesh.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if !Arc::ptr_eq(&self.mesh, &other.mesh) && *self.mesh != *other.mesh {
            return Err(Error::DomainMismatch("fields live on different meshes".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        let outer_jump = match (&self.outer_jump, &other.outer_jump) {
            (None, None) => None,
            (a, b) => {
                let n = self.values.len();
                let za = a.clone().unwrap_or_else(|| vec![ZERO; n]);
                let zb = b.clone().unwrap_or_else(|| vec![ZERO; n]);
                Some(za.iter().zip(&zb).map(|(x, y)| x - y).collect())
            }
        };
        Ok(Self { mesh: self.mesh.clone(), values, outer_jump, residual: 0.0 })
    }
}

fn to_mat(v: &[C64]) -> Mat<C64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Factorises and solves `M x = b` on the free dofs, refining until the relative residual
/// drops below [`RESIDUAL_TOL`].
pub fn solve_dofs(system: &AssembledSystem, b: &[C64]) -> Result<(Vec<C64>, f64)> {
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((vec![ZERO; b.len()], 0.0));
    }
    let lu = system
        .matrix
        .sp_lu()
        .map_err(|e| Error::SingularSystem(format!("sparse LU failed ({e:?}); likely a δ = 0 resonance")))?;
    let sol = lu.solve(&to_mat(b));
    let mut x: Vec<C64> = (0..b.len()).map(|i| sol[(i, 0)]).collect();
    let mut rel = f64::INFINITY;
    for _ in 0..4 {
        let mx = system.apply(&x);
        let r: Vec<C64> = b.iter().zip(&mx).map(|(bi, mi)| bi - mi).collect();
        rel = norm2(&r) / bnorm;
        if !rel.is_finite() {
            return Err(Error::SingularSystem("non-finite solution; likely a δ = 0 resonance".into()));
        }
        if rel < RESIDUAL_TOL {
            break;
        }
        let dx = lu.solve(&to_mat(&r));
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += dx[(i, 0)];
        }
    }
    if rel >= RESIDUAL_TOL {
        return Err(Error::SingularSystem(format!("relative residual {rel:.3e} above {RESIDUAL_TOL:.0e}")));
    }
    Ok((x, rel))
}

/// Solves the forward problem for a vertex load vector (Dirichlet entries are ignored).
pub fn solve_forward(mesh: &Arc<Mesh>, system: &AssembledSystem, load: &[C64]) -> Result<Field> {
    if load.len() != mesh.vertices.len() || system.dof_of_vertex.len() != mesh.vertices.len() {
        return Err(Error::DomainMismatch("load, system and mesh sizes differ".into()));
    }
    let (x, residual) = solve_dofs(system, &system.restrict(load))?;
    Ok(Field { mesh: mesh.clone(), values: system.extend(&x, mesh.vertices.len()), outer_jump: None, residual })
}

/// Solves `div(Â∇W) + k²Σ̂W = f̂` off `∂Ω₃` with `W_ext − W_int = g` and
/// `Â∇W_ext·η − Â∇W_int·η = h` on `∂Ω₃`. The value jump is imposed through the outer copy of the
/// interface vertices, the flux jump weakly. `load` is `−∫ f̂ φ_i`.
pub fn solve_transmission(
    mesh: &Arc<Mesh>,
    hat_media: &MediaSpec,
    k: f64,
    jump_value: &(dyn Fn(Point) -> C64 + Sync),
    jump_flux: &(dyn Fn(Point) -> C64 + Sync),
    load: &[C64],
) -> Result<Field> {
    let unit = LossCoefficient::unit();
    let system = assemble_system(mesh, hat_media, unit, k)?;
    let nv = mesh.vertices.len();
    if load.len() != nv {
        return Err(Error::DomainMismatch("load and mesh sizes differ".into()));
    }
    let ring = mesh.interface_vertices(3);
    if ring.is_empty() {
        return Err(Error::Mesh("the mesh has no ∂Ω₃ edges".into()));
    }
    let mut z = vec![ZERO; nv];
    let mut hv = vec![ZERO; nv];
    for &v in &ring {
        z[v] = jump_value(mesh.vertices[v]);
        hv[v] = jump_flux(mesh.vertices[v]);
    }
    let kz = apply_region_stiffness(mesh, hat_media, &unit, k, &[RegionTag::Outer], &z);
    let mut b: Vec<C64> = load.iter().zip(&kz).map(|(l, q)| l - q).collect();
    for &(i, j, id) in &mesh.edges {
        if id != 3 {
            continue;
        }
        let len = (mesh.vertices[i] - mesh.vertices[j]).norm();
        b[i] -= (hv[i] * 2.0 + hv[j]) * (len / 6.0);
        b[j] -= (hv[j] * 2.0 + hv[i]) * (len / 6.0);
    }
    let (x, residual) = solve_dofs(&system, &system.restrict(&b))?;
    Ok(Field { mesh: mesh.clone(), values: system.extend(&x, nv), outer_jump: Some(z), residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldNorms {
    pub l2: f64,
    pub h1_semi: f64,
    pub h1: f64,
}

/// Exact P1 integrals over the triangles whose tag is in `tags`.
pub fn field_norms(f: &Field, tags: &[RegionTag]) -> FieldNorms {
    let mesh = &f.mesh;
    let (l2, semi) = (0..mesh.triangles.len())
        .into_par_iter()
        .filter(|&t| tags.contains(&mesh.tags[t]))
        .map(|t| {
            let p = mesh.triangles[t].map(|v| mesh.vertices[v]);
            let (g, area) = p1_gradients(p);
            let u = f.triangle_values(t);
            let sum: C64 = u.iter().sum();
            let l2 = area / 12.0 * (u.iter().map(|x| x.norm_sqr()).sum::<f64>() + sum.norm_sqr());
            let gx = u[0] * g[0].x + u[1] * g[1].x + u[2] * g[2].x;
            let gy = u[0] * g[0].y + u[1] * g[1].y + u[2] * g[2].y;
            (l2, area * (gx.norm_sqr() + gy.norm_sqr()))
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    FieldNorms { l2: l2.sqrt(), h1_semi: semi.sqrt(), h1: (l2 + semi).sqrt() }
}

/// Reference fields evaluable with the branch of a given triangle.
pub trait ExactField: Sync {
    /// Value and Cartesian gradient at `x`, using the branch valid around `hint`.
    fn eval(&self, x: Point, hint: Point) -> (C64, [C64; 2]);
}

impl ExactField for RadialField {
    fn eval(&self, x: Point, hint: Point) -> (C64, [C64; 2]) {
        self.eval_hint(x, hint.norm())
    }
}

impl<F: Fn(Point) -> (C64, [C64; 2]) + Sync> ExactField for F {
    fn eval(&self, x: Point, _hint: Point) -> (C64, [C64; 2]) {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorNorms {
    pub l2_err: f64,
    pub h1_err: f64,
    pub l2_ref: f64,
    pub h1_ref: f64,
}

impl ErrorNorms {
    pub fn l2_rel(&self) -> f64 {
        if self.l2_ref > 0.0 {
            self.l2_err / self.l2_ref
        } else {
            self.l2_err
        }
    }

    pub fn h1_rel(&self) -> f64 {
        if self.h1_ref > 0.0 {
            self.h1_err / self.h1_ref
        } else {
            self.h1_err
        }
    }
}

/// `‖f − exact‖` and `‖exact‖` in L² and H¹ over the tagged triangles, by seven-point quadrature.
pub fn error_norms(f: &Field, exact: &dyn ExactField, tags: &[RegionTag]) -> ErrorNorms {
    let mesh = &f.mesh;
    let acc = (0..mesh.triangles.len())
        .into_par_iter()
        .filter(|&t| tags.contains(&mesh.tags[t]))
        .map(|t| {
            let p = mesh.triangles[t].map(|v| mesh.vertices[v]);
            let c = (p[0] + p[1] + p[2]) / 3.0;
            let (g, area) = p1_gradients(p);
            let u = f.triangle_values(t);
            let gh = [
                u[0] * g[0].x + u[1] * g[1].x + u[2] * g[2].x,
                u[0] * g[0].y + u[1] * g[1].y + u[2] * g[2].y,
            ];
            let mut out = [0.0f64; 4];
            for &(l0, l1, l2, w) in &TRI7 {
                let x = p[0] * l0 + p[1] * l1 + p[2] * l2;
                let uh = u[0] * l0 + u[1] * l1 + u[2] * l2;
                let (ue, ge) = exact.eval(x, c);
                let wa = w * area;
                out[0] += wa * (uh - ue).norm_sqr();
                out[1] += wa * ((gh[0] - ge[0]).norm_sqr() + (gh[1] - ge[1]).norm_sqr());
                out[2] += wa * ue.norm_sqr();
                out[3] += wa * (ge[0].norm_sqr() + ge[1].norm_sqr());
            }
            out
        })
        .reduce(|| [0.0; 4], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]);
    ErrorNorms {
        l2_err: acc[0].sqrt(),
        h1_err: (acc[0] + acc[1]).sqrt(),
        l2_ref: acc[2].sqrt(),
        h1_ref: (acc[2] + acc[3]).sqrt(),
    }
}

/// `|Im(uᴴMu) − Im(uᴴb)|` relative to `max(|uᴴMu|, |uᴴb|)` on the free dofs.
pub fn energy_identity_residual(f: &Field, system: &AssembledSystem, load: &[C64]) -> Result<f64> {
    let nv = f.mesh.vertices.len();
    if system.dof_of_vertex.len() != nv || load.len() != nv {
        return Err(Error::DomainMismatch("field, system and load sizes differ".into()));
    }
    let u = system.restrict(&f.values);
    let b = system.restrict(load);
    let mu = system.apply(&u);
    let energy: C64 = u.iter().zip(&mu).map(|(ui, mi)| ui.conj() * mi).sum();
    let pairing: C64 = u.iter().zip(&b).map(|(ui, bi)| ui.conj() * bi).sum();
    let scale = energy.norm().max(pairing.norm());
    Ok(if scale > 0.0 { (energy.im - pairing.im).abs() / scale } else { 0.0 })
}
