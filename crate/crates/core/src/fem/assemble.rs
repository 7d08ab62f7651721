//! P1 assembly of `∫ s A∇u·∇φ − k² ∫ s₀ Σ u φ` and of ring and density loads.

use faer::sparse::{SparseColMat, Triplet};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::mesh::Mesh;
use crate::geometry::{LossCoefficient, MediaSpec, Point, RegionTag, SourceSpec, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Sparse system on the free (non-Dirichlet) vertices.
pub struct AssembledSystem {
    pub matrix: SparseColMat<usize, C64>,
    /// Free-vertex index of each mesh vertex, `None` on `∂Ω`.
    pub dof_of_vertex: Vec<Option<usize>>,
    pub vertex_of_dof: Vec<usize>,
    pub loss: LossCoefficient,
    pub k: f64,
}

impl AssembledSystem {
    pub fn dim(&self) -> usize {
        self.vertex_of_dof.len()
    }

    /// Restricts a vertex vector to the free dofs.
    pub fn restrict(&self, full: &[C64]) -> Vec<C64> {
        self.vertex_of_dof.iter().map(|&v| full[v]).collect()
    }

    /// Extends a dof vector by zeros on `∂Ω`.
    pub fn extend(&self, dofs: &[C64], nv: usize) -> Vec<C64> {
        let mut full = vec![ZERO; nv];
        for (d, &v) in self.vertex_of_dof.iter().enumerate() {
            full[v] = dofs[d];
        }
        full
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.dim()];
        let m = self.matrix.as_ref();
        for j in 0..m.ncols() {
            let xj = x[j];
            for (i, v) in m.row_idx_of_col(j).zip(m.val_of_col(j)) {
                y[i] += v * xj;
            }
        }
        y
    }
}

/// `(∇λ₀, ∇λ₁, ∇λ₂, area)` of a triangle.
pub fn p1_gradients(p: [Point; 3]) -> ([Point; 3], f64) {
    let area = 0.5 * ((p[1] - p[0]).x * (p[2] - p[0]).y - (p[1] - p[0]).y * (p[2] - p[0]).x);
    let g = |a: Point, b: Point| Point::new(a.y - b.y, b.x - a.x) / (2.0 * area);
    ([g(p[1], p[2]), g(p[2], p[0]), g(p[0], p[1])], area)
}

/// Element stiffness `∫ A∇λ_j·∇λ_i` with `A` at the centroid, and the element mass matrix.
pub fn element_matrices(p: [Point; 3], a: &nalgebra::Matrix2<f64>) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    let (g, area) = p1_gradients(p);
    let mut k = [[0.0; 3]; 3];
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area * g[i].dot(&(a * g[j]));
            m[i][j] = area / 12.0 * if i == j { 2.0 } else { 1.0 };
        }
    }
    (k, m)
}

fn centroid(p: [Point; 3]) -> Point {
    (p[0] + p[1] + p[2]) / 3.0
}

/// Local matrix of one triangle under the coefficients of its region tag.
fn local_matrix(mesh: &Mesh, t: usize, media: &MediaSpec, loss: &LossCoefficient, k: f64) -> [[C64; 3]; 3] {
    let p = mesh.triangles[t].map(|v| mesh.vertices[v]);
    let c = centroid(p);
    let tag = mesh.tags[t];
    let (stiff, mass) = element_matrices(p, &media.a_at(c));
    let s = loss.s_delta(tag);
    let mass_coef = k * k * loss.s0(tag) * media.sigma_at(c);
    let mut out = [[ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = s * stiff[i][j] - C64::from(mass_coef * mass[i][j]);
        }
    }
    out
}

fn dof_maps(mesh: &Mesh) -> (Vec<Option<usize>>, Vec<usize>) {
    let mut fixed = vec![false; mesh.vertices.len()];
    for &v in &mesh.boundary {
        fixed[v] = true;
    }
    let mut dof_of_vertex = vec![None; mesh.vertices.len()];
    let mut vertex_of_dof = Vec::new();
    for v in 0..mesh.vertices.len() {
        if !fixed[v] {
            dof_of_vertex[v] = Some(vertex_of_dof.len());
            vertex_of_dof.push(v);
        }
    }
    (dof_of_vertex, vertex_of_dof)
}

/// Assembles the Dirichlet-reduced matrix. Local matrices are computed in parallel and
/// accumulated in triangle order, so the result does not depend on the thread count.
pub fn assemble_system(mesh: &Mesh, media: &MediaSpec, loss: LossCoefficient, k: f64) -> Result<AssembledSystem> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::InvalidMedia(format!("wavenumber k = {k} must be finite and ≥ 0")));
    }
    let (dof_of_vertex, vertex_of_dof) = dof_maps(mesh);
    let locals: Vec<[[C64; 3]; 3]> = (0..mesh.triangles.len())
        .into_par_iter()
        .map(|t| local_matrix(mesh, t, media, &loss, k))
        .collect();
    let mut triplets = Vec::with_capacity(9 * locals.len());
    for (t, local) in locals.iter().enumerate() {
        let tri = mesh.triangles[t];
        for i in 0..3 {
            let Some(di) = dof_of_vertex[tri[i]] else { continue };
            for j in 0..3 {
                let Some(dj) = dof_of_vertex[tri[j]] else { continue };
                triplets.push(Triplet::new(di, dj, local[i][j]));
            }
        }
    }
    let n = vertex_of_dof.len();
    let matrix = SparseColMat::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::SingularSystem(format!("sparse assembly failed: {e:?}")))?;
    Ok(AssembledSystem { matrix, dof_of_vertex, vertex_of_dof, loss, k })
}

/// Element contributions `K_e` restricted to triangles with the given tags, as a vertex-indexed
/// action `y = K x`, without Dirichlet elimination.
pub fn apply_region_stiffness(mesh: &Mesh, media: &MediaSpec, loss: &LossCoefficient, k: f64, tags: &[RegionTag], x: &[C64]) -> Vec<C64> {
    let mut y = vec![ZERO; mesh.vertices.len()];
    for t in 0..mesh.triangles.len() {
        if !tags.contains(&mesh.tags[t]) {
            continue;
        }
        let local = local_matrix(mesh, t, media, loss, k);
        let tri = mesh.triangles[t];
        for i in 0..3 {
            for j in 0..3 {
                y[tri[i]] += local[i][j] * x[tri[j]];
            }
        }
    }
    y
}

/// Four-point Gauss–Legendre rule on `[0, 1]`.
const GAUSS4: [(f64, f64); 4] = [
    (0.069_431_844_202_973_71, 0.173_927_422_568_726_93),
    (0.330_009_478_207_571_9, 0.326_072_577_431_273_07),
    (0.669_990_521_792_428_1, 0.326_072_577_431_273_07),
    (0.930_568_155_797_026_3, 0.173_927_422_568_726_93),
];

/// Vertex load `b_i = −∫ s₀ f φ_i` of the ring sources, integrated along the mesh polygon at
/// each ring radius; `f = c δ(r − r0)/r e^{inθ}` contributes `c ∫ e^{inθ} φ_i dθ`.
pub fn ring_load(mesh: &Mesh, source: &SourceSpec, loss: &LossCoefficient) -> Result<Vec<C64>> {
    let mut b = vec![ZERO; mesh.vertices.len()];
    for ring in &source.rings {
        if ring.amplitude == ZERO {
            continue;
        }
        let verts = mesh.circle_vertices(ring.r0);
        if verts.len() < 3 {
            return Err(Error::Mesh(format!("the mesh has no vertex circle at r0 = {}", ring.r0)));
        }
        let tag = ring_region(mesh, &verts);
        let s0 = loss.s0(tag);
        for w in 0..verts.len() {
            let (i, j) = (verts[w], verts[(w + 1) % verts.len()]);
            let (p, q) = (mesh.vertices[i], mesh.vertices[j]);
            for &(t, wt) in &GAUSS4 {
                let x = p + (q - p) * t;
                // dθ/dt along the chord
                let dtheta = (x.x * (q - p).y - x.y * (q - p).x) / x.norm_squared();
                let theta = x.y.atan2(x.x);
                let e = C64::from_polar(1.0, ring.n as f64 * theta) * ring.amplitude * (-s0 * wt * dtheta);
                b[i] += e * (1.0 - t);
                b[j] += e * t;
            }
        }
    }
    Ok(b)
}

/// Region of a ring source from the tags of the triangles touching its vertices; rings lie
/// strictly inside one region.
fn ring_region(mesh: &Mesh, verts: &[usize]) -> RegionTag {
    let probe = verts[0];
    let mut tags: Vec<RegionTag> = mesh
        .triangles
        .iter()
        .zip(&mesh.tags)
        .filter(|(tri, _)| tri.contains(&probe))
        .map(|(_, &t)| t)
        .collect();
    tags.sort();
    tags.dedup();
    tags.first().copied().unwrap_or(RegionTag::Outer)
}

/// Seven-point degree-5 rule on the reference triangle: `(λ₀, λ₁, λ₂, weight)`, weights sum to 1.
pub const TRI7: [(f64, f64, f64, f64); 7] = {
    const A1: f64 = 0.059_715_871_789_769_82;
    const B1: f64 = 0.470_142_064_105_115_1;
    const A2: f64 = 0.797_426_985_353_087_3;
    const B2: f64 = 0.101_286_507_323_456_34;
    const W0: f64 = 0.225;
    const W1: f64 = 0.132_394_152_788_506_18;
    const W2: f64 = 0.125_939_180_544_827_15;
    [
        (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, W0),
        (A1, B1, B1, W1),
        (B1, A1, B1, W1),
        (B1, B1, A1, W1),
        (A2, B2, B2, W2),
        (B2, A2, B2, W2),
        (B2, B2, A2, W2),
    ]
};

/// Vertex load `b_i = −∫ s₀ f φ_i` of a nodal-density source by seven-point quadrature.
pub fn density_load(mesh: &Mesh, density: &(dyn Fn(Point) -> C64 + Send + Sync), loss: &LossCoefficient) -> Vec<C64> {
    let mut b = vec![ZERO; mesh.vertices.len()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = tri.map(|v| mesh.vertices[v]);
        let area = mesh.area(t);
        let s0 = loss.s0(mesh.tags[t]);
        for &(l0, l1, l2, w) in &TRI7 {
            let x = p[0] * l0 + p[1] * l1 + p[2] * l2;
            let f = density(x) * (-s0 * w * area);
            b[tri[0]] += f * l0;
            b[tri[1]] += f * l1;
            b[tri[2]] += f * l2;
        }
    }
    b
}

/// Full source load: rings plus the optional density.
pub fn source_load(mesh: &Mesh, source: &SourceSpec, loss: &LossCoefficient) -> Result<Vec<C64>> {
    let mut b = ring_load(mesh, source, loss)?;
    if let Some(d) = &source.density {
        for (bi, di) in b.iter_mut().zip(density_load(mesh, &**d, loss)) {
            *bi += di;
        }
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::mesh::generate_disk_mesh_with;
    use crate::geometry::{RadialLayout, RingSource};

    fn setup() -> (Mesh, MediaSpec) {
        let l = RadialLayout::new(1.0, 2.0, 8.0).unwrap();
        let mesh = generate_disk_mesh_with(&l, 0.2, &[5.0]).unwrap();
        (mesh, MediaSpec::isotropic(l, 1.0, 1.0))
    }

    fn dense(sys: &AssembledSystem) -> Vec<Vec<C64>> {
        let n = sys.dim();
        let mut d = vec![vec![ZERO; n]; n];
        let m = sys.matrix.as_ref();
        for j in 0..n {
            for (i, v) in m.row_idx_of_col(j).zip(m.val_of_col(j)) {
                d[i][j] += *v;
            }
        }
        d
    }

    #[test]
    fn unit_coefficients_give_laplace_stiffness() {
        let (mesh, media) = setup();
        let sys = assemble_system(&mesh, &media, LossCoefficient::unit(), 0.0).unwrap();
        // Interior rows whose neighbours are all free sum to zero.
        let ones = vec![C64::new(1.0, 0.0); sys.dim()];
        let y = sys.apply(&ones);
        let mut near_rim = vec![false; mesh.vertices.len()];
        for (tri, _) in mesh.triangles.iter().zip(&mesh.tags) {
            if tri.iter().any(|v| sys.dof_of_vertex[*v].is_none()) {
                tri.iter().for_each(|&v| near_rim[v] = true);
            }
        }
        for (d, &v) in sys.vertex_of_dof.iter().enumerate() {
            if !near_rim[v] {
                assert!(y[d].norm() < 1e-12, "row {d}: {}", y[d]);
            }
        }
    }

    #[test]
    fn shell_imaginary_part_is_delta_times_stiffness() {
        let (mesh, media) = setup();
        let sys = assemble_system(&mesh, &media, LossCoefficient::new(0.1), 0.0).unwrap();
        let x: Vec<C64> = (0..mesh.vertices.len()).map(|i| C64::new((i as f64 * 0.37).sin(), 0.0)).collect();
        let shell = apply_region_stiffness(&mesh, &media, &LossCoefficient::unit(), 0.0, &[RegionTag::Shell], &x);
        let all = apply_region_stiffness(&mesh, &media, &LossCoefficient::new(0.1), 0.0, &RegionTag::ALL, &x);
        for (a, s) in all.iter().zip(&shell) {
            assert!((a.im - 0.1 * s.re).abs() < 1e-12);
        }
    }

    #[test]
    fn matrix_is_symmetric() {
        let (mesh, media) = setup();
        let sys = assemble_system(&mesh, &media, LossCoefficient::new(0.3), 1.5).unwrap();
        let d = dense(&sys);
        let mut worst = 0.0f64;
        for i in 0..d.len() {
            for j in 0..i {
                worst = worst.max((d[i][j] - d[j][i]).norm());
            }
        }
        assert_eq!(worst, 0.0);
    }

    #[test]
    fn ring_load_integrates_the_mode() {
        let (mesh, _) = setup();
        let amp = C64::new(0.5, 0.25);
        let src = SourceSpec::rings(vec![RingSource { n: 0, amplitude: amp, r0: 5.0 }]);
        let b = ring_load(&mesh, &src, &LossCoefficient::new(0.1)).unwrap();
        let total: C64 = b.iter().sum();
        assert!((total + amp * std::f64::consts::TAU).norm() < 1e-12);
        let src3 = SourceSpec::rings(vec![RingSource { n: 3, amplitude: amp, r0: 5.0 }]);
        let total3: C64 = ring_load(&mesh, &src3, &LossCoefficient::new(0.1)).unwrap().iter().sum();
        assert!(total3.norm() < 1e-10);
        let missing = SourceSpec::rings(vec![RingSource { n: 0, amplitude: amp, r0: 5.37 }]);
        assert!(ring_load(&mesh, &missing, &LossCoefficient::new(0.1)).is_err());
    }

    #[test]
    fn quadrature_rule_is_exact_for_quadratics() {
        let total: f64 = TRI7.iter().map(|q| q.3).sum();
        assert!((total - 1.0).abs() < 1e-14);
        let second: f64 = TRI7.iter().map(|q| q.3 * q.0 * q.1).sum();
        assert!((second - 1.0 / 12.0).abs() < 1e-14);
    }
}
