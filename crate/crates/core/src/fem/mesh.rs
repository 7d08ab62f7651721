//! Interface-fitted triangulations of the disk built from concentric vertex rings.

use std::collections::HashMap;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::geometry::{Point, RadialLayout, RegionTag};

/// Edge label of the outer boundary in the exchange format.
pub const BOUNDARY_EDGE: u8 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub tags: Vec<RegionTag>,
    /// `(i, j, id)` with `id ∈ {1, 2, 3}` for `∂Ω₁, ∂Ω₂, ∂Ω₃` and `0` for `∂Ω`.
    pub edges: Vec<(usize, usize, u8)>,
    /// Vertices on `∂Ω`, carrying the homogeneous Dirichlet condition.
    pub boundary: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshQuality {
    pub max_edge: f64,
    pub min_angle_deg: f64,
    /// Largest `sagitta / (h²/(8r))` over interface and boundary edges.
    pub chord_ratio: f64,
}

struct Ring {
    start: usize,
    count: usize,
    radius: f64,
    offset: f64,
}

impl Ring {
    fn angle(&self, k: usize) -> f64 {
        self.offset + TAU * k as f64 / self.count as f64
    }
}

/// Triangulates `B_R` so that `r1`, `r2`, `r3`, `R` and every radius in `extra` are vertex rings.
pub fn generate_disk_mesh_with(layout: &RadialLayout, h: f64, extra: &[f64]) -> Result<Mesh> {
    if !(h > 0.0 && h.is_finite()) || h >= layout.r1() / 4.0 {
        return Err(Error::Mesh(format!("target edge length h = {h} must lie in (0, r1/4 = {})", layout.r1() / 4.0)));
    }
    let big_r = layout.outer_radius();
    let mut circles = vec![layout.r1(), layout.r2(), layout.r3(), big_r];
    for &r in extra {
        if !(r > 0.0 && r < big_r) {
            return Err(Error::Mesh(format!("extra circle radius {r} is outside (0, {big_r})")));
        }
        circles.push(r);
    }
    circles.sort_by(f64::total_cmp);
    circles.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * big_r);
    let mut prev = 0.0;
    for &c in &circles {
        if c - prev < 0.4 * h {
            return Err(Error::Mesh(format!("circles at {prev} and {c} are closer than 0.4 h")));
        }
        prev = c;
    }

    let mut radii = Vec::new();
    let mut lo = 0.0;
    for &c in &circles {
        let m = ((c - lo) / (0.866 * h)).ceil().max(1.0) as usize;
        for k in 1..=m {
            radii.push(if k == m { c } else { lo + (c - lo) * k as f64 / m as f64 });
        }
        lo = c;
    }

    let mut vertices = vec![Point::zeros()];
    let mut rings = Vec::with_capacity(radii.len());
    for (k, &rho) in radii.iter().enumerate() {
        let count = ((TAU * rho / h).ceil() as usize).max(6);
        let offset = if k % 2 == 1 { 0.5 * TAU / count as f64 } else { 0.0 };
        let ring = Ring { start: vertices.len(), count, radius: rho, offset };
        for i in 0..count {
            let t = ring.angle(i);
            vertices.push(Point::new(rho * t.cos(), rho * t.sin()));
        }
        rings.push(ring);
    }

    let mut triangles = Vec::new();
    let mut tags = Vec::new();
    let first = &rings[0];
    let tag0 = layout.region_of_radius_lenient(0.5 * first.radius);
    for i in 0..first.count {
        triangles.push([0, first.start + i, first.start + (i + 1) % first.count]);
        tags.push(tag0);
    }
    for w in rings.windows(2) {
        let tag = layout.region_of_radius_lenient(0.5 * (w[0].radius + w[1].radius));
        zipper(&w[0], &w[1], &mut triangles);
        tags.resize(triangles.len(), tag);
    }

    let mut edges = Vec::new();
    let mut boundary = Vec::new();
    for ring in &rings {
        let id = if (ring.radius - big_r).abs() <= 1e-12 * big_r {
            Some(BOUNDARY_EDGE)
        } else {
            [layout.r1(), layout.r2(), layout.r3()]
                .iter()
                .position(|&r| (ring.radius - r).abs() <= 1e-12 * big_r)
                .map(|p| p as u8 + 1)
        };
        if let Some(id) = id {
            for i in 0..ring.count {
                edges.push((ring.start + i, ring.start + (i + 1) % ring.count, id));
            }
            if id == BOUNDARY_EDGE {
                boundary.extend(ring.start..ring.start + ring.count);
            }
        }
    }
    Ok(Mesh { vertices, triangles, tags, edges, boundary })
}

pub fn generate_disk_mesh(layout: &RadialLayout, h: f64) -> Result<Mesh> {
    generate_disk_mesh_with(layout, h, &[])
}

/// Strip of triangles between two consecutive rings, merged by angle.
fn zipper(inner: &Ring, outer: &Ring, out: &mut Vec<[usize; 3]>) {
    let (na, nb) = (inner.count, outer.count);
    let a = |i: usize| inner.start + i % na;
    let b = |j: usize| outer.start + j % nb;
    let (mut i, mut j) = (0usize, 0usize);
    while i < na || j < nb {
        let next_a = inner.angle(i + 1);
        let next_b = outer.angle(j + 1);
        if j >= nb || (i < na && next_a <= next_b) {
            out.push([a(i), b(j), a(i + 1)]);
            i += 1;
        } else {
            out.push([a(i), b(j), b(j + 1)]);
            j += 1;
        }
    }
}

fn signed_area(p: Point, q: Point, r: Point) -> f64 {
    0.5 * ((q - p).x * (r - p).y - (q - p).y * (r - p).x)
}

impl Mesh {
    pub fn area(&self, t: usize) -> f64 {
        let [i, j, k] = self.triangles[t];
        signed_area(self.vertices[i], self.vertices[j], self.vertices[k])
    }

    pub fn interface_vertices(&self, id: u8) -> Vec<usize> {
        let mut v: Vec<usize> = self.edges.iter().filter(|e| e.2 == id).flat_map(|e| [e.0, e.1]).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Vertices at distance `radius` from the origin (within `1e-9·R`), sorted by angle.
    pub fn circle_vertices(&self, radius: f64) -> Vec<usize> {
        let scale = self.vertices.iter().map(|p| p.norm()).fold(0.0, f64::max).max(1.0);
        let mut v: Vec<usize> = (0..self.vertices.len())
            .filter(|&i| (self.vertices[i].norm() - radius).abs() <= 1e-9 * scale)
            .collect();
        v.sort_by(|&p, &q| {
            let a = self.vertices[p].y.atan2(self.vertices[p].x);
            let b = self.vertices[q].y.atan2(self.vertices[q].x);
            a.total_cmp(&b)
        });
        v
    }

    /// Structural checks: positive orientation, conformity, boundary closure and interface
    /// resolution against the layout.
    pub fn check(&self, layout: &RadialLayout) -> Result<()> {
        if self.tags.len() != self.triangles.len() {
            return Err(Error::Mesh("one region tag per triangle required".into()));
        }
        let nv = self.vertices.len();
        let mut edge_use: HashMap<(usize, usize), (u32, u32)> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::Mesh(format!("triangle {t} references a missing vertex")));
            }
            if self.area(t) <= 0.0 {
                return Err(Error::Mesh(format!("triangle {t} is not positively oriented")));
            }
            for k in 0..3 {
                let (p, q) = (tri[k], tri[(k + 1) % 3]);
                let e = edge_use.entry((p.min(q), p.max(q))).or_insert((0, 0));
                if p < q {
                    e.0 += 1;
                } else {
                    e.1 += 1;
                }
            }
        }
        let rim: std::collections::HashSet<usize> = self.boundary.iter().copied().collect();
        let mut outer_edges = 0usize;
        for (&(p, q), &(fwd, back)) in &edge_use {
            if fwd > 1 || back > 1 {
                return Err(Error::Mesh(format!("edge ({p}, {q}) is used twice in the same direction")));
            }
            if fwd + back == 1 {
                outer_edges += 1;
                let on_rim = rim.contains(&p) && rim.contains(&q);
                if !on_rim {
                    return Err(Error::Mesh(format!("free edge ({p}, {q}) is not on the outer boundary")));
                }
            }
        }
        if outer_edges != self.edges.iter().filter(|e| e.2 == BOUNDARY_EDGE).count() {
            return Err(Error::Mesh("boundary edge list does not match the free edges".into()));
        }
        let tol = 1e-9 * layout.outer_radius();
        let bands = |tag: RegionTag| match tag {
            RegionTag::Core => (0.0, layout.r1()),
            RegionTag::Shell => (layout.r1(), layout.r2()),
            RegionTag::Image => (layout.r2(), layout.r3()),
            RegionTag::Outer => (layout.r3(), layout.outer_radius()),
        };
        for (t, tri) in self.triangles.iter().enumerate() {
            let (lo, hi) = bands(self.tags[t]);
            if tri.iter().any(|&v| {
                let r = self.vertices[v].norm();
                r < lo - tol || r > hi + tol
            }) {
                return Err(Error::Mesh(format!("triangle {t} straddles an interface of its {} region", self.tags[t])));
            }
        }
        Ok(())
    }

    pub fn quality(&self, h: f64) -> MeshQuality {
        let mut max_edge = 0.0f64;
        let mut min_angle = f64::INFINITY;
        for tri in &self.triangles {
            let p = tri.map(|v| self.vertices[v]);
            for k in 0..3 {
                let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
                max_edge = max_edge.max((b - a).norm());
                let cos = (b - a).dot(&(c - a)) / ((b - a).norm() * (c - a).norm());
                min_angle = min_angle.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        let mut chord_ratio = 0.0f64;
        for &(i, j, _) in &self.edges {
            let r = self.vertices[i].norm();
            let mid = 0.5 * (self.vertices[i] + self.vertices[j]);
            chord_ratio = chord_ratio.max((r - mid.norm()) / (h * h / (8.0 * r)));
        }
        MeshQuality { max_edge, min_angle_deg: min_angle, chord_ratio }
    }

    /// Triangle containing `x`, by barycentric search; `None` outside the mesh.
    pub fn locate(&self, x: Point) -> Option<(usize, [f64; 3])> {
        let grid = PointLocator::new(self);
        grid.locate(self, x)
    }
}

/// Uniform bucket grid over triangle bounding boxes.
pub struct PointLocator {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

pub fn barycentric(p: [Point; 3], x: Point) -> [f64; 3] {
    let det = signed_area(p[0], p[1], p[2]);
    let l1 = signed_area(x, p[1], p[2]) / det;
    let l2 = signed_area(p[0], x, p[2]) / det;
    [l1, l2, 1.0 - l1 - l2]
}

impl PointLocator {
    pub fn new(mesh: &Mesh) -> Self {
        let (mut min, mut max) = (Point::repeat(f64::INFINITY), Point::repeat(f64::NEG_INFINITY));
        for p in &mesh.vertices {
            min = min.inf(p);
            max = max.sup(p);
        }
        let n = (mesh.triangles.len() as f64).sqrt().ceil().max(1.0);
        let cell = ((max - min).max() / n).max(1e-300);
        let nx = ((max.x - min.x) / cell).ceil() as usize + 1;
        let ny = ((max.y - min.y) / cell).ceil() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let p = tri.map(|v| mesh.vertices[v]);
            let lo = p[0].inf(&p[1]).inf(&p[2]);
            let hi = p[0].sup(&p[1]).sup(&p[2]);
            let (i0, j0) = (((lo.x - min.x) / cell) as usize, ((lo.y - min.y) / cell) as usize);
            let (i1, j1) = (((hi.x - min.x) / cell) as usize, ((hi.y - min.y) / cell) as usize);
            for j in j0..=j1.min(ny - 1) {
                for i in i0..=i1.min(nx - 1) {
                    buckets[j * nx + i].push(t);
                }
            }
        }
        Self { origin: min, cell, nx, ny, buckets }
    }

    pub fn locate(&self, mesh: &Mesh, x: Point) -> Option<(usize, [f64; 3])> {
        let fx = (x.x - self.origin.x) / self.cell;
        let fy = (x.y - self.origin.y) / self.cell;
        if fx < 0.0 || fy < 0.0 || fx >= self.nx as f64 || fy >= self.ny as f64 {
            return None;
        }
        let bucket = &self.buckets[fy as usize * self.nx + fx as usize];
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in bucket {
            let p = mesh.triangles[t].map(|v| mesh.vertices[v]);
            let l = barycentric(p, x);
            let worst = l.iter().cloned().fold(f64::INFINITY, f64::min);
            if worst >= -1e-12 {
                return Some((t, l));
            }
            if best.map_or(true, |b| worst > b.2) {
                best = Some((t, l, worst));
            }
        }
        best.filter(|b| b.2 >= -1e-9).map(|b| (b.0, b.1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> RadialLayout {
        RadialLayout::new(1.0, 2.0, 8.0).unwrap()
    }

    #[test]
    fn coarse_mesh_contract() {
        let h = 0.2;
        let mesh = generate_disk_mesh(&layout(), h).unwrap();
        mesh.check(&layout()).unwrap();
        let q = mesh.quality(h);
        assert!(q.max_edge <= 1.5 * h, "{q:?}");
        assert!(q.min_angle_deg >= 20.0, "{q:?}");
        assert!(q.chord_ratio <= 1.0 + 1e-9, "{q:?}");
        for id in 1..=3u8 {
            let r = [1.0, 2.0, 4.0][id as usize - 1];
            assert!(mesh.interface_vertices(id).iter().all(|&v| (mesh.vertices[v].norm() - r).abs() < 1e-12));
        }
        assert!(mesh.boundary.iter().all(|&v| (mesh.vertices[v].norm() - 8.0).abs() < 1e-12));
    }

    #[test]
    fn infeasible_h_rejected() {
        assert!(matches!(generate_disk_mesh(&layout(), 2.0), Err(Error::Mesh(_))));
        assert!(generate_disk_mesh(&layout(), 0.0).is_err());
        assert!(generate_disk_mesh_with(&layout(), 0.2, &[2.05]).is_err());
    }

    #[test]
    fn refinement_quadruples_vertices() {
        let a = generate_disk_mesh(&layout(), 0.2).unwrap().vertices.len() as f64;
        let b = generate_disk_mesh(&layout(), 0.1).unwrap().vertices.len() as f64;
        let ratio = b / a;
        assert!((ratio - 4.0).abs() <= 0.3 * 4.0, "ratio {ratio}");
    }

    #[test]
    fn extra_circles_are_resolved() {
        let mesh = generate_disk_mesh_with(&layout(), 0.2, &[5.0, 3.0]).unwrap();
        mesh.check(&layout()).unwrap();
        let ring = mesh.circle_vertices(5.0);
        assert!(ring.len() >= (TAU * 5.0 / 0.2) as usize);
    }

    #[test]
    fn locator_finds_points() {
        let mesh = generate_disk_mesh(&layout(), 0.2).unwrap();
        let loc = PointLocator::new(&mesh);
        for x in [Point::new(0.01, 0.0), Point::new(3.3, -2.1), Point::new(-5.0, 5.0)] {
            let (t, l) = loc.locate(&mesh, x).unwrap();
            let p = mesh.triangles[t].map(|v| mesh.vertices[v]);
            let back = p[0] * l[0] + p[1] * l[1] + p[2] * l[2];
            assert!((back - x).norm() < 1e-12);
        }
        assert!(loc.locate(&mesh, Point::new(9.0, 0.0)).is_none());
    }
}
