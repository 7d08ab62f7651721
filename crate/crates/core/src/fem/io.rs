//! Plain-text mesh files and nodal CSV output.
//!
//! Mesh format: a header `nv nt ne`, then `nv` lines `x y`, `nt` lines `i j k tag` and
//! `ne` lines `i j id`, where `tag` is a region id and `id` an interface id (0 for `∂Ω`).

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::fem::mesh::{Mesh, BOUNDARY_EDGE};
use crate::fem::solve::Field;
use crate::geometry::{Point, RegionTag};

pub fn write_mesh(mesh: &Mesh, mut w: impl Write) -> Result<()> {
    let mut s = String::new();
    writeln!(s, "{} {} {}", mesh.vertices.len(), mesh.triangles.len(), mesh.edges.len()).unwrap();
    for p in &mesh.vertices {
        writeln!(s, "{:.17e} {:.17e}", p.x, p.y).unwrap();
    }
    for (t, tag) in mesh.triangles.iter().zip(&mesh.tags) {
        writeln!(s, "{} {} {} {}", t[0], t[1], t[2], tag.id()).unwrap();
    }
    for (i, j, id) in &mesh.edges {
        writeln!(s, "{i} {j} {id}").unwrap();
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn parse<T: std::str::FromStr>(tok: Option<&str>, line: usize) -> Result<T> {
    tok.and_then(|t| t.parse().ok()).ok_or_else(|| Error::Parse(format!("mesh line {line}: malformed entry")))
}

pub fn read_mesh(r: impl BufRead) -> Result<Mesh> {
    let mut lines = r.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(l) if l.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let mut next = || -> Result<(usize, String)> {
        let (n, l) = lines.next().ok_or_else(|| Error::Parse("mesh file ends early".into()))?;
        Ok((n, l?))
    };
    let (n, head) = next()?;
    let mut it = head.split_whitespace();
    let (nv, nt, ne): (usize, usize, usize) = (parse(it.next(), n)?, parse(it.next(), n)?, parse(it.next(), n)?);
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, l) = next()?;
        let mut it = l.split_whitespace();
        vertices.push(Point::new(parse(it.next(), n)?, parse(it.next(), n)?));
    }
    let mut triangles = Vec::with_capacity(nt);
    let mut tags = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (n, l) = next()?;
        let mut it = l.split_whitespace();
        let t: [usize; 3] = [parse(it.next(), n)?, parse(it.next(), n)?, parse(it.next(), n)?];
        if t.iter().any(|&v| v >= nv) {
            return Err(Error::Parse(format!("mesh line {n}: vertex index out of range")));
        }
        let id: u8 = parse(it.next(), n)?;
        tags.push(RegionTag::from_id(id).ok_or_else(|| Error::Parse(format!("mesh line {n}: unknown region {id}")))?);
        triangles.push(t);
    }
    let mut edges = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (n, l) = next()?;
        let mut it = l.split_whitespace();
        let e: (usize, usize, u8) = (parse(it.next(), n)?, parse(it.next(), n)?, parse(it.next(), n)?);
        if e.0 >= nv || e.1 >= nv || e.2 > 3 {
            return Err(Error::Parse(format!("mesh line {n}: bad edge")));
        }
        edges.push(e);
    }
    let mut boundary: Vec<usize> =
        edges.iter().filter(|e| e.2 == BOUNDARY_EDGE).flat_map(|e| [e.0, e.1]).collect();
    boundary.sort_unstable();
    boundary.dedup();
    Ok(Mesh { vertices, triangles, tags, edges, boundary })
}

/// `vertex_id,x,y,re,im` per vertex. Where a field carries a jump across `∂Ω₃`, the inner
/// trace is written.
pub fn write_field_csv(field: &Field, mut w: impl Write) -> Result<()> {
    let mut s = String::from("vertex_id,x,y,re,im\n");
    for (i, (p, v)) in field.mesh().vertices.iter().zip(field.values()).enumerate() {
        writeln!(s, "{i},{:.16e},{:.16e},{:.16e},{:.16e}", p.x, p.y, v.re, v.im).unwrap();
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}
