//! The δ → 0 limit construction for the Kelvin pair: the triple `(U, V, W)` and its assembly.

use crate::error::{Error, Result};
use crate::geometry::{Point, RadialLayout, RegionTag, C64};
use crate::spectral::mode::{ModeSolution, Side};
use crate::spectral::solver::{cauchy_march, merge_rings, solve_radial, RadialProblem};
use crate::transforms::Diffeomorphism;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Limit data of one mode: `U`, `V` on `(r2, r3)` and `W` on `(0, R)` with a jump at `r3`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitTriple {
    pub n: u32,
    pub u: ModeSolution,
    pub v: ModeSolution,
    pub w: ModeSolution,
}

fn march_breaks(lo: f64, hi: f64, radii: &[f64]) -> Vec<f64> {
    let mut b = vec![lo, hi];
    b.extend(radii.iter().copied().filter(|&r| r > lo && r < hi));
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

fn jumps_at(bps: &[f64], jumps: &[(f64, C64)]) -> Vec<C64> {
    bps[1..bps.len() - 1]
        .iter()
        .map(|&t| jumps.iter().filter(|j| j.0 == t).map(|j| j.1).sum())
        .collect()
}

/// Solves for `U_n`, `W_n`, `V_n` given the ring sources of mode `n` (`k = 0`, `A = I`).
pub fn solve_mode_limit(layout: &RadialLayout, n: u32, rings: &[(f64, C64)]) -> Result<LimitTriple> {
    let (r2, r3, big_r) = (layout.r2(), layout.r3(), layout.outer_radius());
    let lambda = layout.core_dilation();
    let mut u_jumps = Vec::new();
    let mut v_jumps = Vec::new();
    let mut w_rings = Vec::new();
    for (rho, c) in merge_rings(rings) {
        if !(rho > 0.0 && rho < big_r) {
            return Err(Error::InvalidSource(format!("ring radius {rho} must lie in (0, {big_r})")));
        }
        match layout.region_of_radius(rho) {
            Ok(RegionTag::Core) => w_rings.push((lambda * rho, c)),
            Ok(RegionTag::Shell) => {
                let image = r2 * r2 / rho;
                u_jumps.push((image, c / image));
            }
            Ok(RegionTag::Image) => {
                u_jumps.push((rho, -c / rho));
                v_jumps.push((rho, c / rho));
            }
            Ok(RegionTag::Outer) => w_rings.push((rho, c)),
            Err(_) if (rho - r3).abs() <= layout.interface_tolerance() => {
                return Err(Error::InvalidSource(format!("ring radius {rho} lies on the image interface")));
            }
            Err(e) => return Err(e),
        }
    }

    let ub = march_breaks(r2, r3, &u_jumps.iter().map(|j| j.0).collect::<Vec<_>>());
    let u = cauchy_march(n, &ub, Side::Inner, (ZERO, ZERO), &jumps_at(&ub, &u_jumps))?;
    let (u3, du3) = u.eval_side(r3, Side::Inner);

    let mut wb = vec![0.0, r3, big_r];
    wb.extend(w_rings.iter().map(|r| r.0));
    wb.sort_by(f64::total_cmp);
    wb.dedup();
    let m = wb.len() - 1;
    let mut value_jump = vec![ZERO; m - 1];
    let mut flux_jump = vec![ZERO; m - 1];
    for (k, &t) in wb[1..m].iter().enumerate() {
        if t == r3 {
            value_jump[k] -= u3;
            flux_jump[k] -= du3;
        }
        for &(rho, c) in &w_rings {
            if rho == t {
                flux_jump[k] += c / rho;
            }
        }
    }
    let w = solve_radial(&RadialProblem {
        n,
        breakpoints: wb,
        coefficient: vec![C64::new(1.0, 0.0); m],
        value_jump,
        flux_jump,
        boundary_value: ZERO,
    })?;

    let (w3, dw3) = w.eval_side(r3, Side::Outer);
    let vb = march_breaks(r2, r3, &v_jumps.iter().map(|j| j.0).collect::<Vec<_>>());
    let v = cauchy_march(n, &vb, Side::Outer, (w3, dw3), &jumps_at(&vb, &v_jumps))?;
    Ok(LimitTriple { n, u, v, w })
}

impl LimitTriple {
    /// `NI` for this mode: `W∘(λ·)` on the core, `(U+V)` pulled back through the Kelvin map at
    /// `r2` on the shell, `V` on the image region, `W` outside.
    pub fn assemble(&self, layout: &RadialLayout) -> Result<ModeSolution> {
        let (r1, r2, r3, big_r) = (layout.r1(), layout.r2(), layout.r3(), layout.outer_radius());
        let core = self.w.restrict(0.0, r3)?.pullback_dilation(layout.core_dilation())?;
        let core = snap(core, r1);
        let shell = snap_lo(self.u.add(&self.v)?.pullback_kelvin(r2)?, r1, r2);
        let image = self.v.clone();
        let outer = self.w.restrict(r3, big_r)?;
        ModeSolution::concat(&[core, shell, image, outer])
    }
}

/// Pins the end of a mapped span to the exact radius it is meant to reach.
fn snap(m: ModeSolution, hi: f64) -> ModeSolution {
    let mut bps = m.breakpoints().to_vec();
    *bps.last_mut().expect("nonempty") = hi;
    ModeSolution::new(m.n(), bps, m.coeffs().to_vec()).expect("tiny adjustment keeps order")
}

fn snap_lo(m: ModeSolution, lo: f64, hi: f64) -> ModeSolution {
    let mut bps = m.breakpoints().to_vec();
    bps[0] = lo;
    *bps.last_mut().expect("nonempty") = hi;
    ModeSolution::new(m.n(), bps, m.coeffs().to_vec()).expect("tiny adjustment keeps order")
}

fn is_kelvin_about_origin(t: &Diffeomorphism, radius: f64) -> bool {
    [Point::new(0.37, 0.0), Point::new(-1.3, 2.2), Point::new(5.0, -0.4)].iter().all(|&x| {
        let expected = x * (radius * radius / x.norm_squared());
        t.forward(x).map(|y| (y - expected).norm() <= 1e-12 * expected.norm().max(1.0)).unwrap_or(false)
    })
}

/// Superposition of angular modes `Σ uₙ(r) e^{inθ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    modes: Vec<ModeSolution>,
}

impl RadialField {
    pub fn new(mut modes: Vec<ModeSolution>) -> Self {
        modes.sort_by_key(|m| m.n());
        Self { modes }
    }

    pub fn modes(&self) -> &[ModeSolution] {
        &self.modes
    }

    pub fn mode(&self, n: u32) -> Option<&ModeSolution> {
        self.modes.iter().find(|m| m.n() == n)
    }

    pub fn value(&self, x: Point) -> C64 {
        let r = x.norm();
        let theta = x.y.atan2(x.x);
        self.modes
            .iter()
            .map(|m| m.value(r) * C64::from_polar(1.0, m.n() as f64 * theta))
            .sum()
    }

    /// Cartesian gradient.
    pub fn gradient(&self, x: Point) -> [C64; 2] {
        self.eval_hint(x, x.norm()).1
    }

    /// Value and Cartesian gradient with each mode's branch chosen by the radius `hint`.
    pub fn eval_hint(&self, x: Point, hint: f64) -> (C64, [C64; 2]) {
        let r = x.norm();
        let theta = x.y.atan2(x.x);
        let (s, c) = theta.sin_cos();
        let mut val = ZERO;
        let mut dr = ZERO;
        let mut dt = ZERO;
        for m in &self.modes {
            let e = C64::from_polar(1.0, m.n() as f64 * theta);
            let (u, du) = m.eval_hint(r, hint);
            val += u * e;
            dr += du * e;
            dt += u * e * C64::new(0.0, m.n() as f64);
        }
        let dt = if r > 0.0 { dt / r } else { ZERO };
        (val, [dr * c - dt * s, dr * s + dt * c])
    }
}

impl crate::transforms::ClosedFormField for RadialField {
    fn value(&self, x: Point) -> C64 {
        RadialField::value(self, x)
    }

    fn gradient(&self, x: Point) -> [C64; 2] {
        RadialField::gradient(self, x)
    }
}

/// Assembles `NI(f)` from per-mode triples. `f`, `g` must be the Kelvin pair of the layout and
/// every mode in `required` must be present.
pub fn assemble_ni(
    layout: &RadialLayout,
    triples: &[LimitTriple],
    f: &Diffeomorphism,
    g: &Diffeomorphism,
    required: &[u32],
) -> Result<RadialField> {
    if !is_kelvin_about_origin(f, layout.r2()) || !is_kelvin_about_origin(g, layout.r3()) {
        return Err(Error::DomainMismatch("limit assembly needs the Kelvin pair at r2 and r3".into()));
    }
    let missing: Vec<u32> = required.iter().copied().filter(|n| !triples.iter().any(|t| t.n == *n)).collect();
    if !missing.is_empty() {
        return Err(Error::MissingModes(missing));
    }
    let modes = triples.iter().map(|t| t.assemble(layout)).collect::<Result<Vec<_>>>()?;
    Ok(RadialField::new(modes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::norms::{interface_jumps, mode_h1_norm};
    use crate::spectral::solver::solve_mode_delta;
    use crate::transforms::kelvin_pair;

    fn layout() -> RadialLayout {
        RadialLayout::new(1.0, 2.0, 8.0).unwrap()
    }

    fn one() -> C64 {
        C64::new(1.0, 0.0)
    }

    #[test]
    fn exterior_source_has_no_u() {
        let l = layout();
        for n in [0, 1, 3, 9] {
            let t = solve_mode_limit(&l, n, &[(5.0, one())]).unwrap();
            assert!(t.u.is_zero());
            for r in [2.1, 3.0, 3.9] {
                assert!((t.v.value(r) - t.w.value(r)).norm() < 1e-12 * t.w.value(r).norm().max(1e-300));
            }
        }
    }

    #[test]
    fn zero_source_gives_zero_triple() {
        let t = solve_mode_limit(&layout(), 2, &[(3.0, C64::new(0.0, 0.0))]).unwrap();
        assert!(t.u.is_zero() && t.v.is_zero() && t.w.is_zero());
    }

    #[test]
    fn triple_conditions() {
        let l = layout();
        let t = solve_mode_limit(&l, 4, &[(3.0, one()), (1.5, C64::new(0.2, 0.1)), (0.5, C64::new(-0.3, 0.0))]).unwrap();
        let (u2, du2) = t.u.eval_side(2.0, Side::Outer);
        assert!(u2.norm() < 1e-14 && du2.norm() < 1e-14);
        assert!(!t.u.is_zero());
        let (u3, du3) = t.u.eval_side(4.0, Side::Inner);
        let (jv, jf) = interface_jumps(&t.w, 4.0, one(), one());
        assert!((jv + u3).norm() < 1e-12 * u3.norm());
        assert!((jf + du3).norm() < 1e-12 * du3.norm());
        assert!(t.w.value(8.0).norm() < 1e-14);
    }

    #[test]
    fn u_norms_grow_for_image_source() {
        let l = layout();
        let norms: Vec<f64> = (1..=40)
            .map(|n| mode_h1_norm(&solve_mode_limit(&l, n, &[(3.0, one())]).unwrap().u, 2.0, 4.0).unwrap())
            .collect();
        let ratio = (norms[39] / norms[31]).powf(1.0 / 8.0);
        assert!(ratio > 1.05, "ratio {ratio}");
        assert!(norms.windows(2).skip(4).all(|w| w[1] > w[0]));
    }

    #[test]
    fn assembled_field_is_continuous() {
        let l = layout();
        let (f, g) = kelvin_pair(&l);
        let triples: Vec<LimitTriple> = (0..=20).map(|n| solve_mode_limit(&l, n, &[(5.0, one())]).unwrap()).collect();
        let ni = assemble_ni(&l, &triples, &f, &g, &(0..=20).collect::<Vec<_>>()).unwrap();
        for m in ni.modes() {
            for (r, si, so) in [(1.0, 1.0, -1.0), (2.0, -1.0, 1.0), (4.0, 1.0, 1.0)] {
                let (jv, jf) = interface_jumps(m, r, C64::from(si), C64::from(so));
                let scale = m.value(r).norm().max(m.derivative(r).norm()).max(1e-300);
                assert!(jv.norm() <= 1e-10 * scale && jf.norm() <= 1e-10 * scale, "n = {}, r = {r}", m.n());
            }
        }
        let t5 = &triples[5];
        for r in [4.5, 6.0, 7.5] {
            assert_eq!(ni.mode(5).unwrap().value(r), t5.w.value(r));
        }
    }

    #[test]
    fn assembly_rejects_missing_modes_and_wrong_maps() {
        let l = layout();
        let (f, g) = kelvin_pair(&l);
        let triples = vec![solve_mode_limit(&l, 0, &[(5.0, one())]).unwrap()];
        assert!(matches!(assemble_ni(&l, &triples, &f, &g, &[0, 1]), Err(Error::MissingModes(m)) if m == vec![1]));
        let wrong = Diffeomorphism::kelvin(Point::zeros(), 3.0).unwrap();
        assert!(assemble_ni(&l, &triples, &f, &wrong, &[0]).is_err());
        let empty = assemble_ni(&l, &[], &f, &g, &[]).unwrap();
        assert_eq!(empty.value(Point::new(3.0, 1.0)), ZERO);
    }

    #[test]
    fn shell_and_core_sources_converge_to_limit() {
        let l = layout();
        for (rho, n) in [(1.5, 2u32), (0.5, 3), (3.0, 2), (6.0, 1)] {
            let rings = [(rho, one())];
            let ni = solve_mode_limit(&l, n, &rings).unwrap().assemble(&l).unwrap();
            let errs: Vec<f64> = [1e-4, 1e-6]
                .iter()
                .map(|&d| {
                    let u = solve_mode_delta(&l, n, &rings, d).unwrap();
                    [0.5, 1.3, 1.8, 2.5, 3.5, 5.0, 7.0]
                        .iter()
                        .map(|&r| (u.value(r) - ni.value(r)).norm())
                        .fold(0.0, f64::max)
                })
                .collect();
            assert!(errs[1] < 1e-3 && errs[1] < errs[0], "ρ = {rho}: {errs:?}");
        }
    }
}
