//! Dense mode-matching solves and Cauchy marches for radial transmission problems.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::geometry::{LossCoefficient, RadialLayout, C64};
use crate::spectral::mode::{ModeSolution, Side};

/// Matching systems whose smallest-to-largest pivot ratio falls below this are resonant.
pub const RESONANCE_PIVOT_RATIO: f64 = 1e-13;

const ZERO: C64 = C64::new(0.0, 0.0);

/// One mode of `(s u')' + s u'/r − s n² u/r² = 0` on `(0, R)` with prescribed jumps of `u` and of
/// `s u'` at the interior breakpoints and a Dirichlet value at `R`.
#[derive(Debug, Clone)]
pub struct RadialProblem {
    pub n: u32,
    /// `0 = t₀ < t₁ < … < t_m = R`
    pub breakpoints: Vec<f64>,
    /// Coefficient `s` on each of the `m` intervals.
    pub coefficient: Vec<C64>,
    /// `u(t_j⁺) − u(t_j⁻)` for `j = 1..m−1`.
    pub value_jump: Vec<C64>,
    /// `s u'(t_j⁺) − s u'(t_j⁻)` for `j = 1..m−1`.
    pub flux_jump: Vec<C64>,
    pub boundary_value: C64,
}

/// Interval basis normalised to be `O(1)`: `(r/hi)ⁿ`, `(lo/r)ⁿ`, or `1`, `ln(r/hi)` for `n = 0`.
/// Returns `(φa, φb, r φa', r φb')`.
fn scaled_basis(n: u32, lo: f64, hi: f64, r: f64) -> (f64, f64, f64, f64) {
    if n == 0 {
        (1.0, (r / hi).ln(), 0.0, 1.0)
    } else {
        let nf = n as f64;
        let pa = (r / hi).powi(n as i32);
        let pb = if lo > 0.0 { (lo / r).powi(n as i32) } else { 0.0 };
        (pa, pb, nf * pa, -nf * pb)
    }
}

/// Converts scaled coefficients back to the raw basis `rⁿ`, `r⁻ⁿ` (or `1`, `ln r`).
fn unscale(n: u32, lo: f64, hi: f64, a: C64, b: C64) -> (C64, C64) {
    if n == 0 {
        (a - b * hi.ln(), b)
    } else {
        let a = a / hi.powi(n as i32);
        let b = if lo > 0.0 { b * lo.powi(n as i32) } else { ZERO };
        (a, b)
    }
}

/// Solves the matching system of a radial problem. The innermost interval carries only the
/// regular basis function.
pub fn solve_radial(p: &RadialProblem) -> Result<ModeSolution> {
    let t = &p.breakpoints;
    let m = t.len() - 1;
    if m == 0 || p.coefficient.len() != m || p.value_jump.len() != m - 1 || p.flux_jump.len() != m - 1 {
        return Err(Error::InvalidSource("inconsistent radial problem dimensions".into()));
    }
    if t[0] != 0.0 {
        return Err(Error::InvalidSource("radial problems start at the origin".into()));
    }
    let dim = 2 * m - 1;
    let col = |j: usize, k: usize| if j == 0 { 0 } else { 2 * j - 1 + k };
    let mut mat = DMatrix::<C64>::zeros(dim, dim);
    let mut rhs = DVector::<C64>::zeros(dim);
    let mut row = 0;
    for j in 1..m {
        let r = t[j];
        let inner = scaled_basis(p.n, t[j - 1], r, r);
        let outer = scaled_basis(p.n, r, t[j + 1], r);
        let (si, so) = (p.coefficient[j - 1], p.coefficient[j]);
        mat[(row, col(j, 0))] += C64::from(outer.0);
        mat[(row, col(j, 1))] += C64::from(outer.1);
        mat[(row, col(j - 1, 0))] -= C64::from(inner.0);
        if j > 1 {
            mat[(row, col(j - 1, 1))] -= C64::from(inner.1);
        }
        rhs[row] = p.value_jump[j - 1];
        row += 1;
        mat[(row, col(j, 0))] += so * outer.2;
        mat[(row, col(j, 1))] += so * outer.3;
        mat[(row, col(j - 1, 0))] -= si * inner.2;
        if j > 1 {
            mat[(row, col(j - 1, 1))] -= si * inner.3;
        }
        rhs[row] = p.flux_jump[j - 1] * r;
        row += 1;
    }
    let last = scaled_basis(p.n, t[m - 1], t[m], t[m]);
    mat[(row, col(m - 1, 0))] = C64::from(last.0);
    if m > 1 {
        mat[(row, col(m - 1, 1))] = C64::from(last.1);
    }
    rhs[row] = p.boundary_value;

    for i in 0..dim {
        let scale = mat.row(i).iter().fold(0.0f64, |acc, v| acc.max(v.norm()));
        if scale > 0.0 {
            mat.row_mut(i).iter_mut().for_each(|v| *v /= scale);
            rhs[i] /= scale;
        }
    }
    let lu = mat.lu();
    let diag: Vec<f64> = lu.u().diagonal().iter().map(|v| v.norm()).collect();
    let pmax = diag.iter().cloned().fold(0.0f64, f64::max);
    let pmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = if pmax > 0.0 { pmin / pmax } else { 0.0 };
    if ratio < RESONANCE_PIVOT_RATIO {
        return Err(Error::ResonantMode { n: p.n, pivot_ratio: ratio });
    }
    let x = lu.solve(&rhs).ok_or(Error::ResonantMode { n: p.n, pivot_ratio: 0.0 })?;
    let coeffs = (0..m)
        .map(|j| {
            let a = x[col(j, 0)];
            let b = if j == 0 { ZERO } else { x[col(j, 1)] };
            unscale(p.n, t[j], t[j + 1], a, b)
        })
        .collect();
    ModeSolution::new(p.n, t.clone(), coeffs)
}

/// Raw coefficients on `[lo, hi]` matching value and derivative at `r`.
pub fn coeffs_from_cauchy(n: u32, lo: f64, hi: f64, r: f64, value: C64, deriv: C64) -> Result<(C64, C64)> {
    let (pa, pb, da, db) = scaled_basis(n, lo, hi, r);
    let m = Matrix2::new(C64::from(pa), C64::from(pb), C64::from(da), C64::from(db));
    let sol = m
        .lu()
        .solve(&Vector2::new(value, deriv * r))
        .ok_or_else(|| Error::SingularSystem(format!("Cauchy data at r = {r} for mode {n}")))?;
    Ok(unscale(n, lo, hi, sol[0], sol[1]))
}

/// Marches Cauchy data `(u, u')` across `breakpoints`, starting at the inner end
/// (`Side::Inner`) or at the outer end. `deriv_jump[k]` is `u'(t⁺) − u'(t⁻)` at the
/// `k`-th interior breakpoint; values are continuous.
pub fn cauchy_march(n: u32, breakpoints: &[f64], start: Side, data: (C64, C64), deriv_jump: &[C64]) -> Result<ModeSolution> {
    let m = breakpoints.len() - 1;
    if deriv_jump.len() + 1 != m {
        return Err(Error::InvalidSource("one derivative jump per interior breakpoint".into()));
    }
    let mut coeffs = vec![(ZERO, ZERO); m];
    let (mut u, mut du) = data;
    let order: Vec<usize> = match start {
        Side::Inner => (0..m).collect(),
        Side::Outer => (0..m).rev().collect(),
    };
    for (step, &j) in order.iter().enumerate() {
        let (lo, hi) = (breakpoints[j], breakpoints[j + 1]);
        let at = if start == Side::Inner { lo } else { hi };
        if step > 0 {
            let jump = match start {
                Side::Inner => deriv_jump[j - 1],
                Side::Outer => -deriv_jump[j],
            };
            du += jump;
        }
        coeffs[j] = coeffs_from_cauchy(n, lo, hi, at, u, du)?;
        let sol = ModeSolution::new(n, vec![lo, hi], vec![coeffs[j]])?;
        let end = if start == Side::Inner { hi } else { lo };
        let (v, d) = sol.eval_side(end, Side::Inner);
        u = v;
        du = d;
    }
    ModeSolution::new(n, breakpoints.to_vec(), coeffs)
}

/// Merges ring sources of one mode by radius and drops zero amplitudes.
pub fn merge_rings(rings: &[(f64, C64)]) -> Vec<(f64, C64)> {
    let mut sorted: Vec<(f64, C64)> = rings.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, C64)> = Vec::new();
    for (r, c) in sorted {
        match out.last_mut() {
            Some(last) if last.0 == r => last.1 += c,
            _ => out.push((r, c)),
        }
    }
    out.retain(|(_, c)| *c != ZERO);
    out
}

fn sorted_breakpoints(base: &[f64], rings: &[(f64, C64)]) -> Vec<f64> {
    let mut bps: Vec<f64> = base.to_vec();
    bps.extend(rings.iter().map(|r| r.0));
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    bps
}

fn check_rings(rings: &[(f64, C64)], outer: f64, forbidden: &[f64]) -> Result<()> {
    for &(r0, _) in rings {
        if !(r0 > 0.0 && r0 < outer) {
            return Err(Error::InvalidSource(format!("ring radius {r0} must lie in (0, {outer})")));
        }
        if forbidden.iter().any(|&ri| (r0 - ri).abs() <= 1e-12 * outer) {
            return Err(Error::InvalidSource(format!("ring radius {r0} lies on a coefficient interface")));
        }
    }
    Ok(())
}

/// Mode `n` of the lossy problem, with ring sources `(r0, c)` meaning `c δ(r − r0)/r · e^{inθ}`;
/// each gives the jump `[s_δ u'] = s₀ c / r0`.
pub fn solve_mode(layout: &RadialLayout, n: u32, rings: &[(f64, C64)], loss: &LossCoefficient) -> Result<ModeSolution> {
    check_rings(rings, layout.outer_radius(), &[layout.r1(), layout.r2()])?;
    let rings = merge_rings(rings);
    let bps = sorted_breakpoints(&[0.0, layout.r1(), layout.r2(), layout.r3(), layout.outer_radius()], &rings);
    let m = bps.len() - 1;
    let coefficient = (0..m)
        .map(|j| loss.s_delta(layout.region_of_radius_lenient(0.5 * (bps[j] + bps[j + 1]))))
        .collect();
    let flux_jump = bps[1..m]
        .iter()
        .map(|&t| match rings.iter().find(|r| r.0 == t) {
            Some(&(r0, c)) => c * (loss.s0(layout.region_of_radius_lenient(r0)) / r0),
            None => ZERO,
        })
        .collect();
    solve_radial(&RadialProblem {
        n,
        breakpoints: bps,
        coefficient,
        value_jump: vec![ZERO; m - 1],
        flux_jump,
        boundary_value: ZERO,
    })
}

/// Mode `n` of the lossy problem at loss `δ > 0`.
pub fn solve_mode_delta(layout: &RadialLayout, n: u32, rings: &[(f64, C64)], delta: f64) -> Result<ModeSolution> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidMedia(format!("loss δ = {delta} must be positive")));
    }
    solve_mode(layout, n, rings, &LossCoefficient::new(delta))
}

/// Mode `n` of `Δ𝒰 = f` in the disk of radius `outer` with `𝒰 = 0` on its boundary.
pub fn free_space_mode(outer: f64, n: u32, rings: &[(f64, C64)]) -> Result<ModeSolution> {
    check_rings(rings, outer, &[])?;
    let rings = merge_rings(rings);
    let bps = sorted_breakpoints(&[0.0, outer], &rings);
    let m = bps.len() - 1;
    let flux_jump = bps[1..m]
        .iter()
        .map(|&t| rings.iter().find(|r| r.0 == t).map(|&(r0, c)| c / r0).unwrap_or(ZERO))
        .collect();
    solve_radial(&RadialProblem {
        n,
        breakpoints: bps,
        coefficient: vec![C64::new(1.0, 0.0); m],
        value_jump: vec![ZERO; m - 1],
        flux_jump,
        boundary_value: ZERO,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one() -> C64 {
        C64::new(1.0, 0.0)
    }

    fn layout() -> RadialLayout {
        RadialLayout::new(1.0, 2.0, 8.0).unwrap()
    }

    #[test]
    fn free_space_log_mode_against_textbook_solution() {
        // Δu = δ(r−5)/r on (0,8), u(8) = 0: u = ln(5/8) inside, ln(r/8) outside.
        let u = free_space_mode(8.0, 0, &[(5.0, one())]).unwrap();
        for r in [0.5, 2.0, 4.9] {
            assert!((u.value(r) - C64::from((5.0f64 / 8.0).ln())).norm() < 1e-14);
        }
        for r in [5.1, 6.0, 7.9] {
            assert!((u.value(r) - C64::from((r / 8.0).ln())).norm() < 1e-14);
        }
        let jump = u.eval_side(5.0, Side::Outer).1 - u.eval_side(5.0, Side::Inner).1;
        assert!((jump - C64::from(0.2)).norm() < 1e-14);
    }

    #[test]
    fn free_space_contract() {
        let u = free_space_mode(8.0, 1, &[(5.0, one())]).unwrap();
        assert!(u.value(8.0).norm() < 1e-15);
        assert_eq!(u.coeffs()[0].1, ZERO);
        let z = free_space_mode(8.0, 3, &[(5.0, ZERO)]).unwrap();
        assert!(z.is_zero());
    }

    #[test]
    fn zero_amplitude_gives_zero() {
        let u = solve_mode_delta(&layout(), 4, &[(3.0, ZERO)], 1e-3).unwrap();
        assert!(u.is_zero());
    }

    #[test]
    fn unit_shell_reproduces_free_space() {
        let l = layout();
        for n in [0, 1, 5, 17] {
            let rings = [(5.0, C64::new(0.7, -0.2)), (1.5, C64::new(0.1, 0.3))];
            let u = solve_mode(&l, n, &rings, &LossCoefficient::unit()).unwrap();
            let f = free_space_mode(8.0, n, &rings).unwrap();
            assert!(u.max_scaled_diff(&f).unwrap() < 1e-12, "mode {n}");
        }
    }

    #[test]
    fn matching_conditions_hold() {
        let l = layout();
        let delta = 1e-3;
        let u = solve_mode_delta(&l, 2, &[(3.0, one())], delta).unwrap();
        let s = C64::new(-1.0, delta);
        for (r, si, so) in [(1.0, one(), s), (2.0, s, one())] {
            let (vi, di) = u.eval_side(r, Side::Inner);
            let (vo, d_o) = u.eval_side(r, Side::Outer);
            assert!((vi - vo).norm() < 1e-12 * vi.norm().max(1.0));
            assert!((si * di - so * d_o).norm() < 1e-11 * di.norm().max(1.0));
        }
        let (_, di) = u.eval_side(3.0, Side::Inner);
        let (_, d_o) = u.eval_side(3.0, Side::Outer);
        assert!((d_o - di - C64::from(1.0 / 3.0)).norm() < 1e-11);
        assert!(u.value(8.0).norm() < 1e-14);
    }

    #[test]
    fn rings_on_interfaces_rejected() {
        assert!(matches!(solve_mode_delta(&layout(), 1, &[(2.0, one())], 1e-2), Err(Error::InvalidSource(_))));
        assert!(solve_mode_delta(&layout(), 1, &[(3.0, one())], 0.0).is_err());
    }

    #[test]
    fn cauchy_march_both_directions() {
        let bps = [2.0, 2.5, 4.0];
        let out = cauchy_march(3, &bps, Side::Inner, (ZERO, ZERO), &[C64::new(0.4, 0.0)]).unwrap();
        assert!(out.value(2.0).norm() < 1e-15 && out.value(2.4).norm() < 1e-14);
        let (v, d) = out.eval_side(4.0, Side::Inner);
        let back = cauchy_march(3, &bps, Side::Outer, (v, d), &[C64::new(0.4, 0.0)]).unwrap();
        assert!(back.max_scaled_diff(&out).unwrap() < 1e-12);
    }

    #[test]
    fn singular_system_reported_as_resonance() {
        // A disk with ε = −(1 + R⁻²)/(1 − R⁻²) in a unit-coefficient annulus supports a
        // source-free dipole mode.
        let eps = -(1.0 + 0.25) / (1.0 - 0.25);
        let p = RadialProblem {
            n: 1,
            breakpoints: vec![0.0, 1.0, 2.0],
            coefficient: vec![C64::from(eps), one()],
            value_jump: vec![ZERO],
            flux_jump: vec![one()],
            boundary_value: ZERO,
        };
        assert!(matches!(solve_radial(&p), Err(Error::ResonantMode { n: 1, .. })));
        let q = RadialProblem { coefficient: vec![C64::from(eps * 1.01), one()], ..p };
        assert!(solve_radial(&q).is_ok());
    }
}
