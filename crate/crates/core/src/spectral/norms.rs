//! Closed-form H¹ quantities of mode profiles and the mode-wise energy identity.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::geometry::{LossCoefficient, RadialLayout, RegionTag, C64};
use crate::spectral::mode::{basis, ModeSolution};

const ZERO: C64 = C64::new(0.0, 0.0);

/// `∫ |u|² r dr` on `[l, h]` for `u = a + b ln r`, via antiderivatives.
fn log_mode_l2(a: C64, b: C64, l: f64, h: f64) -> f64 {
    let cross = (a * b.conj()).re;
    let prim = |r: f64| {
        if r == 0.0 {
            return 0.0;
        }
        let lr = r.ln();
        let r2 = r * r;
        a.norm_sqr() * r2 / 2.0 + 2.0 * cross * (r2 / 2.0 * lr - r2 / 4.0) + b.norm_sqr() * (r2 / 2.0 * lr * lr - r2 / 2.0 * lr + r2 / 4.0)
    };
    prim(h) - prim(l)
}

/// `(∫ (|u'|² + n²|u|²/r²) r dr, ∫ |u|² r dr)` of one interval, without the angular `2π`.
pub fn interval_integrals(n: u32, a: C64, b: C64, l: f64, h: f64) -> (f64, f64) {
    if n == 0 {
        let semi = if b == ZERO { 0.0 } else { b.norm_sqr() * (h / l).ln() };
        return (semi, log_mode_l2(a, b, l, h));
    }
    let nf = n as f64;
    let k = n as i32;
    let mut semi = nf * a.norm_sqr() * (h.powi(2 * k) - l.powi(2 * k));
    let mut l2 = a.norm_sqr() * (h.powi(2 * k + 2) - l.powi(2 * k + 2)) / (2.0 * nf + 2.0);
    if b != ZERO {
        semi += nf * b.norm_sqr() * (l.powi(-2 * k) - h.powi(-2 * k));
        l2 += (a * b.conj()).re * (h * h - l * l);
        l2 += b.norm_sqr()
            * if n == 1 {
                (h / l).ln()
            } else {
                (l.powi(2 - 2 * k) - h.powi(2 - 2 * k)) / (2.0 * nf - 2.0)
            };
    }
    (semi, l2)
}

/// `(seminorm², L²-norm²)` over the annulus `lo < r < hi`, including the angular `2π`.
pub fn mode_norm_parts(m: &ModeSolution, lo: f64, hi: f64) -> Result<(f64, f64)> {
    if !(lo >= m.lo() - 1e-14 * m.hi() && hi <= m.hi() * (1.0 + 1e-14) && lo < hi) {
        return Err(Error::DomainMismatch(format!(
            "region ({lo}, {hi}) is not inside the span ({}, {})",
            m.lo(),
            m.hi()
        )));
    }
    let r = m.restrict(lo.max(m.lo()), hi.min(m.hi()))?;
    let bps = r.breakpoints();
    let (mut semi, mut l2) = (0.0, 0.0);
    for (j, &(a, b)) in r.coeffs().iter().enumerate() {
        let (s, q) = interval_integrals(r.n(), a, b, bps[j], bps[j + 1]);
        semi += s;
        l2 += q;
    }
    Ok((TAU * semi, TAU * l2))
}

/// `‖u e^{inθ}‖²_{H¹}` over the annulus `lo < r < hi`; homogeneous of degree 2 in `u`.
pub fn mode_h1_norm_sq(m: &ModeSolution, lo: f64, hi: f64) -> Result<f64> {
    let (s, q) = mode_norm_parts(m, lo, hi)?;
    Ok(s + q)
}

pub fn mode_h1_norm(m: &ModeSolution, lo: f64, hi: f64) -> Result<f64> {
    mode_h1_norm_sq(m, lo, hi).map(f64::sqrt)
}

pub fn mode_l2_norm_sq(m: &ModeSolution, lo: f64, hi: f64) -> Result<f64> {
    mode_norm_parts(m, lo, hi).map(|p| p.1)
}

pub fn mode_seminorm_sq(m: &ModeSolution, lo: f64, hi: f64) -> Result<f64> {
    mode_norm_parts(m, lo, hi).map(|p| p.0)
}

/// Both sides of `δ ∫_shell |∇u|² = Im(−∫ s₀ f ū)` for one mode: `(lhs, rhs)`.
pub fn energy_identity(layout: &RadialLayout, u: &ModeSolution, rings: &[(f64, C64)], delta: f64) -> Result<(f64, f64)> {
    let lhs = delta * mode_seminorm_sq(u, layout.r1(), layout.r2())?;
    let loss = LossCoefficient::new(delta);
    let pairing: C64 = rings
        .iter()
        .map(|&(r0, c)| {
            let s0 = loss.s0(layout.region_of_radius_lenient(r0));
            -c * u.value(r0).conj() * (TAU * s0)
        })
        .sum();
    Ok((lhs, pairing.im))
}

/// Residual of the energy identity relative to its larger side.
pub fn energy_identity_residual(layout: &RadialLayout, u: &ModeSolution, rings: &[(f64, C64)], delta: f64) -> Result<f64> {
    let (lhs, rhs) = energy_identity(layout, u, rings, delta)?;
    let scale = lhs.abs().max(rhs.abs());
    Ok(if scale > 0.0 { (lhs - rhs).abs() / scale } else { 0.0 })
}

/// Jumps `(u⁺ − u⁻, s⁺u'⁺ − s⁻u'⁻)` at `r` for a piecewise coefficient.
pub fn interface_jumps(m: &ModeSolution, r: f64, s_inner: C64, s_outer: C64) -> (C64, C64) {
    use crate::spectral::mode::Side;
    let (vi, di) = m.eval_side(r, Side::Inner);
    let (vo, d_o) = m.eval_side(r, Side::Outer);
    (vo - vi, s_outer * d_o - s_inner * di)
}

/// `s₀` on each side of the interfaces `r1`, `r2`, `r3`.
pub fn sign_pattern(tag: RegionTag) -> f64 {
    LossCoefficient::new(0.0).s0(tag)
}

/// Scale of a profile at `r`, used to normalise pointwise checks.
pub fn local_scale(m: &ModeSolution, r: f64) -> f64 {
    let nb = basis(m.n(), r);
    m.coeffs().iter().fold(0.0f64, |acc, (a, b)| acc.max(a.norm() * nb.0.abs() + b.norm() * nb.1.abs()))
}
