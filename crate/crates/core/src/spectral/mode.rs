//! Piecewise mode profiles `u(r) = a rⁿ + b r⁻ⁿ` (or `a + b ln r` for `n = 0`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::C64;

/// Which side of a breakpoint an evaluation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Inner,
    Outer,
}

/// Radial profile of angular mode `n` on `[breakpoints[0], breakpoints[last]]`, with one
/// coefficient pair per interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSolution {
    n: u32,
    breakpoints: Vec<f64>,
    coeffs: Vec<(C64, C64)>,
}

#[derive(Serialize, Deserialize)]
struct CoeffJson {
    re_a: f64,
    im_a: f64,
    re_b: f64,
    im_b: f64,
}

#[derive(Serialize, Deserialize)]
struct ModeJson {
    n: u32,
    breakpoints: Vec<f64>,
    coeffs: Vec<CoeffJson>,
}

const ZERO: C64 = C64::new(0.0, 0.0);

/// Basis values and radial derivatives `(φa, φb, φa', φb')` at `r`.
pub fn basis(n: u32, r: f64) -> (f64, f64, f64, f64) {
    if n == 0 {
        (1.0, r.ln(), 0.0, 1.0 / r)
    } else {
        let rp = r.powi(n as i32);
        let nf = n as f64;
        (rp, 1.0 / rp, nf * rp / r, -nf / (rp * r))
    }
}

impl ModeSolution {
    pub fn new(n: u32, breakpoints: Vec<f64>, coeffs: Vec<(C64, C64)>) -> Result<Self> {
        if breakpoints.len() < 2 || coeffs.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidSource(format!(
                "{} breakpoints cannot carry {} intervals",
                breakpoints.len(),
                coeffs.len()
            )));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) || breakpoints[0] < 0.0 {
            return Err(Error::InvalidSource("breakpoints must be nonnegative and strictly increasing".into()));
        }
        Ok(Self { n, breakpoints, coeffs })
    }

    pub fn zero(n: u32, breakpoints: Vec<f64>) -> Result<Self> {
        let m = breakpoints.len().saturating_sub(1);
        Self::new(n, breakpoints, vec![(ZERO, ZERO); m])
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn coeffs(&self) -> &[(C64, C64)] {
        &self.coeffs
    }

    pub fn lo(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn hi(&self) -> f64 {
        *self.breakpoints.last().expect("nonempty")
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|(a, b)| *a == ZERO && *b == ZERO)
    }

    /// Interval holding `r`; breakpoints belong to the interval on the requested side.
    pub fn interval_of(&self, r: f64, side: Side) -> Option<usize> {
        if r < self.lo() || r > self.hi() {
            return None;
        }
        let m = self.coeffs.len();
        let idx = match side {
            Side::Inner => self.breakpoints[1..].partition_point(|&b| b < r),
            Side::Outer => self.breakpoints[1..].partition_point(|&b| b <= r),
        };
        Some(idx.min(m - 1))
    }

    fn eval_in(&self, j: usize, r: f64) -> (C64, C64) {
        let (a, b) = self.coeffs[j];
        if b == ZERO {
            let (pa, _, da, _) = basis(self.n, r);
            return (a * pa, a * da);
        }
        let (pa, pb, da, db) = basis(self.n, r);
        (a * pa + b * pb, a * da + b * db)
    }

    /// Value and radial derivative at `r`, taken from the given side at breakpoints.
    pub fn eval_side(&self, r: f64, side: Side) -> (C64, C64) {
        match self.interval_of(r, side) {
            Some(j) => self.eval_in(j, r),
            None => (ZERO, ZERO),
        }
    }

    /// Value and derivative at `r` using the coefficients of the interval holding `hint`;
    /// lets polygonal approximations of the interfaces evaluate the intended branch.
    pub fn eval_hint(&self, r: f64, hint: f64) -> (C64, C64) {
        let hint = hint.clamp(self.lo(), self.hi());
        match self.interval_of(hint, Side::Inner) {
            Some(j) => self.eval_in(j, r),
            None => (ZERO, ZERO),
        }
    }

    /// Value at `r`; zero outside the span.
    pub fn value(&self, r: f64) -> C64 {
        self.eval_side(r, Side::Inner).0
    }

    pub fn derivative(&self, r: f64) -> C64 {
        self.eval_side(r, Side::Inner).1
    }

    pub fn scaled(&self, c: C64) -> Self {
        let coeffs = self.coeffs.iter().map(|(a, b)| (a * c, b * c)).collect();
        Self { n: self.n, breakpoints: self.breakpoints.clone(), coeffs }
    }

    /// Same function on a finer partition; `extra` radii outside the span are ignored.
    pub fn refine(&self, extra: &[f64]) -> Self {
        let mut bps = self.breakpoints.clone();
        bps.extend(extra.iter().copied().filter(|&r| r > self.lo() && r < self.hi()));
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        let coeffs = bps
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                self.coeffs[self.interval_of(mid, Side::Inner).expect("inside span")]
            })
            .collect();
        Self { n: self.n, breakpoints: bps, coeffs }
    }

    /// Restriction to `[lo, hi]`, which must lie within the span.
    pub fn restrict(&self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= self.lo() && hi <= self.hi() && lo < hi) {
            return Err(Error::DomainMismatch(format!(
                "[{lo}, {hi}] is not inside [{}, {}]",
                self.lo(),
                self.hi()
            )));
        }
        let fine = self.refine(&[lo, hi]);
        let i0 = fine.breakpoints.iter().position(|&b| b == lo).expect("inserted");
        let i1 = fine.breakpoints.iter().position(|&b| b == hi).expect("inserted");
        Ok(Self {
            n: self.n,
            breakpoints: fine.breakpoints[i0..=i1].to_vec(),
            coeffs: fine.coeffs[i0..i1].to_vec(),
        })
    }

    /// Sum of two profiles of the same mode on the same span.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n != other.n || self.lo() != other.lo() || self.hi() != other.hi() {
            return Err(Error::DomainMismatch("profiles differ in mode or span".into()));
        }
        let a = self.refine(&other.breakpoints);
        let b = other.refine(&self.breakpoints);
        let coeffs = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| (x.0 + y.0, x.1 + y.1)).collect();
        Ok(Self { n: self.n, breakpoints: a.breakpoints, coeffs })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scaled(C64::new(-1.0, 0.0)))
    }

    /// `r ↦ u(ρ²/r)`, the composition with the Kelvin transform in the circle of radius `ρ`.
    pub fn pullback_kelvin(&self, rho: f64) -> Result<Self> {
        if self.lo() <= 0.0 {
            return Err(Error::DomainMismatch("Kelvin image of a span touching 0 is unbounded".into()));
        }
        let n = self.n as i32;
        let bps: Vec<f64> = self.breakpoints.iter().rev().map(|&b| rho * rho / b).collect();
        let coeffs = self
            .coeffs
            .iter()
            .rev()
            .map(|&(a, b)| {
                if n == 0 {
                    (a + b * (2.0 * rho.ln()), -b)
                } else {
                    let s = rho.powi(2 * n);
                    (b / s, a * s)
                }
            })
            .collect();
        Self::new(self.n, bps, coeffs)
    }

    /// `r ↦ u(λr)`.
    pub fn pullback_dilation(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::DomainMismatch(format!("dilation factor {lambda} must be positive")));
        }
        let n = self.n as i32;
        let bps = self.breakpoints.iter().map(|&b| b / lambda).collect();
        let coeffs = self
            .coeffs
            .iter()
            .map(|&(a, b)| {
                if n == 0 {
                    (a + b * lambda.ln(), b)
                } else {
                    let s = lambda.powi(n);
                    (a * s, b / s)
                }
            })
            .collect();
        Self::new(self.n, bps, coeffs)
    }

    /// Joins abutting pieces of one mode, innermost first.
    pub fn concat(pieces: &[Self]) -> Result<Self> {
        let first = pieces.first().ok_or_else(|| Error::DomainMismatch("nothing to join".into()))?;
        let mut bps = first.breakpoints.clone();
        let mut coeffs = first.coeffs.clone();
        for p in &pieces[1..] {
            let last = *bps.last().expect("nonempty");
            if p.n != first.n || (p.lo() - last).abs() > 1e-12 * last.max(1.0) {
                return Err(Error::DomainMismatch(format!(
                    "piece starting at {} does not abut {last}",
                    p.lo()
                )));
            }
            bps.extend_from_slice(&p.breakpoints[1..]);
            coeffs.extend_from_slice(&p.coeffs);
        }
        Self::new(first.n, bps, coeffs)
    }

    /// Largest coefficient distance to `other` after refining both onto a common partition,
    /// each pair weighted by the basis size at the interval ends.
    pub fn max_scaled_diff(&self, other: &Self) -> Result<f64> {
        let d = self.sub(other)?;
        let mut worst = 0.0f64;
        for (j, &(a, b)) in d.coeffs.iter().enumerate() {
            let (lo, hi) = (d.breakpoints[j], d.breakpoints[j + 1]);
            let (pa, _, _, _) = basis(d.n, hi);
            let pb = if b == ZERO { 0.0 } else { basis(d.n, lo).1.abs() };
            worst = worst.max(a.norm() * pa.abs() + b.norm() * pb);
        }
        Ok(worst)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let m = ModeJson {
            n: self.n,
            breakpoints: self.breakpoints.clone(),
            coeffs: self
                .coeffs
                .iter()
                .map(|(a, b)| CoeffJson { re_a: a.re, im_a: a.im, re_b: b.re, im_b: b.im })
                .collect(),
        };
        serde_json::to_value(m).expect("plain data serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let m: ModeJson = serde_json::from_value(v.clone()).map_err(|e| Error::Parse(e.to_string()))?;
        let coeffs = m
            .coeffs
            .into_iter()
            .map(|c| (C64::new(c.re_a, c.im_a), C64::new(c.re_b, c.im_b)))
            .collect();
        Self::new(m.n, m.breakpoints, coeffs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sample() -> ModeSolution {
        ModeSolution::new(3, vec![0.0, 1.0, 2.5, 4.0], vec![(c(1.0, 0.5), ZERO), (c(0.2, -1.0), c(0.3, 0.1)), (c(-0.1, 0.0), c(2.0, 1.0))])
            .unwrap()
    }

    #[test]
    fn sides_at_breakpoints() {
        let m = sample();
        assert_eq!(m.interval_of(1.0, Side::Inner), Some(0));
        assert_eq!(m.interval_of(1.0, Side::Outer), Some(1));
        assert_eq!(m.interval_of(4.0, Side::Outer), Some(2));
        assert_eq!(m.interval_of(0.0, Side::Inner), Some(0));
        assert_eq!(m.interval_of(4.1, Side::Inner), None);
    }

    #[test]
    fn kelvin_pullback_is_composition() {
        let m = sample().restrict(1.0, 4.0).unwrap();
        let rho = 2.0;
        let k = m.pullback_kelvin(rho).unwrap();
        for r in [1.1, 1.7, 2.9, 3.6] {
            let direct = m.value(rho * rho / r);
            assert!((k.value(r) - direct).norm() < 1e-12 * direct.norm().max(1.0));
        }
        let back = k.pullback_kelvin(rho).unwrap();
        assert!(back.max_scaled_diff(&m).unwrap() < 1e-12);
    }

    #[test]
    fn log_mode_pullbacks() {
        let m = ModeSolution::new(0, vec![1.0, 3.0], vec![(c(0.5, 0.0), c(1.0, -2.0))]).unwrap();
        let k = m.pullback_kelvin(1.5).unwrap();
        let d = m.pullback_dilation(2.0).unwrap();
        for r in [1.0, 1.3, 2.0] {
            assert!((k.value(2.25 / r) - m.value(r)).norm() < 1e-13);
        }
        for r in [0.6, 1.0, 1.4] {
            assert!((d.value(r) - m.value(2.0 * r)).norm() < 1e-13);
        }
    }

    #[test]
    fn restrict_concat_round_trip() {
        let m = sample();
        let parts = [m.restrict(0.0, 1.7).unwrap(), m.restrict(1.7, 4.0).unwrap()];
        let joined = ModeSolution::concat(&parts).unwrap();
        assert!(joined.max_scaled_diff(&m).unwrap() == 0.0);
        assert!(ModeSolution::concat(&[parts[1].clone(), parts[0].clone()]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = sample();
        let v = m.to_json();
        assert_eq!(v["n"], 3);
        assert_eq!(v["coeffs"][1]["im_a"], -1.0);
        assert_eq!(ModeSolution::from_json(&v).unwrap(), m);
    }
}
