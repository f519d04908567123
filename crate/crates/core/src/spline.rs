//! Periodic cubic B-spline interpolation on uniform grids.
//!
//! Line shifts use the Fourier symbol of the spline: the interpolant of `g` evaluated at
//! `x_i - s` has modes `g_k B_s(k) / B_0(k)` with `B_s(k) = sum_m beta(m - s) e^{-i theta m}`.
//! Integer shifts are exact and the zero mode (mass) is preserved.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{ensure, Result};
use crate::spectral::{signed_index, FftPlan, SpatialGrid};

/// Cubic B-spline `beta_3(t)`, supported on `(-2, 2)`.
pub fn cubic_bspline(t: f64) -> f64 {
    let a = t.abs();
    if a < 1.0 {
        (4.0 - 6.0 * a * a + 3.0 * a * a * a) / 6.0
    } else if a < 2.0 {
        let b = 2.0 - a;
        b * b * b / 6.0
    } else {
        0.0
    }
}

pub(crate) fn cubic_bspline_derivative(t: f64) -> f64 {
    let a = t.abs();
    let s = t.signum();
    if a < 1.0 {
        s * (-12.0 * a + 9.0 * a * a) / 6.0
    } else if a < 2.0 {
        let b = 2.0 - a;
        -s * b * b / 2.0
    } else {
        0.0
    }
}

/// `sum_m beta(m) e^{-i theta m}`, the prefilter symbol.
fn interpolation_symbol(theta: f64) -> f64 {
    (4.0 + 2.0 * theta.cos()) / 6.0
}

/// Per-mode multipliers that shift a periodic line by `shift` cells (`g_i <- g(i - shift)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftKind {
    CubicSpline,
    /// Trigonometric interpolation: exact for band-limited lines, Nyquist mode dropped.
    Spectral,
}

pub fn shift_multipliers(n: usize, shift: f64, kind: ShiftKind, out: &mut Vec<C64>) {
    out.clear();
    let whole = shift.floor();
    let frac = shift - whole;
    for k in 0..n {
        let m = signed_index(k, n) as f64;
        let theta = 2.0 * PI * m / n as f64;
        let z = match kind {
            ShiftKind::Spectral => {
                if 2 * k == n {
                    C64::new(0.0, 0.0)
                } else {
                    C64::from_polar(1.0, -theta * shift)
                }
            }
            ShiftKind::CubicSpline => {
                let mut acc = C64::new(0.0, 0.0);
                for j in -1..=2 {
                    acc += C64::from_polar(cubic_bspline(j as f64 - frac), -theta * j as f64);
                }
                acc * C64::from_polar(1.0 / interpolation_symbol(theta), -theta * whole)
            }
        };
        out.push(z);
    }
}

/// Reusable buffers for shifting many lines of one length.
#[derive(Debug, Clone)]
pub struct LineShifter {
    plan: FftPlan,
    kind: ShiftKind,
    buf: Vec<C64>,
    mult: Vec<C64>,
}

impl LineShifter {
    pub fn new(n: usize, kind: ShiftKind) -> Self {
        Self { plan: FftPlan::new(n), kind, buf: vec![C64::new(0.0, 0.0); n], mult: Vec::with_capacity(n) }
    }

    /// `line[i] <- interpolant(i - shift)` in cell units.
    pub fn shift(&mut self, line: &mut [f64], shift: f64) {
        let n = self.plan.len();
        debug_assert_eq!(line.len(), n);
        if shift == 0.0 {
            return;
        }
        self.buf.iter_mut().zip(line.iter()).for_each(|(b, v)| *b = C64::new(*v, 0.0));
        self.plan.apply(&mut self.buf, false);
        shift_multipliers(n, shift, self.kind, &mut self.mult);
        let scale = 1.0 / n as f64;
        self.buf.iter_mut().zip(&self.mult).for_each(|(b, m)| *b *= m * scale);
        // keep the result real for even n: the Nyquist multiplier of a real shift is complex
        if n % 2 == 0 {
            let z = self.buf[n / 2];
            self.buf[n / 2] = C64::new(z.re, 0.0);
        }
        self.plan.apply(&mut self.buf, true);
        line.iter_mut().zip(&self.buf).for_each(|(v, b)| *v = b.re);
    }
}

/// Interpolating periodic cubic spline of grid data in 1 or 2 dimensions.
#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    grid: SpatialGrid,
    coeffs: Vec<f64>,
}

impl PeriodicSpline {
    pub fn new(grid: &SpatialGrid, values: &[f64]) -> Result<Self> {
        ensure!(values.len() == grid.size(), Contract, "spline data has {} values, grid has {}", values.len(), grid.size());
        let n = grid.n();
        let plan = FftPlan::new(n);
        let mut buf: Vec<C64> = values.iter().map(|v| C64::new(*v, 0.0)).collect();
        plan.apply_nd(&mut buf, grid.dim(), false);
        let scale = 1.0 / grid.size() as f64;
        for (i, z) in buf.iter_mut().enumerate() {
            let idx = grid.unflatten(i);
            let mut sym = 1.0;
            for axis in 0..grid.dim() {
                sym *= interpolation_symbol(2.0 * PI * signed_index(idx[axis], n) as f64 / n as f64);
            }
            *z *= scale / sym;
        }
        plan.apply_nd(&mut buf, grid.dim(), true);
        Ok(Self { grid: grid.clone(), coeffs: buf.iter().map(|z| z.re).collect() })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    fn taps(&self, x: f64) -> (i64, f64) {
        let h = self.grid.spacing();
        let t = x / h;
        let base = t.floor();
        (base as i64, t - base)
    }

    /// Value at a point (any real coordinates; periodic).
    pub fn value(&self, p: [f64; 2]) -> f64 {
        self.evaluate(p, [false, false])
    }

    /// Gradient at a point.
    pub fn gradient(&self, p: [f64; 2]) -> [f64; 2] {
        let h = self.grid.spacing();
        match self.grid.dim() {
            1 => [self.evaluate(p, [true, false]) / h, 0.0],
            _ => [self.evaluate(p, [true, false]) / h, self.evaluate(p, [false, true]) / h],
        }
    }

    fn evaluate(&self, p: [f64; 2], derivative: [bool; 2]) -> f64 {
        let n = self.grid.n() as i64;
        let (b0, f0) = self.taps(p[0]);
        let w = |d: bool, t: f64| if d { cubic_bspline_derivative(t) } else { cubic_bspline(t) };
        if self.grid.dim() == 1 {
            (-1..=2)
                .map(|j| w(derivative[0], f0 - j as f64) * self.coeffs[(b0 + j).rem_euclid(n) as usize])
                .sum()
        } else {
            let (b1, f1) = self.taps(p[1]);
            let mut acc = 0.0;
            for i in -1..=2 {
                let wi = w(derivative[0], f0 - i as f64);
                let row = (b0 + i).rem_euclid(n) as usize * n as usize;
                for j in -1..=2 {
                    acc += wi * w(derivative[1], f1 - j as f64) * self.coeffs[row + (b1 + j).rem_euclid(n) as usize];
                }
            }
            acc
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bspline_partition_of_unity() {
        for t in [0.0, 0.1, 0.5, 0.93] {
            let s: f64 = (-2..=2).map(|m| cubic_bspline(m as f64 - t)).sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn integer_shift_is_exact() {
        let mut line: Vec<f64> = (0..16).map(|i| ((i * 7) % 5) as f64 - 1.3).collect();
        let orig = line.clone();
        let mut s = LineShifter::new(16, ShiftKind::CubicSpline);
        s.shift(&mut line, 3.0);
        for i in 0..16 {
            assert!((line[i] - orig[(i + 13) % 16]).abs() < 1e-13);
        }
    }
}
