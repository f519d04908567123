//! Inverse-power-law interactions `K(x) = ±|x|^{-a}` with the Gaussian-integral cutoff
//!
//! `K_R(x) = c_a int_0^{R^{-2}} e^{-pi |x|^2 s} s^{a/2 - 1} ds`, `c_a = pi^{a/2} / Gamma(a/2)`,
//!
//! periodized on the torus with the zero mode removed (neutralizing background).
//!
//! Both the Fourier multipliers and the pointwise real-space values reduce to
//! incomplete gamma functions. Real-space values use a split of the `s`-integral at
//! `s0`: the short-range part decays like `e^{-pi |x|^2 s0}` and is summed over nearest
//! images, the long-range part is smooth and summed in Fourier space.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use statrs::function::gamma::{checked_gamma_ui, gamma};

use crate::error::{ensure, Error, Result};
use crate::spectral::{apply_multiplier, gradient_with, FftPlan, SpatialGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelSign {
    Attractive,
    Repulsive,
}

impl KernelSign {
    pub fn factor(self) -> f64 {
        match self {
            KernelSign::Attractive => -1.0,
            KernelSign::Repulsive => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub sign: KernelSign,
    pub a: f64,
    pub cutoff: f64,
}

#[derive(Debug, Clone)]
pub struct InteractionKernel {
    grid: SpatialGrid,
    law: Option<PowerLaw>,
    multiplier: Vec<C64>,
    /// Zero-mean periodized kernel at each minimal-image displacement, indexed like grid points.
    values: Vec<f64>,
    plan: FftPlan,
}

/// `c_a` such that `|x|^{-a} = c_a int_0^inf e^{-pi |x|^2 s} s^{a/2-1} ds`.
pub fn normalization_constant(a: f64) -> f64 {
    PI.powf(a / 2.0) / gamma(a / 2.0)
}

fn upper_gamma(s: f64, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(gamma(s));
    }
    checked_gamma_ui(s, x).map_err(|e| Error::Numerical(format!("incomplete gamma({s}, {x}) failed: {e}")))
}

impl InteractionKernel {
    /// Builds the periodized kernel `sign * K_R` on `grid`; `cutoff = 0` means no regularization.
    pub fn power_law(grid: &SpatialGrid, sign: KernelSign, a: f64, cutoff: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::Domain(format!("exponent a must lie in (0, 1), got {a}")));
        }
        ensure!(cutoff.is_finite() && cutoff >= 0.0, Domain, "cutoff must be finite and >= 0, got {cutoff}");
        let law = PowerLaw { sign, a, cutoff };
        let multiplier = power_law_multiplier(grid, &law)?;
        let values = power_law_values(grid, &law)?;
        Ok(Self { grid: grid.clone(), law: Some(law), multiplier, values, plan: FftPlan::new(grid.n()) })
    }

    /// The zero interaction.
    pub fn zero(grid: &SpatialGrid) -> Self {
        let size = grid.size();
        Self {
            grid: grid.clone(),
            law: None,
            multiplier: vec![C64::new(0.0, 0.0); size],
            values: vec![0.0; size],
            plan: FftPlan::new(grid.n()),
        }
    }

    /// A kernel from explicit tables: torus Fourier coefficients and real-space values at
    /// displacement index `i`. No zero-mode or sign invariants are imposed.
    pub fn from_tables(grid: &SpatialGrid, multiplier: Vec<C64>, values: Vec<f64>) -> Result<Self> {
        ensure!(
            multiplier.len() == grid.size() && values.len() == grid.size(),
            Contract,
            "kernel tables must have {} entries",
            grid.size()
        );
        Ok(Self { grid: grid.clone(), law: None, multiplier, values, plan: FftPlan::new(grid.n()) })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn law(&self) -> Option<&PowerLaw> {
        self.law.as_ref()
    }

    pub fn is_zero(&self) -> bool {
        self.multiplier.iter().all(|m| m.norm() == 0.0) && self.values.iter().all(|v| *v == 0.0)
    }

    /// Modal coefficients `int_torus K(x) e^{-i k.x} dx` in FFT order; entry 0 is zero.
    pub fn multiplier(&self) -> &[C64] {
        &self.multiplier
    }

    /// Real-space values at displacement grid index `i` (minimal image).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `K(x_i - x_j)` with minimal-image displacement.
    pub fn between(&self, i: usize, j: usize) -> f64 {
        let d = self.grid.min_image(i, j);
        let n = self.grid.n() as i64;
        let idx = [d[0].rem_euclid(n) as usize, d[1].rem_euclid(n) as usize];
        self.values[self.grid.flatten(idx)]
    }

    /// `V = K * rho`; requires `int rho = 1` to 1e-8.
    pub fn mean_field_potential(&self, rho: &[f64]) -> Result<Vec<f64>> {
        ensure!(rho.len() == self.grid.size(), Contract, "density length {} != grid size {}", rho.len(), self.grid.size());
        let mass: f64 = rho.iter().sum::<f64>() * self.grid.cell_volume();
        ensure!((mass - 1.0).abs() <= 1e-8, Contract, "density integrates to {mass}, expected 1");
        self.potential(rho)
    }

    /// `K * rho` without the normalization precondition.
    pub fn potential(&self, rho: &[f64]) -> Result<Vec<f64>> {
        apply_multiplier(&self.plan, &self.grid, rho, &self.multiplier)
    }

    /// `-grad (K * rho)`, one vector per axis.
    pub fn force_field(&self, rho: &[f64]) -> Result<Vec<Vec<f64>>> {
        let v = self.mean_field_potential(rho)?;
        Ok(negate(gradient_with(&self.plan, &self.grid, &v)))
    }

    /// `-grad (K * rho)` without the normalization precondition.
    pub fn force(&self, rho: &[f64]) -> Result<Vec<Vec<f64>>> {
        let v = self.potential(rho)?;
        Ok(negate(gradient_with(&self.plan, &self.grid, &v)))
    }
}

fn negate(mut g: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    g.iter_mut().flatten().for_each(|v| *v = -*v);
    g
}

/// `c_a int_0^S s^{(a-d)/2-1} e^{-k^2/(4 pi s)} ds` for `k != 0`.
fn gaussian_integral_ft(a: f64, d: f64, k2: f64, s_upper: f64) -> Result<f64> {
    let c = normalization_constant(a);
    let u = if s_upper.is_infinite() { 0.0 } else { k2 / (4.0 * PI * s_upper) };
    if u > 700.0 {
        return Ok(0.0);
    }
    Ok(c * (k2 / (4.0 * PI)).powf((a - d) / 2.0) * upper_gamma((d - a) / 2.0, u)?)
}

fn s_upper(cutoff: f64) -> f64 {
    if cutoff == 0.0 {
        f64::INFINITY
    } else {
        cutoff.powi(-2)
    }
}

fn power_law_multiplier(grid: &SpatialGrid, law: &PowerLaw) -> Result<Vec<C64>> {
    let d = grid.dim() as f64;
    let s = s_upper(law.cutoff);
    (0..grid.size())
        .map(|i| {
            if i == 0 {
                return Ok(C64::new(0.0, 0.0));
            }
            let k = grid.wavevector(i);
            let k2 = k[0] * k[0] + k[1] * k[1];
            Ok(C64::new(law.sign.factor() * gaussian_integral_ft(law.a, d, k2, s)?, 0.0))
        })
        .collect()
}

/// `c_a int_{s_lo}^{s_hi} e^{-pi r^2 s} s^{a/2-1} ds`.
fn gaussian_integral(a: f64, r2: f64, s_lo: f64, s_hi: f64) -> Result<f64> {
    let c = normalization_constant(a);
    if s_lo >= s_hi {
        return Ok(0.0);
    }
    if r2 == 0.0 {
        ensure!(s_hi.is_finite(), Numerical, "unregularized kernel evaluated at the origin");
        return Ok(c * 2.0 / a * (s_hi.powf(a / 2.0) - s_lo.powf(a / 2.0)));
    }
    let x = PI * r2;
    let hi = if s_hi.is_finite() { upper_gamma(a / 2.0, x * s_hi)? } else { 0.0 };
    Ok(c * x.powf(-a / 2.0) * (upper_gamma(a / 2.0, x * s_lo)? - hi))
}

/// Cell average of `|x|^{-a}` over the cell of side `h` centred at the origin.
fn singular_cell_average(a: f64, h: f64, dim: usize) -> f64 {
    if dim == 1 {
        return (h / 2.0).powf(-a) / (1.0 - a);
    }
    // 8 * int_0^{pi/4} (h / (2 cos t))^{2-a} / (2-a) dt / h^2, composite Simpson
    let m = 2000;
    let step = (PI / 4.0) / m as f64;
    let g = |t: f64| (h / (2.0 * t.cos())).powf(2.0 - a) / (2.0 - a);
    let mut acc = g(0.0) + g(PI / 4.0);
    for j in 1..m {
        acc += g(j as f64 * step) * if j % 2 == 1 { 4.0 } else { 2.0 };
    }
    8.0 * acc * step / 3.0 / (h * h)
}

fn power_law_values(grid: &SpatialGrid, law: &PowerLaw) -> Result<Vec<f64>> {
    let dim = grid.dim();
    let d = dim as f64;
    let a = law.a;
    let length = grid.length();
    let s_hi = s_upper(law.cutoff);
    // the short part decays like exp(-pi r^2 s0); nearest images then suffice beyond 1e-17
    let s0 = (6.0 / (length * length)).min(s_hi);
    let c = normalization_constant(a);
    let vol = grid.volume();

    // long-range part: Fourier series folded onto the grid's modes
    let mut folded = vec![C64::new(0.0, 0.0); grid.size()];
    let kmax = ((160.0 * PI * s0).sqrt() * length / (2.0 * PI)).ceil() as i64 + 1;
    let n = grid.n() as i64;
    let range: Vec<i64> = (-kmax..=kmax).collect();
    let second: Vec<i64> = if dim == 2 { range.clone() } else { vec![0] };
    for &k0 in &range {
        for &k1 in &second {
            if k0 == 0 && k1 == 0 {
                continue;
            }
            let kk = 2.0 * PI / length;
            let k2 = (k0 * k0 + k1 * k1) as f64 * kk * kk;
            let u = k2 / (4.0 * PI * s0);
            if u > 700.0 {
                continue;
            }
            let coeff = c * (k2 / (4.0 * PI)).powf((a - d) / 2.0) * upper_gamma((d - a) / 2.0, u)?;
            let idx = grid.flatten([k0.rem_euclid(n) as usize, k1.rem_euclid(n) as usize]);
            folded[idx] += coeff;
        }
    }
    let plan = FftPlan::new(grid.n());
    plan.apply_nd(&mut folded, dim, true);
    let short_mean = if s0 < s_hi {
        let e = (a - d) / 2.0;
        let hi = if s_hi.is_finite() { s_hi.powf(e) } else { 0.0 };
        c * (s0.powf(e) - hi) / (-e)
    } else {
        0.0
    };

    let images: Vec<[f64; 2]> = if dim == 1 {
        (-2..=2).map(|m| [m as f64 * length, 0.0]).collect()
    } else {
        (-2..=2).flat_map(|m0| (-2..=2).map(move |m1| [m0 as f64 * length, m1 as f64 * length])).collect()
    };
    let h = grid.spacing();
    let mut values = vec![0.0; grid.size()];
    for (i, slot) in values.iter_mut().enumerate() {
        let idx = grid.unflatten(i);
        let disp = [grid.signed_mode(idx[0]) as f64 * h, if dim == 2 { grid.signed_mode(idx[1]) as f64 * h } else { 0.0 }];
        let mut short = 0.0;
        for im in &images {
            let x0 = disp[0] + im[0];
            let x1 = disp[1] + im[1];
            let r2 = x0 * x0 + x1 * x1;
            if r2 == 0.0 && s_hi.is_infinite() {
                // singular cell: |x|^{-a} averaged analytically plus the regular remainder
                short += singular_cell_average(a, h, dim) - c * 2.0 / a * s0.powf(a / 2.0);
                continue;
            }
            if r2 * s0 * PI > 45.0 {
                continue;
            }
            short += gaussian_integral(a, r2, s0, s_hi)?;
        }
        *slot = law.sign.factor() * (short - short_mean / vol + folded[i].re / vol);
    }
    Ok(values)
}

/// Free-space kernel `K_R(r)` (unperiodized), for diagnostics and oracles.
pub fn free_space_kernel(a: f64, cutoff: f64, r: f64) -> Result<f64> {
    gaussian_integral(a, r * r, 0.0, s_upper(cutoff))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> SpatialGrid {
        SpatialGrid::new(1, n, 2.0 * PI).unwrap()
    }

    #[test]
    fn constant_matches_gamma_identity() {
        // c_a int_0^inf e^{-pi s} s^{a/2-1} ds = 1 at |x| = 1
        for &a in &[0.1, 0.3, 0.5, 0.9] {
            assert!((free_space_kernel(a, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
            assert!((free_space_kernel(a, 0.0, 2.0).unwrap() - 2f64.powf(-a)).abs() < 1e-12);
        }
    }

    #[test]
    fn exponent_outside_range_is_domain_error() {
        let g = grid(16);
        for a in [0.0, 1.0, -0.2, 1.5] {
            assert!(matches!(InteractionKernel::power_law(&g, KernelSign::Repulsive, a, 0.0), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn cutoff_origin_value() {
        let a = 0.3;
        let r: f64 = 0.05;
        let want = normalization_constant(a) * r.powf(-a) * 2.0 / a;
        assert!((free_space_kernel(a, r, 0.0).unwrap() - want).abs() < 1e-12 * want);
    }

    #[test]
    fn multipliers_real_even_nonnegative_zero_mode() {
        let g = SpatialGrid::new(2, 16, 3.0).unwrap();
        let k = InteractionKernel::power_law(&g, KernelSign::Repulsive, 0.4, 0.1).unwrap();
        assert_eq!(k.multiplier()[0], C64::new(0.0, 0.0));
        for i in 0..g.size() {
            let m = k.multiplier()[i];
            assert_eq!(m.im, 0.0);
            assert!(m.re >= 0.0);
            let idx = g.unflatten(i);
            let j = g.flatten([(16 - idx[0]) % 16, (16 - idx[1]) % 16]);
            assert!((k.multiplier()[j] - m).norm() < 1e-15 * m.norm().max(1.0));
        }
    }

    #[test]
    fn large_cutoff_vanishes() {
        let g = grid(32);
        let k = InteractionKernel::power_law(&g, KernelSign::Repulsive, 0.3, 1e4).unwrap();
        assert!(k.multiplier().iter().all(|m| m.norm() < 1e-10));
        assert!(k.values().iter().all(|v| v.abs() < 1e-2));
    }

    #[test]
    fn uniform_density_gives_zero_potential_and_force() {
        let g = grid(32);
        let k = InteractionKernel::power_law(&g, KernelSign::Repulsive, 0.3, 0.05).unwrap();
        let rho = vec![1.0 / g.length(); 32];
        assert!(k.mean_field_potential(&rho).unwrap().iter().all(|v| v.abs() < 1e-14));
        assert!(k.force_field(&rho).unwrap()[0].iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn unnormalized_density_is_rejected() {
        let g = grid(16);
        let k = InteractionKernel::power_law(&g, KernelSign::Repulsive, 0.3, 0.05).unwrap();
        assert!(matches!(k.mean_field_potential(&[1.0; 16]), Err(Error::Contract(_))));
    }
}
