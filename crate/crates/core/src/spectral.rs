//! Periodic grids and the discrete Fourier layer.
//!
//! Transforms use the unitary convention `F_k = n^{-d/2} sum_j f_j e^{-2 pi i k.j/n}`.
//! Modal arrays are stored in FFT order; mode index `k >= n/2` stands for `k - n`.
//! Multi-dimensional fields are flattened row-major with axis 0 slowest.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::error::{ensure, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    dim: usize,
    n: usize,
    length: f64,
}

impl SpatialGrid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        ensure!(dim == 1 || dim == 2, Contract, "dimension must be 1 or 2, got {dim}");
        ensure!(n >= 8 && n.is_power_of_two(), Contract, "points per axis must be a power of two >= 8, got {n}");
        ensure!(length.is_finite() && length > 0.0, Contract, "period length must be positive, got {length}");
        Ok(Self { dim, n, length })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Total number of points, `n^d`.
    pub fn size(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Quadrature weight of one cell, `spacing^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.n; self.dim]
    }

    /// Per-axis indices of flat index `i`.
    pub fn unflatten(&self, i: usize) -> [usize; 2] {
        if self.dim == 1 {
            [i, 0]
        } else {
            [i / self.n, i % self.n]
        }
    }

    pub fn flatten(&self, idx: [usize; 2]) -> usize {
        if self.dim == 1 {
            idx[0]
        } else {
            idx[0] * self.n + idx[1]
        }
    }

    /// Coordinates of grid point `i` (unused axes are zero).
    pub fn point(&self, i: usize) -> [f64; 2] {
        let h = self.spacing();
        let idx = self.unflatten(i);
        [idx[0] as f64 * h, idx[1] as f64 * h]
    }

    /// Signed mode number of FFT index `k`, in `[-n/2, n/2)`.
    pub fn signed_mode(&self, k: usize) -> i64 {
        signed_index(k, self.n)
    }

    /// Wavenumbers `2 pi k / L` of flat modal index `i`.
    pub fn wavevector(&self, i: usize) -> [f64; 2] {
        let idx = self.unflatten(i);
        let s = 2.0 * PI / self.length;
        let k1 = if self.dim == 2 { self.signed_mode(idx[1]) as f64 * s } else { 0.0 };
        [self.signed_mode(idx[0]) as f64 * s, k1]
    }

    pub fn is_nyquist(&self, i: usize) -> bool {
        let idx = self.unflatten(i);
        idx[0] == self.n / 2 || (self.dim == 2 && idx[1] == self.n / 2)
    }

    /// Minimal-image displacement `x_i - x_j` in index units per axis, each in `[-n/2, n/2)`.
    pub fn min_image(&self, i: usize, j: usize) -> [i64; 2] {
        let a = self.unflatten(i);
        let b = self.unflatten(j);
        let n = self.n as i64;
        let wrap = |d: i64| (d + n / 2).rem_euclid(n) - n / 2;
        [wrap(a[0] as i64 - b[0] as i64), wrap(a[1] as i64 - b[1] as i64)]
    }

    /// Minimal-image displacement in length units.
    pub fn displacement(&self, i: usize, j: usize) -> [f64; 2] {
        let d = self.min_image(i, j);
        let h = self.spacing();
        [d[0] as f64 * h, d[1] as f64 * h]
    }

    /// Flat index of the grid point displaced from `i` by `shift` cells (periodic).
    pub fn offset(&self, i: usize, shift: [i64; 2]) -> usize {
        let idx = self.unflatten(i);
        let n = self.n as i64;
        let a = (idx[0] as i64 + shift[0]).rem_euclid(n) as usize;
        let b = if self.dim == 2 { (idx[1] as i64 + shift[1]).rem_euclid(n) as usize } else { 0 };
        self.flatten([a, b])
    }
}

pub(crate) fn signed_index(k: usize, n: usize) -> i64 {
    if k >= n / 2 {
        k as i64 - n as i64
    } else {
        k as i64
    }
}

/// Position-velocity grid. Velocities are `v_k = -v_max + k dv`, `dv = 2 v_max / n_v`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    spatial: SpatialGrid,
    n_v: usize,
    v_max: f64,
}

impl PhaseGrid {
    pub fn new(spatial: SpatialGrid, n_v: usize, v_max: f64) -> Result<Self> {
        ensure!(n_v >= 8 && n_v % 2 == 0, Contract, "velocity points must be even and >= 8, got {n_v}");
        ensure!(v_max.is_finite() && v_max > 0.0, Contract, "v_max must be positive, got {v_max}");
        Ok(Self { spatial, n_v, v_max })
    }

    /// The grid on which Wigner transform and Weyl quantization are mutually inverse:
    /// `n_v = n` and velocity spacing `2 pi hbar / L`.
    pub fn for_hbar(spatial: SpatialGrid, hbar: f64) -> Result<Self> {
        ensure!(hbar.is_finite() && hbar > 0.0, Contract, "hbar must be positive, got {hbar}");
        let n = spatial.n();
        let v_max = PI * hbar * n as f64 / spatial.length();
        Self::new(spatial, n, v_max)
    }

    pub fn spatial(&self) -> &SpatialGrid {
        &self.spatial
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn dv(&self) -> f64 {
        2.0 * self.v_max / self.n_v as f64
    }

    pub fn velocity(&self, k: usize) -> f64 {
        -self.v_max + k as f64 * self.dv()
    }

    /// Number of velocity points, `n_v^d`.
    pub fn v_size(&self) -> usize {
        self.n_v.pow(self.spatial.dim() as u32)
    }

    pub fn size(&self) -> usize {
        self.spatial.size() * self.v_size()
    }

    /// Phase-space cell volume `(dx dv)^d`.
    pub fn cell_volume(&self) -> f64 {
        (self.spatial.spacing() * self.dv()).powi(self.spatial.dim() as i32)
    }

    /// Array shape: spatial axes then velocity axes.
    pub fn shape(&self) -> Vec<usize> {
        let d = self.spatial.dim();
        let mut s = vec![self.spatial.n(); d];
        s.extend(std::iter::repeat_n(self.n_v, d));
        s
    }

    /// Per-axis velocity indices of flat velocity index `j`.
    pub fn unflatten_v(&self, j: usize) -> [usize; 2] {
        if self.spatial.dim() == 1 {
            [j, 0]
        } else {
            [j / self.n_v, j % self.n_v]
        }
    }

    pub fn velocity_vector(&self, j: usize) -> [f64; 2] {
        let idx = self.unflatten_v(j);
        let v1 = if self.spatial.dim() == 2 { self.velocity(idx[1]) } else { 0.0 };
        [self.velocity(idx[0]), v1]
    }

    pub fn is_compatible_with(&self, hbar: f64) -> bool {
        let expected = PI * hbar * self.spatial.n() as f64 / self.spatial.length();
        self.n_v == self.spatial.n() && (self.v_max - expected).abs() <= 1e-12 * expected.max(1.0)
    }
}

/// Lines of a row-major array along `axis`: `(start, stride)` pairs, each line `shape[axis]` long.
pub fn lines(shape: &[usize], axis: usize) -> Vec<(usize, usize)> {
    let stride: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let len = shape[axis];
    let mut out = Vec::with_capacity(outer * stride);
    for o in 0..outer {
        for inner in 0..stride {
            out.push((o * len * stride + inner, stride));
        }
    }
    out
}

/// Cached unnormalized 1D FFT plans of one length.
#[derive(Clone)]
pub struct FftPlan {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPlan").field("n", &self.n).finish()
    }
}

impl FftPlan {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place unnormalized transform of a contiguous buffer of length `n`.
    pub fn apply(&self, buf: &mut [C64], inverse: bool) {
        if inverse {
            self.inverse.process(buf);
        } else {
            self.forward.process(buf);
        }
    }

    /// Unnormalized transform along `axis` of a row-major array with the given shape.
    pub fn apply_axis(&self, data: &mut [C64], shape: &[usize], axis: usize, inverse: bool) {
        debug_assert_eq!(shape[axis], self.n);
        let mut line = vec![C64::new(0.0, 0.0); self.n];
        for (start, stride) in lines(shape, axis) {
            if stride == 1 {
                self.apply(&mut data[start..start + self.n], inverse);
                continue;
            }
            for (j, v) in line.iter_mut().enumerate() {
                *v = data[start + j * stride];
            }
            self.apply(&mut line, inverse);
            for (j, v) in line.iter().enumerate() {
                data[start + j * stride] = *v;
            }
        }
    }

    /// Unnormalized transform over all axes of a `d`-dimensional `n^d` field.
    pub fn apply_nd(&self, data: &mut [C64], dim: usize, inverse: bool) {
        let shape = vec![self.n; dim];
        for axis in 0..dim {
            self.apply_axis(data, &shape, axis, inverse);
        }
    }
}

fn check_len(grid: &SpatialGrid, len: usize) -> Result<()> {
    ensure!(len == grid.size(), Contract, "field length {len} does not match grid size {}", grid.size());
    Ok(())
}

pub fn forward_transform(grid: &SpatialGrid, field: &[C64]) -> Result<Vec<C64>> {
    check_len(grid, field.len())?;
    let plan = FftPlan::new(grid.n());
    let mut out = field.to_vec();
    plan.apply_nd(&mut out, grid.dim(), false);
    let s = (grid.size() as f64).sqrt().recip();
    out.iter_mut().for_each(|v| *v *= s);
    Ok(out)
}

pub fn inverse_transform(grid: &SpatialGrid, modes: &[C64]) -> Result<Vec<C64>> {
    check_len(grid, modes.len())?;
    let plan = FftPlan::new(grid.n());
    let mut out = modes.to_vec();
    plan.apply_nd(&mut out, grid.dim(), true);
    let s = (grid.size() as f64).sqrt().recip();
    out.iter_mut().for_each(|v| *v *= s);
    Ok(out)
}

/// Applies a Fourier multiplier to a real field: `IFFT(multiplier * FFT(f))`.
///
/// With the multiplier equal to the torus Fourier coefficients `int K(x) e^{-i k x} dx`
/// of a kernel, the result is the periodic convolution `K * f`.
pub fn convolve_periodic(grid: &SpatialGrid, f: &[f64], multiplier: &[C64]) -> Result<Vec<f64>> {
    check_len(grid, f.len())?;
    check_len(grid, multiplier.len())?;
    let plan = FftPlan::new(grid.n());
    apply_multiplier(&plan, grid, f, multiplier)
}

pub(crate) fn apply_multiplier(plan: &FftPlan, grid: &SpatialGrid, f: &[f64], multiplier: &[C64]) -> Result<Vec<f64>> {
    let mut buf: Vec<C64> = f.iter().map(|&x| C64::new(x, 0.0)).collect();
    plan.apply_nd(&mut buf, grid.dim(), false);
    for (b, m) in buf.iter_mut().zip(multiplier) {
        *b *= m;
    }
    plan.apply_nd(&mut buf, grid.dim(), true);
    let scale = (grid.size() as f64).recip();
    let max_re = buf.iter().fold(0.0f64, |a, v| a.max(v.re.abs())) * scale;
    let max_im = buf.iter().fold(0.0f64, |a, v| a.max(v.im.abs())) * scale;
    ensure!(
        max_im <= 1e-8 * max_re.max(1.0),
        Numerical,
        "convolution left an imaginary residue {max_im:.3e}; multiplier is not the transform of a real even kernel"
    );
    Ok(buf.iter().map(|v| v.re * scale).collect())
}

/// Per-axis spectral derivative; the Nyquist mode is dropped.
pub fn spectral_gradient(grid: &SpatialGrid, f: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_len(grid, f.len())?;
    let plan = FftPlan::new(grid.n());
    Ok(gradient_with(&plan, grid, f))
}

pub(crate) fn gradient_with(plan: &FftPlan, grid: &SpatialGrid, f: &[f64]) -> Vec<Vec<f64>> {
    let mut modes: Vec<C64> = f.iter().map(|&x| C64::new(x, 0.0)).collect();
    plan.apply_nd(&mut modes, grid.dim(), false);
    let scale = (grid.size() as f64).recip();
    (0..grid.dim())
        .map(|axis| {
            let mut buf: Vec<C64> = modes
                .iter()
                .enumerate()
                .map(|(i, &m)| {
                    let idx = grid.unflatten(i);
                    if idx[axis] == grid.n() / 2 {
                        C64::new(0.0, 0.0)
                    } else {
                        m * C64::new(0.0, grid.wavevector(i)[axis])
                    }
                })
                .collect();
            plan.apply_nd(&mut buf, grid.dim(), true);
            buf.iter().map(|v| v.re * scale).collect()
        })
        .collect()
}
