//! Wigner transform and Weyl quantization on the periodic grid.
//!
//! Conventions (kinetic energy `-hbar^2 Delta / 2`, velocity = momentum):
//!
//! * Wigner: `f(x, v) = (2 pi)^{-d} int e^{-i v.y / hbar} rho(x + y/2, x - y/2) dy`
//! * Weyl:   `rho_f(x, y) = hbar^{-d} int e^{i v.(x - y) / hbar} f((x + y)/2, v) dv`
//!
//! so that `int f dx dv = hbar^d tr rho` and `||rho_f||_{L^2} = ((2 pi)^d int |f|^2)^{1/2}`.
//!
//! On the grid the velocity spacing is `2 pi hbar / L` with `n_v = n`, which makes the
//! offset DFT land on the velocity grid. Kernel entries with odd offset have a half-integer
//! midpoint; those are reached by a half-cell Fourier shift in `x`. The offset `-n/2` has
//! two midpoints and its entry is their average, which keeps `Q(f)` Hermitian for real `f`.
//! The two maps are exact inverses for data without `x`-Nyquist content and without
//! offset-`n/2` coherence.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::density_matrix::Operator;
use crate::error::{ensure, Result};
use crate::spectral::{signed_index, FftPlan, PhaseGrid, SpatialGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    grid: PhaseGrid,
    hbar: f64,
    values: Vec<f64>,
}

impl PhaseField {
    /// Values are laid out `x_flat * n_v^d + v_flat`.
    pub fn new(grid: PhaseGrid, hbar: f64, values: Vec<f64>) -> Result<Self> {
        ensure!(values.len() == grid.size(), Contract, "phase field has {} values, grid needs {}", values.len(), grid.size());
        ensure!(values.iter().all(|v| v.is_finite()), Validation, "phase field contains non-finite values");
        ensure!(hbar.is_finite() && hbar > 0.0, Contract, "hbar must be positive, got {hbar}");
        Ok(Self { grid, hbar, values })
    }

    /// Samples `f(x, v)` at every grid point.
    pub fn from_fn(grid: PhaseGrid, hbar: f64, f: impl Fn([f64; 2], [f64; 2]) -> f64) -> Result<Self> {
        let nv = grid.v_size();
        let values = (0..grid.size())
            .map(|i| f(grid.spatial().point(i / nv), grid.velocity_vector(i % nv)))
            .collect();
        Self::new(grid, hbar, values)
    }

    pub fn zeros(grid: PhaseGrid, hbar: f64) -> Self {
        let size = grid.size();
        Self { grid, hbar, values: vec![0.0; size] }
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, x: usize, v: usize) -> f64 {
        self.values[x * self.grid.v_size() + v]
    }

    /// `int f dx dv`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// `(int |f|^2 dx dxi)^{1/2}` with `xi = v / 2 pi`; equals the `L^2` norm of `Q(f)`.
    pub fn l2_norm(&self) -> f64 {
        let d = self.grid.spatial().dim() as i32;
        ((2.0 * PI).powi(d) * self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    /// `int |f| dx dv`.
    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_volume()
    }

    /// Mass within `cells` velocity cells of the velocity-window edge.
    pub fn boundary_mass(&self, cells: usize) -> f64 {
        let nv = self.grid.v_size();
        let n_v = self.grid.n_v();
        let edge = |k: usize| k < cells || k >= n_v - cells;
        let mut acc = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let idx = self.grid.unflatten_v(i % nv);
            let on_edge = edge(idx[0]) || (self.grid.spatial().dim() == 2 && edge(idx[1]));
            if on_edge {
                acc += v.abs();
            }
        }
        acc * self.grid.cell_volume()
    }

    pub fn max_abs_diff(&self, other: &PhaseField) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// FFT-order index of velocity index `k` (velocity `2 pi hbar (k - n/2) / L`).
fn velocity_to_mode(k: usize, n: usize) -> usize {
    (k + n / 2) % n
}

struct OffsetGeometry {
    signed: [i64; 2],
    parity: [i64; 2],
    nyquist: [bool; 2],
}

fn offset_geometry(grid: &SpatialGrid, d_flat: usize) -> OffsetGeometry {
    let idx = grid.unflatten(d_flat);
    let n = grid.n();
    let dim = grid.dim();
    let mut g = OffsetGeometry { signed: [0; 2], parity: [0; 2], nyquist: [false; 2] };
    for axis in 0..dim {
        let s = signed_index(idx[axis], n);
        g.signed[axis] = s;
        g.parity[axis] = s.rem_euclid(2);
        g.nyquist[axis] = s == -(n as i64) / 2;
    }
    g
}

/// Shifts a periodic `x`-field by `sign / 2` cell along each axis with odd parity.
fn half_shift(plan: &FftPlan, grid: &SpatialGrid, field: &mut [C64], parity: [i64; 2], sign: f64) {
    if parity == [0, 0] {
        return;
    }
    let n = grid.n();
    plan.apply_nd(field, grid.dim(), false);
    let scale = 1.0 / grid.size() as f64;
    for (i, z) in field.iter_mut().enumerate() {
        let idx = grid.unflatten(i);
        let mut w = C64::new(scale, 0.0);
        for axis in 0..grid.dim() {
            if parity[axis] == 1 {
                if idx[axis] == n / 2 {
                    w = C64::new(0.0, 0.0);
                } else {
                    w *= C64::from_polar(1.0, sign * PI * signed_index(idx[axis], n) as f64 / n as f64);
                }
            }
        }
        *z *= w;
    }
    plan.apply_nd(field, grid.dim(), true);
}

fn check_phase_grid(phase: &PhaseGrid, grid: &SpatialGrid, hbar: f64) -> Result<()> {
    ensure!(phase.spatial() == grid, Contract, "phase grid and operator grid differ");
    ensure!(
        phase.is_compatible_with(hbar),
        Contract,
        "velocity grid must have n_v = n = {} and v_max = pi hbar n / L = {}",
        grid.n(),
        PI * hbar * grid.n() as f64 / grid.length()
    );
    Ok(())
}

/// Weyl quantization `Q(f)`; requires `f` on the grid returned by [`PhaseGrid::for_hbar`].
pub fn weyl_quantize(f: &PhaseField) -> Result<Operator> {
    let hbar = f.hbar();
    let phase = f.grid();
    let grid = phase.spatial().clone();
    check_phase_grid(phase, &grid, hbar)?;
    let n = grid.n();
    let size = grid.size();
    let dim = grid.dim();
    let plan = FftPlan::new(n);

    // rows: midpoint x, columns: offset in FFT order
    let mut offsets = Array2::<C64>::zeros((size, size));
    let mut buf = vec![C64::new(0.0, 0.0); size];
    for x in 0..size {
        for v in 0..size {
            let idx = phase.unflatten_v(v);
            let mode = grid.flatten([velocity_to_mode(idx[0], n), if dim == 2 { velocity_to_mode(idx[1], n) } else { 0 }]);
            buf[mode] = C64::new(f.values()[x * size + v], 0.0);
        }
        plan.apply_nd(&mut buf, dim, true);
        offsets.row_mut(x).iter_mut().zip(&buf).for_each(|(o, b)| *o = *b);
    }

    let scale = (2.0 * PI / grid.length()).powi(dim as i32);
    let mut kernel = Array2::<C64>::zeros((size, size));
    let mut col = vec![C64::new(0.0, 0.0); size];
    for dflat in 0..size {
        let geo = offset_geometry(&grid, dflat);
        col.iter_mut().zip(offsets.column(dflat)).for_each(|(c, v)| *c = *v);
        half_shift(&plan, &grid, &mut col, geo.parity, 1.0);
        let base = [(geo.signed[0] - geo.parity[0]) / 2, (geo.signed[1] - geo.parity[1]) / 2];
        let alternatives: Vec<[i64; 2]> = midpoint_alternatives(&geo, n);
        let weight = scale / alternatives.len() as f64;
        for b in 0..size {
            let a = grid.offset(b, geo.signed);
            let mut acc = C64::new(0.0, 0.0);
            for alt in &alternatives {
                acc += col[grid.offset(b, [base[0] + alt[0], base[1] + alt[1]])];
            }
            kernel[[a, b]] = acc * weight;
        }
    }
    Operator::new(grid, hbar, kernel)
}

fn midpoint_alternatives(geo: &OffsetGeometry, n: usize) -> Vec<[i64; 2]> {
    let half = n as i64 / 2;
    let opts = |nyq: bool| if nyq { vec![0, half] } else { vec![0] };
    let mut out = Vec::new();
    for s0 in opts(geo.nyquist[0]) {
        for s1 in opts(geo.nyquist[1]) {
            out.push([s0, s1]);
        }
    }
    out
}

/// Wigner transform `W(rho)` sampled on `phase`; rejects states whose transform reaches the
/// velocity-window edge.
pub fn wigner_transform(rho: &Operator, phase: &PhaseGrid) -> Result<PhaseField> {
    let f = wigner_transform_unchecked(rho, phase)?;
    let edge = f.boundary_mass(2);
    ensure!(edge <= 1e-6, Resolution, "Wigner transform has mass {edge:.3e} within 2 cells of the velocity boundary");
    Ok(f)
}

/// Wigner transform without the velocity-window aliasing check.
pub fn wigner_transform_unchecked(rho: &Operator, phase: &PhaseGrid) -> Result<PhaseField> {
    let grid = rho.grid().clone();
    let hbar = rho.hbar();
    check_phase_grid(phase, &grid, hbar)?;
    let n = grid.n();
    let size = grid.size();
    let dim = grid.dim();
    let plan = FftPlan::new(n);
    let kernel = rho.kernel();

    let mut offsets = Array2::<C64>::zeros((size, size));
    let mut col = vec![C64::new(0.0, 0.0); size];
    for dflat in 0..size {
        let geo = offset_geometry(&grid, dflat);
        let base = [(geo.signed[0] - geo.parity[0]) / 2, (geo.signed[1] - geo.parity[1]) / 2];
        for (m, c) in col.iter_mut().enumerate() {
            let b = grid.offset(m, [-base[0], -base[1]]);
            let a = grid.offset(b, geo.signed);
            *c = kernel[[a, b]];
        }
        half_shift(&plan, &grid, &mut col, geo.parity, -1.0);
        offsets.column_mut(dflat).iter_mut().zip(&col).for_each(|(o, c)| *o = *c);
    }

    let scale = (grid.spacing() / (2.0 * PI)).powi(dim as i32);
    let mut values = vec![0.0; size * size];
    let mut buf = vec![C64::new(0.0, 0.0); size];
    let mut worst_im = 0.0f64;
    let mut worst_re = 0.0f64;
    for x in 0..size {
        buf.iter_mut().zip(offsets.row(x)).for_each(|(b, o)| *b = *o);
        plan.apply_nd(&mut buf, dim, false);
        for v in 0..size {
            let idx = phase.unflatten_v(v);
            let mode = grid.flatten([velocity_to_mode(idx[0], n), if dim == 2 { velocity_to_mode(idx[1], n) } else { 0 }]);
            let z = buf[mode] * scale;
            worst_im = worst_im.max(z.im.abs());
            worst_re = worst_re.max(z.re.abs());
            values[x * size + v] = z.re;
        }
    }
    ensure!(
        worst_im <= 1e-10 * worst_re.max(1.0),
        Numerical,
        "Wigner transform has imaginary part {worst_im:.3e}; the operator is not Hermitian"
    );
    PhaseField::new(phase.clone(), hbar, values)
}
