//! One-particle operators on the spatial grid.
//!
//! Kernels carry continuum semantics: an operator acts as `(A g)(x_a) = h^d sum_b A(x_a, x_b) g(x_b)`,
//! so its matrix in the orthonormal grid basis is `h^d A`. Traces, products and spectra use
//! that matrix. Semiclassical Schatten norms are `hbar^{d/p} (sum |s_i|^p)^{1/p}`.

use std::ops::Deref;

use log::warn;
use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64 as C64;

use crate::error::{ensure, Result};
use crate::linalg::{self, ModalAction};
use crate::spectral::SpatialGrid;
use crate::wigner::{self, PhaseField};

/// An operator kernel on a grid with an attached `hbar`; no invariants beyond shape.
#[derive(Debug, Clone)]
pub struct Operator {
    grid: SpatialGrid,
    hbar: f64,
    kernel: Array2<C64>,
}

impl Operator {
    pub fn new(grid: SpatialGrid, hbar: f64, kernel: Array2<C64>) -> Result<Self> {
        let size = grid.size();
        ensure!(kernel.dim() == (size, size), Contract, "kernel shape {:?} does not match grid size {size}", kernel.dim());
        ensure!(hbar.is_finite() && hbar > 0.0, Contract, "hbar must be positive, got {hbar}");
        Ok(Self { grid, hbar, kernel })
    }

    pub fn zeros(grid: SpatialGrid, hbar: f64) -> Self {
        let size = grid.size();
        Self { grid, hbar, kernel: Array2::zeros((size, size)) }
    }

    /// From the matrix in the orthonormal grid basis.
    pub fn from_matrix(grid: SpatialGrid, hbar: f64, matrix: Array2<C64>) -> Result<Self> {
        let w = grid.cell_volume().recip();
        Self::new(grid, hbar, matrix.mapv(|z| z * w))
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn kernel(&self) -> &Array2<C64> {
        &self.kernel
    }

    pub fn into_kernel(self) -> Array2<C64> {
        self.kernel
    }

    /// Matrix in the orthonormal grid basis, `h^d * kernel`.
    pub fn matrix(&self) -> Array2<C64> {
        let w = self.grid.cell_volume();
        self.kernel.mapv(|z| z * w)
    }

    pub fn trace(&self) -> C64 {
        self.kernel.diag().sum() * self.grid.cell_volume()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(self.matrix().view())
    }

    /// Eigenvalues of the Hermitian part of the operator.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        linalg::eigvalsh(self.matrix().view())
    }

    /// Semiclassical Schatten norm; Hermitian operators use eigenvalues, others singular values.
    pub fn schatten_norm(&self, p: f64) -> Result<f64> {
        ensure!(p >= 1.0, Contract, "Schatten order must be >= 1, got {p}");
        let m = self.matrix();
        let scale = linalg::max_abs(m.view()).max(f64::MIN_POSITIVE);
        let spectrum = if linalg::hermiticity_defect(m.view()) <= 1e-13 * scale {
            linalg::eigvalsh(m.view())?
        } else {
            linalg::singular_values(m.view())?
        };
        Ok(semiclassical_scale(self.hbar, self.grid.dim(), p) * linalg::schatten_of_spectrum(&spectrum, p))
    }

    pub fn scaled(&self, s: f64) -> Operator {
        Operator { grid: self.grid.clone(), hbar: self.hbar, kernel: self.kernel.mapv(|z| z * s) }
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator> {
        ensure!(self.grid == other.grid, Contract, "operators live on different grids");
        Ok(Operator { grid: self.grid.clone(), hbar: self.hbar, kernel: &self.kernel - &other.kernel })
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        ensure!(self.grid == other.grid, Contract, "operators live on different grids");
        Ok(Operator { grid: self.grid.clone(), hbar: self.hbar, kernel: &self.kernel + &other.kernel })
    }

    /// Operator product (kernel of `A B`).
    pub fn compose(&self, other: &Operator) -> Result<Operator> {
        ensure!(self.grid == other.grid, Contract, "operators live on different grids");
        let k = self.kernel.dot(&other.kernel) * C64::new(self.grid.cell_volume(), 0.0);
        Ok(Operator { grid: self.grid.clone(), hbar: self.hbar, kernel: k })
    }

    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        self.compose(other)?.sub(&other.compose(self)?)
    }

    /// Diagonal `hbar^d A(x, x)`; for a density matrix this is the spatial density.
    pub fn diagonal_density(&self) -> Vec<f64> {
        let s = self.hbar.powi(self.grid.dim() as i32);
        self.kernel.diag().iter().map(|z| z.re * s).collect()
    }

    /// Kernel of `[grad, A]`, i.e. `(d_x + d_y) A(x, y)`, per axis.
    pub fn quantum_gradient_x(&self) -> Vec<Operator> {
        let act = ModalAction::new(&self.grid);
        (0..self.grid.dim())
            .map(|axis| {
                let ik: Vec<C64> = (0..self.grid.size())
                    .map(|i| {
                        let idx = self.grid.unflatten(i);
                        if idx[axis] == self.grid.n() / 2 {
                            C64::new(0.0, 0.0)
                        } else {
                            C64::new(0.0, self.grid.wavevector(i)[axis])
                        }
                    })
                    .collect();
                // [D, A] = D A - A D with D the spectral derivative
                let k = act.left(&self.kernel, &ik) - act.right(&self.kernel, &ik);
                Operator { grid: self.grid.clone(), hbar: self.hbar, kernel: k }
            })
            .collect()
    }

    /// Kernel of `[x / (i hbar), A]`, i.e. `(x - y) A(x, y) / (i hbar)` with minimal-image `x - y`.
    /// The half-period offset has no sign and is dropped, as the Nyquist mode is for `d_x`.
    pub fn quantum_gradient_v(&self) -> Vec<Operator> {
        let size = self.grid.size();
        let half = (self.grid.n() / 2) as i64;
        (0..self.grid.dim())
            .map(|axis| {
                let k = Array2::from_shape_fn((size, size), |(a, b)| {
                    let d = self.grid.min_image(a, b)[axis];
                    if d == -half {
                        return C64::new(0.0, 0.0);
                    }
                    let dx = d as f64 * self.grid.spacing();
                    self.kernel[[a, b]] * C64::new(0.0, -dx / self.hbar)
                });
                Operator { grid: self.grid.clone(), hbar: self.hbar, kernel: k }
            })
            .collect()
    }

    /// Multiplies on the right by the Fourier weight `m = 1 + |hbar k|^n_w`.
    fn weighted(&self, weight_order: u32) -> Operator {
        let act = ModalAction::new(&self.grid);
        let w = momentum_weight(&self.grid, self.hbar, weight_order);
        Operator { grid: self.grid.clone(), hbar: self.hbar, kernel: act.right(&self.kernel, &w) }
    }
}

fn semiclassical_scale(hbar: f64, dim: usize, p: f64) -> f64 {
    if p.is_infinite() {
        1.0
    } else {
        hbar.powf(dim as f64 / p)
    }
}

fn momentum_weight(grid: &SpatialGrid, hbar: f64, order: u32) -> Vec<C64> {
    (0..grid.size())
        .map(|i| {
            let k = grid.wavevector(i);
            let p = hbar * (k[0] * k[0] + k[1] * k[1]).sqrt();
            C64::new(1.0 + p.powi(order as i32), 0.0)
        })
        .collect()
}

/// Schatten norm of a raw Hermitian kernel with explicit cell weight.
pub fn schatten_norm_of_kernel(kernel: ArrayView2<C64>, cell_volume: f64, hbar: f64, dim: usize, p: f64) -> Result<f64> {
    ensure!(p >= 1.0, Contract, "Schatten order must be >= 1, got {p}");
    let m = kernel.mapv(|z| z * cell_volume);
    let spectrum = linalg::eigvalsh(m.view())?;
    Ok(semiclassical_scale(hbar, dim, p) * linalg::schatten_of_spectrum(&spectrum, p))
}

/// Semiclassical Sobolev-type norms of a state.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiclassicalNorms {
    pub p: f64,
    pub weight_order: u32,
    /// `||rho m||_{L^p}`.
    pub weighted: f64,
    /// `||[grad, rho] m||_{L^p}`, summed over axes in the `p`-sense.
    pub gradient_x: f64,
    /// `||[x / i hbar, rho] m||_{L^p}`.
    pub gradient_v: f64,
    /// `W^{1,p}(m)` combination of the three.
    pub total: f64,
}

/// Eigenvalue-projection summary of the mixed-state builder.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipReport {
    /// Largest distance of an eigenvalue outside `[0, 1]` before projection.
    pub max_violation: f64,
    /// Trace-norm size of the correction, in semiclassical units.
    pub correction_l1: f64,
    pub clipped: bool,
}

/// A fermionic one-particle density matrix: Hermitian, `0 <= rho <= 1`, `hbar^d tr rho = 1`.
#[derive(Debug, Clone)]
pub struct DensityMatrix(Operator);

impl Deref for DensityMatrix {
    type Target = Operator;

    fn deref(&self) -> &Operator {
        &self.0
    }
}

const HERMITIAN_TOL: f64 = 1e-12;
const SPECTRUM_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-8;

impl DensityMatrix {
    pub fn new(op: Operator) -> Result<Self> {
        let dm = DensityMatrix(op);
        dm.validate()?;
        Ok(dm)
    }

    /// Skips the spectral check (cheap invariants only).
    pub(crate) fn new_unchecked(op: Operator) -> Self {
        DensityMatrix(op)
    }

    pub fn operator(&self) -> &Operator {
        &self.0
    }

    pub fn into_operator(self) -> Operator {
        self.0
    }

    /// Checks Hermiticity, spectrum and normalization.
    pub fn validate(&self) -> Result<()> {
        let m = self.matrix();
        let defect = linalg::hermiticity_defect(m.view());
        ensure!(defect <= HERMITIAN_TOL, Validation, "density matrix not Hermitian (defect {defect:.3e})");
        let norm = self.normalization();
        ensure!((norm - 1.0).abs() <= TRACE_TOL, Validation, "hbar^d tr rho = {norm}, expected 1");
        let spec = linalg::eigvalsh(m.view())?;
        let lo = spec.first().copied().unwrap_or(0.0);
        let hi = spec.last().copied().unwrap_or(0.0);
        ensure!(
            lo >= -SPECTRUM_TOL && hi <= 1.0 + SPECTRUM_TOL,
            Validation,
            "spectrum [{lo:.3e}, {hi:.6}] leaves [0, 1]"
        );
        Ok(())
    }

    /// `hbar^d tr rho`.
    pub fn normalization(&self) -> f64 {
        self.hbar.powi(self.grid.dim() as i32) * self.trace().re
    }

    /// Projector onto orthonormal orbitals (grid inner product `h^d sum conj(f) g`).
    pub fn from_slater(grid: &SpatialGrid, orbitals: &[Vec<C64>], hbar: f64) -> Result<Self> {
        let size = grid.size();
        let count = hbar.powi(-(grid.dim() as i32)).round() as usize;
        ensure!(
            orbitals.len() == count,
            Validation,
            "{} orbitals given, hbar^-d requires {count}",
            orbitals.len()
        );
        let w = grid.cell_volume();
        for (i, f) in orbitals.iter().enumerate() {
            ensure!(f.len() == size, Contract, "orbital {i} has {} values, grid has {size}", f.len());
        }
        for i in 0..orbitals.len() {
            for j in 0..=i {
                let ip: C64 = orbitals[i].iter().zip(&orbitals[j]).map(|(a, b)| a.conj() * b).sum::<C64>() * w;
                let want = if i == j { 1.0 } else { 0.0 };
                ensure!((ip - want).norm() <= 1e-10, Validation, "orbitals {i},{j} not orthonormal: <f_i, f_j> = {ip}");
            }
        }
        let mut kernel = Array2::<C64>::zeros((size, size));
        for f in orbitals {
            for a in 0..size {
                let fa = f[a];
                for b in 0..size {
                    kernel[[a, b]] += fa * f[b].conj();
                }
            }
        }
        Self::new(Operator::new(grid.clone(), hbar, kernel)?)
    }

    /// `Q(f)` as a validated state.
    pub fn from_phase_symbol(f: &PhaseField) -> Result<Self> {
        let mass = f.mass();
        ensure!((mass - 1.0).abs() <= 1e-6, Contract, "phase symbol has mass {mass}, expected 1");
        Self::new(wigner::weyl_quantize(f)?)
    }

    /// `Q(f)` projected onto `0 <= rho <= 1` with `hbar^d tr rho = 1` when the Weyl
    /// quantization violates the fermionic bounds by more than 1e-10.
    pub fn from_phase_symbol_clipped(f: &PhaseField) -> Result<(Self, ClipReport)> {
        let mass = f.mass();
        ensure!((mass - 1.0).abs() <= 1e-6, Contract, "phase symbol has mass {mass}, expected 1");
        let op = wigner::weyl_quantize(f)?;
        let grid = op.grid().clone();
        let hbar = op.hbar();
        let m = linalg::hermitian_part(op.matrix().view());
        let (vals, vecs) = linalg::eigh(m.view())?;
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let max_violation = (-lo).max(hi - 1.0).max(0.0);
        let target = hbar.powi(-(grid.dim() as i32));
        let trace: f64 = vals.sum();
        if max_violation <= SPECTRUM_TOL && ((trace - target) / target).abs() <= 1e-12 {
            let dm = DensityMatrix(Operator::from_matrix(grid, hbar, m)?);
            return Ok((dm, ClipReport { max_violation, correction_l1: 0.0, clipped: false }));
        }
        let mut fixed: Array1<f64> = vals.mapv(|l| l.clamp(0.0, 1.0));
        for _ in 0..50 {
            let t: f64 = fixed.sum();
            if ((t - target) / target).abs() <= 1e-14 {
                break;
            }
            // shift the unsaturated eigenvalues proportionally towards the target trace
            let free: f64 = fixed.iter().filter(|&&l| l > 0.0 && l < 1.0).sum();
            if free <= 0.0 {
                break;
            }
            let s = 1.0 + (target - t) / free;
            fixed.mapv_inplace(|l| if l > 0.0 && l < 1.0 { (l * s).clamp(0.0, 1.0) } else { l });
        }
        let correction: f64 = vals.iter().zip(fixed.iter()).map(|(a, b)| (a - b).abs()).sum();
        let correction_l1 = correction * hbar.powi(grid.dim() as i32);
        let clipped = linalg::spectral_function(&fixed, &vecs, |l| C64::new(l, 0.0));
        warn!("Weyl quantization violated 0 <= rho <= 1 by {max_violation:.3e}; projected (trace-norm change {correction_l1:.3e})");
        let dm = DensityMatrix::new(Operator::from_matrix(grid, hbar, linalg::hermitian_part(clipped.view()))?)?;
        Ok((dm, ClipReport { max_violation, correction_l1, clipped: true }))
    }

    /// `rho(x) = hbar^d rho(x, x)`.
    pub fn spatial_density(&self) -> Vec<f64> {
        let rho = self.diagonal_density();
        let worst = rho.iter().cloned().fold(0.0, f64::min);
        if worst < -1e-8 {
            warn!("spatial density has negative values down to {worst:.3e}");
        }
        rho
    }

    /// Semiclassical `W^{1,p}(m)` norms with `m = 1 + |hbar k|^n_w` applied on the right.
    pub fn sobolev_norm(&self, p: f64, weight_order: u32) -> Result<SemiclassicalNorms> {
        ensure!(
            weight_order > 2 && weight_order % 2 == 0,
            Contract,
            "weight order must be an even integer > 2, got {weight_order}"
        );
        let weighted = self.weighted(weight_order).schatten_norm(p)?;
        let combine = |ops: Vec<Operator>| -> Result<f64> {
            let norms = ops.iter().map(|o| o.weighted(weight_order).schatten_norm(p)).collect::<Result<Vec<_>>>()?;
            Ok(combine_norms(&norms, p))
        };
        let gradient_x = combine(self.quantum_gradient_x())?;
        let gradient_v = combine(self.quantum_gradient_v())?;
        let total = combine_norms(&[weighted, gradient_x, gradient_v], p);
        Ok(SemiclassicalNorms { p, weight_order, weighted, gradient_x, gradient_v, total })
    }
}

fn combine_norms(values: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        values.iter().cloned().fold(0.0, f64::max)
    } else {
        values.iter().map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// `||rho_1 - rho_2||_{L^1}`.
pub fn trace_distance(a: &Operator, b: &Operator) -> Result<f64> {
    a.sub(b)?.schatten_norm(1.0)
}
