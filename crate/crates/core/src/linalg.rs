//! Dense Hermitian helpers and Fourier-diagonal operator actions on kernel matrices.

use ndarray::{Array1, Array2, ArrayView2, Axis, ShapeBuilder};
use ndarray_linalg::{EigValshInto, EighInto, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::spectral::{FftPlan, SpatialGrid};

/// `(A + A^dagger) / 2`.
pub fn hermitian_part(a: ArrayView2<C64>) -> Array2<C64> {
    let mut h = a.to_owned();
    let n = h.nrows();
    for i in 0..n {
        h[[i, i]] = C64::new(h[[i, i]].re, 0.0);
        for j in i + 1..n {
            let v = (a[[i, j]] + a[[j, i]].conj()) * 0.5;
            h[[i, j]] = v;
            h[[j, i]] = v.conj();
        }
    }
    h
}

/// Largest entry of `A - A^dagger` in modulus.
pub fn hermiticity_defect(a: ArrayView2<C64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    worst
}

/// Ascending eigenvalues of the Hermitian part of `a`.
pub fn eigvalsh(a: ArrayView2<C64>) -> Result<Vec<f64>> {
    hermitian_part(a)
        .eigvalsh_into(UPLO::Upper)
        .map(|v| v.to_vec())
        .map_err(|e| Error::Numerical(format!("Hermitian eigensolver failed: {e}")))
}

/// Eigenpairs of the Hermitian part of `a`; eigenvectors are the columns.
pub fn eigh(a: ArrayView2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    // the LAPACK wrapper returns conjugated eigenvectors for row-major complex input
    let h = hermitian_part(a);
    let mut f = Array2::<C64>::zeros(h.raw_dim().f());
    f.assign(&h);
    f.eigh_into(UPLO::Upper).map_err(|e| Error::Numerical(format!("Hermitian eigensolver failed: {e}")))
}

pub fn eigh_real(a: ArrayView2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let s = (&a + &a.t()) * 0.5;
    s.eigh_into(UPLO::Upper).map_err(|e| Error::Numerical(format!("symmetric eigensolver failed: {e}")))
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm(a: ArrayView2<C64>) -> Result<f64> {
    Ok(eigvalsh(a)?.iter().map(|l| l.abs()).sum())
}

/// `(sum |s_i|^p)^{1/p}` over the given spectrum; `p = inf` gives the largest modulus.
pub fn schatten_of_spectrum(values: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    } else if p == 1.0 {
        values.iter().map(|v| v.abs()).sum()
    } else {
        values.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Singular values of a general square matrix via the eigenvalues of `A^dagger A`.
pub fn singular_values(a: ArrayView2<C64>) -> Result<Vec<f64>> {
    let ah = a.t().mapv(|z| z.conj());
    let g = ah.dot(&a);
    Ok(eigvalsh(g.view())?.into_iter().map(|l| l.max(0.0).sqrt()).collect())
}

pub fn commutator(a: ArrayView2<C64>, b: ArrayView2<C64>) -> Array2<C64> {
    a.dot(&b) - b.dot(&a)
}

pub fn dagger(a: ArrayView2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

pub fn max_abs(a: ArrayView2<C64>) -> f64 {
    a.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

/// `V diag(f(l)) V^dagger` for a Hermitian matrix with eigenpairs `(l, V)`.
pub fn spectral_function(values: &Array1<f64>, vectors: &Array2<C64>, f: impl Fn(f64) -> C64) -> Array2<C64> {
    let mut scaled = vectors.clone();
    for (mut col, &l) in scaled.axis_iter_mut(Axis(1)).zip(values.iter()) {
        let w = f(l);
        col.mapv_inplace(|z| z * w);
    }
    scaled.dot(&dagger(vectors.view()))
}

/// Actions of Fourier multipliers on either index of a kernel matrix over a spatial grid.
///
/// For a multiplier `m` with operator `A = F^dagger diag(m) F` (unitary DFT `F`),
/// `left` computes `A K` and `right` computes `K A`.
#[derive(Debug, Clone)]
pub struct ModalAction {
    grid: SpatialGrid,
    plan: FftPlan,
}

impl ModalAction {
    pub fn new(grid: &SpatialGrid) -> Self {
        Self { grid: grid.clone(), plan: FftPlan::new(grid.n()) }
    }

    pub fn left(&self, k: &Array2<C64>, m: &[C64]) -> Array2<C64> {
        let size = self.grid.size();
        let scale = 1.0 / size as f64;
        let mut out = Array2::zeros((size, size));
        let mut buf = vec![C64::new(0.0, 0.0); size];
        for (j, col) in k.axis_iter(Axis(1)).enumerate() {
            buf.iter_mut().zip(col.iter()).for_each(|(b, v)| *b = *v);
            self.plan.apply_nd(&mut buf, self.grid.dim(), false);
            buf.iter_mut().zip(m).for_each(|(b, w)| *b *= w * scale);
            self.plan.apply_nd(&mut buf, self.grid.dim(), true);
            out.column_mut(j).iter_mut().zip(&buf).for_each(|(o, b)| *o = *b);
        }
        out
    }

    pub fn right(&self, k: &Array2<C64>, m: &[C64]) -> Array2<C64> {
        // (K A)_{xy} = sum_k m_k e^{-i k y} (sum_z K_{xz} e^{i k z}) / size
        let size = self.grid.size();
        let scale = 1.0 / size as f64;
        let mut out = Array2::zeros((size, size));
        let mut buf = vec![C64::new(0.0, 0.0); size];
        for (i, row) in k.axis_iter(Axis(0)).enumerate() {
            buf.iter_mut().zip(row.iter()).for_each(|(b, v)| *b = *v);
            self.plan.apply_nd(&mut buf, self.grid.dim(), true);
            buf.iter_mut().zip(m).for_each(|(b, w)| *b *= w * scale);
            self.plan.apply_nd(&mut buf, self.grid.dim(), false);
            out.row_mut(i).iter_mut().zip(&buf).for_each(|(o, b)| *o = *b);
        }
        out
    }

    /// `A K A^dagger` for a unimodular multiplier, i.e. conjugation by a Fourier-diagonal unitary.
    pub fn conjugate(&self, k: &Array2<C64>, m: &[C64]) -> Array2<C64> {
        let mc: Vec<C64> = m.iter().map(|z| z.conj()).collect();
        self.right(&self.left(k, m), &mc)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_by_two_spectrum() {
        let a = array![[C64::new(0.5, 0.0), C64::new(0.1, 0.0)], [C64::new(0.1, 0.0), C64::new(0.5, 0.0)]];
        let l = eigvalsh(a.view()).unwrap();
        assert!((l[0] - 0.4).abs() < 1e-15 && (l[1] - 0.6).abs() < 1e-15);
        assert!((schatten_of_spectrum(&l, 2.0) - (0.52f64).sqrt()).abs() < 1e-15);
        assert!((schatten_of_spectrum(&l, f64::INFINITY) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn modal_actions_match_dense_operator() {
        let g = SpatialGrid::new(1, 8, 1.0).unwrap();
        let n = 8;
        // dense unitary DFT
        let f = Array2::from_shape_fn((n, n), |(k, j)| {
            C64::from_polar(1.0 / (n as f64).sqrt(), -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64)
        });
        let m: Vec<C64> = (0..n).map(|k| C64::new(1.0 + k as f64, 0.5 * k as f64)).collect();
        let d = Array2::from_diag(&Array1::from(m.clone()));
        let a = dagger(f.view()).dot(&d).dot(&f);
        let k = Array2::from_shape_fn((n, n), |(i, j)| C64::new((i * 3 + j) as f64 % 5.0, (i + 2 * j) as f64 % 3.0));
        let act = ModalAction::new(&g);
        let l = act.left(&k, &m) - a.dot(&k);
        let r = act.right(&k, &m) - k.dot(&a);
        assert!(max_abs(l.view()) < 1e-12 && max_abs(r.view()) < 1e-12);
    }

    #[test]
    fn eigh_columns_are_eigenvectors_of_complex_matrix() {
        let n = 5;
        let h = Array2::from_shape_fn((n, n), |(i, j)| C64::new((i + j) as f64 * 0.3, (i as f64 - j as f64) * 0.7));
        let (vals, vecs) = eigh(h.view()).unwrap();
        let resid = h.dot(&vecs) - &vecs.dot(&Array2::from_diag(&vals.mapv(|l| C64::new(l, 0.0))));
        assert!(max_abs(resid.view()) < 1e-13);
        let r = spectral_function(&vals, &vecs, |l| C64::new(l, 0.0));
        assert!(max_abs((&r - &h).view()) < 1e-13);
    }
}

