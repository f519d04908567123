//! Compressed-row sparse matrices and `e^{-i H t}` propagation, dense or Krylov.

use ndarray::{Array1, Array2};
use semiclassical::linalg::{eigh, eigh_real};
use semiclassical::{Error, Result, C64};

/// Square complex matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl CsrMatrix {
    /// Duplicate entries are summed.
    pub fn from_triplets(dim: usize, mut entries: Vec<(usize, usize, C64)>) -> Self {
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; dim + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<C64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            debug_assert!(r < dim && c < dim);
            if last == Some((r, c)) {
                *vals.last_mut().expect("entry present") += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { dim, row_ptr, cols, vals }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim).map(|i| (i, i, C64::new(1.0, 0.0))).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `(row, col, value)` for every stored entry.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k])))
    }

    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *out = acc;
        }
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.dim];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut out = Array2::zeros((self.dim, self.dim));
        for (r, c, v) in self.triplets() {
            out[[r, c]] += v;
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect())
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: C64, other: &CsrMatrix, b: C64) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let entries = self.triplets().map(|(r, c, v)| (r, c, a * v)).chain(other.triplets().map(|(r, c, v)| (r, c, b * v))).collect();
        Self::from_triplets(self.dim, entries)
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &CsrMatrix) -> Self {
        let mut entries = Vec::new();
        for (r, k, v) in self.triplets() {
            for j in other.row_ptr[k]..other.row_ptr[k + 1] {
                entries.push((r, other.cols[j], v * other.vals[j]));
            }
        }
        Self::from_triplets(self.dim, entries)
    }

    /// `max |A - A^dagger|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.combine(C64::new(1.0, 0.0), &self.adjoint(), C64::new(-1.0, 0.0));
        d.vals.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest dimension propagated through a dense eigendecomposition.
pub const DENSE_LIMIT: usize = 2000;
const KRYLOV_DIM: usize = 30;

/// `psi -> e^{-i H s} psi` for a Hermitian `H`.
#[derive(Debug, Clone)]
pub enum Propagator {
    Dense { values: Array1<f64>, vectors: Array2<C64> },
    Krylov { matrix: CsrMatrix, tolerance: f64 },
}

impl Propagator {
    pub fn new(h: &CsrMatrix) -> Result<Self> {
        if h.dim() < DENSE_LIMIT {
            let (values, vectors) = eigh(h.to_dense().view())?;
            Ok(Self::Dense { values, vectors })
        } else {
            Ok(Self::Krylov { matrix: h.clone(), tolerance: 1e-12 })
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Dense { values, .. } => values.len(),
            Self::Krylov { matrix, .. } => matrix.dim(),
        }
    }

    /// `e^{-i H s} psi`.
    pub fn apply(&self, psi: &[C64], s: f64) -> Result<Vec<C64>> {
        if s == 0.0 {
            return Ok(psi.to_vec());
        }
        match self {
            Self::Dense { values, vectors } => {
                let coeffs: Vec<C64> = (0..values.len())
                    .map(|k| {
                        let c: C64 = vectors.column(k).iter().zip(psi).map(|(u, p)| u.conj() * p).sum();
                        c * C64::from_polar(1.0, -values[k] * s)
                    })
                    .collect();
                let mut out = vec![C64::new(0.0, 0.0); psi.len()];
                for (k, c) in coeffs.iter().enumerate() {
                    for (o, u) in out.iter_mut().zip(vectors.column(k)) {
                        *o += u * c;
                    }
                }
                Ok(out)
            }
            Self::Krylov { matrix, tolerance } => krylov_expm(matrix, psi, s, *tolerance),
        }
    }
}

/// One Lanczos approximation of `e^{-i A s} v` and its a-posteriori error estimate.
fn lanczos_step(a: &CsrMatrix, v: &[C64], s: f64) -> Result<(Vec<C64>, f64)> {
    let beta0 = norm(v);
    if beta0 == 0.0 {
        return Ok((v.to_vec(), 0.0));
    }
    let mut basis: Vec<Vec<C64>> = vec![v.iter().map(|z| z / beta0).collect()];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![C64::new(0.0, 0.0); v.len()];
    let mut tail = 0.0;
    for j in 0..KRYLOV_DIM.min(a.dim()) {
        a.matvec_into(&basis[j], &mut w);
        alpha.push(inner(&basis[j], &w).re);
        // full reorthogonalization, twice
        for _ in 0..2 {
            for q in &basis {
                let c = inner(q, &w);
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = norm(&w);
        if b <= 1e-14 * (alpha.iter().fold(0.0f64, |m, x| m.max(x.abs())) + 1.0) {
            tail = 0.0;
            break;
        }
        tail = b;
        if j + 1 == KRYLOV_DIM.min(a.dim()) {
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|z| z / b).collect());
    }
    let k = alpha.len();
    let t = Array2::from_shape_fn((k, k), |(i, j)| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let (theta, q) = eigh_real(t.view())?;
    let y: Vec<C64> = (0..k).map(|i| (0..k).map(|l| C64::from_polar(q[[i, l]] * q[[0, l]], -theta[l] * s)).sum()).collect();
    let mut out = vec![C64::new(0.0, 0.0); v.len()];
    for (c, q) in y.iter().zip(&basis) {
        out.iter_mut().zip(q).for_each(|(o, x)| *o += c * x * beta0);
    }
    Ok((out, beta0 * tail * y[k - 1].norm()))
}

/// `e^{-i A s} v` by adaptive Lanczos sub-steps with error estimate below `tol` per unit `s`.
pub fn krylov_expm(a: &CsrMatrix, v: &[C64], s: f64, tol: f64) -> Result<Vec<C64>> {
    let total = s.abs();
    let sign = s.signum();
    let mut done = 0.0;
    let mut h = total;
    let mut state = v.to_vec();
    while done < total {
        h = h.min(total - done);
        let (next, err) = lanczos_step(a, &state, sign * h)?;
        if err <= tol * h.max(1e-300) / total.max(1.0) || err <= 1e-15 {
            state = next;
            done += h;
            h *= 1.5;
        } else {
            h *= 0.5;
            if h < total * 1e-10 {
                return Err(Error::Numerical(format!("Krylov propagation did not converge: residual {err:.3e} at step {h:.3e}")));
            }
        }
    }
    Ok(state)
}
