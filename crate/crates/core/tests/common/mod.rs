#![allow(dead_code)]

use std::f64::consts::PI;

use semiclassical::C64;

const GL_X: [f64; 5] = [0.1488743389816312, 0.4333953941292472, 0.6794095682990244, 0.8650633666889845, 0.9739065285171717];
const GL_W: [f64; 5] = [0.2955242247147529, 0.2692667193099963, 0.2190863625159820, 0.1494513491505806, 0.0666713443086881];

/// Composite 10-point Gauss-Legendre quadrature on `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let w = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * w;
        let half = w / 2.0;
        for k in 0..5 {
            acc += GL_W[k] * half * (f(mid - half * GL_X[k]) + f(mid + half * GL_X[k]));
        }
    }
    acc
}

/// Deterministic pseudo-random numbers in [-0.5, 0.5).
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    }

    pub fn complex(&mut self) -> C64 {
        C64::new(self.next(), self.next())
    }
}

pub fn gaussian(x: f64, sigma: f64) -> f64 {
    (-(x * x) / (2.0 * sigma * sigma)).exp() / ((2.0 * PI).sqrt() * sigma)
}

/// Periodic Gaussian on [0, L): sum over a few images.
pub fn periodic_gaussian(x: f64, x0: f64, sigma: f64, length: f64) -> f64 {
    (-3..=3).map(|m| gaussian(x - x0 + m as f64 * length, sigma)).sum()
}

use ndarray::Array2;
use semiclassical::spectral::SpatialGrid;

/// Dense matrix of `-c hbar^2 d^2/dx^2` on a 1-d periodic grid, from the explicit DFT sum.
pub fn dense_kinetic(grid: &SpatialGrid, hbar: f64, c: f64) -> Array2<C64> {
    let n = grid.n();
    let l = grid.length();
    Array2::from_shape_fn((n, n), |(a, b)| {
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..n {
            let m = if j >= n / 2 { j as f64 - n as f64 } else { j as f64 };
            let k = 2.0 * PI * m / l;
            acc += C64::from_polar(c * hbar * hbar * k * k / n as f64, k * (a as f64 - b as f64) * grid.spacing());
        }
        acc
    })
}

/// Lowest `count` eigenvectors of `-hbar^2 d^2/2 + u(x)`, normalized for the grid inner product.
pub fn bound_orbitals(grid: &SpatialGrid, hbar: f64, count: usize, u: impl Fn(f64) -> f64) -> Vec<Vec<C64>> {
    let mut h = dense_kinetic(grid, hbar, 0.5);
    for i in 0..grid.n() {
        h[[i, i]] += u(grid.point(i)[0]);
    }
    let (_, vecs) = semiclassical::linalg::eigh(h.view()).unwrap();
    let w = grid.spacing().sqrt();
    (0..count).map(|j| vecs.column(j).iter().map(|z| z / w).collect()).collect()
}

/// Cubic B-spline as the convolution-power piecewise polynomial on `[-2, 2]`.
pub fn cubic_bspline(t: f64) -> f64 {
    let p = |x: f64| if x > 0.0 { x * x * x } else { 0.0 };
    (p(t + 2.0) - 4.0 * p(t + 1.0) + 6.0 * p(t) - 4.0 * p(t - 1.0) + p(t - 2.0)) / 6.0
}
