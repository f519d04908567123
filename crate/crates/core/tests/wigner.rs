mod common;

use std::f64::consts::PI;

use common::Lcg;
use ndarray::Array2;
use proptest::prelude::*;
use semiclassical::density_matrix::{DensityMatrix, Operator};
use semiclassical::spectral::{PhaseGrid, SpatialGrid};
use semiclassical::wigner::{weyl_quantize, wigner_transform, wigner_transform_unchecked, PhaseField};
use semiclassical::C64;

fn phase(n: usize, length: f64, hbar: f64) -> PhaseGrid {
    PhaseGrid::for_hbar(SpatialGrid::new(1, n, length).unwrap(), hbar).unwrap()
}

/// Random real field with Fourier content strictly inside `(-n/2, n/2)` on both axes.
fn band_limited(grid: &PhaseGrid, hbar: f64, rng: &mut Lcg, modes: usize) -> PhaseField {
    let n = grid.n_v();
    let mut terms = Vec::new();
    for q in 0..modes {
        for r in 0..modes {
            for s in [1.0, -1.0] {
                terms.push((q as f64, s * r as f64, rng.next(), 2.0 * PI * rng.next()));
            }
        }
    }
    PhaseField::from_fn(grid.clone(), hbar, |x, v| {
        let i = x[0] / grid.spatial().spacing();
        let k = (v[0] + grid.v_max()) / grid.dv();
        terms.iter().map(|(q, r, a, p)| a * (2.0 * PI * (q * i + r * k) / n as f64 + p).cos()).sum()
    })
    .unwrap()
}

/// Smooth positive data: spatial cosines times Gaussians in velocity well inside the window.
fn smooth_mixed(grid: &PhaseGrid, hbar: f64) -> PhaseField {
    let bumps = [(0.0, 0.5, 1.0, 0.0, 0.0), (0.0, 0.4, 0.5, 0.3, 0.0), (1.0, 0.4, 0.3, 0.4, 0.7), (3.0, 0.35, 0.2, -0.5, 1.9), (7.0, 0.3, 0.1, 0.2, -0.4)];
    let l = grid.spatial().length();
    let raw = PhaseField::from_fn(grid.clone(), hbar, |x, v| {
        bumps
            .iter()
            .map(|&(q, sigma, amp, v0, phi)| {
                amp * (2.0 * PI * q * x[0] / l + phi).cos() * (-(v[0] - v0).powi(2) / (2.0 * sigma * sigma)).exp()
            })
            .sum()
    })
    .unwrap();
    let m = raw.mass();
    PhaseField::new(grid.clone(), hbar, raw.values().iter().map(|v| v / m).collect()).unwrap()
}

#[test]
fn round_trip_recovers_band_limited_symbol() {
    let hbar = 1.0 / 16.0;
    let grid = phase(128, 2.0 * PI, hbar);
    let f = smooth_mixed(&grid, hbar);
    let start = std::time::Instant::now();
    let back = wigner_transform(&weyl_quantize(&f).unwrap(), &grid).unwrap();
    let err = back.max_abs_diff(&f);
    assert!(err <= 1e-10, "round trip error {err:.3e}");
    assert!(start.elapsed().as_secs_f64() < 5.0);

    let mut rng = Lcg(11);
    let g = band_limited(&grid, hbar, &mut rng, 20);
    let back = wigner_transform_unchecked(&weyl_quantize(&g).unwrap(), &grid).unwrap();
    let scale = g.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(back.max_abs_diff(&g) <= 1e-12 * scale);
}

#[test]
fn round_trip_in_two_dimensions() {
    let hbar = 0.25;
    let grid = PhaseGrid::for_hbar(SpatialGrid::new(2, 32, 2.0 * PI).unwrap(), hbar).unwrap();
    let f = PhaseField::from_fn(grid.clone(), hbar, |x, v| {
        (1.0 + 0.3 * (x[0] + 2.0 * x[1]).cos() + 0.2 * (3.0 * x[1]).sin()) * (-(v[0] * v[0] + (v[1] - 0.2).powi(2)) / 0.72).exp()
    })
    .unwrap();
    let rho = weyl_quantize(&f).unwrap();
    assert!(rho.hermiticity_defect() < 1e-13);
    let back = wigner_transform_unchecked(&rho, &grid).unwrap();
    assert!(back.max_abs_diff(&f) < 1e-10, "2d round trip error {:.3e}", back.max_abs_diff(&f));
}

#[test]
fn operator_round_trip_without_nyquist_coherence() {
    // Q W is a projection; it keeps even offsets and drops x-Nyquist content of odd ones
    let hbar = 1.0 / 8.0;
    let grid = phase(32, 1.0, hbar);
    let sg = grid.spatial().clone();
    let mut rng = Lcg(5);
    let mut k = Array2::<C64>::zeros((32, 32));
    for a in 0..32 {
        for b in 0..=a {
            let off = sg.min_image(a, b)[0];
            if off.abs() >= 10 {
                continue;
            }
            let z = if a == b { C64::new(rng.next(), 0.0) } else { rng.complex() };
            k[[a, b]] = z;
            k[[b, a]] = z.conj();
        }
    }
    let rho = Operator::new(sg.clone(), hbar, k).unwrap();
    let once = weyl_quantize(&wigner_transform_unchecked(&rho, &grid).unwrap()).unwrap();
    let twice = weyl_quantize(&wigner_transform_unchecked(&once, &grid).unwrap()).unwrap();
    let diff = (once.kernel() - twice.kernel()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    assert!(diff < 1e-12, "Q W is not a projection: {diff:.3e}");
    let even_diff = (0..32)
        .flat_map(|a| (0..32).map(move |b| (a, b)))
        .filter(|&(a, b)| sg.min_image(a, b)[0] % 2 == 0)
        .fold(0.0f64, |m, (a, b)| m.max((once.kernel()[[a, b]] - rho.kernel()[[a, b]]).norm()));
    assert!(even_diff < 1e-12, "even offsets must survive exactly: {even_diff:.3e}");
}

#[test]
fn weyl_parseval_on_random_fields() {
    let mut rng = Lcg(2024);
    for trial in 0..20 {
        let hbar = [0.25, 0.125, 1.0 / 16.0][trial % 3];
        let n = [16, 32, 64][trial % 3];
        let grid = phase(n, 1.0 + 0.2 * trial as f64, hbar);
        let f = band_limited(&grid, hbar, &mut rng, n / 2 - 1);
        let rho = weyl_quantize(&f).unwrap();
        let lhs = rho.schatten_norm(2.0).unwrap();
        let rhs = f.l2_norm();
        assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1.0), "trial {trial}: {lhs} vs {rhs}");
        // independent route: Hilbert-Schmidt sum of the kernel
        let hs: f64 = rho.kernel().iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.spatial().cell_volume().powi(2);
        assert!(((hbar * hs).sqrt() - rhs).abs() <= 1e-10 * rhs.max(1.0));
    }
}

#[test]
fn gaussian_wave_packet_matches_closed_form() {
    // phi(x) = (pi s^2)^{-1/4} exp(-(x-x0)^2 / 2 s^2 + i p0 x / hbar) has
    // W = exp(-(x-x0)^2/s^2 - s^2 (v-p0)^2/hbar^2) / pi
    let hbar = 1.0 / 16.0;
    let l = 2.0 * PI;
    let grid = phase(128, l, hbar);
    let sg = grid.spatial().clone();
    let (x0, s, p0) = (3.0, 0.3, 4.0 * 2.0 * PI * hbar / l);
    let phi: Vec<C64> = (0..128)
        .map(|i| {
            let x = sg.point(i)[0];
            (-3..=3)
                .map(|m| {
                    let y = x - x0 + m as f64 * l;
                    C64::from_polar((PI * s * s).powf(-0.25) * (-(y * y) / (2.0 * s * s)).exp(), p0 * x / hbar)
                })
                .sum()
        })
        .collect();
    let kernel = Array2::from_shape_fn((128, 128), |(a, b)| phi[a] * phi[b].conj());
    let rho = Operator::new(sg.clone(), hbar, kernel).unwrap();
    let w = wigner_transform(&rho, &grid).unwrap();
    let exact = PhaseField::from_fn(grid.clone(), hbar, |x, v| {
        let g: f64 = (-3..=3).map(|m| (-(x[0] - x0 + m as f64 * l).powi(2) / (s * s)).exp()).sum();
        g * (-(s * s) * (v[0] - p0).powi(2) / (hbar * hbar)).exp() / PI
    })
    .unwrap();
    let err = w.max_abs_diff(&exact);
    assert!(err < 1e-6, "Wigner of wave packet off by {err:.3e}");
    // int W = hbar tr rho
    assert!((w.mass() - hbar * rho.trace().re).abs() < 1e-10);
    // Weyl quantization of the closed form reproduces the projector
    let q = weyl_quantize(&exact).unwrap();
    let kerr = (q.kernel() - rho.kernel()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    assert!(kerr < 1e-6, "Q of closed form off by {kerr:.3e}");
}

#[test]
fn velocity_marginal_is_spatial_density() {
    let hbar = 1.0 / 16.0;
    let grid = phase(64, 2.0 * PI, hbar);
    let f = smooth_mixed(&grid, hbar);
    let rho = weyl_quantize(&f).unwrap();
    let density = rho.diagonal_density();
    let nv = grid.n_v();
    for i in 0..64 {
        let marginal: f64 = f.values()[i * nv..(i + 1) * nv].iter().sum::<f64>() * grid.dv();
        assert!((marginal - density[i]).abs() < 1e-12);
    }
    assert!((hbar * rho.trace().re - f.mass()).abs() < 1e-12);
}

#[test]
fn moyal_commutator_approaches_poisson_bracket() {
    // Q(1) = 2 pi, so [Q(f), Q(g)] = 2 pi i hbar Q({f, g}) + O(hbar^3) for smooth symbols
    let l = 2.0 * PI;
    let mut errors = Vec::new();
    for hbar in [1.0 / 8.0, 1.0 / 16.0] {
        let n = (16.0 / hbar) as usize / 2;
        let grid = phase(n, l, hbar);
        let sigma = 0.7;
        let f = |x: f64, v: f64| (x.cos() + 0.5) * (-(v * v) / (2.0 * sigma * sigma)).exp();
        let g = |x: f64, v: f64| (2.0 * x).sin() * (-((v - 0.3).powi(2)) / (2.0 * sigma * sigma)).exp();
        let bracket = |x: f64, v: f64| {
            let fx = -x.sin() * (-(v * v) / (2.0 * sigma * sigma)).exp();
            let fv = -(x.cos() + 0.5) * v / (sigma * sigma) * (-(v * v) / (2.0 * sigma * sigma)).exp();
            let gx = 2.0 * (2.0 * x).cos() * (-((v - 0.3).powi(2)) / (2.0 * sigma * sigma)).exp();
            let gv = -(2.0 * x).sin() * (v - 0.3) / (sigma * sigma) * (-((v - 0.3).powi(2)) / (2.0 * sigma * sigma)).exp();
            fx * gv - fv * gx
        };
        let qf = weyl_quantize(&PhaseField::from_fn(grid.clone(), hbar, |x, v| f(x[0], v[0])).unwrap()).unwrap();
        let qg = weyl_quantize(&PhaseField::from_fn(grid.clone(), hbar, |x, v| g(x[0], v[0])).unwrap()).unwrap();
        let qb = weyl_quantize(&PhaseField::from_fn(grid.clone(), hbar, |x, v| bracket(x[0], v[0])).unwrap()).unwrap();
        let comm = qf.commutator(&qg).unwrap().scaled(1.0 / (2.0 * PI * hbar));
        let remainder = comm.sub(&Operator::new(qb.grid().clone(), hbar, qb.kernel().mapv(|z| z * C64::new(0.0, 1.0))).unwrap()).unwrap();
        let rel = remainder.schatten_norm(2.0).unwrap() / qb.schatten_norm(2.0).unwrap();
        errors.push(rel);
    }
    let ratio = errors[0] / errors[1];
    assert!(errors[1] < 1e-2, "Moyal remainder {errors:?}");
    assert!(ratio > 3.0, "remainder should fall like hbar^2: {errors:?}");
}

#[test]
fn resolution_error_when_mass_reaches_the_velocity_edge() {
    let hbar = 1.0 / 16.0;
    let grid = phase(32, 2.0 * PI, hbar);
    let f = PhaseField::from_fn(grid.clone(), hbar, |_, v| (-(v[0] - grid.v_max() * 0.95).powi(2) / 0.01).exp()).unwrap();
    let rho = weyl_quantize(&f).unwrap();
    let err = wigner_transform(&rho, &grid).unwrap_err();
    assert!(matches!(err, semiclassical::Error::Resolution(_)));
    assert!(wigner_transform_unchecked(&rho, &grid).is_ok());
}

#[test]
fn incompatible_velocity_grid_is_rejected() {
    let hbar = 1.0 / 16.0;
    let sg = SpatialGrid::new(1, 32, 2.0 * PI).unwrap();
    let bad = PhaseGrid::new(sg, 32, 3.0).unwrap();
    let f = PhaseField::zeros(bad, hbar);
    assert!(matches!(weyl_quantize(&f), Err(semiclassical::Error::Contract(_))));
}

#[test]
fn weyl_quantized_gaussian_state_is_a_density_matrix() {
    let hbar = 1.0 / 16.0;
    let grid = phase(64, 2.0 * PI, hbar);
    let f = smooth_mixed(&grid, hbar);
    let (dm, report) = DensityMatrix::from_phase_symbol_clipped(&f).unwrap();
    assert!((dm.normalization() - 1.0).abs() < 1e-8);
    assert!(report.correction_l1 < 1e-2);
    let density = dm.spatial_density();
    let total: f64 = density.iter().sum::<f64>() * grid.spatial().spacing();
    assert!((total - 1.0).abs() < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quantization_is_linear_and_hermitian(seed in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let hbar = 0.125;
        let grid = phase(16, 1.0, hbar);
        let mut rng = Lcg(seed);
        let f = band_limited(&grid, hbar, &mut rng, 7);
        let g = band_limited(&grid, hbar, &mut rng, 7);
        let combo = PhaseField::new(grid.clone(), hbar, f.values().iter().zip(g.values()).map(|(x, y)| a * x + b * y).collect()).unwrap();
        let lhs = weyl_quantize(&combo).unwrap();
        let rhs = weyl_quantize(&f).unwrap().scaled(a).add(&weyl_quantize(&g).unwrap().scaled(b)).unwrap();
        let diff = (lhs.kernel() - rhs.kernel()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        prop_assert!(diff < 1e-11);
        prop_assert!(lhs.hermiticity_defect() < 1e-13);
    }

    #[test]
    fn wigner_of_hermitian_kernel_is_real_and_inverts(seed in 0u64..1000) {
        let hbar = 0.125;
        let grid = phase(16, 1.0, hbar);
        let mut rng = Lcg(seed);
        let f = band_limited(&grid, hbar, &mut rng, 7);
        let back = wigner_transform_unchecked(&weyl_quantize(&f).unwrap(), &grid).unwrap();
        prop_assert!(back.max_abs_diff(&f) < 1e-12);
    }
}

#[test]
fn gaussian_projector_matches_quadrature_of_defining_integral() {
    // g(x) = (pi hbar)^{-1/4} exp(-(x - x0)^2 / 2 hbar), f = (2 pi)^{-1} int e^{-i v y / hbar} g(x + y/2) g(x - y/2) dy
    let hbar = 1.0 / 16.0;
    let l = 2.0 * PI;
    let grid = phase(128, l, hbar);
    let sg = grid.spatial().clone();
    let x0 = PI;
    let g = |x: f64| (PI * hbar).powf(-0.25) * (-(x - x0).powi(2) / (2.0 * hbar)).exp();
    let kernel = Array2::from_shape_fn((128, 128), |(a, b)| C64::new(g(sg.point(a)[0]) * g(sg.point(b)[0]), 0.0));
    let rho = Operator::new(sg.clone(), hbar, kernel).unwrap();
    let w = wigner_transform(&rho, &grid).unwrap();
    let mut worst = 0.0f64;
    for i in (40..90).step_by(7) {
        for k in (30..100).step_by(5) {
            let (x, v) = (sg.point(i)[0], grid.velocity(k));
            let re = common::integrate(|y| (v * y / hbar).cos() * g(x + y / 2.0) * g(x - y / 2.0), -4.0, 4.0, 200);
            worst = worst.max((w.at(i, k) - re / (2.0 * PI)).abs());
        }
    }
    assert!(worst < 1e-6, "quadrature mismatch {worst:.3e}");
}
