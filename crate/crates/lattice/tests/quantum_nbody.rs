use lattice::quantum_nbody::*;
use lattice::sparse::{inner, norm, Propagator};
use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use semiclassical::interaction::KernelSign;
use semiclassical::linalg::{eigh, eigvalsh};
use semiclassical::C64;
use std::f64::consts::PI;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn max_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    (a - b).iter().fold(0.0, |m, z| m.max(z.norm()))
}

fn model(m: usize, strength: f64) -> LatticeModel {
    LatticeModel::power_law(m, 2.0 * PI, KernelSign::Repulsive, 0.3, 0.05, strength).unwrap()
}

fn plane_waves(m: usize, ks: &[i64]) -> Vec<Vec<C64>> {
    ks.iter()
        .map(|k| (0..m).map(|x| C64::from_polar(1.0 / (m as f64).sqrt(), 2.0 * PI * (*k as f64) * x as f64 / m as f64)).collect())
        .collect()
}

/// Dense `2^m`-dimensional annihilators as Kronecker products `Z x .. x Z x a x 1 x .. x 1`
/// with site 0 as the least significant bit.
fn kron_annihilators(m: usize) -> Vec<Array2<C64>> {
    let dim = 1 << m;
    (0..m)
        .map(|site| {
            let mut op = Array2::<C64>::zeros((dim, dim));
            for col in 0..dim {
                if col >> site & 1 == 1 {
                    let mut sign = 1.0;
                    for lower in 0..site {
                        if col >> lower & 1 == 1 {
                            sign = -sign;
                        }
                    }
                    op[[col ^ (1 << site), col]] = c(sign);
                }
            }
            op
        })
        .collect()
}

#[test]
fn basis_is_ascending_and_ranked() {
    let basis = FockBasis::new(8, 3).unwrap();
    assert_eq!(basis.dim() as u64, binomial(8, 3));
    assert!(basis.states().windows(2).all(|w| w[0] < w[1]));
    assert!(basis.states().iter().all(|s| s.count_ones() == 3));
    for (i, &s) in basis.states().iter().enumerate() {
        assert_eq!(basis.index(s), i);
    }
    assert!(matches!(FockBasis::new(30, 2), Err(semiclassical::Error::Capacity(_))));
    assert!(matches!(FockBasis::new(4, 5), Err(semiclassical::Error::Contract(_))));
}

#[test]
fn single_particle_reduces_to_one_body_matrix() {
    let model = model(6, 1.0);
    let h = build_hamiltonian(&model, 1).unwrap().to_dense();
    assert!(max_diff(&h, &model.kinetic(1.0)) == 0.0);
}

#[test]
fn free_pair_energies_are_sums_of_distinct_levels() {
    let model = LatticeModel::free(4, 2.0 * PI).unwrap();
    let one = eigvalsh(model.kinetic(0.5).view()).unwrap();
    let mut sums: Vec<f64> = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j))).map(|(i, j)| one[i] + one[j]).collect();
    sums.sort_by(f64::total_cmp);
    let many = eigvalsh(build_hamiltonian(&model, 2).unwrap().to_dense().view()).unwrap();
    for (a, b) in sums.iter().zip(&many) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn interacting_pair_matches_first_quantized_oracle() {
    let m = 4;
    let model = model(m, 2.0);
    let t = model.kinetic(0.5);
    // 16x16 two-particle Hamiltonian on |x> (x) |y>
    let mut h1 = Array2::<C64>::zeros((m * m, m * m));
    for x in 0..m {
        for y in 0..m {
            for z in 0..m {
                h1[[x * m + y, z * m + y]] += t[[x, z]];
                h1[[x * m + y, x * m + z]] += t[[y, z]];
            }
            h1[[x * m + y, x * m + y]] += c(0.5 * model.pair()[[x, y]]);
        }
    }
    let basis = FockBasis::new(m, 2).unwrap();
    // a+_p a+_q |0>, p < q, corresponds to (|p q> - |q p>) / sqrt 2
    let mut iso = Array2::<C64>::zeros((m * m, basis.dim()));
    for (k, &mask) in basis.states().iter().enumerate() {
        let p = mask.trailing_zeros() as usize;
        let q = 31 - mask.leading_zeros() as usize;
        iso[[p * m + q, k]] = c(0.5f64.sqrt());
        iso[[q * m + p, k]] = c(-(0.5f64.sqrt()));
    }
    let projected = iso.t().mapv(|z| z.conj()).dot(&h1).dot(&iso);
    let h = build_hamiltonian(&model, 2).unwrap();
    assert!(h.hermiticity_defect() == 0.0);
    assert!(max_diff(&projected, &h.to_dense()) < 1e-13);
}

#[test]
fn one_rdm_of_slater_state_is_the_orbital_projector() {
    let m = 8;
    let orbitals = plane_waves(m, &[0, 1, -1]);
    let psi = FermionState::slater(m, &orbitals).unwrap();
    let rdm = one_rdm(&psi);
    let expected = Array2::from_shape_fn((m, m), |(x, y)| orbitals.iter().map(|f| f[x] * f[y].conj()).sum::<C64>());
    assert!(max_diff(&rdm.gamma, &expected) < 1e-13);
    assert!((rdm.trace() - 3.0).abs() < 1e-13);
    assert!((rdm.hbar * rdm.trace() - 1.0).abs() < 1e-13);
    assert!(rdm.purity_defect() < 1e-13);
}

#[test]
fn one_rdm_of_site_state_is_a_site_projector() {
    let psi = FermionState::sites(5, &[3]).unwrap();
    let gamma = one_rdm(&psi).gamma;
    for x in 0..5 {
        for y in 0..5 {
            let expected = if x == 3 && y == 3 { 1.0 } else { 0.0 };
            assert_eq!(gamma[[x, y]], c(expected));
        }
    }
}

#[test]
fn one_rdm_matches_full_fock_partial_trace() {
    let (m, n) = (6, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let psi = FermionState::random(m, n, &mut rng).unwrap();
    let mut full = vec![c(0.0); 1 << m];
    for (k, &mask) in psi.basis().states().iter().enumerate() {
        full[mask as usize] = psi.amplitudes()[k];
    }
    let a = kron_annihilators(m);
    let rdm = one_rdm(&psi);
    for x in 0..m {
        for y in 0..m {
            let op = a[y].t().mapv(|z| z.conj()).dot(&a[x]);
            let v = op.dot(&ndarray::Array1::from(full.clone()));
            let expect = inner(&full, v.as_slice().unwrap());
            assert!((rdm.gamma[[x, y]] - expect).norm() < 1e-12);
        }
    }
    let eig = rdm.eigenvalues().unwrap();
    assert!(eig.iter().all(|l| *l > -1e-12 && *l < 1.0 + 1e-12));
    assert!((rdm.trace() - n as f64).abs() < 1e-12);
}

#[test]
fn k_rdm_of_order_one_is_the_one_rdm() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let psi = FermionState::random(6, 3, &mut rng).unwrap();
    let k1 = k_rdm(&psi, 1).unwrap();
    assert!(max_diff(&k1.data, &one_rdm(&psi).gamma) < 1e-14);
    assert!(matches!(k_rdm(&psi, 4), Err(semiclassical::Error::Contract(_))));
}

#[test]
fn wick_rule_separates_slater_from_entangled_states() {
    let m = 6;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // orthonormal orbitals from a random Hermitian matrix
    let herm = Array2::from_shape_fn((m, m), |(i, j)| {
        let z = C64::new(((i * 7 + j * 3) % 5) as f64, ((i + 2 * j) % 3) as f64 - 1.0);
        if i == j {
            c(z.re)
        } else if i < j {
            z
        } else {
            C64::new(((j * 7 + i * 3) % 5) as f64, -(((j + 2 * i) % 3) as f64 - 1.0))
        }
    });
    let (_, vecs) = eigh(herm.view()).unwrap();
    for n in 2..=3 {
        let orbitals: Vec<Vec<C64>> = (0..n).map(|j| vecs.column(j).to_vec()).collect();
        let slater = FermionState::slater(m, &orbitals).unwrap();
        let gamma = one_rdm(&slater).gamma;
        for k in 2..=n {
            let residual = wick_residual(&gamma, &k_rdm(&slater, k).unwrap());
            assert!(residual < 1e-10, "slater n={n} k={k}: {residual:.3e}");
        }
        let random = FermionState::random(m, n, &mut rng).unwrap();
        let residual = wick_residual(&one_rdm(&random).gamma, &k_rdm(&random, 2).unwrap());
        assert!(residual > 1e-6, "random n={n}: {residual:.3e}");
    }
}

#[test]
fn propagation_is_unitary_and_conserves_energy() {
    let model = model(8, 1.0);
    let n = 3;
    let h = build_hamiltonian(&model, n).unwrap();
    let prop = Propagator::new(&h).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let psi = FermionState::random(8, n, &mut rng).unwrap();
    let hbar = LatticeModel::hbar(n);
    assert_eq!(propagate(&psi, &prop, hbar, 0.0).unwrap(), psi);
    let forward = propagate(&psi, &prop, hbar, 0.7).unwrap();
    let back = propagate(&forward, &prop, hbar, -0.7).unwrap();
    let err = psi.amplitudes().iter().zip(back.amplitudes()).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    assert!(err < 1e-10);
    let e0 = psi.energy(&h);
    for t in [0.1, 0.5, 1.0] {
        let e = propagate(&psi, &prop, hbar, t).unwrap().energy(&h);
        assert!((e - e0).abs() < 1e-10);
    }
}

#[test]
fn krylov_agrees_with_dense_propagation() {
    let model = model(10, 1.0);
    let h = build_hamiltonian(&model, 3).unwrap();
    let dense = Propagator::new(&h).unwrap();
    let krylov = Propagator::Krylov { matrix: h.clone(), tolerance: 1e-12 };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let psi = FermionState::random(10, 3, &mut rng).unwrap();
    let a = dense.apply(psi.amplitudes(), 25.0).unwrap();
    let b = krylov.apply(psi.amplitudes(), 25.0).unwrap();
    let err = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).norm()));
    assert!(err < 1e-9, "{err:.3e}");
    assert!((norm(&b) - 1.0).abs() < 1e-10);
}

#[test]
fn free_flow_keeps_slater_states_pure() {
    let m = 10;
    let model = LatticeModel::free(m, 2.0 * PI).unwrap();
    let orbitals = confined_orbitals(&model, 3, 1.0).unwrap();
    let psi = FermionState::slater(m, &orbitals).unwrap();
    let h = build_hamiltonian(&model, 3).unwrap();
    let prop = Propagator::new(&h).unwrap();
    for t in [0.2, 0.6, 1.0] {
        let rdm = one_rdm(&propagate(&psi, &prop, LatticeModel::hbar(3), t).unwrap());
        assert!(rdm.purity_defect() < 1e-10);
    }
}

#[test]
fn lattice_hf_is_exact_without_interaction() {
    let model = LatticeModel::free(12, 2.0 * PI).unwrap();
    let study = NbodyStudy { t_end: 0.5, dt: 5e-3, snapshots: 5, confinement: 1.0 };
    for n in [2, 3] {
        let cmp = nbody_vs_hf(&model, n, &study).unwrap();
        assert_eq!(cmp.distances[0], 0.0);
        assert!(cmp.distances.iter().all(|d| *d < 1e-10), "{:?}", cmp.distances);
        assert!((cmp.times.last().unwrap() - 0.5).abs() < 1e-12);
    }
}

#[test]
fn lattice_hf_conserves_energy_and_spectrum() {
    let model = model(10, 2.0);
    let hf = LatticeHf::for_model(&model, 3);
    let orbitals = confined_orbitals(&model, 3, 1.0).unwrap();
    let mut gamma = Array2::from_shape_fn((10, 10), |(x, y)| orbitals.iter().map(|f| f[x] * f[y].conj()).sum::<C64>());
    let e0 = hf.energy(&gamma);
    for _ in 0..100 {
        gamma = hf.step(&gamma, 5e-3).unwrap();
    }
    assert!((hf.energy(&gamma) - e0).abs() < 1e-9);
    let purity = (gamma.dot(&gamma) - &gamma).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    assert!(purity < 1e-12);
}

#[test]
fn comparison_at_time_zero_vanishes_with_interaction() {
    let model = model(8, 1.0);
    let study = NbodyStudy { t_end: 0.0, ..NbodyStudy::default() };
    let cmp = nbody_vs_hf(&model, 2, &study).unwrap();
    assert_eq!(cmp.distances, vec![0.0]);
}

#[test]
fn invalid_states_are_rejected() {
    let basis = FockBasis::new(4, 2).unwrap();
    assert!(matches!(FermionState::new(basis.clone(), vec![c(1.0); basis.dim()]), Err(semiclassical::Error::Validation(_))));
    assert!(matches!(FermionState::new(basis, vec![c(1.0)]), Err(semiclassical::Error::Contract(_))));
    assert!(FermionState::sites(4, &[1, 1]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn creation_undoes_annihilation(mask in 0u32..(1 << 12), site in 0usize..12) {
        if let Some((s1, lowered)) = annihilate(mask, site) {
            let (s2, back) = create(lowered, site).unwrap();
            prop_assert_eq!(back, mask);
            prop_assert_eq!(s1 * s2, 1.0);
        } else {
            prop_assert!(create(mask, site).is_some());
        }
    }

    #[test]
    fn hamiltonian_is_hermitian_and_trace_normalized(m in 4usize..9, n in 1usize..4, strength in 0.0f64..3.0, seed in 0u64..1000) {
        let model = model(m, strength);
        let h = build_hamiltonian(&model, n).unwrap();
        prop_assert!(h.hermiticity_defect() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = FermionState::random(m, n, &mut rng).unwrap();
        let rdm = one_rdm(&psi);
        prop_assert!((rdm.trace() - n as f64).abs() < 1e-12);
        prop_assert!(rdm.eigenvalues().unwrap().iter().all(|l| *l > -1e-12 && *l < 1.0 + 1e-12));
    }
}
