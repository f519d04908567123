//! Doubled Fock space over `m` modes: left modes `0..m`, right modes `m..2m`, ordered
//! Jordan-Wigner operators, Araki-Wyss purification and the Bogoliubov rotation onto it.
//!
//! Smeared operators follow `a(f) = sum_y conj(f(y)) a_y` and `a+(f) = sum_y f(y) a+_y`.

use ndarray::{Array1, Array2};
use semiclassical::linalg::{eigh, eigvalsh, hermitian_part, hermiticity_defect, spectral_function};
use semiclassical::{Error, Result, C64};

use crate::quantum_nbody::{annihilate, KRdm, LatticeHf, LatticeModel};
use crate::sparse::{inner, norm, CsrMatrix, Propagator};

pub const MAX_MODES: usize = 7;
/// Largest `m` accepted by [`fluctuation_number`].
pub const MAX_DYNAMIC_MODES: usize = 6;
const SPECTRUM_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Annihilation operators for the `2m` modes of the doubled space.
#[derive(Debug, Clone)]
pub struct ModeSystem {
    m: usize,
    annihilators: Vec<CsrMatrix>,
    creators: Vec<CsrMatrix>,
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

impl ModeSystem {
    /// Builds the operators and checks the anticommutation relations to 1e-13.
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 || m > MAX_MODES {
            return Err(Error::Capacity(format!("mode count must lie in 1..={MAX_MODES}, got {m}")));
        }
        let dim = 1usize << (2 * m);
        let annihilators: Vec<CsrMatrix> = (0..2 * m)
            .map(|mode| {
                let entries = (0..dim as u32)
                    .filter_map(|mask| annihilate(mask, mode).map(|(s, out)| (out as usize, mask as usize, C64::new(s, 0.0))))
                    .collect();
                CsrMatrix::from_triplets(dim, entries)
            })
            .collect();
        let creators = annihilators.iter().map(CsrMatrix::adjoint).collect();
        let system = Self { m, annihilators, creators };
        let defect = system.car_defect();
        if defect > 1e-13 {
            return Err(Error::Validation(format!("anticommutation relations violated by {defect:.3e}")));
        }
        Ok(system)
    }

    pub fn modes(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        1 << (2 * self.m)
    }

    fn index(&self, side: Side, x: usize) -> usize {
        match side {
            Side::Left => x,
            Side::Right => self.m + x,
        }
    }

    pub fn a(&self, side: Side, x: usize) -> &CsrMatrix {
        &self.annihilators[self.index(side, x)]
    }

    pub fn a_dag(&self, side: Side, x: usize) -> &CsrMatrix {
        &self.creators[self.index(side, x)]
    }

    /// Largest entry of `{a_i, a+_j} - delta_ij` and `{a_i, a_j}` over all mode pairs.
    pub fn car_defect(&self) -> f64 {
        let id = CsrMatrix::identity(self.dim());
        let mut worst: f64 = 0.0;
        for i in 0..2 * self.m {
            for j in 0..2 * self.m {
                let ai = &self.annihilators[i];
                let mixed = ai.matmul(&self.creators[j]).combine(one(), &self.creators[j].matmul(ai), one());
                let mixed = if i == j { mixed.combine(one(), &id, -one()) } else { mixed };
                let aj = &self.annihilators[j];
                let pure = ai.matmul(aj).combine(one(), &aj.matmul(ai), one());
                worst = worst.max(mixed.max_abs()).max(pure.max_abs());
            }
        }
        worst
    }

    /// `a_side(f)`.
    pub fn a_of(&self, side: Side, f: &[C64]) -> CsrMatrix {
        self.smeared(side, f, true)
    }

    /// `a+_side(f)`.
    pub fn a_dag_of(&self, side: Side, f: &[C64]) -> CsrMatrix {
        self.smeared(side, f, false)
    }

    fn smeared(&self, side: Side, f: &[C64], annihilation: bool) -> CsrMatrix {
        let entries = (0..self.m)
            .flat_map(|y| {
                let (op, c) = if annihilation { (self.a(side, y), f[y].conj()) } else { (self.a_dag(side, y), f[y]) };
                op.triplets().map(move |(r, col, v)| (r, col, v * c)).collect::<Vec<_>>()
            })
            .collect();
        CsrMatrix::from_triplets(self.dim(), entries)
    }

    /// `dGamma_side(J) = sum J(x, y) a+_{x,side} a_{y,side}`.
    pub fn second_quantize(&self, j: &Array2<C64>, side: Side) -> Result<CsrMatrix> {
        self.check_square(j)?;
        let mut entries = Vec::new();
        for x in 0..self.m {
            for y in 0..self.m {
                if j[[x, y]] == zero() {
                    continue;
                }
                let term = self.a_dag(side, x).matmul(self.a(side, y));
                entries.extend(term.triplets().map(|(r, c, v)| (r, c, v * j[[x, y]])));
            }
        }
        Ok(CsrMatrix::from_triplets(self.dim(), entries))
    }

    /// `sum_{x<y} pair(x, y) n_{x,side} n_{y,side}`.
    pub fn pair_interaction(&self, pair: &Array2<f64>, side: Side) -> CsrMatrix {
        let entries = (0..self.dim() as u32)
            .map(|mask| {
                let mut e = 0.0;
                for x in 0..self.m {
                    for y in x + 1..self.m {
                        if mask & (1 << self.index(side, x)) != 0 && mask & (1 << self.index(side, y)) != 0 {
                            e += pair[[x, y]];
                        }
                    }
                }
                (mask as usize, mask as usize, C64::new(e, 0.0))
            })
            .collect();
        CsrMatrix::from_triplets(self.dim(), entries)
    }

    /// Total number operator `N_l + N_r`.
    pub fn number(&self) -> CsrMatrix {
        let entries = (0..self.dim() as u32).map(|mask| (mask as usize, mask as usize, C64::new(mask.count_ones() as f64, 0.0))).collect();
        CsrMatrix::from_triplets(self.dim(), entries)
    }

    /// `N_l - N_r`.
    pub fn number_imbalance(&self) -> CsrMatrix {
        let left_mask = (1u32 << self.m) - 1;
        let entries = (0..self.dim() as u32)
            .map(|mask| {
                let d = (mask & left_mask).count_ones() as f64 - (mask >> self.m).count_ones() as f64;
                (mask as usize, mask as usize, C64::new(d, 0.0))
            })
            .collect();
        CsrMatrix::from_triplets(self.dim(), entries)
    }

    pub fn vacuum(&self) -> DoubledFockVector {
        let mut amplitudes = vec![zero(); self.dim()];
        amplitudes[0] = one();
        DoubledFockVector { amplitudes }
    }

    /// `gamma(x, y) = <a+_{y,side} a_{x,side}>`.
    pub fn one_rdm(&self, state: &DoubledFockVector, side: Side) -> Array2<C64> {
        let lowered: Vec<Vec<C64>> = (0..self.m).map(|x| self.a(side, x).matvec(&state.amplitudes)).collect();
        Array2::from_shape_fn((self.m, self.m), |(x, y)| inner(&lowered[y], &lowered[x]))
    }

    /// Two-particle reduced density of one side in the layout of [`crate::quantum_nbody::k_rdm`].
    pub fn two_rdm(&self, state: &DoubledFockVector, side: Side) -> KRdm {
        let m = self.m;
        // phi_{(x1,x2)} = a_{x2} a_{x1} psi
        let once: Vec<Vec<C64>> = (0..m).map(|x| self.a(side, x).matvec(&state.amplitudes)).collect();
        let twice: Vec<Vec<C64>> = (0..m * m).map(|t| self.a(side, t % m).matvec(&once[t / m])).collect();
        let data = Array2::from_shape_fn((m * m, m * m), |(x, y)| inner(&twice[y], &twice[x]));
        KRdm { m, k: 2, data }
    }

    fn check_square(&self, op: &Array2<C64>) -> Result<()> {
        if op.dim() != (self.m, self.m) {
            return Err(Error::Contract(format!("expected a {0}x{0} matrix, got {1:?}", self.m, op.dim())));
        }
        Ok(())
    }

    /// Eigen-decomposition of a one-particle density with spectrum in `[0, 1]`, clamped.
    fn density_spectrum(&self, op: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
        self.check_square(op)?;
        let defect = hermiticity_defect(op.view());
        if defect > SPECTRUM_SLACK {
            return Err(Error::Domain(format!("one-particle density is not Hermitian (defect {defect:.3e})")));
        }
        let (vals, vecs) = eigh(hermitian_part(op.view()).view())?;
        if let Some(bad) = vals.iter().find(|l| **l < -SPECTRUM_SLACK || **l > 1.0 + SPECTRUM_SLACK) {
            return Err(Error::Domain(format!("eigenvalue {bad} lies outside [0, 1]")));
        }
        Ok((vals.mapv(|l| l.clamp(0.0, 1.0)), vecs))
    }

    /// Pair creator `a+_r(conj phi) a+_l(phi)` for an eigenvector `phi`. This ordering is the
    /// one for which the rotation obeys `R+ a_{x,l} R = a_l(u_x) - a+_r(conj v_x)`; the
    /// opposite order flips the sign of both conjugation relations.
    fn pair_creator(&self, phi: &[C64]) -> CsrMatrix {
        let conj: Vec<C64> = phi.iter().map(|z| z.conj()).collect();
        self.a_dag_of(Side::Right, &conj).matmul(&self.a_dag_of(Side::Left, phi))
    }

    /// `prod_j (sqrt(1 - l_j) + sqrt(l_j) a+_r(conj phi_j) a+_l(phi_j)) vacuum`.
    pub fn araki_wyss(&self, op: &Array2<C64>) -> Result<DoubledFockVector> {
        let (vals, vecs) = self.density_spectrum(op)?;
        let mut psi = self.vacuum().amplitudes;
        for (j, &l) in vals.iter().enumerate() {
            if l == 0.0 {
                continue;
            }
            let phi = vecs.column(j).to_vec();
            let paired = self.pair_creator(&phi).matvec(&psi);
            let (c, s) = ((1.0 - l).sqrt(), l.sqrt());
            psi.iter_mut().zip(&paired).for_each(|(p, q)| *p = *p * c + q * s);
        }
        DoubledFockVector::new(psi)
    }

    /// `R = exp(sum_j theta_j (P_j - P_j+))` with `P_j` the pair creator of eigenvector `j`
    /// and `sin theta_j = sqrt(l_j)`.
    pub fn bogoliubov_rotation(&self, op: &Array2<C64>) -> Result<CsrMatrix> {
        let (vals, vecs) = self.density_spectrum(op)?;
        let id = CsrMatrix::identity(self.dim());
        let mut r = id.clone();
        for (j, &l) in vals.iter().enumerate() {
            if l == 0.0 {
                continue;
            }
            let p = self.pair_creator(&vecs.column(j).to_vec());
            let g = p.combine(one(), &p.adjoint(), -one());
            // g^3 = -g, so exp(theta g) = 1 + sin(theta) g + (1 - cos(theta)) g^2
            let (s, c) = (l.sqrt(), (1.0 - l).sqrt());
            let factor = id.combine(one(), &g, C64::new(s, 0.0)).combine(one(), &g.matmul(&g), C64::new(1.0 - c, 0.0));
            r = r.matmul(&factor);
        }
        Ok(r)
    }
}

/// Unit vector in the doubled Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubledFockVector {
    amplitudes: Vec<C64>,
}

impl DoubledFockVector {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let nrm = norm(&amplitudes);
        if (nrm - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("doubled Fock vector has norm {nrm}")));
        }
        Ok(Self { amplitudes })
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn expectation(&self, op: &CsrMatrix) -> C64 {
        inner(&self.amplitudes, &op.matvec(&self.amplitudes))
    }
}

/// Square roots `(sqrt(1 - op), sqrt(op))`.
pub fn bogoliubov_blocks(op: &Array2<C64>) -> Result<(Array2<C64>, Array2<C64>)> {
    let (vals, vecs) = eigh(hermitian_part(op.view()).view())?;
    let vals = vals.mapv(|l| l.clamp(0.0, 1.0));
    Ok((spectral_function(&vals, &vecs, |l| C64::new((1.0 - l).sqrt(), 0.0)), spectral_function(&vals, &vecs, |l| C64::new(l.sqrt(), 0.0))))
}

/// Worst entry of `R+ a_{x,l} R - (a_l(u_x) - a+_r(conj v_x))` and
/// `R+ a_{x,r} R - (a_r(conj u_x) + a+_l(v_x))` over all `x`, with `u_x(y) = u(y, x)`.
pub fn conjugation_defect(system: &ModeSystem, op: &Array2<C64>, r: &CsrMatrix) -> Result<f64> {
    let (u, v) = bogoliubov_blocks(op)?;
    let r_dag = r.adjoint();
    let mut worst: f64 = 0.0;
    for x in 0..system.modes() {
        let ux: Vec<C64> = u.column(x).to_vec();
        let vx: Vec<C64> = v.column(x).to_vec();
        let ux_bar: Vec<C64> = ux.iter().map(|z| z.conj()).collect();
        let vx_bar: Vec<C64> = vx.iter().map(|z| z.conj()).collect();
        let left = r_dag.matmul(system.a(Side::Left, x)).matmul(r);
        let left_expected = system.a_of(Side::Left, &ux).combine(one(), &system.a_dag_of(Side::Right, &vx_bar), -one());
        let right = r_dag.matmul(system.a(Side::Right, x)).matmul(r);
        let right_expected = system.a_of(Side::Right, &ux_bar).combine(one(), &system.a_dag_of(Side::Left, &vx), one());
        worst = worst
            .max(left.combine(one(), &left_expected, -one()).max_abs())
            .max(right.combine(one(), &right_expected, -one()).max_abs());
    }
    Ok(worst)
}

/// `max |R+ R - 1|`.
pub fn unitarity_defect(r: &CsrMatrix) -> f64 {
    r.adjoint().matmul(r).combine(one(), &CsrMatrix::identity(r.dim()), -one()).max_abs()
}

/// Fluctuation diagnostic at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluctuationRecord {
    pub time: f64,
    /// `<Psi| N + 1 |Psi>` for `Psi = R+_{op(t)} Phi(t)`.
    pub number_plus_one: f64,
    /// `hbar tr |op_{N:1}(t) - op(t)|`.
    pub distance: f64,
    /// `<N + 1> / sqrt(N)`, the right-hand side with unit constant.
    pub bound: f64,
    /// `bound / distance`.
    pub ratio: f64,
}

/// Settings for [`fluctuation_number`]: the left Hamiltonian is the lattice model with
/// `hbar = 1/N`, coupling `1/N` and `N = tr op_init`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationStudy {
    pub t_end: f64,
    pub dt: f64,
    pub snapshots: usize,
}

pub fn fluctuation_number(model: &LatticeModel, op_init: &Array2<C64>, study: &FluctuationStudy) -> Result<Vec<FluctuationRecord>> {
    let m = model.sites();
    if m > MAX_DYNAMIC_MODES {
        return Err(Error::Capacity(format!("fluctuation dynamics needs m <= {MAX_DYNAMIC_MODES} (dimension 4^m), got {m}")));
    }
    if !(study.dt > 0.0 && study.t_end >= 0.0 && study.snapshots >= 1) {
        return Err(Error::Contract("need dt > 0, t_end >= 0 and at least one snapshot".into()));
    }
    let system = ModeSystem::new(m)?;
    let n = op_init.diag().iter().map(|z| z.re).sum::<f64>();
    if !(n > 0.0) {
        return Err(Error::Domain(format!("initial density must carry particles, trace {n}")));
    }
    let hbar = 1.0 / n;
    let hf = LatticeHf { one_body: model.kinetic(hbar), pair: model.pair().clone(), coupling: 1.0 / n, hbar, exchange: true };
    let side_h = |side: Side| -> Result<CsrMatrix> {
        let t = match side {
            Side::Left => hf.one_body.clone(),
            Side::Right => hf.one_body.mapv(|z| z.conj()),
        };
        Ok(system.second_quantize(&t, side)?.combine(one(), &system.pair_interaction(model.pair(), side), C64::new(hf.coupling, 0.0)))
    };
    let liouvillean = side_h(Side::Left)?.combine(one(), &side_h(Side::Right)?, -one());
    let propagator = Propagator::new(&liouvillean)?;
    let phi0 = system.araki_wyss(op_init)?;
    let number = system.number();
    let record = |t: f64, op: &Array2<C64>| -> Result<FluctuationRecord> {
        let phi = DoubledFockVector::new(propagator.apply(phi0.amplitudes(), t / hbar)?)?;
        let r = system.bogoliubov_rotation(op)?;
        let psi = DoubledFockVector::new(r.adjoint().matvec(phi.amplitudes()))?;
        let number_plus_one = psi.expectation(&number).re + 1.0;
        let diff = system.one_rdm(&phi, Side::Left) - op;
        let distance = hbar * eigvalsh(hermitian_part(diff.view()).view())?.iter().map(|l| l.abs()).sum::<f64>();
        let bound = number_plus_one / n.sqrt();
        Ok(FluctuationRecord { time: t, number_plus_one, distance, bound, ratio: bound / distance })
    };
    let mut op = op_init.clone();
    let mut out = vec![record(0.0, &op)?];
    if study.t_end == 0.0 {
        return Ok(out);
    }
    let steps_per = ((study.t_end / study.snapshots as f64) / study.dt).ceil().max(1.0) as usize;
    let dt = study.t_end / (study.snapshots * steps_per) as f64;
    for s in 1..=study.snapshots {
        for _ in 0..steps_per {
            op = hf.step(&op, dt)?;
        }
        out.push(record((s * steps_per) as f64 * dt, &op)?);
    }
    Ok(out)
}

