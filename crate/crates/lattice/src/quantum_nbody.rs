//! Exact N-fermion dynamics on a periodic one-dimensional lattice.
//!
//! States live in the occupation basis of `N`-subsets of `m` sites, stored as bitmasks in
//! ascending integer order; `|mask> = a+_{p1} ... a+_{pN} |0>` with `p1 < ... < pN`. The
//! Hamiltonian is `sum T_xy a+_x a_y + (1/N) sum_{x<y} K(x - y) n_x n_y` with the periodic
//! second difference `T = hbar^2 / (2 h^2) (2 - shift_+ - shift_-)` and `hbar = 1/N`.

use ndarray::Array2;
use rand::Rng;
use semiclassical::interaction::{free_space_kernel, KernelSign};
use semiclassical::linalg::{commutator, eigh, eigvalsh, hermitian_part, spectral_function};
use semiclassical::{Error, Result, C64};

use crate::sparse::{norm, CsrMatrix, Propagator};

/// Largest sector dimension accepted.
pub const MAX_SECTOR: u64 = 2_000_000;
pub const MAX_SITES: usize = 24;

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// Sign `(-1)^{#occupied sites below site}`.
fn parity_below(mask: u32, site: usize) -> f64 {
    if (mask & ((1u32 << site) - 1)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `a_site |mask>` as `(sign, new mask)`, `None` if the site is empty.
pub fn annihilate(mask: u32, site: usize) -> Option<(f64, u32)> {
    (mask & (1 << site) != 0).then(|| (parity_below(mask, site), mask ^ (1 << site)))
}

/// `a+_site |mask>`, `None` if the site is occupied.
pub fn create(mask: u32, site: usize) -> Option<(f64, u32)> {
    (mask & (1 << site) == 0).then(|| (parity_below(mask, site), mask | (1 << site)))
}

/// Occupation basis of `n` fermions on `m` sites.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockBasis {
    m: usize,
    n: usize,
    states: Vec<u32>,
}

impl FockBasis {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m == 0 || m > MAX_SITES {
            return Err(Error::Capacity(format!("lattice sites must lie in 1..={MAX_SITES}, got {m}")));
        }
        if n > m {
            return Err(Error::Contract(format!("{n} fermions do not fit on {m} sites")));
        }
        let dim = binomial(m, n);
        if dim > MAX_SECTOR {
            return Err(Error::Capacity(format!("sector dimension C({m}, {n}) = {dim} exceeds {MAX_SECTOR}")));
        }
        let mut states = Vec::with_capacity(dim as usize);
        if n == 0 {
            states.push(0);
        } else {
            // Gosper's hack enumerates equal-popcount masks in increasing order
            let mut s: u32 = (1u32 << n) - 1;
            while s < (1u32 << m) {
                states.push(s);
                let c = s & s.wrapping_neg();
                let r = s + c;
                s = (((r ^ s) >> 2) / c) | r;
            }
        }
        Ok(Self { m, n, states })
    }

    pub fn sites(&self) -> usize {
        self.m
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[u32] {
        &self.states
    }

    /// Position of `mask` in the basis (combinatorial rank).
    pub fn index(&self, mask: u32) -> usize {
        let mut rank = 0u64;
        let mut k = 0;
        for site in 0..self.m {
            if mask & (1 << site) != 0 {
                k += 1;
                rank += binomial(site, k);
            }
        }
        rank as usize
    }
}

/// Periodic lattice with spacing `length / m` and a pair interaction table.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeModel {
    m: usize,
    length: f64,
    pair: Array2<f64>,
}

impl LatticeModel {
    /// `pair(r)` is evaluated at the minimal-image distance `r >= 0`.
    pub fn new(m: usize, length: f64, mut pair: impl FnMut(f64) -> f64) -> Result<Self> {
        if m < 3 || m > MAX_SITES {
            return Err(Error::Capacity(format!("lattice sites must lie in 3..={MAX_SITES}, got {m}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Contract(format!("period length must be positive, got {length}")));
        }
        let h = length / m as f64;
        let table = Array2::from_shape_fn((m, m), |(i, j)| {
            let d = (i as i64 - j as i64).rem_euclid(m as i64);
            let d = d.min(m as i64 - d);
            pair(d as f64 * h)
        });
        Ok(Self { m, length, pair: table })
    }

    pub fn free(m: usize, length: f64) -> Result<Self> {
        Self::new(m, length, |_| 0.0)
    }

    /// Regularized power law `strength * sign * K_R(r)`.
    pub fn power_law(m: usize, length: f64, sign: KernelSign, a: f64, cutoff: f64, strength: f64) -> Result<Self> {
        let mut err = None;
        let model = Self::new(m, length, |r| match free_space_kernel(a, cutoff, r) {
            Ok(k) => strength * sign.factor() * k,
            Err(e) => {
                err = Some(e);
                0.0
            }
        });
        match err {
            Some(e) => Err(e),
            None => model,
        }
    }

    pub fn sites(&self) -> usize {
        self.m
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.m as f64
    }

    pub fn pair(&self) -> &Array2<f64> {
        &self.pair
    }

    /// `hbar = 1/N`.
    pub fn hbar(n: usize) -> f64 {
        1.0 / n as f64
    }

    /// One-body matrix `-hbar^2/2` times the periodic second difference.
    pub fn kinetic(&self, hbar: f64) -> Array2<C64> {
        let m = self.m;
        let c = hbar * hbar / (2.0 * self.spacing().powi(2));
        let mut t = Array2::zeros((m, m));
        for i in 0..m {
            t[[i, i]] += C64::new(2.0 * c, 0.0);
            t[[i, (i + 1) % m]] -= C64::new(c, 0.0);
            t[[i, (i + m - 1) % m]] -= C64::new(c, 0.0);
        }
        t
    }
}

/// Second-quantized Hamiltonian in the `n`-particle sector.
pub fn build_hamiltonian(model: &LatticeModel, n: usize) -> Result<CsrMatrix> {
    let basis = FockBasis::new(model.m, n)?;
    let t = model.kinetic(LatticeModel::hbar(n.max(1)));
    let coupling = 1.0 / n.max(1) as f64;
    let mut entries = Vec::new();
    for (col, &mask) in basis.states().iter().enumerate() {
        let mut diag = 0.0;
        for x in 0..model.m {
            if mask & (1 << x) == 0 {
                continue;
            }
            for y in x + 1..model.m {
                if mask & (1 << y) != 0 {
                    diag += coupling * model.pair[[x, y]];
                }
            }
        }
        entries.push((col, col, C64::new(diag, 0.0)));
        for y in 0..model.m {
            let Some((s1, m1)) = annihilate(mask, y) else { continue };
            for x in 0..model.m {
                if t[[x, y]] == C64::new(0.0, 0.0) {
                    continue;
                }
                if let Some((s2, m2)) = create(m1, x) {
                    entries.push((basis.index(m2), col, t[[x, y]] * (s1 * s2)));
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(basis.dim(), entries))
}

/// Normalized amplitudes over a [`FockBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct FermionState {
    basis: FockBasis,
    amplitudes: Vec<C64>,
}

impl FermionState {
    pub fn new(basis: FockBasis, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::Contract(format!("{} amplitudes for a basis of {}", amplitudes.len(), basis.dim())));
        }
        let nrm = norm(&amplitudes);
        if (nrm - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("state norm is {nrm}, expected 1")));
        }
        Ok(Self { basis, amplitudes })
    }

    /// `a+(f_1) ... a+(f_N) |0>` for orthonormal orbitals given as site vectors.
    pub fn slater(m: usize, orbitals: &[Vec<C64>]) -> Result<Self> {
        let basis = FockBasis::new(m, orbitals.len())?;
        if orbitals.iter().any(|o| o.len() != m) {
            return Err(Error::Contract(format!("orbitals must have {m} entries")));
        }
        let n = orbitals.len();
        let amplitudes = basis
            .states()
            .iter()
            .map(|&mask| {
                let sites: Vec<usize> = (0..m).filter(|s| mask & (1 << s) != 0).collect();
                determinant(Array2::from_shape_fn((n, n), |(i, j)| orbitals[j][sites[i]]))
            })
            .collect();
        Self::new(basis, amplitudes)
    }

    /// Single occupation-basis state.
    pub fn sites(m: usize, occupied: &[usize]) -> Result<Self> {
        let basis = FockBasis::new(m, occupied.len())?;
        let mask = occupied.iter().fold(0u32, |acc, s| acc | (1 << s));
        if mask.count_ones() as usize != occupied.len() || occupied.iter().any(|s| *s >= m) {
            return Err(Error::Contract("occupied sites must be distinct and on the lattice".into()));
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); basis.dim()];
        amplitudes[basis.index(mask)] = C64::new(1.0, 0.0);
        Self::new(basis, amplitudes)
    }

    /// Haar-like random state from Gaussian amplitudes.
    pub fn random(m: usize, n: usize, rng: &mut impl Rng) -> Result<Self> {
        let basis = FockBasis::new(m, n)?;
        let mut amplitudes: Vec<C64> = (0..basis.dim())
            .map(|_| C64::new(rng.sample(rand::distr::StandardUniform), rng.sample(rand::distr::StandardUniform)) - C64::new(0.5, 0.5))
            .collect();
        let nrm = norm(&amplitudes);
        amplitudes.iter_mut().for_each(|z| *z /= nrm);
        Self::new(basis, amplitudes)
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn energy(&self, h: &CsrMatrix) -> f64 {
        crate::sparse::inner(&self.amplitudes, &h.matvec(&self.amplitudes)).re
    }
}

fn determinant(mut a: Array2<C64>) -> C64 {
    let n = a.nrows();
    let mut det = C64::new(1.0, 0.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&p, &q| a[[p, col]].norm().total_cmp(&a[[q, col]].norm())).expect("non-empty");
        if a[[piv, col]].norm() == 0.0 {
            return C64::new(0.0, 0.0);
        }
        if piv != col {
            for k in 0..n {
                a.swap([piv, k], [col, k]);
            }
            det = -det;
        }
        det *= a[[col, col]];
        for row in col + 1..n {
            let r = a[[row, col]] / a[[col, col]];
            for k in col..n {
                let v = a[[col, k]];
                a[[row, k]] -= r * v;
            }
        }
    }
    det
}

/// `e^{-i H t / hbar} state`.
pub fn propagate(state: &FermionState, propagator: &Propagator, hbar: f64, t: f64) -> Result<FermionState> {
    if !t.is_finite() {
        return Err(Error::Contract(format!("time must be finite, got {t}")));
    }
    if t == 0.0 {
        return Ok(state.clone());
    }
    let amplitudes = propagator.apply(&state.amplitudes, t / hbar)?;
    let nrm = norm(&amplitudes);
    if (nrm - 1.0).abs() > 1e-10 {
        return Err(Error::Numerical(format!("propagation lost unitarity: norm {nrm}")));
    }
    Ok(FermionState { basis: state.basis.clone(), amplitudes: amplitudes.iter().map(|z| z / nrm).collect() })
}

/// One-particle reduced density matrix `gamma(x, y) = <a+_y a_x>` with `tr gamma = N`.
/// With `hbar = 1/N` this is also the semiclassically normalized state: `hbar tr gamma = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneRdm {
    pub gamma: Array2<C64>,
    pub hbar: f64,
}

impl OneRdm {
    pub fn new(gamma: Array2<C64>, hbar: f64) -> Self {
        Self { gamma, hbar }
    }

    pub fn trace(&self) -> f64 {
        self.gamma.diag().iter().map(|z| z.re).sum()
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        eigvalsh(self.gamma.view())
    }

    /// `max |gamma^2 - gamma|`, zero exactly for Slater states.
    pub fn purity_defect(&self) -> f64 {
        let d = self.gamma.dot(&self.gamma) - &self.gamma;
        d.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Semiclassical trace distance `hbar tr |gamma - other|`.
    pub fn trace_distance(&self, other: &OneRdm) -> Result<f64> {
        let d = &self.gamma - &other.gamma;
        Ok(self.hbar * eigvalsh(hermitian_part(d.view()).view())?.iter().map(|l| l.abs()).sum::<f64>())
    }
}

pub fn one_rdm(state: &FermionState) -> OneRdm {
    let m = state.basis.m;
    let mut gamma = Array2::<C64>::zeros((m, m));
    for (col, &mask) in state.basis.states().iter().enumerate() {
        let amp = state.amplitudes[col];
        if amp == C64::new(0.0, 0.0) {
            continue;
        }
        for x in 0..m {
            let Some((s1, m1)) = annihilate(mask, x) else { continue };
            for y in 0..m {
                if let Some((s2, m2)) = create(m1, y) {
                    gamma[[x, y]] += state.amplitudes[state.basis.index(m2)].conj() * amp * (s1 * s2);
                }
            }
        }
    }
    OneRdm::new(gamma, LatticeModel::hbar(state.basis.n.max(1)))
}

/// `Gamma[x_1..x_k; y_1..y_k] = <a+_{y_1} .. a+_{y_k} a_{x_k} .. a_{x_1}>`, flattened with
/// the `x` tuple as row index and the `y` tuple as column index (base `m` digits, `x_1` most significant).
#[derive(Debug, Clone, PartialEq)]
pub struct KRdm {
    pub m: usize,
    pub k: usize,
    pub data: Array2<C64>,
}

impl KRdm {
    pub fn at(&self, x: &[usize], y: &[usize]) -> C64 {
        self.data[[self.tuple_index(x), self.tuple_index(y)]]
    }

    fn tuple_index(&self, t: &[usize]) -> usize {
        t.iter().fold(0, |acc, s| acc * self.m + s)
    }
}

/// Largest `m^k` tuple count accepted by [`k_rdm`].
pub const MAX_TUPLES: usize = 4096;

pub fn k_rdm(state: &FermionState, k: usize) -> Result<KRdm> {
    let m = state.basis.m;
    let n = state.basis.n;
    if k == 0 || k > n {
        return Err(Error::Contract(format!("k = {k} must lie in 1..={n}")));
    }
    let tuples = m.checked_pow(k as u32).filter(|t| *t <= MAX_TUPLES).ok_or_else(|| Error::Capacity(format!("{m}^{k} index tuples exceed {MAX_TUPLES}")))?;
    let lower = FockBasis::new(m, n - k)?;
    // phi_t = a_{t_k} ... a_{t_1} psi in the (n - k)-particle sector
    let mut phis = Array2::<C64>::zeros((tuples, lower.dim()));
    for t in 0..tuples {
        let mut digits = vec![0; k];
        let mut rest = t;
        for d in digits.iter_mut().rev() {
            *d = rest % m;
            rest /= m;
        }
        for (col, &mask) in state.basis.states().iter().enumerate() {
            let mut sign = 1.0;
            let mut cur = Some(mask);
            for &site in &digits {
                cur = cur.and_then(|c| annihilate(c, site).map(|(s, nm)| {
                    sign *= s;
                    nm
                }));
            }
            if let Some(c) = cur {
                phis[[t, lower.index(c)]] += state.amplitudes[col] * sign;
            }
        }
    }
    let data = Array2::from_shape_fn((tuples, tuples), |(x, y)| phis.row(y).iter().zip(phis.row(x)).map(|(a, b)| a.conj() * b).sum());
    Ok(KRdm { m, k, data })
}

/// `max |Gamma - sum_pi sgn(pi) prod_j gamma(x_j, y_pi(j))|` over all index tuples.
pub fn wick_residual(gamma: &Array2<C64>, rdm: &KRdm) -> f64 {
    let (m, k) = (rdm.m, rdm.k);
    let tuples = rdm.data.nrows();
    let perms = permutations(k);
    let digits = |mut t: usize| {
        let mut d = vec![0; k];
        for slot in d.iter_mut().rev() {
            *slot = t % m;
            t /= m;
        }
        d
    };
    let mut worst: f64 = 0.0;
    for xi in 0..tuples {
        let x = digits(xi);
        for yi in 0..tuples {
            let y = digits(yi);
            let wick: C64 = perms.iter().map(|(p, s)| (0..k).map(|j| gamma[[x[j], y[p[j]]]]).product::<C64>() * *s).sum();
            worst = worst.max((rdm.data[[xi, yi]] - wick).norm());
        }
    }
    worst
}

fn permutations(k: usize) -> Vec<(Vec<usize>, f64)> {
    if k == 0 {
        return vec![(vec![], 1.0)];
    }
    let mut out = Vec::new();
    for (p, s) in permutations(k - 1) {
        for pos in 0..k {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            // inserting the largest element before (k - 1 - pos) others flips the sign that many times
            let flips = k - 1 - pos;
            out.push((q, if flips % 2 == 0 { s } else { -s }));
        }
    }
    out
}

/// Lattice Hartree-Fock flow `i hbar d_t gamma = [T + V_gamma - X_gamma, gamma]` with
/// `V_gamma(x) = c sum_y K(x, y) gamma(y, y)` and `X_gamma(x, y) = c K(x, y) gamma(x, y)`.
#[derive(Debug, Clone)]
pub struct LatticeHf {
    pub one_body: Array2<C64>,
    pub pair: Array2<f64>,
    pub coupling: f64,
    pub hbar: f64,
    pub exchange: bool,
}

const MIDPOINT_ITERATIONS: usize = 50;

impl LatticeHf {
    pub fn for_model(model: &LatticeModel, n: usize) -> Self {
        let hbar = LatticeModel::hbar(n);
        Self { one_body: model.kinetic(hbar), pair: model.pair.clone(), coupling: 1.0 / n as f64, hbar, exchange: true }
    }

    pub fn hamiltonian(&self, gamma: &Array2<C64>) -> Array2<C64> {
        let m = gamma.nrows();
        let mut h = self.one_body.clone();
        for x in 0..m {
            let v: f64 = (0..m).map(|y| self.pair[[x, y]] * gamma[[y, y]].re).sum();
            h[[x, x]] += self.coupling * v;
        }
        if self.exchange {
            for x in 0..m {
                for y in 0..m {
                    h[[x, y]] -= gamma[[x, y]] * (self.coupling * self.pair[[x, y]]);
                }
            }
        }
        hermitian_part(h.view())
    }

    /// `-i/hbar [h(gamma), gamma]`.
    pub fn rhs(&self, gamma: &Array2<C64>) -> Array2<C64> {
        commutator(self.hamiltonian(gamma).view(), gamma.view()).mapv(|z| z * C64::new(0.0, -1.0 / self.hbar))
    }

    fn conjugate(&self, h: &Array2<C64>, gamma: &Array2<C64>, dt: f64) -> Result<Array2<C64>> {
        let (vals, vecs) = eigh(h.view())?;
        let u = spectral_function(&vals, &vecs, |e| C64::from_polar(1.0, -e * dt / self.hbar));
        let out = u.dot(gamma).dot(&u.t().mapv(|z| z.conj()));
        Ok(hermitian_part(out.view()))
    }

    /// Implicit exponential midpoint step: `gamma' = U gamma U+` with `U = e^{-i h(mid) dt / hbar}`.
    pub fn step(&self, gamma: &Array2<C64>, dt: f64) -> Result<Array2<C64>> {
        let mut next = self.conjugate(&self.hamiltonian(gamma), gamma, dt)?;
        for _ in 0..MIDPOINT_ITERATIONS {
            let mid = (gamma + &next).mapv(|z| z * 0.5);
            let candidate = self.conjugate(&self.hamiltonian(&mid), gamma, dt)?;
            let change = (&candidate - &next).iter().fold(0.0f64, |m, z| m.max(z.norm()));
            next = candidate;
            if change <= 1e-14 {
                break;
            }
        }
        Ok(next)
    }

    pub fn energy(&self, gamma: &Array2<C64>) -> f64 {
        let m = gamma.nrows();
        let kinetic: f64 = (0..m).flat_map(|x| (0..m).map(move |y| (x, y))).map(|(x, y)| (self.one_body[[x, y]] * gamma[[y, x]]).re).sum();
        let mut pair = 0.0;
        for x in 0..m {
            for y in 0..m {
                let direct = gamma[[x, x]].re * gamma[[y, y]].re;
                let exch = if self.exchange { gamma[[x, y]].norm_sqr() } else { 0.0 };
                pair += 0.5 * self.coupling * self.pair[[x, y]] * (direct - exch);
            }
        }
        kinetic + pair
    }
}

/// Trace distances between the exact and the Hartree-Fock one-particle matrices for one `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct NbodyComparison {
    pub n: usize,
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
}

/// Settings for [`nbody_vs_hf`]: orbitals are the lowest eigenvectors of
/// `T + confinement cos(2 pi x / L)`, then released into the translation-invariant dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct NbodyStudy {
    pub t_end: f64,
    pub dt: f64,
    pub snapshots: usize,
    pub confinement: f64,
}

impl Default for NbodyStudy {
    fn default() -> Self {
        Self { t_end: 0.5, dt: 1e-3, snapshots: 10, confinement: 1.0 }
    }
}

/// Lowest `n` eigenvectors of `T + confinement cos(2 pi x / L)`.
pub fn confined_orbitals(model: &LatticeModel, n: usize, confinement: f64) -> Result<Vec<Vec<C64>>> {
    let mut h = model.kinetic(LatticeModel::hbar(n));
    for x in 0..model.m {
        h[[x, x]] += confinement * (2.0 * std::f64::consts::PI * x as f64 / model.m as f64).cos();
    }
    let (_, vecs) = eigh(h.view())?;
    Ok((0..n).map(|j| vecs.column(j).to_vec()).collect())
}

pub fn nbody_vs_hf(model: &LatticeModel, n: usize, study: &NbodyStudy) -> Result<NbodyComparison> {
    if !(study.dt > 0.0 && study.t_end >= 0.0 && study.snapshots >= 1) {
        return Err(Error::Contract("need dt > 0, t_end >= 0 and at least one snapshot".into()));
    }
    let orbitals = confined_orbitals(model, n, study.confinement)?;
    let psi0 = FermionState::slater(model.m, &orbitals)?;
    let h = build_hamiltonian(model, n)?;
    let prop = Propagator::new(&h)?;
    let hf = LatticeHf::for_model(model, n);
    let hbar = hf.hbar;
    let mut gamma = one_rdm(&psi0).gamma;
    let mut times = vec![0.0];
    let mut distances = vec![0.0];
    let steps_per = ((study.t_end / study.snapshots as f64) / study.dt).ceil().max(1.0) as usize;
    let dt = study.t_end / (study.snapshots * steps_per) as f64;
    for s in 1..=study.snapshots {
        if study.t_end == 0.0 {
            break;
        }
        for _ in 0..steps_per {
            gamma = hf.step(&gamma, dt)?;
        }
        let t = s as f64 * steps_per as f64 * dt;
        let exact = one_rdm(&propagate(&psi0, &prop, hbar, t)?);
        times.push(t);
        distances.push(exact.trace_distance(&OneRdm::new(gamma.clone(), hbar))?);
    }
    Ok(NbodyComparison { n, times, distances })
}
