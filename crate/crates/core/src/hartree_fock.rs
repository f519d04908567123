//! Time-dependent Hartree-Fock dynamics `i hbar d_t rho = [T + V_rho - X_rho, rho]`.
//!
//! Strang splitting: half kinetic step (Fourier-diagonal conjugation), full potential step
//! with `V - X` frozen at the midpoint, half kinetic step. With exchange off the potential
//! is diagonal, its conjugation leaves the density untouched and the step is exactly
//! symmetric; with exchange on the midpoint exchange comes from a first-order predictor.
//! The fourth-order variant composes three Strang steps and iterates the exchange midpoint
//! to a fixed point so that each step stays symmetric.

use log::warn;
use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::density_matrix::{DensityMatrix, Operator};
use crate::error::{ensure, Error, Result};
use crate::interaction::InteractionKernel;
use crate::linalg::{self, ModalAction};
use crate::spectral::{FftPlan, SpatialGrid};

const MIDPOINT_ITERATIONS: usize = 20;

/// Kinetic operator convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KineticConvention {
    /// `-hbar^2 Delta / 2`; velocity equals momentum, consistent with Vlasov transport.
    #[default]
    Half,
    /// `-hbar^2 Delta`, as printed in the mean-field equation.
    Printed,
}

impl KineticConvention {
    pub fn prefactor(self) -> f64 {
        match self {
            KineticConvention::Half => 0.5,
            KineticConvention::Printed => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplittingOrder {
    #[default]
    Second,
    /// Symmetric triple-jump composition of the second-order step.
    Fourth,
}

#[derive(Debug, Clone)]
pub struct HfConfig {
    pub dt: f64,
    pub t_end: f64,
    pub exchange: bool,
    pub kinetic: KineticConvention,
    pub order: SplittingOrder,
    pub kernel: InteractionKernel,
}

impl HfConfig {
    pub fn new(kernel: InteractionKernel, dt: f64, t_end: f64, exchange: bool) -> Self {
        Self { dt, t_end, exchange, kinetic: KineticConvention::Half, order: SplittingOrder::Second, kernel }
    }

    fn check(&self, grid: &SpatialGrid, hbar: f64) -> Result<()> {
        ensure!(self.dt.is_finite() && self.dt > 0.0, Contract, "dt must be positive, got {}", self.dt);
        ensure!(self.t_end.is_finite() && self.t_end >= 0.0, Contract, "t_end must be >= 0, got {}", self.t_end);
        ensure!(self.kernel.grid() == grid, Contract, "kernel grid differs from the state grid");
        let guard = 0.5 * hbar * grid.spacing().powi(2);
        if self.dt > guard {
            warn!("dt = {} exceeds the accuracy guard 0.5 hbar h^2 = {guard:.3e}; monitor the energy drift", self.dt);
        }
        Ok(())
    }
}

/// Exchange kernel `hbar^d K(x - y) rho(x, y)`.
pub fn exchange_operator(kernel: &InteractionKernel, rho: &Operator) -> Result<Operator> {
    let grid = rho.grid();
    ensure!(kernel.grid() == grid, Contract, "kernel grid differs from the state grid");
    let scale = rho.hbar().powi(grid.dim() as i32);
    let k = rho.kernel();
    let x = Array2::from_shape_fn(k.dim(), |(a, b)| k[[a, b]] * (scale * kernel.between(a, b)));
    Operator::new(grid.clone(), rho.hbar(), x)
}

/// Energy components of a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HfEnergy {
    pub kinetic: f64,
    pub direct: f64,
    pub exchange: f64,
}

impl HfEnergy {
    pub fn total(&self) -> f64 {
        self.kinetic + self.direct - self.exchange
    }
}

/// Propagator with cached kinetic and interaction tables for one grid, `hbar` and config.
#[derive(Debug, Clone)]
pub struct HartreeFock {
    grid: SpatialGrid,
    hbar: f64,
    config: HfConfig,
    action: ModalAction,
    /// `c |k|^2` per mode, the kinetic symbol divided by `hbar^2`.
    kinetic_symbol: Vec<f64>,
    /// Kinetic matrix entry as a function of the index offset.
    kinetic_row: Vec<C64>,
    /// `K(x_a - x_b)` for the exchange term.
    pair: Option<Array2<f64>>,
}

impl HartreeFock {
    pub fn new(grid: &SpatialGrid, hbar: f64, config: HfConfig) -> Result<Self> {
        config.check(grid, hbar)?;
        Ok(Self::build(grid, hbar, config, true))
    }

    fn build(grid: &SpatialGrid, hbar: f64, config: HfConfig, with_pair: bool) -> Self {
        let c = config.kinetic.prefactor();
        let kinetic_symbol: Vec<f64> = (0..grid.size())
            .map(|i| {
                let k = grid.wavevector(i);
                c * (k[0] * k[0] + k[1] * k[1])
            })
            .collect();
        // T_ab = (1/size) sum_k hbar^2 s_k e^{i k (x_a - x_b)}, a function of a - b only
        let plan = FftPlan::new(grid.n());
        let mut row: Vec<C64> = kinetic_symbol.iter().map(|s| C64::new(s * hbar * hbar / grid.size() as f64, 0.0)).collect();
        plan.apply_nd(&mut row, grid.dim(), true);
        let size = grid.size();
        let pair = (with_pair && config.exchange && !config.kernel.is_zero())
            .then(|| Array2::from_shape_fn((size, size), |(a, b)| config.kernel.between(a, b)));
        Self { grid: grid.clone(), hbar, action: ModalAction::new(grid), kinetic_symbol, kinetic_row: row, pair, config }
    }

    pub fn config(&self) -> &HfConfig {
        &self.config
    }

    fn check_state(&self, rho: &Operator) -> Result<()> {
        ensure!(rho.grid() == &self.grid, Contract, "state grid differs from the propagator grid");
        ensure!(
            (rho.hbar() - self.hbar).abs() <= 1e-14 * self.hbar,
            Contract,
            "state hbar {} differs from propagator hbar {}",
            rho.hbar(),
            self.hbar
        );
        Ok(())
    }

    fn kinetic(&self, k: &Array2<C64>, dt: f64) -> Array2<C64> {
        let phases: Vec<C64> = self.kinetic_symbol.iter().map(|s| C64::from_polar(1.0, -s * self.hbar * dt)).collect();
        self.action.conjugate(k, &phases)
    }

    fn density(&self, k: &Array2<C64>) -> Vec<f64> {
        let s = self.hbar.powi(self.grid.dim() as i32);
        k.diag().iter().map(|z| z.re * s).collect()
    }

    /// `V` on the grid for a kernel.
    fn mean_field(&self, k: &Array2<C64>) -> Result<Vec<f64>> {
        if self.config.kernel.is_zero() {
            return Ok(vec![0.0; self.grid.size()]);
        }
        self.config.kernel.potential(&self.density(k))
    }

    /// Matrix of `V - X` in the orthonormal grid basis.
    fn potential_matrix(&self, v: &[f64], k: &Array2<C64>, pair: &Array2<f64>) -> Array2<C64> {
        let s = self.hbar.powi(self.grid.dim() as i32) * self.grid.cell_volume();
        let mut h = Array2::from_shape_fn(k.dim(), |(a, b)| -k[[a, b]] * (s * pair[[a, b]]));
        for (i, vi) in v.iter().enumerate() {
            h[[i, i]] += vi;
        }
        linalg::hermitian_part(h.view())
    }

    fn potential_step(&self, k: &Array2<C64>, dt: f64) -> Result<Array2<C64>> {
        let v = self.mean_field(k)?;
        let Some(pair) = &self.pair else {
            // diagonal: rho_ab -> e^{-i (V_a - V_b) dt / hbar} rho_ab
            let size = self.grid.size();
            let ph: Vec<C64> = v.iter().map(|x| C64::from_polar(1.0, -x * dt / self.hbar)).collect();
            return Ok(Array2::from_shape_fn((size, size), |(a, b)| ph[a] * k[[a, b]] * ph[b].conj()));
        };
        // predictor: rho at the middle of the substep, to first order in dt
        let w = self.grid.cell_volume();
        let m = k.mapv(|z| z * w);
        let h0 = self.potential_matrix(&v, k, pair);
        let comm = linalg::commutator(h0.view(), m.view());
        let mut mid = (&m - &comm.mapv(|z| z * C64::new(0.0, dt / (2.0 * self.hbar)))).mapv(|z| z / w);
        let mut end = self.conjugate_frozen(&m, &mid, pair, dt)?;
        if self.config.order == SplittingOrder::Fourth {
            // implicit midpoint: a symmetric step, as the composition requires
            let scale = linalg::max_abs(m.view());
            for _ in 0..MIDPOINT_ITERATIONS {
                let next_mid = ((&m + &end) * C64::new(0.5, 0.0)).mapv(|z| z / w);
                let change = linalg::max_abs((&next_mid - &mid).view()) * w;
                mid = next_mid;
                end = self.conjugate_frozen(&m, &mid, pair, dt)?;
                if change <= 1e-14 * scale {
                    break;
                }
            }
        }
        Ok(end.mapv(|z| z / w))
    }

    /// `e^{-i H dt / hbar} m e^{i H dt / hbar}` with `H = V - X` of the kernel `mid`.
    fn conjugate_frozen(&self, m: &Array2<C64>, mid: &Array2<C64>, pair: &Array2<f64>, dt: f64) -> Result<Array2<C64>> {
        let h = self.potential_matrix(&self.mean_field(mid)?, mid, pair);
        let (vals, vecs) = linalg::eigh(h.view())?;
        let qh = linalg::dagger(vecs.view());
        let mut inner = qh.dot(m).dot(&vecs);
        let ph: Vec<C64> = vals.iter().map(|l| C64::from_polar(1.0, -l * dt / self.hbar)).collect();
        let n = inner.nrows();
        for a in 0..n {
            for b in 0..n {
                inner[[a, b]] *= ph[a] * ph[b].conj();
            }
        }
        Ok(vecs.dot(&inner).dot(&qh))
    }

    fn strang(&self, k: &Array2<C64>, dt: f64) -> Result<Array2<C64>> {
        let half = self.kinetic(k, dt / 2.0);
        let pot = self.potential_step(&half, dt)?;
        Ok(self.kinetic(&pot, dt / 2.0))
    }

    fn advance(&self, k: &Array2<C64>, dt: f64) -> Result<Array2<C64>> {
        let out = match self.config.order {
            SplittingOrder::Second => self.strang(k, dt)?,
            SplittingOrder::Fourth => {
                let c = 2f64.powf(1.0 / 3.0);
                let w1 = 1.0 / (2.0 - c);
                let w0 = -c / (2.0 - c);
                let a = self.strang(k, w1 * dt)?;
                let b = self.strang(&a, w0 * dt)?;
                self.strang(&b, w1 * dt)?
            }
        };
        let w = self.grid.cell_volume();
        Ok(linalg::hermitian_part(out.mapv(|z| z * w).view()).mapv(|z| z / w))
    }

    /// One step of signed length `dt` (negative steps run backwards).
    pub fn step(&self, rho: &DensityMatrix, dt: f64) -> Result<DensityMatrix> {
        self.check_state(rho)?;
        let k = self.advance(rho.kernel(), dt)?;
        Ok(DensityMatrix::new_unchecked(Operator::new(self.grid.clone(), self.hbar, k)?))
    }

    /// Step on a general operator (no state invariants assumed).
    pub fn step_operator(&self, rho: &Operator, dt: f64) -> Result<Operator> {
        self.check_state(rho)?;
        Operator::new(self.grid.clone(), self.hbar, self.advance(rho.kernel(), dt)?)
    }

    /// Right side `[H(rho), rho] / (i hbar)` as an operator kernel.
    pub fn rhs(&self, rho: &Operator) -> Result<Operator> {
        self.check_state(rho)?;
        let h = self.hamiltonian_matrix(rho)?;
        let w = self.grid.cell_volume();
        let m = rho.matrix();
        let c = linalg::commutator(h.view(), m.view()).mapv(|z| z * C64::new(0.0, -1.0 / self.hbar) / w);
        Operator::new(self.grid.clone(), self.hbar, c)
    }

    /// Matrix of `T + V_rho - X_rho` in the orthonormal grid basis.
    pub fn hamiltonian_matrix(&self, rho: &Operator) -> Result<Array2<C64>> {
        self.check_state(rho)?;
        let size = self.grid.size();
        let v = self.mean_field(rho.kernel())?;
        let mut h = match &self.pair {
            Some(pair) => self.potential_matrix(&v, rho.kernel(), pair),
            None => Array2::from_diag(&ndarray::Array1::from_iter(v.iter().map(|x| C64::new(*x, 0.0)))),
        };
        for a in 0..size {
            for b in 0..size {
                let d = self.grid.offset(0, self.grid.min_image(a, b));
                h[[a, b]] += self.kinetic_row[d];
            }
        }
        Ok(h)
    }

    pub fn energy(&self, rho: &Operator) -> Result<HfEnergy> {
        self.check_state(rho)?;
        let s = self.hbar.powi(self.grid.dim() as i32);
        let w = self.grid.cell_volume();
        let k = rho.kernel();
        let size = self.grid.size();
        let mut kin = C64::new(0.0, 0.0);
        for a in 0..size {
            for b in 0..size {
                let d = self.grid.offset(0, self.grid.min_image(a, b));
                kin += self.kinetic_row[d] * k[[b, a]];
            }
        }
        let kinetic = s * kin.re * w;
        let density = self.density(k);
        let v = self.mean_field(k)?;
        let direct = 0.5 * v.iter().zip(&density).map(|(a, b)| a * b).sum::<f64>() * w;
        let exchange = if self.config.exchange && !self.config.kernel.is_zero() {
            let mut acc = 0.0;
            for a in 0..size {
                for b in 0..size {
                    acc += self.config.kernel.between(a, b) * k[[a, b]].norm_sqr();
                }
            }
            0.5 * s * s * acc * w * w
        } else {
            0.0
        };
        Ok(HfEnergy { kinetic, direct, exchange })
    }
}

/// Energy of a state without building a propagator.
pub fn hf_energy(rho: &Operator, kernel: &InteractionKernel, exchange: bool, kinetic: KineticConvention) -> Result<HfEnergy> {
    ensure!(kernel.grid() == rho.grid(), Contract, "kernel grid differs from the state grid");
    let mut config = HfConfig::new(kernel.clone(), 1.0, 0.0, exchange);
    config.kinetic = kinetic;
    HartreeFock::build(rho.grid(), rho.hbar(), config, false).energy(rho)
}

/// What observers see after each step.
#[derive(Debug)]
pub struct StepInfo<'a, S = DensityMatrix> {
    pub step: usize,
    pub time: f64,
    pub state: &'a S,
}

#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
}

/// Number of steps and the adjusted step covering `[0, t_end]`.
pub(crate) fn step_count(t_end: f64, dt: f64) -> (usize, f64) {
    if t_end == 0.0 {
        return (0, dt);
    }
    let steps = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
    (steps, t_end / steps as f64)
}

/// Evolves to `config.t_end`, recording the state every `record_every` steps (and at the end)
/// and calling `observer` after every step.
pub fn hf_evolve(
    rho: &DensityMatrix,
    config: &HfConfig,
    record_every: usize,
    mut observer: impl FnMut(&StepInfo) -> Result<()>,
) -> Result<Trajectory<DensityMatrix>> {
    let hf = HartreeFock::new(rho.grid(), rho.hbar(), config.clone())?;
    let (steps, dt) = step_count(config.t_end, config.dt);
    let mut traj = Trajectory { times: vec![0.0], states: vec![rho.clone()] };
    let mut state = rho.clone();
    for n in 1..=steps {
        state = hf.step(&state, dt)?;
        let time = n as f64 * dt;
        observer(&StepInfo { step: n, time, state: &state }).map_err(|e| Error::Observer(format!("at t = {time}: {e}")))?;
        if n == steps || (record_every > 0 && n % record_every == 0) {
            state.validate().map_err(|e| Error::Numerical(format!("state invariants lost at t = {time}: {e}")))?;
            traj.times.push(time);
            traj.states.push(state.clone());
        }
    }
    Ok(traj)
}

