//! Semi-Lagrangian Vlasov solver on the phase-space grid.
//!
//! `d_t f + v . grad_x f - grad(K * rho_f) . grad_v f = 0`, split as half a free streaming
//! step, a full velocity kick, half a free streaming step. Both sub-flows are exact shifts
//! along grid lines, carried out with periodic cubic splines.

use crate::error::{ensure, Error, Result};
use crate::hartree_fock::{step_count, StepInfo, Trajectory};
use crate::interaction::InteractionKernel;
use crate::spectral::PhaseGrid;
use crate::spline::{LineShifter, ShiftKind};
use crate::wigner::PhaseField;

/// Mass allowed within two cells of the velocity-window edge.
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-6;
/// Values below this are reported as interpolation undershoot.
pub const NEGATIVITY_WARNING: f64 = -1e-6;

#[derive(Debug, Clone)]
pub struct VlasovConfig {
    pub dt: f64,
    pub t_end: f64,
    pub kernel: InteractionKernel,
    pub interpolation: ShiftKind,
}

impl VlasovConfig {
    pub fn new(kernel: InteractionKernel, dt: f64, t_end: f64) -> Self {
        Self { dt, t_end, kernel, interpolation: ShiftKind::CubicSpline }
    }

    fn check(&self, grid: &PhaseGrid) -> Result<()> {
        ensure!(self.dt.is_finite() && self.dt > 0.0, Contract, "dt must be positive, got {}", self.dt);
        ensure!(self.t_end.is_finite() && self.t_end >= 0.0, Contract, "t_end must be non-negative, got {}", self.t_end);
        ensure!(self.kernel.grid() == grid.spatial(), Contract, "interaction kernel lives on a different grid");
        let l = grid.spatial().length();
        ensure!(
            self.dt * grid.v_max() <= l / 2.0,
            Contract,
            "dt * v_max = {} exceeds half the domain {}",
            self.dt * grid.v_max(),
            l / 2.0
        );
        Ok(())
    }
}

/// `rho_f(x) = int f(x, v) dv`.
pub fn vlasov_density(f: &PhaseField) -> Vec<f64> {
    let grid = f.grid();
    let nv = grid.v_size();
    let dv = grid.dv().powi(grid.spatial().dim() as i32);
    f.values().chunks(nv).map(|row| row.iter().sum::<f64>() * dv).collect()
}

/// Kinetic and interaction parts of `1/2 int |v|^2 f + 1/2 int int K rho rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VlasovEnergy {
    pub kinetic: f64,
    pub interaction: f64,
}

impl VlasovEnergy {
    pub fn total(&self) -> f64 {
        self.kinetic + self.interaction
    }
}

pub fn vlasov_energy(f: &PhaseField, kernel: &InteractionKernel) -> Result<VlasovEnergy> {
    let grid = f.grid();
    ensure!(kernel.grid() == grid.spatial(), Contract, "interaction kernel lives on a different grid");
    let nv = grid.v_size();
    let speed2: Vec<f64> = (0..nv)
        .map(|j| {
            let v = grid.velocity_vector(j);
            v[0] * v[0] + v[1] * v[1]
        })
        .collect();
    let kinetic = 0.5 * f.values().chunks(nv).map(|row| row.iter().zip(&speed2).map(|(a, b)| a * b).sum::<f64>()).sum::<f64>()
        * grid.cell_volume();
    let rho = vlasov_density(f);
    let v = kernel.potential(&rho)?;
    let interaction = 0.5 * rho.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() * grid.spatial().cell_volume();
    Ok(VlasovEnergy { kinetic, interaction })
}

/// Stepper with reusable interpolation buffers.
#[derive(Debug, Clone)]
pub struct Vlasov {
    grid: PhaseGrid,
    config: VlasovConfig,
    x_shift: LineShifter,
    v_shift: LineShifter,
    line: Vec<f64>,
}

impl Vlasov {
    pub fn new(grid: &PhaseGrid, config: VlasovConfig) -> Result<Self> {
        config.check(grid)?;
        let n = grid.spatial().n();
        Ok(Self {
            grid: grid.clone(),
            x_shift: LineShifter::new(n, config.interpolation),
            v_shift: LineShifter::new(grid.n_v(), config.interpolation),
            line: Vec::with_capacity(n.max(grid.n_v())),
            config,
        })
    }

    pub fn config(&self) -> &VlasovConfig {
        &self.config
    }

    /// `f(x, v) <- f(x - v tau, v)`.
    fn stream(&mut self, values: &mut [f64], tau: f64) {
        let spatial = self.grid.spatial();
        let (n, d, h) = (spatial.n(), spatial.dim(), spatial.spacing());
        let nv = self.grid.v_size();
        for j in 0..nv {
            let v = self.grid.velocity_vector(j);
            for axis in 0..d {
                let cells = v[axis] * tau / h;
                // x axis 0 has stride n^{d-1} in the flat spatial index
                let x_stride = if d == 2 && axis == 0 { n } else { 1 };
                let outer = if d == 2 { n } else { 1 };
                let other_stride = if d == 2 && axis == 0 { 1 } else { n };
                for o in 0..outer {
                    self.line.clear();
                    self.line.extend((0..n).map(|i| values[((o * other_stride) + i * x_stride) * nv + j]));
                    self.x_shift.shift(&mut self.line, cells);
                    for (i, val) in self.line.iter().enumerate() {
                        values[((o * other_stride) + i * x_stride) * nv + j] = *val;
                    }
                }
            }
        }
    }

    /// `f(x, v) <- f(x, v - F(x) tau)`.
    fn kick(&mut self, values: &mut [f64], force: &[Vec<f64>], tau: f64) {
        let spatial = self.grid.spatial();
        let d = spatial.dim();
        let n_v = self.grid.n_v();
        let nv = self.grid.v_size();
        let dv = self.grid.dv();
        for (i, block) in values.chunks_mut(nv).enumerate() {
            for (axis, f_axis) in force.iter().enumerate().take(d) {
                let cells = f_axis[i] * tau / dv;
                let (stride, outer, other) = if d == 2 && axis == 0 { (n_v, n_v, 1) } else if d == 2 { (1, n_v, n_v) } else { (1, 1, 0) };
                for o in 0..outer {
                    self.line.clear();
                    self.line.extend((0..n_v).map(|k| block[o * other + k * stride]));
                    self.v_shift.shift(&mut self.line, cells);
                    for (k, val) in self.line.iter().enumerate() {
                        block[o * other + k * stride] = *val;
                    }
                }
            }
        }
    }

    /// One Strang step of length `dt`; the result is checked against the boundary-mass limit.
    pub fn step(&mut self, f: &PhaseField, dt: f64) -> Result<PhaseField> {
        ensure!(f.grid() == &self.grid, Contract, "phase field lives on a different grid");
        let mut values = f.values().to_vec();
        self.stream(&mut values, 0.5 * dt);
        if !self.config.kernel.is_zero() {
            let field = PhaseField::new(self.grid.clone(), f.hbar(), values)?;
            let force = self.config.kernel.force(&vlasov_density(&field))?;
            values = field.into_values();
            self.kick(&mut values, &force, dt);
        }
        self.stream(&mut values, 0.5 * dt);
        let out = PhaseField::new(self.grid.clone(), f.hbar(), values)?;
        let edge = out.boundary_mass(2);
        ensure!(
            edge <= BOUNDARY_MASS_LIMIT,
            Resolution,
            "mass {edge:.3e} reached the velocity-window edge (limit {BOUNDARY_MASS_LIMIT:.0e}); enlarge v_max"
        );
        let min = out.values().iter().copied().fold(f64::INFINITY, f64::min);
        if min < NEGATIVITY_WARNING {
            log::warn!("interpolation undershoot: min f = {min:.3e}");
        }
        Ok(out)
    }
}

/// One step with a freshly built stepper.
pub fn vlasov_step(f: &PhaseField, config: &VlasovConfig) -> Result<PhaseField> {
    Vlasov::new(f.grid(), config.clone())?.step(f, config.dt)
}

/// Evolves to `config.t_end`, recording `t = 0`, every `record_every` steps and the last step.
pub fn vlasov_evolve(
    f: &PhaseField,
    config: &VlasovConfig,
    record_every: usize,
    mut observer: impl FnMut(&StepInfo<PhaseField>) -> Result<()>,
) -> Result<Trajectory<PhaseField>> {
    let mut solver = Vlasov::new(f.grid(), config.clone())?;
    let (steps, dt) = step_count(config.t_end, config.dt);
    let mut traj = Trajectory { times: vec![0.0], states: vec![f.clone()] };
    let mut state = f.clone();
    for n in 1..=steps {
        state = solver.step(&state, dt)?;
        let time = n as f64 * dt;
        observer(&StepInfo { step: n, time, state: &state }).map_err(|e| Error::Observer(format!("at t = {time}: {e}")))?;
        if n == steps || (record_every > 0 && n % record_every == 0) {
            traj.times.push(time);
            traj.states.push(state.clone());
        }
    }
    Ok(traj)
}
