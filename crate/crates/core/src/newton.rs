//! Weighted point particles in the periodic mean field, as a cross-check on the Vlasov solver.
//!
//! Particles are deposited on the spatial grid with the cubic B-spline, the potential is the
//! kernel convolution of that density (same multiplier table as the Vlasov force), and each
//! particle is accelerated by minus the gradient of the B-spline quasi-interpolant of the
//! potential. This force is the exact gradient of the discrete energy
//! `1/2 sum_i w_i |v_i|^2 + 1/2 sum_g rho_g phi_g h^d`, so leapfrog keeps its error bounded.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{ensure, Error, Result};
use crate::hartree_fock::{step_count, StepInfo, Trajectory};
use crate::interaction::InteractionKernel;
use crate::spectral::{PhaseGrid, SpatialGrid};
use crate::spline::{cubic_bspline, cubic_bspline_derivative};
use crate::vlasov::VlasovEnergy;
use crate::wigner::PhaseField;

/// Positions in `[0, L)^d`, velocities and weights summing to one. Unused second
/// components are zero in one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    grid: SpatialGrid,
    positions: Vec<[f64; 2]>,
    velocities: Vec<[f64; 2]>,
    weights: Vec<f64>,
}

impl ParticleEnsemble {
    /// Equal weights `1 / N_p`.
    pub fn new(grid: &SpatialGrid, positions: Vec<[f64; 2]>, velocities: Vec<[f64; 2]>) -> Result<Self> {
        let n = positions.len();
        Self::weighted(grid, positions, velocities, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn weighted(grid: &SpatialGrid, positions: Vec<[f64; 2]>, velocities: Vec<[f64; 2]>, weights: Vec<f64>) -> Result<Self> {
        let n = positions.len();
        ensure!(n > 0, Contract, "an ensemble needs at least one particle");
        ensure!(velocities.len() == n && weights.len() == n, Contract, "positions, velocities and weights differ in length");
        ensure!(
            positions.iter().chain(&velocities).all(|p| p[0].is_finite() && p[1].is_finite()),
            Validation,
            "non-finite particle coordinates"
        );
        ensure!(weights.iter().all(|w| w.is_finite() && *w >= 0.0), Validation, "weights must be finite and nonnegative");
        let total: f64 = weights.iter().sum();
        ensure!((total - 1.0).abs() <= 1e-10, Validation, "weights sum to {total}, expected 1");
        let mut ens = Self { grid: grid.clone(), positions, velocities, weights };
        ens.wrap();
        Ok(ens)
    }

    /// `count` i.i.d. draws from the grid nodes of `f` with probability proportional to
    /// `max(f, 0)`; the sampled measure then has the discrete `f` as its exact mean.
    pub fn sample(f: &PhaseField, count: usize, rng: &mut impl Rng) -> Result<Self> {
        ensure!(count > 0, Contract, "sample count must be positive");
        let grid = f.grid();
        let nv = grid.v_size();
        let dist = WeightedIndex::new(f.values().iter().map(|v| v.max(0.0)))
            .map_err(|e| Error::Domain(format!("phase field cannot be sampled: {e}")))?;
        let (positions, velocities) = (0..count)
            .map(|_| {
                let i = dist.sample(rng);
                (grid.spatial().point(i / nv), grid.velocity_vector(i % nv))
            })
            .unzip();
        Self::new(grid.spatial(), positions, velocities)
    }

    /// One particle per phase-space node carrying weight `f * cell volume` (positive nodes only).
    pub fn quadrature(f: &PhaseField) -> Result<Self> {
        let grid = f.grid();
        let nv = grid.v_size();
        let cell = grid.cell_volume();
        let nodes: Vec<usize> = (0..grid.size()).filter(|&i| f.values()[i] > 0.0).collect();
        let total: f64 = nodes.iter().map(|&i| f.values()[i]).sum::<f64>() * cell;
        ensure!(total > 0.0, Domain, "phase field has no positive mass");
        let positions = nodes.iter().map(|&i| grid.spatial().point(i / nv)).collect();
        let velocities = nodes.iter().map(|&i| grid.velocity_vector(i % nv)).collect();
        let weights = nodes.iter().map(|&i| f.values()[i] * cell / total).collect();
        Self::weighted(grid.spatial(), positions, velocities, weights)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn velocities(&self) -> &[[f64; 2]] {
        &self.velocities
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn wrap(&mut self) {
        let l = self.grid.length();
        let d = self.grid.dim();
        for p in &mut self.positions {
            for c in p.iter_mut().take(d) {
                *c = c.rem_euclid(l);
                // rem_euclid can round up to exactly l
                if *c >= l {
                    *c = 0.0;
                }
            }
        }
    }

    /// `sum_i w_i v_i`.
    pub fn momentum(&self) -> [f64; 2] {
        self.velocities.iter().zip(&self.weights).fold([0.0, 0.0], |acc, (v, w)| [acc[0] + w * v[0], acc[1] + w * v[1]])
    }

    /// Weighted mean position (meaningful while the ensemble does not straddle the boundary).
    pub fn center_of_mass(&self) -> [f64; 2] {
        self.positions.iter().zip(&self.weights).fold([0.0, 0.0], |acc, (p, w)| [acc[0] + w * p[0], acc[1] + w * p[1]])
    }

    /// B-spline deposit `rho_g = sum_i w_i prod_k beta((x_g - x_i)_k / h) / h^d`.
    pub fn density(&self) -> Vec<f64> {
        let g = &self.grid;
        let (n, h) = (g.n() as i64, g.spacing());
        let mut rho = vec![0.0; g.size()];
        let norm = 1.0 / g.cell_volume();
        for (p, w) in self.positions.iter().zip(&self.weights) {
            let (b0, t0) = taps(p[0], h);
            if g.dim() == 1 {
                for j in -1..=2 {
                    rho[(b0 + j).rem_euclid(n) as usize] += w * norm * cubic_bspline(t0 - j as f64);
                }
            } else {
                let (b1, t1) = taps(p[1], h);
                for i in -1..=2 {
                    let wi = w * norm * cubic_bspline(t0 - i as f64);
                    let row = (b0 + i).rem_euclid(n) as usize * n as usize;
                    for j in -1..=2 {
                        rho[row + (b1 + j).rem_euclid(n) as usize] += wi * cubic_bspline(t1 - j as f64);
                    }
                }
            }
        }
        rho
    }

    /// Per-particle accelerations `-grad S(x_i)` with `S(x) = sum_g prod_k beta((x - x_g)_k / h) phi_g`.
    pub fn accelerations(&self, kernel: &InteractionKernel) -> Result<Vec<[f64; 2]>> {
        ensure!(kernel.grid() == &self.grid, Contract, "interaction kernel lives on a different grid");
        let phi = kernel.potential(&self.density())?;
        let g = &self.grid;
        let (n, h) = (g.n() as i64, g.spacing());
        Ok(self
            .positions
            .iter()
            .map(|p| {
                let (b0, t0) = taps(p[0], h);
                if g.dim() == 1 {
                    let s: f64 = (-1..=2).map(|j| cubic_bspline_derivative(t0 - j as f64) * phi[(b0 + j).rem_euclid(n) as usize]).sum();
                    [-s / h, 0.0]
                } else {
                    let (b1, t1) = taps(p[1], h);
                    let mut grad = [0.0, 0.0];
                    for i in -1..=2 {
                        let (wi, di) = (cubic_bspline(t0 - i as f64), cubic_bspline_derivative(t0 - i as f64));
                        let row = (b0 + i).rem_euclid(n) as usize * n as usize;
                        for j in -1..=2 {
                            let (wj, dj) = (cubic_bspline(t1 - j as f64), cubic_bspline_derivative(t1 - j as f64));
                            let v = phi[row + (b1 + j).rem_euclid(n) as usize];
                            grad[0] += di * wj * v;
                            grad[1] += wi * dj * v;
                        }
                    }
                    [-grad[0] / h, -grad[1] / h]
                }
            })
            .collect())
    }

    /// Kinetic `1/2 sum w |v|^2` and interaction `1/2 sum rho phi h^d`, normalized like [`VlasovEnergy`].
    pub fn energy(&self, kernel: &InteractionKernel) -> Result<VlasovEnergy> {
        ensure!(kernel.grid() == &self.grid, Contract, "interaction kernel lives on a different grid");
        let kinetic = 0.5 * self.velocities.iter().zip(&self.weights).map(|(v, w)| w * (v[0] * v[0] + v[1] * v[1])).sum::<f64>();
        let rho = self.density();
        let phi = kernel.potential(&rho)?;
        let interaction = 0.5 * rho.iter().zip(&phi).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell_volume();
        Ok(VlasovEnergy { kinetic, interaction })
    }
}

/// Cell index and fractional offset of coordinate `x` on spacing `h`.
fn taps(x: f64, h: f64) -> (i64, f64) {
    let t = x / h;
    let base = t.floor();
    (base as i64, t - base)
}

fn kick(ens: &mut ParticleEnsemble, acc: &[[f64; 2]], dt: f64) {
    for (v, a) in ens.velocities.iter_mut().zip(acc) {
        v[0] += dt * a[0];
        v[1] += dt * a[1];
    }
}

fn drift(ens: &mut ParticleEnsemble, dt: f64) {
    for (p, v) in ens.positions.iter_mut().zip(&ens.velocities) {
        p[0] += dt * v[0];
        p[1] += dt * v[1];
    }
    ens.wrap();
}

/// One kick-drift-kick leapfrog step.
pub fn newton_step(ens: &ParticleEnsemble, kernel: &InteractionKernel, dt: f64) -> Result<ParticleEnsemble> {
    ensure!(dt.is_finite() && dt > 0.0, Contract, "time step must be positive, got {dt}");
    let acc = ens.accelerations(kernel)?;
    Ok(leapfrog(ens.clone(), &acc, kernel, dt)?.0)
}

fn leapfrog(mut ens: ParticleEnsemble, acc: &[[f64; 2]], kernel: &InteractionKernel, dt: f64) -> Result<(ParticleEnsemble, Vec<[f64; 2]>)> {
    kick(&mut ens, acc, 0.5 * dt);
    drift(&mut ens, dt);
    let next = ens.accelerations(kernel)?;
    kick(&mut ens, &next, 0.5 * dt);
    Ok((ens, next))
}

/// Evolves to `t_end` with a step adjusted to divide it, recording every `record_every` steps
/// and the final state.
pub fn newton_evolve<F>(ens: &ParticleEnsemble, kernel: &InteractionKernel, dt: f64, t_end: f64, record_every: usize, mut observer: F) -> Result<Trajectory<ParticleEnsemble>>
where
    F: FnMut(&StepInfo<ParticleEnsemble>) -> Result<()>,
{
    ensure!(record_every > 0, Contract, "record_every must be positive");
    ensure!(dt.is_finite() && dt > 0.0 && t_end.is_finite() && t_end >= 0.0, Contract, "need dt > 0 and t_end >= 0, got {dt} and {t_end}");
    let (steps, dt) = step_count(t_end, dt);
    let mut state = ens.clone();
    let mut acc = state.accelerations(kernel)?;
    let mut traj = Trajectory { times: vec![0.0], states: vec![state.clone()] };
    observer(&StepInfo { step: 0, time: 0.0, state: &state }).map_err(|e| Error::Observer(e.to_string()))?;
    for step in 1..=steps {
        let (next, next_acc) = leapfrog(state, &acc, kernel, dt)?;
        state = next;
        acc = next_acc;
        let time = step as f64 * dt;
        observer(&StepInfo { step, time, state: &state }).map_err(|e| Error::Observer(e.to_string()))?;
        if step % record_every == 0 || step == steps {
            traj.times.push(time);
            traj.states.push(state.clone());
        }
    }
    Ok(traj)
}

/// Gaussian mollifier widths for [`empirical_vs_vlasov`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothing {
    pub sigma_x: f64,
    pub sigma_v: f64,
}

const TRUNCATION: f64 = 6.0;

/// Normalized Gaussian weights on `offsets * spacing`, truncated at `6 sigma`.
fn gaussian(r: f64, sigma: f64) -> f64 {
    if r.abs() > TRUNCATION * sigma {
        0.0
    } else {
        (-0.5 * (r / sigma).powi(2)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * sigma)
    }
}

fn check_smoothing(grid: &PhaseGrid, s: Smoothing) -> Result<()> {
    ensure!(grid.spatial().dim() == 1, Contract, "empirical distances are implemented for one space dimension");
    ensure!(s.sigma_x > 0.0 && s.sigma_v > 0.0, Contract, "smoothing widths must be positive");
    ensure!(TRUNCATION * s.sigma_x < 0.5 * grid.spatial().length(), Contract, "spatial smoothing wider than the half period");
    Ok(())
}

/// Mollified empirical measure `sum_i w_i G(x - x_i) G(v - v_i)` on the phase grid
/// (periodic minimal-image distance in `x`).
pub fn empirical_density(ens: &ParticleEnsemble, grid: &PhaseGrid, smoothing: Smoothing) -> Result<Vec<f64>> {
    check_smoothing(grid, smoothing)?;
    ensure!(ens.grid() == grid.spatial(), Contract, "ensemble and phase grid use different spatial grids");
    let (n, nv) = (grid.spatial().n(), grid.n_v());
    let (h, dv, l) = (grid.spatial().spacing(), grid.dv(), grid.spatial().length());
    let reach_x = (TRUNCATION * smoothing.sigma_x / h).ceil() as i64 + 1;
    let reach_v = (TRUNCATION * smoothing.sigma_v / dv).ceil() as i64 + 1;
    let mut out = vec![0.0; grid.size()];
    let mut gv = Vec::with_capacity(2 * reach_v as usize + 1);
    for ((p, v), w) in ens.positions().iter().zip(ens.velocities()).zip(ens.weights()) {
        let cx = (p[0] / h).round() as i64;
        let cv = ((v[0] + grid.v_max()) / dv).round() as i64;
        gv.clear();
        for k in cv - reach_v..=cv + reach_v {
            if (0..nv as i64).contains(&k) {
                gv.push((k as usize, gaussian(grid.velocity(k as usize) - v[0], smoothing.sigma_v)));
            }
        }
        for i in cx - reach_x..=cx + reach_x {
            let idx = i.rem_euclid(n as i64) as usize;
            let mut r = idx as f64 * h - p[0];
            r -= l * (r / l).round();
            let wx = w * gaussian(r, smoothing.sigma_x);
            if wx == 0.0 {
                continue;
            }
            let row = &mut out[idx * nv..(idx + 1) * nv];
            for &(k, g) in &gv {
                row[k] += wx * g;
            }
        }
    }
    Ok(out)
}

/// `f` mollified by the same Gaussians, as a sum over grid nodes weighted by the cell volume.
pub fn mollify(f: &PhaseField, smoothing: Smoothing) -> Result<Vec<f64>> {
    let grid = f.grid();
    check_smoothing(grid, smoothing)?;
    let (n, nv) = (grid.spatial().n(), grid.n_v());
    let (h, dv, l) = (grid.spatial().spacing(), grid.dv(), grid.spatial().length());
    let wx: Vec<f64> = (0..n)
        .map(|d| {
            let mut r = d as f64 * h;
            r -= l * (r / l).round();
            gaussian(r, smoothing.sigma_x) * h
        })
        .collect();
    let wv: Vec<f64> = (0..nv).map(|d| gaussian(d as f64 * dv, smoothing.sigma_v) * dv).collect();
    // along v (non-periodic window), then along x (periodic)
    let mut stage = vec![0.0; grid.size()];
    for i in 0..n {
        let src = &f.values()[i * nv..(i + 1) * nv];
        for k in 0..nv {
            stage[i * nv + k] = (0..nv).map(|q| wv[k.abs_diff(q)] * src[q]).sum();
        }
    }
    let mut out = vec![0.0; grid.size()];
    for i in 0..n {
        for j in 0..n {
            let w = wx[(i + n - j) % n];
            if w == 0.0 {
                continue;
            }
            for k in 0..nv {
                out[i * nv + k] += w * stage[j * nv + k];
            }
        }
    }
    Ok(out)
}

/// `int |G * mu_t - G * f_t| dx dv` at each aligned time: an L1 distance of mollified
/// measures, which is controlled by the bounded-Lipschitz distance of the unmollified ones.
pub fn empirical_vs_vlasov(particles: &Trajectory<ParticleEnsemble>, vlasov: &Trajectory<PhaseField>, smoothing: Smoothing) -> Result<Vec<f64>> {
    ensure!(particles.times.len() == vlasov.times.len(), Contract, "trajectories have {} and {} snapshots", particles.times.len(), vlasov.times.len());
    particles
        .times
        .iter()
        .zip(&vlasov.times)
        .zip(particles.states.iter().zip(&vlasov.states))
        .map(|((tp, tv), (ens, f))| {
            ensure!((tp - tv).abs() <= 1e-12 * tp.abs().max(1.0), Contract, "snapshot times {tp} and {tv} differ");
            let a = empirical_density(ens, f.grid(), smoothing)?;
            let b = mollify(f, smoothing)?;
            Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() * f.grid().cell_volume())
        })
        .collect()
}
