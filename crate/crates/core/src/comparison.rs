//! Quantitative comparison of Hartree-Fock and Vlasov dynamics: the Weyl-quantized Vlasov
//! generator, its Taylor remainder, exchange and commutator magnitudes, trace-distance series
//! and log-log rate fits over `hbar` sweeps.

use std::f64::consts::PI;

use ndarray::Array2;

use crate::density_matrix::{trace_distance, DensityMatrix, Operator};
use crate::error::{ensure, Error, Result};
use crate::hartree_fock::{exchange_operator, hf_energy, hf_evolve, HfConfig, KineticConvention, SplittingOrder, Trajectory};
use crate::interaction::{InteractionKernel, KernelSign};
use crate::spectral::{PhaseGrid, SpatialGrid};
use crate::spline::PeriodicSpline;
use crate::vlasov::{vlasov_density, vlasov_evolve, VlasovConfig};
use crate::wigner::{weyl_quantize, PhaseField};
use crate::C64;

/// Applies `weight(x, y, d)` to every kernel entry, where `x` is reached from `y` by the
/// minimal-image displacement `d`. Entries at displacement exactly half the box are zeroed:
/// their sign is ambiguous and dropping them keeps Hermitian inputs Hermitian.
fn weighted_kernel(rho: &Operator, weight: impl Fn([f64; 2], [f64; 2]) -> f64) -> Operator {
    let grid = rho.grid();
    let n = grid.n() as i64;
    let size = grid.size();
    let h = grid.spacing();
    let mut out = Array2::<C64>::zeros((size, size));
    for i in 0..size {
        for j in 0..size {
            let m = grid.min_image(i, j);
            if m[0] == -n / 2 || (grid.dim() == 2 && m[1] == -n / 2) {
                continue;
            }
            let y = grid.point(j);
            let d = [m[0] as f64 * h, m[1] as f64 * h];
            out[[i, j]] = rho.kernel()[[i, j]] * weight(y, d);
        }
    }
    Operator::new(grid.clone(), rho.hbar(), out).expect("shape preserved")
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn midpoint(y: [f64; 2], d: [f64; 2]) -> [f64; 2] {
    [y[0] + 0.5 * d[0], y[1] + 0.5 * d[1]]
}

/// `grad V((x+y)/2) . (x-y) rho(x, y)` for a given gradient field.
pub fn weyl_vlasov_kernel_with(rho: &Operator, gradient: impl Fn([f64; 2]) -> [f64; 2]) -> Operator {
    weighted_kernel(rho, |y, d| dot(gradient(midpoint(y, d)), d))
}

/// `[V(x) - V(y) - grad V((x+y)/2) . (x-y)] rho(x, y)` for a given potential.
pub fn remainder_kernel_with(
    rho: &Operator,
    potential: impl Fn([f64; 2]) -> f64,
    gradient: impl Fn([f64; 2]) -> [f64; 2],
) -> Operator {
    weighted_kernel(rho, |y, d| {
        let x = [y[0] + d[0], y[1] + d[1]];
        potential(x) - potential(y) - dot(gradient(midpoint(y, d)), d)
    })
}

/// Mean-field potential of `f` and splines of it and of its (spectral) gradient.
struct MeanField {
    potential: PeriodicSpline,
    gradient: Vec<PeriodicSpline>,
}

impl MeanField {
    fn new(f: &PhaseField, kernel: &InteractionKernel) -> Result<Self> {
        let grid = f.grid().spatial();
        ensure!(kernel.grid() == grid, Contract, "interaction kernel lives on a different grid");
        let rho = vlasov_density(f);
        let v = kernel.potential(&rho)?;
        let force = kernel.force(&rho)?;
        let gradient = force
            .iter()
            .map(|c| PeriodicSpline::new(grid, &c.iter().map(|x| -x).collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { potential: PeriodicSpline::new(grid, &v)?, gradient })
    }

    fn value(&self, p: [f64; 2]) -> f64 {
        self.potential.value(p)
    }

    fn grad(&self, p: [f64; 2]) -> [f64; 2] {
        let g0 = self.gradient[0].value(p);
        let g1 = self.gradient.get(1).map_or(0.0, |s| s.value(p));
        [g0, g1]
    }
}

/// Kernel `A` of the Weyl-quantized Vlasov generator with `V = K * rho_f`.
pub fn weyl_vlasov_kernel(f: &PhaseField, kernel: &InteractionKernel) -> Result<Operator> {
    let mf = MeanField::new(f, kernel)?;
    Ok(weyl_vlasov_kernel_with(&weyl_quantize(f)?, |p| mf.grad(p)))
}

/// Kernel `B` of the Taylor remainder with `V = K * rho_f`.
pub fn remainder_kernel(f: &PhaseField, kernel: &InteractionKernel) -> Result<Operator> {
    let mf = MeanField::new(f, kernel)?;
    Ok(remainder_kernel_with(&weyl_quantize(f)?, |p| mf.value(p), |p| mf.grad(p)))
}

fn check_aligned(a: &[f64], b: &[f64]) -> Result<()> {
    ensure!(a.len() == b.len(), Contract, "trajectories have {} and {} snapshots", a.len(), b.len());
    for (s, t) in a.iter().zip(b) {
        ensure!((s - t).abs() <= 1e-12 * s.abs().max(1.0), Contract, "snapshot times differ: {s} vs {t}");
    }
    Ok(())
}

/// `||rho(t) - Q(f(t))||_{L^1}` per snapshot.
pub fn trace_distance_series(hf: &Trajectory<DensityMatrix>, vlasov: &Trajectory<PhaseField>) -> Result<Vec<f64>> {
    check_aligned(&hf.times, &vlasov.times)?;
    hf.states.iter().zip(&vlasov.states).map(|(r, f)| trace_distance(r, &weyl_quantize(f)?)).collect()
}

/// Hilbert-Schmidt norm `hbar^{d/2} ||kernel||_F h^d`.
pub fn hilbert_schmidt_norm(op: &Operator) -> f64 {
    let g = op.grid();
    let frob = op.kernel().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    op.hbar().powf(g.dim() as f64 / 2.0) * frob * g.cell_volume()
}

/// `||rho(t) - Q(f(t))||_{L^2}`, which equals the phase-space distance `||W(rho) - f||`.
pub fn phase_l2_distance_series(hf: &Trajectory<DensityMatrix>, vlasov: &Trajectory<PhaseField>) -> Result<Vec<f64>> {
    check_aligned(&hf.times, &vlasov.times)?;
    hf.states.iter().zip(&vlasov.states).map(|(r, f)| Ok(hilbert_schmidt_norm(&r.sub(&weyl_quantize(f)?)?))).collect()
}

/// `||[X_rho, rho]||_{L^1}`.
pub fn exchange_magnitude(kernel: &InteractionKernel, rho: &Operator) -> Result<f64> {
    let x = exchange_operator(kernel, rho)?;
    x.commutator(rho)?.schatten_norm(1.0)
}

pub fn exchange_magnitude_series(hf: &Trajectory<DensityMatrix>, kernel: &InteractionKernel) -> Result<Vec<f64>> {
    hf.states.iter().map(|r| exchange_magnitude(kernel, r)).collect()
}

/// `||[K(x0 - .), rho]||_{L^1}` for grid point `x0`.
pub fn commutator_kernel_norm(kernel: &InteractionKernel, x0: usize, rho: &Operator) -> Result<f64> {
    let grid = rho.grid();
    ensure!(kernel.grid() == grid, Contract, "interaction kernel lives on a different grid");
    ensure!(x0 < grid.size(), Contract, "x0 = {x0} outside the grid");
    let mult: Vec<f64> = (0..grid.size()).map(|i| kernel.between(x0, i)).collect();
    let k = Array2::from_shape_fn(rho.kernel().raw_dim(), |(i, j)| rho.kernel()[[i, j]] * (mult[i] - mult[j]));
    Operator::new(grid.clone(), rho.hbar(), k)?.schatten_norm(1.0)
}

/// Maximum of the commutator norm over `samples` evenly spaced points `x0`.
pub fn sup_commutator_kernel_norm(kernel: &InteractionKernel, rho: &Operator, samples: usize) -> Result<f64> {
    let size = rho.grid().size();
    ensure!(samples >= 1 && samples <= size, Contract, "cannot sample {samples} of {size} points");
    let mut sup: f64 = 0.0;
    for s in 0..samples {
        sup = sup.max(commutator_kernel_norm(kernel, s * size / samples, rho)?);
    }
    Ok(sup)
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in `ln y`.
    pub residual: f64,
    pub points: usize,
}

/// Fits `y ~ c x^slope`; non-positive `y` are dropped with a warning and at least four
/// points must remain.
pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<PowerLawFit> {
    ensure!(x.len() == y.len(), Contract, "{} abscissae for {} values", x.len(), y.len());
    let mut pts = Vec::with_capacity(x.len());
    for (a, b) in x.iter().zip(y) {
        ensure!(*a > 0.0, Contract, "abscissa {a} must be positive");
        if *b > 0.0 && b.is_finite() {
            pts.push((a.ln(), b.ln()));
        } else {
            log::warn!("dropping non-positive value {b} at {a} from the rate fit");
        }
    }
    ensure!(pts.len() >= 4, Domain, "rate fit needs at least 4 positive points, got {}", pts.len());
    let m = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / m, pts.iter().map(|p| p.1).sum::<f64>() / m);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    ensure!(sxx > 0.0, Domain, "rate fit needs distinct abscissae");
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / m).sqrt();
    Ok(PowerLawFit { slope, intercept, residual, points: pts.len() })
}

/// Distances per `hbar` and the fitted rate of the final-time values.
#[derive(Debug, Clone, PartialEq)]
pub struct RateStudy {
    pub hbar_values: Vec<f64>,
    pub distances: Vec<Vec<f64>>,
    pub fitted_slope: f64,
    pub fit_residual: f64,
}

pub fn fit_rate(hbar_values: &[f64], distances: Vec<Vec<f64>>) -> Result<RateStudy> {
    ensure!(hbar_values.len() >= 4, Contract, "a rate study needs at least 4 hbar values");
    ensure!(hbar_values.windows(2).all(|w| w[1] < w[0]), Contract, "hbar values must be strictly decreasing");
    ensure!(hbar_values[0] >= 4.0 * hbar_values[hbar_values.len() - 1], Contract, "hbar values must span a factor of at least 4");
    ensure!(distances.len() == hbar_values.len(), Contract, "one distance series per hbar value required");
    let finals: Vec<f64> = distances.iter().map(|d| d.last().copied().unwrap_or(f64::NAN)).collect();
    let fit = fit_power_law(hbar_values, &finals)?;
    Ok(RateStudy { hbar_values: hbar_values.to_vec(), distances, fitted_slope: fit.slope, fit_residual: fit.residual })
}

/// One member of the `hbar` sweep: HF from `Q(f0)` against Vlasov from `f0` with
/// `f0 = (1 + amplitude cos(2 pi x / L)) / L * N(0, sigma_v^2)(v)` in one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub length: f64,
    /// Velocity window; the grid size is `n = v_max L / (pi hbar)`.
    pub v_max: f64,
    pub amplitude: f64,
    pub sigma_v: f64,
    pub sign: KernelSign,
    pub exponent: f64,
    pub cutoff: f64,
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub commutator_samples: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            length: 2.0 * PI,
            v_max: 4.0,
            amplitude: 0.3,
            sigma_v: 0.6,
            sign: KernelSign::Repulsive,
            exponent: 0.3,
            cutoff: 0.05,
            dt: 0.01,
            t_end: 0.5,
            record_every: 10,
            commutator_samples: 8,
        }
    }
}

impl SweepConfig {
    pub fn grid_points(&self, hbar: f64) -> Result<usize> {
        let exact = self.v_max * self.length / (PI * hbar);
        let n = exact.round();
        ensure!(
            (exact - n).abs() <= 1e-9 * exact && n >= 8.0 && n as usize % 2 == 0,
            Contract,
            "v_max L / (pi hbar) = {exact} must be an even integer >= 8"
        );
        Ok(n as usize)
    }

    pub fn phase_grid(&self, hbar: f64) -> Result<PhaseGrid> {
        PhaseGrid::for_hbar(SpatialGrid::new(1, self.grid_points(hbar)?, self.length)?, hbar)
    }

    pub fn initial_field(&self, hbar: f64) -> Result<PhaseField> {
        let grid = self.phase_grid(hbar)?;
        let (l, a, s) = (self.length, self.amplitude, self.sigma_v);
        let norm = 1.0 / ((2.0 * PI).sqrt() * s);
        PhaseField::from_fn(grid, hbar, |x, v| (1.0 + a * (2.0 * PI * x[0] / l).cos()) / l * norm * (-v[0] * v[0] / (2.0 * s * s)).exp())
    }
}

/// Time series and scalar diagnostics of one sweep member.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepMember {
    pub hbar: f64,
    pub n: usize,
    pub times: Vec<f64>,
    pub distance_l1: Vec<f64>,
    pub distance_l2_phase: Vec<f64>,
    pub remainder_l1: Vec<f64>,
    pub exchange_l1: Vec<f64>,
    /// `sup_x0 ||[K(x0 - .), rho]||_{L^1}` on the initial state.
    pub commutator_sup: f64,
    /// Final-time distance between Hartree (no exchange) and Hartree-Fock states.
    pub hartree_vs_hf: f64,
    /// Trace-norm change made by clipping `Q(f0)` into a fermionic state.
    pub clip_correction: f64,
    pub hf_energy_drift: f64,
    pub vlasov_mass_drift: f64,
}

pub fn run_sweep_member(cfg: &SweepConfig, hbar: f64) -> Result<SweepMember> {
    let f0 = cfg.initial_field(hbar)?;
    let kernel = InteractionKernel::power_law(f0.grid().spatial(), cfg.sign, cfg.exponent, cfg.cutoff)?;
    compare_from(&f0, &kernel, cfg)
}

/// HF from `Q(f0)` against Vlasov from `f0` under `kernel`, using the stepping, recording and
/// sampling parameters of `cfg`; its initial-data and kernel fields are ignored.
pub fn compare_from(f0: &PhaseField, kernel: &InteractionKernel, cfg: &SweepConfig) -> Result<SweepMember> {
    let hbar = f0.hbar();
    let grid = f0.grid().clone();
    let kernel = kernel.clone();
    let (rho0, clip) = DensityMatrix::from_phase_symbol_clipped(f0)?;

    let mut hf_cfg = HfConfig::new(kernel.clone(), cfg.dt, cfg.t_end, true);
    hf_cfg.order = SplittingOrder::Second;
    let e0 = hf_energy(&rho0, &kernel, true, KineticConvention::Half)?.total();
    let mut hf_energy_drift: f64 = 0.0;
    let hf = hf_evolve(&rho0, &hf_cfg, cfg.record_every, |s| {
        if s.step % cfg.record_every.max(1) == 0 {
            let e = hf_energy(s.state, &kernel, true, KineticConvention::Half)?.total();
            hf_energy_drift = hf_energy_drift.max((e - e0).abs());
        }
        Ok(())
    })?;
    let hartree_cfg = HfConfig { exchange: false, ..hf_cfg.clone() };
    let hartree = hf_evolve(&rho0, &hartree_cfg, 0, |_| Ok(()))?;

    let m0 = f0.mass();
    let mut vlasov_mass_drift: f64 = 0.0;
    let vcfg = VlasovConfig::new(kernel.clone(), cfg.dt, cfg.t_end);
    let vl = vlasov_evolve(f0, &vcfg, cfg.record_every, |s| {
        vlasov_mass_drift = vlasov_mass_drift.max((s.state.mass() - m0).abs());
        Ok(())
    })?;

    let distance_l1 = trace_distance_series(&hf, &vl)?;
    let distance_l2_phase = phase_l2_distance_series(&hf, &vl)?;
    let remainder_l1 = vl.states.iter().map(|f| remainder_kernel(f, &kernel)?.schatten_norm(1.0)).collect::<Result<Vec<_>>>()?;
    let exchange_l1 = exchange_magnitude_series(&hf, &kernel)?;
    let commutator_sup = sup_commutator_kernel_norm(&kernel, &rho0, cfg.commutator_samples)?;
    let last = |t: &Trajectory<DensityMatrix>| t.states.last().map(|s| s.operator().clone()).ok_or_else(|| Error::Numerical("empty trajectory".into()));
    let hartree_vs_hf = trace_distance(&last(&hartree)?, &last(&hf)?)?;
    Ok(SweepMember {
        hbar,
        n: grid.spatial().n(),
        times: hf.times,
        distance_l1,
        distance_l2_phase,
        remainder_l1,
        exchange_l1,
        commutator_sup,
        hartree_vs_hf,
        clip_correction: clip.correction_l1,
        hf_energy_drift,
        vlasov_mass_drift,
    })
}
