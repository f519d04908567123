//! One runner per experiment kind, each producing tables, metrics and band checks.

use crate::config::{Bands, ExperimentConfig, FockCheck, InitialState, Kind, Kinetic, Order, Sign, WeylTest};
use crate::output::{Cell, Check, RunOutput, Summary, Table};
use lattice::fock_doubled::{conjugation_defect, fluctuation_number, unitarity_defect, FluctuationStudy, ModeSystem, Side};
use lattice::quantum_nbody::{k_rdm, nbody_vs_hf, one_rdm, wick_residual, FermionState, LatticeModel, NbodyStudy};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use semiclassical::comparison::{compare_from, fit_power_law, fit_rate, SweepConfig, SweepMember};
use semiclassical::density_matrix::DensityMatrix;
use semiclassical::hartree_fock::{hf_energy, hf_evolve, HfConfig, KineticConvention, SplittingOrder};
use semiclassical::interaction::{InteractionKernel, KernelSign};
use semiclassical::linalg::{eigh, spectral_function};
use semiclassical::newton::{empirical_vs_vlasov, newton_evolve, ParticleEnsemble, Smoothing};
use semiclassical::spectral::{PhaseGrid, SpatialGrid};
use semiclassical::vlasov::{vlasov_energy, vlasov_evolve, VlasovConfig};
use semiclassical::wigner::{weyl_quantize, wigner_transform_unchecked, PhaseField};
use semiclassical::{Error, Result, C64};
use serde_json::{json, Map, Value};
use std::f64::consts::PI;
use std::time::Instant;

const SKIPPED_AT_ZERO: &str = "t_end = 0: initial diagnostics only";

/// Runs `cfg` (already resolved) with at most `jobs` worker threads.
pub fn execute(cfg: &ExperimentConfig, jobs: usize) -> Result<RunOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))?;
    let start = Instant::now();
    let mut run = pool.install(|| match cfg.kind {
        Kind::HfRun => hf_run(cfg),
        Kind::VlasovRun => vlasov_run(cfg),
        Kind::Compare => compare(cfg),
        Kind::RateSweep => rate_sweep(cfg),
        Kind::Nbody => nbody(cfg),
        Kind::FockVerify => fock_verify(cfg),
        Kind::Newton => newton(cfg),
        Kind::WeylCheck => weyl_check(cfg),
    })?;
    run.timings.push(("total".into(), start.elapsed().as_secs_f64()));
    let checks = std::mem::take(&mut run.checks);
    let pass = !checks.iter().any(Check::failed);
    Ok(RunOutput {
        summary: Summary { config_hash: cfg.hash(), name: cfg.name.clone(), kind: cfg.kind.label().into(), metrics: run.metrics, checks, pass },
        tables: run.tables,
        timings: run.timings,
    })
}

#[derive(Default)]
struct Partial {
    metrics: Map<String, Value>,
    checks: Vec<Check>,
    tables: Vec<Table>,
    timings: Vec<(String, f64)>,
}

impl Partial {
    fn metric(&mut self, name: &str, value: impl Into<Value>) {
        self.metrics.insert(name.into(), value.into());
    }
}

fn per_time(drift: f64, t_end: f64) -> f64 {
    if t_end > 0.0 {
        drift / t_end
    } else {
        drift
    }
}

fn hbar_of(cfg: &ExperimentConfig) -> Result<f64> {
    cfg.hbar.ok_or_else(|| Error::Contract(format!("{} requires hbar", cfg.kind.label())))
}

fn phase_grid(cfg: &ExperimentConfig, hbar: f64) -> Result<PhaseGrid> {
    let n = cfg.grid.points(hbar).ok_or_else(|| Error::Contract(format!("hbar = {hbar} gives no admissible grid size")))?;
    PhaseGrid::for_hbar(SpatialGrid::new(cfg.grid.dim, n, cfg.grid.length)?, hbar)
}

fn core_sign(sign: Sign) -> Option<KernelSign> {
    match sign {
        Sign::Repulsive => Some(KernelSign::Repulsive),
        Sign::Attractive => Some(KernelSign::Attractive),
        Sign::None => None,
    }
}

fn kernel_on(cfg: &ExperimentConfig, grid: &SpatialGrid) -> Result<InteractionKernel> {
    match core_sign(cfg.kernel.sign) {
        Some(sign) => InteractionKernel::power_law(grid, sign, cfg.kernel.a, cfg.kernel.cutoff),
        None => Ok(InteractionKernel::zero(grid)),
    }
}

fn maxwellian(v: f64, center: f64, sigma: f64) -> f64 {
    (-(v - center).powi(2) / (2.0 * sigma * sigma)).exp() / ((2.0 * PI).sqrt() * sigma)
}

/// Normalized Gaussian on the circle of circumference `l`, summed over nearby images.
fn wrapped_gaussian(x: f64, center: f64, sigma: f64, l: f64) -> f64 {
    let images = (6.0 * sigma / l).ceil() as i64 + 1;
    (-images..=images).map(|k| maxwellian(x, center + k as f64 * l, sigma)).sum()
}

fn initial_symbol(cfg: &ExperimentConfig, grid: &PhaseGrid, hbar: f64) -> Result<PhaseField> {
    let l = cfg.grid.length;
    let d = grid.spatial().dim();
    match cfg.initial.clone().unwrap_or_default() {
        InitialState::PhaseProfile { amplitude, sigma_v } => PhaseField::from_fn(grid.clone(), hbar, |x, v| {
            let vel: f64 = (0..d).map(|i| maxwellian(v[i], 0.0, sigma_v)).product();
            (1.0 + amplitude * (2.0 * PI * x[0] / l).cos()) / l.powi(d as i32) * vel
        }),
        InitialState::GaussianMixed { center_x, center_v, sigma_x, sigma_v } => PhaseField::from_fn(grid.clone(), hbar, |x, v| {
            (0..d).map(|i| wrapped_gaussian(x[i], center_x, sigma_x, l) * maxwellian(v[i], center_v, sigma_v)).product()
        }),
        InitialState::SlaterPlanewaves => Err(Error::Contract("slater-planewaves has no phase-space symbol".into())),
    }
}

/// The `hbar^-d` plane waves of smallest `|k|`, ties broken lexicographically.
fn fermi_sea(grid: &SpatialGrid, hbar: f64) -> Result<Vec<Vec<C64>>> {
    let d = grid.dim();
    let count = hbar.powi(-(d as i32)).round() as usize;
    let half = grid.n() as i64 / 2;
    let axis: Vec<i64> = (1 - half..half).collect();
    let mut waves: Vec<[i64; 2]> = if d == 1 { axis.iter().map(|&k| [k, 0]).collect() } else { axis.iter().flat_map(|&a| axis.iter().map(move |&b| [a, b])).collect() };
    if waves.len() < count {
        return Err(Error::Capacity(format!("{count} orbitals requested, grid resolves {}", waves.len())));
    }
    waves.sort_by_key(|k| (k[0] * k[0] + k[1] * k[1], *k));
    let l = grid.length();
    let norm = l.powf(-(d as f64) / 2.0);
    Ok(waves[..count]
        .iter()
        .map(|k| {
            (0..grid.size())
                .map(|i| {
                    let x = grid.point(i);
                    C64::from_polar(norm, 2.0 * PI / l * (k[0] as f64 * x[0] + k[1] as f64 * x[1]))
                })
                .collect()
        })
        .collect())
}

fn hf_run(cfg: &ExperimentConfig) -> Result<Partial> {
    let mut out = Partial::default();
    let hbar = hbar_of(cfg)?;
    let grid = phase_grid(cfg, hbar)?;
    let spatial = grid.spatial().clone();
    let kernel = kernel_on(cfg, &spatial)?;
    let spec = cfg.hf.clone().unwrap_or_default();
    let rho0 = match cfg.initial.clone().unwrap_or_default() {
        InitialState::SlaterPlanewaves => DensityMatrix::from_slater(&spatial, &fermi_sea(&spatial, hbar)?, hbar)?,
        _ => {
            let (rho, clip) = DensityMatrix::from_phase_symbol_clipped(&initial_symbol(cfg, &grid, hbar)?)?;
            out.metric("clip_correction", clip.correction_l1);
            rho
        }
    };
    let mut hf_cfg = HfConfig::new(kernel.clone(), cfg.dt, cfg.t_end, spec.exchange);
    hf_cfg.kinetic = match spec.kinetic {
        Kinetic::Half => KineticConvention::Half,
        Kinetic::Printed => KineticConvention::Printed,
    };
    hf_cfg.order = match spec.order {
        Order::Second => SplittingOrder::Second,
        Order::Fourth => SplittingOrder::Fourth,
    };
    let start = Instant::now();
    let traj = hf_evolve(&rho0, &hf_cfg, cfg.record_every, |_| Ok(()))?;
    out.timings.push(("hf evolution".into(), start.elapsed().as_secs_f64()));

    let mut table = Table::new("hf_run", &["t", "hbar_d_trace", "density_mass", "wigner_mass", "energy"]);
    let cell = spatial.cell_volume();
    let mut e0 = None;
    let (mut energy_drift, mut normalization): (f64, f64) = (0.0, 0.0);
    for (t, rho) in traj.times.iter().zip(&traj.states) {
        let trace = rho.normalization();
        let density: f64 = rho.spatial_density().iter().sum::<f64>() * cell;
        let wigner = wigner_transform_unchecked(rho.operator(), &grid)?.mass();
        let energy = hf_energy(rho.operator(), &kernel, spec.exchange, hf_cfg.kinetic)?.total();
        let e0 = *e0.get_or_insert(energy);
        energy_drift = energy_drift.max((energy - e0).abs());
        normalization = [trace, density, wigner].iter().fold(normalization, |m, q| m.max((q - 1.0).abs()));
        table.push(vec![Cell::Float(*t), Cell::Float(trace), Cell::Float(density), Cell::Float(wigner), Cell::Float(energy)]);
    }
    out.tables.push(table);
    out.metric("grid_points", spatial.n());
    out.metric("energy_drift", energy_drift);
    out.metric("energy_drift_per_time", per_time(energy_drift, cfg.t_end));
    out.metric("normalization_defect", normalization);
    let (first, last) = (traj.states.first(), traj.states.last());
    for (label, state) in [("initial", first), ("final", last)] {
        if let Some(rho) = state {
            let norms = rho.sobolev_norm(2.0, spec.weight_order)?;
            out.metric(&format!("sobolev_w12_{label}"), norms.total);
        }
    }
    if let Some(limit) = cfg.bands.energy_drift_per_time {
        out.checks.push(Check::at_most("energy_drift_per_time", per_time(energy_drift, cfg.t_end), limit));
    }
    if let Some(limit) = cfg.bands.normalization {
        out.checks.push(Check::at_most("normalization_defect", normalization, limit));
    }
    Ok(out)
}

fn vlasov_run(cfg: &ExperimentConfig) -> Result<Partial> {
    let mut out = Partial::default();
    let hbar = hbar_of(cfg)?;
    let grid = phase_grid(cfg, hbar)?;
    let kernel = kernel_on(cfg, grid.spatial())?;
    let f0 = initial_symbol(cfg, &grid, hbar)?;
    let start = Instant::now();
    let traj = vlasov_evolve(&f0, &VlasovConfig::new(kernel.clone(), cfg.dt, cfg.t_end), cfg.record_every, |_| Ok(()))?;
    out.timings.push(("vlasov evolution".into(), start.elapsed().as_secs_f64()));

    let mut table = Table::new("vlasov_run", &["t", "mass", "energy", "min_value"]);
    let (m0, e0) = (f0.mass(), vlasov_energy(&f0, &kernel)?.total());
    let (mut mass_drift, mut energy_drift, mut min_value) = (0.0f64, 0.0f64, f64::INFINITY);
    for (t, f) in traj.times.iter().zip(&traj.states) {
        let (mass, energy) = (f.mass(), vlasov_energy(f, &kernel)?.total());
        let min = f.values().iter().copied().fold(f64::INFINITY, f64::min);
        mass_drift = mass_drift.max((mass - m0).abs());
        energy_drift = energy_drift.max((energy - e0).abs());
        min_value = min_value.min(min);
        table.push(vec![Cell::Float(*t), Cell::Float(mass), Cell::Float(energy), Cell::Float(min)]);
    }
    out.tables.push(table);
    out.metric("grid_points", grid.spatial().n());
    out.metric("mass_drift", mass_drift);
    out.metric("mass_drift_per_time", per_time(mass_drift, cfg.t_end));
    out.metric("energy_drift", energy_drift);
    out.metric("min_value", min_value);
    if let Some(limit) = cfg.bands.mass_drift_per_time {
        out.checks.push(Check::at_most("mass_drift_per_time", per_time(mass_drift, cfg.t_end), limit));
    }
    Ok(out)
}

fn sweep_config(cfg: &ExperimentConfig) -> SweepConfig {
    SweepConfig {
        length: cfg.grid.length,
        v_max: cfg.grid.v_max,
        dt: cfg.dt,
        t_end: cfg.t_end,
        record_every: cfg.record_every,
        commutator_samples: cfg.commutator_samples,
        ..SweepConfig::default()
    }
}

fn sweep_member(cfg: &ExperimentConfig, hbar: f64) -> Result<SweepMember> {
    let grid = phase_grid(cfg, hbar)?;
    let kernel = kernel_on(cfg, grid.spatial())?;
    let f0 = initial_symbol(cfg, &grid, hbar)?;
    compare_from(&f0, &kernel, &sweep_config(cfg))
}

const COMPARISON_COLUMNS: [&str; 6] = ["hbar", "t", "distance_L1", "distance_L2_phase", "B_L1", "exchange_L1"];

fn comparison_rows(table: &mut Table, m: &SweepMember) {
    for i in 0..m.times.len() {
        table.push(
            [m.hbar, m.times[i], m.distance_l1[i], m.distance_l2_phase[i], m.remainder_l1[i], m.exchange_l1[i]].into_iter().map(Cell::Float).collect(),
        );
    }
}

fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(0.0, f64::max)
}

fn member_json(m: &SweepMember) -> Value {
    json!({
        "hbar": m.hbar,
        "grid_points": m.n,
        "final_distance_L1": m.distance_l1.last().copied().unwrap_or(0.0),
        "max_distance_L1": max_of(&m.distance_l1),
        "max_B_L1": max_of(&m.remainder_l1),
        "max_exchange_L1": max_of(&m.exchange_l1),
        "commutator_sup": m.commutator_sup,
        "hartree_vs_hf": m.hartree_vs_hf,
        "clip_correction": m.clip_correction,
        "hf_energy_drift": m.hf_energy_drift,
        "vlasov_mass_drift": m.vlasov_mass_drift,
    })
}

fn compare(cfg: &ExperimentConfig) -> Result<Partial> {
    let mut out = Partial::default();
    let start = Instant::now();
    let member = sweep_member(cfg, hbar_of(cfg)?)?;
    out.timings.push(("comparison".into(), start.elapsed().as_secs_f64()));
    let mut table = Table::new("comparison", &COMPARISON_COLUMNS);
    comparison_rows(&mut table, &member);
    out.tables.push(table);
    if let Value::Object(fields) = member_json(&member) {
        out.metrics.extend(fields);
    }
    if let Some(limit) = cfg.bands.max_distance {
        out.checks.push(Check::at_most("max_distance_L1", max_of(&member.distance_l1), limit));
    }
    Ok(out)
}

/// Evaluates the sweep bands of `bands` on finished members (ordered by decreasing `hbar`).
pub fn sweep_checks(members: &[SweepMember], bands: &Bands, t_end: f64) -> Result<(Map<String, Value>, Vec<Check>)> {
    let mut metrics = Map::new();
    let mut checks = Vec::new();
    let hbars: Vec<f64> = members.iter().map(|m| m.hbar).collect();
    metrics.insert("members".into(), Value::Array(members.iter().map(member_json).collect()));
    if t_end == 0.0 {
        let requested = [
            ("distance_slope", bands.distance_slope.is_some()),
            ("remainder_slope", bands.remainder_slope.is_some()),
            ("commutator_slope", bands.commutator_slope.is_some()),
            ("exchange_decreasing", bands.exchange_decreasing == Some(true)),
            ("hartree_ratio", bands.hartree_ratio_max.is_some()),
        ];
        checks.extend(requested.iter().filter(|r| r.1).map(|r| Check::skipped(r.0, SKIPPED_AT_ZERO)));
        return Ok((metrics, checks));
    }
    let rate = fit_rate(&hbars, members.iter().map(|m| m.distance_l1.clone()).collect())?;
    let remainder = fit_power_law(&hbars, &members.iter().map(|m| max_of(&m.remainder_l1)).collect::<Vec<_>>())?;
    let commutator = fit_power_law(&hbars, &members.iter().map(|m| m.commutator_sup).collect::<Vec<_>>())?;
    let exchange: Vec<f64> = members.iter().map(|m| max_of(&m.exchange_l1)).collect();
    let exchange_fit = fit_power_law(&hbars, &exchange)?;
    let decreasing = exchange.windows(2).all(|w| w[1] < w[0]);
    let smallest = members.last().ok_or_else(|| Error::Contract("empty sweep".into()))?;
    let final_distance = smallest.distance_l1.last().copied().unwrap_or(0.0);
    let hartree_ratio = smallest.hartree_vs_hf / final_distance;

    metrics.insert("distance_slope".into(), rate.fitted_slope.into());
    metrics.insert("distance_fit_residual".into(), rate.fit_residual.into());
    metrics.insert("remainder_slope".into(), remainder.slope.into());
    metrics.insert("remainder_fit_residual".into(), remainder.residual.into());
    metrics.insert("commutator_slope".into(), commutator.slope.into());
    metrics.insert("commutator_fit_residual".into(), commutator.residual.into());
    metrics.insert("exchange_slope".into(), exchange_fit.slope.into());
    metrics.insert("exchange_decreasing".into(), decreasing.into());
    metrics.insert("hartree_ratio".into(), hartree_ratio.into());
    metrics.insert("max_hf_energy_drift".into(), members.iter().map(|m| m.hf_energy_drift).fold(0.0, f64::max).into());
    metrics.insert("max_vlasov_mass_drift".into(), members.iter().map(|m| m.vlasov_mass_drift).fold(0.0, f64::max).into());

    if let Some(band) = bands.distance_slope {
        checks.push(Check::within("distance_slope", rate.fitted_slope, band));
    }
    if let Some(band) = bands.remainder_slope {
        checks.push(Check::within("remainder_slope", remainder.slope, band));
    }
    if let Some(band) = bands.commutator_slope {
        checks.push(Check::within("commutator_slope", commutator.slope, band));
    }
    if bands.exchange_decreasing == Some(true) {
        checks.push(Check::holds("exchange_decreasing", decreasing, "strictly decreasing in hbar"));
    }
    if let Some(limit) = bands.hartree_ratio_max {
        checks.push(Check::at_most("hartree_ratio", hartree_ratio, limit));
    }
    Ok((metrics, checks))
}

/// Runs every member of a rate sweep in parallel on the current pool.
pub fn sweep_members(cfg: &ExperimentConfig) -> Result<Vec<SweepMember>> {
    let hbars = cfg.hbar_list.clone().ok_or_else(|| Error::Contract("rate-sweep requires hbar_list".into()))?;
    hbars.par_iter().map(|&h| sweep_member(cfg, h)).collect()
}

fn rate_sweep(cfg: &ExperimentConfig) -> Result<Partial> {
    let mut out = Partial::default();
    let start = Instant::now();
    let members = sweep_members(cfg)?;
    out.timings.push(("sweep".into(), start.elapsed().as_secs_f64()));
    let mut table = Table::new("rate_sweep", &COMPARISON_COLUMNS);
    for m in &members {
        comparison_rows(&mut table, m);
    }
    out.tables.push(table);
    let (metrics, checks) = sweep_checks(&members, &cfg.bands, cfg.t_end)?;
    out.metrics = metrics;
    out.checks = checks;
    Ok(out)
}

fn lattice_model(cfg: &ExperimentConfig, sites: usize, length: f64, strength: f64) -> Result<LatticeModel> {
    match core_sign(cfg.kernel.sign) {
        Some(sign) if strength != 0.0 => LatticeModel::power_law(sites, length, sign, cfg.kernel.a, cfg.kernel.cutoff, strength),
        _ => LatticeModel::free(sites, length),
    }
}

fn nbody(cfg: &ExperimentConfig) -> Result<Partial> {
    let mut out = Partial::default();
    let spec = cfg.lattice.clone().unwrap_or_default();
    let model = lattice_model(cfg, spec.sites, spec.length, spec.strength)?;
    let study = NbodyStudy { t_end: cfg.t_end, dt: cfg.dt, snapshots: spec.snapshots, confinement: spec.confinement };
    let start = Instant::now();
    let results = spec.particles.par_iter().map(|&n| nbody_vs_hf(&model, n, &study)).collect::<Result<Vec<_>>>()?;
    out.timings.push(("nbody".into(), start.elapsed().as_secs_f64()));
    let mut table = Table::new("nbody", &["N", "t", "distance"]);
    for r in &results {
        for (t, d) in r.times.iter().zip(&r.distances) {
            table.push(vec![Cell::Int(r.n as i64), Cell::Float(*t), Cell::Float(*d)]);
        }
    }
    out.tables.push(table);
    let finals: Vec<f64> = results.iter().map(|r| r.distances.last().copied().unwrap_or(0.0)).collect();
    let decreasing = finals.windows(2).all(|w| w[1] < w[0]);
    let max_distance = results.iter().flat_map(|r| r.distances.iter().copied()).fold(0.0, f64::max);
    out.metric("particles", spec.particles.clone());
    out.metric("final_distances", finals);
    out.metric("strictly_decreasing", decreasing);
    out.metric("max_distance", max_distance);
    if spec.particles.windows(2).any(|w| w[1] <= w[0]) {
        log::warn!("particle numbers are not increasing; the trend check compares them in the given order");
    }
    if cfg.bands.strictly_decreasing == Some(true) {
        out.checks.push(if cfg.t_end == 0.0 {
            Check::skipped("strictly_decreasing", SKIPPED_AT_ZERO)
        } else {
            Check::holds("strictly_decreasing", decreasing, "final distance strictly decreasing in N")
        });
    }
    if let Some(limit) = cfg.bands.max_distance {
        out.checks.push(Check::at_most("max_distance", max_distance, limit));
    }
    Ok(out)
}

fn max_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

fn random_hermitian(m: usize, rng: &mut impl Rng) -> Array2<C64> {
    let g = Array2::from_shape_fn((m, m), |_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    &g + &g.t().mapv(|z| z.conj())
}

/// Random one-particle density with eigenvalues uniform in `[lo, hi]`.
fn random_density(m: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> Result<Array2<C64>> {
    let (_, vecs) = eigh(random_hermitian(m, rng).view())?;
    let vals = Array1::from_shape_fn(m, |_| lo + (hi - lo) * rng.random::<f64>());
    Ok(spectral_function(&vals, &vecs, |l| C64::new(l, 0.0)))
}

fn fock_verify(cfg: &ExperimentConfig) -> Result<Partial> {
    let mut out = Partial::default();
    let spec = cfg.fock.clone().unwrap_or_default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for check in &spec.checks {
        let start = Instant::now();
        match check {
            FockCheck::ArakiWyss => araki_wyss_check(cfg, &spec.modes, spec.samples, &mut rng, &mut out)?,
            FockCheck::Wick => wick_check(cfg, &spec.modes, spec.samples, &mut rng, &mut out)?,
            FockCheck::Fluctuation => fluctuation_check(cfg, &spec, &mut rng, &mut out)?,
        }
        out.timings.push((format!("{check:?}"), start.elapsed().as_secs_f64()));
    }
    Ok(out)
}

fn araki_wyss_check(cfg: &ExperimentConfig, modes: &[usize], samples: usize, rng: &mut ChaCha8Rng, out: &mut Partial) -> Result<()> {
    let mut table = Table::new("araki_wyss", &["m", "sample", "rdm_defect", "conjugation_defect", "unitarity_defect", "vacuum_defect"]);
    let (mut rdm, mut conj, mut unit, mut vac): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for &m in modes {
        let system = ModeSystem::new(m)?;
        for s in 0..samples {
            let op = random_density(m, 0.0, 1.0, rng)?;
            let phi = system.araki_wyss(&op)?;
            let d_rdm = max_diff(&system.one_rdm(&phi, Side::Left), &op).max(max_diff(&system.one_rdm(&phi, Side::Right), &op.mapv(|z| z.conj())));
            let r = system.bogoliubov_rotation(&op)?;
            let d_conj = conjugation_defect(&system, &op, &r)?;
            let d_unit = unitarity_defect(&r);
            let rotated = r.matvec(system.vacuum().amplitudes());
            let d_vac = rotated.iter().zip(phi.amplitudes()).fold(0.0f64, |acc, (a, b)| acc.max((a - b).norm()));
            table.push(vec![Cell::Int(m as i64), Cell::Int(s as i64), Cell::Float(d_rdm), Cell::Float(d_conj), Cell::Float(d_unit), Cell::Float(d_vac)]);
            rdm = rdm.max(d_rdm);
            conj = conj.max(d_conj);
            unit = unit.max(d_unit);
            vac = vac.max(d_vac);
        }
    }
    out.tables.push(table);
    out.metric("max_rdm_defect", rdm);
    out.metric("max_conjugation_defect", conj);
    out.metric("max_unitarity_defect", unit);
    out.metric("max_vacuum_defect", vac);
    if let Some(limit) = cfg.bands.rdm_defect {
        out.checks.push(Check::at_most("rdm_defect", rdm, limit));
    }
    if let Some(limit) = cfg.bands.conjugation_defect {
        out.checks.push(Check::at_most("conjugation_defect", conj, limit));
        out.checks.push(Check::at_most("unitarity_defect", unit, limit));
        out.checks.push(Check::at_most("vacuum_defect", vac, limit));
    }
    Ok(())
}

fn wick_check(cfg: &ExperimentConfig, modes: &[usize], samples: usize, rng: &mut ChaCha8Rng, out: &mut Partial) -> Result<()> {
    let mut table = Table::new("wick", &["m", "sample", "slater_residual", "araki_wyss_residual", "entangled_residual"]);
    let (mut slater_max, mut aw_max, mut entangled_min): (f64, f64, f64) = (0.0, 0.0, f64::INFINITY);
    for &m in modes {
        let n = m / 2;
        let system = ModeSystem::new(m)?;
        for s in 0..samples {
            let (_, vecs) = eigh(random_hermitian(m, rng).view())?;
            let orbitals: Vec<Vec<C64>> = (0..n).map(|j| vecs.column(j).to_vec()).collect();
            let slater = FermionState::slater(m, &orbitals)?;
            let r_slater = wick_residual(&one_rdm(&slater).gamma, &k_rdm(&slater, 2)?);
            let phi = system.araki_wyss(&random_density(m, 0.05, 0.95, rng)?)?;
            let r_aw = wick_residual(&system.one_rdm(&phi, Side::Left), &system.two_rdm(&phi, Side::Left));
            let entangled = FermionState::random(m, n, rng)?;
            let r_ent = wick_residual(&one_rdm(&entangled).gamma, &k_rdm(&entangled, 2)?);
            table.push(vec![Cell::Int(m as i64), Cell::Int(s as i64), Cell::Float(r_slater), Cell::Float(r_aw), Cell::Float(r_ent)]);
            slater_max = slater_max.max(r_slater);
            aw_max = aw_max.max(r_aw);
            entangled_min = entangled_min.min(r_ent);
        }
    }
    out.tables.push(table);
    out.metric("max_slater_wick_residual", slater_max);
    out.metric("max_araki_wyss_wick_residual", aw_max);
    out.metric("min_entangled_wick_residual", entangled_min);
    if let Some(limit) = cfg.bands.wick_residual {
        out.checks.push(Check::at_most("slater_wick_residual", slater_max, limit));
        out.checks.push(Check::at_most("araki_wyss_wick_residual", aw_max, limit));
    }
    if let Some(limit) = cfg.bands.wick_violation {
        out.checks.push(Check::at_least("entangled_wick_residual", entangled_min, limit));
    }
    Ok(())
}

fn fluctuation_check(cfg: &ExperimentConfig, spec: &crate::config::FockSpec, rng: &mut ChaCha8Rng, out: &mut Partial) -> Result<()> {
    let mut table = Table::new("fluctuation", &["m", "sample", "t", "number_plus_one", "distance", "bound"]);
    let study = FluctuationStudy { t_end: cfg.t_end, dt: cfg.dt, snapshots: spec.snapshots };
    let quadratic = spec.strength == 0.0 || cfg.kernel.sign == Sign::None;
    let (mut initial, mut worst): (f64, f64) = (0.0, 0.0);
    for &m in &spec.modes {
        let model = lattice_model(cfg, m, cfg.grid.length, spec.strength)?;
        for s in 0..spec.samples {
            let op = random_density(m, 0.1, 0.9, rng)?;
            let records = fluctuation_number(&model, &op, &study)?;
            if let Some(first) = records.first() {
                initial = initial.max((first.number_plus_one - 1.0).abs()).max(first.distance);
            }
            for r in &records {
                worst = worst.max(r.distance);
                table.push(vec![Cell::Int(m as i64), Cell::Int(s as i64), Cell::Float(r.time), Cell::Float(r.number_plus_one), Cell::Float(r.distance), Cell::Float(r.bound)]);
            }
        }
    }
    out.tables.push(table);
    out.metric("quadratic_hamiltonian", quadratic);
    out.metric("initial_fluctuation", initial);
    out.metric("max_fluctuation_distance", worst);
    if let Some(limit) = cfg.bands.fluctuation_distance {
        out.checks.push(Check::at_most("initial_fluctuation", initial, limit));
        out.checks.push(if quadratic {
            Check::at_most("quadratic_fluctuation_distance", worst, limit)
        } else {
            Check::skipped("quadratic_fluctuation_distance", "interacting dynamics: reported only")
        });
    }
    Ok(())
}

fn newton(cfg: &ExperimentConfig) -> Result<Partial> {
    let mut out = Partial::default();
    let hbar = hbar_of(cfg)?;
    let grid = phase_grid(cfg, hbar)?;
    let kernel = kernel_on(cfg, grid.spatial())?;
    let f0 = initial_symbol(cfg, &grid, hbar)?;
    let spec = cfg.particles.clone().unwrap_or_default();
    let ens = if spec.count == 0 {
        ParticleEnsemble::quadrature(&f0)?
    } else {
        ParticleEnsemble::sample(&f0, spec.count, &mut ChaCha8Rng::seed_from_u64(cfg.seed))?
    };
    let start = Instant::now();
    let particles = newton_evolve(&ens, &kernel, cfg.dt, cfg.t_end, cfg.record_every, |_| Ok(()))?;
    out.timings.push(("newton evolution".into(), start.elapsed().as_secs_f64()));
    let start = Instant::now();
    let vlasov = vlasov_evolve(&f0, &VlasovConfig::new(kernel.clone(), cfg.dt, cfg.t_end), cfg.record_every, |_| Ok(()))?;
    out.timings.push(("vlasov evolution".into(), start.elapsed().as_secs_f64()));
    let distances = empirical_vs_vlasov(&particles, &vlasov, Smoothing { sigma_x: spec.sigma_x, sigma_v: spec.sigma_v })?;

    let mut table = Table::new("newton", &["t", "distance", "energy", "momentum"]);
    let mut e0 = None;
    let mut drift: f64 = 0.0;
    for ((t, state), d) in particles.times.iter().zip(&particles.states).zip(&distances) {
        let energy = state.energy(&kernel)?.total();
        drift = drift.max((energy - *e0.get_or_insert(energy)).abs());
        table.push(vec![Cell::Float(*t), Cell::Float(*d), Cell::Float(energy), Cell::Float(state.momentum()[0])]);
    }
    out.tables.push(table);
    out.metric("particles", ens.len());
    out.metric("energy_drift", drift);
    out.metric("energy_drift_per_time", per_time(drift, cfg.t_end));
    out.metric("max_distance", max_of(&distances));
    if let Some(limit) = cfg.bands.energy_drift_per_time {
        out.checks.push(Check::at_most("energy_drift_per_time", per_time(drift, cfg.t_end), limit));
    }
    if let Some(limit) = cfg.bands.max_distance {
        out.checks.push(Check::at_most("max_distance", max_of(&distances), limit));
    }
    Ok(out)
}

/// Random real symbol with Fourier content of at most `modes` per axis, scaled to unit sup norm.
fn band_limited(grid: &PhaseGrid, hbar: f64, modes: usize, rng: &mut impl Rng) -> Result<PhaseField> {
    let (nx, nv) = (grid.spatial().n(), grid.n_v());
    let width = 2 * modes - 1;
    // coef[q][r + modes - 1] multiplies exp(2 pi i (q i + r k) / n)
    let mut coef = vec![C64::new(0.0, 0.0); modes * width];
    for q in 0..modes {
        for r in 0..modes {
            for s in [1i64, -1] {
                let (a, p) = (rng.random::<f64>(), 2.0 * PI * rng.random::<f64>());
                coef[q * width + (s * r as i64 + modes as i64 - 1) as usize] += C64::from_polar(a, p);
            }
        }
    }
    let wave = |n: usize, m: i64, j: usize| C64::from_polar(1.0, 2.0 * PI * (m * j as i64) as f64 / n as f64);
    let partial: Vec<C64> = (0..nx)
        .flat_map(|i| {
            let coef = &coef;
            (0..width).map(move |r| (0..modes).map(|q| coef[q * width + r] * wave(nx, q as i64, i)).sum::<C64>())
        })
        .collect();
    let table: Vec<f64> = (0..nx)
        .flat_map(|i| {
            let partial = &partial;
            (0..nv).map(move |k| (0..width).map(|r| (partial[i * width + r] * wave(nv, r as i64 - modes as i64 + 1, k)).re).sum::<f64>())
        })
        .collect();
    let scale = table.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (h, dv, v_max) = (grid.spatial().spacing(), grid.dv(), grid.v_max());
    PhaseField::from_fn(grid.clone(), hbar, |x, v| {
        let i = (x[0] / h).round() as usize;
        let k = ((v[0] + v_max) / dv).round() as usize;
        table[i * nv + k] / scale
    })
}

fn weyl_check(cfg: &ExperimentConfig) -> Result<Partial> {
    let mut out = Partial::default();
    let hbar = hbar_of(cfg)?;
    let grid = phase_grid(cfg, hbar)?;
    let spec = cfg.weyl.clone().unwrap_or_default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut table = Table::new("weyl_check", &["sample", "operator_side", "symbol_side", "defect"]);
    let mut worst: f64 = 0.0;
    let start = Instant::now();
    for s in 0..spec.samples {
        let f = band_limited(&grid, hbar, spec.modes, &mut rng)?;
        let rho = weyl_quantize(&f)?;
        let (quantum, classical, defect) = match spec.test {
            WeylTest::RoundTrip => {
                let back = wigner_transform_unchecked(&rho, &grid)?;
                let sup = |g: &PhaseField| g.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
                (sup(&back), sup(&f), back.max_abs_diff(&f))
            }
            WeylTest::L2Identity => {
                let (q, c) = (rho.schatten_norm(2.0)?, f.l2_norm());
                (q, c, (q - c).abs())
            }
        };
        worst = worst.max(defect);
        table.push(vec![Cell::Int(s as i64), Cell::Float(quantum), Cell::Float(classical), Cell::Float(defect)]);
    }
    out.timings.push(("weyl".into(), start.elapsed().as_secs_f64()));
    out.tables.push(table);
    out.metric("grid_points", grid.spatial().n());
    out.metric("max_defect", worst);
    if let Some(limit) = cfg.bands.max_defect {
        out.checks.push(Check::at_most("max_defect", worst, limit));
    }
    Ok(out)
}
