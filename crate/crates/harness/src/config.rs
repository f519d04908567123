//! Experiment configuration: JSON parsing, defaults, validation and the config hash.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;

/// Largest number of modes per side the fluctuation diagnostic and Wick checks accept.
pub const MAX_FOCK_MODES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    HfRun,
    VlasovRun,
    Compare,
    RateSweep,
    Nbody,
    FockVerify,
    Newton,
    WeylCheck,
}

impl Kind {
    pub fn label(self) -> &'static str {
        match self {
            Kind::HfRun => "hf-run",
            Kind::VlasovRun => "vlasov-run",
            Kind::Compare => "compare",
            Kind::RateSweep => "rate-sweep",
            Kind::Nbody => "nbody",
            Kind::FockVerify => "fock-verify",
            Kind::Newton => "newton",
            Kind::WeylCheck => "weyl-check",
        }
    }

    fn uses_phase_grid(self) -> bool {
        !matches!(self, Kind::Nbody | Kind::FockVerify)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sign {
    Repulsive,
    Attractive,
    /// No interaction.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub length: f64,
    /// Velocity half-window; the spatial grid size is `v_max L / (pi hbar)`.
    pub v_max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { dim: 1, length: 2.0 * PI, v_max: 4.0 }
    }
}

impl GridSpec {
    /// Grid points per axis for `hbar`, if `v_max L / (pi hbar)` is an even integer >= 8.
    pub fn points(&self, hbar: f64) -> Option<usize> {
        let exact = self.v_max * self.length / (PI * hbar);
        let n = exact.round();
        ((exact - n).abs() <= 1e-9 * exact && n >= 8.0 && n as usize % 2 == 0).then_some(n as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSpec {
    pub sign: Sign,
    /// Power-law exponent of `|x|^{-a}`.
    pub a: f64,
    /// Regularization radius.
    pub cutoff: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self { sign: Sign::Repulsive, a: 0.3, cutoff: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialState {
    /// `(1 + amplitude cos(2 pi x_1 / L)) / L^d` times a centred Maxwellian of width `sigma_v`.
    PhaseProfile {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "default_sigma_v")]
        sigma_v: f64,
    },
    /// Periodized Gaussian in position times a Maxwellian, centred at `(center_x, center_v)` on every axis.
    GaussianMixed { center_x: f64, center_v: f64, sigma_x: f64, sigma_v: f64 },
    /// Filled Fermi sea of `hbar^-d` plane waves.
    SlaterPlanewaves,
}

fn default_amplitude() -> f64 {
    0.3
}

fn default_sigma_v() -> f64 {
    0.6
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::PhaseProfile { amplitude: default_amplitude(), sigma_v: default_sigma_v() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Order {
    #[default]
    Second,
    Fourth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kinetic {
    /// `-hbar^2 Delta / 2`.
    #[default]
    Half,
    /// `-hbar^2 Delta`.
    Printed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HfSpec {
    pub exchange: bool,
    pub order: Order,
    pub kinetic: Kinetic,
    /// Exponent of the momentum weight `1 + |hbar k|^weight_order` in the reported Sobolev norm.
    pub weight_order: u32,
}

impl Default for HfSpec {
    fn default() -> Self {
        Self { exchange: true, order: Order::Second, kinetic: Kinetic::Half, weight_order: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSpec {
    pub sites: usize,
    pub length: f64,
    pub particles: Vec<usize>,
    /// Multiplies the pair interaction.
    pub strength: f64,
    /// Amplitude of the cosine trap that prepares the initial Slater determinant.
    pub confinement: f64,
    pub snapshots: usize,
}

impl Default for LatticeSpec {
    fn default() -> Self {
        Self { sites: 16, length: 2.0 * PI, particles: vec![2, 3, 4], strength: 1.0, confinement: 1.0, snapshots: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FockCheck {
    ArakiWyss,
    Wick,
    Fluctuation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FockSpec {
    pub modes: Vec<usize>,
    pub samples: usize,
    pub checks: Vec<FockCheck>,
    /// Multiplies the pair interaction of the fluctuation dynamics; 0 gives a quadratic Hamiltonian.
    pub strength: f64,
    pub snapshots: usize,
}

impl Default for FockSpec {
    fn default() -> Self {
        Self { modes: vec![4], samples: 20, checks: vec![FockCheck::ArakiWyss, FockCheck::Wick, FockCheck::Fluctuation], strength: 0.0, snapshots: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParticleSpec {
    /// Number of sampled particles; 0 selects deterministic quadrature initialization.
    pub count: usize,
    pub sigma_x: f64,
    pub sigma_v: f64,
}

impl Default for ParticleSpec {
    fn default() -> Self {
        Self { count: 0, sigma_x: 0.3, sigma_v: 0.3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeylTest {
    /// `f -> W(Q(f))` on random band-limited symbols.
    RoundTrip,
    /// `||Q(f)||_{L^2} = ||f||_{L^2}` on random band-limited symbols.
    L2Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeylSpec {
    pub test: WeylTest,
    pub samples: usize,
    /// Fourier modes per axis of the random symbols; must stay below `n / 2`.
    pub modes: usize,
}

impl Default for WeylSpec {
    fn default() -> Self {
        Self { test: WeylTest::RoundTrip, samples: 20, modes: 20 }
    }
}

/// Acceptance bands; absent bands are not checked.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bands {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance_slope: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub remainder_slope: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub commutator_slope: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exchange_decreasing: Option<bool>,
    /// Upper bound on Hartree-vs-HF over HF-vs-Vlasov at the smallest `hbar`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hartree_ratio_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strictly_decreasing: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy_drift_per_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass_drift_per_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalization: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rdm_defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conjugation_defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wick_residual: Option<f64>,
    /// Lower bound on the Wick residual of a generic entangled state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wick_violation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fluctuation_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Where artifacts go; not part of the echo or hash.
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar_list: Option<Vec<f64>>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub t_end: f64,
    /// Steps between recorded snapshots.
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Sample points `x0` of the commutator estimate.
    #[serde(default = "default_commutator_samples")]
    pub commutator_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hf: Option<HfSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fock: Option<FockSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub particles: Option<ParticleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weyl: Option<WeylSpec>,
    #[serde(default)]
    pub bands: Bands,
}

fn default_dt() -> f64 {
    0.01
}

fn default_record_every() -> usize {
    10
}

fn default_commutator_samples() -> usize {
    8
}

/// Schema or semantic violation, with the source position when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub message: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            _ => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Semantic failure tied to the config key it concerns.
struct Invalid {
    key: &'static str,
    message: String,
}

fn invalid(key: &'static str, message: impl Into<String>) -> Invalid {
    Invalid { key, message: message.into() }
}

fn require(cond: bool, key: &'static str, message: impl FnOnce() -> String) -> Result<(), Invalid> {
    if cond {
        Ok(())
    } else {
        Err(invalid(key, message()))
    }
}

/// First line of `src` mentioning `"key"`.
fn locate(src: &str, key: &str) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    src.lines().position(|l| l.contains(&quoted)).map(|i| i + 1)
}

impl ExperimentConfig {
    /// Parses JSON without semantic checks.
    pub fn parse(src: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(src).map_err(|e| {
            let text = e.to_string();
            let suffix = format!(" at line {} column {}", e.line(), e.column());
            let message = text.strip_suffix(&suffix).unwrap_or(&text).to_string();
            ConfigError { message, line: Some(e.line()), column: Some(e.column()) }
        })
    }

    /// Parses, fills defaults and validates; errors point at the offending line of `src`.
    pub fn from_json(src: &str) -> Result<Self, ConfigError> {
        Self::parse(src)?.resolved_against(src)
    }

    /// Fills kind-specific defaults and validates, locating errors in `src`.
    pub fn resolved_against(self, src: &str) -> Result<Self, ConfigError> {
        self.resolve_inner().map_err(|e| ConfigError {
            message: format!("{}: {}", e.key, e.message),
            line: locate(src, e.key),
            column: None,
        })
    }

    /// Fills kind-specific defaults and validates.
    pub fn resolved(self) -> Result<Self, ConfigError> {
        self.resolved_against("")
    }

    fn resolve_inner(mut self) -> Result<Self, Invalid> {
        let kind = self.kind;
        if self.name.is_empty() {
            self.name = kind.label().to_string();
        }
        require(
            !self.name.is_empty() && self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_'),
            "name",
            || format!("'{}' must be non-empty ASCII letters, digits, '-' or '_'", self.name),
        )?;
        require(self.dt.is_finite() && self.dt > 0.0, "dt", || format!("must be positive, got {}", self.dt))?;
        require(self.t_end.is_finite() && self.t_end >= 0.0, "t_end", || format!("must be >= 0, got {}", self.t_end))?;
        require(self.record_every >= 1, "record_every", || "must be at least 1".into())?;

        let g = &self.grid;
        require(g.dim == 1 || g.dim == 2, "dim", || format!("must be 1 or 2, got {}", g.dim))?;
        require(g.length.is_finite() && g.length > 0.0, "length", || format!("must be positive, got {}", g.length))?;
        require(g.v_max.is_finite() && g.v_max > 0.0, "v_max", || format!("must be positive, got {}", g.v_max))?;
        let one_dimensional = matches!(kind, Kind::Compare | Kind::RateSweep | Kind::Newton | Kind::WeylCheck);
        require(!one_dimensional || g.dim == 1, "dim", || format!("{} supports dim = 1 only", kind.label()))?;

        let k = &self.kernel;
        if k.sign != Sign::None {
            let upper = if kind == Kind::RateSweep { 0.5 } else { 1.0 };
            require(k.a > 0.0 && k.a < upper, "a", || format!("must lie in (0, {upper}) for {}, got {}", kind.label(), k.a))?;
            require(k.cutoff.is_finite() && k.cutoff > 0.0, "cutoff", || format!("must be positive, got {}", k.cutoff))?;
        }

        self.check_hbar()?;
        self.resolve_sections()?;
        Ok(self)
    }

    fn check_hbar(&self) -> Result<(), Invalid> {
        let kind = self.kind;
        let check_one = |h: f64, key: &'static str| -> Result<(), Invalid> {
            require(h.is_finite() && h > 0.0, key, || format!("must be positive, got {h}"))?;
            require(self.grid.points(h).is_some(), key, || {
                format!("v_max L / (pi hbar) = {} must be an even integer >= 8", self.grid.v_max * self.grid.length / (PI * h))
            })
        };
        match kind {
            Kind::RateSweep => {
                require(self.hbar.is_none(), "hbar", || "rate-sweep takes hbar_list, not hbar".into())?;
                let list = self.hbar_list.as_ref().ok_or_else(|| invalid("kind", "rate-sweep requires hbar_list"))?;
                require(list.len() >= 4, "hbar_list", || format!("needs at least 4 values, got {}", list.len()))?;
                require(list.windows(2).all(|w| w[1] < w[0]), "hbar_list", || "must be strictly decreasing".into())?;
                for &h in list {
                    check_one(h, "hbar_list")?;
                }
                Ok(())
            }
            Kind::Nbody | Kind::FockVerify => {
                require(self.hbar.is_none() && self.hbar_list.is_none(), "hbar", || format!("{} fixes hbar = 1/N itself", kind.label()))
            }
            _ => {
                require(self.hbar_list.is_none(), "hbar_list", || format!("{} takes a single hbar", kind.label()))?;
                let h = self.hbar.ok_or_else(|| invalid("kind", format!("{} requires hbar", kind.label())))?;
                check_one(h, "hbar")
            }
        }
    }

    fn resolve_sections(&mut self) -> Result<(), Invalid> {
        let kind = self.kind;
        let wants_initial = kind.uses_phase_grid() && kind != Kind::WeylCheck;
        section(&mut self.initial, wants_initial, "initial", kind)?;
        section(&mut self.hf, kind == Kind::HfRun, "hf", kind)?;
        section(&mut self.lattice, kind == Kind::Nbody, "lattice", kind)?;
        section(&mut self.fock, kind == Kind::FockVerify, "fock", kind)?;
        section(&mut self.particles, kind == Kind::Newton, "particles", kind)?;
        section(&mut self.weyl, kind == Kind::WeylCheck, "weyl", kind)?;

        if let Some(hf) = &self.hf {
            let w = hf.weight_order;
            require(w > 2 && w % 2 == 0, "weight_order", || format!("must be an even integer > 2, got {w}"))?;
        }

        if let Some(init) = &self.initial {
            match *init {
                InitialState::PhaseProfile { amplitude, sigma_v } => {
                    require(amplitude.abs() < 1.0, "amplitude", || format!("must lie in (-1, 1), got {amplitude}"))?;
                    require(sigma_v > 0.0 && sigma_v < self.grid.v_max, "sigma_v", || format!("must lie in (0, v_max), got {sigma_v}"))?;
                }
                InitialState::GaussianMixed { center_x, center_v, sigma_x, sigma_v } => {
                    require(center_x.is_finite(), "center_x", || "must be finite".into())?;
                    require(center_v.abs() < self.grid.v_max, "center_v", || format!("must lie inside the velocity window, got {center_v}"))?;
                    require(sigma_x > 0.0 && sigma_x < self.grid.length, "sigma_x", || format!("must lie in (0, L), got {sigma_x}"))?;
                    require(sigma_v > 0.0 && sigma_v < self.grid.v_max, "sigma_v", || format!("must lie in (0, v_max), got {sigma_v}"))?;
                }
                InitialState::SlaterPlanewaves => {
                    require(kind == Kind::HfRun, "type", || format!("slater-planewaves has no phase-space symbol; {} needs one", kind.label()))?;
                    let h = self.hbar.unwrap_or(1.0);
                    let count = h.powi(-(self.grid.dim as i32));
                    require((count - count.round()).abs() < 1e-9, "hbar", || format!("hbar^-d = {count} must be an integer orbital count"))?;
                }
            }
        }
        require(self.commutator_samples >= 1, "commutator_samples", || "must be at least 1".into())?;
        if let Some(l) = &self.lattice {
            require((2..=24).contains(&l.sites), "sites", || format!("must lie in 2..=24, got {}", l.sites))?;
            require(l.length > 0.0, "length", || "must be positive".into())?;
            require(!l.particles.is_empty(), "particles", || "needs at least one particle number".into())?;
            require(l.particles.iter().all(|&n| n >= 1 && n <= l.sites), "particles", || format!("each must lie in 1..={}", l.sites))?;
            require(l.snapshots >= 1, "snapshots", || "must be at least 1".into())?;
        }
        if let Some(f) = &self.fock {
            require(!f.modes.is_empty(), "modes", || "needs at least one mode count".into())?;
            require(f.modes.iter().all(|&m| (1..=MAX_FOCK_MODES).contains(&m)), "modes", || format!("each must lie in 1..={MAX_FOCK_MODES}"))?;
            require(f.samples >= 1, "samples", || "must be at least 1".into())?;
            require(!f.checks.is_empty(), "checks", || "needs at least one check".into())?;
            require(f.snapshots >= 1, "snapshots", || "must be at least 1".into())?;
            if f.checks.contains(&FockCheck::Wick) {
                require(f.modes.iter().all(|&m| m >= 4), "modes", || "the Wick check needs at least 4 modes".into())?;
            }
        }
        if let Some(p) = &self.particles {
            require(p.sigma_x > 0.0 && p.sigma_v > 0.0, "particles", || "smoothing widths must be positive".into())?;
        }
        if let Some(w) = &self.weyl {
            let n = self.hbar.and_then(|h| self.grid.points(h)).unwrap_or(0);
            require(w.samples >= 1, "samples", || "must be at least 1".into())?;
            require(w.modes >= 1 && w.modes < n / 2, "modes", || format!("must lie in 1..{}", n / 2))?;
        }
        Ok(())
    }

    /// Spatial grid points per axis of the single-`hbar` kinds.
    pub fn points(&self) -> Option<usize> {
        self.hbar.and_then(|h| self.grid.points(h))
    }

    /// Canonical compact JSON of the resolved config.
    pub fn echo(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical echo, as lowercase hex.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn section<T: Default>(slot: &mut Option<T>, wanted: bool, key: &'static str, kind: Kind) -> Result<(), Invalid> {
    match (wanted, slot.is_some()) {
        (true, false) => *slot = Some(T::default()),
        (false, true) => return Err(invalid(key, format!("section is not used by {}", kind.label()))),
        _ => {}
    }
    Ok(())
}
