//! Run configuration shared by the command-line driver and the C interface.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::NEWTON_TOL;
use crate::mechsys::{
    make_harmonic, make_kepler, make_kepler_runge_lenz, make_toda, Interval, LagrangianSystem, PhasePoint, SampleBox,
    TodaBoundary,
};
use crate::multitime::DEFAULT_STEP;
use crate::sampling::DEFAULT_SEED;

/// Environment variable holding the default sampling seed.
pub const SEED_ENV: &str = "PLURIFORM_SEED";

/// Built-in system families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    Kepler,
    /// Kepler with all three Runge–Lenz symmetries.
    KeplerRl,
    Toda,
    Harmonic,
}

impl SystemKind {
    pub const ALL: [SystemKind; 4] = [
        SystemKind::Kepler,
        SystemKind::KeplerRl,
        SystemKind::Toda,
        SystemKind::Harmonic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SystemKind::Kepler => "kepler",
            SystemKind::KeplerRl => "kepler-rl",
            SystemKind::Toda => "toda",
            SystemKind::Harmonic => "harmonic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            Error::Usage(format!(
                "unknown system {s:?}; expected kepler, kepler-rl, toda or harmonic"
            ))
        })
    }
}

/// System name plus its parameters; parameters not used by the family are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSpec {
    pub name: SystemKind,
    pub alpha: f64,
    pub n: usize,
    pub boundary: TodaBoundary,
    pub omega: f64,
}

impl Default for SystemSpec {
    fn default() -> Self {
        SystemSpec {
            name: SystemKind::Toda,
            alpha: 1.0,
            n: 4,
            boundary: TodaBoundary::Periodic,
            omega: 1.0,
        }
    }
}

impl SystemSpec {
    pub fn build(&self) -> Result<LagrangianSystem> {
        match self.name {
            SystemKind::Kepler => make_kepler(self.alpha),
            SystemKind::KeplerRl => make_kepler_runge_lenz(self.alpha),
            SystemKind::Toda => make_toda(self.n, self.boundary),
            SystemKind::Harmonic => {
                if !self.omega.is_finite() {
                    return Err(Error::Parameter(format!("omega must be finite, got {}", self.omega)));
                }
                Ok(make_harmonic(self.omega))
            }
        }
    }

    /// The system on which symmetry commutators are examined. Kepler carries a
    /// single symmetry, so its commutators use the permuted Runge–Lenz copies.
    pub fn build_for_commutators(&self) -> Result<LagrangianSystem> {
        match self.name {
            SystemKind::Kepler => make_kepler_runge_lenz(self.alpha),
            _ => self.build(),
        }
    }

    /// Deterministic starting point used when none is given: a bounded Kepler
    /// orbit, a generic Toda state, and `(1, 0)` for the oscillator.
    pub fn default_phase(&self) -> PhasePoint {
        match self.name {
            SystemKind::Kepler | SystemKind::KeplerRl => PhasePoint::new(vec![0.9, 0.3, 0.2], vec![-0.4, 0.8, 0.3]),
            SystemKind::Toda => {
                let n = self.n;
                PhasePoint::new(
                    (0..n).map(|i| 0.6 * (1.7 * i as f64 + 0.3).sin()).collect(),
                    (0..n).map(|i| 0.9 * (2.3 * i as f64 + 0.1).cos()).collect(),
                )
            }
            SystemKind::Harmonic => PhasePoint::new(vec![1.0], vec![0.0]),
        }
    }
}

/// Threshold overrides. `identity` replaces every per-check default threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub identity: Option<f64>,
    pub newton: f64,
    pub bracket: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: None,
            newton: NEWTON_TOL,
            bracket: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub step: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { step: DEFAULT_STEP }
    }
}

/// Sampling-box override applied uniformly to every coordinate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoxOverride {
    pub x: Option<[f64; 2]>,
    pub xdot: Option<[f64; 2]>,
    pub xddot: Option<[f64; 2]>,
    pub min_radius: Option<f64>,
}

impl BoxOverride {
    pub fn is_empty(&self) -> bool {
        self == &BoxOverride::default()
    }

    fn interval(name: &str, v: [f64; 2]) -> Result<Interval> {
        if !(v[0].is_finite() && v[1].is_finite() && v[0] < v[1]) {
            return Err(Error::Usage(format!(
                "box {name} must be a finite interval lo < hi, got {v:?}"
            )));
        }
        Ok(Interval::new(v[0], v[1]))
    }

    pub fn apply(&self, b: &SampleBox) -> Result<SampleBox> {
        let mut out = b.clone();
        if let Some(v) = self.x {
            out.x = vec![Self::interval("x", v)?; b.x.len()];
        }
        if let Some(v) = self.xdot {
            out.xdot = vec![Self::interval("xdot", v)?; b.xdot.len()];
        }
        if let Some(v) = self.xddot {
            out.xddot = vec![Self::interval("xddot", v)?; b.xddot.len()];
        }
        if let Some(r) = self.min_radius {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::Usage(format!("box min_radius must be non-negative, got {r}")));
            }
            out.min_radius = r;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub count: usize,
    pub seed: Option<u64>,
    #[serde(rename = "box")]
    pub box_override: BoxOverride,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            count: 100,
            seed: None,
            box_override: BoxOverride::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    #[default]
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

/// Complete configuration of one run, loadable from JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSpec,
    pub tolerances: Tolerances,
    pub integrator: IntegratorConfig,
    pub sampling: SamplingConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Usage(format!("{name} must be positive, got {v}")))
            }
        };
        if let Some(t) = self.tolerances.identity {
            positive("tolerances.identity", t)?;
        }
        positive("tolerances.newton", self.tolerances.newton)?;
        positive("tolerances.bracket", self.tolerances.bracket)?;
        positive("integrator.step", self.integrator.step)?;
        if self.sampling.count < 1 {
            return Err(Error::Usage("sampling.count must be at least 1".into()));
        }
        Ok(())
    }

    /// Seed from the config, else from `PLURIFORM_SEED`, else the built-in default.
    pub fn resolved_seed(&self) -> Result<u64> {
        if let Some(s) = self.sampling.seed {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
            Err(_) => Ok(DEFAULT_SEED),
        }
    }

    /// Builds the configured system with any sampling-box override applied.
    pub fn build_system(&self) -> Result<LagrangianSystem> {
        self.with_box(self.system.build()?)
    }

    pub fn build_commutator_system(&self) -> Result<LagrangianSystem> {
        self.with_box(self.system.build_for_commutators()?)
    }

    fn with_box(&self, sys: LagrangianSystem) -> Result<LagrangianSystem> {
        if self.sampling.box_override.is_empty() {
            return Ok(sys);
        }
        let b = self.sampling.box_override.apply(sys.sample_box())?;
        Ok(sys.with_sample_box(b))
    }
}
