//! Named verification checks over seeded samples, producing serializable reports.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::hamiltonian::{bracket_constancy, hk_gradients_at, legendre_identities_residual, legendre_inverse};
use crate::mechsys::{dvec, kepler_commutator_rederived, LagrangianSystem, PhasePoint};
use crate::multitime::{multitime_el_residual, offshell_identity_1, offshell_identity_2, on_shell_extended_jet};
use crate::noether::{
    flux_from_integral, flux_lemma_residual, integral_characteristic_residual, noether_integral, symmetry_residual,
};
use crate::sampling::JetSampler;
use crate::symalg::{commutator_characteristic, commuting_residual, flux_commutation_residual, rij};

/// Round-trip `J ↔ F` must reproduce the flux to this accuracy.
pub const ROUND_TRIP_TOL: f64 = 1e-12;
/// A commutator component larger than this counts as non-vanishing.
pub const NONCOMMUTATION_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Symmetry,
    FluxLemma,
    Characteristic,
    Brackets,
    Rij,
    Commutator,
    FluxCommutation,
    #[serde(rename = "offshell1")]
    Offshell1,
    #[serde(rename = "offshell2")]
    Offshell2,
    LegendreIdentities,
    MultitimeEl,
}

impl Check {
    pub const ALL: [Check; 11] = [
        Check::Symmetry,
        Check::FluxLemma,
        Check::Characteristic,
        Check::Brackets,
        Check::Rij,
        Check::Commutator,
        Check::FluxCommutation,
        Check::Offshell1,
        Check::Offshell2,
        Check::LegendreIdentities,
        Check::MultitimeEl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Symmetry => "symmetry",
            Check::FluxLemma => "flux-lemma",
            Check::Characteristic => "characteristic",
            Check::Brackets => "brackets",
            Check::Rij => "rij",
            Check::Commutator => "commutator",
            Check::FluxCommutation => "flux-commutation",
            Check::Offshell1 => "offshell1",
            Check::Offshell2 => "offshell2",
            Check::LegendreIdentities => "legendre-identities",
            Check::MultitimeEl => "multitime-el",
        }
    }

    /// Threshold used when no override is configured.
    pub fn default_threshold(self) -> f64 {
        match self {
            Check::Symmetry | Check::FluxLemma | Check::LegendreIdentities => 1e-10,
            Check::Offshell1 | Check::Offshell2 => 1e-8,
            _ => 1e-9,
        }
    }

    /// Parses a comma-separated list; `all` selects every check.
    pub fn parse_list(s: &str) -> Result<Vec<Check>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "all" {
                out.extend(Check::ALL);
            } else {
                out.push(part.parse()?);
            }
        }
        if out.is_empty() {
            return Err(Error::Usage("no checks selected".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        out.retain(|c| seen.insert(*c));
        Ok(out)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown check {s:?}")))
    }
}

/// Outcome of one check. `pass` holds exactly when `max_residual < threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: Check,
    pub system: String,
    pub samples: usize,
    pub seed: u64,
    pub max_residual: f64,
    pub threshold: f64,
    pub pass: bool,
    /// Informational findings are reported but never fail a run.
    pub informational: bool,
    pub constants: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckReport {
    fn new(check: Check, system: &str, samples: usize, seed: u64, max_residual: f64, threshold: f64) -> Self {
        CheckReport {
            check,
            system: system.to_string(),
            samples,
            seed,
            max_residual,
            threshold,
            pass: max_residual < threshold,
            informational: false,
            constants: BTreeMap::new(),
            note: None,
        }
    }

    fn constant(mut self, key: impl Into<String>, value: f64) -> Self {
        self.constants.insert(key.into(), value);
        self
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Whether this report lets the run succeed.
    pub fn ok(&self) -> bool {
        self.pass || self.informational
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub system: String,
    pub seed: u64,
    pub count: usize,
    pub all_pass: bool,
    pub checks: Vec<CheckReport>,
}

fn vmax(v: &DVector<f64>) -> f64 {
    v.amax()
}

/// Maximum over `count` samples of `f`, which returns a non-negative residual.
fn max_over<F>(count: usize, mut f: F) -> Result<f64>
where
    F: FnMut() -> Result<f64>,
{
    let mut worst = 0.0f64;
    for _ in 0..count {
        let r = f()?;
        // NaN must surface as a failure.
        worst = if r.is_nan() { f64::NAN } else { worst.max(r) };
        if worst.is_nan() {
            break;
        }
    }
    Ok(worst)
}

fn pairs(m: usize) -> Vec<(usize, usize)> {
    (1..=m).flat_map(|k| (k + 1..=m).map(move |l| (k, l))).collect()
}

/// Shared inputs of a verification run.
pub struct Verifier<'a> {
    sys: &'a LagrangianSystem,
    commutator_sys: &'a LagrangianSystem,
    cfg: &'a RunConfig,
    seed: u64,
}

impl<'a> Verifier<'a> {
    pub fn new(sys: &'a LagrangianSystem, commutator_sys: &'a LagrangianSystem, cfg: &'a RunConfig, seed: u64) -> Self {
        Verifier {
            sys,
            commutator_sys,
            cfg,
            seed,
        }
    }

    fn count(&self) -> usize {
        self.cfg.sampling.count
    }

    fn threshold(&self, check: Check) -> f64 {
        match check {
            Check::Brackets => self.cfg.tolerances.bracket,
            _ => self
                .cfg
                .tolerances
                .identity
                .unwrap_or_else(|| check.default_threshold()),
        }
    }

    fn sampler(&self) -> JetSampler {
        JetSampler::new(self.seed)
    }

    fn report(&self, check: Check, max_residual: f64) -> CheckReport {
        CheckReport::new(
            check,
            self.sys.name(),
            self.count(),
            self.seed,
            max_residual,
            self.threshold(check),
        )
    }

    fn skipped(&self, check: Check, sys: &LagrangianSystem, why: &str) -> CheckReport {
        CheckReport::new(check, sys.name(), 0, self.seed, 0.0, self.threshold(check)).note(why)
    }

    /// Phase-space sample whose Legendre inverse uses the configured Newton tolerance.
    fn phase_sample(&self, sampler: &mut JetSampler, sys: &LagrangianSystem) -> PhasePoint {
        sampler.phase(sys)
    }

    fn bracket_at(&self, sys: &LagrangianSystem, k: usize, l: usize, phase: &PhasePoint) -> Result<f64> {
        let pt = legendre_inverse(sys, phase, self.cfg.tolerances.newton)?;
        let p = dvec(&phase.p);
        let (kx, kp) = hk_gradients_at(sys, k, &pt, &p)?;
        let (lx, lp) = hk_gradients_at(sys, l, &pt, &p)?;
        Ok(kx.dot(&lp) - kp.dot(&lx))
    }

    /// Measured `c_kl` from the mean bracket over seeded phase points.
    fn bracket_constant(&self, sys: &LagrangianSystem, k: usize, l: usize) -> Result<f64> {
        Ok(bracket_constancy(sys, k, l, self.count().max(2), self.seed)?.mean_value)
    }

    pub fn run(&self, check: Check) -> Result<CheckReport> {
        let sys = self.sys;
        let m = sys.symmetry_count();
        let mut s = self.sampler();
        match check {
            Check::Symmetry => {
                let r = max_over(self.count(), || {
                    let jet = s.jet2(sys);
                    let mut w = 0.0f64;
                    for k in 1..=m {
                        w = w.max(symmetry_residual(sys, k, &jet)?.abs());
                    }
                    Ok(w)
                })?;
                Ok(self.report(check, r))
            }
            Check::FluxLemma => {
                let r = max_over(self.count(), || {
                    let pt = s.tangent(sys);
                    let mut w = 0.0f64;
                    for k in 1..=m {
                        w = w.max(vmax(&flux_lemma_residual(sys, k, &pt)?));
                    }
                    Ok(w)
                })?;
                Ok(self.report(check, r))
            }
            Check::Characteristic => {
                let mut round_trip = 0.0f64;
                let mut reference = 0.0f64;
                let r = max_over(self.count(), || {
                    let jet = s.jet2(sys);
                    let pt = jet.tangent();
                    let mut w = 0.0f64;
                    for k in 1..=m {
                        w = w.max(integral_characteristic_residual(sys, k, &jet)?.abs());
                        let j = noether_integral(sys, k, &pt)?;
                        let f = sys.flux(k, &pt)?;
                        round_trip = round_trip.max((flux_from_integral(sys, k, &pt, j)? - f).abs());
                        if let Some(jr) = sys.reference_integral().and_then(|r| r(k, &pt)) {
                            reference = reference.max((j - jr).abs());
                        }
                    }
                    Ok(w)
                })?;
                let mut rep = self.report(check, r).constant("round_trip", round_trip);
                if sys.reference_integral().is_some() {
                    rep = rep.constant("integral_reference_mismatch", reference);
                }
                Ok(rep)
            }
            Check::Brackets => {
                let mut energy = 0.0f64;
                for _ in 0..self.count() {
                    let phase = self.phase_sample(&mut s, sys);
                    for k in 1..=m {
                        energy = energy.max(self.bracket_at(sys, 0, k, &phase)?.abs());
                    }
                }
                let mut rep_consts = Vec::new();
                let mut worst = energy;
                for (k, l) in pairs(m) {
                    let b = bracket_constancy(sys, k, l, self.count().max(2), self.seed)?;
                    worst = worst.max(b.max_deviation);
                    rep_consts.push((format!("c_{k}{l}"), b.mean_value));
                    rep_consts.push((format!("deviation_{k}{l}"), b.max_deviation));
                }
                let mut rep = self.report(check, worst).constant("energy_bracket", energy);
                for (key, v) in rep_consts {
                    rep = rep.constant(key, v);
                }
                Ok(rep)
            }
            Check::Rij => {
                if m < 2 {
                    return Ok(self.skipped(check, sys, "needs at least two symmetries"));
                }
                let mut skew = 0.0f64;
                let mut reference = 0.0f64;
                let r = max_over(self.count(), || {
                    let pt = s.tangent(sys);
                    for (k, l) in pairs(m) {
                        let a = rij(sys, k, l, &pt)?;
                        skew = skew.max((&a + a.transpose()).amax());
                        skew = skew.max((&a + rij(sys, l, k, &pt)?).amax());
                        if let Some(rr) = sys.reference_rij().and_then(|f| f(k, l, &pt)) {
                            reference = reference.max((&a - rr).amax());
                        }
                    }
                    Ok(skew.max(reference))
                })?;
                let mut rep = self.report(check, r).constant("skew", skew);
                if sys.reference_rij().is_some() {
                    rep = rep.constant("reference_mismatch", reference);
                }
                Ok(rep)
            }
            Check::Commutator => self.commutator(),
            Check::FluxCommutation => {
                if m < 2 {
                    return Ok(self.skipped(check, sys, "needs at least two symmetries"));
                }
                let cs: Vec<_> = pairs(m)
                    .into_iter()
                    .map(|(k, l)| Ok(((k, l), self.bracket_constant(sys, k, l)?)))
                    .collect::<Result<_>>()?;
                let r = max_over(self.count(), || {
                    let jet = s.jet2(sys);
                    let mut w = 0.0f64;
                    for &((k, l), c) in &cs {
                        w = w.max(flux_commutation_residual(sys, k, l, &jet, c)?.abs());
                    }
                    Ok(w)
                })?;
                let mut rep = self.report(check, r);
                for ((k, l), c) in cs {
                    rep = rep.constant(format!("c_{k}{l}"), c);
                }
                Ok(rep)
            }
            Check::Offshell1 => {
                let r = max_over(self.count(), || {
                    let jet = s.extended(sys);
                    let mut w = 0.0f64;
                    for k in 1..=m {
                        w = w.max(offshell_identity_1(sys, k, &jet)?.abs());
                    }
                    Ok(w)
                })?;
                Ok(self.report(check, r))
            }
            Check::Offshell2 => {
                if m < 2 {
                    return Ok(self.skipped(check, sys, "needs at least two symmetries"));
                }
                let cs: Vec<_> = pairs(m)
                    .into_iter()
                    .map(|(k, l)| Ok(((k, l), self.bracket_constant(sys, k, l)?)))
                    .collect::<Result<_>>()?;
                let r = max_over(self.count(), || {
                    let jet = s.extended(sys);
                    let mut w = 0.0f64;
                    for &((k, l), c) in &cs {
                        w = w.max(offshell_identity_2(sys, k, l, &jet, c)?.abs());
                    }
                    Ok(w)
                })?;
                let mut rep = self.report(check, r);
                for ((k, l), c) in cs {
                    rep = rep.constant(format!("c_{k}{l}"), c);
                }
                Ok(rep)
            }
            Check::LegendreIdentities => {
                let r = max_over(self.count(), || {
                    let phase = self.phase_sample(&mut s, sys);
                    let (i1, i2) = legendre_identities_residual(sys, &phase)?;
                    Ok(i1.amax().max(i2.amax()))
                })?;
                Ok(self.report(check, r))
            }
            Check::MultitimeEl => {
                let mut on_shell = 0.0f64;
                let mut reference = 0.0f64;
                for _ in 0..self.count() {
                    let pt = s.tangent(sys);
                    let jet = on_shell_extended_jet(sys, &pt)?;
                    for k in 1..=m {
                        on_shell = on_shell.max(vmax(&multitime_el_residual(sys, k, &jet)?));
                        if let Some(reference_fn) = sys.reference_multitime_el() {
                            let generic = s.extended(sys);
                            if let Some(want) = reference_fn(k, &generic) {
                                let got = multitime_el_residual(sys, k, &generic)?;
                                reference = reference.max((got - dvec(&want)).amax());
                            }
                            if let Some(want) = reference_fn(k, &jet) {
                                let got = multitime_el_residual(sys, k, &jet)?;
                                reference = reference.max((got - dvec(&want)).amax());
                            }
                        }
                    }
                }
                let mut rep = self
                    .report(check, on_shell.max(reference))
                    .constant("on_shell", on_shell);
                if sys.reference_multitime_el().is_some() {
                    rep = rep.constant("reference_mismatch", reference);
                }
                Ok(rep)
            }
        }
    }

    fn commutator(&self) -> Result<CheckReport> {
        let check = Check::Commutator;
        let sys = self.commutator_sys;
        let m = sys.symmetry_count();
        if m < 2 {
            return Ok(self.skipped(check, sys, "needs at least two symmetries"));
        }
        let mut s = self.sampler();
        let threshold = self.threshold(check);
        if sys.reference_commutator().is_none() {
            let r = max_over(self.count(), || {
                let jet = s.jet2(sys);
                let mut w = 0.0f64;
                for (k, l) in pairs(m) {
                    w = w.max(vmax(&commuting_residual(sys, k, l, &jet)?));
                }
                Ok(w)
            })?;
            return Ok(CheckReport::new(
                check,
                sys.name(),
                self.count(),
                self.seed,
                r,
                threshold,
            ));
        }
        // Symmetries known not to commute: compare with the closed forms and
        // measure how far the commutator is from vanishing modulo the equations.
        let reference = sys.reference_commutator().unwrap();
        let is_kepler = sys.dim() == 3 && sys.name().starts_with("kepler");
        let mut printed = 0.0f64;
        let mut rederived = 0.0f64;
        let mut min_magnitude = f64::INFINITY;
        let mut residual_min = f64::INFINITY;
        let mut above = 0usize;
        for _ in 0..self.count() {
            let jet = s.jet2(sys);
            let c = commutator_characteristic(sys, 1, 2, &jet)?;
            for rc in reference(1, 2, &jet) {
                printed = printed.max((c[rc.component] - rc.value).abs());
            }
            if is_kepler {
                rederived = rederived.max((c[0] - kepler_commutator_rederived(&jet)).abs());
            }
            let mag = c[0].abs();
            min_magnitude = min_magnitude.min(mag);
            if mag > NONCOMMUTATION_FLOOR {
                above += 1;
            }
            residual_min = residual_min.min(vmax(&commuting_residual(sys, 1, 2, &jet)?));
        }
        let mut rep = CheckReport::new(check, sys.name(), self.count(), self.seed, printed, threshold)
            .constant("printed_mismatch", printed)
            .constant("min_component_magnitude", min_magnitude)
            .constant("fraction_above_floor", above as f64 / self.count() as f64)
            .constant("min_commuting_residual", residual_min)
            .note("symmetries do not commute; reported for information only");
        if is_kepler {
            rep = rep.constant("rederived_mismatch", rederived);
        }
        rep.informational = true;
        Ok(rep)
    }
}

/// Runs `checks` in order on the configured system.
pub fn run_checks(cfg: &RunConfig, checks: &[Check]) -> Result<VerifyReport> {
    cfg.validate()?;
    let seed = cfg.resolved_seed()?;
    let sys = cfg.build_system()?;
    let csys = cfg.build_commutator_system()?;
    let v = Verifier::new(&sys, &csys, cfg, seed);
    let reports = checks.iter().map(|&c| v.run(c)).collect::<Result<Vec<_>>>()?;
    Ok(VerifyReport {
        system: sys.name().to_string(),
        seed,
        count: cfg.sampling.count,
        all_pass: reports.iter().all(CheckReport::ok),
        checks: reports,
    })
}
