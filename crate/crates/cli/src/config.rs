//! Run configuration files (TOML).

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use kicked_rotor::fdtd::GridConfig;
use kicked_rotor::scenario::{
    DelayMode, DoublePulseProtocol, Runner, DEFAULT_PEAK_RESOLUTION, DEFAULT_POINTS_PER_REVIVAL,
};
use kicked_rotor::series::Engine;
use kicked_rotor::thermal::{EnsembleSpec, MoleculeSpec, DEFAULT_WEIGHT_CUTOFF};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CliError, Overrides};

const PRESETS: &str = include_str!("../data/molecules.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoleculeEntry {
    pub name: String,
    pub b_per_cm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_alpha_c_m2_per_v: Option<f64>,
    #[serde(default = "one")]
    pub spin_weight_even: f64,
    #[serde(default = "one")]
    pub spin_weight_odd: f64,
}

fn one() -> f64 {
    1.0
}

impl MoleculeEntry {
    pub fn spec(&self) -> MoleculeSpec {
        MoleculeSpec {
            name: self.name.clone(),
            b_wavenumber: self.b_per_cm,
            delta_alpha: self.delta_alpha_c_m2_per_v,
            spin_weight_even: self.spin_weight_even,
            spin_weight_odd: self.spin_weight_odd,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PresetFile {
    molecule: Vec<MoleculeEntry>,
}

/// Molecules bundled with the binary.
pub fn presets() -> Vec<MoleculeEntry> {
    toml::from_str::<PresetFile>(PRESETS).expect("bundled presets parse").molecule
}

pub fn preset(name: &str) -> Option<MoleculeEntry> {
    presets().into_iter().find(|m| m.name.eq_ignore_ascii_case(name))
}

/// A preset by name, optionally with spin weights overridden, or a full inline entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MoleculeRef {
    Preset {
        preset: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spin_weight_even: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spin_weight_odd: Option<f64>,
    },
    Inline(MoleculeEntry),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdtdConfig {
    #[serde(default = "FdtdConfig::n_theta")]
    pub n_theta: usize,
    #[serde(default = "FdtdConfig::n_phi")]
    pub n_phi: usize,
    #[serde(default = "FdtdConfig::m_max")]
    pub m_max: i64,
    #[serde(default = "FdtdConfig::delta_tau")]
    pub delta_tau: f64,
}

impl FdtdConfig {
    fn n_theta() -> usize {
        GridConfig::default().n_theta
    }
    fn n_phi() -> usize {
        GridConfig::default().n_phi
    }
    fn m_max() -> i64 {
        GridConfig::default().m_max
    }
    fn delta_tau() -> f64 {
        GridConfig::default().delta_tau
    }

    pub fn grid(&self) -> GridConfig {
        GridConfig { n_theta: self.n_theta, n_phi: self.n_phi, m_max: self.m_max, delta_tau: self.delta_tau }
    }
}

impl Default for FdtdConfig {
    fn default() -> Self {
        Self { n_theta: Self::n_theta(), n_phi: Self::n_phi(), m_max: Self::m_max(), delta_tau: Self::delta_tau() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    #[serde(default)]
    pub kind: Engine,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_max: Option<i64>,
    #[serde(default = "yes")]
    pub fold_reflection: bool,
    #[serde(default = "EngineConfig::points")]
    pub points_per_revival: usize,
    #[serde(default = "EngineConfig::resolution")]
    pub peak_resolution_trev: f64,
    #[serde(default = "EngineConfig::cutoff")]
    pub weight_cutoff: f64,
    #[serde(default)]
    pub fdtd: FdtdConfig,
}

fn yes() -> bool {
    true
}

impl EngineConfig {
    fn points() -> usize {
        DEFAULT_POINTS_PER_REVIVAL
    }
    fn resolution() -> f64 {
        DEFAULT_PEAK_RESOLUTION
    }
    fn cutoff() -> f64 {
        DEFAULT_WEIGHT_CUTOFF
    }
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            kind: Engine::default(),
            l_max: None,
            fold_reflection: true,
            points_per_revival: Self::points(),
            peak_resolution_trev: Self::resolution(),
            weight_cutoff: Self::cutoff(),
            fdtd: FdtdConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayKind {
    #[default]
    AutoPeak,
    AutoTrough,
    AutoQuarter,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub p1: f64,
    pub p2: f64,
    #[serde(default = "ProtocolConfig::pol")]
    pub pol_angle_deg: f64,
    #[serde(default)]
    pub delay: DelayKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_ps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_trev: Option<f64>,
}

impl ProtocolConfig {
    fn pol() -> f64 {
        45.0
    }
}

/// A time given either in picoseconds or in revival periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeValue {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trev: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "parameter", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScanConfig {
    /// Pulse-2 polarization from `from_deg` to `to_deg` inclusive.
    PolAngle { from_deg: f64, to_deg: f64, step_deg: f64 },
    /// `p1 × p2` grid at the protocol's angle and delay mode.
    Strengths { p1: Vec<f64>, p2: Vec<f64> },
    /// `p1 + p2 = total` against `p1 - p2`.
    FixedTotal { total: f64, differences: Vec<f64> },
    /// Pulse-2 delay, `points` samples across `center ± halfwidth`.
    Delay { center: TimeValue, halfwidth: TimeValue, points: usize },
    /// Alignment maximum after pulse 1 alone.
    Alignment { p1: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub n_theta: usize,
    pub n_phi: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "OutputConfig::dir")]
    pub dir: PathBuf,
    #[serde(default = "OutputConfig::stem")]
    pub stem: String,
    #[serde(default = "OutputConfig::formats")]
    pub formats: Vec<Format>,
}

impl OutputConfig {
    fn dir() -> PathBuf {
        PathBuf::from("out")
    }
    fn stem() -> String {
        "run".into()
    }
    fn formats() -> Vec<Format> {
        vec![Format::Csv, Format::Json, Format::Svg]
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: Self::dir(), stem: Self::stem(), formats: Self::formats() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub molecule: MoleculeRef,
    pub temperature_k: f64,
    #[serde(default)]
    pub engine: EngineConfig,
    pub protocol: ProtocolConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn invalid(key: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("invalid `{key}`: {why}"))
}

fn finite_nonneg(key: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("{v} must be finite and >= 0")))
    }
}

fn angle(key: &str, deg: f64) -> Result<(), CliError> {
    if deg.is_finite() && deg.abs() <= 90.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("{deg} outside [-90, 90] degrees")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(format!("parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn molecule(&self) -> Result<MoleculeSpec, CliError> {
        let entry = match &self.molecule {
            MoleculeRef::Preset { preset: name, spin_weight_even, spin_weight_odd } => {
                let mut e = preset(name).ok_or_else(|| {
                    let known: Vec<String> = presets().into_iter().map(|m| m.name).collect();
                    invalid("molecule.preset", format!("unknown preset `{name}` (known: {})", known.join(", ")))
                })?;
                if let Some(w) = spin_weight_even {
                    e.spin_weight_even = *w;
                }
                if let Some(w) = spin_weight_odd {
                    e.spin_weight_odd = *w;
                }
                e
            }
            MoleculeRef::Inline(e) => e.clone(),
        };
        let spec = entry.spec();
        spec.validate().map_err(|e| invalid("molecule", e))?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let mol = self.molecule()?;
        if !(self.temperature_k.is_finite() && self.temperature_k > 0.0) {
            return Err(invalid("temperature_k", format!("{} must be finite and > 0", self.temperature_k)));
        }
        let e = &self.engine;
        if let Some(l) = e.l_max {
            if l < 0 {
                return Err(invalid("engine.l_max", "must be >= 0"));
            }
        }
        if e.points_per_revival < 16 {
            return Err(invalid("engine.points_per_revival", "must be at least 16"));
        }
        if !(e.peak_resolution_trev > 0.0 && e.peak_resolution_trev <= 0.01) {
            return Err(invalid("engine.peak_resolution_trev", "must be in (0, 0.01]"));
        }
        if !(e.weight_cutoff > 0.0 && e.weight_cutoff < 1.0) {
            return Err(invalid("engine.weight_cutoff", "must be in (0, 1)"));
        }
        e.fdtd.grid().validate().map_err(|err| invalid("engine.fdtd", err))?;

        let p = &self.protocol;
        finite_nonneg("protocol.p1", p.p1)?;
        finite_nonneg("protocol.p2", p.p2)?;
        angle("protocol.pol_angle_deg", p.pol_angle_deg)?;
        match (p.delay, p.delay_ps, p.delay_trev) {
            (DelayKind::Explicit, Some(t), None) | (DelayKind::Explicit, None, Some(t)) => {
                if !(t.is_finite() && t > 0.0) {
                    return Err(invalid("protocol.delay_ps/delay_trev", format!("{t} must be finite and > 0")));
                }
            }
            (DelayKind::Explicit, _, _) => {
                return Err(invalid("protocol.delay", "explicit delay needs exactly one of delay_ps, delay_trev"))
            }
            (_, None, None) => {}
            _ => return Err(invalid("protocol.delay_ps/delay_trev", "only allowed with delay = \"explicit\"")),
        }
        let needs_search = matches!(p.delay, DelayKind::AutoPeak | DelayKind::AutoTrough);
        if needs_search
            && p.p1 == 0.0
            && !matches!(self.scan, Some(ScanConfig::Strengths { .. } | ScanConfig::FixedTotal { .. }))
        {
            return Err(invalid("protocol.p1", "the alignment search needs p1 > 0"));
        }

        match &self.scan {
            None => {}
            Some(ScanConfig::PolAngle { from_deg, to_deg, step_deg }) => {
                angle("scan.from_deg", *from_deg)?;
                angle("scan.to_deg", *to_deg)?;
                if !(*step_deg > 0.0 && to_deg >= from_deg) {
                    return Err(invalid("scan.step_deg", "need step_deg > 0 and to_deg >= from_deg"));
                }
            }
            Some(ScanConfig::Strengths { p1, p2 }) => {
                if p1.is_empty() || p2.is_empty() {
                    return Err(invalid("scan.p1/p2", "must not be empty"));
                }
                for v in p1 {
                    finite_nonneg("scan.p1", *v)?;
                    if needs_search && *v == 0.0 {
                        return Err(invalid("scan.p1", "the alignment search needs p1 > 0"));
                    }
                }
                p2.iter().try_for_each(|v| finite_nonneg("scan.p2", *v))?;
            }
            Some(ScanConfig::FixedTotal { total, differences }) => {
                finite_nonneg("scan.total", *total)?;
                if differences.is_empty() {
                    return Err(invalid("scan.differences", "must not be empty"));
                }
                for d in differences {
                    if !(d.abs() <= *total) || (needs_search && d.abs() == *total) {
                        return Err(invalid("scan.differences", format!("{d} leaves a pulse strength <= 0")));
                    }
                }
            }
            Some(ScanConfig::Delay { center, halfwidth, points }) => {
                let c = self.time(&mol, "scan.center", center)?;
                let h = self.time(&mol, "scan.halfwidth", halfwidth)?;
                if *points < 2 {
                    return Err(invalid("scan.points", "must be at least 2"));
                }
                if !(h > 0.0 && c - h > 0.0 && c + h < TAU) {
                    return Err(invalid("scan.halfwidth", "window must lie inside (0, T_rev)"));
                }
            }
            Some(ScanConfig::Alignment { p1 }) => {
                if p1.is_empty() {
                    return Err(invalid("scan.p1", "must not be empty"));
                }
                for v in p1 {
                    if !(v.is_finite() && *v > 0.0) {
                        return Err(invalid("scan.p1", format!("{v} must be finite and > 0")));
                    }
                }
            }
        }
        if let Some(d) = &self.density {
            if d.n_theta < 2 || d.n_phi < 2 {
                return Err(invalid("density", "need at least 2 points per axis"));
            }
            if self.scan.is_some() {
                return Err(invalid("density", "only available for a single protocol run"));
            }
        }
        if self.output.formats.is_empty() {
            return Err(invalid("output.formats", "must not be empty"));
        }
        if self.output.stem.is_empty() || self.output.stem.contains(['/', '\\']) {
            return Err(invalid("output.stem", "must be a plain file-name prefix"));
        }
        Ok(())
    }

    /// Dimensionless time for a value given in ps or in revivals.
    pub fn time(&self, mol: &MoleculeSpec, key: &str, t: &TimeValue) -> Result<f64, CliError> {
        let v = match (t.ps, t.trev) {
            (Some(ps), None) => mol.ps_to_dimensionless(ps),
            (None, Some(r)) => TAU * r,
            _ => return Err(invalid(key, "give exactly one of ps, trev")),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(invalid(key, "not finite"))
        }
    }

    pub fn delay_mode(&self) -> Result<DelayMode, CliError> {
        let p = &self.protocol;
        Ok(match p.delay {
            DelayKind::AutoPeak => DelayMode::AutoPeak,
            DelayKind::AutoTrough => DelayMode::AutoTrough,
            DelayKind::AutoQuarter => DelayMode::AutoQuarter,
            DelayKind::Explicit => {
                let t = TimeValue { ps: p.delay_ps, trev: p.delay_trev };
                DelayMode::Explicit { delay: self.time(&self.molecule()?, "protocol.delay", &t)? }
            }
        })
    }

    pub fn protocol(&self) -> Result<DoublePulseProtocol, CliError> {
        let p = &self.protocol;
        Ok(DoublePulseProtocol {
            p1: p.p1,
            p2: p.p2,
            pol_angle: p.pol_angle_deg.to_radians(),
            delay: self.delay_mode()?,
            engine: self.engine.kind,
            points_per_revival: self.engine.points_per_revival,
        })
    }

    pub fn ensemble_spec(&self) -> Result<EnsembleSpec, CliError> {
        Ok(EnsembleSpec {
            molecule: self.molecule()?,
            temperature_k: self.temperature_k,
            weight_cutoff: self.engine.weight_cutoff,
        })
    }

    pub fn runner(&self) -> Result<Runner, CliError> {
        let mut r = Runner::new(&self.ensemble_spec()?)?
            .with_folding(self.engine.fold_reflection)
            .with_grid(self.engine.fdtd.grid())
            .with_l_max(self.engine.l_max);
        r.peak_resolution = self.engine.peak_resolution_trev;
        Ok(r)
    }

    /// Applies command-line overrides and re-validates.
    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(dir) = &o.out {
            self.output.dir = dir.clone();
        }
        if let Some(e) = o.engine {
            self.engine.kind = e;
        }
        if let Some(t) = o.temperature_k {
            self.temperature_k = t;
        }
        if let Some(n) = o.points_per_revival {
            self.engine.points_per_revival = n;
        }
        self.validate()
    }

    /// The config with its output block reset; this is what gets hashed and embedded.
    pub fn physics(&self) -> RunConfig {
        RunConfig { output: OutputConfig::default(), ..self.clone() }
    }

    /// SHA-256 over the canonical JSON form of [`RunConfig::physics`].
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&self.physics()).expect("config serializes");
        format!("{:x}", Sha256::digest(canonical.as_bytes()))
    }
}
