//! Double-pulse protocols over a thermal ensemble.
//!
//! Pulse 1 is polarized along z at `τ = 0`; pulse 2 is tilted by `pol_angle`
//! toward +x and fires at `τ₂`. Every ensemble member is propagated
//! independently and the weighted sum is formed in member order, so results
//! do not depend on how the members were scheduled.

mod backend;
mod density;
mod scan;

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{Backend, FdtdBackend, SpectralBackend, J_CONSERVATION_TOLERANCE};
pub use density::DensityGrid;
pub use scan::{DelayScan, PolarizationScan, StrengthScan};

use crate::exec::Execution;
use crate::fdtd::{FdtdError, GridConfig};
use crate::series::{Engine, ObservableName, ObservableSeries, SeriesMeta};
use crate::spectral::{KickMethod, SpectralError};
use crate::thermal::{build_ensemble, Ensemble, EnsembleSpec, Member, ThermalError};

/// Search window for the alignment maximum before the half revival, in units of `T_rev`.
pub const PEAK_WINDOW: (f64, f64) = (0.40, 0.50);
/// Search window for the anti-alignment minimum after the half revival.
pub const TROUGH_WINDOW: (f64, f64) = (0.50, 0.60);
/// Default grid spacing of the peak search, in units of `T_rev`.
pub const DEFAULT_PEAK_RESOLUTION: f64 = 1e-4;
pub const DEFAULT_POINTS_PER_REVIVAL: usize = 2048;
/// Shells added to the basis per unit of total kick strength, plus a fixed margin.
const SHELLS_PER_STRENGTH: f64 = 2.0;
const SHELL_MARGIN: i64 = 16;
const MAX_BASIS_RETRIES: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
    #[error("no interior extremum of ⟨cos²θ⟩ in [{lo}, {hi}]·T_rev: search ended on the window edge at {at}·T_rev")]
    FlatWindow { lo: f64, hi: f64, at: f64 },
    #[error("⟨J⟩ drifted by {drift:e} under free evolution")]
    JNotConserved { drift: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Fdtd(#[from] FdtdError),
    #[error(transparent)]
    Thermal(#[from] ThermalError),
}

impl ScenarioError {
    /// True for failures of numerical adequacy (basis, grid, search window),
    /// as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        match self {
            ScenarioError::InvalidProtocol(_) => false,
            ScenarioError::FlatWindow { .. } | ScenarioError::JNotConserved { .. } => true,
            ScenarioError::Spectral(e) | ScenarioError::Fdtd(FdtdError::Spectral(e)) => spectral_is_numerical(e),
            ScenarioError::Fdtd(e) => !matches!(e, FdtdError::InvalidConfig(_) | FdtdError::Domain { .. }),
            ScenarioError::Thermal(_) => false,
        }
    }
}

fn spectral_is_numerical(e: &SpectralError) -> bool {
    matches!(e, SpectralError::Truncation { .. } | SpectralError::NormDrift { .. })
}

/// When pulse 2 fires.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelayMode {
    /// Dimensionless delay after pulse 1.
    Explicit { delay: f64 },
    /// Thermal `⟨cos²θ⟩` maximum in [`PEAK_WINDOW`].
    AutoPeak,
    /// Thermal `⟨cos²θ⟩` minimum in [`TROUGH_WINDOW`].
    AutoTrough,
    /// A quarter revival, `π/2`.
    AutoQuarter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoublePulseProtocol {
    pub p1: f64,
    pub p2: f64,
    /// Tilt of pulse 2 from z toward +x, radians.
    pub pol_angle: f64,
    pub delay: DelayMode,
    pub engine: Engine,
    pub points_per_revival: usize,
}

impl DoublePulseProtocol {
    pub fn new(p1: f64, p2: f64, pol_angle: f64, delay: DelayMode) -> Self {
        Self { p1, p2, pol_angle, delay, engine: Engine::Spectral, points_per_revival: DEFAULT_POINTS_PER_REVIVAL }
    }

    pub fn with_engine(mut self, engine: Engine) -> Self {
        self.engine = engine;
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        for p in [self.p1, self.p2] {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(ScenarioError::InvalidProtocol(format!("kick strength {p} must be finite and >= 0")));
            }
        }
        if !(self.pol_angle.abs() <= FRAC_PI_2 + 1e-12) {
            return Err(ScenarioError::InvalidProtocol(format!("pol_angle {} outside [-π/2, π/2]", self.pol_angle)));
        }
        if self.points_per_revival < 16 {
            return Err(ScenarioError::InvalidProtocol("points_per_revival must be at least 16".into()));
        }
        if let DelayMode::Explicit { delay } = self.delay {
            if !(delay > 0.0 && delay.is_finite()) {
                return Err(ScenarioError::InvalidProtocol(format!("delay {delay} must be finite and > 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentPeak {
    /// Dimensionless time after pulse 1.
    pub time: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Max,
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResult {
    pub pulse2_time: f64,
    /// Set when the delay came from a peak search.
    pub peak: Option<AlignmentPeak>,
    /// Samples on `t_k = 2πk/n` from pulse 1 through one revival after pulse 2.
    pub series: Vec<ObservableSeries>,
    /// Absent when the ensemble was folded by reflection, which does not preserve it.
    pub jx: Option<f64>,
    pub jy: f64,
    pub jz: Option<f64>,
    /// `⟨cos²φ⟩` averaged over the revival after pulse 2.
    pub cos2phi_mean: f64,
    pub l_max: Option<i64>,
}

impl ProtocolResult {
    pub fn get(&self, name: ObservableName) -> Option<&ObservableSeries> {
        self.series.iter().find(|s| s.name == name)
    }

    /// Samples at or after pulse 2.
    pub fn after_pulse2(&self, name: ObservableName) -> Option<(Vec<f64>, Vec<f64>)> {
        let s = self.get(name)?;
        let k = s.times.iter().position(|&t| t >= self.pulse2_time - 1e-12)?;
        Some((s.times[k..].to_vec(), s.values[k..].to_vec()))
    }
}

/// Basis cutoff covering the ensemble after kicks of total strength `p_total`.
pub fn basis_cutoff(ensemble_l_max: i64, p_total: f64) -> i64 {
    ensemble_l_max + (SHELLS_PER_STRENGTH * p_total).ceil() as i64 + SHELL_MARGIN
}

/// Runs protocols and scans over one ensemble.
#[derive(Debug, Clone)]
pub struct Runner {
    ensemble: Ensemble,
    molecule: String,
    temperature_k: f64,
    pub execution: Execution,
    /// Run only `m ≥ 0` members with doubled weight; exact for observables
    /// even under `y → -y`, which excludes `J_x` and `J_z`.
    pub fold_reflection: bool,
    pub grid: GridConfig,
    /// Fixed spectral cutoff; chosen from the kick strengths when unset.
    pub l_max: Option<i64>,
    pub kick_method: KickMethod,
    /// Peak-search grid spacing in units of `T_rev`.
    pub peak_resolution: f64,
}

impl Runner {
    pub fn new(spec: &EnsembleSpec) -> Result<Self, ScenarioError> {
        let ensemble = build_ensemble(spec)?;
        Ok(Self::from_ensemble(ensemble, spec.molecule.name.clone(), spec.temperature_k))
    }

    pub fn from_ensemble(ensemble: Ensemble, molecule: impl Into<String>, temperature_k: f64) -> Self {
        Self {
            ensemble,
            molecule: molecule.into(),
            temperature_k,
            execution: Execution::default(),
            fold_reflection: true,
            grid: GridConfig::default(),
            l_max: None,
            kick_method: KickMethod::default(),
            peak_resolution: DEFAULT_PEAK_RESOLUTION,
        }
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn with_folding(mut self, fold: bool) -> Self {
        self.fold_reflection = fold;
        self
    }

    pub fn with_grid(mut self, grid: GridConfig) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_l_max(mut self, l_max: Option<i64>) -> Self {
        self.l_max = l_max;
        self
    }

    /// Folding is applied only when the ensemble is mirror-symmetric.
    pub fn folds(&self) -> bool {
        self.fold_reflection && self.ensemble.is_reflection_symmetric()
    }

    pub(crate) fn members(&self) -> Vec<Member> {
        if self.folds() {
            self.ensemble.fold_reflection().members
        } else {
            self.ensemble.members.clone()
        }
    }

    fn meta(&self, engine: Engine, params: BTreeMap<String, f64>) -> SeriesMeta {
        SeriesMeta { engine, molecule: self.molecule.clone(), temperature_k: self.temperature_k, params }
    }

    /// Builds the engine for kicks totalling `p_total` and runs `job` on it.
    /// Spectral runs with an automatic cutoff grow the basis and retry on truncation.
    pub(crate) fn dispatch<R>(&self, engine: Engine, p_total: f64, job: impl Dispatch<R>) -> Result<R, ScenarioError> {
        let auto = basis_cutoff(self.ensemble.l_max(), p_total);
        match engine {
            Engine::Spectral => {
                let mut l_max = self.l_max.unwrap_or(auto);
                let mut attempt = 0;
                loop {
                    let b = SpectralBackend::new(l_max, self.kick_method);
                    match job.run(self, &b, Some(l_max)) {
                        Err(ScenarioError::Spectral(SpectralError::Truncation { .. }))
                            if self.l_max.is_none() && attempt < MAX_BASIS_RETRIES =>
                        {
                            attempt += 1;
                            l_max += SHELL_MARGIN;
                        }
                        r => return r,
                    }
                }
            }
            Engine::Fdtd => {
                let b = FdtdBackend::new(self.grid, self.l_max.unwrap_or(auto))?;
                job.run(self, &b, None)
            }
        }
    }

    /// Thermal `⟨cos²θ⟩` extremum after pulse 1 alone, refined by a parabola
    /// through the best grid point and its neighbours.
    pub fn find_alignment_extremum(
        &self,
        p1: f64,
        engine: Engine,
        window: (f64, f64),
        kind: Extremum,
    ) -> Result<AlignmentPeak, ScenarioError> {
        if !(p1 > 0.0 && p1.is_finite()) {
            return Err(ScenarioError::InvalidProtocol(format!("pulse-1 strength {p1} must be finite and > 0")));
        }
        if !(0.0 <= window.0 && window.0 < window.1) {
            return Err(ScenarioError::InvalidProtocol(format!("bad search window {window:?}")));
        }
        self.dispatch(engine, p1, PeakJob { p1, window, kind })
    }

    pub fn find_alignment_peak(&self, p1: f64, engine: Engine) -> Result<AlignmentPeak, ScenarioError> {
        self.find_alignment_extremum(p1, engine, PEAK_WINDOW, Extremum::Max)
    }

    pub fn run_protocol(&self, proto: &DoublePulseProtocol) -> Result<ProtocolResult, ScenarioError> {
        proto.validate()?;
        self.dispatch(proto.engine, proto.p1 + proto.p2, ProtocolJob { proto: *proto })
    }

    /// Resolves the pulse-2 time for `delay` after a pulse-1 kick of `p1`.
    pub fn pulse2_time(
        &self,
        p1: f64,
        delay: DelayMode,
        engine: Engine,
    ) -> Result<(f64, Option<AlignmentPeak>), ScenarioError> {
        match delay {
            DelayMode::Explicit { delay } => Ok((delay, None)),
            DelayMode::AutoQuarter => Ok((TAU / 4.0, None)),
            DelayMode::AutoPeak => self.find_alignment_peak(p1, engine).map(|p| (p.time, Some(p))),
            DelayMode::AutoTrough => {
                self.find_alignment_extremum(p1, engine, TROUGH_WINDOW, Extremum::Min).map(|p| (p.time, Some(p)))
            }
        }
    }

    pub(crate) fn resolve_delay<B: Backend>(
        &self,
        b: &B,
        members: &[Member],
        p1: f64,
        delay: DelayMode,
    ) -> Result<(f64, Option<AlignmentPeak>), ScenarioError> {
        let found = |window, kind| extremum_with(self, b, members, p1, window, kind).map(|p| (p.time, Some(p)));
        match delay {
            DelayMode::Explicit { delay } => Ok((delay, None)),
            DelayMode::AutoQuarter => Ok((TAU / 4.0, None)),
            DelayMode::AutoPeak => found(PEAK_WINDOW, Extremum::Max),
            DelayMode::AutoTrough => found(TROUGH_WINDOW, Extremum::Min),
        }
    }

    /// Runs `job` for every member and returns the results in member order.
    pub(crate) fn per_member<R: Send>(
        &self,
        members: &[Member],
        job: impl Fn(&Member) -> Result<R, ScenarioError> + Sync + Send,
    ) -> Result<Vec<R>, ScenarioError> {
        self.execution.map(members, job).into_iter().collect()
    }
}

/// A computation generic over the engine backend.
pub(crate) trait Dispatch<R> {
    fn run<B: Backend>(&self, runner: &Runner, backend: &B, l_max: Option<i64>) -> Result<R, ScenarioError>;
}

/// `Σ_k w_k v_k` accumulated in member order.
pub(crate) fn weighted_sum<'a>(rows: impl IntoIterator<Item = &'a [f64]>, weights: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for (row, &w) in rows.into_iter().zip(weights) {
        if out.is_empty() {
            out = vec![0.0; row.len()];
        }
        for (o, v) in out.iter_mut().zip(row) {
            *o += w * v;
        }
    }
    out
}

struct PeakJob {
    p1: f64,
    window: (f64, f64),
    kind: Extremum,
}

impl Dispatch<AlignmentPeak> for PeakJob {
    fn run<B: Backend>(&self, runner: &Runner, b: &B, _: Option<i64>) -> Result<AlignmentPeak, ScenarioError> {
        extremum_with(runner, b, &runner.members(), self.p1, self.window, self.kind)
    }
}

fn extremum_with<B: Backend>(
    runner: &Runner,
    b: &B,
    members: &[Member],
    p1: f64,
    window: (f64, f64),
    kind: Extremum,
) -> Result<AlignmentPeak, ScenarioError> {
    let n = ((window.1 - window.0) / runner.peak_resolution).round() as usize + 1;
    let h = (window.1 - window.0) / (n - 1) as f64;
    let times: Vec<f64> = (0..n).map(|k| TAU * (window.0 + h * k as f64)).collect();
    let axial = b.kick_operator(0.0);
    let rows = runner.per_member(members, |mem| {
        let mut s = b.init(mem.l, mem.m)?;
        b.kick(&mut s, &axial, p1)?;
        b.sample_cos2theta(&s, &times)
    })?;
    let weights: Vec<f64> = members.iter().map(|m| m.weight).collect();
    let curve = weighted_sum(rows.iter().map(Vec::as_slice), &weights);
    refine_extremum(&curve, TAU * window.0, TAU * h, kind)
}

/// Extremum of samples `curve[k]` at `t0 + k·dt`, refined by the parabola
/// through the best point and its neighbours. Errors when the best sample
/// is on either end.
pub fn refine_extremum(curve: &[f64], t0: f64, dt: f64, kind: Extremum) -> Result<AlignmentPeak, ScenarioError> {
    let n = curve.len();
    let sign = if kind == Extremum::Max { 1.0 } else { -1.0 };
    let best = (0..n).fold(0, |best, k| if sign * curve[k] > sign * curve[best] { k } else { best });
    if n < 3 || best == 0 || best == n - 1 {
        let (lo, hi) = (t0 / TAU, (t0 + dt * n.saturating_sub(1) as f64) / TAU);
        return Err(ScenarioError::FlatWindow { lo, hi, at: (t0 + dt * best as f64) / TAU });
    }
    let (ym, y0, yp) = (curve[best - 1], curve[best], curve[best + 1]);
    let curvature = ym - 2.0 * y0 + yp;
    let shift = if curvature != 0.0 { 0.5 * (ym - yp) / curvature } else { 0.0 };
    Ok(AlignmentPeak { time: t0 + (best as f64 + shift) * dt, value: y0 - 0.25 * (ym - yp) * shift })
}

struct ProtocolJob {
    proto: DoublePulseProtocol,
}

struct MemberRun {
    samples: Vec<f64>,
    j_before: [f64; 3],
    j_after: [f64; 3],
    mean: Option<f64>,
}

impl Dispatch<ProtocolResult> for ProtocolJob {
    fn run<B: Backend>(&self, runner: &Runner, b: &B, l_max: Option<i64>) -> Result<ProtocolResult, ScenarioError> {
        let p = &self.proto;
        let members = runner.members();
        let (tau2, peak) = runner.resolve_delay(b, &members, p.p1, p.delay)?;
        let n = p.points_per_revival;
        let dt = TAU / n as f64;
        let k2 = (tau2 / dt - 1e-9).ceil().max(0.0) as usize;
        let axial = b.kick_operator(0.0);
        let tilted = b.kick_operator(p.pol_angle);
        let runs = runner.per_member(&members, |mem| {
            let mut s = b.init(mem.l, mem.m)?;
            b.kick(&mut s, &axial, p.p1)?;
            let j_before = b.angular_momentum(&s)?;
            let mut samples = b.sample_grid(&s, n, 0..k2)?;
            b.advance(&mut s, tau2)?;
            b.kick(&mut s, &tilted, p.p2)?;
            samples.extend(b.sample_grid(&s, n, k2..k2 + n)?);
            Ok(MemberRun {
                samples: samples.into_iter().flatten().collect(),
                j_before,
                j_after: b.angular_momentum(&s)?,
                mean: b.revival_mean_cos2phi(&s),
            })
        })?;
        let weights: Vec<f64> = members.iter().map(|m| m.weight).collect();
        let samples = weighted_sum(runs.iter().map(|r| r.samples.as_slice()), &weights);
        let j_before = weighted_sum(runs.iter().map(|r| r.j_before.as_slice()), &weights);
        let j_after = weighted_sum(runs.iter().map(|r| r.j_after.as_slice()), &weights);
        let cos2theta: Vec<f64> = samples.iter().step_by(2).copied().collect();
        let cos2phi: Vec<f64> = samples.iter().skip(1).step_by(2).copied().collect();
        let cos2phi_mean = match runs.iter().map(|r| r.mean).collect::<Option<Vec<f64>>>() {
            Some(means) => means.iter().zip(&weights).map(|(m, w)| m * w).sum(),
            None => cos2phi[k2..].iter().sum::<f64>() / n as f64,
        };

        let times: Vec<f64> = (0..k2 + n).map(|k| dt * k as f64).collect();
        let mut params = BTreeMap::from([
            ("p1".to_string(), p.p1),
            ("p2".to_string(), p.p2),
            ("pol_angle".to_string(), p.pol_angle),
            ("pulse2_time".to_string(), tau2),
            ("points_per_revival".to_string(), n as f64),
        ]);
        match l_max {
            Some(l) => {
                params.insert("l_max".into(), l as f64);
            }
            None => {
                let g = runner.grid;
                params.insert("n_theta".into(), g.n_theta as f64);
                params.insert("n_phi".into(), g.n_phi as f64);
                params.insert("m_max".into(), g.m_max as f64);
                params.insert("delta_tau".into(), g.delta_tau);
            }
        }
        let meta = runner.meta(b.engine(), params);
        let series_of = |name, values: Vec<f64>| {
            ObservableSeries::new(name, times.clone(), values, meta.clone()).map_err(ScenarioError::InvalidProtocol)
        };
        let step = |axis: usize| -> Vec<f64> {
            (0..k2 + n).map(|k| if k < k2 { j_before[axis] } else { j_after[axis] }).collect()
        };
        let mut series =
            vec![series_of(ObservableName::Cos2theta, cos2theta)?, series_of(ObservableName::Cos2phi, cos2phi)?];
        let folded = runner.folds();
        if !folded {
            series.push(series_of(ObservableName::Jx, step(0))?);
        }
        series.push(series_of(ObservableName::Jy, step(1))?);
        if !folded {
            series.push(series_of(ObservableName::Jz, step(2))?);
        }
        Ok(ProtocolResult {
            pulse2_time: tau2,
            peak,
            series,
            jx: (!folded).then_some(j_after[0]),
            jy: j_after[1],
            jz: (!folded).then_some(j_after[2]),
            cos2phi_mean,
            l_max,
        })
    }
}

#[cfg(test)]
mod tests;
