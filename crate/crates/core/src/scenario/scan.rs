use serde::{Deserialize, Serialize};

use super::{weighted_sum, AlignmentPeak, Backend, DelayMode, Dispatch, Runner, ScenarioError};
use crate::series::Engine;
use crate::thermal::Member;

/// Thermal `⟨J_y⟩` after pulse 2 against its polarization angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationScan {
    pub pulse2_time: f64,
    pub angles: Vec<f64>,
    pub jy: Vec<f64>,
}

/// Thermal `⟨J_y⟩` over pulse strengths, `jy[i][j]` for `(p1[i], p2[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrengthScan {
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub jy: Vec<Vec<f64>>,
    pub pulse2_times: Vec<f64>,
    /// Alignment extremum after pulse 1, per `p1`, when the delay came from a search.
    pub peaks: Vec<Option<AlignmentPeak>>,
}

/// Thermal `⟨J_y⟩` after pulse 2 against the pulse-2 time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayScan {
    pub delays: Vec<f64>,
    pub jy: Vec<f64>,
}

fn check_strength(p: f64) -> Result<(), ScenarioError> {
    if p >= 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::InvalidProtocol(format!("kick strength {p} must be finite and >= 0")))
    }
}

fn check_angle(a: f64) -> Result<(), ScenarioError> {
    if a.abs() <= std::f64::consts::FRAC_PI_2 + 1e-12 {
        Ok(())
    } else {
        Err(ScenarioError::InvalidProtocol(format!("pol_angle {a} outside [-π/2, π/2]")))
    }
}

/// Members kicked by pulse 1 and carried to `tau2`.
fn prepared<B: Backend>(
    runner: &Runner,
    b: &B,
    members: &[Member],
    p1: f64,
    tau2: f64,
) -> Result<Vec<B::State>, ScenarioError> {
    let axial = b.kick_operator(0.0);
    runner.per_member(members, |mem| {
        let mut s = b.init(mem.l, mem.m)?;
        b.kick(&mut s, &axial, p1)?;
        b.advance(&mut s, tau2)?;
        Ok(s)
    })
}

/// Thermal `⟨J_y⟩` right after kicking every prepared state.
fn jy_after<B: Backend>(
    runner: &Runner,
    b: &B,
    members: &[Member],
    states: &[B::State],
    kick: &B::Kick,
    p2: f64,
) -> Result<f64, ScenarioError> {
    let idx: Vec<usize> = (0..members.len()).collect();
    let jy = runner.per_member_indexed(&idx, |&i| {
        let mut s = states[i].clone();
        b.kick(&mut s, kick, p2)?;
        Ok(b.angular_momentum(&s)?[1])
    })?;
    Ok(members.iter().zip(&jy).map(|(m, j)| m.weight * j).sum())
}

struct PolarizationJob<'a> {
    p1: f64,
    p2: f64,
    delay: DelayMode,
    angles: &'a [f64],
}

impl Dispatch<PolarizationScan> for PolarizationJob<'_> {
    fn run<B: Backend>(&self, runner: &Runner, b: &B, _: Option<i64>) -> Result<PolarizationScan, ScenarioError> {
        let members = runner.members();
        let (tau2, _) = runner.resolve_delay(b, &members, self.p1, self.delay)?;
        let states = prepared(runner, b, &members, self.p1, tau2)?;
        let jy = self
            .angles
            .iter()
            .map(|&a| jy_after(runner, b, &members, &states, &b.kick_operator(a), self.p2))
            .collect::<Result<_, _>>()?;
        Ok(PolarizationScan { pulse2_time: tau2, angles: self.angles.to_vec(), jy })
    }
}

struct StrengthJob<'a> {
    p1: &'a [f64],
    p2: &'a [f64],
    pol_angle: f64,
    delay: DelayMode,
}

impl Dispatch<StrengthScan> for StrengthJob<'_> {
    fn run<B: Backend>(&self, runner: &Runner, b: &B, _: Option<i64>) -> Result<StrengthScan, ScenarioError> {
        let members = runner.members();
        let kick = b.kick_operator(self.pol_angle);
        let mut out = StrengthScan {
            p1: self.p1.to_vec(),
            p2: self.p2.to_vec(),
            jy: Vec::new(),
            pulse2_times: Vec::new(),
            peaks: Vec::new(),
        };
        for &p1 in self.p1 {
            let (tau2, peak) = runner.resolve_delay(b, &members, p1, self.delay)?;
            let states = prepared(runner, b, &members, p1, tau2)?;
            let row = self
                .p2
                .iter()
                .map(|&p2| jy_after(runner, b, &members, &states, &kick, p2))
                .collect::<Result<_, _>>()?;
            out.jy.push(row);
            out.pulse2_times.push(tau2);
            out.peaks.push(peak);
        }
        Ok(out)
    }
}

struct FixedTotalJob<'a> {
    total: f64,
    differences: &'a [f64],
    pol_angle: f64,
    delay: DelayMode,
}

impl Dispatch<Vec<f64>> for FixedTotalJob<'_> {
    fn run<B: Backend>(&self, runner: &Runner, b: &B, _: Option<i64>) -> Result<Vec<f64>, ScenarioError> {
        let members = runner.members();
        let kick = b.kick_operator(self.pol_angle);
        self.differences
            .iter()
            .map(|&d| {
                let (p1, p2) = ((self.total + d) / 2.0, (self.total - d) / 2.0);
                let (tau2, _) = runner.resolve_delay(b, &members, p1, self.delay)?;
                let states = prepared(runner, b, &members, p1, tau2)?;
                jy_after(runner, b, &members, &states, &kick, p2)
            })
            .collect()
    }
}

struct DelayJob<'a> {
    p1: f64,
    p2: f64,
    pol_angle: f64,
    delays: &'a [f64],
}

impl Dispatch<DelayScan> for DelayJob<'_> {
    fn run<B: Backend>(&self, runner: &Runner, b: &B, _: Option<i64>) -> Result<DelayScan, ScenarioError> {
        let members = runner.members();
        let mut order: Vec<usize> = (0..self.delays.len()).collect();
        order.sort_by(|&i, &j| self.delays[i].total_cmp(&self.delays[j]));
        let axial = b.kick_operator(0.0);
        let kick = b.kick_operator(self.pol_angle);
        let rows = runner.per_member(&members, |mem| {
            let mut s = b.init(mem.l, mem.m)?;
            b.kick(&mut s, &axial, self.p1)?;
            let mut jy = vec![0.0; order.len()];
            for &i in &order {
                b.advance(&mut s, self.delays[i])?;
                let mut k = s.clone();
                b.kick(&mut k, &kick, self.p2)?;
                jy[i] = b.angular_momentum(&k)?[1];
            }
            Ok(jy)
        })?;
        let weights: Vec<f64> = members.iter().map(|m| m.weight).collect();
        let jy = weighted_sum(rows.iter().map(Vec::as_slice), &weights);
        Ok(DelayScan { delays: self.delays.to_vec(), jy })
    }
}

impl Runner {
    pub(crate) fn per_member_indexed<R: Send>(
        &self,
        idx: &[usize],
        job: impl Fn(&usize) -> Result<R, ScenarioError> + Sync + Send,
    ) -> Result<Vec<R>, ScenarioError> {
        self.execution.map(idx, job).into_iter().collect()
    }

    /// `⟨J_y⟩` after pulse 2 for each polarization angle, pulse 1 shared.
    pub fn scan_polarization(
        &self,
        p1: f64,
        p2: f64,
        delay: DelayMode,
        angles: &[f64],
        engine: Engine,
    ) -> Result<PolarizationScan, ScenarioError> {
        check_strength(p1)?;
        check_strength(p2)?;
        angles.iter().try_for_each(|&a| check_angle(a))?;
        self.dispatch(engine, p1 + p2, PolarizationJob { p1, p2, delay, angles })
    }

    /// `⟨J_y⟩` on the `p1 × p2` grid; pulse 2 timing is resolved per `p1`.
    pub fn scan_strengths(
        &self,
        p1: &[f64],
        p2: &[f64],
        pol_angle: f64,
        delay: DelayMode,
        engine: Engine,
    ) -> Result<StrengthScan, ScenarioError> {
        p1.iter().chain(p2).try_for_each(|&p| check_strength(p))?;
        check_angle(pol_angle)?;
        let p_total = p1.iter().copied().fold(0.0, f64::max) + p2.iter().copied().fold(0.0, f64::max);
        self.dispatch(engine, p_total, StrengthJob { p1, p2, pol_angle, delay })
    }

    /// `⟨J_y⟩` at fixed `p1 + p2 = total` against `p1 - p2`.
    pub fn scan_fixed_total(
        &self,
        total: f64,
        differences: &[f64],
        pol_angle: f64,
        delay: DelayMode,
        engine: Engine,
    ) -> Result<Vec<f64>, ScenarioError> {
        check_strength(total)?;
        check_angle(pol_angle)?;
        if let Some(d) = differences.iter().find(|d| !(d.abs() <= total)) {
            return Err(ScenarioError::InvalidProtocol(format!("difference {d} exceeds total strength {total}")));
        }
        self.dispatch(engine, total, FixedTotalJob { total, differences, pol_angle, delay })
    }

    /// `⟨J_y⟩` after pulse 2 fired at each dimensionless time in `delays`.
    pub fn scan_delay(
        &self,
        p1: f64,
        p2: f64,
        pol_angle: f64,
        delays: &[f64],
        engine: Engine,
    ) -> Result<DelayScan, ScenarioError> {
        check_strength(p1)?;
        check_strength(p2)?;
        check_angle(pol_angle)?;
        if let Some(d) = delays.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            return Err(ScenarioError::InvalidProtocol(format!("delay {d} must be finite and >= 0")));
        }
        self.dispatch(engine, p1 + p2, DelayJob { p1, p2, pol_angle, delays })
    }
}
