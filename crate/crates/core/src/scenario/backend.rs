use std::f64::consts::TAU;
use std::ops::Range;

use super::ScenarioError;
use crate::angular::KickComponents;
use crate::fdtd::{FdtdEngine, GridConfig, GridWavefunction};
use crate::series::Engine;
use crate::spectral::{
    free_propagate, init_eigenstate, Axis, FrequencySpectrum, KickMethod, KickOperator, ObservableSet, Wavepacket,
};

/// Relative drift of `<J>` tolerated across free evolution.
pub const J_CONSERVATION_TOLERANCE: f64 = 1e-8;

/// `(⟨cos²θ⟩, ⟨cos²φ⟩)` at one time.
pub type AngularSample = [f64; 2];

/// The operations the scenarios need from an engine.
pub trait Backend: Sync {
    type State: Clone + Send + Sync;
    type Kick: Sync;

    fn engine(&self) -> Engine;
    fn init(&self, l: i64, m: i64) -> Result<Self::State, ScenarioError>;
    fn kick_operator(&self, pol_angle: f64) -> Self::Kick;
    fn kick(&self, state: &mut Self::State, kick: &Self::Kick, strength: f64) -> Result<(), ScenarioError>;
    fn advance(&self, state: &mut Self::State, to: f64) -> Result<(), ScenarioError>;
    /// Samples at `t_k = 2πk/n` for `k` in `ks`; the state clock must not be later.
    fn sample_grid(&self, state: &Self::State, n: usize, ks: Range<usize>)
        -> Result<Vec<AngularSample>, ScenarioError>;
    /// `⟨cos²θ⟩` at increasing `times`, none before the state clock.
    fn sample_cos2theta(&self, state: &Self::State, times: &[f64]) -> Result<Vec<f64>, ScenarioError>;
    fn angular_momentum(&self, state: &Self::State) -> Result<[f64; 3], ScenarioError>;
    /// Exact average of `⟨cos²φ⟩` over one revival, where the engine has it.
    fn revival_mean_cos2phi(&self, state: &Self::State) -> Option<f64>;
    fn to_wavepacket(&self, state: &Self::State) -> Result<Wavepacket, ScenarioError>;
}

pub struct SpectralBackend {
    l_max: i64,
    method: KickMethod,
    components: KickComponents,
    kick_z: KickOperator,
    obs: ObservableSet,
}

impl SpectralBackend {
    pub fn new(l_max: i64, method: KickMethod) -> Self {
        let components = KickComponents::new(l_max);
        let kick_z = KickOperator::from_components(&components, 0.0);
        Self { l_max, method, components, kick_z, obs: ObservableSet::new(l_max) }
    }

    pub fn l_max(&self) -> i64 {
        self.l_max
    }

    fn spectra(&self, state: &Wavepacket) -> (FrequencySpectrum, FrequencySpectrum) {
        let mut c2t = FrequencySpectrum::zeros(self.l_max, state.clock());
        c2t.accumulate(state, self.obs.cos2theta.matrix(), 1.0);
        let mut e2p = FrequencySpectrum::zeros(self.l_max, state.clock());
        e2p.accumulate(state, &self.obs.exp_i2phi, 1.0);
        (c2t, e2p)
    }
}

pub enum SpectralKick {
    Axial,
    Tilted(Box<KickOperator>),
}

impl Backend for SpectralBackend {
    type State = Wavepacket;
    type Kick = SpectralKick;

    fn engine(&self) -> Engine {
        Engine::Spectral
    }

    fn init(&self, l: i64, m: i64) -> Result<Wavepacket, ScenarioError> {
        Ok(init_eigenstate(l, m, self.l_max)?)
    }

    fn kick_operator(&self, pol_angle: f64) -> SpectralKick {
        if pol_angle == 0.0 {
            SpectralKick::Axial
        } else {
            SpectralKick::Tilted(Box::new(KickOperator::from_components(&self.components, pol_angle)))
        }
    }

    fn kick(&self, state: &mut Wavepacket, kick: &SpectralKick, strength: f64) -> Result<(), ScenarioError> {
        let op = match kick {
            SpectralKick::Axial => &self.kick_z,
            SpectralKick::Tilted(op) => op,
        };
        Ok(op.apply(state, strength, self.method)?)
    }

    fn advance(&self, state: &mut Wavepacket, to: f64) -> Result<(), ScenarioError> {
        let mut s = free_propagate(state.clone(), to - state.clock());
        s.set_clock(to);
        *state = s;
        Ok(())
    }

    fn sample_grid(&self, state: &Wavepacket, n: usize, ks: Range<usize>) -> Result<Vec<AngularSample>, ScenarioError> {
        if ks.is_empty() {
            return Ok(Vec::new());
        }
        let (c2t, e2p) = self.spectra(state);
        let start = TAU * ks.start as f64 / n as f64;
        let a = c2t.sample_revival(start, n);
        let b = e2p.sample_revival(start, n);
        let k0 = ks.start;
        Ok(ks.map(|k| (k - k0) % n).map(|j| [a[j].re, 0.5 + 0.5 * b[j].re]).collect())
    }

    fn sample_cos2theta(&self, state: &Wavepacket, times: &[f64]) -> Result<Vec<f64>, ScenarioError> {
        let (c2t, _) = self.spectra(state);
        Ok(c2t.sample_at(times).into_iter().map(|z| z.re).collect())
    }

    fn angular_momentum(&self, state: &Wavepacket) -> Result<[f64; 3], ScenarioError> {
        let j = |s: &Wavepacket| {
            [
                self.obs.angular_momentum(s, Axis::X),
                self.obs.angular_momentum(s, Axis::Y),
                self.obs.angular_momentum(s, Axis::Z),
            ]
        };
        let now = j(state);
        let later = j(&free_propagate(state.clone(), 1.234_567));
        for (a, b) in now.iter().zip(&later) {
            let drift = (a - b).abs();
            if drift > J_CONSERVATION_TOLERANCE * a.abs().max(1.0) {
                return Err(ScenarioError::JNotConserved { drift });
            }
        }
        Ok(now)
    }

    fn revival_mean_cos2phi(&self, state: &Wavepacket) -> Option<f64> {
        let (_, e2p) = self.spectra(state);
        Some(0.5 + 0.5 * e2p.mean().re)
    }

    fn to_wavepacket(&self, state: &Wavepacket) -> Result<Wavepacket, ScenarioError> {
        Ok(state.clone())
    }
}

pub struct FdtdBackend {
    engine: FdtdEngine,
    projection_l_max: i64,
}

impl FdtdBackend {
    pub fn new(cfg: GridConfig, projection_l_max: i64) -> Result<Self, ScenarioError> {
        Ok(Self { engine: FdtdEngine::new(cfg)?, projection_l_max })
    }
}

impl Backend for FdtdBackend {
    type State = GridWavefunction;
    type Kick = f64;

    fn engine(&self) -> Engine {
        Engine::Fdtd
    }

    fn init(&self, l: i64, m: i64) -> Result<GridWavefunction, ScenarioError> {
        Ok(self.engine.eigenstate(l, m)?)
    }

    fn kick_operator(&self, pol_angle: f64) -> f64 {
        pol_angle
    }

    fn kick(&self, state: &mut GridWavefunction, kick: &f64, strength: f64) -> Result<(), ScenarioError> {
        Ok(self.engine.kick(state, strength, *kick)?)
    }

    fn advance(&self, state: &mut GridWavefunction, to: f64) -> Result<(), ScenarioError> {
        self.engine.propagate(state, to - state.clock())?;
        state.set_clock(to);
        Ok(())
    }

    fn sample_grid(
        &self,
        state: &GridWavefunction,
        n: usize,
        ks: Range<usize>,
    ) -> Result<Vec<AngularSample>, ScenarioError> {
        let times: Vec<f64> = ks.map(|k| TAU * k as f64 / n as f64).collect();
        let mut s = state.clone();
        let mut out = Vec::with_capacity(times.len());
        self.engine
            .propagate_sampled(&mut s, &times, |g| out.push([self.engine.cos2theta(g), self.engine.cos2phi(g)]))?;
        Ok(out)
    }

    fn sample_cos2theta(&self, state: &GridWavefunction, times: &[f64]) -> Result<Vec<f64>, ScenarioError> {
        let mut s = state.clone();
        let mut out = Vec::with_capacity(times.len());
        self.engine.propagate_sampled(&mut s, times, |g| out.push(self.engine.cos2theta(g)))?;
        Ok(out)
    }

    fn angular_momentum(&self, state: &GridWavefunction) -> Result<[f64; 3], ScenarioError> {
        let p = self.engine.project(state, self.projection_l_max)?;
        let obs = ObservableSet::new(self.projection_l_max);
        Ok([obs.angular_momentum(&p, Axis::X), obs.angular_momentum(&p, Axis::Y), obs.angular_momentum(&p, Axis::Z)])
    }

    fn revival_mean_cos2phi(&self, _state: &GridWavefunction) -> Option<f64> {
        None
    }

    fn to_wavepacket(&self, state: &GridWavefunction) -> Result<Wavepacket, ScenarioError> {
        Ok(self.engine.project(state, self.projection_l_max)?)
    }
}
