use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{FdtdEngine, FdtdError, GridWavefunction, CHANNEL_LIMIT};
use crate::spectral::PulseSpec;

/// Channels whose norm falls below this after a kick are cleared, so free
/// propagation can skip them.
const DROP_NORM: f64 = 1e-28;

/// `rows[i][j] = Σ_m f_m(θ_i) e^{imφ_j}` with `φ_j = 2πj/n_phi`.
pub(super) fn synthesize(state: &GridWavefunction, n_phi: usize) -> Vec<Vec<Complex64>> {
    let fft = FftPlanner::new().plan_fft_inverse(n_phi);
    let m_max = state.m_max();
    (0..state.config().n_theta)
        .map(|i| {
            let mut row = vec![Complex64::new(0.0, 0.0); n_phi];
            for m in -m_max..=m_max {
                row[m.rem_euclid(n_phi as i64) as usize] = state.channel(m)[i];
            }
            fft.process(&mut row);
            row
        })
        .collect()
}

impl FdtdEngine {
    /// `ψ <- exp(iP cos²β) ψ` pointwise on the `(θ_i, φ_j)` grid.
    pub fn kick(&self, state: &mut GridWavefunction, strength: f64, pol_angle: f64) -> Result<(), FdtdError> {
        self.check(state)?;
        PulseSpec::new(strength, pol_angle, state.clock())?;
        if strength == 0.0 {
            return Ok(());
        }
        if pol_angle == 0.0 {
            self.kick_axial(state, strength);
            return Ok(());
        }
        let n_phi = self.cfg.n_phi;
        let m_max = self.cfg.m_max;
        let (s2, c2, x2) = (pol_angle.sin().powi(2), pol_angle.cos().powi(2), (2.0 * pol_angle).sin());
        let phis: Vec<(f64, f64)> = (0..n_phi)
            .map(|j| {
                let phi = TAU * j as f64 / n_phi as f64;
                (phi.cos(), phi.cos().powi(2))
            })
            .collect();
        let mut planner = FftPlanner::new();
        let inverse = planner.plan_fft_inverse(n_phi);
        let forward = planner.plan_fft_forward(n_phi);
        let rows: Vec<usize> = (0..self.cfg.n_theta).collect();
        let state_ref = &*state;
        let grid = &self.grid;
        let kicked: Vec<Vec<Complex64>> = self.execution.map(&rows, |&i| {
            let mut row = vec![Complex64::new(0.0, 0.0); n_phi];
            for m in -m_max..=m_max {
                row[m.rem_euclid(n_phi as i64) as usize] = state_ref.channel(m)[i];
            }
            inverse.process(&mut row);
            let (st, ct) = (grid.sin[i], grid.cos[i]);
            for (psi, &(cp, cp2)) in row.iter_mut().zip(&phis) {
                let cos2beta = cp2 * st * st * s2 + ct * ct * c2 + cp * st * ct * x2;
                *psi *= Complex64::from_polar(1.0 / n_phi as f64, strength * cos2beta);
            }
            forward.process(&mut row);
            row
        });
        let mut dropped = 0.0;
        for (i, row) in kicked.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                let m = if k <= n_phi / 2 { k as i64 } else { k as i64 - n_phi as i64 };
                if m.abs() <= m_max {
                    state.channel_mut(m)[i] = *v;
                } else {
                    dropped += self.grid.fejer[i] * v.norm_sqr() / TAU;
                }
            }
        }
        let outer = state.channel_norm(&self.grid, m_max) + state.channel_norm(&self.grid, -m_max) + dropped;
        if outer > CHANNEL_LIMIT {
            return Err(FdtdError::ChannelTruncation { norm: outer, m_max, limit: CHANNEL_LIMIT });
        }
        for m in -m_max..=m_max {
            if state.channel_norm(&self.grid, m) < DROP_NORM {
                state.channel_mut(m).iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            }
        }
        Ok(())
    }

    /// A z-polarized kick is diagonal in `m`.
    fn kick_axial(&self, state: &mut GridWavefunction, strength: f64) {
        let phase: Vec<Complex64> =
            self.grid.cos.iter().map(|x| Complex64::from_polar(1.0, strength * x * x)).collect();
        for f in state.channels_mut() {
            f.iter_mut().zip(&phase).for_each(|(v, p)| *v *= p);
        }
    }
}

/// `exp(iP cos²β) ψ` on the grid; the pulse time is not used.
pub fn apply_kick_grid(mut state: GridWavefunction, pulse: &PulseSpec) -> Result<GridWavefunction, FdtdError> {
    let engine = FdtdEngine::new(*state.config())?;
    engine.kick(&mut state, pulse.strength, pulse.pol_angle)?;
    Ok(state)
}
