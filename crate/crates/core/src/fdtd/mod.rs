//! Grid solver: azimuthal channels `f_m(θ)` on a half-shifted polar grid.
//!
//! `ψ(θ, φ) = Σ_m f_m(θ) e^{imφ} / 2π`, so `∫|ψ|² dΩ = Σ_m ∫|f_m|² sinθ dθ / 2π`.
//! Polar integrals use Fejér's first rule, whose nodes are exactly the grid
//! points `θ_i = (i + ½)π/n`. The Crank–Nicolson step is exactly unitary in a
//! different diagonal metric (see [`Grid::scheme_weights`]); the two norms agree
//! to `O(δθ²)`.

mod kick;
mod solver;

pub use kick::apply_kick_grid;
pub use solver::{cn_step, tridiag_solve, ChannelPropagator, GhostParity};

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angular::{basis_size, build_jy_operator, normalized_legendre_column, BasisIndex};
use crate::exec::Execution;
use crate::spectral::{SpectralError, Wavepacket};

/// Largest norm allowed in the outermost channel pair after a kick.
pub const CHANNEL_LIMIT: f64 = 1e-8;
/// Smallest recovered norm accepted when projecting onto spherical harmonics.
pub const PROJECTION_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FdtdError {
    #[error("invalid grid configuration: {0}")]
    InvalidConfig(String),
    #[error("|m| = {m} exceeds m_max = {m_max}")]
    Domain { m: i64, m_max: i64 },
    #[error("channel truncation: norm {norm:e} at |m| >= {m_max} exceeds {limit:e}; raise m_max and n_phi")]
    ChannelTruncation { norm: f64, m_max: i64, limit: f64 },
    #[error("zero pivot in tridiagonal sweep at row {row}")]
    ZeroPivot { row: usize },
    #[error("projection recovered norm {recovered} of {total}; raise l_max")]
    ProjectionTruncation { recovered: f64, total: f64 },
    #[error("state built for a different grid")]
    GridMismatch,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_theta: usize,
    pub n_phi: usize,
    pub m_max: i64,
    pub delta_tau: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n_theta: 512, n_phi: 256, m_max: 64, delta_tau: 1e-4 }
    }
}

impl GridConfig {
    pub fn delta_theta(&self) -> f64 {
        PI / self.n_theta as f64
    }

    pub fn validate(&self) -> Result<(), FdtdError> {
        if self.n_theta < 4 {
            return Err(FdtdError::InvalidConfig(format!("n_theta = {} < 4", self.n_theta)));
        }
        if self.m_max < 0 || self.n_phi <= 2 * self.m_max as usize {
            return Err(FdtdError::InvalidConfig(format!(
                "need 0 <= m_max < n_phi/2, got m_max = {}, n_phi = {}",
                self.m_max, self.n_phi
            )));
        }
        if !(self.delta_tau.is_finite() && self.delta_tau > 0.0) {
            return Err(FdtdError::InvalidConfig(format!("delta_tau = {}", self.delta_tau)));
        }
        Ok(())
    }

    pub fn channel_count(&self) -> usize {
        (2 * self.m_max + 1) as usize
    }
}

/// Polar grid geometry and quadrature weights.
#[derive(Debug, Clone)]
pub struct Grid {
    pub theta: Vec<f64>,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
    /// Fejér weights: `Σ_i q_i g(θ_i) ≈ ∫ g(θ) sinθ dθ`, exact for polynomials in
    /// `cosθ` of degree below `n_theta`.
    pub fejer: Vec<f64>,
    scheme: Vec<f64>,
}

impl Grid {
    pub fn new(n: usize) -> Self {
        let h = PI / n as f64;
        let theta: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
        let cos: Vec<f64> = theta.iter().map(|t| t.cos()).collect();
        let sin: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
        let fejer = theta
            .iter()
            .map(|&t| {
                let s: f64 = (1..=n / 2).map(|j| (2.0 * j as f64 * t).cos() / (4.0 * (j * j) as f64 - 1.0)).sum();
                2.0 / n as f64 * (1.0 - 2.0 * s)
            })
            .collect();
        // Diagonal metric symmetrizing the central-difference operator:
        // w_i H_{i,i+1} = w_{i+1} H_{i+1,i}.
        let mut scheme = vec![1.0; n];
        for i in 0..n - 1 {
            let up = 1.0 + 0.5 * h * cos[i] / sin[i];
            let down = 1.0 - 0.5 * h * cos[i + 1] / sin[i + 1];
            scheme[i + 1] = scheme[i] * up / down;
        }
        let total: f64 = scheme.iter().sum();
        scheme.iter_mut().for_each(|w| *w *= 2.0 / total);
        Self { theta, cos, sin, fejer, scheme }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Weights of the inner product in which a Crank–Nicolson step is unitary,
    /// scaled to integrate `sinθ` to 2 like [`Grid::fejer`].
    pub fn scheme_weights(&self) -> &[f64] {
        &self.scheme
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridWavefunction {
    cfg: GridConfig,
    /// `channels[m + m_max][i] = f_m(θ_i)`
    channels: Vec<Vec<Complex64>>,
    clock: f64,
}

impl GridWavefunction {
    pub fn zeros(cfg: GridConfig) -> Result<Self, FdtdError> {
        cfg.validate()?;
        Ok(Self { cfg, channels: vec![vec![Complex64::new(0.0, 0.0); cfg.n_theta]; cfg.channel_count()], clock: 0.0 })
    }

    pub fn config(&self) -> &GridConfig {
        &self.cfg
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn set_clock(&mut self, clock: f64) {
        self.clock = clock;
    }

    pub fn m_max(&self) -> i64 {
        self.cfg.m_max
    }

    pub fn channel(&self, m: i64) -> &[Complex64] {
        &self.channels[(m + self.cfg.m_max) as usize]
    }

    pub fn channel_mut(&mut self, m: i64) -> &mut [Complex64] {
        &mut self.channels[(m + self.cfg.m_max) as usize]
    }

    pub(crate) fn channels_mut(&mut self) -> &mut [Vec<Complex64>] {
        &mut self.channels
    }

    pub fn channel_norm(&self, grid: &Grid, m: i64) -> f64 {
        weighted_norm(self.channel(m), &grid.fejer)
    }

    /// Fejér-quadrature norm, `Σ_m ∫|f_m|² sinθ dθ / 2π`.
    pub fn norm(&self, grid: &Grid) -> f64 {
        self.channels.iter().map(|f| weighted_norm(f, &grid.fejer)).sum()
    }

    /// Norm in the metric conserved by the Crank–Nicolson step.
    pub fn scheme_norm(&self, grid: &Grid) -> f64 {
        self.channels.iter().map(|f| weighted_norm(f, grid.scheme_weights())).sum()
    }

    pub fn is_channel_empty(&self, m: i64) -> bool {
        self.channel(m).iter().all(|c| *c == Complex64::new(0.0, 0.0))
    }
}

fn weighted_norm(f: &[Complex64], w: &[f64]) -> f64 {
    f.iter().zip(w).map(|(c, w)| w * c.norm_sqr()).sum::<f64>() / TAU
}

/// `N_l^m P_l^m(cosθ)` with the sign of negative `m` folded in.
fn polar_part(l: i64, m: i64, x: f64) -> f64 {
    let ma = m.abs();
    let v = normalized_legendre_column(ma, l, x)[(l - ma) as usize];
    if m < 0 && ma % 2 == 1 {
        -v
    } else {
        v
    }
}

/// Grid solver bound to one configuration.
#[derive(Debug, Clone)]
pub struct FdtdEngine {
    cfg: GridConfig,
    grid: Grid,
    execution: Execution,
}

impl FdtdEngine {
    pub fn new(cfg: GridConfig) -> Result<Self, FdtdError> {
        cfg.validate()?;
        Ok(Self { cfg, grid: Grid::new(cfg.n_theta), execution: Execution::default() })
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn config(&self) -> &GridConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn execution(&self) -> Execution {
        self.execution
    }

    fn check(&self, state: &GridWavefunction) -> Result<(), FdtdError> {
        if state.cfg != self.cfg {
            return Err(FdtdError::GridMismatch);
        }
        Ok(())
    }

    /// `Y_l^m` sampled as `f_m(θ_i) = 2π N_l^m P_l^m(cosθ_i)`, clock zero.
    pub fn eigenstate(&self, l: i64, m: i64) -> Result<GridWavefunction, FdtdError> {
        BasisIndex::new(l, m).map_err(SpectralError::from)?;
        if m.abs() > self.cfg.m_max {
            return Err(FdtdError::Domain { m, m_max: self.cfg.m_max });
        }
        let mut state = GridWavefunction::zeros(self.cfg)?;
        for (f, &x) in state.channel_mut(m).iter_mut().zip(&self.grid.cos) {
            *f = Complex64::new(TAU * polar_part(l, m, x), 0.0);
        }
        Ok(state)
    }

    /// Synthesizes a spectral wavepacket on the grid.
    pub fn from_wavepacket(&self, packet: &Wavepacket) -> Result<GridWavefunction, FdtdError> {
        let mut state = GridWavefunction::zeros(self.cfg)?;
        state.clock = packet.clock();
        let l_max = packet.l_max();
        for m in -l_max..=l_max {
            let occupied: Vec<(i64, Complex64)> = (m.abs()..=l_max)
                .map(|l| (l, packet.coefficient(BasisIndex { l, m })))
                .filter(|(_, c)| *c != Complex64::new(0.0, 0.0))
                .collect();
            if occupied.is_empty() {
                continue;
            }
            if m.abs() > self.cfg.m_max {
                return Err(FdtdError::Domain { m, m_max: self.cfg.m_max });
            }
            let sign = if m < 0 && m % 2 != 0 { -1.0 } else { 1.0 };
            let ma = m.abs();
            for (f, &x) in state.channel_mut(m).iter_mut().zip(&self.grid.cos) {
                let col = normalized_legendre_column(ma, l_max, x);
                *f = occupied.iter().map(|&(l, c)| c * (TAU * sign * col[(l - ma) as usize])).sum();
            }
        }
        Ok(state)
    }

    /// `C_lm = Σ_i q_i N_l^m P_l^m(cosθ_i) f_m(θ_i)` for `l <= l_max`.
    pub fn project(&self, state: &GridWavefunction, l_max: i64) -> Result<Wavepacket, FdtdError> {
        self.check(state)?;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); basis_size(l_max)];
        let top = self.cfg.m_max.min(l_max);
        for m in -top..=top {
            if state.is_channel_empty(m) {
                continue;
            }
            let sign = if m < 0 && m % 2 != 0 { -1.0 } else { 1.0 };
            let ma = m.abs();
            for ((f, &x), &q) in state.channel(m).iter().zip(&self.grid.cos).zip(&self.grid.fejer) {
                let col = normalized_legendre_column(ma, l_max, x);
                for l in ma..=l_max {
                    coeffs[BasisIndex { l, m }.flat()] += f * (q * sign * col[(l - ma) as usize]);
                }
            }
        }
        let packet = Wavepacket::from_coefficients(l_max, coeffs, state.clock)?;
        let total = state.norm(&self.grid);
        let recovered = packet.norm_sqr();
        if recovered < total - PROJECTION_LIMIT {
            return Err(FdtdError::ProjectionTruncation { recovered, total });
        }
        Ok(packet)
    }

    pub fn norm(&self, state: &GridWavefunction) -> f64 {
        state.norm(&self.grid)
    }

    pub fn cos2theta(&self, state: &GridWavefunction) -> f64 {
        let g = &self.grid;
        state
            .channels
            .iter()
            .map(|f| f.iter().zip(&g.fejer).zip(&g.cos).map(|((c, q), x)| q * x * x * c.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            / TAU
    }

    /// `<e^{i2φ}> = Σ_m ∫ f_m* f_{m-2} sinθ dθ / 2π`
    pub fn exp_i2phi(&self, state: &GridWavefunction) -> Complex64 {
        let q = &self.grid.fejer;
        let mm = self.cfg.m_max;
        let mut acc = Complex64::new(0.0, 0.0);
        for m in (-mm + 2)..=mm {
            let (a, b) = (state.channel(m), state.channel(m - 2));
            acc += a.iter().zip(b).zip(q).map(|((x, y), w)| x.conj() * y * *w).sum::<Complex64>();
        }
        acc / TAU
    }

    /// `<cos²φ> = (norm + Re <e^{i2φ}>) / 2`
    pub fn cos2phi(&self, state: &GridWavefunction) -> f64 {
        0.5 * (self.norm(state) + self.exp_i2phi(state).re)
    }

    /// `∫ B |ψ|² dΩ` on the full `(θ_i, φ_j)` grid: Fejér in θ, uniform in φ.
    pub fn observable(&self, state: &GridWavefunction, b: impl Fn(f64, f64) -> f64) -> f64 {
        let n_phi = self.cfg.n_phi;
        let rows = kick::synthesize(state, n_phi);
        let dphi = TAU / n_phi as f64;
        rows.iter()
            .enumerate()
            .map(|(i, row)| {
                let s: f64 = row
                    .iter()
                    .enumerate()
                    .map(|(j, psi)| (psi / TAU).norm_sqr() * b(self.grid.theta[i], j as f64 * dphi))
                    .sum();
                self.grid.fejer[i] * s * dphi
            })
            .sum()
    }

    /// `<J_y>` of the projection onto `Y_l^m`, `l <= l_max`.
    pub fn expect_jy(&self, state: &GridWavefunction, l_max: i64) -> Result<f64, FdtdError> {
        let packet = self.project(state, l_max)?;
        Ok(build_jy_operator(l_max).expectation(packet.coeffs()))
    }
}

pub fn grid_from_eigenstate(l: i64, m: i64, cfg: &GridConfig) -> Result<GridWavefunction, FdtdError> {
    FdtdEngine::new(*cfg)?.eigenstate(l, m)
}

/// See [`FdtdEngine::observable`].
pub fn observable_on_grid(state: &GridWavefunction, b: impl Fn(f64, f64) -> f64) -> Result<f64, FdtdError> {
    Ok(FdtdEngine::new(state.cfg)?.observable(state, b))
}

/// See [`FdtdEngine::expect_jy`].
pub fn expect_jy_grid(state: &GridWavefunction, l_max: i64) -> Result<f64, FdtdError> {
    FdtdEngine::new(state.cfg)?.expect_jy(state, l_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn cfg(n_theta: usize) -> GridConfig {
        GridConfig { n_theta, n_phi: 32, m_max: 8, delta_tau: 1e-4 }
    }

    #[test]
    fn config_validation() {
        assert!(GridConfig::default().validate().is_ok());
        assert!(GridConfig { n_phi: 16, ..cfg(64) }.validate().is_err());
        assert!(GridConfig { delta_tau: 0.0, ..cfg(64) }.validate().is_err());
        assert!(GridConfig { n_theta: 2, ..cfg(64) }.validate().is_err());
    }

    #[test]
    fn grid_avoids_poles() {
        let g = Grid::new(16);
        assert!(g.theta[0] > 0.0 && *g.theta.last().unwrap() < PI);
        assert!((g.theta[0] - PI / 32.0).abs() < 1e-15);
    }

    #[test]
    fn fejer_is_exact_on_polynomials() {
        let g = Grid::new(24);
        for k in 0..24 {
            let got: f64 = g.fejer.iter().zip(&g.cos).map(|(q, x)| q * x.powi(k)).sum();
            let exact = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
            assert!((got - exact).abs() < 1e-14, "x^{k}: {got}");
        }
    }

    #[test]
    fn scheme_weights_track_sin() {
        for n in [128, 512] {
            let g = Grid::new(n);
            let h = PI / n as f64;
            let w = g.scheme_weights();
            let worst = w.iter().zip(&g.sin).map(|(w, s)| (w / (h * s) - 1.0).abs()).fold(0.0, f64::max);
            assert!(worst < 4.0 * h * h, "n={n}: {worst}");
            assert!(w.iter().zip(w.iter().rev()).all(|(a, b)| (a - b).abs() < 1e-15));
        }
    }

    #[test]
    fn sampled_eigenstates() {
        let e = FdtdEngine::new(GridConfig { n_theta: 512, ..cfg(512) }).unwrap();
        let s00 = e.eigenstate(0, 0).unwrap();
        let f0 = s00.channel(0);
        assert!(f0.iter().all(|c| (c - f0[0]).norm() < 1e-15));
        assert!((e.norm(&s00) - 1.0).abs() < 1e-14);
        let s21 = e.eigenstate(2, 1).unwrap();
        assert!((e.norm(&s21) - 1.0).abs() < 1e-8);
        assert!((0..=8).filter(|&m| m != 1).all(|m| s21.is_channel_empty(m) && s21.is_channel_empty(-m)));
        let s31 = e.eigenstate(3, 1).unwrap();
        let overlap: Complex64 =
            s21.channel(1).iter().zip(s31.channel(1)).zip(&e.grid.fejer).map(|((a, b), q)| a.conj() * b * *q).sum();
        assert!(overlap.norm() / TAU < 1e-8);
        assert_eq!(e.eigenstate(9, 9), Err(FdtdError::Domain { m: 9, m_max: 8 }));
    }

    #[test]
    fn analytic_observables() {
        let e = FdtdEngine::new(cfg(512)).unwrap();
        let s00 = e.eigenstate(0, 0).unwrap();
        assert!((e.observable(&s00, |_, _| 1.0) - 1.0).abs() < 1e-8);
        assert!((e.cos2theta(&s00) - 1.0 / 3.0).abs() < 1e-8);
        assert!((e.observable(&s00, |t, _| t.cos().powi(2)) - 1.0 / 3.0).abs() < 1e-8);
        // (Y_1^{-1} - Y_1^1)/√2 is the p_x orbital
        let mut p = e.eigenstate(1, -1).unwrap();
        let p1 = e.eigenstate(1, 1).unwrap();
        for (a, b) in p.channel_mut(1).iter_mut().zip(p1.channel(1)) {
            *a = -b * FRAC_1_SQRT_2;
        }
        p.channel_mut(-1).iter_mut().for_each(|a| *a *= FRAC_1_SQRT_2);
        assert!((e.cos2phi(&p) - 0.75).abs() < 1e-8);
        assert!((e.observable(&p, |_, f| f.cos().powi(2)) - 0.75).abs() < 1e-8);
    }

    #[test]
    fn wavepacket_round_trip() {
        let e = FdtdEngine::new(GridConfig { n_theta: 256, n_phi: 64, m_max: 16, delta_tau: 1e-4 }).unwrap();
        let mut s = crate::spectral::init_eigenstate(3, 1, 16).unwrap();
        crate::spectral::KickOperator::new(16, 0.7).apply(&mut s, 1.2, crate::spectral::KickMethod::Chebyshev).unwrap();
        let grid = e.from_wavepacket(&s).unwrap();
        let back = e.project(&grid, 16).unwrap();
        for (a, b) in s.coeffs().iter().zip(back.coeffs()) {
            assert!((a - b).norm() < 1e-12);
        }
        let spectral = crate::spectral::expect_angular_momentum(&s, crate::spectral::Axis::Y);
        assert!((e.expect_jy(&grid, 16).unwrap() - spectral).abs() < 1e-12);
        assert!(matches!(e.project(&grid, 4), Err(FdtdError::ProjectionTruncation { .. })));
    }

    #[test]
    fn jy_of_l1_eigenstates() {
        let e = FdtdEngine::new(cfg(256)).unwrap();
        let jy = build_jy_operator(1);
        let block = nalgebra::DMatrix::from_fn(3, 3, |r, c| jy.matrix().get(r + 1, c + 1));
        let eig = nalgebra::SymmetricEigen::new(block);
        for k in 0..3 {
            let mut c = vec![Complex64::new(0.0, 0.0); 4];
            for r in 0..3 {
                c[r + 1] = eig.eigenvectors[(r, k)];
            }
            let grid = e.from_wavepacket(&Wavepacket::from_coefficients(1, c, 0.0).unwrap()).unwrap();
            assert!((e.expect_jy(&grid, 4).unwrap() - eig.eigenvalues[k]).abs() < 1e-6);
        }
        let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        values.sort_by(f64::total_cmp);
        assert!((values[0] + 1.0).abs() < 1e-12 && values[1].abs() < 1e-12 && (values[2] - 1.0).abs() < 1e-12);
    }
}
