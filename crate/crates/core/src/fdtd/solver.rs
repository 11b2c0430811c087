use num_complex::Complex64;

use super::{FdtdEngine, FdtdError, Grid, GridConfig, GridWavefunction};

/// Sign relating the ghost values beyond each pole to the first interior point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum GhostParity {
    /// `f_m(-δθ/2) = (-1)^m f_m(δθ/2)`, likewise at the south pole.
    #[default]
    Physical,
    /// The opposite sign. Only useful as a negative control.
    Flipped,
}

const PIVOT_FLOOR: f64 = 1e-300;
/// Channels swept together to overlap their dependency chains.
const GROUP: usize = 8;

/// Thomas algorithm for `A x = rhs` with `A` tridiagonal; `lower[0]` and
/// `upper[n-1]` are ignored.
pub fn tridiag_solve(
    lower: &[Complex64],
    diag: &[Complex64],
    upper: &[Complex64],
    rhs: &[Complex64],
) -> Result<Vec<Complex64>, FdtdError> {
    let n = diag.len();
    assert!(n >= 1 && lower.len() == n && upper.len() == n && rhs.len() == n, "tridiagonal system of mismatched sizes");
    let mut cp = vec![Complex64::new(0.0, 0.0); n];
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    let mut denom = diag[0];
    for i in 0..n {
        if i > 0 {
            denom = diag[i] - lower[i] * cp[i - 1];
        }
        if denom.norm() < PIVOT_FLOOR {
            return Err(FdtdError::ZeroPivot { row: i });
        }
        let inv = denom.inv();
        cp[i] = upper[i] * inv;
        y[i] = if i == 0 { rhs[0] * inv } else { (rhs[i] - lower[i] * y[i - 1]) * inv };
    }
    for i in (0..n - 1).rev() {
        y[i] = y[i] - cp[i] * y[i + 1];
    }
    Ok(y)
}

/// Discretized `H = -½(∂²_θ + cotθ ∂_θ - m²/sin²θ)` for one channel, as
/// `(lower, diag, upper)` with the ghost values folded into the end rows.
pub(super) fn channel_hamiltonian(grid: &Grid, m: i64, ghost: GhostParity) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = grid.len();
    let h = std::f64::consts::PI / n as f64;
    let inv_h2 = 1.0 / (h * h);
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let m2 = (m * m) as f64;
    for i in 0..n {
        let drift = grid.cos[i] / grid.sin[i] / (2.0 * h);
        lower[i] = -0.5 * (inv_h2 - drift);
        upper[i] = -0.5 * (inv_h2 + drift);
        diag[i] = inv_h2 + 0.5 * m2 / (grid.sin[i] * grid.sin[i]);
    }
    let parity = if m % 2 == 0 { 1.0 } else { -1.0 };
    let s = match ghost {
        GhostParity::Physical => parity,
        GhostParity::Flipped => -parity,
    };
    diag[0] += s * lower[0];
    diag[n - 1] += s * upper[n - 1];
    lower[0] = 0.0;
    upper[n - 1] = 0.0;
    (lower, diag, upper)
}

/// Pre-factored Crank–Nicolson step `f <- 2χ - f`, `(1 + iH dt/2) χ = f`, for
/// one channel and one step size.
#[derive(Debug, Clone)]
pub struct ChannelPropagator {
    /// forward sweep `y_i = f_i inv_i - a_i y_{i-1}`
    inv: Vec<Complex64>,
    a: Vec<Complex64>,
    /// back substitution `x_i = y_i - c_i x_{i+1}`
    c: Vec<Complex64>,
}

impl ChannelPropagator {
    pub fn new(grid: &Grid, m: i64, dt: f64, ghost: GhostParity) -> Result<Self, FdtdError> {
        let (lo, d, up) = channel_hamiltonian(grid, m, ghost);
        let n = grid.len();
        let k = Complex64::new(0.0, 0.5 * dt);
        let mut inv = vec![Complex64::new(0.0, 0.0); n];
        let mut a = vec![Complex64::new(0.0, 0.0); n];
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let mut denom = Complex64::new(1.0, 0.0) + k * d[i];
            if i > 0 {
                denom -= k * lo[i] * c[i - 1];
            }
            if denom.norm() < PIVOT_FLOOR {
                return Err(FdtdError::ZeroPivot { row: i });
            }
            inv[i] = denom.inv();
            a[i] = k * lo[i] * inv[i];
            c[i] = k * up[i] * inv[i];
        }
        Ok(Self { inv, a, c })
    }

    /// Advances `f` by `steps` steps; `scratch` must have the grid length.
    pub fn advance(&self, f: &mut [Complex64], steps: usize, scratch: &mut [Complex64]) {
        let n = f.len();
        for _ in 0..steps {
            let mut y = Complex64::new(0.0, 0.0);
            for i in 0..n {
                y = f[i] * self.inv[i] - self.a[i] * y;
                scratch[i] = y;
            }
            let mut x = Complex64::new(0.0, 0.0);
            for i in (0..n).rev() {
                x = scratch[i] - self.c[i] * x;
                f[i] = 2.0 * x - f[i];
            }
        }
    }

    /// `K` independent channels in one interleaved sweep; same result as `K`
    /// separate `advance` calls.
    pub fn advance_group<const K: usize>(
        props: [&Self; K],
        f: [&mut [Complex64]; K],
        steps: usize,
        scratch: &mut [[Complex64; K]],
    ) {
        let n = f[0].len();
        let zero = Complex64::new(0.0, 0.0);
        for _ in 0..steps {
            let mut y = [zero; K];
            for i in 0..n {
                for k in 0..K {
                    y[k] = f[k][i] * props[k].inv[i] - props[k].a[i] * y[k];
                }
                scratch[i] = y;
            }
            let mut x = [zero; K];
            for i in (0..n).rev() {
                for k in 0..K {
                    x[k] = scratch[i][k] - props[k].c[i] * x[k];
                    f[k][i] = 2.0 * x[k] - f[k][i];
                }
            }
        }
    }
}

impl FdtdEngine {
    /// Free evolution by `duration >= 0` in `ceil(duration/δτ)` equal steps.
    /// Empty channels stay empty and are skipped.
    pub fn propagate(&self, state: &mut GridWavefunction, duration: f64) -> Result<(), FdtdError> {
        self.propagate_with(state, duration, GhostParity::Physical)
    }

    pub(crate) fn propagate_with(
        &self,
        state: &mut GridWavefunction,
        duration: f64,
        ghost: GhostParity,
    ) -> Result<(), FdtdError> {
        self.check(state)?;
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(FdtdError::InvalidConfig(format!("propagation by {duration}")));
        }
        if duration == 0.0 {
            return Ok(());
        }
        let steps = ((duration / self.cfg.delta_tau) - 1e-9).ceil().max(1.0) as usize;
        let dt = duration / steps as f64;
        let m_max = self.cfg.m_max;
        let active: Vec<i64> = (-m_max..=m_max).filter(|&m| !state.is_channel_empty(m)).collect();
        let mut props = Vec::with_capacity(active.len());
        for &m in &active {
            props.push(ChannelPropagator::new(&self.grid, m, dt, ghost)?);
        }
        let n = self.cfg.n_theta;
        let mut channels: Vec<(&ChannelPropagator, &mut Vec<Complex64>)> = state
            .channels_mut()
            .iter_mut()
            .enumerate()
            .filter(|(k, _)| active.contains(&(*k as i64 - m_max)))
            .map(|(_, f)| f)
            .zip(&props)
            .map(|(f, p)| (p, f))
            .collect();
        let mut jobs: Vec<Vec<(&ChannelPropagator, &mut Vec<Complex64>)>> = Vec::new();
        while !channels.is_empty() {
            let take = channels.len().min(GROUP);
            jobs.push(channels.drain(..take).collect());
        }
        self.execution.for_each_mut(&mut jobs, |job| {
            if job.len() == GROUP {
                let props: [&ChannelPropagator; GROUP] = std::array::from_fn(|k| job[k].0);
                let f: Vec<&mut [Complex64]> = job.iter_mut().map(|(_, f)| f.as_mut_slice()).collect();
                let f: [&mut [Complex64]; GROUP] = f.try_into().ok().expect("full group");
                ChannelPropagator::advance_group(props, f, steps, &mut vec![[Complex64::new(0.0, 0.0); GROUP]; n]);
            } else {
                let mut scratch = vec![Complex64::new(0.0, 0.0); n];
                for (p, f) in job.iter_mut() {
                    p.advance(f, steps, &mut scratch);
                }
            }
        });
        state.clock += duration;
        Ok(())
    }

    /// Visits the state at each of the increasing `times` (not before the
    /// current clock).
    pub fn propagate_sampled(
        &self,
        state: &mut GridWavefunction,
        times: &[f64],
        mut observe: impl FnMut(&GridWavefunction),
    ) -> Result<(), FdtdError> {
        for &t in times {
            let dt = t - state.clock;
            self.propagate(state, dt.max(0.0))?;
            state.clock = t;
            observe(state);
        }
        Ok(())
    }
}

/// One Crank–Nicolson step of `δτ`.
pub fn cn_step(state: &GridWavefunction, cfg: &GridConfig) -> Result<GridWavefunction, FdtdError> {
    let engine = FdtdEngine::new(*cfg)?;
    let mut next = state.clone();
    engine.propagate(&mut next, cfg.delta_tau)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdtd::GridConfig;
    use std::f64::consts::TAU;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn tridiag_trivial_cases() {
        let one = vec![c(1.0, 0.0); 5];
        let zero = vec![c(0.0, 0.0); 5];
        let rhs: Vec<Complex64> = (0..5).map(|i| c(i as f64, -1.0)).collect();
        assert_eq!(tridiag_solve(&zero, &one, &zero, &rhs).unwrap(), rhs);
        let x = tridiag_solve(&[c(0.0, 0.0)], &[c(2.0, 1.0)], &[c(0.0, 0.0)], &[c(3.0, 4.0)]).unwrap();
        assert!((x[0] - c(3.0, 4.0) / c(2.0, 1.0)).norm() < 1e-15);
        assert_eq!(
            tridiag_solve(&[c(0.0, 0.0); 2], &[c(0.0, 0.0), c(1.0, 0.0)], &[c(0.0, 0.0); 2], &[c(1.0, 0.0); 2]),
            Err(FdtdError::ZeroPivot { row: 0 })
        );
    }

    #[test]
    fn tridiag_matches_dense_lu() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 64;
        let mut r = || c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let lower: Vec<Complex64> = (0..n).map(|_| r()).collect();
        let upper: Vec<Complex64> = (0..n).map(|_| r()).collect();
        let diag: Vec<Complex64> = (0..n).map(|_| r() + c(4.0, 0.0)).collect();
        let rhs: Vec<Complex64> = (0..n).map(|_| r()).collect();
        let x = tridiag_solve(&lower, &diag, &upper, &rhs).unwrap();
        let a = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                diag[i]
            } else if j + 1 == i {
                lower[i]
            } else if i + 1 == j {
                upper[i]
            } else {
                c(0.0, 0.0)
            }
        });
        let b = nalgebra::DVector::from_column_slice(&rhs);
        let dense = a.clone().lu().solve(&b).unwrap();
        let scale = rhs.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for i in 0..n {
            assert!((x[i] - dense[i]).norm() < 1e-12 * scale);
        }
        let residual = &a * nalgebra::DVector::from_column_slice(&x) - b;
        assert!(residual.iter().map(|v| v.norm()).fold(0.0, f64::max) < 1e-12 * scale);
    }

    #[test]
    fn hamiltonian_is_symmetric_in_scheme_metric() {
        let g = Grid::new(64);
        let w = g.scheme_weights();
        for m in [0, 1, 4] {
            let (lo, _, up) = channel_hamiltonian(&g, m, GhostParity::Physical);
            for i in 0..63 {
                assert!((w[i] * up[i] - w[i + 1] * lo[i + 1]).abs() < 1e-9 * (w[i] * up[i]).abs());
            }
        }
    }

    #[test]
    fn one_step_is_unitary() {
        let cfg = GridConfig { n_theta: 512, n_phi: 32, m_max: 8, delta_tau: 1e-4 };
        let e = FdtdEngine::new(cfg).unwrap();
        let mut s = e.eigenstate(7, 3).unwrap();
        let other = e.eigenstate(4, 0).unwrap();
        s.channel_mut(0).copy_from_slice(other.channel(0));
        let before = s.scheme_norm(e.grid());
        let next = cn_step(&s, &cfg).unwrap();
        assert!((next.scheme_norm(e.grid()) - before).abs() < 1e-12);
        assert!((next.clock() - 1e-4).abs() < 1e-18);
        for m in [1, 2, -3, 5] {
            assert!(next.is_channel_empty(m), "channel {m} stays empty");
        }
    }

    fn phase_error(n_theta: usize, dt: f64, l: i64, m: i64, t: f64) -> f64 {
        let e = FdtdEngine::new(GridConfig { n_theta, n_phi: 32, m_max: 8, delta_tau: dt }).unwrap();
        let s0 = e.eigenstate(l, m).unwrap();
        let mut s = s0.clone();
        e.propagate(&mut s, t).unwrap();
        let q = &e.grid().fejer;
        let overlap: Complex64 =
            s0.channel(m).iter().zip(s.channel(m)).zip(q).map(|((a, b), w)| a.conj() * b * *w).sum();
        let exact = -((l * (l + 1)) as f64) * t / 2.0;
        let d = overlap.arg() - exact;
        (d + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI
    }

    #[test]
    fn second_order_in_time() {
        // successive differences cancel the spatial part
        let p: Vec<f64> = [0.02, 0.01, 0.005].iter().map(|&dt| phase_error(256, dt, 6, 2, 0.4)).collect();
        let ratio = (p[0] - p[1]) / (p[1] - p[2]);
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn second_order_in_space() {
        let p: Vec<f64> = [32, 64, 128].iter().map(|&n| phase_error(n, 1e-3, 4, 1, 0.5)).collect();
        let ratio = (p[0] - p[1]) / (p[1] - p[2]);
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }

    fn overlap(e: &FdtdEngine, a: &GridWavefunction, b: &GridWavefunction, m: i64) -> Complex64 {
        let q = &e.grid().fejer;
        a.channel(m).iter().zip(b.channel(m)).zip(q).map(|((x, y), w)| x.conj() * y * *w).sum::<Complex64>() / TAU
    }

    #[test]
    fn free_evolution_fidelity() {
        let e = FdtdEngine::new(GridConfig::default()).unwrap();
        for (l, m) in [(0, 0), (2, 1), (5, 0), (10, 3), (20, 0), (20, 7), (20, 13), (20, 20)] {
            let s0 = e.eigenstate(l, m).unwrap();
            let mut s = s0.clone();
            e.propagate(&mut s, 0.01).unwrap();
            let f = overlap(&e, &s0, &s, m).norm();
            assert!(f > 1.0 - 1e-6, "Y_{l}^{m}: fidelity {f}");
        }
    }

    #[test]
    fn ghost_sign_negative_control() {
        // Y_0^0 is stationary under the correct closure and only under it
        let e = FdtdEngine::new(GridConfig::default()).unwrap();
        let s0 = e.eigenstate(0, 0).unwrap();
        let phase = |ghost| {
            let mut s = s0.clone();
            e.propagate_with(&mut s, 1.0, ghost).unwrap();
            overlap(&e, &s0, &s, 0).arg().abs()
        };
        assert!(phase(GhostParity::Physical) < 1e-10);
        assert!(phase(GhostParity::Flipped) > 1e-7);
    }

    #[test]
    fn norm_over_one_revival() {
        let e = FdtdEngine::new(GridConfig::default()).unwrap();
        let mut s = e.eigenstate(4, 1).unwrap();
        e.kick(&mut s, 5.0, 0.0).unwrap();
        let (fejer, scheme) = (s.norm(e.grid()), s.scheme_norm(e.grid()));
        e.propagate(&mut s, TAU).unwrap();
        assert!((s.norm(e.grid()) - fejer).abs() < 1e-6);
        assert!((s.scheme_norm(e.grid()) - scheme).abs() < 1e-10);
        assert!((fejer - 1.0).abs() < 1e-6);
    }

    #[test]
    fn channels_do_not_mix() {
        let cfg = GridConfig { n_theta: 128, n_phi: 32, m_max: 8, delta_tau: 1e-3 };
        let e = FdtdEngine::new(cfg).unwrap();
        let mut s = e.eigenstate(5, 2).unwrap();
        let other = e.eigenstate(3, -1).unwrap();
        s.channel_mut(-1).copy_from_slice(other.channel(-1));
        let before: Vec<f64> = (-8..=8).map(|m| s.channel_norm(e.grid(), m)).collect();
        e.propagate(&mut s, 0.5).unwrap();
        for (k, m) in (-8..=8).enumerate() {
            if before[k] == 0.0 {
                assert!(s.is_channel_empty(m));
            }
        }
    }

    #[test]
    fn conjugate_channels_are_time_reversed() {
        // H depends on m², so channels ±m share one propagator, which is real
        // symmetric in the scheme metric: conj(U) = U⁻¹.
        let cfg = GridConfig { n_theta: 128, n_phi: 32, m_max: 8, delta_tau: 1e-3 };
        let e = FdtdEngine::new(cfg).unwrap();
        let mut packet = crate::spectral::init_eigenstate(3, 2, 16).unwrap();
        crate::spectral::KickOperator::new(16, 0.0)
            .apply(&mut packet, 2.0, crate::spectral::KickMethod::Chebyshev)
            .unwrap();
        let mut s = e.from_wavepacket(&crate::spectral::free_propagate(packet, 0.3)).unwrap();
        let start: Vec<Complex64> = s.channel(2).iter().map(|v| v.conj()).collect();
        s.channel_mut(-2).copy_from_slice(&start);
        e.propagate(&mut s, 0.2).unwrap();
        let mut back = GridWavefunction::zeros(cfg).unwrap();
        let reversed: Vec<Complex64> = s.channel(2).iter().map(|v| v.conj()).collect();
        back.channel_mut(-2).copy_from_slice(&reversed);
        e.propagate(&mut back, 0.2).unwrap();
        for (a, b) in back.channel(-2).iter().zip(&start) {
            assert!((a - b).norm() < 1e-12);
        }
        let mut same = GridWavefunction::zeros(cfg).unwrap();
        same.channel_mut(2).copy_from_slice(&start);
        e.propagate(&mut same, 0.2).unwrap();
        assert_eq!(same.channel(2), s.channel(-2));
    }
}
