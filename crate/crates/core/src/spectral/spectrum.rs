use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{shell_energy, Wavepacket};
use crate::angular::{BasisIndex, SparseMatrix};

/// Time dependence of an expectation value under free evolution.
///
/// With `E_l = l(l+1)/2` integer, `<ψ(t)|A|ψ(t)> = Σ_ω a_ω e^{iω(t - origin)}`
/// over integer frequencies `ω = E_row - E_col`. Spectra of different states
/// taken at the same origin add linearly, which is how ensembles are averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySpectrum {
    origin: f64,
    omega_max: i64,
    amps: Vec<Complex64>,
}

impl FrequencySpectrum {
    pub fn zeros(l_max: i64, origin: f64) -> Self {
        let omega_max = shell_energy(l_max);
        Self { origin, omega_max, amps: vec![Complex64::new(0.0, 0.0); (2 * omega_max + 1) as usize] }
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn omega_max(&self) -> i64 {
        self.omega_max
    }

    pub fn amplitude(&self, omega: i64) -> Complex64 {
        if omega.abs() > self.omega_max {
            return Complex64::new(0.0, 0.0);
        }
        self.amps[(omega + self.omega_max) as usize]
    }

    /// Adds `weight · <ψ|A|ψ>` resolved by frequency. The state must sit at
    /// the spectrum's origin.
    pub fn accumulate(&mut self, state: &Wavepacket, op: &SparseMatrix, weight: f64) {
        assert!(
            (state.clock() - self.origin).abs() <= 1e-9 * (1.0 + self.origin.abs()),
            "state clock {} differs from spectrum origin {}",
            state.clock(),
            self.origin
        );
        assert!(shell_energy(state.l_max()) <= self.omega_max);
        let c = state.coeffs();
        let zero = Complex64::new(0.0, 0.0);
        for (r, &cr) in c.iter().enumerate() {
            if cr == zero {
                continue;
            }
            let er = shell_energy(BasisIndex::from_flat(r).l);
            let left = cr.conj() * weight;
            let (cols, vals) = op.row(r);
            for (&col, &v) in cols.iter().zip(vals) {
                let cc = c[col];
                if cc == zero {
                    continue;
                }
                let omega = er - shell_energy(BasisIndex::from_flat(col).l);
                self.amps[(omega + self.omega_max) as usize] += left * v * cc;
            }
        }
    }

    /// `self += weight · other`
    pub fn add_scaled(&mut self, other: &FrequencySpectrum, weight: f64) {
        assert_eq!(self.omega_max, other.omega_max);
        assert!((self.origin - other.origin).abs() <= 1e-9 * (1.0 + self.origin.abs()));
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += b * weight;
        }
    }

    /// Revival average, the `ω = 0` amplitude.
    pub fn mean(&self) -> Complex64 {
        self.amps[self.omega_max as usize]
    }

    pub fn value_at(&self, t: f64) -> Complex64 {
        let s = t - self.origin;
        self.nonzero().map(|(w, a)| a * Complex64::from_polar(1.0, w as f64 * s)).sum()
    }

    /// Direct summation at arbitrary times.
    pub fn sample_at(&self, times: &[f64]) -> Vec<Complex64> {
        let terms: Vec<(f64, Complex64)> = self.nonzero().map(|(w, a)| (w as f64, a)).collect();
        times
            .iter()
            .map(|&t| {
                let s = t - self.origin;
                terms.iter().map(|&(w, a)| a * Complex64::from_polar(1.0, w * s)).sum()
            })
            .collect()
    }

    /// Values at `t_k = start + 2πk/n`, `k = 0..n`, one full revival. Exact:
    /// integer frequencies are folded modulo `n` before a single FFT.
    pub fn sample_revival(&self, start: f64, n: usize) -> Vec<Complex64> {
        assert!(n > 0);
        let s0 = start - self.origin;
        let mut bins = vec![Complex64::new(0.0, 0.0); n];
        for (w, a) in self.nonzero() {
            bins[w.rem_euclid(n as i64) as usize] += a * Complex64::from_polar(1.0, w as f64 * s0);
        }
        FftPlanner::new().plan_fft_inverse(n).process(&mut bins);
        bins
    }

    fn nonzero(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let zero = Complex64::new(0.0, 0.0);
        self.amps.iter().enumerate().filter(move |(_, &a)| a != zero).map(move |(i, &a)| (i as i64 - self.omega_max, a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::build_cos2theta_operator;
    use crate::spectral::{free_propagate, init_eigenstate, KickMethod, KickOperator, ObservableSet};
    use std::f64::consts::PI;

    fn kicked(l_max: i64) -> Wavepacket {
        let mut s = init_eigenstate(1, 1, l_max).unwrap();
        KickOperator::new(l_max, 0.0).apply(&mut s, 2.0, KickMethod::Chebyshev).unwrap();
        KickOperator::new(l_max, 0.6).apply(&mut s, 1.5, KickMethod::Chebyshev).unwrap();
        s
    }

    #[test]
    fn spectrum_reproduces_direct_evaluation() {
        let l_max = 20;
        let s = kicked(l_max);
        let obs = ObservableSet::new(l_max);
        let mut cos2 = FrequencySpectrum::zeros(l_max, 0.0);
        cos2.accumulate(&s, obs.cos2theta.matrix(), 1.0);
        let mut e2 = FrequencySpectrum::zeros(l_max, 0.0);
        e2.accumulate(&s, &obs.exp_i2phi, 1.0);
        let times: Vec<f64> = (0..16).map(|k| 0.37 * k as f64).collect();
        let direct = cos2.sample_at(&times);
        let phi = e2.sample_at(&times);
        for (k, &t) in times.iter().enumerate() {
            let st = free_propagate(s.clone(), t);
            assert!((direct[k].re - obs.cos2theta(&st)).abs() < 1e-12);
            assert!(direct[k].im.abs() < 1e-12);
            assert!((0.5 + 0.5 * phi[k].re - obs.cos2phi(&st)).abs() < 1e-12);
        }
    }

    #[test]
    fn fft_sampling_matches_direct_sum() {
        let l_max = 18;
        let s = kicked(l_max);
        let mut sp = FrequencySpectrum::zeros(l_max, 0.0);
        sp.accumulate(&s, &build_cos2theta_operator(l_max).matrix().clone(), 1.0);
        let n = 64;
        let start = 0.3;
        let fast = sp.sample_revival(start, n);
        let times: Vec<f64> = (0..n).map(|k| start + 2.0 * PI * k as f64 / n as f64).collect();
        let slow = sp.sample_at(&times);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn periodic_and_mean() {
        let l_max = 20;
        let s = kicked(l_max);
        let mut sp = FrequencySpectrum::zeros(l_max, 0.0);
        sp.accumulate(&s, build_cos2theta_operator(l_max).matrix(), 1.0);
        assert!((sp.value_at(1.1) - sp.value_at(1.1 + 2.0 * PI)).norm() < 1e-12);
        let samples = sp.sample_revival(0.0, 4096);
        let avg: Complex64 = samples.iter().sum::<Complex64>() / samples.len() as f64;
        assert!((avg - sp.mean()).norm() < 1e-12);
    }
}
