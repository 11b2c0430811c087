use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{PulseSpec, SpectralError, Wavepacket};
use crate::angular::{BasisIndex, KickComponents, SparseHermitianOperator, SparseMatrix};

/// Largest population allowed in the two outermost shells after a kick.
pub const TRUNCATION_LIMIT: f64 = 1e-8;
/// Largest change of the norm allowed across one kick.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// How `exp(iP K)` is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KickMethod {
    /// Fixed-step fourth-order Runge–Kutta on `dC/ds = iP K C`, `s ∈ [0, 1]`.
    Rk4,
    /// Chebyshev expansion of the exponential with Bessel coefficients.
    #[default]
    Chebyshev,
}

/// An invariant subspace of the kick operator and its restricted matrix.
#[derive(Debug, Clone)]
struct Sector {
    indices: Vec<usize>,
    op: SparseMatrix,
}

/// `cos²β` for one polarization, split into invariant subspaces.
///
/// Every kick keeps the parity of `l`; a kick polarized along z also keeps `m`.
/// States are propagated sector by sector, skipping sectors they do not touch.
#[derive(Debug, Clone)]
pub struct KickOperator {
    l_max: i64,
    pol_angle: f64,
    full: SparseHermitianOperator,
    sectors: Vec<Sector>,
}

impl KickOperator {
    pub fn new(l_max: i64, pol_angle: f64) -> Self {
        Self::from_components(&KickComponents::new(l_max), pol_angle)
    }

    pub fn from_components(components: &KickComponents, pol_angle: f64) -> Self {
        let full = components.combine(pol_angle);
        let l_max = components.l_max;
        let keeps_m = full.matrix().entries().all(|(r, c, _)| BasisIndex::from_flat(r).m == BasisIndex::from_flat(c).m);
        let mut groups: std::collections::BTreeMap<(i64, i64), Vec<usize>> = Default::default();
        for b in BasisIndex::all(l_max) {
            let key = (b.l % 2, if keeps_m { b.m } else { 0 });
            groups.entry(key).or_default().push(b.flat());
        }
        let sectors =
            groups.into_values().map(|indices| Sector { op: full.matrix().restrict(&indices), indices }).collect();
        Self { l_max, pol_angle, full, sectors }
    }

    pub fn l_max(&self) -> i64 {
        self.l_max
    }

    pub fn pol_angle(&self) -> f64 {
        self.pol_angle
    }

    pub fn operator(&self) -> &SparseHermitianOperator {
        &self.full
    }

    /// Replaces `state` by `exp(iP cos²β) state`.
    pub fn apply(&self, state: &mut Wavepacket, strength: f64, method: KickMethod) -> Result<(), SpectralError> {
        if state.l_max() != self.l_max {
            return Err(SpectralError::InvalidState(format!(
                "state has l_max = {}, kick operator {}",
                state.l_max(),
                self.l_max
            )));
        }
        if !(strength >= 0.0) || !strength.is_finite() {
            return Err(SpectralError::InvalidPulse(format!("strength {strength}")));
        }
        if strength == 0.0 {
            return Ok(());
        }
        let before = state.norm_sqr();
        let coeffs = state.coeffs_mut();
        for sector in &self.sectors {
            let zero = Complex64::new(0.0, 0.0);
            if sector.indices.iter().all(|&i| coeffs[i] == zero) {
                continue;
            }
            let x: Vec<Complex64> = sector.indices.iter().map(|&i| coeffs[i]).collect();
            let y = match method {
                KickMethod::Rk4 => rk4_exponential(&sector.op, strength, &x),
                KickMethod::Chebyshev => chebyshev_exponential(&sector.op, strength, &x),
            };
            for (&i, v) in sector.indices.iter().zip(y) {
                coeffs[i] = v;
            }
        }
        let drift = (state.norm_sqr() - before).abs();
        if drift > NORM_TOLERANCE {
            return Err(SpectralError::NormDrift { drift });
        }
        let population = state.top_shell_population();
        if population > TRUNCATION_LIMIT {
            return Err(SpectralError::Truncation { population, l_max: self.l_max, limit: TRUNCATION_LIMIT });
        }
        Ok(())
    }
}

/// `exp(iP cos²β) state` with a freshly built operator and the default method.
///
/// The pulse time is not used: the caller propagates the state to it first.
pub fn apply_kick(mut state: Wavepacket, pulse: &PulseSpec) -> Result<Wavepacket, SpectralError> {
    pulse.validate()?;
    KickOperator::new(state.l_max(), pulse.pol_angle).apply(&mut state, pulse.strength, KickMethod::default())?;
    Ok(state)
}

/// RK4 step count for a target global error `eps`: the stability polynomial
/// error of one step is `z^5/120` with `z = hP/2`, the largest phase rate of
/// the centred generator.
pub(crate) fn rk4_steps(strength: f64) -> usize {
    let eps: f64 = 1e-11;
    let accuracy = (strength / 2.0).powf(1.25) / (120.0 * eps).powf(0.25);
    64usize.max((8.0 * strength).ceil() as usize).max(accuracy.ceil() as usize)
}

/// Integrates `dC/ds = iP (K - 1/2) C` over `s ∈ [0, 1]` and restores the
/// global phase `e^{iP/2}` afterwards. Centring halves the spectral radius.
fn rk4_exponential(op: &SparseMatrix, strength: f64, x: &[Complex64]) -> Vec<Complex64> {
    let n = rk4_steps(strength);
    let h = 1.0 / n as f64;
    let dim = x.len();
    let gen = Complex64::new(0.0, strength);
    let rhs = |v: &[Complex64], out: &mut [Complex64]| {
        op.matvec_into(v, out);
        for (o, &vi) in out.iter_mut().zip(v) {
            *o = gen * (*o - 0.5 * vi);
        }
    };
    let mut c = x.to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        vec![Complex64::default(); dim],
        vec![Complex64::default(); dim],
        vec![Complex64::default(); dim],
        vec![Complex64::default(); dim],
        vec![Complex64::default(); dim],
    );
    for _ in 0..n {
        rhs(&c, &mut k1);
        for i in 0..dim {
            tmp[i] = c[i] + 0.5 * h * k1[i];
        }
        rhs(&tmp, &mut k2);
        for i in 0..dim {
            tmp[i] = c[i] + 0.5 * h * k2[i];
        }
        rhs(&tmp, &mut k3);
        for i in 0..dim {
            tmp[i] = c[i] + h * k3[i];
        }
        rhs(&tmp, &mut k4);
        for i in 0..dim {
            c[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    let phase = Complex64::from_polar(1.0, strength / 2.0);
    c.iter_mut().for_each(|v| *v *= phase);
    c
}

/// `J_0(x), J_1(x), ...` up to the order where the terms drop below `1e-18`,
/// by Miller's backward recurrence normalized with `J_0 + 2 Σ J_2k = 1`.
pub fn bessel_j_sequence(x: f64) -> Vec<f64> {
    if x == 0.0 {
        return vec![1.0];
    }
    let order = (x.abs() + 12.0 * x.abs().cbrt() + 30.0).ceil() as usize;
    let start = order + 20 + (order % 2);
    let mut j = vec![0.0f64; start + 2];
    j[start] = 1e-300;
    for k in (1..=start).rev() {
        j[k - 1] = 2.0 * k as f64 / x * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            let s = 1e-250;
            for v in &mut j[k - 1..=start] {
                *v *= s;
            }
        }
    }
    let norm = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
    let mut out: Vec<f64> = j[..=order].iter().map(|v| v / norm).collect();
    while out.len() > 1 && out.last().map_or(false, |v| v.abs() < 1e-18) {
        out.pop();
    }
    out
}

/// `exp(iPK) x = e^{iP/2} Σ_k (2 - δ_k0) i^k J_k(P/2) T_k(2K - 1) x`, valid
/// because the spectrum of `K` lies in `[0, 1]`.
fn chebyshev_exponential(op: &SparseMatrix, strength: f64, x: &[Complex64]) -> Vec<Complex64> {
    let a = strength / 2.0;
    let bessel = bessel_j_sequence(a);
    let dim = x.len();
    let apply_x = |v: &[Complex64], out: &mut [Complex64]| {
        op.matvec_into(v, out);
        for (o, &vi) in out.iter_mut().zip(v) {
            *o = 2.0 * *o - vi;
        }
    };
    let mut acc: Vec<Complex64> = x.iter().map(|&v| v * bessel[0]).collect();
    let mut prev = x.to_vec();
    let mut cur = vec![Complex64::default(); dim];
    apply_x(x, &mut cur);
    let mut next = vec![Complex64::default(); dim];
    let mut ik = Complex64::new(0.0, 1.0);
    for (k, &jk) in bessel.iter().enumerate().skip(1) {
        let coeff = ik * (2.0 * jk);
        for i in 0..dim {
            acc[i] += coeff * cur[i];
        }
        if k + 1 < bessel.len() {
            apply_x(&cur, &mut next);
            for i in 0..dim {
                next[i] = 2.0 * next[i] - prev[i];
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
        ik *= Complex64::new(0.0, 1.0);
    }
    let phase = Complex64::from_polar(1.0, a);
    acc.iter_mut().for_each(|v| *v *= phase);
    acc
}
