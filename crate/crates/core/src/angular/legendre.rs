use std::f64::consts::PI;

use num_complex::Complex64;

use super::factorial::ln_factorial;
use super::{check_lm, AngularError};

/// Associated Legendre function `P_l^m(x)` for `0 <= m <= l`, Condon–Shortley phase.
///
/// Starts from the closed form of `P_m^m` and recurs upward in `l`.
pub fn assoc_legendre(l: i64, m: i64, x: f64) -> Result<f64, AngularError> {
    if m < 0 {
        return Err(AngularError::InvalidQuantumNumbers(format!("assoc_legendre expects m >= 0, got {m}")));
    }
    check_lm(l, m)?;
    if !(-1.0..=1.0).contains(&x) {
        return Err(AngularError::ArgumentOutOfRange(x));
    }
    let sin = ((1.0 - x) * (1.0 + x)).sqrt();
    let mut pmm = 1.0;
    let mut odd = 1.0;
    for _ in 0..m {
        pmm *= -odd * sin;
        odd += 2.0;
    }
    if l == m {
        return Ok(pmm);
    }
    let mut prev = pmm;
    let mut cur = x * (2 * m + 1) as f64 * pmm;
    for ll in (m + 2)..=l {
        let next = (x * (2 * ll - 1) as f64 * cur - (ll + m - 1) as f64 * prev) / (ll - m) as f64;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Maps `P_l^m` to `P_l^{-m} = (-1)^m (l-m)!/(l+m)! P_l^m`, with the factorial
/// ratio evaluated in log space.
pub fn negate_m_legendre(l: i64, m: i64, value: f64) -> Result<f64, AngularError> {
    if m < 0 {
        return Err(AngularError::InvalidQuantumNumbers(format!("negate_m_legendre expects m >= 0, got {m}")));
    }
    check_lm(l, m)?;
    let ratio = (ln_factorial(l - m) - ln_factorial(l + m)).exp();
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * ratio * value)
}

/// `N_lm P_l^m(x)` for `l = m..=l_max`, i.e. the polar part of `Y_l^m`.
///
/// Uses the fully normalized recurrence, which stays finite for large `l`
/// where the unnormalized functions overflow. Returns an empty vector when
/// `m > l_max`.
pub fn normalized_legendre_column(m: i64, l_max: i64, x: f64) -> Vec<f64> {
    debug_assert!(m >= 0);
    if m > l_max {
        return Vec::new();
    }
    let sin = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();
    let mut pmm = 1.0 / (4.0 * PI).sqrt();
    for k in 1..=m {
        let kf = k as f64;
        pmm *= -((2.0 * kf + 1.0) / (2.0 * kf)).sqrt() * sin;
    }
    let mut out = Vec::with_capacity((l_max - m + 1) as usize);
    out.push(pmm);
    if l_max == m {
        return out;
    }
    let mf = m as f64;
    let mut prev = pmm;
    let mut cur = x * (2.0 * mf + 3.0).sqrt() * pmm;
    out.push(cur);
    for l in (m + 2)..=l_max {
        let lf = l as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
        let next = a * (x * cur - b * prev);
        prev = cur;
        cur = next;
        out.push(cur);
    }
    out
}

/// `Y_l^m(θ, φ)` in the Condon–Shortley convention.
pub fn ylm(l: i64, m: i64, theta: f64, phi: f64) -> Result<Complex64, AngularError> {
    check_lm(l, m)?;
    let ma = m.abs();
    let polar = normalized_legendre_column(ma, l, theta.cos())[(l - ma) as usize];
    let y = Complex64::from_polar(polar, ma as f64 * phi);
    if m >= 0 {
        Ok(y)
    } else if ma % 2 == 0 {
        Ok(y.conj())
    } else {
        Ok(-y.conj())
    }
}
