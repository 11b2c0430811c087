use std::f64::consts::PI;

use super::factorial::ln_factorial;
use super::{check_lm, AngularError};

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(self) -> f64 {
        self.sum + self.comp
    }
}

/// Wigner 3j symbol from the Racah closed-form sum, all factorials in log space.
///
/// Returns exactly `0.0` when the `m` values do not sum to zero or the
/// triangle rule fails.
pub fn wigner_3j(l1: i64, l2: i64, l3: i64, m1: i64, m2: i64, m3: i64) -> Result<f64, AngularError> {
    check_lm(l1, m1)?;
    check_lm(l2, m2)?;
    check_lm(l3, m3)?;
    if m1 + m2 + m3 != 0 {
        return Ok(0.0);
    }
    if l3 < (l1 - l2).abs() || l3 > l1 + l2 {
        return Ok(0.0);
    }
    // (l1 l2 l3; 0 0 0) vanishes for odd l1 + l2 + l3
    if m1 == 0 && m2 == 0 && (l1 + l2 + l3) % 2 == 1 {
        return Ok(0.0);
    }

    let ln_delta = ln_factorial(l1 + l2 - l3) + ln_factorial(l1 - l2 + l3) + ln_factorial(-l1 + l2 + l3)
        - ln_factorial(l1 + l2 + l3 + 1);
    let ln_pre = 0.5
        * (ln_delta
            + ln_factorial(l1 + m1)
            + ln_factorial(l1 - m1)
            + ln_factorial(l2 + m2)
            + ln_factorial(l2 - m2)
            + ln_factorial(l3 + m3)
            + ln_factorial(l3 - m3));

    let k_min = 0.max(l2 - l3 - m1).max(l1 - l3 + m2);
    let k_max = (l1 + l2 - l3).min(l1 - m1).min(l2 + m2);
    let mut acc = CompensatedSum::default();
    for k in k_min..=k_max {
        let ln_den = ln_factorial(k)
            + ln_factorial(l3 - l2 + k + m1)
            + ln_factorial(l3 - l1 + k - m2)
            + ln_factorial(l1 + l2 - l3 - k)
            + ln_factorial(l1 - k - m1)
            + ln_factorial(l2 - k + m2);
        let term = (ln_pre - ln_den).exp();
        acc.add(if k % 2 == 0 { term } else { -term });
    }
    let phase = (l1 - l2 - m3).rem_euclid(2);
    let value = acc.value();
    Ok(if phase == 0 { value } else { -value })
}

/// `∫ Y_{l1}^{m1} Y_{l2}^{m2} Y_{l3}^{m3} dΩ` with no conjugation on any factor.
pub fn triple_y_integral(l1: i64, m1: i64, l2: i64, m2: i64, l3: i64, m3: i64) -> Result<f64, AngularError> {
    let parity = wigner_3j(l1, l2, l3, 0, 0, 0)?;
    if parity == 0.0 {
        // still validate the m row
        wigner_3j(l1, l2, l3, m1, m2, m3)?;
        return Ok(0.0);
    }
    let w = wigner_3j(l1, l2, l3, m1, m2, m3)?;
    let norm = (((2 * l1 + 1) * (2 * l2 + 1) * (2 * l3 + 1)) as f64 / (4.0 * PI)).sqrt();
    Ok(norm * parity * w)
}

/// Bra-ket element `<Y_{lp}^{mp}| Y_k^q |Y_l^m>`, obtained from the
/// unconjugated triple integral via `conj(Y_l^m) = (-1)^m Y_l^{-m}`.
pub fn gaunt_bra_ket(lp: i64, mp: i64, k: i64, q: i64, l: i64, m: i64) -> Result<f64, AngularError> {
    let v = triple_y_integral(lp, -mp, k, q, l, m)?;
    Ok(if mp.rem_euclid(2) == 0 { v } else { -v })
}
