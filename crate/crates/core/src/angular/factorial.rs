//! Log-space factorials and half-integer gamma values.

use std::f64::consts::PI;
use std::sync::OnceLock;

const TABLE_LEN: usize = 8192;

fn table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(TABLE_LEN);
        t.push(0.0);
        let mut acc = 0.0f64;
        for k in 1..TABLE_LEN {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln(n!)` for `0 <= n < 8192`.
pub(crate) fn ln_factorial(n: i64) -> f64 {
    debug_assert!(n >= 0, "negative factorial argument {n}");
    table()[n as usize]
}

/// `ln Γ(n/2)` for a positive integer `n`.
pub(crate) fn ln_gamma_half(n: i64) -> f64 {
    debug_assert!(n >= 1);
    if n % 2 == 0 {
        ln_factorial(n / 2 - 1)
    } else {
        // Γ(k + 1/2) = (2k)! sqrt(π) / (4^k k!)
        let k = (n - 1) / 2;
        ln_factorial(2 * k) + 0.5 * PI.ln() - (k as f64) * 4f64.ln() - ln_factorial(k)
    }
}
