use std::f64::consts::LN_2;

use super::factorial::{ln_factorial, ln_gamma_half};
use super::legendre::{assoc_legendre, negate_m_legendre};
use super::quadrature::gauss_legendre;
use super::wigner::CompensatedSum;
use super::{check_lm, AngularError};

/// Above this value of `l1 + l2` the alternating double sum loses too many
/// digits and the overlap is integrated by Gauss–Legendre quadrature instead.
pub const WONG_QUADRATURE_THRESHOLD: i64 = 40;

/// `∫_0^π P_{l1}^{m1}(cos θ) P_{l2}^{m2}(cos θ) sin θ dθ` (Condon–Shortley phase).
///
/// For non-negative orders this is Wong's closed double sum over the expansion
/// `P_l^m(x) = (-1)^m Σ_p a^p_{lm} x^{l-m-2p} (1-x^2)^{m/2+p}`; negative orders
/// are mapped through [`negate_m_legendre`].
pub fn wong_overlap(l1: i64, m1: i64, l2: i64, m2: i64) -> Result<f64, AngularError> {
    check_lm(l1, m1)?;
    check_lm(l2, m2)?;
    let mut value = overlap_nonnegative(l1, m1.abs(), l2, m2.abs());
    if m1 < 0 {
        value = negate_m_legendre(l1, -m1, value)?;
    }
    if m2 < 0 {
        value = negate_m_legendre(l2, -m2, value)?;
    }
    Ok(value)
}

fn overlap_nonnegative(l1: i64, m1: i64, l2: i64, m2: i64) -> f64 {
    // integrand has odd parity in cos θ
    if (l1 + l2 - m1 - m2).rem_euclid(2) == 1 {
        return 0.0;
    }
    if l1 + l2 > WONG_QUADRATURE_THRESHOLD {
        return overlap_by_quadrature(l1, m1, l2, m2);
    }
    let ln_a = |l: i64, m: i64, p: i64| {
        ln_factorial(l + m)
            - (m + 2 * p) as f64 * LN_2
            - ln_factorial(m + p)
            - ln_factorial(p)
            - ln_factorial(l - m - 2 * p)
    };
    let ln_den = ln_gamma_half(l1 + l2 + 3);
    let mut acc = CompensatedSum::default();
    for p1 in 0..=(l1 - m1) / 2 {
        let a1 = ln_a(l1, m1, p1);
        for p2 in 0..=(l2 - m2) / 2 {
            let ln_term = a1
                + ln_a(l2, m2, p2)
                + ln_gamma_half(l1 + l2 - m1 - m2 - 2 * p1 - 2 * p2 + 1)
                + ln_gamma_half(m1 + m2 + 2 * p1 + 2 * p2 + 2)
                - ln_den;
            let term = ln_term.exp();
            acc.add(if (p1 + p2) % 2 == 0 { term } else { -term });
        }
    }
    let value = acc.value();
    if (m1 + m2) % 2 == 0 {
        value
    } else {
        -value
    }
}

fn overlap_by_quadrature(l1: i64, m1: i64, l2: i64, m2: i64) -> f64 {
    // the integrand is a polynomial of degree l1 + l2 in cos θ
    let rule = gauss_legendre(((l1 + l2) / 2 + 2) as usize);
    rule.integrate(|x| assoc_legendre(l1, m1, x).expect("validated") * assoc_legendre(l2, m2, x).expect("validated"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};

    /// Golub–Welsch nodes from the Jacobi matrix: an independent route to the
    /// Gauss–Legendre rule.
    fn golub_welsch(n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut j = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let kf = k as f64;
            let b = kf / (4.0 * kf * kf - 1.0).sqrt();
            j[(k, k - 1)] = b;
            j[(k - 1, k)] = b;
        }
        let eig = SymmetricEigen::new(j);
        let nodes = eig.eigenvalues.iter().copied().collect();
        let weights = (0..n).map(|k| 2.0 * eig.eigenvectors[(0, k)].powi(2)).collect();
        (nodes, weights)
    }

    /// Integrates over θ rather than cos θ: with odd `m1 + m2` the integrand
    /// carries a factor `sin θ` and is not a polynomial in `cos θ`.
    fn oracle(rule: &(Vec<f64>, Vec<f64>), l1: i64, m1: i64, l2: i64, m2: i64) -> f64 {
        let (t, w) = rule;
        let eval = |l: i64, m: i64, x: f64| {
            let v = assoc_legendre(l, m.abs(), x).unwrap();
            if m < 0 {
                negate_m_legendre(l, -m, v).unwrap()
            } else {
                v
            }
        };
        let half = std::f64::consts::FRAC_PI_2;
        t.iter()
            .zip(w)
            .map(|(&t, &w)| {
                let theta = half * (t + 1.0);
                let x = theta.cos();
                half * w * theta.sin() * eval(l1, m1, x) * eval(l2, m2, x)
            })
            .sum()
    }

    fn norm_scale(l: i64, m: i64) -> f64 {
        let ma = m.abs();
        let mut ln = 2f64.ln() - ((2 * l + 1) as f64).ln() + ln_factorial(l + ma) - ln_factorial(l - ma);
        if m < 0 {
            ln += 2.0 * (ln_factorial(l - ma) - ln_factorial(l + ma));
        }
        ln.exp()
    }

    #[test]
    fn known_values() {
        assert!((wong_overlap(0, 0, 0, 0).unwrap() - 2.0).abs() < 1e-15);
        assert!((wong_overlap(1, 1, 1, 1).unwrap() - 4.0 / 3.0).abs() < 1e-14);
        let v = wong_overlap(5, 3, 7, 1).unwrap();
        let q = oracle(&golub_welsch(256), 5, 3, 7, 1);
        assert!((v - q).abs() < 1e-10 * q.abs().max(1.0), "{v} vs {q}");
    }

    #[test]
    fn against_quadrature_up_to_l20() {
        let rule = golub_welsch(96);
        let (mut worst, mut at) = (0.0f64, (0, 0, 0, 0));
        for l1 in 0..=20i64 {
            for l2 in 0..=20i64 {
                for m1 in -l1..=l1 {
                    for m2 in [-l2, -1.min(l2), 0, 1.min(l2), l2, m1.clamp(-l2, l2), (m1 - 2).clamp(-l2, l2)] {
                        let v = wong_overlap(l1, m1, l2, m2).unwrap();
                        let q = oracle(&rule, l1, m1, l2, m2);
                        let scale = (norm_scale(l1, m1) * norm_scale(l2, m2)).sqrt();
                        let err = (v - q).abs() / scale;
                        if err > worst {
                            worst = err;
                            at = (l1, m1, l2, m2);
                        }
                    }
                }
            }
        }
        assert!(worst < 1e-9, "worst relative error {worst:e} at {at:?}");
    }

    #[test]
    fn orthogonality_for_equal_orders() {
        for m in 0..=10i64 {
            for l1 in m..=20 {
                for l2 in m..=20 {
                    let v = wong_overlap(l1, m, l2, m).unwrap();
                    let scale = (norm_scale(l1, m) * norm_scale(l2, m)).sqrt();
                    if l1 == l2 {
                        assert!((v / scale - 1.0).abs() < 1e-9);
                    } else {
                        assert!(v.abs() / scale < 1e-9, "l1={l1} l2={l2} m={m}: {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn fallback_region_agrees_with_oracle() {
        let rule = golub_welsch(160);
        for &(l1, m1, l2, m2) in &[(40, 5, 30, 3), (25, -2, 19, 0), (45, 10, 45, 10)] {
            let v = wong_overlap(l1, m1, l2, m2).unwrap();
            let q = oracle(&rule, l1, m1, l2, m2);
            let scale = (norm_scale(l1, m1) * norm_scale(l2, m2)).sqrt();
            assert!((v - q).abs() / scale < 1e-9);
        }
    }
}
