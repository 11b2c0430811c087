//! Runtime property suite: each check compares the engines against an
//! independent oracle and reports the worst deviation.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::angular::{
    assoc_legendre, basis_size, build_tilted_kick_operator, negate_m_legendre, wigner_3j, wong_overlap, BasisIndex,
};
use crate::fdtd::{FdtdEngine, GridConfig};
use crate::scenario::{DelayMode, DoublePulseProtocol, Runner};
use crate::spectral::{free_propagate, init_eigenstate, KickMethod, KickOperator, Wavepacket};
use crate::thermal::{EnsembleSpec, MoleculeSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    /// Worst observed deviation, or the observed ratio for order checks.
    pub value: f64,
    pub bound: String,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CheckOutcome {
    fn below(name: &str, value: f64, tol: f64) -> Self {
        Self { name: name.into(), value, bound: format!("<= {tol:e}"), pass: value <= tol, error: None }
    }

    fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: format!("in [{lo}, {hi}]"),
            pass: (lo..=hi).contains(&value),
            error: None,
        }
    }

    fn failed(name: &str, err: impl std::fmt::Display) -> Self {
        Self { name: name.into(), value: f64::NAN, bound: String::new(), pass: false, error: Some(err.to_string()) }
    }
}

type Check = fn() -> Result<CheckOutcome, String>;

/// Every check, cheapest first.
pub const CHECKS: &[(&str, Check)] = &[
    ("wigner_3j_table", wigner_table),
    ("wigner_3j_symmetries", wigner_symmetries),
    ("wong_vs_quadrature", wong_vs_quadrature),
    ("kick_vs_dense_exponential", kick_vs_dense),
    ("spectral_norm_per_revival", spectral_norm),
    ("spectral_full_revival_recurrence", spectral_recurrence),
    ("cos2phi_half_before_pulses", cos2phi_before_pulses),
    ("cos2phi_half_after_single_pulse", cos2phi_single_pulse),
    ("thermal_jx_jz_vanish", thermal_jx_jz),
    ("cn_order_in_time", cn_order_time),
    ("cn_order_in_space", cn_order_space),
    ("fdtd_norm_per_revival", fdtd_norm),
];

/// Runs every check whose name contains `filter`.
pub fn run_checks(filter: Option<&str>) -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .filter(|(name, _)| filter.is_none_or(|f| name.contains(f)))
        .map(|(name, check)| check().unwrap_or_else(|e| CheckOutcome::failed(name, e)))
        .collect()
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn wigner_table() -> Result<CheckOutcome, String> {
    let known = [
        ((1, 1, 0, 0, 0, 0), -1.0 / 3f64.sqrt()),
        ((1, 1, 2, 0, 0, 0), (2.0f64 / 15.0).sqrt()),
        ((2, 2, 2, 0, 0, 0), -(2.0f64 / 35.0).sqrt()),
        ((1, 1, 1, 1, -1, 0), 1.0 / 6f64.sqrt()),
        ((2, 1, 1, 2, -1, -1), 1.0 / 5f64.sqrt()),
        ((3, 2, 1, 0, 0, 0), -(3.0f64 / 35.0).sqrt()),
        ((2, 2, 1, 1, 0, -1), 1.0 / 10f64.sqrt()),
        ((2, 2, 1, 0, 0, 0), 0.0),
    ];
    let mut worst = 0.0f64;
    for ((l1, l2, l3, m1, m2, m3), want) in known {
        worst = worst.max((wigner_3j(l1, l2, l3, m1, m2, m3).map_err(err)? - want).abs());
    }
    for l in 0..16i64 {
        for m in -l..=l {
            let sign = if (l - m).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            worst = worst.max((wigner_3j(l, l, 0, m, -m, 0).map_err(err)? - sign / ((2 * l + 1) as f64).sqrt()).abs());
        }
    }
    Ok(CheckOutcome::below("wigner_3j_table", worst, 1e-14))
}

fn wigner_symmetries() -> Result<CheckOutcome, String> {
    let mut worst = 0.0f64;
    for l1 in 0..=6i64 {
        for l2 in 0..=6i64 {
            for l3 in (l1 - l2).abs()..=(l1 + l2) {
                for m1 in -l1..=l1 {
                    for m2 in -l2..=l2 {
                        let m3 = -m1 - m2;
                        if m3.abs() > l3 {
                            continue;
                        }
                        let w = |a: [i64; 6]| wigner_3j(a[0], a[1], a[2], a[3], a[4], a[5]).map_err(err);
                        let v = w([l1, l2, l3, m1, m2, m3])?;
                        let odd = if (l1 + l2 + l3) % 2 == 0 { 1.0 } else { -1.0 };
                        let cyclic = w([l2, l3, l1, m2, m3, m1])?;
                        let swapped = w([l2, l1, l3, m2, m1, m3])?;
                        let flipped = w([l1, l2, l3, -m1, -m2, -m3])?;
                        worst =
                            worst.max((cyclic - v).abs()).max((swapped - odd * v).abs()).max((flipped - odd * v).abs());
                    }
                }
            }
        }
    }
    Ok(CheckOutcome::below("wigner_3j_symmetries", worst, 1e-14))
}

/// Gauss–Legendre nodes and weights from the Jacobi matrix (Golub–Welsch).
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

fn legendre_signed(l: i64, m: i64, x: f64) -> Result<f64, String> {
    let v = assoc_legendre(l, m.abs(), x).map_err(err)?;
    if m < 0 {
        negate_m_legendre(l, -m, v).map_err(err)
    } else {
        Ok(v)
    }
}

fn wong_vs_quadrature() -> Result<CheckOutcome, String> {
    let (t, w) = golub_welsch(96);
    let half = PI / 2.0;
    let mut worst = 0.0f64;
    for l1 in 0..=20i64 {
        for l2 in 0..=20i64 {
            for m1 in -l1..=l1 {
                for m2 in [-l2, 0, l2, m1.clamp(-l2, l2), (m1 - 2).clamp(-l2, l2)] {
                    let v = wong_overlap(l1, m1, l2, m2).map_err(err)?;
                    let mut q = 0.0;
                    for (&t, &w) in t.iter().zip(&w) {
                        let theta = half * (t + 1.0);
                        let x = theta.cos();
                        q += half * w * theta.sin() * legendre_signed(l1, m1, x)? * legendre_signed(l2, m2, x)?;
                    }
                    let scale = (norm_scale(l1, m1) * norm_scale(l2, m2)).sqrt();
                    worst = worst.max((v - q).abs() / scale);
                }
            }
        }
    }
    Ok(CheckOutcome::below("wong_vs_quadrature", worst, 1e-9))
}

/// `∫ (P_l^m)² dx`, the natural scale of the overlap.
fn norm_scale(l: i64, m: i64) -> f64 {
    let ma = m.abs();
    let lf = |n: i64| (1..=n).map(|k| (k as f64).ln()).sum::<f64>();
    let mut ln = 2f64.ln() - ((2 * l + 1) as f64).ln() + lf(l + ma) - lf(l - ma);
    if m < 0 {
        ln += 2.0 * (lf(l - ma) - lf(l + ma));
    }
    ln.exp()
}

fn kick_vs_dense() -> Result<CheckOutcome, String> {
    let l_max = 24;
    let n = basis_size(l_max);
    let mut start = vec![Complex64::new(0.0, 0.0); n];
    for (l, m, c) in
        [(0, 0, Complex64::new(0.6, 0.0)), (3, -2, Complex64::new(0.0, 0.48)), (4, 1, Complex64::new(-0.64, 0.0))]
    {
        start[BasisIndex { l, m }.flat()] = c;
    }
    let state = Wavepacket::from_coefficients(l_max, start.clone(), 0.0).map_err(err)?;
    let mut worst = 0.0f64;
    for pol in [0.0, FRAC_PI_4, 1.1, -0.7] {
        let op = build_tilted_kick_operator(l_max, pol);
        let mut m = DMatrix::<f64>::zeros(n, n);
        for (r, c, v) in op.matrix().entries() {
            m[(r, c)] = v.re;
        }
        let eig = SymmetricEigen::new(m);
        let vecs = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
        let x = DVector::from_column_slice(&start);
        let kick = KickOperator::new(l_max, pol);
        for strength in [0.5, 3.0] {
            let phases =
                DVector::from_iterator(n, eig.eigenvalues.iter().map(|&e| Complex64::from_polar(1.0, strength * e)));
            let want = &vecs * (vecs.transpose() * &x).component_mul(&phases);
            for method in [KickMethod::Chebyshev, KickMethod::Rk4] {
                let mut s = state.clone();
                kick.apply(&mut s, strength, method).map_err(err)?;
                let d: f64 = s.coeffs().iter().zip(want.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
                worst = worst.max(d);
            }
        }
    }
    Ok(CheckOutcome::below("kick_vs_dense_exponential", worst, 1e-9))
}

fn kicked_packet() -> Result<Wavepacket, String> {
    let mut s = init_eigenstate(3, 1, 40).map_err(err)?;
    KickOperator::new(40, 0.0).apply(&mut s, 4.0, KickMethod::default()).map_err(err)?;
    s = free_propagate(s, 2.9);
    KickOperator::new(40, FRAC_PI_4).apply(&mut s, 4.0, KickMethod::default()).map_err(err)?;
    Ok(s)
}

fn spectral_norm() -> Result<CheckOutcome, String> {
    let s = kicked_packet()?;
    let later = free_propagate(s.clone(), TAU);
    let drift = (later.norm_sqr() - 1.0).abs().max((s.norm_sqr() - 1.0).abs());
    Ok(CheckOutcome::below("spectral_norm_per_revival", drift, 1e-10))
}

fn spectral_recurrence() -> Result<CheckOutcome, String> {
    let s = kicked_packet()?;
    let later = free_propagate(s.clone(), TAU);
    let d = s.coeffs().iter().zip(later.coeffs()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    Ok(CheckOutcome::below("spectral_full_revival_recurrence", d, 1e-12))
}

fn n2_runner(temperature_k: f64) -> Result<Runner, String> {
    let mol = MoleculeSpec::new("N2", 1.9896).with_spin_weights(2.0, 1.0);
    Runner::new(&EnsembleSpec::new(mol, temperature_k)).map_err(err)
}

fn cos2phi_before_pulses() -> Result<CheckOutcome, String> {
    let r = n2_runner(100.0)?;
    let proto = DoublePulseProtocol {
        points_per_revival: 256,
        ..DoublePulseProtocol::new(0.0, 0.0, FRAC_PI_4, DelayMode::AutoQuarter)
    };
    let res = r.run_protocol(&proto).map_err(err)?;
    let series = res.get(crate::series::ObservableName::Cos2phi).ok_or("missing cos2phi")?;
    let d = series.values.iter().map(|v| (v - 0.5).abs()).fold(0.0, f64::max);
    Ok(CheckOutcome::below("cos2phi_half_before_pulses", d, 1e-12))
}

fn cos2phi_single_pulse() -> Result<CheckOutcome, String> {
    let r = n2_runner(100.0)?;
    let proto = DoublePulseProtocol {
        points_per_revival: 256,
        ..DoublePulseProtocol::new(5.0, 0.0, FRAC_PI_4, DelayMode::AutoQuarter)
    };
    let res = r.run_protocol(&proto).map_err(err)?;
    let series = res.get(crate::series::ObservableName::Cos2phi).ok_or("missing cos2phi")?;
    let d = series.values.iter().map(|v| (v - 0.5).abs()).fold(0.0, f64::max);
    Ok(CheckOutcome::below("cos2phi_half_after_single_pulse", d, 1e-12))
}

fn thermal_jx_jz() -> Result<CheckOutcome, String> {
    let r = n2_runner(50.0)?.with_folding(false);
    let proto = DoublePulseProtocol {
        points_per_revival: 64,
        ..DoublePulseProtocol::new(3.0, 6.0, FRAC_PI_4, DelayMode::AutoPeak)
    };
    let res = r.run_protocol(&proto).map_err(err)?;
    let (jx, jz) = (res.jx.ok_or("missing jx")?, res.jz.ok_or("missing jz")?);
    Ok(CheckOutcome::below("thermal_jx_jz_vanish", jx.abs().max(jz.abs()), 1e-10))
}

fn phase_error(n_theta: usize, dt: f64, l: i64, m: i64, t: f64) -> Result<f64, String> {
    let e = FdtdEngine::new(GridConfig { n_theta, n_phi: 32, m_max: 8, delta_tau: dt }).map_err(err)?;
    let s0 = e.eigenstate(l, m).map_err(err)?;
    let mut s = s0.clone();
    e.propagate(&mut s, t).map_err(err)?;
    let q = &e.grid().fejer;
    let overlap: Complex64 = s0.channel(m).iter().zip(s.channel(m)).zip(q).map(|((a, b), w)| a.conj() * b * *w).sum();
    let d = overlap.arg() + ((l * (l + 1)) as f64) * t / 2.0;
    Ok((d + PI).rem_euclid(TAU) - PI)
}

fn cn_order_time() -> Result<CheckOutcome, String> {
    let p: Vec<f64> =
        [0.02, 0.01, 0.005].iter().map(|&dt| phase_error(256, dt, 6, 2, 0.4)).collect::<Result<_, _>>()?;
    Ok(CheckOutcome::within("cn_order_in_time", (p[0] - p[1]) / (p[1] - p[2]), 3.0, 5.0))
}

fn cn_order_space() -> Result<CheckOutcome, String> {
    let p: Vec<f64> = [32, 64, 128].iter().map(|&n| phase_error(n, 1e-3, 4, 1, 0.5)).collect::<Result<_, _>>()?;
    Ok(CheckOutcome::within("cn_order_in_space", (p[0] - p[1]) / (p[1] - p[2]), 3.0, 5.0))
}

fn fdtd_norm() -> Result<CheckOutcome, String> {
    let e = FdtdEngine::new(GridConfig::default()).map_err(err)?;
    let mut s = e.eigenstate(4, 1).map_err(err)?;
    e.kick(&mut s, 5.0, 0.0).map_err(err)?;
    let before = s.norm(e.grid());
    e.propagate(&mut s, TAU).map_err(err)?;
    let drift = (s.norm(e.grid()) - before).abs().max((before - 1.0).abs());
    Ok(CheckOutcome::below("fdtd_norm_per_revival", drift, 1e-6))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cheap_checks_pass() {
        for name in ["wigner", "kick_vs", "spectral", "cos2phi", "thermal", "cn_order"] {
            for c in run_checks(Some(name)) {
                assert!(c.pass, "{c:?}");
            }
        }
    }

    #[test]
    fn failures_are_reported_not_thrown() {
        let c = CheckOutcome::failed("x", "boom");
        assert!(!c.pass && c.value.is_nan() && c.error.as_deref() == Some("boom"));
        assert!(!CheckOutcome::within("r", 2.0, 3.0, 5.0).pass);
        assert!(CheckOutcome::below("b", 1e-12, 1e-10).pass);
    }

    #[test]
    fn names_are_unique() {
        let mut names: Vec<&str> = CHECKS.iter().map(|c| c.0).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), CHECKS.len());
    }
}
