//! Matrix elements of the angular operators over the truncated basis `l <= l_max`.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::factorial::ln_factorial;
use super::legendre::normalized_legendre_column;
use super::quadrature::gauss_legendre;
use super::sparse::{SparseHermitianOperator, SparseMatrix};
use super::wigner::gaunt_bra_ket;
use super::wong::{wong_overlap, WONG_QUADRATURE_THRESHOLD};
use super::{basis_size, BasisIndex};

/// Operator of a real function `constant + Σ_q c_q Y_2^q`, where the
/// harmonic coefficients `(q, c_q)` make the function real and so list `q`
/// and `-q` together.
fn quadrupole_operator(l_max: i64, terms: &[(i64, f64)], constant: f64) -> SparseHermitianOperator {
    let dim = basis_size(l_max);
    let mut triplets = Vec::new();
    for col in BasisIndex::all(l_max) {
        if constant != 0.0 {
            triplets.push((col.flat(), col.flat(), Complex64::new(constant, 0.0)));
        }
        for &(q, c) in terms {
            let mp = col.m + q;
            for lp in [col.l - 2, col.l, col.l + 2] {
                if lp < mp.abs() || lp > l_max {
                    continue;
                }
                let row = BasisIndex { l: lp, m: mp };
                // lower triangle mirrors the upper one exactly
                if row.flat() > col.flat() {
                    continue;
                }
                let g = gaunt_bra_ket(lp, mp, 2, q, col.l, col.m).expect("valid labels");
                if g != 0.0 {
                    let v = Complex64::new(c * g, 0.0);
                    triplets.push((row.flat(), col.flat(), v));
                    if row.flat() != col.flat() {
                        triplets.push((col.flat(), row.flat(), v.conj()));
                    }
                }
            }
        }
    }
    SparseHermitianOperator::new(SparseMatrix::from_triplets(dim, triplets))
}

/// `cos²θ = (4/3) sqrt(π/5) Y_2^0 + 1/3`; couples only `Δm = 0`, `Δl ∈ {0, ±2}`.
pub fn build_cos2theta_operator(l_max: i64) -> SparseHermitianOperator {
    quadrupole_operator(l_max, &[(0, 4.0 / 3.0 * (PI / 5.0).sqrt())], 1.0 / 3.0)
}

/// The three angular functions whose combination gives `cos²β` for a
/// polarization vector tilted by `θ_p` from z inside the xz-plane:
///
/// `cos²β = sin²θ_p · sin²θ cos²φ + cos²θ_p · cos²θ + sin(2θ_p) · sinθ cosθ cosφ`
#[derive(Debug, Clone)]
pub struct KickComponents {
    pub l_max: i64,
    /// `sin²θ cos²φ = sqrt(2π/15)(Y_2^2 + Y_2^{-2}) - (2/3) sqrt(π/5) Y_2^0 + 1/3`
    pub sin2theta_cos2phi: SparseHermitianOperator,
    /// `cos²θ`
    pub cos2theta: SparseHermitianOperator,
    /// `sinθ cosθ cosφ = sqrt(2π/15)(Y_2^{-1} - Y_2^1)`
    pub cross: SparseHermitianOperator,
}

impl KickComponents {
    pub fn new(l_max: i64) -> Self {
        let c22 = (2.0 * PI / 15.0).sqrt();
        let c20 = (PI / 5.0).sqrt();
        Self {
            l_max,
            sin2theta_cos2phi: quadrupole_operator(l_max, &[(2, c22), (-2, c22), (0, -2.0 / 3.0 * c20)], 1.0 / 3.0),
            cos2theta: build_cos2theta_operator(l_max),
            cross: quadrupole_operator(l_max, &[(-1, c22), (1, -c22)], 0.0),
        }
    }

    /// `sin²θ sin²φ`, the remaining piece of the identity `x² + y² + z² = 1`.
    pub fn sin2theta_sin2phi(&self) -> SparseHermitianOperator {
        let c22 = (2.0 * PI / 15.0).sqrt();
        let c20 = (PI / 5.0).sqrt();
        quadrupole_operator(self.l_max, &[(2, -c22), (-2, -c22), (0, -2.0 / 3.0 * c20)], 1.0 / 3.0)
    }

    pub fn combine(&self, pol_angle: f64) -> SparseHermitianOperator {
        let (s, c) = pol_angle.sin_cos();
        SparseHermitianOperator::linear_combination(&[
            (s * s, &self.sin2theta_cos2phi),
            (c * c, &self.cos2theta),
            ((2.0 * pol_angle).sin(), &self.cross),
        ])
    }
}

/// `cos²β` for a polarization tilted by `pol_angle` (radians) from z toward +x.
pub fn build_tilted_kick_operator(l_max: i64, pol_angle: f64) -> SparseHermitianOperator {
    KickComponents::new(l_max).combine(pol_angle)
}

fn ladder(l: i64, m: i64, up: bool) -> f64 {
    let lf = l as f64;
    let mf = m as f64;
    let v = if up { lf * (lf + 1.0) - mf * (mf + 1.0) } else { lf * (lf + 1.0) - mf * (mf - 1.0) };
    v.max(0.0).sqrt()
}

fn angular_momentum(l_max: i64, raise: Complex64, lower: Complex64) -> SparseHermitianOperator {
    let mut triplets = Vec::new();
    for col in BasisIndex::all(l_max) {
        if col.m < col.l {
            let row = BasisIndex { l: col.l, m: col.m + 1 };
            triplets.push((row.flat(), col.flat(), raise * ladder(col.l, col.m, true)));
        }
        if col.m > -col.l {
            let row = BasisIndex { l: col.l, m: col.m - 1 };
            triplets.push((row.flat(), col.flat(), lower * ladder(col.l, col.m, false)));
        }
    }
    SparseHermitianOperator::new(SparseMatrix::from_triplets(basis_size(l_max), triplets))
}

/// `J_x = (J_+ + J_-)/2` in units of ħ.
pub fn build_jx_operator(l_max: i64) -> SparseHermitianOperator {
    angular_momentum(l_max, Complex64::new(0.5, 0.0), Complex64::new(0.5, 0.0))
}

/// `J_y = (J_+ - J_-)/(2i)` in units of ħ.
pub fn build_jy_operator(l_max: i64) -> SparseHermitianOperator {
    angular_momentum(l_max, Complex64::new(0.0, -0.5), Complex64::new(0.0, 0.5))
}

/// `J_z`, diagonal with eigenvalue `m`.
pub fn build_jz_operator(l_max: i64) -> SparseHermitianOperator {
    let triplets = BasisIndex::all(l_max)
        .filter(|b| b.m != 0)
        .map(|b| (b.flat(), b.flat(), Complex64::new(b.m as f64, 0.0)))
        .collect();
    SparseHermitianOperator::new(SparseMatrix::from_triplets(basis_size(l_max), triplets))
}

fn ln_norm(l: i64, m: i64) -> f64 {
    0.5 * (((2 * l + 1) as f64).ln() - (4.0 * PI).ln() + ln_factorial(l - m) - ln_factorial(l + m))
}

/// Elements `<Y_l^m| e^{+i2φ} |Y_l'^{m-2}>`, stored at row `(l, m)`, column `(l', m-2)`.
///
/// The φ-integral is `2π δ`, leaving `2π N_lm N_l'(m-2)` times the Legendre
/// overlap. Pairs with `l + l'` up to the Wong threshold use [`wong_overlap`];
/// larger pairs integrate the normalized functions by Gauss–Legendre
/// quadrature directly, which avoids overflow of the unnormalized product.
pub fn build_exp_i2phi_elements(l_max: i64) -> SparseMatrix {
    let dim = basis_size(l_max);
    let rule = gauss_legendre((l_max + 2) as usize);
    // polar[m][q][l - m]
    let polar: Vec<Vec<Vec<f64>>> =
        (0..=l_max).map(|m| rule.nodes.iter().map(|&x| normalized_legendre_column(m, l_max, x)).collect()).collect();
    let signed = |l: i64, m: i64, q: usize| -> f64 {
        let v = polar[m.unsigned_abs() as usize][q][(l - m.abs()) as usize];
        if m < 0 && m % 2 != 0 {
            -v
        } else {
            v
        }
    };

    let mut triplets = Vec::new();
    for m in (2 - l_max)..=l_max {
        let mp = m - 2;
        for l in m.abs()..=l_max {
            let mut lp = mp.abs();
            if (lp - l).rem_euclid(2) == 1 {
                lp += 1;
            }
            while lp <= l_max {
                let value = if l + lp <= WONG_QUADRATURE_THRESHOLD {
                    let overlap = wong_overlap(l, m, lp, mp).expect("valid labels");
                    2.0 * PI * (ln_norm(l, m) + ln_norm(lp, mp)).exp() * overlap
                } else {
                    let s: f64 = (0..rule.len()).map(|q| rule.weights[q] * signed(l, m, q) * signed(lp, mp, q)).sum();
                    2.0 * PI * s
                };
                let row = BasisIndex { l, m };
                let col = BasisIndex { l: lp, m: mp };
                triplets.push((row.flat(), col.flat(), Complex64::new(value, 0.0)));
                lp += 2;
            }
        }
    }
    SparseMatrix::from_triplets(dim, triplets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::ylm;

    /// Matrix element `<Y_a| f |Y_b>` by product quadrature.
    fn quad_element(a: BasisIndex, b: BasisIndex, f: impl Fn(f64, f64) -> f64) -> Complex64 {
        let rule = gauss_legendre(40);
        let nphi = 64;
        let mut acc = Complex64::new(0.0, 0.0);
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let t = x.acos();
            for j in 0..nphi {
                let p = 2.0 * PI * j as f64 / nphi as f64;
                let v = ylm(a.l, a.m, t, p).unwrap().conj() * f(t, p) * ylm(b.l, b.m, t, p).unwrap();
                acc += v * w * (2.0 * PI / nphi as f64);
            }
        }
        acc
    }

    fn bi(l: i64, m: i64) -> BasisIndex {
        BasisIndex { l, m }
    }

    #[test]
    fn cos2theta_elements() {
        let op = build_cos2theta_operator(6);
        assert!((op.element(bi(0, 0), bi(0, 0)).re - 1.0 / 3.0).abs() < 1e-15);
        assert!((op.element(bi(1, 0), bi(1, 0)).re - 0.6).abs() < 1e-15);
        let q = quad_element(bi(2, 1), bi(4, 1), |t, _| t.cos().powi(2));
        assert!((op.element(bi(2, 1), bi(4, 1)) - q).norm() < 1e-12);
    }

    #[test]
    fn selection_rules_by_full_scan() {
        let l_max = 7;
        let cos2 = build_cos2theta_operator(l_max);
        for (r, c, _) in cos2.matrix().entries() {
            let (a, b) = (BasisIndex::from_flat(r), BasisIndex::from_flat(c));
            assert_eq!(a.m, b.m);
            assert!([0, 2].contains(&(a.l - b.l).abs()));
        }
        let tilted = build_tilted_kick_operator(l_max, 0.3);
        for (r, c, _) in tilted.matrix().entries() {
            let (a, b) = (BasisIndex::from_flat(r), BasisIndex::from_flat(c));
            assert!((a.m - b.m).abs() <= 2);
            assert!([0, 2].contains(&(a.l - b.l).abs()));
        }
        let jy = build_jy_operator(l_max);
        for (r, c, _) in jy.matrix().entries() {
            let (a, b) = (BasisIndex::from_flat(r), BasisIndex::from_flat(c));
            assert_eq!(a.l, b.l);
            assert_eq!((a.m - b.m).abs(), 1);
        }
    }

    #[test]
    fn tilted_operator_limits_and_quadrature() {
        let l_max = 5;
        let zero = build_tilted_kick_operator(l_max, 0.0);
        let cos2 = build_cos2theta_operator(l_max);
        for b in BasisIndex::all(l_max) {
            for a in BasisIndex::all(l_max) {
                assert!((zero.element(a, b) - cos2.element(a, b)).norm() < 1e-15);
            }
        }
        let half_pi = build_tilted_kick_operator(l_max, PI / 2.0);
        let quarter = build_tilted_kick_operator(l_max, PI / 4.0);
        let tp = PI / 4.0;
        for b in BasisIndex::all(l_max) {
            for a in BasisIndex::all(l_max) {
                let q = quad_element(a, b, |t, p| {
                    let cb = p.cos() * t.sin() * tp.sin() + t.cos() * tp.cos();
                    cb * cb
                });
                assert!((quarter.element(a, b) - q).norm() < 1e-12, "{a:?} {b:?}");
                let q2 = quad_element(a, b, |t, p| (t.sin() * p.cos()).powi(2));
                assert!((half_pi.element(a, b) - q2).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn decomposition_sums_to_identity() {
        let k = KickComponents::new(8);
        let sum = SparseHermitianOperator::linear_combination(&[
            (1.0, &k.cos2theta),
            (1.0, &k.sin2theta_cos2phi),
            (1.0, &k.sin2theta_sin2phi()),
        ]);
        for (r, c, v) in sum.matrix().entries() {
            let want = if r == c { 1.0 } else { 0.0 };
            assert!((v - want).norm() < 1e-12);
        }
        assert_eq!(sum.matrix().entries().filter(|e| e.0 == e.1).count(), basis_size(8));
    }

    #[test]
    fn built_operators_are_hermitian() {
        let l_max = 10;
        for op in [
            build_cos2theta_operator(l_max),
            build_tilted_kick_operator(l_max, 0.7),
            build_jx_operator(l_max),
            build_jy_operator(l_max),
            build_jz_operator(l_max),
        ] {
            assert!(op.matrix().hermiticity_defect() <= 1e-14);
        }
    }

    #[test]
    fn jy_block_spectrum() {
        use nalgebra::{DMatrix, SymmetricEigen};
        let jy = build_jy_operator(1);
        let mut m = DMatrix::<Complex64>::zeros(3, 3);
        for (r, c, v) in jy.matrix().entries() {
            assert!(r >= 1 && c >= 1);
            m[(r - 1, c - 1)] = v;
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for (got, want) in ev.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        for d in 0..basis_size(1) {
            assert_eq!(jy.matrix().get(d, d), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn exp_i2phi_against_quadrature() {
        let l_max = 6;
        let e = build_exp_i2phi_elements(l_max);
        let q = quad_element(bi(2, 2), bi(2, 0), |_, _| 1.0);
        assert!(q.norm() < 1e-14);
        for a in BasisIndex::all(l_max) {
            for b in BasisIndex::all(l_max) {
                let got = e.element(a, b);
                if b.m != a.m - 2 {
                    assert_eq!(got, Complex64::new(0.0, 0.0));
                    continue;
                }
                let rule = gauss_legendre(40);
                let nphi = 64;
                let mut want = Complex64::new(0.0, 0.0);
                for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                    let t = x.acos();
                    for j in 0..nphi {
                        let p = 2.0 * PI * j as f64 / nphi as f64;
                        want += ylm(a.l, a.m, t, p).unwrap().conj()
                            * Complex64::from_polar(1.0, 2.0 * p)
                            * ylm(b.l, b.m, t, p).unwrap()
                            * w
                            * (2.0 * PI / nphi as f64);
                    }
                }
                assert!((got - want).norm() < 1e-10, "{a:?} {b:?}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn exp_i2phi_wong_and_quadrature_paths_agree() {
        // Same table computed across the switch-over: compare a pair below the
        // threshold against direct quadrature of normalized functions.
        let l_max = 40;
        let e = build_exp_i2phi_elements(l_max);
        let rule = gauss_legendre(50);
        for &(l, m, lp) in &[(30, 3, 28), (25, 0, 21), (29, 1, 31), (20, 20, 22)] {
            let mp = m - 2;
            let pa = |l: i64, m: i64, x: f64| {
                let v = normalized_legendre_column(m.abs(), l, x)[(l - m.abs()) as usize];
                if m < 0 && m % 2 != 0 {
                    -v
                } else {
                    v
                }
            };
            let want = 2.0 * PI * rule.integrate(|x| pa(l, m, x) * pa(lp, mp, x));
            let got = e.element(bi(l, m), bi(lp, mp)).re;
            assert!((got - want).abs() < 1e-11, "({l},{m},{lp}): {got} vs {want}");
        }
    }
}
