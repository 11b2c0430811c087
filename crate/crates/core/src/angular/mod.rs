//! Angular-momentum algebra shared by both propagation engines.
//!
//! Phase convention: associated Legendre functions carry the Condon–Shortley
//! factor `(-1)^m`, so `P_1^1(x) = -sqrt(1 - x^2)` and
//! `Y_l^m(θ, φ) = N_lm P_l^m(cos θ) e^{imφ}` with
//! `N_lm = sqrt((2l+1)/(4π) (l-m)!/(l+m)!)`. Negative orders follow
//! `Y_l^{-m} = (-1)^m conj(Y_l^m)`.
//!
//! Matrix elements `<Y_l'^m'| f |Y_l^m>` always conjugate the bra harmonic.

mod basis;
mod legendre;
mod operators;
mod quadrature;
mod sparse;
mod wigner;
mod wong;

pub use basis::{basis_size, BasisIndex};
pub use legendre::{assoc_legendre, negate_m_legendre, normalized_legendre_column, ylm};
pub use operators::{
    build_cos2theta_operator, build_exp_i2phi_elements, build_jx_operator, build_jy_operator, build_jz_operator,
    build_tilted_kick_operator, KickComponents,
};
pub use quadrature::{gauss_legendre, GaussLegendre};
pub use sparse::{SparseHermitianOperator, SparseMatrix};
pub use wigner::{gaunt_bra_ket, triple_y_integral, wigner_3j};
pub use wong::{wong_overlap, WONG_QUADRATURE_THRESHOLD};

pub(crate) mod factorial;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AngularError {
    #[error("invalid quantum numbers: {0}")]
    InvalidQuantumNumbers(String),
    #[error("argument {0} outside [-1, 1]")]
    ArgumentOutOfRange(f64),
}

pub(crate) fn check_lm(l: i64, m: i64) -> Result<(), AngularError> {
    if l < 0 || m.abs() > l {
        return Err(AngularError::InvalidQuantumNumbers(format!("l = {l}, m = {m}")));
    }
    Ok(())
}
