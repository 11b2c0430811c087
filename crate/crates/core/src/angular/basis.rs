use serde::{Deserialize, Serialize};

use super::{check_lm, AngularError};

/// A spherical-harmonic label `(l, m)`.
///
/// The flat enumeration is `index = l^2 + (m + l)`, i.e. shells in increasing
/// `l` and, within a shell, `m` from `-l` to `l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisIndex {
    pub l: i64,
    pub m: i64,
}

impl BasisIndex {
    pub fn new(l: i64, m: i64) -> Result<Self, AngularError> {
        check_lm(l, m)?;
        Ok(Self { l, m })
    }

    #[inline]
    pub fn flat(self) -> usize {
        (self.l * self.l + self.m + self.l) as usize
    }

    #[inline]
    pub fn from_flat(index: usize) -> Self {
        let mut l = (index as f64).sqrt() as i64;
        // guard against rounding in the square root
        while l * l > index as i64 {
            l -= 1;
        }
        while (l + 1) * (l + 1) <= index as i64 {
            l += 1;
        }
        let m = index as i64 - l * l - l;
        Self { l, m }
    }

    /// Iterates over every label with `l <= l_max` in flat order.
    pub fn all(l_max: i64) -> impl Iterator<Item = BasisIndex> {
        (0..=l_max).flat_map(|l| (-l..=l).map(move |m| BasisIndex { l, m }))
    }
}

/// Number of states with `l <= l_max`.
#[inline]
pub fn basis_size(l_max: i64) -> usize {
    ((l_max + 1) * (l_max + 1)) as usize
}
