use num_complex::Complex64;

use super::BasisIndex;

/// Compressed-row complex matrix over the flat `(l, m)` enumeration.
///
/// Entries are stored row-major with ascending columns, so any reduction over
/// them runs in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseMatrix {
    /// Builds from unordered triplets; duplicates are summed and exact zeros dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, Complex64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "entry ({r}, {c}) outside dimension {dim}");
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|e| e.2 != Complex64::new(0.0, 0.0));
        let mut row_ptr = vec![0usize; dim + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let cols = merged.iter().map(|e| e.1).collect();
        let vals = merged.iter().map(|e| e.2).collect();
        Self { dim, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        let span = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.cols[span.clone()].binary_search(&col) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn element(&self, row: BasisIndex, col: BasisIndex) -> Complex64 {
        if row.flat() >= self.dim || col.flat() >= self.dim {
            return Complex64::new(0.0, 0.0);
        }
        self.get(row.flat(), col.flat())
    }

    /// Row-major iterator over `(row, col, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim)
            .flat_map(move |r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k])))
    }

    pub fn row(&self, r: usize) -> (&[usize], &[Complex64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.cols[span.clone()], &self.vals[span])
    }

    /// `y = A x`
    pub fn matvec_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *out = acc;
        }
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.dim];
        self.matvec_into(x, &mut y);
        y
    }

    /// `x† A x`, summed in storage order.
    pub fn sandwich(&self, x: &[Complex64]) -> Complex64 {
        assert_eq!(x.len(), self.dim);
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..self.dim {
            let xr = x[r].conj();
            if xr == Complex64::new(0.0, 0.0) {
                continue;
            }
            let mut row = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row += self.vals[k] * x[self.cols[k]];
            }
            acc += xr * row;
        }
        acc
    }

    /// Largest `|A_ij - conj(A_ji)|` over stored entries.
    pub fn hermiticity_defect(&self) -> f64 {
        self.entries().map(|(r, c, v)| (v - self.get(c, r).conj()).norm()).fold(0.0, f64::max)
    }

    /// Submatrix on the given (ascending, distinct) flat indices.
    pub fn restrict(&self, indices: &[usize]) -> SparseMatrix {
        let mut map = vec![usize::MAX; self.dim];
        for (new, &old) in indices.iter().enumerate() {
            map[old] = new;
        }
        let mut triplets = Vec::new();
        for (new_r, &old_r) in indices.iter().enumerate() {
            for k in self.row_ptr[old_r]..self.row_ptr[old_r + 1] {
                let c = map[self.cols[k]];
                if c != usize::MAX {
                    triplets.push((new_r, c, self.vals[k]));
                }
            }
        }
        SparseMatrix::from_triplets(indices.len(), triplets)
    }

    pub fn scaled(&self, s: f64) -> SparseMatrix {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `Σ_k c_k A_k` for matrices of equal dimension.
    pub fn linear_combination(terms: &[(f64, &SparseMatrix)]) -> SparseMatrix {
        let dim = terms.first().map_or(0, |t| t.1.dim);
        let mut triplets = Vec::new();
        for &(c, m) in terms {
            assert_eq!(m.dim, dim);
            if c == 0.0 {
                continue;
            }
            triplets.extend(m.entries().map(|(r, col, v)| (r, col, v * c)));
        }
        SparseMatrix::from_triplets(dim, triplets)
    }
}

/// A [`SparseMatrix`] known to be Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHermitianOperator {
    matrix: SparseMatrix,
}

impl SparseHermitianOperator {
    pub const TOLERANCE: f64 = 1e-14;

    /// Wraps a matrix, panicking if it is not Hermitian to [`Self::TOLERANCE`].
    pub fn new(matrix: SparseMatrix) -> Self {
        let defect = matrix.hermiticity_defect();
        assert!(defect <= Self::TOLERANCE, "matrix is not Hermitian (defect {defect:e})");
        Self { matrix }
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim
    }

    pub fn element(&self, row: BasisIndex, col: BasisIndex) -> Complex64 {
        self.matrix.element(row, col)
    }

    pub fn expectation(&self, x: &[Complex64]) -> f64 {
        self.matrix.sandwich(x).re
    }

    pub fn restrict(&self, indices: &[usize]) -> SparseHermitianOperator {
        SparseHermitianOperator { matrix: self.matrix.restrict(indices) }
    }

    pub fn linear_combination(terms: &[(f64, &SparseHermitianOperator)]) -> SparseHermitianOperator {
        let mats: Vec<(f64, &SparseMatrix)> = terms.iter().map(|&(c, op)| (c, &op.matrix)).collect();
        Self::new(SparseMatrix::linear_combination(&mats))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn duplicate_triplets_are_summed() {
        let m = SparseMatrix::from_triplets(3, vec![(2, 1, c(1.0, 0.0)), (0, 0, c(2.0, 0.0)), (2, 1, c(0.5, 1.0))]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(2, 1), c(1.5, 1.0));
        let order: Vec<_> = m.entries().map(|e| (e.0, e.1)).collect();
        assert_eq!(order, vec![(0, 0), (2, 1)]);
    }

    #[test]
    fn sandwich_and_restrict() {
        let m = SparseMatrix::from_triplets(3, vec![(0, 1, c(0.0, 1.0)), (1, 0, c(0.0, -1.0)), (2, 2, c(3.0, 0.0))]);
        let op = SparseHermitianOperator::new(m);
        let x = [c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)];
        // x† A x = conj(x0) i x1 + conj(x1)(-i) x0 = i*i + (-i)(-i) = -2
        assert!((op.expectation(&x) + 2.0).abs() < 1e-15);
        let sub = op.restrict(&[0, 2]);
        assert_eq!(sub.dim(), 2);
        assert_eq!(sub.matrix().nnz(), 1);
    }

    #[test]
    #[should_panic]
    fn rejects_non_hermitian() {
        SparseHermitianOperator::new(SparseMatrix::from_triplets(2, vec![(0, 1, c(1.0, 0.0))]));
    }
}
