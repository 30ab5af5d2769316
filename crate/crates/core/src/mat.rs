//! Dense row-major matrices sized for this pipeline: channel counts and
//! layer widths stay small (tens), sample counts get large (tens of
//! thousands), so rows are kept contiguous and the hot loops walk rows.

use std::ops::{Index, IndexMut};

use crate::num::{real, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct Mat<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Real> Mat<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![F::zero(); rows * cols] }
    }

    /// Builds from a flat row-major buffer. Panics if the length disagrees.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Self {
        assert_eq!(data.len(), rows * cols, "flat buffer length must be rows*cols");
        Mat { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Mat::from_fn(n, n, |r, c| if r == c { F::one() } else { F::zero() })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[F] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [F] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn col(&self, c: usize) -> Vec<F> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn set_col(&mut self, c: usize, v: &[F]) {
        debug_assert_eq!(v.len(), self.rows);
        for (r, &x) in v.iter().enumerate() {
            self[(r, c)] = x;
        }
    }

    pub fn transpose(&self) -> Mat<F> {
        let mut t = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Mat<F>) -> Mat<F> {
        assert_eq!(self.cols, other.rows, "matmul inner dimensions must agree");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            for (k, &a_ik) in a_row.iter().enumerate() {
                let b_row = other.row(k);
                let o_row = out.row_mut(i);
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a_ik * b;
                }
            }
        }
        out
    }

    /// `self * otherᵀ`.
    pub fn matmul_nt(&self, other: &Mat<F>) -> Mat<F> {
        assert_eq!(self.cols, other.cols, "matmul_nt shared dimension must agree");
        let mut out = Mat::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            for j in 0..other.rows {
                let b_row = other.row(j);
                let mut acc = F::zero();
                for (&a, &b) in a_row.iter().zip(b_row) {
                    acc += a * b;
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    /// `selfᵀ * other`.
    pub fn matmul_tn(&self, other: &Mat<F>) -> Mat<F> {
        assert_eq!(self.rows, other.rows, "matmul_tn shared dimension must agree");
        let mut out = Mat::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = other.row(k);
            for (i, &a_ki) in a_row.iter().enumerate() {
                let o_row = out.row_mut(i);
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a_ki * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[F]) -> Vec<F> {
        assert_eq!(self.cols, v.len(), "mul_vec length must equal cols");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Mat<F> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn map_inplace(&mut self, f: impl Fn(F) -> F) {
        for x in &mut self.data {
            *x = f(*x);
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: F, other: &Mat<F>) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn sub(&self, other: &Mat<F>) -> Mat<F> {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn hadamard(&self, other: &Mat<F>) -> Mat<F> {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&mut self, s: F) {
        for x in &mut self.data {
            *x *= s;
        }
    }

    /// Adds `v` to every column (bias broadcast).
    pub fn add_col_broadcast(&mut self, v: &[F]) {
        debug_assert_eq!(v.len(), self.rows);
        for r in 0..self.rows {
            let bias = v[r];
            for x in self.row_mut(r) {
                *x += bias;
            }
        }
    }

    pub fn row_sums(&self) -> Vec<F> {
        (0..self.rows).map(|r| self.row(r).iter().copied().sum()).collect()
    }

    pub fn col_means(&self) -> Vec<F> {
        let n = real::<F>(self.rows as f64);
        let mut means = vec![F::zero(); self.cols];
        for r in 0..self.rows {
            for (m, &x) in means.iter_mut().zip(self.row(r)) {
                *m += x;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        means
    }

    /// Sum of squared entries (squared Frobenius norm).
    pub fn frob2(&self) -> F {
        self.data.iter().map(|&x| x * x).sum()
    }

    pub fn max_abs(&self) -> F {
        self.data.iter().fold(F::zero(), |m, &x| m.max(x.abs()))
    }

    /// New matrix keeping the listed columns, in the given order.
    pub fn select_cols(&self, idx: &[usize]) -> Mat<F> {
        Mat::from_fn(self.rows, idx.len(), |r, c| self[(r, idx[c])])
    }
}

impl<F: Real> Index<(usize, usize)> for Mat<F> {
    type Output = F;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &F {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl<F: Real> IndexMut<(usize, usize)> for Mat<F> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut F {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// Eigendecomposition of a symmetric matrix: `values` descending,
/// `vectors` holding the matching unit eigenvectors as rows.
#[derive(Debug, Clone)]
pub struct SymEigen<F> {
    pub values: Vec<F>,
    pub vectors: Mat<F>,
}

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// Rotations are applied until the off-diagonal mass drops below machine
/// precision relative to the matrix scale; for the small matrices this
/// pipeline produces (channel covariance, tens of rows) that takes a
/// handful of sweeps. Eigenvector signs are fixed so the entry of largest
/// magnitude is positive, which keeps refits bit-reproducible.
pub fn sym_eigen<F: Real>(a: &Mat<F>) -> SymEigen<F> {
    assert_eq!(a.rows(), a.cols(), "sym_eigen expects a square matrix");
    let n = a.rows();
    let mut m = a.clone();
    let mut v: Mat<F> = Mat::identity(n);

    let off_diag = |m: &Mat<F>| -> F {
        let mut s = F::zero();
        for r in 0..n {
            for c in 0..n {
                if r != c {
                    s += m[(r, c)] * m[(r, c)];
                }
            }
        }
        s
    };

    let scale = m.max_abs().max(F::min_positive_value());
    let tol = F::epsilon() * F::epsilon() * scale * scale * real::<F>((n * n) as f64);
    for _sweep in 0..100 {
        if off_diag(&m) <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= F::min_positive_value() {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (real::<F>(2.0) * apq);
                // Stable tangent of the rotation angle.
                let t = {
                    let sign = if theta >= F::zero() { F::one() } else { -F::one() };
                    sign / (theta.abs() + (theta * theta + F::one()).sqrt())
                };
                let c = F::one() / (t * t + F::one()).sqrt();
                let s = t * c;

                for i in 0..n {
                    let mip = m[(i, p)];
                    let miq = m[(i, q)];
                    m[(i, p)] = c * mip - s * miq;
                    m[(i, q)] = s * mip + c * miq;
                }
                for i in 0..n {
                    let mpi = m[(p, i)];
                    let mqi = m[(q, i)];
                    m[(p, i)] = c * mpi - s * mqi;
                    m[(q, i)] = s * mpi + c * mqi;
                }
                for i in 0..n {
                    let vpi = v[(p, i)];
                    let vqi = v[(q, i)];
                    v[(p, i)] = c * vpi - s * vqi;
                    v[(q, i)] = s * vpi + c * vqi;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[(j, j)].partial_cmp(&m[(i, i)]).expect("eigenvalues of a finite symmetric matrix are finite")
    });

    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (out_r, &src_r) in order.iter().enumerate() {
        let mut best = F::zero();
        let mut flip = F::one();
        for &x in v.row(src_r) {
            if x.abs() > best {
                best = x.abs();
                flip = if x >= F::zero() { F::one() } else { -F::one() };
            }
        }
        for (c, &x) in v.row(src_r).iter().enumerate() {
            vectors[(out_r, c)] = flip * x;
        }
    }
    SymEigen { values, vectors }
}

/// Solves `a * x = b` for symmetric positive-definite `a` by Cholesky.
/// Returns `None` when `a` is not positive definite.
pub fn solve_spd<F: Real>(a: &Mat<F>, b: &Mat<F>) -> Option<Mat<F>> {
    assert_eq!(a.rows(), a.cols(), "solve_spd expects a square matrix");
    assert_eq!(a.rows(), b.rows(), "solve_spd right-hand side must match");
    let n = a.rows();

    // Lower-triangular factor, a = l * lᵀ.
    let mut l: Mat<F> = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= F::zero() {
                    return None;
                }
                l[(i, j)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }

    let mut x = b.clone();
    // Forward solve l * y = b, column by column.
    for c in 0..x.cols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
        // Back substitution lᵀ * x = y.
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in (i + 1)..n {
                s -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small_example() {
        let a: Mat<f64> = Mat::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b: Mat<f64> = Mat::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = a.matmul(&b);
        assert_eq!(c.as_slice(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn transposed_products_agree_with_explicit_transpose() {
        let a: Mat<f64> = Mat::from_fn(3, 4, |r, c| (r * 7 + c) as f64 * 0.25 - 1.0);
        let b: Mat<f64> = Mat::from_fn(5, 4, |r, c| (r + 2 * c) as f64 * 0.5 - 2.0);
        assert_eq!(a.matmul_nt(&b), a.matmul(&b.transpose()));
        let c: Mat<f64> = Mat::from_fn(3, 2, |r, c| (r as f64) - (c as f64) * 0.125);
        assert_eq!(a.matmul_tn(&c), a.transpose().matmul(&c));
    }

    #[test]
    fn jacobi_recovers_known_eigenpairs() {
        // Symmetric matrix with eigenvalues 3 and 1, eigenvectors (1,1)/√2 and (1,-1)/√2.
        let a: Mat<f64> = Mat::from_vec(2, 2, vec![2.0, 1.0, 1.0, 2.0]);
        let e = sym_eigen(&a);
        assert!((e.values[0] - 3.0).abs() < 1e-12);
        assert!((e.values[1] - 1.0).abs() < 1e-12);
        let s = 1.0 / 2.0_f64.sqrt();
        for (got, want) in e.vectors.row(0).iter().zip([s, s]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobi_reconstructs_random_symmetric_matrix() {
        let n = 6;
        let mut seed = 0x2545F4914F6CDD1Du64;
        let mut next = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut a: Mat<f64> = Mat::zeros(n, n);
        for r in 0..n {
            for c in 0..=r {
                let x = next();
                a[(r, c)] = x;
                a[(c, r)] = x;
            }
        }
        let e = sym_eigen(&a);
        // v diag(λ) vᵀ must rebuild a.
        let mut rebuilt: Mat<f64> = Mat::zeros(n, n);
        for k in 0..n {
            let v = e.vectors.row(k);
            for r in 0..n {
                for c in 0..n {
                    rebuilt[(r, c)] += e.values[k] * v[r] * v[c];
                }
            }
        }
        assert!(rebuilt.sub(&a).max_abs() < 1e-12);
        for k in 1..n {
            assert!(e.values[k - 1] >= e.values[k]);
        }
    }

    #[test]
    fn spd_solve_matches_known_solution() {
        let a: Mat<f64> = Mat::from_vec(2, 2, vec![4.0, 1.0, 1.0, 3.0]);
        let x_true: Mat<f64> = Mat::from_vec(2, 1, vec![1.0, -2.0]);
        let b = a.matmul(&x_true);
        let x = solve_spd(&a, &b).expect("matrix is positive definite");
        assert!(x.sub(&x_true).max_abs() < 1e-12);
        let not_pd: Mat<f64> = Mat::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0]);
        assert!(solve_spd(&not_pd, &b).is_none());
    }

    #[test]
    fn broadcast_and_reductions() {
        let mut m: Mat<f32> = Mat::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        m.add_col_broadcast(&[10.0, 20.0]);
        assert_eq!(m.row(0), &[11.0, 12.0, 13.0]);
        assert_eq!(m.row_sums(), vec![36.0, 75.0]);
        assert_eq!(m.col_means(), vec![17.5, 18.5, 19.5]);
    }
}
