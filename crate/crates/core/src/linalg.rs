//! Dense Hermitian helpers and a profile (skyline) Cholesky factorization.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geom::{C64, CZERO};

/// Eigenvalues in ascending order with matching eigenvector columns.
pub fn hermitian_eigen(a: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let h = hermitian_part(a);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// `A B` for complex matrices through four real products, which use the
/// blocked real kernels.
pub fn cmul(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let (ar, ai) = (a.map(|z| z.re), a.map(|z| z.im));
    let (br, bi) = (b.map(|z| z.re), b.map(|z| z.im));
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    re.zip_map(&im, C64::new)
}

/// Recomputes the eigenpairs of `M^H M` with eigenvalues below `below` from
/// `M` restricted to their eigenspace, whose Gram matrix only carries
/// rounding errors on the scale of `below`. `vals`, `vecs` are an ascending
/// eigendecomposition of the assembled `M^H M`.
pub fn refine_small_eigenpairs(vals: &mut [f64], vecs: &mut DMatrix<C64>, m: &DMatrix<C64>, below: f64) {
    let p = vals.iter().take_while(|&&l| l < below).count();
    if p == 0 {
        return;
    }
    let small = vecs.columns(0, p).into_owned();
    let ms = cmul(m, &small);
    let (sub_vals, sub_vecs) = hermitian_eigen(&cmul(&ms.adjoint(), &ms));
    vals[..p].copy_from_slice(&sub_vals);
    vecs.columns_mut(0, p).copy_from(&cmul(&small, &sub_vecs));
}

/// `(A + A^H) / 2`.
pub fn hermitian_part(a: &DMatrix<C64>) -> DMatrix<C64> {
    let n = a.nrows();
    DMatrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)].conj()))
}

/// Solves `A x = b` in the eigenspace of eigenvalues above
/// `rel_tol * lambda_max`; returns `x` and the retained rank.
pub fn truncated_eigen_solve(a: &DMatrix<C64>, b: &DVector<C64>, rel_tol: f64) -> (DVector<C64>, usize) {
    let (vals, vecs) = hermitian_eigen(a);
    let lmax = vals.last().copied().unwrap_or(0.0);
    let mut x = DVector::from_element(a.nrows(), CZERO);
    if !(lmax > 0.0) {
        return (x, 0);
    }
    let mut rank = 0;
    for (i, &l) in vals.iter().enumerate() {
        if l > rel_tol * lmax {
            let v = vecs.column(i);
            let coef = v.dotc(b) / l;
            x.axpy(coef, &v, C64::new(1.0, 0.0));
            rank += 1;
        }
    }
    (x, rank)
}

/// Ratio of extreme eigenvalues of a Hermitian positive definite matrix.
pub fn condition_number(k: &DMatrix<C64>) -> Result<f64> {
    let (vals, _) = hermitian_eigen(k);
    let (lo, hi) = match (vals.first(), vals.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => return Err(Error::InvalidConfig("empty matrix".into())),
    };
    if !(lo > 0.0) {
        return Err(Error::NotPositiveDefinite(lo));
    }
    Ok(hi / lo)
}

/// Cholesky factor `L` with `L L^H = A`, stored row by row from the first
/// structurally nonzero column of each row.
#[derive(Debug, Clone)]
pub struct ProfileCholesky {
    n: usize,
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<C64>,
}

impl ProfileCholesky {
    /// `first[i]` is the first column of row `i` that may be nonzero; it must
    /// be non-decreasing-compatible with fill-in (any envelope works).
    /// Fails with the offending pivot when `A` is not numerically positive definite.
    pub fn factor(a: impl Fn(usize, usize) -> C64, n: usize, first: &[usize]) -> std::result::Result<Self, f64> {
        let mut start = Vec::with_capacity(n + 1);
        let mut total = 0;
        for i in 0..n {
            start.push(total);
            total += i + 1 - first[i];
        }
        start.push(total);
        let mut data = vec![CZERO; total];
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let ri = &data[start[i] + (k0 - fi)..start[i] + (j - fi)];
                let rj = &data[start[j] + (k0 - fj)..start[j] + (j - fj)];
                let mut s = a(i, j);
                for (x, y) in ri.iter().zip(rj) {
                    s -= x * y.conj();
                }
                if i == j {
                    let d = s.re;
                    if !(d > 0.0) || !d.is_finite() {
                        return Err(d);
                    }
                    data[start[i] + (i - fi)] = C64::new(d.sqrt(), 0.0);
                } else {
                    let ljj = data[start[j] + (j - fj)].re;
                    data[start[i] + (j - fi)] = s / ljj;
                }
            }
        }
        Ok(Self { n, first: first.to_vec(), start, data })
    }

    fn l(&self, i: usize, j: usize) -> C64 {
        self.data[self.start[i] + (j - self.first[i])]
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in self.first[i]..i {
                s -= self.l(i, k) * y[k];
            }
            y[i] = s / self.l(i, i).re;
        }
        // back substitution with L^H, column-oriented over the row storage
        for i in (0..n).rev() {
            y[i] /= self.l(i, i).re;
            let yi = y[i];
            for k in self.first[i]..i {
                y[k] -= self.l(i, k).conj() * yi;
            }
        }
        y
    }

    /// Smallest diagonal entry of `L`.
    pub fn min_pivot(&self) -> f64 {
        (0..self.n).map(|i| self.l(i, i).re).fold(f64::INFINITY, f64::min)
    }
}
