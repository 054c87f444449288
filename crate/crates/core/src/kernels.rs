//! Column-streaming kernels for `N × N` by `N × r` products with small `r`.
//! Each one makes a single pass over the large operand. Reductions use
//! several accumulators so they vectorize.

use crate::Mat;

const LANES: usize = 8;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            acc[l] += x[l] * y[l];
        }
    }
    acc.iter().sum::<f64>() + tail
}

pub(crate) fn abs_sum(a: &[f64]) -> f64 {
    let mut acc = [0.0; LANES];
    let c = a.chunks_exact(LANES);
    let tail: f64 = c.remainder().iter().map(|x| x.abs()).sum();
    for x in c {
        for l in 0..LANES {
            acc[l] += x[l].abs();
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// `out = (W + Wᵀ) U` for square `W`.
pub fn sym_mul(w: &Mat, u: &Mat) -> Mat {
    let n = w.nrows();
    let r = u.ncols();
    assert_eq!(w.ncols(), n);
    assert_eq!(u.nrows(), n);
    let mut out = Mat::zeros(n, r);
    let ws = w.as_slice();
    let us = u.as_slice();
    let os = out.as_mut_slice();
    for j in 0..n {
        let col = &ws[j * n..(j + 1) * n];
        for k in 0..r {
            let uk = &us[k * n..(k + 1) * n];
            let ujk = uk[j];
            let ok = &mut os[k * n..(k + 1) * n];
            for (o, &c) in ok.iter_mut().zip(col) {
                *o += ujk * c;
            }
            ok[j] += dot(col, uk);
        }
    }
    out
}

/// `out = A Bᵀ + B Aᵀ` for `N × r` operands.
pub fn sym_outer_into(a: &Mat, b: &Mat, out: &mut Mat) {
    let n = a.nrows();
    let r = a.ncols();
    assert_eq!(b.shape(), (n, r));
    assert_eq!(out.shape(), (n, n));
    let as_ = a.as_slice();
    let bs = b.as_slice();
    let os = out.as_mut_slice();
    for j in 0..n {
        let col = &mut os[j * n..(j + 1) * n];
        col.fill(0.0);
        for k in 0..r {
            let ak = &as_[k * n..(k + 1) * n];
            let bk = &bs[k * n..(k + 1) * n];
            let (bj, aj) = (bk[j], ak[j]);
            for ((o, &x), &y) in col.iter_mut().zip(ak).zip(bk) {
                *o += x * bj + y * aj;
            }
        }
    }
}

/// `‖A Bᵀ‖₁` for operands with equal column counts.
pub fn l1_of_product(a: &Mat, b: &Mat) -> f64 {
    let (m, r) = a.shape();
    assert_eq!(b.ncols(), r);
    let n = b.nrows();
    let as_ = a.as_slice();
    let bs = b.as_slice();
    let mut col = vec![0.0; m];
    let mut total = 0.0;
    for j in 0..n {
        col.fill(0.0);
        for k in 0..r {
            let bjk = bs[k * n + j];
            for (o, &x) in col.iter_mut().zip(&as_[k * m..(k + 1) * m]) {
                *o += x * bjk;
            }
        }
        total += abs_sum(&col);
    }
    total
}

/// `‖A Bᵀ + B Aᵀ‖₁` from the upper triangle of the symmetric product.
pub fn l1_of_sym_outer(a: &Mat, b: &Mat) -> f64 {
    let n = a.nrows();
    let r = a.ncols();
    assert_eq!(b.shape(), (n, r));
    let as_ = a.as_slice();
    let bs = b.as_slice();
    let mut col = vec![0.0; n];
    let mut off = 0.0;
    let mut diag = 0.0;
    for j in 0..n {
        let col = &mut col[..j];
        col.fill(0.0);
        let mut dj = 0.0;
        for k in 0..r {
            let ak = &as_[k * n..k * n + j];
            let bk = &bs[k * n..k * n + j];
            let (aj, bj) = (as_[k * n + j], bs[k * n + j]);
            dj += 2.0 * aj * bj;
            for ((o, &x), &y) in col.iter_mut().zip(ak).zip(bk) {
                *o += x * bj + y * aj;
            }
        }
        off += abs_sum(col);
        diag += dj.abs();
    }
    2.0 * off + diag
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::gaussian_matrix;

    #[test]
    fn kernels_match_dense_products() {
        let w = gaussian_matrix(19, 19, 1, 3);
        let u = gaussian_matrix(19, 2, 2, 3);
        let v = gaussian_matrix(19, 2, 3, 3);
        assert!((sym_mul(&w, &u) - (&w + w.transpose()) * &u).amax() <= 1e-12);
        let mut out = Mat::zeros(19, 19);
        sym_outer_into(&u, &v, &mut out);
        assert!((out - (&u * v.transpose() + &v * u.transpose())).amax() <= 1e-12);
        let c = gaussian_matrix(17, 2, 4, 3);
        let dense: f64 = (&c * v.transpose()).iter().map(|x| x.abs()).sum();
        assert!((l1_of_product(&c, &v) - dense).abs() <= 1e-12);
        let sym: f64 = (&u * v.transpose() + &v * u.transpose()).iter().map(|x| x.abs()).sum();
        assert!((l1_of_sym_outer(&u, &v) - sym).abs() <= 1e-12 * sym);
        let head = &w.as_slice()[..38];
        let expected: f64 = head.iter().zip(u.as_slice()).map(|(a, b)| a * b).sum();
        assert!((dot(head, u.as_slice()) - expected).abs() <= 1e-12);
        assert!((abs_sum(w.as_slice()) - w.iter().map(|x| x.abs()).sum::<f64>()).abs() <= 1e-12);
    }
}
