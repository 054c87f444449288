//! Stiefel manifold geometry.
//!
//! `St(n, r) = { U ∈ ℝⁿˣʳ : UᵀU = I_r }` with the embedded Euclidean metric.
//! The tangent space at `U` is `{ V : UᵀV + VᵀU = 0 }` and the orthogonal
//! projection onto it is `P_U(X) = X − U sym(UᵀX)`.

use nalgebra::linalg::QR;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng;
use crate::Mat;

/// Orthonormality tolerance enforced on every [`StiefelPoint`].
pub const FEASIBILITY_TOL: f64 = 1e-10;

/// Drift threshold above which an iterate is re-orthonormalized.
pub const DRIFT_TOL: f64 = 1e-8;

/// An `n × r` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint {
    u: Mat,
}

/// A tangent direction. The base point is not stored; functions taking one
/// also take the point it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    v: Mat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Retraction {
    #[default]
    Qr,
    Polar,
}

impl StiefelPoint {
    /// Wraps `u` after checking `‖UᵀU − I‖_F ≤ 1e-10`.
    pub fn new(u: Mat) -> Result<Self> {
        if u.ncols() == 0 || u.ncols() > u.nrows() {
            return Err(Error::Dimension(format!(
                "Stiefel point needs 0 < r <= n, got {}x{}",
                u.nrows(),
                u.ncols()
            )));
        }
        let drift = orthonormality_error(&u);
        if !(drift <= FEASIBILITY_TOL) {
            return Err(Error::Parameter(format!(
                "matrix is not orthonormal: ||U^T U - I||_F = {drift:e}"
            )));
        }
        Ok(Self { u })
    }

    /// Orthonormal Q factor (positive-diagonal convention) of an arbitrary
    /// full-column-rank matrix.
    pub fn orthonormalize(m: &Mat) -> Result<Self> {
        if m.ncols() == 0 || m.ncols() > m.nrows() {
            return Err(Error::Dimension(format!(
                "cannot orthonormalize a {}x{} matrix",
                m.nrows(),
                m.ncols()
            )));
        }
        let q = qr_factor(m)?;
        Ok(Self { u: q })
    }

    pub fn matrix(&self) -> &Mat {
        &self.u
    }

    pub fn into_matrix(self) -> Mat {
        self.u
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn r(&self) -> usize {
        self.u.ncols()
    }

    pub fn feasibility_error(&self) -> f64 {
        orthonormality_error(&self.u)
    }
}

impl TangentVector {
    pub fn matrix(&self) -> &Mat {
        &self.v
    }

    pub fn into_matrix(self) -> Mat {
        self.v
    }

    pub fn norm(&self) -> f64 {
        self.v.norm()
    }

    pub fn zeros_like(point: &StiefelPoint) -> Self {
        Self {
            v: Mat::zeros(point.n(), point.r()),
        }
    }

    /// Wraps `v` after checking the tangency residual at `point`.
    pub fn at(point: &StiefelPoint, v: Mat) -> Result<Self> {
        check_shape(point, &v)?;
        let res = tangent_residual(point, &v);
        if !(res <= 1e-8 * (1.0 + v.norm())) {
            return Err(Error::Parameter(format!(
                "matrix is not tangent: ||U^T V + V^T U||_F = {res:e}"
            )));
        }
        Ok(Self { v })
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self { v: &self.v * alpha }
    }
}

/// `‖UᵀU − I‖_F`.
pub fn orthonormality_error(u: &Mat) -> f64 {
    let mut g = u.tr_mul(u);
    for i in 0..g.nrows() {
        g[(i, i)] -= 1.0;
    }
    g.norm()
}

fn check_shape(point: &StiefelPoint, x: &Mat) -> Result<()> {
    if x.shape() != point.u.shape() {
        return Err(Error::Dimension(format!(
            "expected {}x{}, got {}x{}",
            point.n(),
            point.r(),
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(())
}

/// `(A + Aᵀ) / 2`.
pub fn sym(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

/// Raw tangent projection on matrices, `X − U sym(UᵀX)`, without shape checks.
pub(crate) fn project_tangent_raw(u: &Mat, x: &Mat) -> Mat {
    let utx = u.tr_mul(x);
    x - u * sym(&utx)
}

/// Orthogonal projection of `x` onto the tangent space at `point`.
pub fn project_tangent(point: &StiefelPoint, x: &Mat) -> Result<TangentVector> {
    check_shape(point, x)?;
    Ok(TangentVector {
        v: project_tangent_raw(&point.u, x),
    })
}

/// `‖UᵀV + VᵀU‖_F`.
pub fn tangent_residual(point: &StiefelPoint, v: &Mat) -> f64 {
    debug_assert_eq!(point.u.shape(), v.shape());
    let utv = point.u.tr_mul(v);
    (&utv + utv.transpose()).norm()
}

/// Thin QR with the sign of each column fixed so that `R` has a positive
/// diagonal. Fails on rank deficiency.
fn qr_factor(m: &Mat) -> Result<Mat> {
    let r = m.ncols();
    let qr = QR::new(m.clone());
    let mut q = qr.q();
    let rf = qr.r();
    for j in 0..r {
        let d = rf[(j, j)];
        if !d.is_finite() || d.abs() <= f64::EPSILON * m.norm().max(1.0) * 1e-3 {
            return Err(Error::Numeric(format!(
                "rank-deficient matrix in QR (R[{j},{j}] = {d:e})"
            )));
        }
        if d < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// Orthogonal polar factor `W Qᵀ` of `m = W Σ Qᵀ`.
fn polar_factor(m: &Mat) -> Result<Mat> {
    let svd = m.clone().svd(true, true);
    let (Some(w), Some(qt)) = (svd.u, svd.v_t) else {
        return Err(Error::Numeric("SVD did not return singular vectors".into()));
    };
    let smin = svd.singular_values.min();
    if !(smin > 0.0) {
        return Err(Error::Numeric("singular matrix in polar retraction".into()));
    }
    Ok(w * qt)
}

/// Maps `U + V` back onto the manifold.
pub fn retract(point: &StiefelPoint, v: &TangentVector, scheme: Retraction) -> Result<StiefelPoint> {
    check_shape(point, &v.v)?;
    if v.v.iter().all(|&x| x == 0.0) {
        return Ok(point.clone());
    }
    let moved = &point.u + &v.v;
    let mut u = match scheme {
        Retraction::Qr => qr_factor(&moved)?,
        Retraction::Polar => polar_factor(&moved)?,
    };
    if orthonormality_error(&u) > DRIFT_TOL {
        u = qr_factor(&u)?;
    }
    Ok(StiefelPoint { u })
}

/// Re-orthonormalizes by QR when `‖UᵀU − I‖_F > 1e-8`.
pub fn correct_drift(point: StiefelPoint) -> Result<StiefelPoint> {
    if point.feasibility_error() > DRIFT_TOL {
        return StiefelPoint::orthonormalize(&point.u);
    }
    Ok(point)
}

/// Polar factor of a seeded `n × r` standard Gaussian matrix.
pub fn random_point(n: usize, r: usize, seed: u64) -> Result<StiefelPoint> {
    random_point_with(n, r, seed, rng::purpose::STIEFEL_POINT)
}

pub(crate) fn random_point_with(n: usize, r: usize, seed: u64, purpose: u64) -> Result<StiefelPoint> {
    if r == 0 || r > n {
        return Err(Error::Dimension(format!("random point needs 0 < r <= n, got n={n}, r={r}")));
    }
    let mut g = rng::stream(seed, purpose);
    let m = Mat::from_fn(n, r, |_, _| StandardNormal.sample(&mut g));
    let mut u = polar_factor(&m)?;
    if orthonormality_error(&u) > 1e-12 {
        u = qr_factor(&u)?;
    }
    Ok(StiefelPoint { u })
}

/// Seeded Gaussian `n × r` matrix (not orthonormalized).
pub fn gaussian_matrix(n: usize, r: usize, seed: u64, purpose: u64) -> Mat {
    let mut g = rng::stream(seed, purpose);
    Mat::from_fn(n, r, |_, _| StandardNormal.sample(&mut g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn e1() -> StiefelPoint {
        StiefelPoint::new(Mat::from_column_slice(2, 1, &[1.0, 0.0])).unwrap()
    }

    #[test]
    fn projection_keeps_tangent_vectors() {
        let v = project_tangent(&e1(), &Mat::from_column_slice(2, 1, &[0.0, 3.0])).unwrap();
        assert_eq!(v.matrix().as_slice(), &[0.0, 3.0]);
    }

    #[test]
    fn projection_kills_normal_vectors() {
        let v = project_tangent(&e1(), &Mat::from_column_slice(2, 1, &[5.0, 0.0])).unwrap();
        assert_eq!(v.matrix().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn projection_rejects_wrong_shape() {
        let err = project_tangent(&e1(), &Mat::zeros(3, 1)).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    // Least-squares projection onto {V : UᵀV + VᵀU = 0} via an explicit basis
    // of the null space of the linear map V ↦ UᵀV + VᵀU (vectorized).
    #[test]
    fn projection_matches_null_space_least_squares() {
        let (n, r) = (3, 2);
        let u = random_point(n, r, 11).unwrap();
        let x = gaussian_matrix(n, r, 12, 99);
        let dim = n * r;
        // Rows: upper-triangular entries of UᵀV + VᵀU as linear functionals of vec(V).
        let mut rows = Vec::new();
        for a in 0..r {
            for b in a..r {
                let mut row = vec![0.0; dim];
                for k in 0..dim {
                    let mut e = Mat::zeros(n, r);
                    e[(k % n, k / n)] = 1.0;
                    let s = u.matrix().tr_mul(&e);
                    row[k] = s[(a, b)] + s[(b, a)];
                }
                rows.push(row);
            }
        }
        let c = Mat::from_fn(rows.len(), dim, |i, j| rows[i][j]);
        let svd = c.clone().svd(true, true);
        let vt = svd.v_t.unwrap();
        // nalgebra thin SVD of a wide matrix only returns the row space; build
        // the null-space projector as I − R with R the row-space projector.
        let rank = svd.singular_values.iter().filter(|s| **s > 1e-10).count();
        let row_basis = vt.rows(0, rank).transpose();
        let p_row = &row_basis * row_basis.transpose();
        let p_null = Mat::identity(dim, dim) - p_row;
        let xv = Mat::from_column_slice(dim, 1, x.as_slice());
        let oracle = p_null * xv;
        let v = project_tangent(&u, &x).unwrap();
        for k in 0..dim {
            assert_abs_diff_eq!(v.matrix().as_slice()[k], oracle[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn retract_zero_is_identity() {
        let u = random_point(5, 2, 3).unwrap();
        let z = TangentVector::zeros_like(&u);
        for scheme in [Retraction::Qr, Retraction::Polar] {
            let out = retract(&u, &z, scheme).unwrap();
            assert!((out.matrix() - u.matrix()).norm() <= 1e-12);
        }
    }

    #[test]
    fn qr_retraction_on_circle_normalizes() {
        let v = TangentVector::at(&e1(), Mat::from_column_slice(2, 1, &[0.0, 1.0])).unwrap();
        let out = retract(&e1(), &v, Retraction::Qr).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(out.matrix()[0], h, epsilon = 1e-15);
        assert_abs_diff_eq!(out.matrix()[1], h, epsilon = 1e-15);
    }

    #[test]
    fn qr_and_polar_agree_to_first_order() {
        let u = random_point(4, 2, 21).unwrap();
        let v = project_tangent(&u, &gaussian_matrix(4, 2, 22, 99)).unwrap();
        for &tau in &[1e-1, 1e-2, 1e-3] {
            let tv = v.scaled(tau);
            let q = retract(&u, &tv, Retraction::Qr).unwrap();
            let p = retract(&u, &tv, Retraction::Polar).unwrap();
            let d = (q.matrix() - p.matrix()).norm();
            assert!(d <= 0.5 * tv.norm().powi(2), "tau={tau}: {d}");
        }
    }

    #[test]
    fn retraction_second_order_error_shrinks_quadratically() {
        let u = random_point(6, 3, 5).unwrap();
        let v = project_tangent(&u, &gaussian_matrix(6, 3, 6, 99)).unwrap();
        let v = v.scaled(1.0 / v.norm());
        for scheme in [Retraction::Qr, Retraction::Polar] {
            for &tau in &[1e-1, 1e-2, 1e-3] {
                let out = retract(&u, &v.scaled(tau), scheme).unwrap();
                let lin = u.matrix() + v.matrix() * tau;
                assert!((out.matrix() - lin).norm() <= 2.0 * tau * tau);
            }
        }
    }

    #[test]
    fn tangent_residual_of_point_itself() {
        let u = random_point(7, 3, 1).unwrap();
        let res = tangent_residual(&u, &u.matrix().clone());
        assert_abs_diff_eq!(res, 2.0 * 3f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn tangent_residual_matches_direct_norm() {
        let u = random_point(5, 2, 8).unwrap();
        let v = gaussian_matrix(5, 2, 9, 99);
        let mut acc = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                let mut s = 0.0;
                for i in 0..5 {
                    s += u.matrix()[(i, a)] * v[(i, b)] + v[(i, a)] * u.matrix()[(i, b)];
                }
                acc += s * s;
            }
        }
        assert_abs_diff_eq!(tangent_residual(&u, &v), acc.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn random_square_point_is_orthogonal() {
        let u = random_point(3, 3, 42).unwrap();
        assert!(u.feasibility_error() <= 1e-12);
        assert_eq!(u, random_point(3, 3, 42).unwrap());
    }

    #[test]
    fn random_point_rejects_wide_shapes() {
        assert!(matches!(random_point(2, 3, 0), Err(Error::Dimension(_))));
    }

    #[test]
    fn random_point_columns_are_unit() {
        for seed in 0..1000 {
            let u = random_point(100, 5, seed).unwrap();
            for j in 0..5 {
                assert!((u.matrix().column(j).norm() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn retraction_moves_at_most_twice_the_step() {
        for seed in 0..1000u64 {
            let u = random_point(6, 2, seed).unwrap();
            let v = project_tangent(&u, &gaussian_matrix(6, 2, seed, 77)).unwrap();
            let scale = ((seed % 97) as f64 + 1.0) / 97.0;
            let v = v.scaled(scale / v.norm());
            let out = retract(&u, &v, Retraction::Qr).unwrap();
            assert!((out.matrix() - u.matrix()).norm() <= 2.0 * v.norm());
        }
    }

    proptest! {
        #[test]
        fn projection_idempotent_and_self_adjoint(seed in 0u64..10_000, n in 2usize..8) {
            let r = 1 + (seed as usize % n.min(4));
            let r = r.min(n);
            let u = random_point(n, r, seed).unwrap();
            let x = gaussian_matrix(n, r, seed, 101);
            let y = gaussian_matrix(n, r, seed, 102);
            let px = project_tangent(&u, &x).unwrap();
            let ppx = project_tangent(&u, px.matrix()).unwrap();
            prop_assert!((px.matrix() - ppx.matrix()).norm() <= 1e-12);
            prop_assert!(tangent_residual(&u, px.matrix()) <= 1e-10);
            let py = project_tangent(&u, &y).unwrap();
            let lhs = px.matrix().dot(&y);
            let rhs = x.dot(py.matrix());
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
            let out = retract(&u, &px.scaled(0.3), Retraction::Qr).unwrap();
            prop_assert!(out.feasibility_error() <= FEASIBILITY_TOL);
        }
    }
}
