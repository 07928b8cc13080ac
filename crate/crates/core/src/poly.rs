//! Gram matrices and projectors on element and face bases.
//!
//! Every projection solve enforces its own orthogonality residual: after one
//! step of iterative refinement the residual must sit at the rounding floor,
//! otherwise the basis is declared ill conditioned and the caller gets an
//! error naming the region instead of silently degraded coefficients.

use crate::basis::{ElementBasis, FaceBasis};
use crate::geometry::{Point2, Vector2};
use crate::quad::{ElemQuad, FaceQuad};
use nalgebra::{Cholesky, DMatrix, DVector};

#[derive(thiserror::Error, Debug)]
pub enum PolyError {
    #[error("quadrature exactness {0} beyond supported range")]
    UnsupportedOrder(usize),
    #[error("ill-conditioned basis on {0}")]
    IllConditioned(String),
}

/// rows^T diag(w) cols for value tables sampled at a common rule.
pub fn gram(rows: &DMatrix<f64>, cols: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut scaled = rows.clone();
    for (r, &wr) in w.iter().enumerate() {
        scaled.row_mut(r).scale_mut(wr);
    }
    scaled.transpose() * cols
}

pub fn mass_matrix(basis: &ElementBasis, q: &ElemQuad) -> DMatrix<f64> {
    let v = basis.eval_at(&q.points);
    gram(&v, &v, &q.weights)
}

pub fn stiffness_matrix(basis: &ElementBasis, q: &ElemQuad) -> DMatrix<f64> {
    let (gx, gy) = basis.grad_at(&q.points);
    gram(&gx, &gx, &q.weights) + gram(&gy, &gy, &q.weights)
}

pub fn face_mass_matrix(fb: &FaceBasis, q: &FaceQuad) -> DMatrix<f64> {
    let v = fb.eval_at_t(&q.t);
    gram(&v, &v, &q.weights)
}

/// SPD solve wrapper with one iterative refinement pass and a hard residual
/// gate at 1e-12 relative to the right-hand side.
pub struct SpdSolver {
    mat: DMatrix<f64>,
    chol: Cholesky<f64, nalgebra::Dyn>,
    context: String,
}

impl SpdSolver {
    pub fn new(mat: DMatrix<f64>, context: &str) -> Result<Self, PolyError> {
        let chol = Cholesky::new(mat.clone())
            .ok_or_else(|| PolyError::IllConditioned(context.to_string()))?;
        Ok(Self {
            mat,
            chol,
            context: context.to_string(),
        })
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>, PolyError> {
        let mut x = self.chol.solve(rhs);
        let r = rhs - &self.mat * &x;
        x += self.chol.solve(&r);
        let r2 = rhs - &self.mat * &x;
        let scale = rhs.amax().max(1e-300);
        if r2.amax() > 1e-12 * scale {
            return Err(PolyError::IllConditioned(self.context.clone()));
        }
        Ok(x)
    }
}

/// L2 projection onto the element basis, coefficients in that basis.
pub fn l2_project_element(
    f: &dyn Fn(Point2) -> f64,
    basis: &ElementBasis,
    q: &ElemQuad,
) -> Result<DVector<f64>, PolyError> {
    let v = basis.eval_at(&q.points);
    let m = gram(&v, &v, &q.weights);
    let mut rhs = DVector::zeros(basis.dim());
    for (r, &p) in q.points.iter().enumerate() {
        let fw = f(p) * q.weights[r];
        rhs += v.row(r).transpose() * fw;
    }
    SpdSolver::new(m, "element")?.solve(&rhs)
}

/// L2 projection onto the face basis, coefficients in the chordal basis.
pub fn l2_project_face(
    f: &dyn Fn(Point2) -> f64,
    fb: &FaceBasis,
    q: &FaceQuad,
) -> Result<DVector<f64>, PolyError> {
    let v = fb.eval_at_t(&q.t);
    let m = gram(&v, &v, &q.weights);
    let mut rhs = DVector::zeros(fb.dim());
    for (r, &p) in q.points.iter().enumerate() {
        let fw = f(p) * q.weights[r];
        rhs += v.row(r).transpose() * fw;
    }
    SpdSolver::new(m, "face")?.solve(&rhs)
}

/// Elliptic projection: gradient orthogonality plus a mean-value constraint,
/// solved as a bordered symmetric system. Coincides with the L2 projector at
/// degree zero because only the constraint row remains.
pub fn elliptic_project(
    f: &dyn Fn(Point2) -> f64,
    grad_f: &dyn Fn(Point2) -> Vector2,
    basis: &ElementBasis,
    q: &ElemQuad,
) -> Result<DVector<f64>, PolyError> {
    let n = basis.dim();
    let (gx, gy) = basis.grad_at(&q.points);
    let k = gram(&gx, &gx, &q.weights) + gram(&gy, &gy, &q.weights);
    let v = basis.eval_at(&q.points);
    // border with the mass-against-one row to pin the constant mode
    let mut big = DMatrix::zeros(n + 1, n + 1);
    big.view_mut((0, 0), (n, n)).copy_from(&k);
    let mut ones = DVector::zeros(n);
    let mut rhs = DVector::zeros(n + 1);
    for (r, &p) in q.points.iter().enumerate() {
        let w = q.weights[r];
        let g = grad_f(p);
        for c in 0..n {
            rhs[c] += w * (gx[(r, c)] * g.x + gy[(r, c)] * g.y);
            ones[c] += w * v[(r, c)];
        }
        rhs[n] += w * f(p);
    }
    for c in 0..n {
        big[(n, c)] = ones[c];
        big[(c, n)] = ones[c];
    }
    let lu = big.clone().lu();
    let mut sol = lu
        .solve(&rhs)
        .ok_or_else(|| PolyError::IllConditioned("element (elliptic)".into()))?;
    let resid = &rhs - &big * &sol;
    if let Some(corr) = lu.solve(&resid) {
        sol += corr;
    }
    let r2 = (&rhs - &big * &sol).amax();
    if r2 > 1e-11 * rhs.amax().max(1e-300) {
        return Err(PolyError::IllConditioned("element (elliptic)".into()));
    }
    Ok(sol.rows(0, n).into_owned())
}

/// Largest ratio ||v||_F h_T^(1/2) / ||v||_T over the basis sample and the
/// element's faces; a cheap numeric stand-in for the trace constant.
pub fn trace_constant_probe(
    basis: &ElementBasis,
    eq: &ElemQuad,
    face_rules: &[FaceQuad],
) -> f64 {
    let m = mass_matrix(basis, eq);
    let mut worst = 0.0f64;
    for c in 0..basis.dim() {
        let norm_t = m[(c, c)].sqrt();
        for fq in face_rules {
            let mut sq = 0.0;
            for (i, &p) in fq.points.iter().enumerate() {
                let val = basis.eval(p)[c];
                sq += fq.weights[i] * val * val;
            }
            worst = worst.max(sq.sqrt() * basis.scale.sqrt() / norm_t);
        }
    }
    worst
}

/// Symmetric positive definite solve with a matrix of right-hand sides,
/// refined once and gated like the vector version.
pub fn spd_solve_matrix(
    m: &DMatrix<f64>,
    rhs: &DMatrix<f64>,
    context: &str,
) -> Result<DMatrix<f64>, PolyError> {
    let chol = Cholesky::new(m.clone())
        .ok_or_else(|| PolyError::IllConditioned(context.to_string()))?;
    let mut x = chol.solve(rhs);
    let r = rhs - m * &x;
    x += chol.solve(&r);
    let r2 = (rhs - m * &x).amax();
    if r2 > 1e-11 * rhs.amax().max(1e-300) {
        return Err(PolyError::IllConditioned(context.to_string()));
    }
    Ok(x)
}

/// General square solve with a matrix of right-hand sides, refined once.
pub fn lu_solve_matrix(
    m: &DMatrix<f64>,
    rhs: &DMatrix<f64>,
    context: &str,
) -> Result<DMatrix<f64>, PolyError> {
    let lu = m.clone().lu();
    let mut x = lu
        .solve(rhs)
        .ok_or_else(|| PolyError::IllConditioned(context.to_string()))?;
    let r = rhs - m * &x;
    if let Some(corr) = lu.solve(&r) {
        x += corr;
    }
    let r2 = (rhs - m * &x).amax();
    if r2 > 1e-11 * rhs.amax().max(1e-300) {
        return Err(PolyError::IllConditioned(context.to_string()));
    }
    Ok(x)
}

/// 2-norm condition number of a symmetric positive definite matrix.
pub fn spd_condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigenvalues();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for &l in eig.iter() {
        lo = lo.min(l);
        hi = hi.max(l);
    }
    hi / lo.max(1e-300)
}
