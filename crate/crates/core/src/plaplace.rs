//! The p-Laplace model problem: power-law flux through the gradient
//! reconstruction, power-law face stabilization, damped Newton iteration
//! over the hybrid unknowns, and W^{1,p}-type error reporting.

use crate::assembly::{CondensedSystem, FaceClass, FaceClasses, MonolithicSystem};
use crate::dof::DofVector;
use crate::local::{power_law, StabVariant};
use crate::norms::one_p_seminorm;
use crate::poisson::{DiffusionForm, Poisson};
use crate::poly::{gram, l2_project_face};
use crate::{HhoError, Point2, Result, Vector2};
use nalgebra::{DMatrix, DVector, Matrix2};

/// Power-law flux |tau|^(p-2) tau, with |tau| replaced by
/// (|tau|^2 + eps^2)^(1/2) when regularized. Extended by zero at the origin
/// where the bare power is singular.
pub fn sigma(tau: Vector2, p: f64, eps: f64) -> Vector2 {
    let t2 = tau.norm_squared();
    if eps == 0.0 && t2 <= 1e-28 {
        return Vector2::zeros();
    }
    tau * (t2 + eps * eps).powf(0.5 * p - 1.0)
}

/// Derivative of the flux: a I + b tau tau^T with a = (|tau|^2+eps^2)^(p/2-1)
/// and b = (p-2)(|tau|^2+eps^2)^(p/2-2). Symmetric, positive definite for
/// p > 1 away from the origin.
pub fn dsigma(tau: Vector2, p: f64, eps: f64) -> Matrix2<f64> {
    let t2 = tau.norm_squared();
    if eps == 0.0 && t2 <= 1e-28 {
        // the zero extension of sigma; smooth only at p = 2
        return if p == 2.0 { Matrix2::identity() } else { Matrix2::zeros() };
    }
    let r2 = t2 + eps * eps;
    let a = r2.powf(0.5 * p - 1.0);
    let b = (p - 2.0) * r2.powf(0.5 * p - 2.0);
    Matrix2::new(
        a + b * tau.x * tau.x,
        b * tau.x * tau.y,
        b * tau.x * tau.y,
        a + b * tau.y * tau.y,
    )
}

/// Exponent and solver knobs for one p-Laplace run.
#[derive(Clone, Debug)]
pub struct PlapConfig {
    pub p: f64,
    /// Flux regularization during Newton; a final residual check runs
    /// without it.
    pub eps: f64,
    /// Convergence once the residual dual norm falls below
    /// tol_factor * (1 + ||f||_{p'}).
    pub tol_factor: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Start from the p = 2 solve; otherwise from the boundary data alone.
    pub init_p2: bool,
}

impl PlapConfig {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 1.0) {
            return Err(HhoError::Config(format!(
                "p-Laplace exponent must exceed 1, got {p}"
            )));
        }
        Ok(Self {
            p,
            // the flux is non-differentiable at vanishing gradients for
            // p < 2; above, the bare law is fine
            eps: if p < 2.0 { 1e-10 } else { 0.0 },
            tol_factor: 1e-9,
            max_iter: 60,
            max_halvings: 30,
            init_p2: true,
        })
    }

    pub fn dual_exponent(&self) -> f64 {
        self.p / (self.p - 1.0)
    }
}

/// Outcome of a converged Newton run.
pub struct NewtonResult {
    pub u: DofVector,
    /// Residual dual norm at every iterate, the initial guess first.
    pub dual_history: Vec<f64>,
    /// Euclidean residual norms the line search monitored; never increasing
    /// along accepted steps.
    pub norm_history: Vec<f64>,
    /// Measured constant of the a priori bound:
    /// ||u||_{1,p,h} / ||f||_{p'}^{1/(p-1)}.
    pub apriori_constant: f64,
}

impl NewtonResult {
    pub fn iterations(&self) -> usize {
        self.dual_history.len() - 1
    }
}

pub struct PLaplace<'m> {
    /// Operator kit and the p = 2 companion problem in gradient form.
    pub linear: Poisson<'m>,
    pub config: PlapConfig,
    /// Per element: values of both components of the gradient reconstruction
    /// of every local basis vector at the volume quadrature points.
    gmats: Vec<(DMatrix<f64>, DMatrix<f64>)>,
}

impl<'m> PLaplace<'m> {
    pub fn new(
        mesh: &'m crate::mesh::PolytopalMesh,
        degree: usize,
        config: PlapConfig,
    ) -> Result<Self> {
        let linear = Poisson::with_form(mesh, degree, StabVariant::Hho, DiffusionForm::Gradient)?;
        let gmats = (0..mesh.n_elements())
            .map(|e| {
                let ops = linear.ops(e);
                (&ops.phi_k * &ops.grad_x, &ops.phi_k * &ops.grad_y)
            })
            .collect();
        Ok(Self { linear, config, gmats })
    }

    /// Boundary faces pinned to the trace projections of g.
    pub fn boundary_classes(&self, g: &dyn Fn(Point2) -> f64) -> Result<FaceClasses> {
        let mesh = self.linear.mesh;
        let mut classes = FaceClasses::all_unknown(mesh.n_faces());
        for e in 0..mesh.n_elements() {
            let ops = self.linear.ops(e);
            for (i, &f) in mesh.element_faces(e).iter().enumerate() {
                if mesh.is_boundary_face(f) {
                    let coeff = l2_project_face(g, &ops.face_bases[i], &ops.fquads[i])?;
                    classes.set(f, FaceClass::Fixed(coeff));
                }
            }
        }
        Ok(classes)
    }

    /// a_T'(u; .) - (f, .) over the local basis: the power-law volume term
    /// through the gradient reconstruction plus the power-law stabilization,
    /// minus the source.
    pub fn local_residual(
        &self,
        e: usize,
        ul: &DVector<f64>,
        f: &dyn Fn(Point2) -> f64,
    ) -> DVector<f64> {
        self.local_residual_eps(e, ul, f, self.config.eps)
    }

    fn local_residual_eps(
        &self,
        e: usize,
        ul: &DVector<f64>,
        f: &dyn Fn(Point2) -> f64,
        eps: f64,
    ) -> DVector<f64> {
        let ops = self.linear.ops(e);
        let (gx, gy) = &self.gmats[e];
        let p = self.config.p;
        let gxu = gx * ul;
        let gyu = gy * ul;
        let mut r = -self.linear.source_rhs(e, f);
        for (q, &w) in ops.equad.weights.iter().enumerate() {
            let s = sigma(Vector2::new(gxu[q], gyu[q]), p, eps) * w;
            for c in 0..r.nrows() {
                r[c] += s.x * gx[(q, c)] + s.y * gy[(q, c)];
            }
        }
        for i in 0..ops.res_f.len() {
            let wf = ops.face_lengths[i].powf(1.0 - p);
            let psi = &ops.face_psi[i];
            let ru = psi * (&ops.res_f[i] * ul);
            let mut face_acc = DVector::zeros(psi.ncols());
            for (q, &wq) in ops.fquads[i].weights.iter().enumerate() {
                let d = wf * wq * power_law(ru[q], p, eps);
                for a in 0..psi.ncols() {
                    face_acc[a] += d * psi[(q, a)];
                }
            }
            r += ops.res_f[i].transpose() * face_acc;
        }
        r
    }

    /// Frechet derivative of the residual at u, symmetric.
    pub fn local_jacobian(&self, e: usize, ul: &DVector<f64>) -> DMatrix<f64> {
        let ops = self.linear.ops(e);
        let (gx, gy) = &self.gmats[e];
        let (p, eps) = (self.config.p, self.config.eps);
        let gxu = gx * ul;
        let gyu = gy * ul;
        let nq = ops.equad.weights.len();
        let mut w11 = vec![0.0; nq];
        let mut w12 = vec![0.0; nq];
        let mut w22 = vec![0.0; nq];
        for (q, &w) in ops.equad.weights.iter().enumerate() {
            let d = dsigma(Vector2::new(gxu[q], gyu[q]), p, eps);
            w11[q] = w * d[(0, 0)];
            w12[q] = w * d[(0, 1)];
            w22[q] = w * d[(1, 1)];
        }
        let mut j = gram(gx, gx, &w11) + gram(gy, gy, &w22);
        j += gram(gx, gy, &w12) + gram(gy, gx, &w12);
        j += ops.plap_stab_jacobian(ul, p, eps);
        j
    }

    /// Residual functional over the full dof layout.
    pub fn residual_full(&self, u: &DofVector, f: &dyn Fn(Point2) -> f64) -> DVector<f64> {
        self.residual_full_eps(u, f, self.config.eps)
    }

    fn residual_full_eps(
        &self,
        u: &DofVector,
        f: &dyn Fn(Point2) -> f64,
        eps: f64,
    ) -> DVector<f64> {
        let mesh = self.linear.mesh;
        let layout = &self.linear.layout;
        let mut out = DVector::zeros(layout.total());
        for e in 0..mesh.n_elements() {
            let ul = layout.gather(mesh, e, &u.data);
            let r = self.local_residual_eps(e, &ul, f, eps);
            layout.scatter_add(mesh, e, &r, &mut out);
        }
        out
    }

    /// L^{p'} norm of the source, the scale of the convergence tolerance.
    pub fn source_norm(&self, f: &dyn Fn(Point2) -> f64) -> f64 {
        let pd = self.config.dual_exponent();
        let mut acc = 0.0;
        for e in 0..self.linear.mesh.n_elements() {
            let ops = self.linear.ops(e);
            acc += ops.equad.integrate(|x| f(x).abs().powf(pd));
        }
        acc.powf(1.0 / pd)
    }

    /// Damped Newton iteration. Boundary blocks hold the trace projections
    /// of g throughout; each step solves the symmetric Jacobian system for a
    /// correction that vanishes on the boundary and backtracks until the
    /// euclidean residual norm decreases. Convergence is declared on the
    /// dual norm of the reduced residual, measured against the assembled
    /// discrete H^1 Gram of the unknowns.
    pub fn solve(
        &self,
        f: &dyn Fn(Point2) -> f64,
        g: &dyn Fn(Point2) -> f64,
    ) -> Result<NewtonResult> {
        let mesh = self.linear.mesh;
        let degree = self.linear.degree;
        let classes = self.boundary_classes(g)?;
        let zero = FaceClasses::dirichlet_zero(mesh, degree);

        // assembled once: dual norms and the unknown-index map for reducing
        // residuals (corrections vanish on the boundary)
        let gram_sys = MonolithicSystem::assemble(mesh, degree, zero.clone(), true, |e| {
            let ops = self.linear.ops(e);
            Ok((ops.h1_gram(), DVector::zeros(ops.space.total)))
        })?;

        let mut u = if self.config.init_p2 {
            CondensedSystem::assemble(mesh, degree, classes, true, |e| {
                Ok((self.linear.local_form(e), self.linear.source_rhs(e, f)))
            })?
            .solve(mesh)?
        } else {
            // boundary data alone, zero in the interior
            MonolithicSystem::assemble(mesh, degree, classes, true, |e| {
                let ops = self.linear.ops(e);
                Ok((
                    DMatrix::identity(ops.space.total, ops.space.total),
                    DVector::zeros(ops.space.total),
                ))
            })?
            .expand(&DVector::zeros(gram_sys.n_unknowns))
        };

        if self.config.init_p2 && self.config.p != 2.0 {
            // amplitude correction on top of the linear init: the power-law
            // response of s.u scales like s^(p-1), so match it to the source
            // in least squares and rescale every non-boundary block
            let layout = &self.linear.layout;
            let mut b_full = DVector::zeros(layout.total());
            for e in 0..mesh.n_elements() {
                let be = self.linear.source_rhs(e, f);
                layout.scatter_add(mesh, e, &be, &mut b_full);
            }
            let b_red = gram_sys.reduce(&b_full);
            let r_red = gram_sys.reduce(&self.residual_full(&u, f));
            let n_red = &r_red + &b_red;
            let ratio = n_red.dot(&b_red) / n_red.norm_squared().max(1e-300);
            if ratio.is_finite() && ratio > 0.0 {
                let s = ratio.powf(1.0 / (self.config.p - 1.0));
                let mut scaled = u.clone();
                for e in 0..mesh.n_elements() {
                    for i in layout.elem_block(e) {
                        scaled.data[i] *= s;
                    }
                }
                for fc in 0..mesh.n_faces() {
                    if !mesh.is_boundary_face(fc) {
                        for i in layout.face_block(fc) {
                            scaled.data[i] *= s;
                        }
                    }
                }
                // keep the rescale only when it helps
                let rs = gram_sys.reduce(&self.residual_full(&scaled, f));
                if rs.norm() < r_red.norm() {
                    u = scaled;
                }
            }
        }

        let fnorm = self.source_norm(f);
        let tol = self.config.tol_factor * (1.0 + fnorm);
        let mut dual_history = Vec::new();
        let mut norm_history = Vec::new();

        for it in 0..=self.config.max_iter {
            let r = gram_sys.reduce(&self.residual_full(&u, f));
            let rnorm = r.norm();
            let dual = gram_sys.dual_norm(&r)?;
            dual_history.push(dual);
            norm_history.push(rnorm);

            if dual <= tol {
                if self.config.eps > 0.0 {
                    // the regularization must not have moved the solution:
                    // re-check against the bare flux
                    let rb = gram_sys.reduce(&self.residual_full_eps(&u, f, 0.0));
                    let db = gram_sys.dual_norm(&rb)?;
                    if db > 10.0 * tol {
                        return Err(HhoError::Nonconvergence(format!(
                            "regularized iterate fails the bare residual check: \
                             {db:.3e} against tolerance {tol:.3e}"
                        )));
                    }
                }
                let (onep, _) = one_p_seminorm(mesh, &self.linear.sub, &u, self.config.p)?;
                let apriori_constant =
                    onep / fnorm.powf(1.0 / (self.config.p - 1.0)).max(1e-300);
                return Ok(NewtonResult {
                    u,
                    dual_history,
                    norm_history,
                    apriori_constant,
                });
            }
            if it == self.config.max_iter {
                break;
            }

            let mut locals: Vec<Option<(DMatrix<f64>, DVector<f64>)>> = (0..mesh.n_elements())
                .map(|e| {
                    let ul = self.linear.layout.gather(mesh, e, &u.data);
                    Some((self.local_jacobian(e, &ul), -self.local_residual(e, &ul, f)))
                })
                .collect();
            let jac = MonolithicSystem::assemble(mesh, degree, zero.clone(), true, |e| {
                Ok(locals[e].take().expect("element visited once"))
            })?;
            let delta = jac.solve()?;

            let mut accepted = false;
            let mut t = 1.0;
            for _ in 0..=self.config.max_halvings {
                let mut trial = u.clone();
                trial.data.axpy(t, &delta.data, 1.0);
                let rt = gram_sys.reduce(&self.residual_full(&trial, f));
                if rt.norm() < rnorm {
                    u = trial;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                return Err(HhoError::Nonconvergence(format!(
                    "line search stalled at residual {rnorm:.3e}; dual history {dual_history:?}"
                )));
            }
        }
        Err(HhoError::Nonconvergence(format!(
            "no convergence after {} iterations; dual history {dual_history:?}",
            self.config.max_iter
        )))
    }

    /// Error norms against a manufactured solution: the discrete W^{1,p}
    /// distance to the interpolate, the L^p broken gradient error of the
    /// reconstruction, and the power-law stabilization seminorm.
    pub fn errors(
        &self,
        u: &DofVector,
        exact: &dyn Fn(Point2) -> f64,
        grad_exact: &dyn Fn(Point2) -> Vector2,
    ) -> Result<PlapErrorReport> {
        let mesh = self.linear.mesh;
        let p = self.config.p;
        let iu = self.linear.interpolate(exact, false)?;
        let mut diff = iu;
        diff.data -= &u.data;
        let (onep, _) = one_p_seminorm(mesh, &self.linear.sub, &diff, p)?;

        let mut grad_acc = 0.0;
        let mut stab_acc = 0.0;
        for e in 0..mesh.n_elements() {
            let ops = self.linear.ops(e);
            let ul = self.linear.layout.gather(mesh, e, &u.data);
            let pot = &ops.potential * &ul;
            for (q, &x) in ops.equad.points.iter().enumerate() {
                let d = ops.basis_k1.gradient(&pot, x) - grad_exact(x);
                grad_acc += ops.equad.weights[q] * d.norm().powf(p);
            }
            stab_acc += ops.plap_stab_value(&ul, &ul, p, 0.0).max(0.0);
        }

        Ok(PlapErrorReport {
            h: mesh.h(),
            n_dof: mesh.n_interior_faces() * self.linear.layout.face_dim,
            onep,
            lp_grad: grad_acc.powf(1.0 / p),
            stab: stab_acc.powf(1.0 / p),
        })
    }
}

#[derive(Clone, Debug)]
pub struct PlapErrorReport {
    pub h: f64,
    pub n_dof: usize,
    /// ||I_h u - u_h||_{1,p,h}
    pub onep: f64,
    /// ||grad_h(p_h u_h - u)||_{L^p}
    pub lp_grad: f64,
    /// |u_h|_{s,h}, p-th root of the summed stabilization
    pub stab: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, MeshKind, Rect};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn sinsin(x: Point2) -> f64 {
        (PI * x.x).sin() * (PI * x.y).sin()
    }
    fn sinsin_rhs(x: Point2) -> f64 {
        2.0 * PI * PI * sinsin(x)
    }
    fn sinsin_grad(x: Point2) -> Vector2 {
        Vector2::new(
            PI * (PI * x.x).cos() * (PI * x.y).sin(),
            PI * (PI * x.x).sin() * (PI * x.y).cos(),
        )
    }

    fn bench_exact(x: Point2) -> f64 {
        (x.x + PI * x.y).exp()
    }
    fn bench_grad(x: Point2) -> Vector2 {
        let u = bench_exact(x);
        Vector2::new(u, PI * u)
    }
    // f = -div(sigma(grad u)) for u = exp(x1 + pi x2)
    fn bench_rhs(p: f64) -> impl Fn(Point2) -> f64 {
        move |x: Point2| {
            let c = (1.0 + PI * PI).powf(0.5 * p);
            -(p - 1.0) * c * ((p - 1.0) * (x.x + PI * x.y)).exp()
        }
    }

    #[test]
    fn config_validates_the_exponent() {
        assert!(PlapConfig::new(1.0).is_err());
        assert!(PlapConfig::new(0.5).is_err());
        let c = PlapConfig::new(1.75).unwrap();
        assert!((1.0 / c.p + 1.0 / c.dual_exponent() - 1.0).abs() < 1e-15);
        assert!(c.eps > 0.0);
        assert_eq!(PlapConfig::new(4.0).unwrap().eps, 0.0);
    }

    #[test]
    fn flux_law_hand_values() {
        // p = 2 is the identity
        let t = Vector2::new(0.3, -1.2);
        assert!((sigma(t, 2.0, 0.0) - t).norm() < 1e-15);
        assert!((dsigma(t, 2.0, 0.0) - Matrix2::identity()).norm() < 1e-15);
        assert_eq!(sigma(Vector2::zeros(), 1.5, 0.0), Vector2::zeros());
        // p = 4 at (1, 0): sigma = (1, 0), dsigma = diag(3, 1)
        let e1 = Vector2::new(1.0, 0.0);
        assert!((sigma(e1, 4.0, 0.0) - e1).norm() < 1e-15);
        let d = dsigma(e1, 4.0, 0.0);
        assert!((d - Matrix2::new(3.0, 0.0, 0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn flux_derivative_matches_finite_differences() {
        let mut rng = StdRng::seed_from_u64(42);
        let eps = 1e-8;
        for &p in &[1.75, 4.0] {
            for _ in 0..100 {
                let t = Vector2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                let d = dsigma(t, p, eps);
                assert!((d[(0, 1)] - d[(1, 0)]).abs() < 1e-14, "symmetry");
                let h = 1e-6;
                for (dir, col) in [(Vector2::new(h, 0.0), 0), (Vector2::new(0.0, h), 1)] {
                    let fd = (sigma(t + dir, p, eps) - sigma(t - dir, p, eps)) / (2.0 * h);
                    let exact = Vector2::new(d[(0, col)], d[(1, col)]);
                    let rel = (fd - exact).norm() / exact.norm().max(1e-12);
                    assert!(rel < 1e-6, "p={p} tau={t:?}: fd off by {rel:.2e}");
                }
            }
        }
    }

    #[test]
    fn zero_data_gives_zero_residual() {
        let mesh = generate_mesh(MeshKind::Triangular, 2, Rect::UNIT).unwrap();
        let plap = PLaplace::new(&mesh, 1, PlapConfig::new(3.0).unwrap()).unwrap();
        let u = DofVector::zeros(&plap.linear.layout, true);
        let r = plap.residual_full(&u, &|_| 0.0);
        assert_eq!(r.amax(), 0.0);
    }

    #[test]
    fn jacobian_matches_directional_differences() {
        let mesh = generate_mesh(MeshKind::Triangular, 2, Rect::UNIT).unwrap();
        for &p in &[1.75, 3.0] {
            let mut cfg = PlapConfig::new(p).unwrap();
            // keep the difference quotients well inside the smooth region
            cfg.eps = 1e-6;
            let plap = PLaplace::new(&mesh, 1, cfg).unwrap();
            let layout = &plap.linear.layout;
            let mut rng = StdRng::seed_from_u64(7);
            let mut u = DofVector::zeros(layout, false);
            for v in u.data.iter_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            for e in 0..mesh.n_elements() {
                let ul = layout.gather(&mesh, e, &u.data);
                let j = plap.local_jacobian(e, &ul);
                assert!((&j - &j.transpose()).amax() <= 1e-12 * j.amax(), "symmetry");
                let mut d = DVector::zeros(ul.nrows());
                for v in d.iter_mut() {
                    *v = rng.random_range(-1.0..1.0);
                }
                let h = 1e-7;
                let rp = plap.local_residual(e, &(&ul + h * &d), &|_| 0.0);
                let rm = plap.local_residual(e, &(&ul - h * &d), &|_| 0.0);
                let fd = (rp - rm) / (2.0 * h);
                let jd = &j * &d;
                let rel = (&fd - &jd).norm() / jd.norm().max(1e-12);
                assert!(rel < 1e-6, "p={p} e={e}: jacobian off by {rel:.2e}");
            }
        }
    }

    #[test]
    fn quadratic_case_needs_one_newton_step() {
        let mesh = generate_mesh(MeshKind::Triangular, 4, Rect::UNIT).unwrap();
        let mut cfg = PlapConfig::new(2.0).unwrap();
        cfg.init_p2 = false;
        let plap = PLaplace::new(&mesh, 1, cfg).unwrap();
        let res = plap.solve(&sinsin_rhs, &|_| 0.0).unwrap();
        assert_eq!(res.iterations(), 1, "history {:?}", res.dual_history);

        // and the answer is the linear gradient-form solve
        let lin = Poisson::with_form(&mesh, 1, StabVariant::Hho, DiffusionForm::Gradient).unwrap();
        let w = lin.solve(&sinsin_rhs).unwrap();
        let scale = w.data.amax();
        assert!((&res.u.data - &w.data).amax() <= 1e-8 * scale);

        // error norms agree with the linear module's on the shared solution
        let plap_rep = plap.errors(&w, &sinsin, &sinsin_grad).unwrap();
        let lin_rep = lin.compute_errors(&w, &sinsin, &sinsin_grad).unwrap();
        assert!((plap_rep.lp_grad - lin_rep.broken_grad).abs() < 1e-9);
        assert!((plap_rep.stab - lin_rep.stab_semi).abs() < 1e-9);
    }

    #[test]
    fn interpolate_has_zero_discrete_error() {
        let mesh = generate_mesh(MeshKind::Triangular, 2, Rect::UNIT).unwrap();
        let plap = PLaplace::new(&mesh, 1, PlapConfig::new(1.75).unwrap()).unwrap();
        let iu = plap.linear.interpolate(&bench_exact, false).unwrap();
        let rep = plap.errors(&iu, &bench_exact, &bench_grad).unwrap();
        assert_eq!(rep.onep, 0.0);
    }

    #[test]
    fn solutions_scale_with_the_source_homogeneity() {
        // -div(|grad u|^{p-2} grad u) is (p-1)-homogeneous: scaling f by
        // lambda scales u by lambda^{1/(p-1)}
        let mesh = generate_mesh(MeshKind::Triangular, 4, Rect::UNIT).unwrap();
        let p = 3.0;
        let mut cfg = PlapConfig::new(p).unwrap();
        cfg.tol_factor = 1e-12;
        let plap = PLaplace::new(&mesh, 1, cfg).unwrap();
        let lambda = 16.0;
        let u1 = plap.solve(&sinsin_rhs, &|_| 0.0).unwrap().u;
        let u2 = plap.solve(&|x| lambda * sinsin_rhs(x), &|_| 0.0).unwrap().u;
        let scale = lambda.powf(1.0 / (p - 1.0));
        let rel = (&u2.data - scale * &u1.data).amax() / (scale * u1.data.amax());
        assert!(rel < 1e-8, "homogeneity off by {rel:.2e}");
    }

    #[test]
    fn newton_residuals_never_increase_and_bound_is_reported() {
        let mesh = generate_mesh(MeshKind::Triangular, 4, Rect::UNIT).unwrap();
        for &p in &[1.75, 4.0] {
            let plap = PLaplace::new(&mesh, 1, PlapConfig::new(p).unwrap()).unwrap();
            let res = plap.solve(&bench_rhs(p), &bench_exact).unwrap();
            for w in res.norm_history.windows(2) {
                assert!(w[1] <= w[0], "p={p}: residual grew {:?}", res.norm_history);
            }
            assert!(res.apriori_constant.is_finite() && res.apriori_constant > 0.0);
        }
    }

    #[test]
    fn shear_thinning_benchmark_rate() {
        // predicted order (k+1)(p-1) for p < 2
        let p = 1.75;
        for k in 0..2usize {
            let mut errs = Vec::new();
            for n in [4usize, 8, 16] {
                let mesh = generate_mesh(MeshKind::Triangular, n, Rect::UNIT).unwrap();
                let plap = PLaplace::new(&mesh, k, PlapConfig::new(p).unwrap()).unwrap();
                let res = plap.solve(&bench_rhs(p), &bench_exact).unwrap();
                assert!(res.iterations() <= 25, "k={k} n={n}: {} iterations", res.iterations());
                let rep = plap.errors(&res.u, &bench_exact, &bench_grad).unwrap();
                errs.push(rep.onep);
            }
            let eoc = (errs[1] / errs[2]).log2();
            let target = (k as f64 + 1.0) * (p - 1.0);
            assert!(
                (eoc - target).abs() < 0.25,
                "k={k}: eoc {eoc:.2}, predicted {target}, errors {errs:?}"
            );
        }
    }

    #[test]
    fn shear_thickening_benchmark_beats_the_asymptotic_rate() {
        // for p = 4 the predicted (k+1)/(p-1) is a one-sided floor, checked
        // with a small pre-asymptotic allowance
        let p = 4.0;
        let k = 1usize;
        let mut errs = Vec::new();
        for n in [4usize, 8, 16] {
            let mesh = generate_mesh(MeshKind::Triangular, n, Rect::UNIT).unwrap();
            let plap = PLaplace::new(&mesh, k, PlapConfig::new(p).unwrap()).unwrap();
            let res = plap.solve(&bench_rhs(p), &bench_exact).unwrap();
            assert!(res.iterations() <= 25, "n={n}: {} iterations", res.iterations());
            let rep = plap.errors(&res.u, &bench_exact, &bench_grad).unwrap();
            errs.push(rep.onep);
        }
        let eoc = (errs[1] / errs[2]).log2();
        let floor = (k as f64 + 1.0) / (p - 1.0) - 0.1;
        assert!(eoc >= floor, "eoc {eoc:.2} below {floor:.2}, errors {errs:?}");
    }
}
