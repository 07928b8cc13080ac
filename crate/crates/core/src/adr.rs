//! Diffusion-advection-reaction discretization: boundary conditions are
//! enforced weakly through a nonsymmetric boundary penalty, the advective
//! derivative is reconstructed elementwise from the hybrid unknowns, and
//! face upwinding stabilizes the transport part. Diffusion is piecewise
//! constant and may vanish, so boundary face unknowns are never eliminated.

use crate::assembly::{CondensedSystem, FaceClasses, MonolithicSystem};
use crate::dof::DofVector;
use crate::local::StabVariant;
use crate::mesh::PolytopalMesh;
use crate::poisson::{DiffusionForm, Poisson};
use crate::poly::{gram, spd_solve_matrix};
use crate::{HhoError, Point2, Result, Vector2};
use nalgebra::{DMatrix, DVector};

/// Problem data. The diffusion is one constant per element and must be
/// nonnegative; the velocity is assumed divergence free; the reaction is
/// bounded below by mu0 > 0. The boundary penalty zeta keeps the weak
/// Dirichlet form coercive only for zeta >= 1, so smaller values are
/// rejected.
pub struct AdrData<'a> {
    pub kappa: Vec<f64>,
    pub beta: &'a dyn Fn(Point2) -> Vector2,
    /// Gradients of the two velocity components. Used for the element
    /// Lipschitz modulus when present, otherwise central differences at the
    /// quadrature points stand in.
    pub beta_grad: Option<&'a dyn Fn(Point2) -> (Vector2, Vector2)>,
    pub mu: &'a dyn Fn(Point2) -> f64,
    pub mu0: f64,
    pub zeta: f64,
}

impl<'a> AdrData<'a> {
    pub fn new(
        kappa: Vec<f64>,
        beta: &'a dyn Fn(Point2) -> Vector2,
        mu: &'a dyn Fn(Point2) -> f64,
        mu0: f64,
    ) -> Result<Self> {
        Self::with_zeta(kappa, beta, mu, mu0, 1.0)
    }

    pub fn with_zeta(
        kappa: Vec<f64>,
        beta: &'a dyn Fn(Point2) -> Vector2,
        mu: &'a dyn Fn(Point2) -> f64,
        mu0: f64,
        zeta: f64,
    ) -> Result<Self> {
        if !(zeta >= 1.0) {
            return Err(HhoError::Config(format!(
                "boundary penalty must be at least 1, got {zeta}"
            )));
        }
        if !(mu0 > 0.0) {
            return Err(HhoError::Config(format!(
                "reaction lower bound must be positive, got {mu0}"
            )));
        }
        if kappa.iter().any(|&k| !(k >= 0.0)) {
            return Err(HhoError::Config("diffusion must be nonnegative".into()));
        }
        Ok(Self { kappa, beta, beta_grad: None, mu, mu0, zeta })
    }

    pub fn with_gradient(mut self, g: &'a dyn Fn(Point2) -> (Vector2, Vector2)) -> Self {
        self.beta_grad = Some(g);
        self
    }
}

/// Velocity-dependent element data, fixed once per problem.
struct ElemAdvection {
    /// Advective derivative reconstruction: coefficients of G v in the
    /// element basis, one column per local unknown.
    g: DMatrix<f64>,
    /// beta . n at the face quadrature points, one vector per local face.
    beta_n: Vec<DVector<f64>>,
    /// Reaction values at the volume rule.
    mu_q: Vec<f64>,
    /// sup of |beta| over the element (volume and face sample points).
    beta_sup: f64,
    /// Lipschitz modulus of the velocity over the element.
    lip: f64,
    /// Reference time 1 / max(sup mu, lip).
    tau: f64,
}

pub struct AdrProblem<'m, 'a> {
    pub base: Poisson<'m>,
    pub data: AdrData<'a>,
    adv: Vec<ElemAdvection>,
}

/// Norm parts of one hybrid vector. `flat` combines the diffusive and
/// advective-reactive parts; `sharp` adds the advective derivative term and
/// is the quantity the convergence study tracks.
#[derive(Clone, Copy, Debug)]
pub struct AdrNorms {
    pub kappa_h: f64,
    pub beta_mu_h: f64,
    pub flat: f64,
    pub sharp: f64,
}

#[derive(Clone, Debug)]
pub struct AdrErrorReport {
    pub h: f64,
    /// Face unknowns of the condensed system; boundary faces included.
    pub n_dof: usize,
    pub sharp: f64,
    pub flat: f64,
    pub kappa_h: f64,
    pub beta_mu_h: f64,
    pub pe_min: f64,
    pub pe_max: f64,
}

impl<'m, 'a> AdrProblem<'m, 'a> {
    pub fn new(
        mesh: &'m PolytopalMesh,
        degree: usize,
        variant: StabVariant,
        data: AdrData<'a>,
    ) -> Result<Self> {
        if data.kappa.len() != mesh.n_elements() {
            return Err(HhoError::Config(format!(
                "diffusion values ({}) must match the element count ({})",
                data.kappa.len(),
                mesh.n_elements()
            )));
        }
        let base = Poisson::with_form(mesh, degree, variant, DiffusionForm::Potential)?;
        let adv = (0..mesh.n_elements())
            .map(|e| Self::build_advection(&base, &data, e))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { base, data, adv })
    }

    /// Reconstruction of the advective derivative: G v in P^k matches
    /// -(v_T, beta . grad w) plus the face flux of v_F against every test
    /// polynomial w. Face integrals use the face rules, so a nonpolynomial
    /// velocity is sampled there rather than projected.
    fn build_advection(base: &Poisson<'m>, data: &AdrData<'a>, e: usize) -> Result<ElemAdvection> {
        let ops = base.ops(e);
        let ne = ops.space.elem_dim;
        let n = ops.space.total;
        let nq = ops.equad.points.len();

        let mut bgrad = DMatrix::zeros(nq, ne);
        let mut mu_q = Vec::with_capacity(nq);
        let mut beta_sup = 0.0f64;
        let mut mu_sup = 0.0f64;
        let mut lip = 0.0f64;
        for (q, &x) in ops.equad.points.iter().enumerate() {
            let b = (data.beta)(x);
            beta_sup = beta_sup.max(b.norm());
            let m = (data.mu)(x);
            mu_sup = mu_sup.max(m.abs());
            mu_q.push(m);
            lip = lip.max(Self::lipschitz_sample(data, x, ops.h_t));
            for c in 0..ne {
                bgrad[(q, c)] = b.x * ops.dphi_k.0[(q, c)] + b.y * ops.dphi_k.1[(q, c)];
            }
        }

        let mut rhs = -gram(&bgrad, &ops.phi_k, &ops.equad.weights);
        rhs = rhs.resize_horizontally(n, 0.0);

        let mut beta_n = Vec::with_capacity(ops.fquads.len());
        for i in 0..ops.fquads.len() {
            let fq = &ops.fquads[i];
            let nrm = ops.normals[i];
            let mut bn = DVector::zeros(fq.points.len());
            let mut wbn = Vec::with_capacity(fq.points.len());
            for (q, &x) in fq.points.iter().enumerate() {
                let b = (data.beta)(x);
                beta_sup = beta_sup.max(b.norm());
                bn[q] = b.dot(&nrm);
                wbn.push(fq.weights[q] * bn[q]);
            }
            let phi_f = ops.basis_k.eval_at(&fq.points);
            let blk = gram(&phi_f, &ops.face_psi[i], &wbn);
            let off = ops.space.offsets[1 + i];
            let mut view = rhs.view_mut((0, off), (ne, ops.space.face_dims[i]));
            view += &blk;
            beta_n.push(bn);
        }

        let g = spd_solve_matrix(&ops.mass_k, &rhs, &format!("element {e} advection"))?;
        let tau = 1.0 / mu_sup.max(lip).max(1e-300);
        Ok(ElemAdvection { g, beta_n, mu_q, beta_sup, lip, tau })
    }

    fn lipschitz_sample(data: &AdrData<'a>, x: Point2, h: f64) -> f64 {
        if let Some(grad) = data.beta_grad {
            let (g1, g2) = grad(x);
            return g1.norm().max(g2.norm());
        }
        let d = 1e-6 * h;
        let dx = ((data.beta)(Point2::new(x.x + d, x.y)) - (data.beta)(Point2::new(x.x - d, x.y)))
            / (2.0 * d);
        let dy = ((data.beta)(Point2::new(x.x, x.y + d)) - (data.beta)(Point2::new(x.x, x.y - d)))
            / (2.0 * d);
        let g1 = Vector2::new(dx.x, dy.x);
        let g2 = Vector2::new(dx.y, dy.y);
        g1.norm().max(g2.norm())
    }

    pub fn mesh(&self) -> &'m PolytopalMesh {
        self.base.mesh
    }

    /// Coefficients of the advective derivative of one local vector.
    pub fn advective_derivative(&self, e: usize, vl: &DVector<f64>) -> DVector<f64> {
        &self.adv[e].g * vl
    }

    /// Pure transport part, antisymmetric by construction: the derivative
    /// tested against the element block appears once forward and once with
    /// the arguments swapped.
    pub fn transport_part(&self, e: usize) -> DMatrix<f64> {
        let ops = self.base.ops(e);
        let ne = ops.space.elem_dim;
        let n = ops.space.total;
        let mg = &ops.mass_k * &self.adv[e].g;
        let mut z = DMatrix::zeros(n, n);
        z.view_mut((0, 0), (ne, n)).copy_from(&mg);
        let zt = z.transpose();
        0.5 * (z - zt)
    }

    /// Upwind penalty: face differences weighted by |beta . n|. Positive
    /// semidefinite, and zero on vectors whose face blocks are the element
    /// traces.
    pub fn upwind_part(&self, e: usize) -> DMatrix<f64> {
        let ops = self.base.ops(e);
        let n = ops.space.total;
        let mut s = DMatrix::zeros(n, n);
        for i in 0..ops.fquads.len() {
            let fq = &ops.fquads[i];
            let w: Vec<f64> = fq
                .weights
                .iter()
                .zip(self.adv[e].beta_n[i].iter())
                .map(|(&wq, &bn)| wq * bn.abs())
                .collect();
            let m = gram(&ops.face_psi[i], &ops.face_psi[i], &w);
            s += ops.bdiff[i].transpose() * m * &ops.bdiff[i];
        }
        0.5 * s
    }

    fn reaction_part(&self, e: usize) -> DMatrix<f64> {
        let ops = self.base.ops(e);
        let w: Vec<f64> = ops
            .equad
            .weights
            .iter()
            .zip(self.adv[e].mu_q.iter())
            .map(|(&wq, &m)| wq * m)
            .collect();
        let blk = gram(&ops.phi_k, &ops.phi_k, &w);
        let mut r = DMatrix::zeros(ops.space.total, ops.space.total);
        r.view_mut((0, 0), (ops.space.elem_dim, ops.space.elem_dim)).copy_from(&blk);
        r
    }

    /// Local advective-reactive form: transport, upwinding and reaction.
    /// The extra boundary penalty of the global form is kept separate.
    pub fn advective_reactive_local(&self, e: usize) -> DMatrix<f64> {
        self.transport_part(e) + self.upwind_part(e) + self.reaction_part(e)
    }

    /// Diffusive form with weakly enforced boundary values: the bulk part
    /// scales the base diffusion form by the element constant; on boundary
    /// faces the normal flux of the potential reconstruction couples to the
    /// face unknown with opposite signs on the two slots, so the cross terms
    /// cancel in the quadratic form and only the penalty remains.
    pub fn diffusive_local(&self, e: usize) -> DMatrix<f64> {
        let ops = self.base.ops(e);
        let kt = self.data.kappa[e];
        let n = ops.space.total;
        let mut a = self.base.local_form(e) * kt;
        if kt == 0.0 {
            return a;
        }
        let faces = self.base.mesh.element_faces(e);
        for (i, &f) in faces.iter().enumerate() {
            if !self.base.mesh.is_boundary_face(f) {
                continue;
            }
            let fq = &ops.fquads[i];
            let nrm = ops.normals[i];
            let (gx, gy) = ops.basis_k1.grad_at(&fq.points);
            let pn = (gx * nrm.x + gy * nrm.y) * &ops.potential;
            let c = gram(&ops.face_psi[i], &pn, &fq.weights) * kt;
            let off = ops.space.offsets[1 + i];
            let fd = ops.space.face_dims[i];
            let mut rows = a.view_mut((off, 0), (fd, n));
            rows -= &c;
            let mut cols = a.view_mut((0, off), (n, fd));
            cols += &c.transpose();
            let pen = self.data.zeta * kt / ops.face_lengths[i];
            let mut diag = a.view_mut((off, off), (fd, fd));
            diag += &ops.face_mass[i] * pen;
        }
        a
    }

    /// Boundary part of the global transport form: half the |beta . n| mass
    /// on each boundary face, assigned to the one element that owns it.
    fn boundary_upwind(&self, e: usize) -> DMatrix<f64> {
        let ops = self.base.ops(e);
        let n = ops.space.total;
        let mut s = DMatrix::zeros(n, n);
        let faces = self.base.mesh.element_faces(e);
        for (i, &f) in faces.iter().enumerate() {
            if !self.base.mesh.is_boundary_face(f) {
                continue;
            }
            let fq = &ops.fquads[i];
            let w: Vec<f64> = fq
                .weights
                .iter()
                .zip(self.adv[e].beta_n[i].iter())
                .map(|(&wq, &bn)| 0.5 * wq * bn.abs())
                .collect();
            let m = gram(&ops.face_psi[i], &ops.face_psi[i], &w);
            let off = ops.space.offsets[1 + i];
            let fd = ops.space.face_dims[i];
            let mut diag = s.view_mut((off, off), (fd, fd));
            diag += &m;
        }
        s
    }

    /// Complete local matrix of the global form.
    pub fn local_matrix(&self, e: usize) -> DMatrix<f64> {
        self.diffusive_local(e) + self.advective_reactive_local(e) + self.boundary_upwind(e)
    }

    /// Full bilinear form value by local gathers.
    pub fn bilinear(&self, u: &DofVector, v: &DofVector) -> f64 {
        (0..self.base.mesh.n_elements())
            .map(|e| {
                let ul = self.base.layout.gather(self.base.mesh, e, &u.data);
                let vl = self.base.layout.gather(self.base.mesh, e, &v.data);
                (self.local_matrix(e) * ul).dot(&vl)
            })
            .sum()
    }

    /// Diffusive part alone, weak boundary conditions included.
    pub fn bilinear_diffusive(&self, u: &DofVector, v: &DofVector) -> f64 {
        (0..self.base.mesh.n_elements())
            .map(|e| {
                let ul = self.base.layout.gather(self.base.mesh, e, &u.data);
                let vl = self.base.layout.gather(self.base.mesh, e, &v.data);
                (self.diffusive_local(e) * ul).dot(&vl)
            })
            .sum()
    }

    /// Condensed system of the full problem. Every face stays an unknown;
    /// the element blocks remain invertible because the reaction bounds the
    /// symmetric part from below.
    pub fn assemble(&self, f: &dyn Fn(Point2) -> f64) -> Result<CondensedSystem> {
        let classes = FaceClasses::all_unknown(self.base.mesh.n_faces());
        CondensedSystem::assemble(self.base.mesh, self.base.degree, classes, false, |e| {
            Ok((self.local_matrix(e), self.base.source_rhs(e, f)))
        })
    }

    /// Uncondensed variant, kept as the oracle for the condensation path.
    pub fn assemble_monolithic(&self, f: &dyn Fn(Point2) -> f64) -> Result<MonolithicSystem> {
        let classes = FaceClasses::all_unknown(self.base.mesh.n_faces());
        MonolithicSystem::assemble(self.base.mesh, self.base.degree, classes, false, |e| {
            Ok((self.local_matrix(e), self.base.source_rhs(e, f)))
        })
    }

    /// Diffusion-only solve: the weak Dirichlet counterpart of the strong
    /// Poisson problem.
    pub fn solve_diffusive(&self, f: &dyn Fn(Point2) -> f64) -> Result<DofVector> {
        let classes = FaceClasses::all_unknown(self.base.mesh.n_faces());
        CondensedSystem::assemble(self.base.mesh, self.base.degree, classes, false, |e| {
            Ok((self.diffusive_local(e), self.base.source_rhs(e, f)))
        })?
        .solve(self.base.mesh)
    }

    pub fn solve(&self, f: &dyn Fn(Point2) -> f64) -> Result<DofVector> {
        self.assemble(f)?.solve(self.base.mesh)
    }

    /// Norm parts of a hybrid vector. The advective-reactive part weights
    /// face differences by |beta . n|, element blocks by the inverse
    /// reference time, and boundary faces by half the normal velocity; the
    /// sharp norm adds the advective derivative scaled by h_T over the
    /// element reference velocity wherever the velocity does not vanish.
    pub fn norms(&self, v: &DofVector) -> AdrNorms {
        let mesh = self.base.mesh;
        let mut k2 = 0.0;
        let mut bm2 = 0.0;
        let mut g2 = 0.0;
        for e in 0..mesh.n_elements() {
            let ops = self.base.ops(e);
            let ad = &self.adv[e];
            let vl = self.base.layout.gather(mesh, e, &v.data);
            k2 += self.data.kappa[e] * (self.base.local_form(e) * &vl).dot(&vl);

            let faces = mesh.element_faces(e);
            for (i, &f) in faces.iter().enumerate() {
                let fq = &ops.fquads[i];
                let w: Vec<f64> = fq
                    .weights
                    .iter()
                    .zip(ad.beta_n[i].iter())
                    .map(|(&wq, &bn)| wq * bn.abs())
                    .collect();
                let m = gram(&ops.face_psi[i], &ops.face_psi[i], &w);
                let d = &ops.bdiff[i] * &vl;
                bm2 += 0.5 * (&m * &d).dot(&d);
                if mesh.is_boundary_face(f) {
                    let off = ops.space.offsets[1 + i];
                    let fd = ops.space.face_dims[i];
                    let vf = vl.rows(off, fd).clone_owned();
                    bm2 += 0.5 * (&m * &vf).dot(&vf);
                    k2 += self.data.kappa[e] / ops.face_lengths[i]
                        * (&ops.face_mass[i] * &vf).dot(&vf);
                }
            }

            let vt = vl.rows(0, ops.space.elem_dim).clone_owned();
            bm2 += (&ops.mass_k * &vt).dot(&vt) / ad.tau;

            if ad.beta_sup > 0.0 {
                let gv = &ad.g * &vl;
                g2 += ops.h_t / ad.beta_sup * (&ops.mass_k * &gv).dot(&gv);
            }
        }
        let flat2 = k2 + bm2;
        AdrNorms {
            kappa_h: k2.sqrt(),
            beta_mu_h: bm2.sqrt(),
            flat: flat2.sqrt(),
            sharp: (flat2 + g2).sqrt(),
        }
    }

    /// Local Peclet numbers: face diameter times the normal velocity bound
    /// over the smaller of the diffusion constants on either side. Infinite
    /// as soon as one face sees vanishing diffusion.
    pub fn peclet(&self) -> Vec<f64> {
        let mesh = self.base.mesh;
        (0..mesh.n_elements())
            .map(|e| {
                let mut pe = 0.0f64;
                let faces = mesh.element_faces(e);
                for (i, &f) in faces.iter().enumerate() {
                    let (e1, e2) = mesh.face_elements(f);
                    let mut kf = self.data.kappa[e1];
                    if let Some(e2) = e2 {
                        kf = kf.min(self.data.kappa[e2]);
                    }
                    let bn_max = self.adv[e].beta_n[i].amax();
                    if kf == 0.0 {
                        pe = f64::INFINITY;
                    } else {
                        pe = pe.max(mesh.face_length(f) * bn_max / kf);
                    }
                }
                pe
            })
            .collect()
    }

    /// Elementwise resolution check: the mesh resolves the velocity scale
    /// when h_T max(lip, mu0) stays below the element reference velocity.
    pub fn stability_condition(&self) -> Vec<bool> {
        let mesh = self.base.mesh;
        (0..mesh.n_elements())
            .map(|e| {
                mesh.element_diameter(e) * self.adv[e].lip.max(self.data.mu0)
                    <= self.adv[e].beta_sup
            })
            .collect()
    }

    /// Distance to the interpolate of the exact solution, measured in the
    /// problem norms, with the Peclet range attached.
    pub fn errors(&self, u: &DofVector, exact: &dyn Fn(Point2) -> f64) -> Result<AdrErrorReport> {
        let mut d = self.base.interpolate(exact, false)?;
        d.data -= &u.data;
        let norms = self.norms(&d);
        let pe = self.peclet();
        let pe_min = pe.iter().copied().fold(f64::INFINITY, f64::min);
        let pe_max = pe.iter().copied().fold(0.0, f64::max);
        Ok(AdrErrorReport {
            h: self.base.mesh.h(),
            n_dof: self.base.mesh.n_faces() * self.base.layout.face_dim,
            sharp: norms.sharp,
            flat: norms.flat,
            kappa_h: norms.kappa_h,
            beta_mu_h: norms.beta_mu_h,
            pe_min,
            pe_max,
        })
    }
}
