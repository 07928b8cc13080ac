//! Local operator kit on one element: reduction of functions onto hybrid
//! unknowns, potential reconstruction one degree above, vector gradient
//! reconstruction, the residual operators behind both stabilizations, and
//! the boundary residual that backs equilibrated fluxes.
//!
//! Everything is a dense matrix acting on the element's local coefficient
//! vector (element block first, then face blocks). Matrices are built once
//! per element and reused by the assemblers; all local solves go through the
//! gated factorizations so an ill-conditioned element fails loudly.

use crate::basis::{dim_pk, ElementBasis, FaceBasis};
use crate::dof::{DofLayout, DofVector, LocalDofSpace};
use crate::mesh::{PolytopalMesh, SimplicialSubmesh};
use crate::poly::{gram, l2_project_element, l2_project_face, lu_solve_matrix, spd_solve_matrix};
use crate::quad::{face_quadrature, triangles_quadrature, ElemQuad, FaceQuad};
use crate::{Result, Vector2};
use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StabVariant {
    /// Face penalties on the difference of the two residuals.
    Hho,
    /// Volume penalty on the element residual plus face penalties.
    Vem,
}

pub fn element_basis(mesh: &PolytopalMesh, e: usize, degree: usize) -> ElementBasis {
    ElementBasis::new(mesh.element_centroid(e), mesh.element_diameter(e), degree)
}

pub fn face_basis(mesh: &PolytopalMesh, f: usize, degree: usize) -> FaceBasis {
    let (a, b) = mesh.face_endpoints(f);
    FaceBasis::new(a, b, degree)
}

/// Default quadrature exactness: polynomial Gram integrands need 2(k+1);
/// the extra margin covers source terms and error integrands of the model
/// problems without a second rule.
pub fn default_exactness(k: usize) -> usize {
    2 * k + 6
}

pub struct LocalOps {
    pub elem: usize,
    pub degree: usize,
    pub space: LocalDofSpace,
    pub area: f64,
    pub h_t: f64,
    pub face_lengths: Vec<f64>,
    pub normals: Vec<Vector2>,

    pub basis_k: ElementBasis,
    pub basis_k1: ElementBasis,
    pub face_bases: Vec<FaceBasis>,
    pub equad: ElemQuad,
    pub fquads: Vec<FaceQuad>,

    /// Element basis values at the volume rule, one row per point.
    pub phi_k: DMatrix<f64>,
    pub dphi_k: (DMatrix<f64>, DMatrix<f64>),
    pub phi_k1: DMatrix<f64>,
    /// Face basis values at each face rule.
    pub face_psi: Vec<DMatrix<f64>>,

    pub mass_k: DMatrix<f64>,
    pub mass_k1: DMatrix<f64>,
    pub stiff_k: DMatrix<f64>,
    pub stiff_k1: DMatrix<f64>,
    pub face_mass: Vec<DMatrix<f64>>,

    /// Potential reconstruction, dim P^{k+1} rows.
    pub potential: DMatrix<f64>,
    /// Components of the gradient reconstruction, dim P^k rows each.
    pub grad_x: DMatrix<f64>,
    pub grad_y: DMatrix<f64>,
    /// Element residual: projection of the reconstruction minus the element
    /// block, dim P^k rows.
    pub delta_t: DMatrix<f64>,
    /// Face residuals: projected reconstruction trace minus the face block.
    pub delta_f: Vec<DMatrix<f64>>,
    /// Trace projection of element polynomials onto each face basis (exact
    /// for straight faces).
    pub trace_f: Vec<DMatrix<f64>>,
    /// Boundary difference: face block minus element trace, per face.
    pub bdiff: Vec<DMatrix<f64>>,
    /// Stabilization residual per face: delta_f minus the trace of delta_t.
    pub res_f: Vec<DMatrix<f64>>,
}

impl LocalOps {
    pub fn build(
        mesh: &PolytopalMesh,
        sub: &SimplicialSubmesh,
        e: usize,
        degree: usize,
        exactness: usize,
    ) -> Result<Self> {
        let layout = DofLayout::new(mesh, degree);
        let space = layout.local_space(mesh, e);
        let nk = space.elem_dim;
        let n1 = dim_pk(degree + 1);
        let fd = degree + 1;
        let nf = space.n_faces();
        let total = space.total;

        let basis_k = element_basis(mesh, e, degree);
        let basis_k1 = element_basis(mesh, e, degree + 1);
        let tris: Vec<_> = sub.elem_tris[e].iter().map(|&t| sub.tri_corners(t)).collect();
        let equad = triangles_quadrature(&tris, exactness)?;

        let faces = mesh.element_faces(e).to_vec();
        let mut face_bases = Vec::with_capacity(nf);
        let mut fquads = Vec::with_capacity(nf);
        let mut face_lengths = Vec::with_capacity(nf);
        let mut normals = Vec::with_capacity(nf);
        for (i, &f) in faces.iter().enumerate() {
            let (a, b) = mesh.face_endpoints(f);
            face_bases.push(FaceBasis::new(a, b, degree));
            fquads.push(face_quadrature(a, b, exactness)?);
            face_lengths.push(mesh.face_length(f));
            normals.push(mesh.normal(e, i));
        }

        let phi_k = basis_k.eval_at(&equad.points);
        let dphi_k = basis_k.grad_at(&equad.points);
        let phi_k1 = basis_k1.eval_at(&equad.points);
        let dphi_k1 = basis_k1.grad_at(&equad.points);

        let w = &equad.weights;
        let mass_k = gram(&phi_k, &phi_k, w);
        let mass_k1 = gram(&phi_k1, &phi_k1, w);
        let stiff_k = gram(&dphi_k.0, &dphi_k.0, w) + gram(&dphi_k.1, &dphi_k.1, w);
        let stiff_k1 = gram(&dphi_k1.0, &dphi_k1.0, w) + gram(&dphi_k1.1, &dphi_k1.1, w);
        // mixed volume Gram between the two element bases
        let mix_k_k1 = gram(&phi_k, &phi_k1, w);

        let mut face_psi = Vec::with_capacity(nf);
        let mut face_mass = Vec::with_capacity(nf);
        let mut face_phi_k = Vec::with_capacity(nf);
        let mut face_phi_k1 = Vec::with_capacity(nf);
        let mut face_dphi_k1 = Vec::with_capacity(nf);
        for i in 0..nf {
            let fq = &fquads[i];
            let psi = face_bases[i].eval_at_t(&fq.t);
            face_mass.push(gram(&psi, &psi, &fq.weights));
            face_phi_k.push(basis_k.eval_at(&fq.points));
            face_phi_k1.push(basis_k1.eval_at(&fq.points));
            face_dphi_k1.push(basis_k1.grad_at(&fq.points));
            face_psi.push(psi);
        }

        // potential reconstruction: gradient matching against every test
        // polynomial one degree up, closed by matching the element mean,
        // solved as one bordered system for all local unknowns at once
        let mut big = DMatrix::zeros(n1 + 1, n1 + 1);
        big.view_mut((0, 0), (n1, n1)).copy_from(&stiff_k1);
        let mut mean_k1 = DVector::zeros(n1);
        for (r, &wr) in w.iter().enumerate() {
            for c in 0..n1 {
                mean_k1[c] += wr * phi_k1[(r, c)];
            }
        }
        for c in 0..n1 {
            big[(n1, c)] = mean_k1[c];
            big[(c, n1)] = mean_k1[c];
        }
        let mut rhs = DMatrix::zeros(n1 + 1, total);
        // element block: integration by parts leaves the volume term with
        // the laplacian of the test polynomial
        let lap = basis_k1.laplacian_map();
        let vol = lap.transpose() * mix_k_k1.transpose();
        for wrow in 0..n1 {
            for j in 0..nk {
                rhs[(wrow, j)] = -vol[(wrow, j)];
            }
        }
        for i in 0..nf {
            let fq = &fquads[i];
            let n = normals[i];
            let (gx, gy) = &face_dphi_k1[i];
            let flux = gx * n.x + gy * n.y;
            let blk = gram(&face_psi[i], &flux, &fq.weights);
            let off = space.offsets[1 + i];
            for q in 0..fd {
                for wrow in 0..n1 {
                    rhs[(wrow, off + q)] = blk[(q, wrow)];
                }
            }
        }
        // mean closure: the reconstruction inherits the element-block mean
        let mut mean_k = DVector::zeros(nk);
        for (r, &wr) in w.iter().enumerate() {
            for c in 0..nk {
                mean_k[c] += wr * phi_k[(r, c)];
            }
        }
        for j in 0..nk {
            rhs[(n1, j)] = mean_k[j];
        }
        let sol = lu_solve_matrix(&big, &rhs, &format!("element {e} (potential)"))?;
        let potential = sol.rows(0, n1).into_owned();

        // gradient reconstruction, one mass solve per component
        let mut bx = DMatrix::zeros(nk, total);
        let mut by = DMatrix::zeros(nk, total);
        let volx = gram(&dphi_k.0, &phi_k, w);
        let voly = gram(&dphi_k.1, &phi_k, w);
        for i in 0..nk {
            for j in 0..nk {
                bx[(i, j)] = -volx[(i, j)];
                by[(i, j)] = -voly[(i, j)];
            }
        }
        for i in 0..nf {
            let fq = &fquads[i];
            let blk = gram(&face_phi_k[i], &face_psi[i], &fq.weights);
            let off = space.offsets[1 + i];
            let n = normals[i];
            for row in 0..nk {
                for q in 0..fd {
                    bx[(row, off + q)] = n.x * blk[(row, q)];
                    by[(row, off + q)] = n.y * blk[(row, q)];
                }
            }
        }
        let grad_x = spd_solve_matrix(&mass_k, &bx, &format!("element {e} (gradient)"))?;
        let grad_y = spd_solve_matrix(&mass_k, &by, &format!("element {e} (gradient)"))?;

        // residual operators
        let mut elem_sel = DMatrix::zeros(nk, total);
        for j in 0..nk {
            elem_sel[(j, j)] = 1.0;
        }
        let delta_t = spd_solve_matrix(
            &mass_k,
            &(&mix_k_k1 * &potential),
            &format!("element {e} (residual)"),
        )? - &elem_sel;

        let mut delta_f = Vec::with_capacity(nf);
        let mut trace_f = Vec::with_capacity(nf);
        let mut bdiff = Vec::with_capacity(nf);
        let mut res_f = Vec::with_capacity(nf);
        for i in 0..nf {
            let fq = &fquads[i];
            let ctx = format!("element {e} face {i} (residual)");
            let proj_k1 = spd_solve_matrix(
                &face_mass[i],
                &gram(&face_psi[i], &face_phi_k1[i], &fq.weights),
                &ctx,
            )?;
            let tr = spd_solve_matrix(
                &face_mass[i],
                &gram(&face_psi[i], &face_phi_k[i], &fq.weights),
                &ctx,
            )?;
            let mut face_sel = DMatrix::zeros(fd, total);
            let off = space.offsets[1 + i];
            for q in 0..fd {
                face_sel[(q, off + q)] = 1.0;
            }
            let df = &proj_k1 * &potential - &face_sel;
            bdiff.push(&face_sel - &tr * &elem_sel);
            res_f.push(&df - &tr * &delta_t);
            delta_f.push(df);
            trace_f.push(tr);
        }

        Ok(Self {
            elem: e,
            degree,
            space,
            area: mesh.element_area(e),
            h_t: mesh.element_diameter(e),
            face_lengths,
            normals,
            basis_k,
            basis_k1,
            face_bases,
            equad,
            fquads,
            phi_k,
            dphi_k,
            phi_k1,
            face_psi,
            mass_k,
            mass_k1,
            stiff_k,
            stiff_k1,
            face_mass,
            potential,
            grad_x,
            grad_y,
            delta_t,
            delta_f,
            trace_f,
            bdiff,
            res_f,
        })
    }

    pub fn with_default_exactness(
        mesh: &PolytopalMesh,
        sub: &SimplicialSubmesh,
        e: usize,
        degree: usize,
    ) -> Result<Self> {
        Self::build(mesh, sub, e, degree, default_exactness(degree))
    }

    /// Stabilization Gram form; symmetric positive semidefinite with the
    /// interpolates of polynomials one degree up in its kernel.
    pub fn stabilization(&self, variant: StabVariant) -> DMatrix<f64> {
        let total = self.space.total;
        let mut s = DMatrix::zeros(total, total);
        match variant {
            StabVariant::Hho => {
                for i in 0..self.res_f.len() {
                    let scaled = &self.face_mass[i] * &self.res_f[i];
                    s += self.res_f[i].transpose() * scaled / self.face_lengths[i];
                }
            }
            StabVariant::Vem => {
                let vol = &self.mass_k * &self.delta_t;
                s += self.delta_t.transpose() * vol / (self.h_t * self.h_t);
                for i in 0..self.delta_f.len() {
                    let scaled = &self.face_mass[i] * &self.delta_f[i];
                    s += self.delta_f[i].transpose() * scaled / self.face_lengths[i];
                }
            }
        }
        s
    }

    /// Stabilization value evaluated through its residual factors; unlike
    /// pairing with the assembled Gram this keeps exact kernel vectors at
    /// the squared rounding floor.
    pub fn stab_value(&self, variant: StabVariant, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        match variant {
            StabVariant::Hho => {
                for i in 0..self.res_f.len() {
                    let ru = &self.res_f[i] * u;
                    let rv = &self.res_f[i] * v;
                    acc += (ru.transpose() * &self.face_mass[i] * rv)[(0, 0)]
                        / self.face_lengths[i];
                }
            }
            StabVariant::Vem => {
                let du = &self.delta_t * u;
                let dv = &self.delta_t * v;
                acc += (du.transpose() * &self.mass_k * dv)[(0, 0)] / (self.h_t * self.h_t);
                for i in 0..self.delta_f.len() {
                    let du = &self.delta_f[i] * u;
                    let dv = &self.delta_f[i] * v;
                    acc += (du.transpose() * &self.face_mass[i] * dv)[(0, 0)]
                        / self.face_lengths[i];
                }
            }
        }
        acc
    }

    /// Element diffusion form: Galerkin term of the reconstruction plus the
    /// chosen stabilization.
    pub fn diffusion_form(&self, variant: StabVariant) -> DMatrix<f64> {
        self.potential.transpose() * &self.stiff_k1 * &self.potential + self.stabilization(variant)
    }

    /// Same form with the Galerkin term taken from the vector gradient
    /// reconstruction instead of the potential.
    pub fn diffusion_form_gradient(&self, variant: StabVariant) -> DMatrix<f64> {
        self.grad_x.transpose() * &self.mass_k * &self.grad_x
            + self.grad_y.transpose() * &self.mass_k * &self.grad_y
            + self.stabilization(variant)
    }

    /// Local seminorm Gram: broken gradient plus scaled boundary differences.
    pub fn h1_gram(&self) -> DMatrix<f64> {
        let total = self.space.total;
        let nk = self.space.elem_dim;
        let mut n = DMatrix::zeros(total, total);
        n.view_mut((0, 0), (nk, nk)).copy_from(&self.stiff_k);
        for i in 0..self.bdiff.len() {
            let scaled = &self.face_mass[i] * &self.bdiff[i];
            n += self.bdiff[i].transpose() * scaled / self.face_lengths[i];
        }
        n
    }

    /// Per-face boundary residual operators for a given stabilization Gram:
    /// face polynomials R_F v defined by pairing the stabilization applied to
    /// boundary differences against every face test function.
    pub fn boundary_residual(&self, stab: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
        let total = self.space.total;
        let mut z = DMatrix::zeros(total, total);
        for i in 0..self.bdiff.len() {
            let off = self.space.offsets[1 + i];
            let fd = self.space.face_dims[i];
            for q in 0..fd {
                for c in 0..total {
                    z[(off + q, c)] = self.bdiff[i][(q, c)];
                }
            }
        }
        let sz = stab * z;
        let mut out = Vec::with_capacity(self.bdiff.len());
        for i in 0..self.bdiff.len() {
            let off = self.space.offsets[1 + i];
            let fd = self.space.face_dims[i];
            let rows = sz.rows(off, fd).into_owned();
            let rf = spd_solve_matrix(
                &self.face_mass[i],
                &rows,
                &format!("element {} face {i} (boundary residual)", self.elem),
            )?;
            out.push(-rf);
        }
        Ok(out)
    }

    /// Power-law face stabilization value: residuals of the first argument
    /// pass through |r|^(p-2) r before pairing with the second argument's
    /// residuals under the h_F^(1-p) weight. At p = 2 this is exactly the
    /// bilinear face-residual value.
    pub fn plap_stab_value(&self, u: &DVector<f64>, v: &DVector<f64>, p: f64, eps: f64) -> f64 {
        let mut total = 0.0;
        for i in 0..self.res_f.len() {
            let wf = self.face_lengths[i].powf(1.0 - p);
            let ru = &self.face_psi[i] * (&self.res_f[i] * u);
            let rv = &self.face_psi[i] * (&self.res_f[i] * v);
            for (q, &wq) in self.fquads[i].weights.iter().enumerate() {
                total += wf * wq * power_law(ru[q], p, eps) * rv[q];
            }
        }
        total
    }

    /// Derivative of the power-law stabilization at u: symmetric Gram of the
    /// linearized form.
    pub fn plap_stab_jacobian(&self, u: &DVector<f64>, p: f64, eps: f64) -> DMatrix<f64> {
        let total = self.space.total;
        let mut s = DMatrix::zeros(total, total);
        for i in 0..self.res_f.len() {
            let wf = self.face_lengths[i].powf(1.0 - p);
            let ru = &self.face_psi[i] * (&self.res_f[i] * u);
            let psi = &self.face_psi[i];
            let mut core = DMatrix::zeros(psi.ncols(), psi.ncols());
            for (q, &wq) in self.fquads[i].weights.iter().enumerate() {
                let d = power_law_derivative(ru[q], p, eps) * wq * wf;
                for a in 0..psi.ncols() {
                    for b in 0..psi.ncols() {
                        core[(a, b)] += d * psi[(q, a)] * psi[(q, b)];
                    }
                }
            }
            s += self.res_f[i].transpose() * core * &self.res_f[i];
        }
        s
    }
}

/// |r|^(p-2) r, regularized by eps and extended by zero near the origin for
/// p below 2 where the bare power blows up.
pub fn power_law(r: f64, p: f64, eps: f64) -> f64 {
    if eps > 0.0 {
        (r * r + eps * eps).powf(0.5 * p - 1.0) * r
    } else if p < 2.0 && r.abs() <= 1e-14 {
        0.0
    } else {
        r.abs().powf(p - 2.0) * r
    }
}

pub fn power_law_derivative(r: f64, p: f64, eps: f64) -> f64 {
    if eps > 0.0 {
        let s = r * r + eps * eps;
        s.powf(0.5 * p - 1.0) + (p - 2.0) * r * r * s.powf(0.5 * p - 2.0)
    } else if p < 2.0 && r.abs() <= 1e-14 {
        0.0
    } else {
        (p - 1.0) * r.abs().powf(p - 2.0)
    }
}

/// Local reduction: element block is the volume projection, face blocks the
/// trace projections.
pub fn reduce_local(f: &dyn Fn(crate::Point2) -> f64, ops: &LocalOps) -> Result<DVector<f64>> {
    let mut v = DVector::zeros(ops.space.total);
    let elem = l2_project_element(f, &ops.basis_k, &ops.equad)?;
    v.rows_mut(0, ops.space.elem_dim).copy_from(&elem);
    for i in 0..ops.space.n_faces() {
        let fc = l2_project_face(f, &ops.face_bases[i], &ops.fquads[i])?;
        let off = ops.space.offsets[1 + i];
        v.rows_mut(off, ops.space.face_dims[i]).copy_from(&fc);
    }
    Ok(v)
}

/// Global reduction over the whole mesh; with `dirichlet` set the boundary
/// face blocks are zeroed (the caller asserts the function vanishes there).
pub fn reduce_global(
    f: &dyn Fn(crate::Point2) -> f64,
    mesh: &PolytopalMesh,
    sub: &SimplicialSubmesh,
    degree: usize,
    dirichlet: bool,
) -> Result<DofVector> {
    let layout = DofLayout::new(mesh, degree);
    let mut v = DofVector::zeros(&layout, dirichlet);
    let exact = default_exactness(degree);
    for e in 0..mesh.n_elements() {
        let basis = element_basis(mesh, e, degree);
        let tris: Vec<_> = sub.elem_tris[e].iter().map(|&t| sub.tri_corners(t)).collect();
        let q = triangles_quadrature(&tris, exact)?;
        let coeffs = l2_project_element(f, &basis, &q)?;
        let mut rows = v.data.rows_mut(layout.elem_block(e).start, layout.elem_dim);
        rows.copy_from(&coeffs);
    }
    for fid in 0..mesh.n_faces() {
        if dirichlet && mesh.is_boundary_face(fid) {
            continue;
        }
        let fb = face_basis(mesh, fid, degree);
        let (a, b) = mesh.face_endpoints(fid);
        let fq = face_quadrature(a, b, exact)?;
        let coeffs = l2_project_face(f, &fb, &fq)?;
        let mut rows = v.data.rows_mut(layout.face_block(fid).start, layout.face_dim);
        rows.copy_from(&coeffs);
    }
    Ok(v)
}
