//! The Poisson model problem: local energy forms, condensed assembly with
//! strong Dirichlet data, hybrid solve, potential reconstruction, numerical
//! fluxes with their balance diagnostics, and error norms against a
//! manufactured solution.

use crate::assembly::{CondensedSystem, FaceClasses, MonolithicSystem};
use crate::dof::{DofLayout, DofVector};
use crate::field::BrokenField;
use crate::local::{default_exactness, reduce_global, LocalOps, StabVariant};
use crate::mesh::{simplicial_submesh, PolytopalMesh, SimplicialSubmesh};
use crate::norms::jump_seminorm;
use crate::poly::gram;
use crate::{Point2, Result};
use nalgebra::{DMatrix, DVector};

/// Which reconstruction carries the consistent part of the energy form. The
/// potential form is the standard one; the gradient form squares the vector
/// reconstruction instead and is what the p-Laplace solver degenerates to at
/// p = 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffusionForm {
    Potential,
    Gradient,
}

pub struct Poisson<'m> {
    pub mesh: &'m PolytopalMesh,
    pub sub: SimplicialSubmesh,
    pub degree: usize,
    pub variant: StabVariant,
    pub form: DiffusionForm,
    pub layout: DofLayout,
    ops: Vec<LocalOps>,
}

/// Error norms of one solve. Rates across meshes are the report module's job.
#[derive(Clone, Debug)]
pub struct ErrorReport {
    pub h: f64,
    /// Face unknowns of the condensed system.
    pub n_dof: usize,
    /// ‖I_h u − u_h‖ in the energy norm of the assembled form.
    pub energy: f64,
    /// ‖∇_h(p_h u_h − u)‖.
    pub broken_grad: f64,
    /// Stabilization seminorm |u_h|_{s,h}.
    pub stab_semi: f64,
    /// ‖π^k u − u_T‖ over element blocks.
    pub l2_elem: f64,
    /// ‖p_h u_h − u‖.
    pub l2_reconstruct: f64,
    /// Face jump seminorm of the reconstruction.
    pub jump: f64,
}

/// Numerical face fluxes and how well they satisfy the discrete balance.
pub struct FluxReport {
    /// Per element, per local face: flux coefficients in the face basis.
    pub fluxes: Vec<Vec<DVector<f64>>>,
    /// Max over elements of the balance defect, relative to the terms' size.
    pub max_balance: f64,
    /// Max over interfaces of ‖S_T1 + S_T2‖_F relative to the flux size.
    pub max_continuity: f64,
    /// Σ over boundary faces of ∫_F S_TF; equals ∫_Ω f when balance and
    /// continuity hold (sum the local balances with v ≡ 1).
    pub boundary_flux_sum: f64,
    pub source_integral: f64,
}

impl<'m> Poisson<'m> {
    pub fn new(mesh: &'m PolytopalMesh, degree: usize, variant: StabVariant) -> Result<Self> {
        Self::with_form(mesh, degree, variant, DiffusionForm::Potential)
    }

    pub fn with_form(
        mesh: &'m PolytopalMesh,
        degree: usize,
        variant: StabVariant,
        form: DiffusionForm,
    ) -> Result<Self> {
        let sub = simplicial_submesh(mesh)?;
        let layout = DofLayout::new(mesh, degree);
        let ops = (0..mesh.n_elements())
            .map(|e| LocalOps::build(mesh, &sub, e, degree, default_exactness(degree)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { mesh, sub, degree, variant, form, layout, ops })
    }

    pub fn ops(&self, e: usize) -> &LocalOps {
        &self.ops[e]
    }

    /// Local energy form a_T.
    pub fn local_form(&self, e: usize) -> DMatrix<f64> {
        match self.form {
            DiffusionForm::Potential => self.ops[e].diffusion_form(self.variant),
            DiffusionForm::Gradient => self.ops[e].diffusion_form_gradient(self.variant),
        }
    }

    /// Load vector (f, v_T)_T: element block only.
    pub fn source_rhs(&self, e: usize, f: &dyn Fn(Point2) -> f64) -> DVector<f64> {
        let ops = &self.ops[e];
        let mut b = DVector::zeros(ops.space.total);
        for (q, &x) in ops.equad.points.iter().enumerate() {
            let w = ops.equad.weights[q] * f(x);
            for m in 0..ops.space.elem_dim {
                b[m] += w * ops.phi_k[(q, m)];
            }
        }
        b
    }

    pub fn assemble(&self, f: &dyn Fn(Point2) -> f64) -> Result<CondensedSystem> {
        let classes = FaceClasses::dirichlet_zero(self.mesh, self.degree);
        CondensedSystem::assemble(self.mesh, self.degree, classes, true, |e| {
            Ok((self.local_form(e), self.source_rhs(e, f)))
        })
    }

    /// Monolithic variant of the same problem, kept as an oracle and for
    /// dual-norm computations.
    pub fn assemble_monolithic(&self, f: &dyn Fn(Point2) -> f64) -> Result<MonolithicSystem> {
        let classes = FaceClasses::dirichlet_zero(self.mesh, self.degree);
        MonolithicSystem::assemble(self.mesh, self.degree, classes, true, |e| {
            Ok((self.local_form(e), self.source_rhs(e, f)))
        })
    }

    pub fn solve(&self, f: &dyn Fn(Point2) -> f64) -> Result<DofVector> {
        self.assemble(f)?.solve(self.mesh)
    }

    /// Reduction I_h of a function to the hybrid space.
    pub fn interpolate(&self, u: &dyn Fn(Point2) -> f64, dirichlet: bool) -> Result<DofVector> {
        reduce_global(u, self.mesh, &self.sub, self.degree, dirichlet)
    }

    /// Elementwise potential reconstruction p_h u, one degree up.
    pub fn reconstruct(&self, u: &DofVector) -> BrokenField {
        let mut field = BrokenField::zeros(self.mesh, self.degree + 1);
        for e in 0..self.mesh.n_elements() {
            let ul = self.layout.gather(self.mesh, e, &u.data);
            field.coeffs[e] = &self.ops[e].potential * ul;
        }
        field
    }

    /// a_h(u, v).
    pub fn bilinear(&self, u: &DofVector, v: &DofVector) -> f64 {
        (0..self.mesh.n_elements())
            .map(|e| {
                let ul = self.layout.gather(self.mesh, e, &u.data);
                let vl = self.layout.gather(self.mesh, e, &v.data);
                (self.local_form(e) * ul).dot(&vl)
            })
            .sum()
    }

    pub fn energy_norm(&self, v: &DofVector) -> f64 {
        self.bilinear(v, v).max(0.0).sqrt()
    }

    /// Numerical fluxes S_TF = −∇p_T u·n_TF + R_TF u together with the local
    /// balance and interface continuity defects they satisfy.
    pub fn fluxes_and_balance(
        &self,
        u: &DofVector,
        f: &dyn Fn(Point2) -> f64,
    ) -> Result<FluxReport> {
        let mesh = self.mesh;
        let fd = self.layout.face_dim;
        let mut fluxes: Vec<Vec<DVector<f64>>> = Vec::with_capacity(mesh.n_elements());
        let mut max_balance = 0.0f64;
        let mut source_integral = 0.0;

        for e in 0..mesh.n_elements() {
            let ops = &self.ops[e];
            let ul = self.layout.gather(mesh, e, &u.data);
            let pot = &ops.potential * &ul;
            let stab = ops.stabilization(self.variant);
            let resid = ops.boundary_residual(&stab)?;

            let mut elem_fluxes = Vec::with_capacity(ops.space.n_faces());
            for i in 0..ops.space.n_faces() {
                let fq = &ops.fquads[i];
                let n = ops.normals[i];
                // −∇p_T u · n at the face rule, projected on the face basis
                // (the trace is already a degree-k polynomial, so the
                // projection is exact).
                let mut vals = DVector::zeros(fq.points.len());
                for (q, &x) in fq.points.iter().enumerate() {
                    let g = ops.basis_k1.gradient(&pot, x);
                    vals[q] = -(g.x * n.x + g.y * n.y);
                }
                let rhs = gram(&ops.face_psi[i], &DMatrix::from_column_slice(vals.len(), 1, vals.as_slice()), &fq.weights);
                let mut coeffs = ops.face_mass[i]
                    .clone()
                    .cholesky()
                    .expect("face mass is SPD")
                    .solve(&rhs)
                    .column(0)
                    .clone_owned();
                coeffs += &resid[i] * &ul;
                elem_fluxes.push(coeffs);
            }

            // balance against every element test mode
            let b = self.source_rhs(e, f);
            for (q, &x) in ops.equad.points.iter().enumerate() {
                source_integral += ops.equad.weights[q] * f(x);
            }
            let nk = ops.space.elem_dim;
            let mut worst = 0.0f64;
            let mut scale = 0.0f64;
            let grads: Vec<crate::Vector2> = ops
                .equad
                .points
                .iter()
                .map(|&x| ops.basis_k1.gradient(&pot, x))
                .collect();
            for m in 0..nk {
                // (∇p_T u, ∇φ_m)_T
                let mut t1 = 0.0;
                for (q, &w) in ops.equad.weights.iter().enumerate() {
                    t1 += w * (grads[q].x * ops.dphi_k.0[(q, m)] + grads[q].y * ops.dphi_k.1[(q, m)]);
                }
                let mut t2 = 0.0;
                let mut t2_abs = 0.0;
                for i in 0..ops.space.n_faces() {
                    let fq = &ops.fquads[i];
                    let mut pair = 0.0;
                    for (q, &x) in fq.points.iter().enumerate() {
                        let s: f64 = (0..fd)
                            .map(|j| elem_fluxes[i][j] * ops.face_psi[i][(q, j)])
                            .sum();
                        pair += fq.weights[q] * s * ops.basis_k.eval(x)[m];
                    }
                    t2 += pair;
                    t2_abs += pair.abs();
                }
                let defect = (t1 + t2 - b[m]).abs();
                worst = worst.max(defect);
                scale = scale.max(t1.abs() + t2_abs + b[m].abs());
            }
            max_balance = max_balance.max(if scale > 0.0 { worst / scale } else { worst });
            fluxes.push(elem_fluxes);
        }

        // interface continuity: the shared face basis makes the comparison a
        // plain coefficient sum. Defects are measured against the largest
        // face-flux norm in the mesh; individual interfaces can carry nearly
        // zero flux (symmetry lines) and would make a per-face ratio blow up
        // on pure rounding.
        let mut boundary_flux_sum = 0.0;
        let mut local_index = vec![Vec::new(); mesh.n_faces()];
        for e in 0..mesh.n_elements() {
            for (i, &fid) in mesh.element_faces(e).iter().enumerate() {
                local_index[fid].push((e, i));
            }
        }
        let face_norm = |e: usize, i: usize, s: &DVector<f64>| {
            let mf = &self.ops[e].face_mass[i];
            (s.dot(&(mf * s))).max(0.0).sqrt()
        };
        let mut global_scale = 0.0f64;
        for fid in 0..mesh.n_faces() {
            for &(e, i) in &local_index[fid] {
                global_scale = global_scale.max(face_norm(e, i, &fluxes[e][i]));
            }
        }
        let mut max_continuity = 0.0f64;
        for fid in 0..mesh.n_faces() {
            match local_index[fid].as_slice() {
                [(e1, i1), (e2, i2)] => {
                    let sum = &fluxes[*e1][*i1] + &fluxes[*e2][*i2];
                    let nrm = face_norm(*e1, *i1, &sum);
                    max_continuity =
                        max_continuity.max(if global_scale > 0.0 { nrm / global_scale } else { nrm });
                }
                [(e1, i1)] => {
                    let ops = &self.ops[*e1];
                    let fq = &ops.fquads[*i1];
                    for (q, w) in fq.weights.iter().enumerate() {
                        let s: f64 = (0..fd)
                            .map(|j| fluxes[*e1][*i1][j] * ops.face_psi[*i1][(q, j)])
                            .sum();
                        boundary_flux_sum += w * s;
                    }
                }
                other => unreachable!("face shared by {} elements", other.len()),
            }
        }

        Ok(FluxReport {
            fluxes,
            max_balance,
            max_continuity,
            boundary_flux_sum,
            source_integral,
        })
    }

    /// Error norms against a manufactured solution.
    pub fn compute_errors(
        &self,
        u: &DofVector,
        exact: &dyn Fn(Point2) -> f64,
        grad_exact: &dyn Fn(Point2) -> crate::Vector2,
    ) -> Result<ErrorReport> {
        let mesh = self.mesh;
        let iu = self.interpolate(exact, u.dirichlet)?;
        let mut diff = iu.clone();
        diff.data -= &u.data;
        let energy = self.energy_norm(&diff);

        let mut broken_grad2 = 0.0;
        let mut stab2 = 0.0;
        let mut l2_elem2 = 0.0;
        let mut l2_rec2 = 0.0;
        for e in 0..mesh.n_elements() {
            let ops = &self.ops[e];
            let ul = self.layout.gather(mesh, e, &u.data);
            let pot = &ops.potential * &ul;
            for (q, &x) in ops.equad.points.iter().enumerate() {
                let w = ops.equad.weights[q];
                let g = ops.basis_k1.gradient(&pot, x);
                let ge = grad_exact(x);
                broken_grad2 += w * ((g.x - ge.x).powi(2) + (g.y - ge.y).powi(2));
                let pv = ops.basis_k1.value(&pot, x);
                l2_rec2 += w * (pv - exact(x)).powi(2);
            }
            stab2 += ops.stab_value(self.variant, &ul, &ul).max(0.0);
            let de = diff.data.rows(self.layout.elem_block(e).start, self.layout.elem_dim);
            let de = de.clone_owned();
            l2_elem2 += (&ops.mass_k * &de).dot(&de).max(0.0);
        }

        let rec = self.reconstruct(u);
        let jump = jump_seminorm(&rec, mesh, self.degree)?;

        Ok(ErrorReport {
            h: mesh.h(),
            n_dof: mesh.n_interior_faces() * self.layout.face_dim,
            energy,
            broken_grad: broken_grad2.sqrt(),
            stab_semi: stab2.sqrt(),
            l2_elem: l2_elem2.sqrt(),
            l2_reconstruct: l2_rec2.sqrt(),
            jump,
        })
    }

    /// Conformity error functional E_h(w; v) = −(Δw, v_h) − a_h(I_h w, v),
    /// the quantity whose decay expresses consistency of the method.
    pub fn consistency_functional(
        &self,
        w: &dyn Fn(Point2) -> f64,
        lap_w: &dyn Fn(Point2) -> f64,
        v: &DofVector,
    ) -> Result<f64> {
        let iw = self.interpolate(w, false)?;
        let mut load = 0.0;
        for e in 0..self.mesh.n_elements() {
            let ops = &self.ops[e];
            let ve = v.data.rows(self.layout.elem_block(e).start, self.layout.elem_dim);
            for (q, &x) in ops.equad.points.iter().enumerate() {
                let vv: f64 = (0..self.layout.elem_dim).map(|m| ve[m] * ops.phi_k[(q, m)]).sum();
                load += ops.equad.weights[q] * lap_w(x) * vv;
            }
        }
        Ok(-load - self.bilinear(&iw, v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, MeshKind, Rect};
    use crate::norms::one_p_seminorm;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn sinsin(x: Point2) -> f64 {
        (PI * x.x).sin() * (PI * x.y).sin()
    }
    fn sinsin_rhs(x: Point2) -> f64 {
        2.0 * PI * PI * sinsin(x)
    }
    fn sinsin_grad(x: Point2) -> crate::Vector2 {
        crate::Vector2::new(
            PI * (PI * x.x).cos() * (PI * x.y).sin(),
            PI * (PI * x.x).sin() * (PI * x.y).cos(),
        )
    }

    #[test]
    fn local_form_kernel_is_exactly_the_constants() {
        let mesh = generate_mesh(MeshKind::VoronoiPolygonal { seed: 3 }, 2, Rect::UNIT).unwrap();
        for k in 0..3usize {
            let p = Poisson::new(&mesh, k, StabVariant::Hho).unwrap();
            for e in 0..mesh.n_elements() {
                let a = p.local_form(e);
                let ones = crate::local::reduce_local(&|_| 1.0, p.ops(e)).unwrap();
                let scale = a.amax();
                assert!((&a * &ones).amax() <= 1e-11 * scale, "k={k} e={e}");
                let eig = a.clone().symmetric_eigenvalues();
                let mut eigs: Vec<f64> = eig.iter().copied().collect();
                eigs.sort_by(f64::total_cmp);
                assert!(eigs[0] >= -1e-12 * scale);
                assert!(eigs[0].abs() <= 1e-12 * scale, "kernel eigenvalue");
                assert!(eigs[1] > 1e-9 * scale, "kernel must be one-dimensional");
            }
        }
    }

    #[test]
    fn energy_of_reduced_polynomial_is_its_dirichlet_energy() {
        let mesh = generate_mesh(MeshKind::Triangular, 2, Rect::UNIT).unwrap();
        let mut rng = StdRng::seed_from_u64(21);
        for k in 0..3usize {
            let p = Poisson::new(&mesh, k, StabVariant::Hho).unwrap();
            for e in 0..mesh.n_elements() {
                let ops = p.ops(e);
                let c = DVector::from_fn(ops.basis_k1.dim(), |_, _| rng.random_range(-1.0..1.0));
                let w = |x: Point2| ops.basis_k1.value(&c, x);
                let iv = crate::local::reduce_local(&w, ops).unwrap();
                let a = p.local_form(e);
                let lhs = (&a * &iv).dot(&iv);
                let rhs = (&ops.stiff_k1 * &c).dot(&c);
                assert!(
                    (lhs - rhs).abs() <= 1e-10 * rhs.max(1.0),
                    "k={k} e={e}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn condensed_dimension_counts_interior_faces() {
        let mesh = generate_mesh(MeshKind::Triangular, 1, Rect::UNIT).unwrap();
        let p = Poisson::new(&mesh, 1, StabVariant::Hho).unwrap();
        let sys = p.assemble(&sinsin_rhs).unwrap();
        assert_eq!(sys.n_unknowns, 2);

        let mesh = generate_mesh(MeshKind::Cartesian, 2, Rect::UNIT).unwrap();
        let p = Poisson::new(&mesh, 0, StabVariant::Hho).unwrap();
        let sys = p.assemble(&sinsin_rhs).unwrap();
        assert_eq!(sys.n_unknowns, 4);
        assert!(sys.system.symmetry_error() <= 1e-12);
    }

    #[test]
    fn zero_source_gives_the_zero_solution() {
        let mesh = generate_mesh(MeshKind::VoronoiPolygonal { seed: 8 }, 2, Rect::UNIT).unwrap();
        let p = Poisson::new(&mesh, 1, StabVariant::Hho).unwrap();
        let u = p.solve(&|_| 0.0).unwrap();
        assert!(u.data.amax() <= 1e-14);
        let flux = p.fluxes_and_balance(&u, &|_| 0.0).unwrap();
        for ef in &flux.fluxes {
            for s in ef {
                assert!(s.amax() <= 1e-12);
            }
        }
    }

    #[test]
    fn condensed_and_monolithic_solves_agree() {
        let mesh = generate_mesh(MeshKind::Triangular, 2, Rect::UNIT).unwrap();
        for k in 0..3usize {
            let p = Poisson::new(&mesh, k, StabVariant::Hho).unwrap();
            let uc = p.solve(&sinsin_rhs).unwrap();
            let um = p.assemble_monolithic(&sinsin_rhs).unwrap().solve().unwrap();
            let scale = um.data.amax();
            assert!(
                (&uc.data - &um.data).amax() <= 1e-10 * scale,
                "k={k}: {:.3e}",
                (&uc.data - &um.data).amax() / scale
            );
        }
    }

    #[test]
    fn reconstruction_restores_global_polynomials() {
        let mesh = generate_mesh(MeshKind::VoronoiPolygonal { seed: 5 }, 2, Rect::UNIT).unwrap();
        for k in 0..3usize {
            let p = Poisson::new(&mesh, k, StabVariant::Hho).unwrap();
            let w = |x: Point2| {
                let mut s = 0.3;
                for j in 0..=k + 1 {
                    s += x.x.powi(j as i32) - 0.5 * x.y.powi(j as i32)
                        + 0.25 * x.x.powi((k + 1 - j) as i32) * x.y.powi(j as i32);
                }
                s
            };
            let iw = p.interpolate(&w, false).unwrap();
            let rec = p.reconstruct(&iw);
            for e in 0..mesh.n_elements() {
                let ops = p.ops(e);
                for &x in ops.equad.points.iter().step_by(7) {
                    let v = rec.value(&mesh, e, x);
                    assert!((v - w(x)).abs() <= 1e-10 * (1.0 + w(x).abs()), "k={k}");
                }
            }
        }
    }

    #[test]
    fn reconstruction_of_constants_and_mean_preservation() {
        let mesh = generate_mesh(MeshKind::Cartesian, 2, Rect::UNIT).unwrap();
        let k = 1;
        let p = Poisson::new(&mesh, k, StabVariant::Hho).unwrap();
        let iw = p.interpolate(&|_| 3.25, false).unwrap();
        let rec = p.reconstruct(&iw);
        for e in 0..mesh.n_elements() {
            let c = mesh.element_centroid(e);
            assert!((rec.value(&mesh, e, c) - 3.25).abs() <= 1e-12);
        }

        // mean of the reconstruction matches the element block mean
        let u = p.solve(&sinsin_rhs).unwrap();
        let rec = p.reconstruct(&u);
        for e in 0..mesh.n_elements() {
            let ops = p.ops(e);
            let ue = u.data.rows(p.layout.elem_block(e).start, p.layout.elem_dim).clone_owned();
            let mut m_rec = 0.0;
            let mut m_elem = 0.0;
            for (q, &x) in ops.equad.points.iter().enumerate() {
                let w = ops.equad.weights[q];
                m_rec += w * rec.value(&mesh, e, x);
                m_elem += w * (0..p.layout.elem_dim).map(|m| ue[m] * ops.phi_k[(q, m)]).sum::<f64>();
            }
            assert!((m_rec - m_elem).abs() <= 1e-12 * (1.0 + m_elem.abs()));
        }
    }

    #[test]
    fn fluxes_balance_and_are_continuous() {
        for (kind, n) in [
            (MeshKind::Triangular, 3),
            (MeshKind::VoronoiPolygonal { seed: 12 }, 3),
        ] {
            let mesh = generate_mesh(kind, n, Rect::UNIT).unwrap();
            for k in 0..3usize {
                let p = Poisson::new(&mesh, k, StabVariant::Hho).unwrap();
                let u = p.solve(&sinsin_rhs).unwrap();
                let flux = p.fluxes_and_balance(&u, &sinsin_rhs).unwrap();
                assert!(flux.max_balance <= 1e-10, "k={k}: {:.3e}", flux.max_balance);
                assert!(flux.max_continuity <= 1e-10, "k={k}: {:.3e}", flux.max_continuity);
                // summing the balances with v = 1: boundary fluxes carry ∫f
                assert!(
                    (flux.boundary_flux_sum - flux.source_integral).abs()
                        <= 1e-8 * flux.source_integral.abs(),
                    "k={k}: {} vs {}",
                    flux.boundary_flux_sum,
                    flux.source_integral
                );
            }
        }
    }

    #[test]
    fn vem_stabilization_fluxes_also_balance() {
        let mesh = generate_mesh(MeshKind::VoronoiPolygonal { seed: 4 }, 3, Rect::UNIT).unwrap();
        let p = Poisson::new(&mesh, 1, StabVariant::Vem).unwrap();
        let u = p.solve(&sinsin_rhs).unwrap();
        let flux = p.fluxes_and_balance(&u, &sinsin_rhs).unwrap();
        assert!(flux.max_balance <= 1e-10);
        assert!(flux.max_continuity <= 1e-10);
    }

    #[test]
    fn interpolant_has_zero_error() {
        let mesh = generate_mesh(MeshKind::Triangular, 2, Rect::UNIT).unwrap();
        let p = Poisson::new(&mesh, 2, StabVariant::Hho).unwrap();
        let iu = p.interpolate(&sinsin, true).unwrap();
        let rep = p.compute_errors(&iu, &sinsin, &sinsin_grad).unwrap();
        assert_eq!(rep.energy, 0.0);
        assert_eq!(rep.l2_elem, 0.0);
        assert!(rep.broken_grad > 0.0, "discretization error itself is not zero");
    }

    #[test]
    fn energy_error_drops_one_order_per_refinement() {
        let k = 1;
        let mut prev: Option<ErrorReport> = None;
        for n in [4usize, 8] {
            let mesh = generate_mesh(MeshKind::Triangular, n, Rect::UNIT).unwrap();
            let p = Poisson::new(&mesh, k, StabVariant::Hho).unwrap();
            let u = p.solve(&sinsin_rhs).unwrap();
            let rep = p.compute_errors(&u, &sinsin, &sinsin_grad).unwrap();
            if let Some(prev) = &prev {
                let rate = (prev.energy / rep.energy).log2() / (prev.h / rep.h).log2();
                assert!(rate > (k as f64 + 1.0) - 0.35, "energy rate {rate:.2}");
                let rate_l2 = (prev.l2_elem / rep.l2_elem).log2() / (prev.h / rep.h).log2();
                assert!(rate_l2 > (k as f64 + 2.0) - 0.5, "supercloseness rate {rate_l2:.2}");
            }
            prev = Some(rep);
        }
    }

    #[test]
    fn consistency_functional_decays_one_order_beyond_stability() {
        for k in 0..2usize {
            let mut prev: Option<(f64, f64)> = None;
            for n in [4usize, 8] {
                let mesh = generate_mesh(MeshKind::Triangular, n, Rect::UNIT).unwrap();
                let p = Poisson::new(&mesh, k, StabVariant::Hho).unwrap();
                let layout = &p.layout;
                let mut rng = StdRng::seed_from_u64(17);
                let mut worst = 0.0f64;
                for _ in 0..12 {
                    let mut v = DofVector::zeros(layout, true);
                    v.data = DVector::from_fn(layout.total(), |_, _| rng.random_range(-1.0..1.0));
                    v.enforce_dirichlet(&mesh, layout);
                    let (norm, _) = one_p_seminorm(&mesh, &p.sub, &v, 2.0).unwrap();
                    v.data /= norm;
                    let e = p
                        .consistency_functional(&sinsin, &|x| -sinsin_rhs(x), &v)
                        .unwrap();
                    worst = worst.max(e.abs());
                }
                if let Some((ph, pe)) = prev {
                    let rate = (pe / worst).log2() / (ph / mesh.h()).log2();
                    assert!(rate > k as f64 + 0.6, "k={k}: consistency rate {rate:.2}");
                }
                prev = Some((mesh.h(), worst));
            }
        }
    }

    #[test]
    fn gradient_form_solution_stays_close_to_the_potential_form() {
        // both forms are consistent discretizations; on a fixed mesh their
        // difference is a discretization-level quantity, not rounding
        let mesh = generate_mesh(MeshKind::Triangular, 4, Rect::UNIT).unwrap();
        let k = 1;
        let pp = Poisson::new(&mesh, k, StabVariant::Hho).unwrap();
        let pg = Poisson::with_form(&mesh, k, StabVariant::Hho, DiffusionForm::Gradient).unwrap();
        let up = pp.solve(&sinsin_rhs).unwrap();
        let ug = pg.solve(&sinsin_rhs).unwrap();
        let rp = pp.compute_errors(&up, &sinsin, &sinsin_grad).unwrap();
        let rg = pg.compute_errors(&ug, &sinsin, &sinsin_grad).unwrap();
        assert!(rg.broken_grad <= 3.0 * rp.broken_grad + 1e-12);
        assert!(rp.broken_grad <= 3.0 * rg.broken_grad + 1e-12);
    }
}
