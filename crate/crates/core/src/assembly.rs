//! Static condensation of hybrid systems onto the face unknowns.
//!
//! Every local matrix couples one element block to its face blocks, and the
//! element block appears in no other local matrix, so it is eliminated
//! locally: the global system only carries face unknowns. Faces are either
//! `Unknown` (assembled) or `Fixed` (prescribed coefficients, moved to the
//! right-hand side), which covers homogeneous and inhomogeneous Dirichlet
//! data alike. The elimination products are kept per element so the element
//! blocks can be recovered exactly after the face solve.

use crate::dof::{DofLayout, DofVector};
use crate::linsolve::SparseSystem;
use crate::mesh::PolytopalMesh;
use crate::poly::{lu_solve_matrix, spd_solve_matrix};
use crate::{HhoError, Result};
use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug)]
pub enum FaceClass {
    Unknown,
    /// Prescribed face polynomial, one coefficient per face mode.
    Fixed(DVector<f64>),
}

/// Per-face classification for one assembly pass.
#[derive(Clone, Debug)]
pub struct FaceClasses {
    pub classes: Vec<FaceClass>,
}

impl FaceClasses {
    pub fn all_unknown(n_faces: usize) -> Self {
        Self { classes: vec![FaceClass::Unknown; n_faces] }
    }

    /// Boundary faces pinned to the zero polynomial, interior faces unknown.
    pub fn dirichlet_zero(mesh: &PolytopalMesh, degree: usize) -> Self {
        let mut c = Self::all_unknown(mesh.n_faces());
        for f in 0..mesh.n_faces() {
            if mesh.is_boundary_face(f) {
                c.classes[f] = FaceClass::Fixed(DVector::zeros(degree + 1));
            }
        }
        c
    }

    pub fn set(&mut self, f: usize, class: FaceClass) {
        self.classes[f] = class;
    }

    fn is_unknown(&self, f: usize) -> bool {
        matches!(self.classes[f], FaceClass::Unknown)
    }

    fn homogeneous_dirichlet(&self, mesh: &PolytopalMesh) -> bool {
        (0..self.classes.len()).all(|f| match &self.classes[f] {
            FaceClass::Unknown => !mesh.is_boundary_face(f),
            FaceClass::Fixed(g) => mesh.is_boundary_face(f) && g.amax() == 0.0,
        })
    }
}

/// Face-only Schur system plus the per-element elimination products
/// A_TT^{-1} A_TF and A_TT^{-1} b_T needed to recover element blocks.
pub struct CondensedSystem {
    pub system: SparseSystem,
    pub layout: DofLayout,
    pub n_unknowns: usize,
    unknown_offset: Vec<Option<usize>>,
    classes: FaceClasses,
    elim: Vec<DMatrix<f64>>,
    elim_rhs: Vec<DVector<f64>>,
    dirichlet: bool,
}

impl CondensedSystem {
    /// Assembles the Schur complement of every local system delivered by
    /// `local`, which gets the element id and must return the full local
    /// matrix and right-hand side in the element-then-faces layout.
    pub fn assemble(
        mesh: &PolytopalMesh,
        degree: usize,
        classes: FaceClasses,
        symmetric: bool,
        mut local: impl FnMut(usize) -> Result<(DMatrix<f64>, DVector<f64>)>,
    ) -> Result<Self> {
        let layout = DofLayout::new(mesh, degree);
        assert_eq!(classes.classes.len(), mesh.n_faces());
        let fd = layout.face_dim;
        let mut unknown_offset = vec![None; mesh.n_faces()];
        let mut n_unknowns = 0;
        for f in 0..mesh.n_faces() {
            if classes.is_unknown(f) {
                unknown_offset[f] = Some(n_unknowns);
                n_unknowns += fd;
            }
        }

        let mut system = SparseSystem::new(n_unknowns, symmetric);
        system.rhs = DMatrix::zeros(n_unknowns, 1);
        let mut elim = Vec::with_capacity(mesh.n_elements());
        let mut elim_rhs = Vec::with_capacity(mesh.n_elements());

        for e in 0..mesh.n_elements() {
            let space = layout.local_space(mesh, e);
            let (a, b) = local(e)?;
            assert_eq!(a.nrows(), space.total);
            assert_eq!(b.len(), space.total);
            let ne = space.elem_dim;
            let nf = space.total - ne;
            let att = a.view((0, 0), (ne, ne)).clone_owned();
            let atf = a.view((0, ne), (ne, nf)).clone_owned();
            let aft = a.view((ne, 0), (nf, ne)).clone_owned();
            let aff = a.view((ne, ne), (nf, nf)).clone_owned();
            let bt = DMatrix::from_column_slice(ne, 1, b.rows(0, ne).as_slice());

            let ctx = format!("element {e} condensation");
            let el = if symmetric {
                spd_solve_matrix(&att, &atf, &ctx)?
            } else {
                lu_solve_matrix(&att, &atf, &ctx)?
            };
            let er = if symmetric {
                spd_solve_matrix(&att, &bt, &ctx)?
            } else {
                lu_solve_matrix(&att, &bt, &ctx)?
            };
            let er = er.column(0).clone_owned();

            let s = &aff - &aft * &el;
            let mut g = b.rows(ne, nf).clone_owned() - &aft * &er;

            let faces = mesh.element_faces(e);
            // Fixed faces fold into the right-hand side before scattering.
            for (j, &fj) in faces.iter().enumerate() {
                if let FaceClass::Fixed(gj) = &classes.classes[fj] {
                    assert_eq!(gj.len(), fd);
                    let sj = s.view((0, j * fd), (nf, fd)).clone_owned();
                    g -= sj * gj;
                }
            }
            for (i, &fi) in faces.iter().enumerate() {
                let Some(oi) = unknown_offset[fi] else { continue };
                for r in 0..fd {
                    system.add_rhs(oi + r, g[i * fd + r]);
                }
                for (j, &fj) in faces.iter().enumerate() {
                    let Some(oj) = unknown_offset[fj] else { continue };
                    for r in 0..fd {
                        for c in 0..fd {
                            system.add(oi + r, oj + c, s[(i * fd + r, j * fd + c)]);
                        }
                    }
                }
            }

            elim.push(el);
            elim_rhs.push(er);
        }

        let dirichlet = classes.homogeneous_dirichlet(mesh);
        Ok(Self {
            system,
            layout,
            n_unknowns,
            unknown_offset,
            classes,
            elim,
            elim_rhs,
            dirichlet,
        })
    }

    /// Expands a face solution to the full hybrid vector, recovering every
    /// element block through the stored elimination products.
    pub fn recover(&self, mesh: &PolytopalMesh, face_sol: &DVector<f64>) -> DofVector {
        assert_eq!(face_sol.len(), self.n_unknowns);
        let fd = self.layout.face_dim;
        let mut u = DofVector::zeros(&self.layout, self.dirichlet);
        for f in 0..mesh.n_faces() {
            let block = self.layout.face_block(f);
            match (&self.classes.classes[f], self.unknown_offset[f]) {
                (FaceClass::Unknown, Some(o)) => {
                    for r in 0..fd {
                        u.data[block.start + r] = face_sol[o + r];
                    }
                }
                (FaceClass::Fixed(g), _) => {
                    for r in 0..fd {
                        u.data[block.start + r] = g[r];
                    }
                }
                (FaceClass::Unknown, None) => unreachable!(),
            }
        }
        for e in 0..mesh.n_elements() {
            let faces = mesh.element_faces(e);
            let mut uf = DVector::zeros(faces.len() * fd);
            for (i, &f) in faces.iter().enumerate() {
                let block = self.layout.face_block(f);
                for r in 0..fd {
                    uf[i * fd + r] = u.data[block.start + r];
                }
            }
            let ut = &self.elim_rhs[e] - &self.elim[e] * uf;
            let block = self.layout.elem_block(e);
            for r in 0..self.layout.elem_dim {
                u.data[block.start + r] = ut[r];
            }
        }
        u
    }

    /// Solves the face system and recovers the full hybrid solution.
    pub fn solve(&self, mesh: &PolytopalMesh) -> Result<DofVector> {
        let face_sol = if self.n_unknowns == 0 {
            DVector::zeros(0)
        } else {
            let x = self.system.solve().map_err(HhoError::Solve)?;
            x.column(0).clone_owned()
        };
        Ok(self.recover(mesh, &face_sol))
    }
}

/// Un-condensed sparse assembly over element blocks plus unknown face
/// blocks. Slower than condensation for solving, but it carries the global
/// Gram matrices needed for dual norms, and it doubles as an independent
/// oracle for the condensed path.
pub struct MonolithicSystem {
    pub system: SparseSystem,
    pub layout: DofLayout,
    pub n_unknowns: usize,
    index: Vec<Option<usize>>,
    fixed_values: DVector<f64>,
    dirichlet: bool,
}

impl MonolithicSystem {
    pub fn assemble(
        mesh: &PolytopalMesh,
        degree: usize,
        classes: FaceClasses,
        symmetric: bool,
        mut local: impl FnMut(usize) -> Result<(DMatrix<f64>, DVector<f64>)>,
    ) -> Result<Self> {
        let layout = DofLayout::new(mesh, degree);
        assert_eq!(classes.classes.len(), mesh.n_faces());
        let mut index = vec![None; layout.total()];
        let mut fixed_values = DVector::zeros(layout.total());
        let mut n = 0;
        for e in 0..mesh.n_elements() {
            for gi in layout.elem_block(e) {
                index[gi] = Some(n);
                n += 1;
            }
        }
        for f in 0..mesh.n_faces() {
            match &classes.classes[f] {
                FaceClass::Unknown => {
                    for gi in layout.face_block(f) {
                        index[gi] = Some(n);
                        n += 1;
                    }
                }
                FaceClass::Fixed(g) => {
                    for (r, gi) in layout.face_block(f).enumerate() {
                        fixed_values[gi] = g[r];
                    }
                }
            }
        }

        let mut system = SparseSystem::new(n, symmetric);
        for e in 0..mesh.n_elements() {
            let idx = layout.global_indices(mesh, e);
            let (a, b) = local(e)?;
            assert_eq!(a.nrows(), idx.len());
            for (i, &gi) in idx.iter().enumerate() {
                let Some(ri) = index[gi] else { continue };
                system.add_rhs(ri, b[i]);
                for (j, &gj) in idx.iter().enumerate() {
                    match index[gj] {
                        Some(rj) => system.add(ri, rj, a[(i, j)]),
                        None => {
                            let v = fixed_values[gj];
                            if v != 0.0 {
                                system.rhs[(ri, 0)] -= a[(i, j)] * v;
                            }
                        }
                    }
                }
            }
        }
        let dirichlet = classes.homogeneous_dirichlet(mesh);
        Ok(Self { system, layout, n_unknowns: n, index, fixed_values, dirichlet })
    }

    /// Drops constrained entries from a full-layout vector.
    pub fn reduce(&self, full: &DVector<f64>) -> DVector<f64> {
        let mut r = DVector::zeros(self.n_unknowns);
        for (gi, &ix) in self.index.iter().enumerate() {
            if let Some(ri) = ix {
                r[ri] = full[gi];
            }
        }
        r
    }

    /// Expands a reduced solution back to the full layout, filling in the
    /// prescribed face values.
    pub fn expand(&self, reduced: &DVector<f64>) -> DofVector {
        let mut u = DofVector::zeros(&self.layout, self.dirichlet);
        u.data.copy_from(&self.fixed_values);
        for (gi, &ix) in self.index.iter().enumerate() {
            if let Some(ri) = ix {
                u.data[gi] = reduced[ri];
            }
        }
        u
    }

    pub fn solve(&self) -> Result<DofVector> {
        let x = self.system.solve().map_err(HhoError::Solve)?;
        Ok(self.expand(&x.column(0).clone_owned()))
    }

    /// Norm of a functional given by its coefficient vector on the reduced
    /// unknowns, measured against the (SPD) assembled matrix: sqrt(rᵀ A⁻¹ r).
    pub fn dual_norm(&self, reduced: &DVector<f64>) -> Result<f64> {
        let x = self
            .system
            .solve_with_rhs(reduced)
            .map_err(HhoError::Solve)?;
        Ok(reduced.dot(&x).max(0.0).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local::{default_exactness, LocalOps, StabVariant};
    use crate::mesh::{generate_mesh, simplicial_submesh, MeshKind, Rect};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn source_rhs(ops: &LocalOps, f: &dyn Fn(crate::Point2) -> f64) -> DVector<f64> {
        let mut b = DVector::zeros(ops.space.total);
        for (i, &x) in ops.equad.points.iter().enumerate() {
            let w = ops.equad.weights[i];
            for m in 0..ops.space.elem_dim {
                b[m] += w * f(x) * ops.phi_k[(i, m)];
            }
        }
        b
    }

    /// Dense monolithic assembly of the same locals, fixed faces imposed by
    /// substitution. The oracle for the condensed path.
    fn monolithic(
        mesh: &PolytopalMesh,
        degree: usize,
        classes: &FaceClasses,
        locals: &[(DMatrix<f64>, DVector<f64>)],
    ) -> DofVector {
        let layout = DofLayout::new(mesh, degree);
        let n = layout.total();
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut b = DVector::<f64>::zeros(n);
        for e in 0..mesh.n_elements() {
            let idx = layout.global_indices(mesh, e);
            let (al, bl) = &locals[e];
            for (i, &gi) in idx.iter().enumerate() {
                b[gi] += bl[i];
                for (j, &gj) in idx.iter().enumerate() {
                    a[(gi, gj)] += al[(i, j)];
                }
            }
        }
        let mut fixed = vec![None; n];
        for f in 0..mesh.n_faces() {
            if let FaceClass::Fixed(g) = &classes.classes[f] {
                for (r, gi) in layout.face_block(f).enumerate() {
                    fixed[gi] = Some(g[r]);
                }
            }
        }
        for gi in 0..n {
            if let Some(v) = fixed[gi] {
                for gj in 0..n {
                    if gi != gj {
                        let c = a[(gj, gi)];
                        if fixed[gj].is_none() {
                            b[gj] -= c * v;
                        }
                        a[(gj, gi)] = 0.0;
                        a[(gi, gj)] = 0.0;
                    }
                }
                a[(gi, gi)] = 1.0;
                b[gi] = v;
            }
        }
        let x = a.lu().solve(&b).unwrap();
        let mut u = DofVector::zeros(&layout, false);
        u.data = x;
        u
    }

    fn poisson_locals(
        mesh: &PolytopalMesh,
        degree: usize,
    ) -> Vec<(DMatrix<f64>, DVector<f64>)> {
        let sub = simplicial_submesh(mesh).unwrap();
        (0..mesh.n_elements())
            .map(|e| {
                let ops =
                    LocalOps::build(mesh, &sub, e, degree, default_exactness(degree)).unwrap();
                let a = ops.diffusion_form(StabVariant::Hho);
                let b = source_rhs(&ops, &|x| (x.x * 2.1 + 0.3).sin() * (x.y + 0.2));
                (a, b)
            })
            .collect()
    }

    #[test]
    fn condensed_solution_matches_the_monolithic_solve() {
        for (kind, n) in [
            (MeshKind::Triangular, 3),
            (MeshKind::VoronoiPolygonal { seed: 4 }, 3),
        ] {
            for k in 0..3usize {
                let mesh = generate_mesh(kind, n, Rect::UNIT).unwrap();
                let locals = poisson_locals(&mesh, k);
                let classes = FaceClasses::dirichlet_zero(&mesh, k);
                let sys = CondensedSystem::assemble(&mesh, k, classes.clone(), true, |e| {
                    Ok(locals[e].clone())
                })
                .unwrap();
                let u = sys.solve(&mesh).unwrap();
                let v = monolithic(&mesh, k, &classes, &locals);
                let scale = v.data.amax();
                assert!(scale > 0.0);
                let diff = (&u.data - &v.data).amax();
                assert!(diff <= 1e-9 * scale, "k={k}: {diff:.3e} vs scale {scale:.3e}");
                assert!(u.dirichlet);
                let layout = DofLayout::new(&mesh, k);
                assert!(u.dirichlet_holds(&mesh, &layout));
            }
        }
    }

    #[test]
    fn fixed_face_data_reappears_in_the_solution() {
        let mesh = generate_mesh(MeshKind::Cartesian, 3, Rect::UNIT).unwrap();
        let k = 1;
        let locals = poisson_locals(&mesh, k);
        let mut rng = StdRng::seed_from_u64(11);
        let mut classes = FaceClasses::all_unknown(mesh.n_faces());
        for f in 0..mesh.n_faces() {
            if mesh.is_boundary_face(f) {
                let g = DVector::from_fn(k + 1, |_, _| rng.random_range(-1.0..1.0));
                classes.set(f, FaceClass::Fixed(g));
            }
        }
        let sys = CondensedSystem::assemble(&mesh, k, classes.clone(), true, |e| {
            Ok(locals[e].clone())
        })
        .unwrap();
        let u = sys.solve(&mesh).unwrap();
        assert!(!u.dirichlet);
        let layout = DofLayout::new(&mesh, k);
        for f in 0..mesh.n_faces() {
            if let FaceClass::Fixed(g) = &classes.classes[f] {
                for (r, gi) in layout.face_block(f).enumerate() {
                    assert_eq!(u.data[gi], g[r]);
                }
            }
        }
        let v = monolithic(&mesh, k, &classes, &locals);
        assert!((&u.data - &v.data).amax() <= 1e-9 * v.data.amax());
    }

    #[test]
    fn nonsymmetric_locals_condense_correctly() {
        let mesh = generate_mesh(MeshKind::Triangular, 2, Rect::UNIT).unwrap();
        let k = 1;
        let sub = simplicial_submesh(&mesh).unwrap();
        let mut rng = StdRng::seed_from_u64(7);
        let locals: Vec<_> = (0..mesh.n_elements())
            .map(|e| {
                let ops = LocalOps::build(&mesh, &sub, e, k, default_exactness(k)).unwrap();
                let mut a = ops.diffusion_form(StabVariant::Hho);
                // reaction block keeps the all-unknown system nonsingular,
                // the random part makes it genuinely nonsymmetric
                let nt = ops.space.total;
                a.view_mut((0, 0), (ops.space.elem_dim, ops.space.elem_dim))
                    .iter_mut()
                    .zip(ops.mass_k.iter())
                    .for_each(|(d, m)| *d += m);
                let scale = a.amax();
                for _ in 0..6 {
                    let i = rng.random_range(0..nt);
                    let j = rng.random_range(0..nt);
                    a[(i, j)] += 0.05 * scale * rng.random_range(-1.0..1.0);
                }
                let b = DVector::from_fn(nt, |i, _| ((e + i) as f64 * 0.83).cos());
                (a, b)
            })
            .collect();
        let classes = FaceClasses::all_unknown(mesh.n_faces());
        let sys = CondensedSystem::assemble(&mesh, k, classes.clone(), false, |e| {
            Ok(locals[e].clone())
        })
        .unwrap();
        let u = sys.solve(&mesh).unwrap();
        let v = monolithic(&mesh, k, &classes, &locals);
        assert!((&u.data - &v.data).amax() <= 1e-9 * v.data.amax());
    }

    #[test]
    fn all_faces_fixed_leaves_no_unknowns() {
        let mesh = generate_mesh(MeshKind::Cartesian, 1, Rect::UNIT).unwrap();
        let k = 0;
        let locals = poisson_locals(&mesh, k);
        let classes = FaceClasses::dirichlet_zero(&mesh, k);
        let sys = CondensedSystem::assemble(&mesh, k, classes.clone(), true, |e| {
            Ok(locals[e].clone())
        })
        .unwrap();
        assert_eq!(sys.n_unknowns, 0);
        let u = sys.solve(&mesh).unwrap();
        let v = monolithic(&mesh, k, &classes, &locals);
        assert!((&u.data - &v.data).amax() <= 1e-10 * v.data.amax().max(1e-30));
    }

    #[test]
    fn schur_system_is_symmetric_for_symmetric_locals() {
        let mesh = generate_mesh(MeshKind::VoronoiPolygonal { seed: 2 }, 3, Rect::UNIT).unwrap();
        let k = 2;
        let locals = poisson_locals(&mesh, k);
        let sys = CondensedSystem::assemble(
            &mesh,
            k,
            FaceClasses::dirichlet_zero(&mesh, k),
            true,
            |e| Ok(locals[e].clone()),
        )
        .unwrap();
        assert!(sys.system.symmetry_error() <= 1e-12);
        let layout = DofLayout::new(&mesh, k);
        assert_eq!(sys.n_unknowns, mesh.n_interior_faces() * layout.face_dim);
    }
}
