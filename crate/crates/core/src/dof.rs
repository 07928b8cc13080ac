//! Hybrid unknowns: one polynomial block per element and one per face, with
//! interface blocks shared by both adjacent elements so face values are
//! single-valued by construction. Global layout stores all element blocks
//! first, then all face blocks.

use crate::basis::dim_pk;
use crate::mesh::PolytopalMesh;
use nalgebra::DVector;
use std::ops::Range;

#[derive(Clone, Copy, Debug)]
pub struct DofLayout {
    pub degree: usize,
    pub n_elems: usize,
    pub n_faces: usize,
    /// dim P^k(T), the same for every element.
    pub elem_dim: usize,
    /// dim P^k(F) = k + 1.
    pub face_dim: usize,
}

impl DofLayout {
    pub fn new(mesh: &PolytopalMesh, degree: usize) -> Self {
        Self {
            degree,
            n_elems: mesh.n_elements(),
            n_faces: mesh.n_faces(),
            elem_dim: dim_pk(degree),
            face_dim: degree + 1,
        }
    }

    pub fn total(&self) -> usize {
        self.n_elems * self.elem_dim + self.n_faces * self.face_dim
    }

    pub fn elem_block(&self, e: usize) -> Range<usize> {
        let s = e * self.elem_dim;
        s..s + self.elem_dim
    }

    pub fn face_block(&self, f: usize) -> Range<usize> {
        let s = self.n_elems * self.elem_dim + f * self.face_dim;
        s..s + self.face_dim
    }

    /// Global indices of one element's local vector: element block first,
    /// then its face blocks in local face order.
    pub fn global_indices(&self, mesh: &PolytopalMesh, e: usize) -> Vec<usize> {
        let faces = mesh.element_faces(e);
        let mut idx = Vec::with_capacity(self.elem_dim + faces.len() * self.face_dim);
        idx.extend(self.elem_block(e));
        for &f in faces {
            idx.extend(self.face_block(f));
        }
        idx
    }

    pub fn local_space(&self, mesh: &PolytopalMesh, e: usize) -> LocalDofSpace {
        let n_faces = mesh.element_faces(e).len();
        let mut offsets = Vec::with_capacity(n_faces + 1);
        offsets.push(0);
        for i in 0..n_faces {
            offsets.push(self.elem_dim + i * self.face_dim);
        }
        LocalDofSpace {
            elem: e,
            degree: self.degree,
            elem_dim: self.elem_dim,
            face_dims: vec![self.face_dim; n_faces],
            total: self.elem_dim + n_faces * self.face_dim,
            offsets,
        }
    }

    pub fn gather(&self, mesh: &PolytopalMesh, e: usize, data: &DVector<f64>) -> DVector<f64> {
        let idx = self.global_indices(mesh, e);
        DVector::from_iterator(idx.len(), idx.iter().map(|&i| data[i]))
    }

    pub fn scatter_add(
        &self,
        mesh: &PolytopalMesh,
        e: usize,
        local: &DVector<f64>,
        out: &mut DVector<f64>,
    ) {
        for (r, &i) in self.global_indices(mesh, e).iter().enumerate() {
            out[i] += local[r];
        }
    }
}

/// Block structure of one element's hybrid unknowns: the element polynomial
/// block followed by one block per face, offsets indexing into the local
/// vector.
#[derive(Clone, Debug)]
pub struct LocalDofSpace {
    pub elem: usize,
    pub degree: usize,
    pub elem_dim: usize,
    pub face_dims: Vec<usize>,
    pub total: usize,
    /// offsets[0] is the element block, offsets[1 + i] the block of face i.
    pub offsets: Vec<usize>,
}

impl LocalDofSpace {
    pub fn elem_range(&self) -> Range<usize> {
        0..self.elem_dim
    }

    pub fn face_range(&self, i: usize) -> Range<usize> {
        let s = self.offsets[1 + i];
        s..s + self.face_dims[i]
    }

    pub fn n_faces(&self) -> usize {
        self.face_dims.len()
    }
}

/// Global coefficient vector over all element and face blocks. With the
/// `dirichlet` flag set the boundary-face blocks are constrained to zero and
/// `enforce_dirichlet` keeps them exactly so.
#[derive(Clone, Debug)]
pub struct DofVector {
    pub degree: usize,
    pub data: DVector<f64>,
    pub dirichlet: bool,
}

impl DofVector {
    pub fn zeros(layout: &DofLayout, dirichlet: bool) -> Self {
        Self {
            degree: layout.degree,
            data: DVector::zeros(layout.total()),
            dirichlet,
        }
    }

    pub fn enforce_dirichlet(&mut self, mesh: &PolytopalMesh, layout: &DofLayout) {
        if !self.dirichlet {
            return;
        }
        for f in 0..mesh.n_faces() {
            if mesh.is_boundary_face(f) {
                for i in layout.face_block(f) {
                    self.data[i] = 0.0;
                }
            }
        }
    }

    pub fn dirichlet_holds(&self, mesh: &PolytopalMesh, layout: &DofLayout) -> bool {
        !self.dirichlet
            || (0..mesh.n_faces()).all(|f| {
                !mesh.is_boundary_face(f) || layout.face_block(f).all(|i| self.data[i] == 0.0)
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, MeshKind, Rect};

    #[test]
    fn local_dimensions_add_up() {
        let mesh = generate_mesh(MeshKind::VoronoiPolygonal { seed: 5 }, 4, Rect::UNIT).unwrap();
        for k in 0..4 {
            let layout = DofLayout::new(&mesh, k);
            for e in 0..mesh.n_elements() {
                let sp = layout.local_space(&mesh, e);
                let m = mesh.element_faces(e).len();
                assert_eq!(sp.total, (k + 1) * (k + 2) / 2 + m * (k + 1));
                assert_eq!(sp.total, sp.elem_dim + sp.face_dims.iter().sum::<usize>());
                assert_eq!(sp.face_range(m - 1).end, sp.total);
            }
        }
    }

    #[test]
    fn gather_scatter_round_trip() {
        let mesh = generate_mesh(MeshKind::Cartesian, 2, Rect::UNIT).unwrap();
        let layout = DofLayout::new(&mesh, 1);
        let mut global = DVector::zeros(layout.total());
        for i in 0..layout.total() {
            global[i] = i as f64;
        }
        for e in 0..mesh.n_elements() {
            let local = layout.gather(&mesh, e, &global);
            let mut back = DVector::zeros(layout.total());
            layout.scatter_add(&mesh, e, &local, &mut back);
            for (r, &i) in layout.global_indices(&mesh, e).iter().enumerate() {
                assert_eq!(back[i], local[r]);
                assert_eq!(local[r], global[i]);
            }
        }
    }

    #[test]
    fn interface_blocks_are_shared() {
        let mesh = generate_mesh(MeshKind::Triangular, 1, Rect::UNIT).unwrap();
        let layout = DofLayout::new(&mesh, 2);
        // the single interface appears in both elements' index lists
        let f = (0..mesh.n_faces())
            .find(|&f| !mesh.is_boundary_face(f))
            .unwrap();
        let want: Vec<usize> = layout.face_block(f).collect();
        for e in 0..2 {
            let idx = layout.global_indices(&mesh, e);
            assert!(want.iter().all(|i| idx.contains(i)));
        }
    }

    #[test]
    fn dirichlet_flag_zeroes_boundary_blocks() {
        let mesh = generate_mesh(MeshKind::Triangular, 2, Rect::UNIT).unwrap();
        let layout = DofLayout::new(&mesh, 1);
        let mut v = DofVector::zeros(&layout, true);
        for i in 0..layout.total() {
            v.data[i] = 1.0;
        }
        assert!(!v.dirichlet_holds(&mesh, &layout));
        v.enforce_dirichlet(&mesh, &layout);
        assert!(v.dirichlet_holds(&mesh, &layout));
        // interface blocks untouched
        let f = (0..mesh.n_faces())
            .find(|&f| !mesh.is_boundary_face(f))
            .unwrap();
        assert!(layout.face_block(f).all(|i| v.data[i] == 1.0));
    }
}
