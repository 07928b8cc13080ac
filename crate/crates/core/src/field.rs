//! Broken polynomial fields: one coefficient vector per element in that
//! element's scaled basis, no continuity implied.

use crate::local::element_basis;
use crate::mesh::PolytopalMesh;
use crate::{Point2, Vector2};
use nalgebra::DVector;

#[derive(Clone, Debug)]
pub struct BrokenField {
    pub degree: usize,
    pub coeffs: Vec<DVector<f64>>,
}

impl BrokenField {
    pub fn zeros(mesh: &PolytopalMesh, degree: usize) -> Self {
        let dim = crate::basis::dim_pk(degree);
        Self {
            degree,
            coeffs: vec![DVector::zeros(dim); mesh.n_elements()],
        }
    }

    pub fn value(&self, mesh: &PolytopalMesh, e: usize, x: Point2) -> f64 {
        element_basis(mesh, e, self.degree).value(&self.coeffs[e], x)
    }

    pub fn gradient(&self, mesh: &PolytopalMesh, e: usize, x: Point2) -> Vector2 {
        element_basis(mesh, e, self.degree).gradient(&self.coeffs[e], x)
    }
}
