//! Shape-regularity diagnostics gathered from the mesh and its simplicial
//! submesh. Reported only; nothing here rejects a mesh.

use super::{simplicial_submesh, MeshError, PolytopalMesh};

#[derive(Clone, Copy, Debug)]
pub struct RegularityReport {
    pub h: f64,
    /// min over subtriangles of inradius / diameter.
    pub min_inradius_ratio: f64,
    /// min over (element, subtriangle) of h_tau / h_T.
    pub min_subtriangle_ratio: f64,
    /// min over (element, face) of h_F / h_T.
    pub min_face_ratio: f64,
    /// max number of faces of a single element.
    pub max_faces_per_element: usize,
    /// Single regularity parameter: worst of the ratios above, with the face
    /// ratio entering through its square root.
    pub rho_estimate: f64,
}

pub fn regularity_report(mesh: &PolytopalMesh) -> Result<RegularityReport, MeshError> {
    let sub = simplicial_submesh(mesh)?;
    let mut min_inr = f64::INFINITY;
    let mut min_sub = f64::INFINITY;
    for t in 0..sub.n_tris() {
        min_inr = min_inr.min(sub.inradius[t] / sub.diameter[t]);
        min_sub = min_sub.min(sub.diameter[t] / mesh.element_diameter(sub.parent[t]));
    }
    let mut min_face = f64::INFINITY;
    let mut max_faces = 0;
    for e in 0..mesh.n_elements() {
        let faces = mesh.element_faces(e);
        max_faces = max_faces.max(faces.len());
        for &f in faces {
            min_face = min_face.min(mesh.face_length(f) / mesh.element_diameter(e));
        }
    }
    Ok(RegularityReport {
        h: mesh.h(),
        min_inradius_ratio: min_inr,
        min_subtriangle_ratio: min_sub,
        min_face_ratio: min_face,
        max_faces_per_element: max_faces,
        rho_estimate: min_inr.min(min_sub).min(min_face.sqrt()),
    })
}
