//! Polytopal meshes of planar domains: elements are simple polygons given by
//! counterclockwise face loops, faces are straight segments shared by one or
//! two elements, and the face set partitions the mesh skeleton. Construction
//! validates the invariants and rejects broken input naming the entity.

mod generate;
mod io;
mod refine;
mod regularity;
mod submesh;

pub use generate::{generate_mesh, lshape_mesh, MeshKind, Rect};
pub use io::{read_mesh, write_mesh};
pub use refine::{refine, refine_uniform, RefineResult};
pub use regularity::{regularity_report, RegularityReport};
pub use submesh::{simplicial_submesh, SimplicialSubmesh};

use crate::geometry::{
    polygon_centroid, polygon_diameter, polygon_is_convex, polygon_signed_area, Point2, Vector2,
};

#[derive(thiserror::Error, Debug)]
pub enum MeshError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("topology error: {0}")]
    Topology(String),
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Straight face: two vertex indices in the stored orientation.
#[derive(Clone, Copy, Debug)]
pub struct Face {
    pub verts: [usize; 2],
}

#[derive(Clone, Debug)]
pub struct PolytopalMesh {
    verts: Vec<Point2>,
    faces: Vec<Face>,
    /// Adjacent elements per face; second entry is None on the boundary.
    face_elems: Vec<(usize, Option<usize>)>,
    /// Face loops per element, counterclockwise.
    elem_faces: Vec<Vec<usize>>,
    /// Vertex loops per element, counterclockwise; vertex i starts face i.
    elem_verts: Vec<Vec<usize>>,
    elem_area: Vec<f64>,
    elem_centroid: Vec<Point2>,
    elem_diameter: Vec<f64>,
    elem_convex: Vec<bool>,
    /// Outward unit normal per (element, local face).
    normals: Vec<Vec<Vector2>>,
    h: f64,
}

impl PolytopalMesh {
    /// Build from vertex loops; faces are created in first-encounter order.
    pub fn from_polygons(verts: Vec<Point2>, polys: Vec<Vec<usize>>) -> Result<Self, MeshError> {
        let mut faces: Vec<Face> = Vec::new();
        let mut lookup: std::collections::HashMap<(usize, usize), usize> =
            std::collections::HashMap::new();
        let mut elem_faces = Vec::with_capacity(polys.len());
        for (e, poly) in polys.iter().enumerate() {
            if poly.len() < 3 {
                return Err(MeshError::Topology(format!(
                    "element {e} has fewer than 3 vertices"
                )));
            }
            let mut loop_faces = Vec::with_capacity(poly.len());
            for i in 0..poly.len() {
                let a = poly[i];
                let b = poly[(i + 1) % poly.len()];
                if a == b {
                    return Err(MeshError::Topology(format!(
                        "element {e} repeats vertex {a}"
                    )));
                }
                let key = (a.min(b), a.max(b));
                let id = *lookup.entry(key).or_insert_with(|| {
                    faces.push(Face { verts: [a, b] });
                    faces.len() - 1
                });
                loop_faces.push(id);
            }
            elem_faces.push(loop_faces);
        }
        Self::from_entities(verts, faces, elem_faces)
    }

    /// Build from explicit face and element tables, preserving their indices.
    pub fn from_entities(
        verts: Vec<Point2>,
        faces: Vec<Face>,
        elem_faces: Vec<Vec<usize>>,
    ) -> Result<Self, MeshError> {
        let nf = faces.len();
        for (f, face) in faces.iter().enumerate() {
            for &v in &face.verts {
                if v >= verts.len() {
                    return Err(MeshError::Topology(format!(
                        "face {f} references missing vertex {v}"
                    )));
                }
            }
        }
        // adjacency, rejecting any face shared by more than two elements
        let mut face_elems: Vec<(usize, Option<usize>)> = vec![(usize::MAX, None); nf];
        for (e, loop_faces) in elem_faces.iter().enumerate() {
            for &f in loop_faces {
                if f >= nf {
                    return Err(MeshError::Topology(format!(
                        "element {e} references missing face {f}"
                    )));
                }
                let entry = &mut face_elems[f];
                if entry.0 == usize::MAX {
                    entry.0 = e;
                } else if entry.1.is_none() {
                    entry.1 = Some(e);
                } else {
                    return Err(MeshError::Topology(format!(
                        "face {f} is shared by more than two elements"
                    )));
                }
            }
        }
        for (f, entry) in face_elems.iter().enumerate() {
            if entry.0 == usize::MAX {
                return Err(MeshError::Topology(format!(
                    "face {f} belongs to no element"
                )));
            }
        }
        // recover the ccw vertex loop of each element by chaining its faces
        let mut elem_verts = Vec::with_capacity(elem_faces.len());
        for (e, loop_faces) in elem_faces.iter().enumerate() {
            elem_verts.push(vertex_loop(e, loop_faces, &faces)?);
        }
        let mut elem_area = Vec::new();
        let mut elem_centroid = Vec::new();
        let mut elem_diameter = Vec::new();
        let mut elem_convex = Vec::new();
        let mut normals = Vec::new();
        let mut h: f64 = 0.0;
        for (e, loop_verts) in elem_verts.iter().enumerate() {
            let pts: Vec<Point2> = loop_verts.iter().map(|&v| verts[v]).collect();
            let area = polygon_signed_area(&pts);
            if area <= 0.0 {
                return Err(MeshError::Topology(format!(
                    "element {e} has non-positive area {area}"
                )));
            }
            let mut n_loc = Vec::with_capacity(pts.len());
            let mut closure = Vector2::zeros();
            for i in 0..pts.len() {
                let a = pts[i];
                let b = pts[(i + 1) % pts.len()];
                let d = b - a;
                let len = d.norm();
                if len < 1e-300 {
                    return Err(MeshError::Topology(format!(
                        "element {e} has a zero-length face"
                    )));
                }
                // right normal of a ccw traversal points outward
                let n = Vector2::new(d.y, -d.x) / len;
                closure += n * len;
                n_loc.push(n);
            }
            let diam = polygon_diameter(&pts);
            if closure.norm() > 1e-12 * pts.len() as f64 * diam {
                return Err(MeshError::Topology(format!(
                    "element {e} face normals do not close up"
                )));
            }
            h = h.max(diam);
            elem_area.push(area);
            elem_centroid.push(polygon_centroid(&pts));
            elem_diameter.push(diam);
            elem_convex.push(polygon_is_convex(&pts));
            normals.push(n_loc);
        }
        Ok(Self {
            verts,
            faces,
            face_elems,
            elem_faces,
            elem_verts,
            elem_area,
            elem_centroid,
            elem_diameter,
            elem_convex,
            normals,
            h,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.verts.len()
    }
    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }
    pub fn n_elements(&self) -> usize {
        self.elem_faces.len()
    }
    pub fn vertex(&self, v: usize) -> Point2 {
        self.verts[v]
    }
    pub fn vertices(&self) -> &[Point2] {
        &self.verts
    }
    pub fn face(&self, f: usize) -> Face {
        self.faces[f]
    }
    pub fn face_elements(&self, f: usize) -> (usize, Option<usize>) {
        self.face_elems[f]
    }
    pub fn is_boundary_face(&self, f: usize) -> bool {
        self.face_elems[f].1.is_none()
    }
    pub fn n_interior_faces(&self) -> usize {
        (0..self.n_faces()).filter(|&f| !self.is_boundary_face(f)).count()
    }
    pub fn face_endpoints(&self, f: usize) -> (Point2, Point2) {
        let [a, b] = self.faces[f].verts;
        (self.verts[a], self.verts[b])
    }
    /// Length, which for a straight face is also its diameter h_F.
    pub fn face_length(&self, f: usize) -> f64 {
        let (a, b) = self.face_endpoints(f);
        (b - a).norm()
    }
    pub fn face_midpoint(&self, f: usize) -> Point2 {
        let (a, b) = self.face_endpoints(f);
        Point2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y))
    }
    pub fn element_faces(&self, e: usize) -> &[usize] {
        &self.elem_faces[e]
    }
    pub fn element_vertices(&self, e: usize) -> &[usize] {
        &self.elem_verts[e]
    }
    pub fn element_area(&self, e: usize) -> f64 {
        self.elem_area[e]
    }
    pub fn element_centroid(&self, e: usize) -> Point2 {
        self.elem_centroid[e]
    }
    pub fn element_diameter(&self, e: usize) -> f64 {
        self.elem_diameter[e]
    }
    pub fn element_is_convex(&self, e: usize) -> bool {
        self.elem_convex[e]
    }
    /// Outward unit normal on the local face `i` of element `e`.
    pub fn normal(&self, e: usize, i: usize) -> Vector2 {
        self.normals[e][i]
    }
    /// Largest element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn total_area(&self) -> f64 {
        self.elem_area.iter().sum()
    }
    pub fn is_triangular(&self) -> bool {
        self.elem_verts.iter().all(|l| l.len() == 3)
    }
    /// Perimeter of element e.
    pub fn element_perimeter(&self, e: usize) -> f64 {
        self.elem_faces[e].iter().map(|&f| self.face_length(f)).sum()
    }
}

/// Chain an element's face loop into its ccw vertex loop. The file format
/// stores faces in loop order but with free endpoint orientation, so each
/// step picks the endpoint shared with the next face.
fn vertex_loop(e: usize, loop_faces: &[usize], faces: &[Face]) -> Result<Vec<usize>, MeshError> {
    let m = loop_faces.len();
    if m < 3 {
        return Err(MeshError::Topology(format!(
            "element {e} has fewer than 3 faces"
        )));
    }
    let mut loop_verts = Vec::with_capacity(m);
    for i in 0..m {
        let cur = faces[loop_faces[i]].verts;
        let nxt = faces[loop_faces[(i + 1) % m]].verts;
        // the vertex of cur not shared with nxt starts this edge
        let start = if cur[0] == nxt[0] || cur[0] == nxt[1] {
            cur[1]
        } else if cur[1] == nxt[0] || cur[1] == nxt[1] {
            cur[0]
        } else {
            return Err(MeshError::Topology(format!(
                "element {e}: consecutive faces {} and {} share no vertex",
                loop_faces[i],
                loop_faces[(i + 1) % m]
            )));
        };
        loop_verts.push(start);
    }
    // each consecutive pair must actually be the claimed face
    for i in 0..m {
        let a = loop_verts[i];
        let b = loop_verts[(i + 1) % m];
        let f = faces[loop_faces[i]].verts;
        if !((f[0] == a && f[1] == b) || (f[0] == b && f[1] == a)) {
            return Err(MeshError::Topology(format!(
                "element {e}: face loop does not close"
            )));
        }
    }
    Ok(loop_verts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangle_square() -> PolytopalMesh {
        let verts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        PolytopalMesh::from_polygons(verts, vec![vec![0, 1, 2], vec![0, 2, 3]]).unwrap()
    }

    #[test]
    fn two_triangles_counts_and_areas() {
        let m = two_triangle_square();
        assert_eq!(m.n_elements(), 2);
        assert_eq!(m.n_faces(), 5);
        assert_eq!(m.n_interior_faces(), 1);
        assert!((m.total_area() - 1.0).abs() < 1e-15);
        assert!((m.h() - 2f64.sqrt()).abs() < 1e-15);
        assert!(m.is_triangular());
    }

    #[test]
    fn interface_normals_are_opposite() {
        let m = two_triangle_square();
        for f in 0..m.n_faces() {
            let (e1, e2) = m.face_elements(f);
            if let Some(e2) = e2 {
                let i1 = m.element_faces(e1).iter().position(|&g| g == f).unwrap();
                let i2 = m.element_faces(e2).iter().position(|&g| g == f).unwrap();
                let n1 = m.normal(e1, i1);
                let n2 = m.normal(e2, i2);
                assert!((n1 + n2).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn outward_normals_point_away_from_centroid() {
        let m = two_triangle_square();
        for e in 0..m.n_elements() {
            let c = m.element_centroid(e);
            for (i, &f) in m.element_faces(e).iter().enumerate() {
                let mid = m.face_midpoint(f);
                assert!((mid - c).dot(&m.normal(e, i)) > 0.0);
            }
        }
    }

    #[test]
    fn face_shared_three_times_is_rejected() {
        let verts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
            Point2::new(2.0, 0.5),
        ];
        let r = PolytopalMesh::from_polygons(
            verts,
            vec![vec![0, 1, 2], vec![0, 2, 3], vec![0, 1, 2, 4]],
        );
        assert!(matches!(r, Err(MeshError::Topology(_))));
    }

    #[test]
    fn clockwise_polygon_is_rejected() {
        let verts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        let r = PolytopalMesh::from_polygons(verts, vec![vec![0, 2, 1]]);
        assert!(matches!(r, Err(MeshError::Topology(_))));
    }
}
