//! Matching simplicial submesh: every element is fanned into triangles from
//! its centroid, triangular elements map to themselves. Used for quadrature
//! on general polygons, nodal averaging, and visualization output.

use super::{MeshError, PolytopalMesh};
use crate::geometry::{triangle_signed_area, Point2};

#[derive(Clone, Debug)]
pub struct SimplicialSubmesh {
    /// Parent vertices first, then one centroid per fanned element.
    pub verts: Vec<Point2>,
    /// Counterclockwise vertex triples.
    pub tris: Vec<[usize; 3]>,
    /// Parent element of each triangle.
    pub parent: Vec<usize>,
    /// For edge i = (v_i, v_{i+1}) of each triangle: the parent face it lies
    /// on, or None for an interior fan edge.
    pub edge_parent_face: Vec<[Option<usize>; 3]>,
    pub inradius: Vec<f64>,
    pub diameter: Vec<f64>,
    /// Triangles of each parent element.
    pub elem_tris: Vec<Vec<usize>>,
}

impl SimplicialSubmesh {
    pub fn n_tris(&self) -> usize {
        self.tris.len()
    }

    pub fn tri_corners(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.tris[t];
        [self.verts[a], self.verts[b], self.verts[c]]
    }

    pub fn tri_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.tri_corners(t);
        triangle_signed_area(a, b, c)
    }
}

pub fn simplicial_submesh(mesh: &PolytopalMesh) -> Result<SimplicialSubmesh, MeshError> {
    let mut verts: Vec<Point2> = mesh.vertices().to_vec();
    let mut tris = Vec::new();
    let mut parent = Vec::new();
    let mut edge_parent_face = Vec::new();
    let mut inradius = Vec::new();
    let mut diameter = Vec::new();
    let mut elem_tris = Vec::with_capacity(mesh.n_elements());

    for e in 0..mesh.n_elements() {
        let vloop = mesh.element_vertices(e);
        let floop = mesh.element_faces(e);
        let mut mine = Vec::new();
        if vloop.len() == 3 {
            let tri = [vloop[0], vloop[1], vloop[2]];
            push_tri(
                &verts,
                tri,
                [Some(floop[0]), Some(floop[1]), Some(floop[2])],
                e,
                &mut tris,
                &mut parent,
                &mut edge_parent_face,
                &mut inradius,
                &mut diameter,
                &mut mine,
            )?;
        } else {
            let c = mesh.element_centroid(e);
            let cid = verts.len();
            verts.push(c);
            for i in 0..vloop.len() {
                let a = vloop[i];
                let b = vloop[(i + 1) % vloop.len()];
                push_tri(
                    &verts,
                    [a, b, cid],
                    [Some(floop[i]), None, None],
                    e,
                    &mut tris,
                    &mut parent,
                    &mut edge_parent_face,
                    &mut inradius,
                    &mut diameter,
                    &mut mine,
                )?;
            }
        }
        elem_tris.push(mine);
    }

    Ok(SimplicialSubmesh {
        verts,
        tris,
        parent,
        edge_parent_face,
        inradius,
        diameter,
        elem_tris,
    })
}

#[allow(clippy::too_many_arguments)]
fn push_tri(
    verts: &[Point2],
    tri: [usize; 3],
    edges: [Option<usize>; 3],
    e: usize,
    tris: &mut Vec<[usize; 3]>,
    parent: &mut Vec<usize>,
    edge_parent_face: &mut Vec<[Option<usize>; 3]>,
    inradius: &mut Vec<f64>,
    diameter: &mut Vec<f64>,
    mine: &mut Vec<usize>,
) -> Result<(), MeshError> {
    let [a, b, c] = [verts[tri[0]], verts[tri[1]], verts[tri[2]]];
    let area = triangle_signed_area(a, b, c);
    if area <= 0.0 {
        return Err(MeshError::UnsupportedGeometry(format!(
            "element {e} is not star-shaped with respect to its centroid"
        )));
    }
    let la = (b - a).norm();
    let lb = (c - b).norm();
    let lc = (a - c).norm();
    mine.push(tris.len());
    tris.push(tri);
    parent.push(e);
    edge_parent_face.push(edges);
    inradius.push(2.0 * area / (la + lb + lc));
    diameter.push(la.max(lb).max(lc));
    Ok(())
}
