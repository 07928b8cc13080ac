//! Conforming bisection refinement of matching triangular meshes.
//!
//! Each triangle is stored with its refinement edge first: [a, b, p] means
//! the edge (a, b) is bisected and p is the peak. The refinement edge is the
//! longest edge, which on the right-isosceles families produced by the
//! generators is unique and agrees with newest-vertex bisection across all
//! generations (children stay right isosceles). Conformity is restored by a
//! marking fixpoint: whenever any edge of a triangle is marked, its
//! refinement edge is marked too, so shared edges are split from both sides
//! at the identical midpoint and no hanging nodes remain.

use super::{MeshError, PolytopalMesh};
use crate::geometry::Point2;
use std::collections::{HashMap, HashSet};

pub struct RefineResult {
    pub mesh: PolytopalMesh,
    /// Parent element (in the input mesh) of each output element.
    pub parents: Vec<usize>,
}

type Edge = (usize, usize);

fn edge_key(a: usize, b: usize) -> Edge {
    (a.min(b), a.max(b))
}

pub fn refine(mesh: &PolytopalMesh, marked: &[usize]) -> Result<RefineResult, MeshError> {
    if !mesh.is_triangular() {
        return Err(MeshError::UnsupportedGeometry(
            "bisection refinement requires a triangular mesh".into(),
        ));
    }
    for &e in marked {
        if e >= mesh.n_elements() {
            return Err(MeshError::Topology(format!(
                "marked element {e} out of range"
            )));
        }
    }

    // canonical triangles, refinement edge first, counterclockwise
    let mut verts: Vec<Point2> = mesh.vertices().to_vec();
    let tris: Vec<[usize; 3]> = (0..mesh.n_elements())
        .map(|e| {
            let v = mesh.element_vertices(e);
            let mut best = 0;
            let mut best_len = 0.0;
            for i in 0..3 {
                let len = (verts[v[(i + 1) % 3]] - verts[v[i]]).norm();
                if len > best_len {
                    best_len = len;
                    best = i;
                }
            }
            [v[best], v[(best + 1) % 3], v[(best + 2) % 3]]
        })
        .collect();

    // mark refinement edges of marked elements, then close under the rule
    // "any marked edge forces the refinement edge"
    let mut marked_edges: HashSet<Edge> = HashSet::new();
    for &e in marked {
        marked_edges.insert(edge_key(tris[e][0], tris[e][1]));
    }
    loop {
        let mut changed = false;
        for t in &tris {
            let refine_edge = edge_key(t[0], t[1]);
            if marked_edges.contains(&refine_edge) {
                continue;
            }
            let touched = (0..3)
                .any(|i| marked_edges.contains(&edge_key(t[i], t[(i + 1) % 3])));
            if touched {
                marked_edges.insert(refine_edge);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    if marked_edges.is_empty() {
        return Ok(RefineResult {
            mesh: mesh.clone(),
            parents: (0..mesh.n_elements()).collect(),
        });
    }

    let mut midpoints: HashMap<Edge, usize> = HashMap::new();
    let mut out_tris: Vec<[usize; 3]> = Vec::with_capacity(2 * tris.len());
    let mut parents = Vec::with_capacity(2 * tris.len());
    for (e, t) in tris.iter().enumerate() {
        emit(
            *t,
            e,
            &marked_edges,
            &mut midpoints,
            &mut verts,
            &mut out_tris,
            &mut parents,
        );
    }

    let polys = out_tris.iter().map(|t| t.to_vec()).collect();
    let mesh = PolytopalMesh::from_polygons(verts, polys)?;
    Ok(RefineResult { mesh, parents })
}

/// Bisect [a, b, p] at (a, b) if that edge is marked; recurse into the
/// children [p, a, m] and [b, p, m], whose refinement edges are the old
/// parent edges. Only input-mesh edges are ever marked, so the recursion
/// stops after at most two levels.
fn emit(
    t: [usize; 3],
    parent: usize,
    marked_edges: &HashSet<Edge>,
    midpoints: &mut HashMap<Edge, usize>,
    verts: &mut Vec<Point2>,
    out: &mut Vec<[usize; 3]>,
    parents: &mut Vec<usize>,
) {
    let [a, b, p] = t;
    if !marked_edges.contains(&edge_key(a, b)) {
        out.push(t);
        parents.push(parent);
        return;
    }
    let m = *midpoints.entry(edge_key(a, b)).or_insert_with(|| {
        let mid = na_mid(verts[a], verts[b]);
        verts.push(mid);
        verts.len() - 1
    });
    emit([p, a, m], parent, marked_edges, midpoints, verts, out, parents);
    emit([b, p, m], parent, marked_edges, midpoints, verts, out, parents);
}

fn na_mid(a: Point2, b: Point2) -> Point2 {
    Point2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y))
}

pub fn refine_uniform(mesh: &PolytopalMesh) -> Result<RefineResult, MeshError> {
    let all: Vec<usize> = (0..mesh.n_elements()).collect();
    refine(mesh, &all)
}

#[cfg(test)]
mod tests {
    use super::super::{generate_mesh, lshape_mesh, MeshKind, Rect};
    use super::*;

    #[test]
    fn empty_marking_is_identity() {
        let mesh = generate_mesh(MeshKind::Triangular, 2, Rect::UNIT).unwrap();
        let r = refine(&mesh, &[]).unwrap();
        assert_eq!(r.mesh.n_elements(), mesh.n_elements());
        assert_eq!(r.parents, (0..mesh.n_elements()).collect::<Vec<_>>());
        for v in 0..mesh.n_vertices() {
            assert_eq!(r.mesh.vertex(v), mesh.vertex(v));
        }
    }

    #[test]
    fn all_marked_two_triangles_give_four() {
        let mesh = generate_mesh(MeshKind::Triangular, 1, Rect::UNIT).unwrap();
        let r = refine(&mesh, &[0, 1]).unwrap();
        assert_eq!(r.mesh.n_elements(), 4);
        assert!((r.mesh.total_area() - 1.0).abs() < 1e-14);
        // both children of each parent
        assert_eq!(r.parents, vec![0, 0, 1, 1]);
    }

    #[test]
    fn single_mark_restores_conformity() {
        let mesh = generate_mesh(MeshKind::Triangular, 2, Rect::UNIT).unwrap();
        let r = refine(&mesh, &[0]).unwrap();
        // closure must refine the neighbor across the hypotenuse as well
        assert!(r.mesh.n_elements() >= mesh.n_elements() + 2);
        assert!((r.mesh.total_area() - 1.0).abs() < 1e-14);
        // children tile their parents
        let mut child_area = vec![0.0; mesh.n_elements()];
        for c in 0..r.mesh.n_elements() {
            child_area[r.parents[c]] += r.mesh.element_area(c);
        }
        for e in 0..mesh.n_elements() {
            assert!((child_area[e] - mesh.element_area(e)).abs() < 1e-14);
        }
    }

    #[test]
    fn two_uniform_rounds_halve_h() {
        let mesh = generate_mesh(MeshKind::Triangular, 2, Rect::UNIT).unwrap();
        let r1 = refine_uniform(&mesh).unwrap();
        let r2 = refine_uniform(&r1.mesh).unwrap();
        assert_eq!(r1.mesh.n_elements(), 2 * mesh.n_elements());
        assert_eq!(r2.mesh.n_elements(), 4 * mesh.n_elements());
        assert!((r1.mesh.h() - mesh.h() / 2f64.sqrt()).abs() < 1e-14);
        assert!((r2.mesh.h() - mesh.h() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn lshape_refines_conformingly() {
        let mesh = lshape_mesh(1);
        let r = refine(&mesh, &[0]).unwrap();
        assert!((r.mesh.total_area() - 3.0).abs() < 1e-13);
        assert!(r.mesh.is_triangular());
    }

    #[test]
    fn polygonal_mesh_rejected() {
        let mesh = generate_mesh(MeshKind::Cartesian, 2, Rect::UNIT).unwrap();
        assert!(matches!(
            refine(&mesh, &[0]),
            Err(MeshError::UnsupportedGeometry(_))
        ));
    }
}
