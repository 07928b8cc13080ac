//! Mesh families on axis-aligned rectangles: structured triangles, squares,
//! and clipped Voronoi cells of a jittered lattice.

use super::{MeshError, PolytopalMesh};
use crate::geometry::{Point2, Vector2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MeshKind {
    Triangular,
    Cartesian,
    /// Voronoi diagram of an n x n lattice jittered by the seeded rng.
    VoronoiPolygonal {
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect {
        x0: 0.0,
        y0: 0.0,
        x1: 1.0,
        y1: 1.0,
    };
    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

pub fn generate_mesh(kind: MeshKind, n: usize, domain: Rect) -> Result<PolytopalMesh, MeshError> {
    if n == 0 || domain.x1 <= domain.x0 || domain.y1 <= domain.y0 {
        return Err(MeshError::UnsupportedGeometry(format!(
            "degenerate request: n={n}, domain={domain:?}"
        )));
    }
    match kind {
        MeshKind::Triangular => Ok(triangular(n, domain)),
        MeshKind::Cartesian => Ok(cartesian(n, domain)),
        MeshKind::VoronoiPolygonal { seed } => voronoi(n, domain, seed),
    }
}

fn grid_points(n: usize, domain: Rect) -> Vec<Point2> {
    let mut verts = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            verts.push(Point2::new(
                domain.x0 + (domain.x1 - domain.x0) * i as f64 / n as f64,
                domain.y0 + (domain.y1 - domain.y0) * j as f64 / n as f64,
            ));
        }
    }
    verts
}

/// 2 n^2 right triangles, every cell split along its up diagonal.
fn triangular(n: usize, domain: Rect) -> PolytopalMesh {
    let verts = grid_points(n, domain);
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut polys = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            polys.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            polys.push(vec![id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    PolytopalMesh::from_polygons(verts, polys).expect("structured mesh is valid")
}

fn cartesian(n: usize, domain: Rect) -> PolytopalMesh {
    let verts = grid_points(n, domain);
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut polys = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            polys.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    PolytopalMesh::from_polygons(verts, polys).expect("structured mesh is valid")
}

/// Right-isosceles triangulation of the L-shaped domain (-1,1)^2 minus the
/// closed quadrant [0,1] x [-1,0]; the re-entrant corner sits at the origin.
pub fn lshape_mesh(n: usize) -> PolytopalMesh {
    let n2 = 2 * n;
    let verts = grid_points(
        n2,
        Rect {
            x0: -1.0,
            y0: -1.0,
            x1: 1.0,
            y1: 1.0,
        },
    );
    let id = |i: usize, j: usize| j * (n2 + 1) + i;
    let mut polys = Vec::new();
    for j in 0..n2 {
        for i in 0..n2 {
            if i >= n && j < n {
                continue; // removed quadrant
            }
            polys.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            polys.push(vec![id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    // unused vertices inside the removed quadrant are dropped by compaction
    compact(verts, polys)
}

fn compact(verts: Vec<Point2>, polys: Vec<Vec<usize>>) -> PolytopalMesh {
    let mut used = vec![usize::MAX; verts.len()];
    let mut kept = Vec::new();
    let mut out_polys = Vec::with_capacity(polys.len());
    for poly in polys {
        let mut q = Vec::with_capacity(poly.len());
        for v in poly {
            if used[v] == usize::MAX {
                used[v] = kept.len();
                kept.push(verts[v]);
            }
            q.push(used[v]);
        }
        out_polys.push(q);
    }
    PolytopalMesh::from_polygons(kept, out_polys).expect("structured mesh is valid")
}

/// Clipped Voronoi cells of a jittered lattice. Each cell starts as the
/// domain rectangle and is cut by the bisector half-planes of nearby sites;
/// the jitter is small enough that sites further than four lattice steps
/// cannot contribute a cut. Shared cell boundaries are produced twice with
/// identical endpoints up to rounding, so vertices are welded on a fine grid
/// before the polygons are assembled into a conforming mesh.
fn voronoi(n: usize, domain: Rect, seed: u64) -> Result<PolytopalMesh, MeshError> {
    let sx = (domain.x1 - domain.x0) / n as f64;
    let sy = (domain.y1 - domain.y0) / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = 0.28;
    let mut sites = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let jx: f64 = rng.random_range(-amp..amp);
            let jy: f64 = rng.random_range(-amp..amp);
            sites.push(Point2::new(
                domain.x0 + sx * (i as f64 + 0.5 + jx),
                domain.y0 + sy * (j as f64 + 0.5 + jy),
            ));
        }
    }
    let weld = 0.5e-9 * sx.min(sy);
    let mut welder = Welder::new(weld);
    let mut polys = Vec::with_capacity(sites.len());
    let reach = 4i64;
    for j in 0..n as i64 {
        for i in 0..n as i64 {
            let p = sites[(j * n as i64 + i) as usize];
            let mut cell = vec![
                Point2::new(domain.x0, domain.y0),
                Point2::new(domain.x1, domain.y0),
                Point2::new(domain.x1, domain.y1),
                Point2::new(domain.x0, domain.y1),
            ];
            for dj in -reach..=reach {
                for di in -reach..=reach {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (qi, qj) = (i + di, j + dj);
                    if qi < 0 || qj < 0 || qi >= n as i64 || qj >= n as i64 {
                        continue;
                    }
                    let q = sites[(qj * n as i64 + qi) as usize];
                    // keep the side of the bisector containing p
                    let mid = na_mid(p, q);
                    let nrm = q - p;
                    cell = clip_halfplane(&cell, mid, nrm);
                    if cell.len() < 3 {
                        return Err(MeshError::UnsupportedGeometry(format!(
                            "voronoi cell {} collapsed (seed {seed})",
                            j * n as i64 + i
                        )));
                    }
                }
            }
            let ids: Vec<usize> = cell.iter().map(|&x| welder.id(x)).collect();
            let mut dedup: Vec<usize> = Vec::with_capacity(ids.len());
            for v in ids {
                if dedup.last() != Some(&v) {
                    dedup.push(v);
                }
            }
            if dedup.first() == dedup.last() {
                dedup.pop();
            }
            if dedup.len() < 3 {
                return Err(MeshError::UnsupportedGeometry(format!(
                    "voronoi cell {} degenerated under welding (seed {seed})",
                    j * n as i64 + i
                )));
            }
            polys.push(dedup);
        }
    }
    let mesh = PolytopalMesh::from_polygons(welder.verts, polys)?;
    // a missed cut would make cells overlap and break the area partition
    let area_err = (mesh.total_area() - domain.area()).abs();
    if area_err > 1e-9 * domain.area() {
        return Err(MeshError::UnsupportedGeometry(format!(
            "voronoi cells do not partition the domain (seed {seed})"
        )));
    }
    Ok(mesh)
}

fn na_mid(a: Point2, b: Point2) -> Point2 {
    Point2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y))
}

/// Sutherland-Hodgman step: keep the closed side with (x - mid) . nrm <= 0.
fn clip_halfplane(poly: &[Point2], mid: Point2, nrm: Vector2) -> Vec<Point2> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    let side = |x: Point2| (x - mid).dot(&nrm);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let sa = side(a);
        let sb = side(b);
        if sa <= 0.0 {
            out.push(a);
        }
        if (sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0) {
            let t = sa / (sa - sb);
            out.push(a + (b - a) * t);
        }
    }
    out
}

/// Welds nearly coincident points onto shared vertex ids using a snap grid;
/// candidate neighbors over a 3x3 stencil absorb points straddling cell
/// boundaries.
struct Welder {
    tol: f64,
    verts: Vec<Point2>,
    grid: std::collections::HashMap<(i64, i64), Vec<usize>>,
}

impl Welder {
    fn new(tol: f64) -> Self {
        Self {
            tol,
            verts: Vec::new(),
            grid: std::collections::HashMap::new(),
        }
    }

    fn id(&mut self, p: Point2) -> usize {
        let cx = (p.x / (2.0 * self.tol)).floor() as i64;
        let cy = (p.y / (2.0 * self.tol)).floor() as i64;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = self.grid.get(&(cx + dx, cy + dy)) {
                    for &v in list {
                        if (self.verts[v] - p).norm() <= self.tol {
                            return v;
                        }
                    }
                }
            }
        }
        let v = self.verts.len();
        self.verts.push(p);
        self.grid.entry((cx, cy)).or_default().push(v);
        v
    }
}
