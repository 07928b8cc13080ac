//! Residual-type a posteriori machinery: node-averaged conforming recovery
//! of the reconstruction, the three local error indicators with explicit
//! Poincare and trace constants, and a marked-bisection adaptive loop.

use crate::basis::ElementBasis;
use crate::dof::DofVector;
use crate::field::BrokenField;
use crate::local::{default_exactness, StabVariant};
use crate::mesh::{refine, PolytopalMesh, SimplicialSubmesh};
use crate::poisson::Poisson;
use crate::poly::lu_solve_matrix;
use crate::quad::triangle_quadrature;
use crate::{HhoError, Point2, Result, Vector2};
use nalgebra::{DMatrix, DVector};
use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

/// Continuous piecewise polynomial on the simplicial submesh, stored per
/// triangle in a local monomial basis. Continuity is by construction: the
/// coefficients interpolate shared nodal values.
pub struct ConformingField {
    pub degree: usize,
    pub bases: Vec<ElementBasis>,
    pub coeffs: Vec<DVector<f64>>,
}

impl ConformingField {
    pub fn value(&self, t: usize, x: Point2) -> f64 {
        self.bases[t].value(&self.coeffs[t], x)
    }

    pub fn gradient(&self, t: usize, x: Point2) -> Vector2 {
        self.bases[t].gradient(&self.coeffs[t], x)
    }
}

/// Identity of a Lagrange lattice node shared across triangles. Edge nodes
/// count steps from the smaller vertex id so both sides agree; interior
/// nodes are private to their triangle.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum NodeKey {
    Vertex(usize),
    Edge(usize, usize, usize),
    Interior(usize, usize),
}

fn edge_key(p: usize, q: usize, r: usize, l: usize) -> NodeKey {
    if p < q {
        NodeKey::Edge(p, q, r)
    } else {
        NodeKey::Edge(q, p, l - r)
    }
}

/// Lattice multi-indices (i, j) with i + j <= l, in a fixed order.
fn lattice(l: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..=l {
        for j in 0..=(l - i) {
            out.push((i, j));
        }
    }
    out
}

/// Key and canonical coordinates of lattice node m of triangle t. The
/// coordinates are computed from the key, not the triangle, so shared nodes
/// land on bitwise identical points from every side.
fn node_of(sub: &SimplicialSubmesh, t: usize, ij: (usize, usize), m: usize, l: usize) -> (NodeKey, Point2) {
    let [v0, v1, v2] = sub.tris[t];
    let (i, j) = ij;
    let key = if i == 0 && j == 0 {
        NodeKey::Vertex(v0)
    } else if i == l && j == 0 {
        NodeKey::Vertex(v1)
    } else if i == 0 && j == l {
        NodeKey::Vertex(v2)
    } else if j == 0 {
        edge_key(v0, v1, i, l)
    } else if i == 0 {
        edge_key(v0, v2, j, l)
    } else if i + j == l {
        edge_key(v1, v2, j, l)
    } else {
        NodeKey::Interior(t, m)
    };
    let x = match key {
        NodeKey::Vertex(v) => sub.verts[v],
        NodeKey::Edge(a, b, r) => {
            let s = r as f64 / l as f64;
            sub.verts[a] + s * (sub.verts[b] - sub.verts[a])
        }
        NodeKey::Interior(..) => {
            let (a, b, c) = (sub.verts[v0], sub.verts[v1], sub.verts[v2]);
            let (li, lj) = (i as f64 / l as f64, j as f64 / l as f64);
            let l0 = 1.0 - li - lj;
            Point2::new(
                l0 * a.x + li * b.x + lj * c.x,
                l0 * a.y + li * b.y + lj * c.y,
            )
        }
    };
    (key, x)
}

/// Averages a broken field into a continuous one of the given degree on the
/// submesh: every Lagrange node takes the mean of the values from the
/// triangles containing it, boundary nodes are set to zero.
pub fn node_average(
    mesh: &PolytopalMesh,
    sub: &SimplicialSubmesh,
    w: &BrokenField,
    degree: usize,
) -> Result<ConformingField> {
    if degree == 0 {
        return Err(HhoError::Unsupported(
            "node averaging needs degree >= 1, constants cannot match boundary values".into(),
        ));
    }
    let l = degree;
    let lat = lattice(l);

    // submesh edges lying on boundary faces of the parent mesh
    let mut bverts: HashSet<usize> = HashSet::new();
    let mut bedges: HashSet<(usize, usize)> = HashSet::new();
    for t in 0..sub.n_tris() {
        for i in 0..3 {
            if let Some(f) = sub.edge_parent_face[t][i] {
                if mesh.is_boundary_face(f) {
                    let a = sub.tris[t][i];
                    let b = sub.tris[t][(i + 1) % 3];
                    bedges.insert((a.min(b), a.max(b)));
                    bverts.insert(a);
                    bverts.insert(b);
                }
            }
        }
    }

    let mut acc: HashMap<NodeKey, (f64, usize)> = HashMap::new();
    for t in 0..sub.n_tris() {
        let e = sub.parent[t];
        for (m, &ij) in lat.iter().enumerate() {
            let (key, x) = node_of(sub, t, ij, m, l);
            let slot = acc.entry(key).or_insert((0.0, 0));
            slot.0 += w.value(mesh, e, x);
            slot.1 += 1;
        }
    }

    let nodal = |key: NodeKey| -> f64 {
        let on_boundary = match key {
            NodeKey::Vertex(v) => bverts.contains(&v),
            NodeKey::Edge(a, b, _) => bedges.contains(&(a, b)),
            NodeKey::Interior(..) => false,
        };
        if on_boundary {
            return 0.0;
        }
        let (sum, count) = acc[&key];
        sum / count as f64
    };

    let mut bases = Vec::with_capacity(sub.n_tris());
    let mut coeffs = Vec::with_capacity(sub.n_tris());
    for t in 0..sub.n_tris() {
        let [a, b, c] = sub.tri_corners(t);
        let center = Point2::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0);
        let basis = ElementBasis::new(center, sub.diameter[t], l);
        let n = basis.dim();
        let mut vand = DMatrix::zeros(n, n);
        let mut vals = DVector::zeros(n);
        for (m, &ij) in lat.iter().enumerate() {
            let (key, x) = node_of(sub, t, ij, m, l);
            vand.row_mut(m).copy_from_slice(basis.eval(x).as_slice());
            vals[m] = nodal(key);
        }
        let sol = lu_solve_matrix(
            &vand,
            &DMatrix::from_column_slice(n, 1, vals.as_slice()),
            &format!("Lagrange interpolation on submesh triangle {t}"),
        )
        .map_err(HhoError::Poly)?;
        bases.push(basis);
        coeffs.push(sol.column(0).into_owned());
    }

    Ok(ConformingField {
        degree: l,
        bases,
        coeffs,
    })
}

/// Local error indicators of one solve, with the constants they used and the
/// guaranteed global bound they add up to.
#[derive(Clone, Debug)]
pub struct EstimatorField {
    /// Nonconformity: distance of the reconstruction to the recovered
    /// conforming field, elementwise.
    pub eta_nc: Vec<f64>,
    /// Oscillation-free volume residual, weighted by the Poincare constant.
    pub eta_res: Vec<f64>,
    /// Boundary residual of the stabilization.
    pub eta_sta: Vec<f64>,
    pub c_p: Vec<f64>,
    pub c_f: Vec<f64>,
    /// The trace constant formula holds on simplices; on polygonal elements
    /// it is applied with the polygon's quantities as a heuristic.
    pub heuristic_cf: bool,
    /// Upper bound on the broken gradient error.
    pub bound: f64,
}

impl EstimatorField {
    /// Contribution of one element to the squared bound.
    pub fn squared_indicator(&self, e: usize) -> f64 {
        self.eta_nc[e].powi(2) + (self.eta_res[e] + self.eta_sta[e]).powi(2)
    }

    /// Overestimation factor against the true broken gradient error.
    pub fn effectivity(&self, broken_grad_error: f64) -> f64 {
        self.bound / broken_grad_error
    }
}

/// Evaluates the three indicators on every element. The conforming field is
/// expected to be the node average of the reconstruction, but any continuous
/// field vanishing on the boundary yields a valid bound.
pub fn local_estimators(
    p: &Poisson,
    u: &DofVector,
    f: &dyn Fn(Point2) -> f64,
    ustar: &ConformingField,
) -> Result<EstimatorField> {
    let mesh = p.mesh;
    let sub = &p.sub;
    let n = mesh.n_elements();
    let mut eta_nc = vec![0.0; n];
    let mut eta_res = vec![0.0; n];
    let mut eta_sta = vec![0.0; n];
    let mut c_p = vec![0.0; n];
    let mut c_f = vec![0.0; n];

    for e in 0..n {
        let ops = p.ops(e);
        let ul = p.layout.gather(mesh, e, &u.data);
        let pot = &ops.potential * &ul;

        let mut nc2 = 0.0;
        for &t in &sub.elem_tris[e] {
            let q = triangle_quadrature(sub.tri_corners(t), default_exactness(p.degree))?;
            for (i, &x) in q.points.iter().enumerate() {
                let d = ops.basis_k1.gradient(&pot, x) - ustar.gradient(t, x);
                nc2 += q.weights[i] * d.norm_squared();
            }
        }
        eta_nc[e] = nc2.max(0.0).sqrt();

        // volume residual minus its mean, the laplacian taken exactly on the
        // reconstruction coefficients
        let lap = ops.basis_k1.laplacian_map() * &pot;
        let residual = |x: Point2| f(x) + ops.basis_k1.value(&lap, x);
        let mean = ops.equad.integrate(residual) / ops.area;
        let res2 = ops.equad.integrate(|x| (residual(x) - mean).powi(2));

        let cp = if mesh.element_is_convex(e) { 1.0 / PI } else { 1.0 };
        // trace constant for simplices, 2/d + cp with d = 2
        let cf = cp * (ops.h_t * mesh.element_perimeter(e) / ops.area) * (1.0 + cp);
        c_p[e] = cp;
        c_f[e] = cf;
        eta_res[e] = cp * ops.h_t * res2.max(0.0).sqrt();

        let stab = ops.stabilization(p.variant);
        let mut s2 = 0.0;
        for (i, r) in ops.boundary_residual(&stab)?.iter().enumerate() {
            let rv = r * &ul;
            s2 += (&ops.face_mass[i] * &rv).dot(&rv);
        }
        eta_sta[e] = (cf * ops.h_t * s2.max(0.0)).sqrt();
    }

    let heuristic_cf = (0..n).any(|e| mesh.element_vertices(e).len() != 3);
    let mut field = EstimatorField {
        eta_nc,
        eta_res,
        eta_sta,
        c_p,
        c_f,
        heuristic_cf,
        bound: 0.0,
    };
    field.bound = (0..n).map(|e| field.squared_indicator(e)).sum::<f64>().sqrt();
    Ok(field)
}

/// Node-averages the reconstruction and evaluates the indicators.
pub fn estimate(p: &Poisson, u: &DofVector, f: &dyn Fn(Point2) -> f64) -> Result<EstimatorField> {
    let rec = p.reconstruct(u);
    let ustar = node_average(p.mesh, &p.sub, &rec, p.degree + 1)?;
    local_estimators(p, u, f, &ustar)
}

/// Smallest index set whose indicators hold the fraction theta of the total,
/// greedily from the largest. Values are squared indicators.
pub fn dorfler_mark(indicators: &[f64], theta: f64) -> Vec<usize> {
    // theta >= 1 means every element; spelling that out avoids ties against
    // a floating-point total
    if theta >= 1.0 {
        return (0..indicators.len()).collect();
    }
    let total: f64 = indicators.iter().sum();
    let mut idx: Vec<usize> = (0..indicators.len()).collect();
    idx.sort_by(|&a, &b| indicators[b].total_cmp(&indicators[a]));
    let mut out = Vec::new();
    let mut acc = 0.0;
    for i in idx {
        if acc >= theta * total && !out.is_empty() {
            break;
        }
        acc += indicators[i];
        out.push(i);
    }
    out
}

/// One round of the adaptive loop: the mesh it solved on, the solution, the
/// indicators, and error diagnostics when the exact solution is known.
pub struct AdaptStep {
    pub mesh: PolytopalMesh,
    pub u: DofVector,
    pub est: EstimatorField,
    pub n_dof: usize,
    /// Broken gradient error of the reconstruction.
    pub error: Option<f64>,
    pub effectivity: Option<f64>,
}

/// Exact solution hooks for convergence diagnostics.
pub struct Exact<'a> {
    pub u: &'a dyn Fn(Point2) -> f64,
    pub grad: &'a dyn Fn(Point2) -> Vector2,
}

pub struct AdaptOptions {
    /// Marked fraction of the squared estimator.
    pub theta: f64,
    pub max_iter: usize,
    /// Stop once the global bound falls below this.
    pub tol: f64,
}

/// Solve, estimate, mark, bisect until the bound meets the tolerance or the
/// iteration budget runs out. Requires a triangular starting mesh.
pub fn adapt_loop(
    start: PolytopalMesh,
    degree: usize,
    variant: StabVariant,
    f: &dyn Fn(Point2) -> f64,
    exact: Option<&Exact>,
    opts: &AdaptOptions,
) -> Result<Vec<AdaptStep>> {
    let mut steps: Vec<AdaptStep> = Vec::new();
    let mut mesh = start;
    for _ in 0..opts.max_iter {
        let (u, est, error, effectivity, n_dof) = {
            let p = Poisson::new(&mesh, degree, variant)?;
            let u = p.solve(f)?;
            let est = estimate(&p, &u, f)?;
            let (error, effectivity) = match exact {
                Some(ex) => {
                    let r = p.compute_errors(&u, ex.u, ex.grad)?;
                    (Some(r.broken_grad), Some(est.effectivity(r.broken_grad)))
                }
                None => (None, None),
            };
            let n_dof = mesh.n_interior_faces() * p.layout.face_dim;
            (u, est, error, effectivity, n_dof)
        };
        let done = est.bound <= opts.tol;
        let next = if done {
            None
        } else {
            let eta2: Vec<f64> = (0..mesh.n_elements()).map(|e| est.squared_indicator(e)).collect();
            let marked = dorfler_mark(&eta2, opts.theta);
            Some(refine(&mesh, &marked)?.mesh)
        };
        steps.push(AdaptStep {
            mesh,
            u,
            est,
            n_dof,
            error,
            effectivity,
        });
        match next {
            Some(m) => mesh = m,
            None => break,
        }
    }
    Ok(steps)
}
