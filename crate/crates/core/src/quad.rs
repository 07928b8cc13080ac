//! Quadrature rules: Gauss-Legendre on segments, collapsed tensor rules on
//! triangles. Element rules on polytopal cells are unions of triangle rules
//! over the simplicial submesh, assembled in `mesh::submesh`.

use crate::geometry::{triangle_signed_area, Point2};
use crate::poly::PolyError;

/// Beyond this exactness the node solver is pointless for this crate's use;
/// requests above it are rejected rather than silently degraded.
pub const MAX_EXACTNESS: usize = 60;

/// Nodes and weights on [-1, 1]; exact for polynomials of degree 2n-1.
/// Newton iteration from the Chebyshev initial guess, machine-precision nodes.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (p2, d2) = legendre_with_derivative(n, x);
                dp = d2;
                x -= p2 / d2;
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature on the segment [a, b]. `t` holds the nodes in the chordal
/// parameter of the face basis: t in [0, 1] with x = a + t (b - a).
#[derive(Clone, Debug)]
pub struct FaceQuad {
    pub t: Vec<f64>,
    pub points: Vec<Point2>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

pub fn face_quadrature(a: Point2, b: Point2, exactness: usize) -> Result<FaceQuad, PolyError> {
    if exactness > MAX_EXACTNESS {
        return Err(PolyError::UnsupportedOrder(exactness));
    }
    let n = exactness / 2 + 1;
    let (xs, ws) = gauss_legendre(n);
    let len = (b - a).norm();
    let mut t = Vec::with_capacity(n);
    let mut points = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let ti = 0.5 * (xs[i] + 1.0);
        t.push(ti);
        points.push(a + (b - a) * ti);
        weights.push(0.5 * ws[i] * len);
    }
    Ok(FaceQuad {
        t,
        points,
        weights,
        exactness,
    })
}

/// Planar rule: points with positive weights summing to the region measure.
#[derive(Clone, Debug)]
pub struct ElemQuad {
    pub points: Vec<Point2>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl ElemQuad {
    pub fn integrate(&self, f: impl Fn(Point2) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Collapsed Gauss product rule on a triangle: the square [0,1]^2 maps onto
/// the triangle with Jacobian proportional to (1 - s), folded into the
/// weights, so all weights stay positive at every exactness.
pub fn triangle_quadrature(v: [Point2; 3], exactness: usize) -> Result<ElemQuad, PolyError> {
    if exactness > MAX_EXACTNESS {
        return Err(PolyError::UnsupportedOrder(exactness));
    }
    let area2 = 2.0 * triangle_signed_area(v[0], v[1], v[2]);
    // degree d integrand picks up one extra s power from the Jacobian
    let ns = (exactness + 2).div_ceil(2);
    let nt = (exactness + 1).div_ceil(2);
    let (xs, wxs) = gauss_legendre(ns);
    let (xt, wxt) = gauss_legendre(nt);
    let mut points = Vec::with_capacity(ns * nt);
    let mut weights = Vec::with_capacity(ns * nt);
    for i in 0..ns {
        let s = 0.5 * (xs[i] + 1.0);
        for j in 0..nt {
            let t = 0.5 * (xt[j] + 1.0);
            // reference coordinates on the unit triangle
            let xr = s;
            let yr = t * (1.0 - s);
            let x = v[0] + (v[1] - v[0]) * xr + (v[2] - v[0]) * yr;
            points.push(x);
            weights.push(0.25 * wxs[i] * wxt[j] * (1.0 - s) * area2);
        }
    }
    Ok(ElemQuad {
        points,
        weights,
        exactness,
    })
}

/// Union rule over a triangle list (a star-shaped cell's fan, typically).
pub fn triangles_quadrature(
    tris: &[[Point2; 3]],
    exactness: usize,
) -> Result<ElemQuad, PolyError> {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for t in tris {
        let q = triangle_quadrature(*t, exactness)?;
        points.extend(q.points);
        weights.extend(q.weights);
    }
    Ok(ElemQuad {
        points,
        weights,
        exactness,
    })
}
