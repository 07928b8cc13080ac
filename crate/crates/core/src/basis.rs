//! Scaled monomial bases. Element bases are monomials in (x - x_T)/h_T,
//! graded ordering (0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...; face bases
//! are powers of the centered chordal parameter t - 1/2.

use crate::geometry::{Point2, Vector2};
use nalgebra::{DMatrix, DVector};

/// dim P^l in two variables.
pub fn dim_pk(l: usize) -> usize {
    (l + 1) * (l + 2) / 2
}

/// Graded multi-index list for P^l.
pub fn exponents(l: usize) -> Vec<(u32, u32)> {
    let mut e = Vec::with_capacity(dim_pk(l));
    for d in 0..=l as u32 {
        for j in 0..=d {
            e.push((d - j, j));
        }
    }
    e
}

#[derive(Clone, Debug)]
pub struct ElementBasis {
    pub degree: usize,
    pub center: Point2,
    pub scale: f64,
    pub exps: Vec<(u32, u32)>,
}

impl ElementBasis {
    pub fn new(center: Point2, scale: f64, degree: usize) -> Self {
        Self {
            degree,
            center,
            scale,
            exps: exponents(degree),
        }
    }

    pub fn dim(&self) -> usize {
        self.exps.len()
    }

    fn local(&self, x: Point2) -> (f64, f64) {
        (
            (x.x - self.center.x) / self.scale,
            (x.y - self.center.y) / self.scale,
        )
    }

    pub fn eval(&self, x: Point2) -> DVector<f64> {
        let (xi, eta) = self.local(x);
        DVector::from_iterator(
            self.dim(),
            self.exps
                .iter()
                .map(|&(i, j)| xi.powi(i as i32) * eta.powi(j as i32)),
        )
    }

    pub fn eval_grad(&self, x: Point2) -> Vec<Vector2> {
        let (xi, eta) = self.local(x);
        self.exps
            .iter()
            .map(|&(i, j)| {
                let dx = if i == 0 {
                    0.0
                } else {
                    i as f64 * xi.powi(i as i32 - 1) * eta.powi(j as i32) / self.scale
                };
                let dy = if j == 0 {
                    0.0
                } else {
                    j as f64 * xi.powi(i as i32) * eta.powi(j as i32 - 1) / self.scale
                };
                Vector2::new(dx, dy)
            })
            .collect()
    }

    /// Rows = points, columns = basis functions.
    pub fn eval_at(&self, pts: &[Point2]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(pts.len(), self.dim());
        for (r, &p) in pts.iter().enumerate() {
            m.row_mut(r).copy_from(&self.eval(p).transpose());
        }
        m
    }

    /// Gradient component tables at the given points (rows = points).
    pub fn grad_at(&self, pts: &[Point2]) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut gx = DMatrix::zeros(pts.len(), self.dim());
        let mut gy = DMatrix::zeros(pts.len(), self.dim());
        for (r, &p) in pts.iter().enumerate() {
            for (c, g) in self.eval_grad(p).into_iter().enumerate() {
                gx[(r, c)] = g.x;
                gy[(r, c)] = g.y;
            }
        }
        (gx, gy)
    }

    fn index_of(&self, i: u32, j: u32) -> usize {
        let d = (i + j) as usize;
        d * (d + 1) / 2 + j as usize
    }

    /// Coefficient map of d/dx within the same coefficient space; exact.
    pub fn dx_map(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (c, &(i, j)) in self.exps.iter().enumerate() {
            if i > 0 {
                m[(self.index_of(i - 1, j), c)] = i as f64 / self.scale;
            }
        }
        m
    }

    pub fn dy_map(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (c, &(i, j)) in self.exps.iter().enumerate() {
            if j > 0 {
                m[(self.index_of(i, j - 1), c)] = j as f64 / self.scale;
            }
        }
        m
    }

    /// Coefficient map of the Laplacian; exact, used for residual estimators.
    pub fn laplacian_map(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        let s2 = self.scale * self.scale;
        for (c, &(i, j)) in self.exps.iter().enumerate() {
            if i >= 2 {
                m[(self.index_of(i - 2, j), c)] += (i * (i - 1)) as f64 / s2;
            }
            if j >= 2 {
                m[(self.index_of(i, j - 2), c)] += (j * (j - 1)) as f64 / s2;
            }
        }
        m
    }

    /// Value of the polynomial with the given coefficients.
    pub fn value(&self, coeffs: &DVector<f64>, x: Point2) -> f64 {
        self.eval(x).dot(coeffs)
    }

    pub fn gradient(&self, coeffs: &DVector<f64>, x: Point2) -> Vector2 {
        let g = self.eval_grad(x);
        let mut v = Vector2::zeros();
        for (c, gi) in g.iter().enumerate() {
            v += gi * coeffs[c];
        }
        v
    }
}

/// Basis on a straight face, polynomials in the chordal parameter t of
/// x = a + t (b - a), centered at the midpoint.
#[derive(Clone, Debug)]
pub struct FaceBasis {
    pub degree: usize,
    pub a: Point2,
    pub b: Point2,
}

impl FaceBasis {
    pub fn new(a: Point2, b: Point2, degree: usize) -> Self {
        Self { degree, a, b }
    }

    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }

    pub fn eval_t(&self, t: f64) -> DVector<f64> {
        let s = t - 0.5;
        DVector::from_iterator(self.dim(), (0..=self.degree).map(|q| s.powi(q as i32)))
    }

    /// Chordal parameter of a point assumed to lie on the face line.
    pub fn param_of(&self, x: Point2) -> f64 {
        let d = self.b - self.a;
        (x - self.a).dot(&d) / d.norm_squared()
    }

    /// Rows = nodes of the rule, columns = basis functions.
    pub fn eval_at_t(&self, ts: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(ts.len(), self.dim());
        for (r, &t) in ts.iter().enumerate() {
            m.row_mut(r).copy_from(&self.eval_t(t).transpose());
        }
        m
    }

    pub fn value(&self, coeffs: &DVector<f64>, t: f64) -> f64 {
        self.eval_t(t).dot(coeffs)
    }
}
