//! Discrete norms on hybrid unknowns and jump seminorms on broken fields.

use crate::dof::{DofLayout, DofVector};
use crate::field::BrokenField;
use crate::local::{default_exactness, element_basis, face_basis};
use crate::mesh::{PolytopalMesh, SimplicialSubmesh};
use crate::poly::{gram, spd_solve_matrix};
use crate::quad::{face_quadrature, triangles_quadrature};
use crate::Result;
use nalgebra::DVector;

fn elem_quad(sub: &SimplicialSubmesh, e: usize, exactness: usize) -> Result<crate::quad::ElemQuad> {
    let tris: Vec<_> = sub.elem_tris[e].iter().map(|&t| sub.tri_corners(t)).collect();
    Ok(triangles_quadrature(&tris, exactness)?)
}

/// Discrete W^{1,p}-like seminorm: broken gradients plus boundary differences
/// weighted by h_F^(1-p). Returns the global p-th root and the per-element
/// p-th powers.
pub fn one_p_seminorm(
    mesh: &PolytopalMesh,
    sub: &SimplicialSubmesh,
    v: &DofVector,
    p: f64,
) -> Result<(f64, Vec<f64>)> {
    let layout = DofLayout::new(mesh, v.degree);
    let exact = default_exactness(v.degree);
    let mut per_elem = Vec::with_capacity(mesh.n_elements());
    for e in 0..mesh.n_elements() {
        let basis = element_basis(mesh, e, v.degree);
        let q = elem_quad(sub, e, exact)?;
        let (gx, gy) = basis.grad_at(&q.points);
        let ce = v.data.rows(layout.elem_block(e).start, layout.elem_dim);
        let vx = &gx * ce;
        let vy = &gy * ce;
        let mut acc = 0.0;
        for (r, &w) in q.weights.iter().enumerate() {
            acc += w * (vx[r] * vx[r] + vy[r] * vy[r]).powf(0.5 * p);
        }
        for &f in mesh.element_faces(e) {
            let (a, b) = mesh.face_endpoints(f);
            let fq = face_quadrature(a, b, exact)?;
            let fb = face_basis(mesh, f, v.degree);
            let psi = fb.eval_at_t(&fq.t);
            let cf = v.data.rows(layout.face_block(f).start, layout.face_dim);
            let vf = &psi * cf;
            let phit = basis.eval_at(&fq.points);
            let vt = &phit * ce;
            let hw = mesh.face_length(f).powf(1.0 - p);
            for (r, &w) in fq.weights.iter().enumerate() {
                acc += hw * w * (vf[r] - vt[r]).abs().powf(p);
            }
        }
        per_elem.push(acc);
    }
    let total: f64 = per_elem.iter().sum();
    Ok((total.powf(1.0 / p), per_elem))
}

/// L2 norm of the element-block polynomial field.
pub fn l2_norm(mesh: &PolytopalMesh, sub: &SimplicialSubmesh, v: &DofVector) -> Result<f64> {
    let layout = DofLayout::new(mesh, v.degree);
    let exact = default_exactness(v.degree);
    let mut acc = 0.0;
    for e in 0..mesh.n_elements() {
        let basis = element_basis(mesh, e, v.degree);
        let q = elem_quad(sub, e, exact)?;
        let phi = basis.eval_at(&q.points);
        let ce = v.data.rows(layout.elem_block(e).start, layout.elem_dim);
        let vals = &phi * ce;
        for (r, &w) in q.weights.iter().enumerate() {
            acc += w * vals[r] * vals[r];
        }
    }
    Ok(acc.sqrt())
}

/// Jump seminorm of a broken field: face-projected jumps at degree k under
/// the h_F^(-1) weight; boundary faces use the one-sided trace.
pub fn jump_seminorm(w: &BrokenField, mesh: &PolytopalMesh, k: usize) -> Result<f64> {
    let exact = default_exactness(w.degree.max(k));
    let mut acc = 0.0;
    for f in 0..mesh.n_faces() {
        let (a, b) = mesh.face_endpoints(f);
        let fq = face_quadrature(a, b, exact)?;
        let fb = face_basis(mesh, f, k);
        let psi = fb.eval_at_t(&fq.t);
        let (e1, e2) = mesh.face_elements(f);
        let b1 = element_basis(mesh, e1, w.degree);
        let mut jumps = DVector::zeros(fq.points.len());
        for (r, &x) in fq.points.iter().enumerate() {
            let mut j = b1.value(&w.coeffs[e1], x);
            if let Some(e2) = e2 {
                j -= element_basis(mesh, e2, w.degree).value(&w.coeffs[e2], x);
            }
            jumps[r] = j;
        }
        let mass = gram(&psi, &psi, &fq.weights);
        let mut rhs = DVector::zeros(fb.dim());
        for (r, &wq) in fq.weights.iter().enumerate() {
            for c in 0..fb.dim() {
                rhs[c] += wq * psi[(r, c)] * jumps[r];
            }
        }
        let coeffs = spd_solve_matrix(
            &mass,
            &nalgebra::DMatrix::from_column_slice(fb.dim(), 1, rhs.as_slice()),
            "face (jump projection)",
        )?;
        let c = coeffs.column(0);
        acc += (c.transpose() * &mass * c)[(0, 0)] / mesh.face_length(f);
    }
    Ok(acc.sqrt())
}
