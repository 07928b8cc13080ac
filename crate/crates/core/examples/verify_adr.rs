use hho_core::adr::{AdrData, AdrProblem};
use hho_core::local::StabVariant;
use hho_core::mesh::{generate_mesh, MeshKind, Rect};
use hho_core::{Point2, Vector2};
use std::f64::consts::PI;

fn main() {
    let rotating = |x: Point2| Vector2::new(0.5 - x.y, x.x - 0.5);
    let sinsin = |x: Point2| (PI * x.x).sin() * (PI * x.y).sin();
    for kappa in [1.0, 0.0] {
        let f = move |x: Point2| {
            let u = sinsin(x);
            let ux = PI * (PI * x.x).cos() * (PI * x.y).sin();
            let uy = PI * (PI * x.x).sin() * (PI * x.y).cos();
            let b = rotating(x);
            2.0 * PI * PI * kappa * u + b.x * ux + b.y * uy + u
        };
        let mesh = generate_mesh(MeshKind::VoronoiPolygonal { seed: 1 }, 8, Rect::UNIT).unwrap();
        let data = AdrData::new(vec![kappa; mesh.n_elements()], &rotating, &|_| 1.0, 1.0).unwrap();
        let prob = AdrProblem::new(&mesh, 1, StabVariant::Hho, data).unwrap();
        let u = prob.solve(&f).unwrap();
        let rep = prob.errors(&u, &sinsin).unwrap();
        let stab = prob.stability_condition();
        let ok = stab.iter().filter(|&&b| b).count();
        println!(
            "kappa={kappa}: h={:.4} ndof={} sharp={:.4e} pe=[{:.3}, {:.3}] resolved {ok}/{}",
            rep.h,
            rep.n_dof,
            rep.sharp,
            rep.pe_min,
            rep.pe_max,
            stab.len()
        );
        assert!(rep.sharp.is_finite() && rep.sharp > 0.0 && rep.sharp < 1.0);
    }
    println!("adr end-to-end ok");
}
