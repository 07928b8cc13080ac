//! Line-oriented ASCII mesh files. Header `hho-mesh 2 <nv> <nf> <ne>`, then
//! nv vertex lines `x y`, nf face lines `v0 v1`, ne element lines
//! `m f0 ... f{m-1}` with counterclockwise 0-based face indices. Blank lines
//! and `#` comments are skipped. Coordinates are written with 17 significant
//! digits so a round trip reproduces every f64 bit for bit.

use super::{Face, MeshError, PolytopalMesh};
use crate::geometry::Point2;
use std::fmt::Write as _;
use std::path::Path;

pub fn write_mesh(mesh: &PolytopalMesh, path: &Path) -> Result<(), MeshError> {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "hho-mesh 2 {} {} {}",
        mesh.n_vertices(),
        mesh.n_faces(),
        mesh.n_elements()
    );
    for v in mesh.vertices() {
        let _ = writeln!(out, "{:.16e} {:.16e}", v.x, v.y);
    }
    for f in 0..mesh.n_faces() {
        let face = mesh.face(f);
        let _ = writeln!(out, "{} {}", face.verts[0], face.verts[1]);
    }
    for e in 0..mesh.n_elements() {
        let loop_faces = mesh.element_faces(e);
        let _ = write!(out, "{}", loop_faces.len());
        for &f in loop_faces {
            let _ = write!(out, " {f}");
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_mesh(path: &Path) -> Result<PolytopalMesh, MeshError> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

fn parse_mesh(text: &str) -> Result<PolytopalMesh, MeshError> {
    // data lines with their original 1-based line numbers
    let mut lines = text.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.split('#').next().unwrap_or("").trim();
        (!body.is_empty()).then_some((i + 1, body))
    });

    let (hline, header) = lines
        .next()
        .ok_or_else(|| err(0, "empty file, expected hho-mesh header"))?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("hho-mesh") {
        return Err(err(hline, "expected header starting with 'hho-mesh'"));
    }
    if toks.next() != Some("2") {
        return Err(err(hline, "unsupported dimension, expected 2"));
    }
    let nv = parse_tok::<usize>(&mut toks, hline, "vertex count")?;
    let nf = parse_tok::<usize>(&mut toks, hline, "face count")?;
    let ne = parse_tok::<usize>(&mut toks, hline, "element count")?;
    if toks.next().is_some() {
        return Err(err(hline, "trailing tokens after header"));
    }

    let mut verts = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, body) = lines
            .next()
            .ok_or_else(|| err(usize::MAX, "file ends inside vertex block"))?;
        let mut toks = body.split_whitespace();
        let x = parse_tok::<f64>(&mut toks, ln, "x coordinate")?;
        let y = parse_tok::<f64>(&mut toks, ln, "y coordinate")?;
        if toks.next().is_some() {
            return Err(err(ln, "trailing tokens on vertex line"));
        }
        verts.push(Point2::new(x, y));
    }

    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, body) = lines
            .next()
            .ok_or_else(|| err(usize::MAX, "file ends inside face block"))?;
        let mut toks = body.split_whitespace();
        let a = parse_tok::<usize>(&mut toks, ln, "face vertex")?;
        let b = parse_tok::<usize>(&mut toks, ln, "face vertex")?;
        if toks.next().is_some() {
            return Err(err(ln, "trailing tokens on face line"));
        }
        faces.push(Face { verts: [a, b] });
    }

    let mut elem_faces = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (ln, body) = lines
            .next()
            .ok_or_else(|| err(usize::MAX, "file ends inside element block"))?;
        let mut toks = body.split_whitespace();
        let m = parse_tok::<usize>(&mut toks, ln, "element face count")?;
        let mut loop_faces = Vec::with_capacity(m);
        for _ in 0..m {
            let f = parse_tok::<usize>(&mut toks, ln, "element face index")?;
            if f >= nf {
                return Err(err(ln, format!("face index {f} out of range (nf={nf})")));
            }
            loop_faces.push(f);
        }
        if toks.next().is_some() {
            return Err(err(ln, "trailing tokens on element line"));
        }
        elem_faces.push(loop_faces);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(err(ln, "trailing data after element block"));
    }

    PolytopalMesh::from_entities(verts, faces, elem_faces)
}

fn err(line: usize, msg: impl Into<String>) -> MeshError {
    MeshError::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_tok<T: std::str::FromStr>(
    toks: &mut std::str::SplitWhitespace,
    line: usize,
    what: &str,
) -> Result<T, MeshError> {
    let tok = toks
        .next()
        .ok_or_else(|| err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| err(line, format!("bad {what}: '{tok}'")))
}
