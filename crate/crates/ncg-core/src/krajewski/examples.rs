use std::collections::BTreeMap;

use super::{Edge, EdgeKind, KoSignature, KrajewskiDiagram, Vertex};
use crate::algebra::AlgebraProfile;
use crate::linalg::ComplexMatrix;

fn pair(jim: &mut BTreeMap<String, String>, a: &Vertex, b: &Vertex) {
    jim.insert(a.id.clone(), b.id.clone());
    jim.insert(b.id.clone(), a.id.clone());
}

fn scalar_edge(src: &Vertex, dst: &Vertex, kind: EdgeKind, t: f64) -> Edge {
    Edge { src: src.id.clone(), dst: dst.id.clone(), kind, op: ComplexMatrix::from_real(1, 1, &[t]) }
}

/// Smallest diagram with a nonzero Dirac operator in KO-dimension `d`.
///
/// Dimensions 3, 5 and 6 live on the algebra `C` with a `jim`-pair of
/// vertices; the others use `C ⊕ C` with an off-diagonal pair linked to the
/// diagonal fiber.
pub fn minimal_diagram(d: u8, t: f64) -> KrajewskiDiagram {
    let ko = KoSignature::new(d as i64);
    let mut jim = BTreeMap::new();
    match d % 8 {
        3 | 5 | 6 => {
            let profile = AlgebraProfile::new(vec![1]).expect("valid");
            let mut v1 = Vertex::new("(1,1,1)", 0, 0).with_chi(0);
            let mut v2 = Vertex::new("(1,2,1)", 0, 0).with_chi(1);
            if d == 6 {
                v1.s = Some(1);
                v2.s = Some(-1);
            }
            pair(&mut jim, &v1, &v2);
            let edges = if d == 3 {
                vec![scalar_edge(&v1, &v1, EdgeKind::General, t)]
            } else {
                vec![scalar_edge(&v1, &v2, EdgeKind::General, t)]
            };
            KrajewskiDiagram { profile, ko, vertices: vec![v1, v2], jim, edges }
        }
        _ => {
            let profile = AlgebraProfile::new(vec![1, 1]).expect("valid");
            let epp = ko.eps_pp();
            let mut b = Vertex::new("(1,1,2)", 0, 1);
            let mut c = Vertex::new("(2,1,1)", 1, 0);
            pair(&mut jim, &b, &c);
            if let Some(e) = epp {
                b.s = Some(-1);
                c.s = Some(-e);
            }
            let mut diag_vertices = Vec::new();
            if ko.diagonal_self_paired() {
                let mut a = Vertex::new("(1,1,1)", 0, 0);
                if epp.is_some() {
                    a.s = Some(1);
                }
                jim.insert(a.id.clone(), a.id.clone());
                diag_vertices.push(a);
            } else {
                // d = 2 or 4
                let e = epp.expect("even");
                let a1 = Vertex::new("(1,1,1)", 0, 0).with_chi(0).with_s(1);
                let a2 = Vertex::new("(1,2,1)", 0, 0).with_chi(1).with_s(e);
                pair(&mut jim, &a1, &a2);
                diag_vertices.push(a1);
                diag_vertices.push(a2);
            }
            let edges = vec![scalar_edge(&diag_vertices[0], &b, EdgeKind::Right, t)];
            let mut vertices = diag_vertices;
            vertices.push(b);
            vertices.push(c);
            KrajewskiDiagram { profile, ko, vertices, jim, edges }
        }
    }
}

/// One self-paired vertex over `C` in KO-dimension 0, no edges.
pub fn trivial_diagram() -> KrajewskiDiagram {
    let profile = AlgebraProfile::new(vec![1]).expect("valid");
    let v = Vertex::new("(1,1,1)", 0, 0).with_s(1);
    let mut jim = BTreeMap::new();
    jim.insert(v.id.clone(), v.id.clone());
    KrajewskiDiagram { profile, ko: KoSignature::new(0), vertices: vec![v], jim, edges: Vec::new() }
}
