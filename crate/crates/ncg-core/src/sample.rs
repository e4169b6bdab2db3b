//! Seeded random generators for diagrams, elements and lifts.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::algebra::{AlgebraElement, AlgebraProfile};
use crate::bratteli::BratteliArrow;
use crate::krajewski::{epsilon_factor, Edge, EdgeKind, KoSignature, KrajewskiDiagram, RealSpectralTriple, Vertex};
use crate::lifting::{DiagramLift, PhiHMap};
use crate::linalg::{ComplexMatrix, C64};

pub fn complex(rng: &mut impl Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| complex(rng))
}

pub fn vector(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    matrix(rng, n, 1)
}

pub fn hermitian(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    matrix(rng, n, n).hermitian_part()
}

/// `exp(iH)` for a random Hermitian `H`.
pub fn unitary(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    let (vals, vecs) = hermitian(rng, n).scale_re(3.0).eigh().expect("square");
    let phases: Vec<C64> = vals.iter().map(|&l| C64::new(0.0, l).exp()).collect();
    vecs.matmul(&ComplexMatrix::diagonal(&phases)).matmul(&vecs.adjoint())
}

pub fn profile(rng: &mut impl Rng, max_r: usize, max_n: usize) -> AlgebraProfile {
    let r = rng.random_range(1..=max_r);
    AlgebraProfile::new((0..r).map(|_| rng.random_range(1..=max_n)).collect()).expect("positive dims")
}

pub fn element(rng: &mut impl Rng, p: &AlgebraProfile) -> AlgebraElement {
    AlgebraElement::new(p.clone(), p.dims().iter().map(|&n| matrix(rng, n, n)).collect()).expect("shapes")
}

pub fn hermitian_element(rng: &mut impl Rng, p: &AlgebraProfile) -> AlgebraElement {
    AlgebraElement::new(p.clone(), p.dims().iter().map(|&n| hermitian(rng, n)).collect()).expect("shapes")
}

pub fn unitary_element(rng: &mut impl Rng, p: &AlgebraProfile) -> AlgebraElement {
    AlgebraElement::new(p.clone(), p.dims().iter().map(|&n| unitary(rng, n)).collect()).expect("shapes")
}

fn sign(rng: &mut impl Rng) -> i8 {
    if rng.random_bool(0.5) {
        1
    } else {
        -1
    }
}

fn label(i: usize, p: usize, j: usize) -> String {
    format!("({},{},{})", i + 1, p + 1, j + 1)
}

/// Vertices and `jim` of a random diagram with fibers of size at most
/// `max_fiber`; every summand gets a nonempty diagonal fiber.
pub fn diagram_skeleton(
    rng: &mut impl Rng,
    profile: &AlgebraProfile,
    ko: KoSignature,
    max_fiber: usize,
) -> KrajewskiDiagram {
    let r = profile.len();
    let even = ko.is_even();
    let epp = ko.eps_pp().unwrap_or(1);
    let mut vertices = Vec::new();
    let mut jim = BTreeMap::new();
    for i in 0..r {
        if ko.diagonal_self_paired() {
            let mu = rng.random_range(1..=max_fiber.max(1));
            for p in 0..mu {
                let mut v = Vertex::new(label(i, p, i), i, i);
                if even {
                    v.s = Some(sign(rng));
                }
                jim.insert(v.id.clone(), v.id.clone());
                vertices.push(v);
            }
        } else {
            let pairs = (max_fiber / 2).max(1);
            let npairs = rng.random_range(1..=pairs);
            for a in 0..npairs {
                let mut v1 = Vertex::new(label(i, 2 * a, i), i, i).with_chi(0);
                let mut v2 = Vertex::new(label(i, 2 * a + 1, i), i, i).with_chi(1);
                if even {
                    let s = sign(rng);
                    v1.s = Some(s);
                    v2.s = Some(epp * s);
                }
                jim.insert(v1.id.clone(), v2.id.clone());
                jim.insert(v2.id.clone(), v1.id.clone());
                vertices.push(v1);
                vertices.push(v2);
            }
        }
        for j in i + 1..r {
            let mu = rng.random_range(0..=max_fiber);
            for p in 0..mu {
                let mut v = Vertex::new(label(i, p, j), i, j);
                let mut w = Vertex::new(label(j, p, i), j, i);
                if even {
                    let s = sign(rng);
                    v.s = Some(s);
                    w.s = Some(epp * s);
                }
                jim.insert(v.id.clone(), w.id.clone());
                jim.insert(w.id.clone(), v.id.clone());
                vertices.push(v);
                vertices.push(w);
            }
        }
    }
    KrajewskiDiagram { profile: profile.clone(), ko, vertices, jim, edges: Vec::new() }
}

/// Random operator of the form required by `kind`.
pub fn edge_operator(rng: &mut impl Rng, p: &AlgebraProfile, v1: &Vertex, v2: &Vertex, kind: EdgeKind) -> ComplexMatrix {
    let n = |k: usize| p.n(k);
    match kind {
        EdgeKind::Right => ComplexMatrix::identity(n(v1.i)).kron(&matrix(rng, n(v2.j), n(v1.j))),
        EdgeKind::Left => matrix(rng, n(v2.i), n(v1.i)).kron(&ComplexMatrix::identity(n(v1.j))),
        EdgeKind::General => {
            let l = matrix(rng, n(v2.i), n(v1.i)).kron(&ComplexMatrix::identity(n(v1.j)));
            let r = ComplexMatrix::identity(n(v1.i)).kron(&matrix(rng, n(v2.j), n(v1.j)));
            &l + &r
        }
    }
}

/// Adds random edges, one per orbit `{e, ē, jim e, jim ē}`, each made
/// consistent with the orbit elements that fix it.
pub fn add_random_edges(rng: &mut impl Rng, diag: &mut KrajewskiDiagram, edge_prob: f64) {
    let idx: BTreeMap<String, usize> = diag.vertices.iter().enumerate().map(|(k, v)| (v.id.clone(), k)).collect();
    let jim_of = |k: usize| idx[&diag.jim[&diag.vertices[k].id]];
    let nv = diag.vertices.len();
    let mut covered = BTreeSet::new();
    let mut edges = Vec::new();
    for a in 0..nv {
        for b in 0..nv {
            if covered.contains(&(a, b)) {
                continue;
            }
            let (v1, v2) = (&diag.vertices[a], &diag.vertices[b]);
            let kind = match (v1.i == v2.i, v1.j == v2.j) {
                (true, true) => EdgeKind::General,
                (true, false) => EdgeKind::Right,
                (false, true) => EdgeKind::Left,
                (false, false) => continue,
            };
            if let (Some(s1), Some(s2)) = (v1.s, v2.s) {
                if s1 == s2 {
                    continue;
                }
            }
            if !rng.random_bool(edge_prob) {
                continue;
            }
            let (ja, jb) = (jim_of(a), jim_of(b));
            let mut op = edge_operator(rng, &diag.profile, v1, v2, kind);
            let jop = |op: &ComplexMatrix| diag.jim_edge_op(v1, v2, op).expect("chi present");
            let mut images: Vec<Box<dyn Fn(&ComplexMatrix) -> ComplexMatrix>> = Vec::new();
            if a == b {
                images.push(Box::new(|m: &ComplexMatrix| m.adjoint()));
            }
            if ja == a && jb == b {
                images.push(Box::new(move |m: &ComplexMatrix| jop(m)));
            }
            if jb == a && ja == b {
                images.push(Box::new(move |m: &ComplexMatrix| jop(m).adjoint()));
            }
            if !images.is_empty() {
                let mut acc = op.clone();
                for g in &images {
                    acc += &g(&op);
                }
                op = acc.scale_re(1.0 / (images.len() + 1) as f64);
            }
            for key in [(a, b), (b, a), (ja, jb), (jb, ja)] {
                covered.insert(key);
            }
            if op.norm() < 0.05 {
                continue;
            }
            edges.push(Edge { src: v1.id.clone(), dst: v2.id.clone(), kind, op });
        }
    }
    diag.edges = edges;
}

pub fn diagram(
    rng: &mut impl Rng,
    profile: &AlgebraProfile,
    ko: KoSignature,
    max_fiber: usize,
    edge_prob: f64,
) -> KrajewskiDiagram {
    let mut d = diagram_skeleton(rng, profile, ko, max_fiber);
    add_random_edges(rng, &mut d, edge_prob);
    d
}

/// Random injective arrow out of `source` with at most `max_s` target
/// summands, each of size at most `max_m`.
pub fn arrow(
    rng: &mut impl Rng,
    source: &AlgebraProfile,
    max_s: usize,
    max_alpha: usize,
    max_n0: usize,
    max_m: usize,
) -> BratteliArrow {
    let r = source.len();
    loop {
        let s = rng.random_range(1..=max_s);
        let alpha: Vec<Vec<usize>> =
            (0..s).map(|_| (0..r).map(|_| rng.random_range(0..=max_alpha)).collect()).collect();
        if (0..r).any(|i| alpha.iter().all(|row| row[i] == 0)) {
            continue;
        }
        let n0: Vec<usize> = (0..s).map(|_| rng.random_range(0..=max_n0)).collect();
        let fits = alpha.iter().zip(&n0).all(|(row, z)| {
            let m = z + row.iter().enumerate().map(|(i, a)| a * source.n(i)).sum::<usize>();
            (1..=max_m).contains(&m)
        });
        if !fits {
            continue;
        }
        if let Ok(a) = BratteliArrow::from_multiplicities(source.clone(), alpha, n0) {
            return a;
        }
    }
}

/// Random lift of `arrow` respecting the grading and the real structure
/// relation. Each admissible pair is filled with probability `density`.
pub fn lift(
    rng: &mut impl Rng,
    arrow: &BratteliArrow,
    source: &KrajewskiDiagram,
    target: &KrajewskiDiagram,
    density: f64,
) -> DiagramLift {
    let mut out = DiagramLift::new(arrow.clone(), source.clone(), target.clone()).expect("matching profiles");
    let eps = |v: &Vertex, ko| epsilon_factor(v, ko).expect("valid diagram") as f64;
    for v in &source.vertices {
        for w in &target.vertices {
            if out.get(&v.id, &w.id).is_some() {
                continue;
            }
            let (r, c) = out.u_shape(v, w);
            if r == 0 || c == 0 || v.s != w.s || !rng.random_bool(density) {
                continue;
            }
            let jv = source.vertex(&source.jim[&v.id]).expect("valid");
            let jw = target.vertex(&target.jim[&w.id]).expect("valid");
            let f = eps(v, source.ko) * eps(w, target.ko);
            let mut u = matrix(rng, r, c);
            if jv.id == v.id && jw.id == w.id {
                u = (&u + &u.adjoint().scale_re(f)).scale_re(0.5);
            }
            out.set(&jv.id, &jw.id, u.adjoint().scale_re(f)).expect("shape");
            out.set(&v.id, &w.id, u).expect("shape");
        }
    }
    out
}

/// Source, target and lift in KO-dimension `d` whose `σ̂` is nonsingular
/// on every fiber. Retries until one is found.
pub fn injective_lift(rng: &mut impl Rng, d: u8) -> DiagramLift {
    let ko = KoSignature::new(d as i64);
    loop {
        let p = profile(rng, 2, 2);
        let src = diagram(rng, &p, ko, 2, 0.6);
        let arr = arrow(rng, &p, 2, 2, 1, 4);
        let tgt = diagram(rng, arr.target(), ko, 3, 0.6);
        let l = lift(rng, &arr, &src, &tgt, 0.9);
        let sig = crate::lifting::sigma_with_tol(&l, 1e-3);
        if sig.non_injective.is_empty() && sig.singular_fibers.is_empty() {
            return l;
        }
    }
}

/// `φ_H D_A φ_H† + P H Q + Q H P + Q H Q` for a random Hermitian `H`, made
/// odd under `gamma_b` when given. Weakly compatible with `D_A` by
/// construction.
pub fn inherited_dirac(
    rng: &mut impl Rng,
    phi: &PhiHMap,
    d_a: &ComplexMatrix,
    gamma_b: Option<&ComplexMatrix>,
) -> ComplexMatrix {
    let nb = phi.matrix.rows();
    let mut h = hermitian(rng, nb);
    if let Some(g) = gamma_b {
        h = (&h - &g.matmul(&h).matmul(g)).scale_re(0.5);
    }
    let p = &phi.projector;
    let q = phi.complement();
    let rest = &(&p.matmul(&h).matmul(&q) + &q.matmul(&h).matmul(p)) + &q.matmul(&h).matmul(&q);
    &phi.matrix.matmul(d_a).matmul(&phi.matrix.adjoint()) + &rest
}

/// `ψ_A` in the positive chiral subspace and `ψ_B = φ_H ψ_A + Q η`.
pub fn compatible_fermions(
    rng: &mut impl Rng,
    phi: &PhiHMap,
    ta: &RealSpectralTriple,
    tb: &RealSpectralTriple,
) -> (ComplexMatrix, ComplexMatrix) {
    let chiral = |g: Option<&ComplexMatrix>, x: ComplexMatrix| match g {
        Some(g) => (&x + &g.matmul(&x)).scale_re(0.5),
        None => x,
    };
    let psi_a = chiral(ta.gamma.as_ref(), vector(rng, ta.dim()));
    let eta = chiral(tb.gamma.as_ref(), vector(rng, tb.dim()));
    let psi_b = &phi.matrix.matmul(&psi_a) + &phi.complement().matmul(&eta);
    (psi_a, psi_b)
}
