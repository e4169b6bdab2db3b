use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::algebra::AlgebraProfile;
use crate::krajewski::{minimal_diagram, realize, trivial_diagram};
use crate::linalg::{c, vdot};
use crate::sample;

fn one() -> AlgebraProfile {
    AlgebraProfile::new(vec![1]).unwrap()
}

fn unit_arrow() -> BratteliArrow {
    BratteliArrow::from_multiplicities(one(), vec![vec![1]], vec![0]).unwrap()
}

fn scalar(z: C64) -> ComplexMatrix {
    ComplexMatrix::from_vec(1, 1, vec![z])
}

/// Source over `C` in d = 0 with two positive self-paired vertices; target
/// is the trivial diagram.
fn two_vertex_source() -> KrajewskiDiagram {
    let v1 = Vertex::new("(1,1,1)", 0, 0).with_s(1);
    let v2 = Vertex::new("(1,2,1)", 0, 0).with_s(1);
    let jim = [(v1.id.clone(), v1.id.clone()), (v2.id.clone(), v2.id.clone())].into_iter().collect();
    KrajewskiDiagram { profile: one(), ko: KoSignature::new(0), vertices: vec![v1, v2], jim, edges: vec![] }
}

fn random_lift(seed: u64, d: u8) -> DiagramLift {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample::injective_lift(&mut rng, d)
}

#[test]
fn empty_lift_is_zero_map() {
    let l = DiagramLift::new(unit_arrow(), trivial_diagram(), trivial_diagram()).unwrap();
    let phi = build_phi_h(&l).unwrap();
    assert_eq!(phi.matrix, ComplexMatrix::zeros(1, 1));
    assert_eq!(phi.projector, ComplexMatrix::zeros(1, 1));
}

#[test]
fn unit_lift_is_identity() {
    let mut l = DiagramLift::new(unit_arrow(), trivial_diagram(), trivial_diagram()).unwrap();
    l.set("(1,1,1)", "(1,1,1)", scalar(c(1.0, 0.0))).unwrap();
    let phi = build_phi_h(&l).unwrap();
    assert_eq!(phi.matrix, ComplexMatrix::identity(1));
    assert_eq!(bimodule_residual(&l, &phi).unwrap(), 0.0);
}

#[test]
fn u_shapes_are_enforced() {
    let mut l = DiagramLift::new(unit_arrow(), trivial_diagram(), trivial_diagram()).unwrap();
    assert!(l.set("(1,1,1)", "(1,1,1)", ComplexMatrix::zeros(2, 1)).is_err());
    assert!(l.set("(1,1,1)", "nope", scalar(c(1.0, 0.0))).is_err());
    // α = 0 entries are refused
    let p = AlgebraProfile::new(vec![1, 1]).unwrap();
    let arr = BratteliArrow::from_multiplicities(p, vec![vec![1, 0], vec![0, 1]], vec![0, 0]).unwrap();
    let d = minimal_diagram(0, 1.0);
    let mut l = DiagramLift::new(arr, d.clone(), d).unwrap();
    assert!(l.set("(1,1,1)", "(2,1,1)", scalar(c(1.0, 0.0))).is_err());
}

#[test]
fn sigma_of_single_entry() {
    let mut l = DiagramLift::new(unit_arrow(), trivial_diagram(), trivial_diagram()).unwrap();
    l.set("(1,1,1)", "(1,1,1)", scalar(c(2.0, 0.0))).unwrap();
    let s = sigma(&l);
    assert_eq!(s.fibers.len(), 1);
    assert_eq!(s.fibers[0].matrix, scalar(c(4.0, 0.0)));
    assert!(s.non_injective.is_empty());
}

#[test]
fn sigma_two_vertices_hand_computation() {
    let (a, b) = (c(0.3, -1.2), c(2.0, 0.5));
    let mut l = DiagramLift::new(unit_arrow(), two_vertex_source(), trivial_diagram()).unwrap();
    l.set("(1,1,1)", "(1,1,1)", scalar(a)).unwrap();
    l.set("(1,2,1)", "(1,1,1)", scalar(b)).unwrap();
    let s = sigma(&l);
    let m = &s.fibers[0].matrix;
    assert!((m[(0, 0)] - c(a.norm_sqr(), 0.0)).norm() < 1e-15);
    assert!((m[(0, 1)] - a.conj() * b).norm() < 1e-15);
    assert!((m[(1, 0)] - b.conj() * a).norm() < 1e-15);
    assert!((m[(1, 1)] - c(b.norm_sqr(), 0.0)).norm() < 1e-15);
    assert_eq!(s.entry("(1,1,1)", "(1,2,1)"), Some(m[(0, 1)]));
}

#[test]
fn zero_row_is_flagged_non_injective() {
    let mut l = DiagramLift::new(unit_arrow(), two_vertex_source(), trivial_diagram()).unwrap();
    l.set("(1,1,1)", "(1,1,1)", scalar(c(1.0, 0.0))).unwrap();
    let s = sigma(&l);
    assert_eq!(s.non_injective, vec!["(1,2,1)".to_string()]);
    assert!(normalize(&l, 1e-10).is_err());
}

#[test]
fn diagonalize_rank_one_sigma() {
    let mut l = DiagramLift::new(unit_arrow(), two_vertex_source(), trivial_diagram()).unwrap();
    l.set("(1,1,1)", "(1,1,1)", scalar(c(1.0, 0.0))).unwrap();
    l.set("(1,2,1)", "(1,1,1)", scalar(c(1.0, 0.0))).unwrap();
    let d = diagonalize_bases(&l, 1e-10).unwrap();
    let s = sigma(&d);
    assert!(s.is_diagonal(1e-12));
    let k = d.kappa.as_ref().unwrap();
    assert!((k["(1,1,1)"] - 2.0).abs() < 1e-12);
    assert!(k["(1,2,1)"].abs() < 1e-12);
    assert_eq!(s.non_injective, vec!["(1,2,1)".to_string()]);
    // the rotation is (1,1)/√2, (1,-1)/√2 with positive leading entries
    let u = d.get("(1,1,1)", "(1,1,1)").unwrap();
    assert!((u[(0, 0)].re - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn diagonal_sigma_keeps_bases() {
    let mut l = DiagramLift::new(unit_arrow(), two_vertex_source(), trivial_diagram()).unwrap();
    l.set("(1,1,1)", "(1,1,1)", scalar(c(1.0, 0.0))).unwrap();
    let d = diagonalize_bases(&l, 1e-10).unwrap();
    assert_eq!(d.u, l.u);
    assert_eq!(d.source, l.source);
}

#[test]
fn odd_paired_dimensions_refuse_rotation() {
    // d = 3 source over C with one jim pair, target the same diagram
    let src = minimal_diagram(3, 0.0);
    let mut src = src;
    src.edges.clear();
    // two jim pairs so that a fiber holds coupled vertices
    let extra = [Vertex::new("(1,3,1)", 0, 0).with_chi(0), Vertex::new("(1,4,1)", 0, 0).with_chi(1)];
    src.jim.insert("(1,3,1)".into(), "(1,4,1)".into());
    src.jim.insert("(1,4,1)".into(), "(1,3,1)".into());
    src.vertices.extend(extra);
    let tgt = {
        let mut t = minimal_diagram(3, 0.0);
        t.edges.clear();
        t
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let l = sample::lift(&mut rng, &unit_arrow(), &src, &tgt, 1.0);
    assert!(!sigma(&l).is_diagonal(1e-10));
    match diagonalize_bases(&l, 1e-10) {
        Err(NcgError::InvalidLift(m)) => assert!(m.contains("unsupported KO dimension")),
        other => panic!("expected refusal, got {other:?}"),
    }
}

#[test]
fn normalize_scalar_and_idempotence() {
    let mut l = DiagramLift::new(unit_arrow(), trivial_diagram(), trivial_diagram()).unwrap();
    l.set("(1,1,1)", "(1,1,1)", scalar(c(2.0, 0.0))).unwrap();
    let n = normalize(&l, 1e-10).unwrap();
    assert_eq!(n.get("(1,1,1)", "(1,1,1)").unwrap(), &scalar(c(1.0, 0.0)));
    assert_eq!(n.kappa.as_ref().unwrap()["(1,1,1)"], 4.0);
    let again = normalize(&n, 1e-10).unwrap();
    assert_eq!(again.u, n.u);
}

#[test]
fn compat_block_examples() {
    let l = normalize(&diagonalize_bases(&random_lift(5, 0), 1e-10).unwrap(), 1e-10).unwrap();
    let phi = build_phi_h(&l).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (nb, na) = phi.matrix.shape();
    let a = sample::matrix(&mut rng, na, na);
    let q = phi.complement();
    let inherited = phi.matrix.matmul(&a).matmul(&phi.matrix.adjoint());
    let b = &inherited + &q.matmul(&sample::matrix(&mut rng, nb, nb)).matmul(&q);
    let r = compat_check(&a, &b, &phi, 1e-10).unwrap();
    assert!(r.strong && r.weak, "{r:?}");
    if q.norm() > 1e-6 {
        let leak = q.matmul(&sample::matrix(&mut rng, nb, nb)).matmul(&phi.projector);
        let r = compat_check(&a, &(&b + &leak), &phi, 1e-10).unwrap();
        assert!(r.weak && !r.strong, "{r:?}");
        assert!(r.perp_phi > 1e-6);
    }
    let split = inherited_split(&b, &phi).unwrap();
    assert!(split.pullback.dist(&a) < 1e-12);
    assert!(split.phi_perp < 1e-12 && split.perp_phi < 1e-12);
    let exact = inherited_split(&inherited, &phi).unwrap();
    assert!(exact.pullback.dist(&a) < 1e-12);
    assert!(exact.tnic_norms().iter().all(|&x| x < 1e-12));
}

#[test]
fn inherited_split_of_identity() {
    let l = normalize(&diagonalize_bases(&random_lift(11, 6), 1e-10).unwrap(), 1e-10).unwrap();
    let phi = build_phi_h(&l).unwrap();
    let nb = phi.matrix.rows();
    let s = inherited_split(&ComplexMatrix::identity(nb), &phi).unwrap();
    assert!(s.pullback.dist(&ComplexMatrix::identity(phi.matrix.cols())) < 1e-12);
    assert!(s.phi_perp < 1e-12 && s.perp_phi < 1e-12);
    assert!((s.perp_perp - phi.complement().norm()).abs() < 1e-12);
    let raw = build_phi_h(&random_lift(11, 6)).unwrap();
    assert!(matches!(inherited_split(&ComplexMatrix::identity(nb), &raw), Err(NcgError::Precondition(_))));
}

#[test]
fn flipped_conjugate_entry_is_localized() {
    let l = random_lift(3, 2);
    let ta = realize(&l.source).unwrap();
    let tb = realize(&l.target).unwrap();
    let good = real_grading_check(&l, &ta, &tb, 1e-10).unwrap();
    assert!(good.ok(), "{good:?}");
    let mut bad = l.clone();
    let key = bad.u.keys().next().unwrap().clone();
    let m = bad.u.get_mut(&key).unwrap();
    *m = m.scale_re(-1.0);
    let rep = real_grading_check(&bad, &ta, &tb, 1e-10).unwrap();
    assert!(!rep.ok());
    assert!(!rep.j.strong);
    let named = format_key(&key.0, &key.1);
    assert!(rep.relation_witnesses.iter().any(|w| w.starts_with(&named)), "{:?}", rep.relation_witnesses);
}

#[test]
fn different_ko_rows_fail_equality() {
    let mut tgt = minimal_diagram(6, 1.0);
    tgt.edges.clear();
    let l = DiagramLift::new(unit_arrow(), trivial_diagram(), tgt).unwrap();
    let ta = realize(&l.source).unwrap();
    let tb = realize(&l.target).unwrap();
    let rep = real_grading_check(&l, &ta, &tb, 1e-10).unwrap();
    assert!(rep.relation_witnesses.is_empty() && rep.grading_witnesses.is_empty());
    assert!(!rep.ko_equal);
    assert!(!rep.ok());
}

#[test]
fn lift_serde_round_trip() {
    let l = random_lift(7, 1);
    let s = serde_json::to_string(&l).unwrap();
    assert!(s.contains("->"));
    let back: DiagramLift = serde_json::from_str(&s).unwrap();
    assert_eq!(back, l);
}

fn column(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    sample::vector(rng, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bimodule_property(seed in 0u64..10_000, d in 0u8..8) {
        let l = random_lift(seed, d);
        let phi = build_phi_h(&l).unwrap();
        prop_assert!(bimodule_residual(&l, &phi).unwrap() <= 1e-12);
    }

    #[test]
    fn scalar_products_follow_sigma(seed in 0u64..10_000, d in 0u8..8) {
        let l = random_lift(seed, d);
        let phi = build_phi_h(&l).unwrap();
        let sig = sigma(&l);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let la = &phi.source_layout;
        let na = la.dim();
        for b1 in la.blocks() {
            for b2 in la.blocks() {
                let x = column(&mut rng, b1.len);
                let y = column(&mut rng, b2.len);
                let mut px = ComplexMatrix::zeros(na, 1);
                px.set_block(b1.offset, 0, &x);
                let mut py = ComplexMatrix::zeros(na, 1);
                py.set_block(b2.offset, 0, &y);
                let lhs = vdot(phi.matrix.matmul(&px).entries(), phi.matrix.matmul(&py).entries());
                let same = (b1.i, b1.j) == (b2.i, b2.j);
                let rhs = if same {
                    vdot(x.entries(), y.entries()) * sig.entry(&b1.id, &b2.id).unwrap()
                } else {
                    C64::new(0.0, 0.0)
                };
                prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
            }
        }
    }

    #[test]
    fn relation_iff_j_strong(seed in 0u64..10_000, d in 0u8..8, k in 0usize..64) {
        let l = random_lift(seed, d);
        let phi = build_phi_h(&l).unwrap();
        let ta = realize(&l.source).unwrap();
        let tb = realize(&l.target).unwrap();
        let rep = real_grading_check(&l, &ta, &tb, 1e-10).unwrap();
        prop_assert!(rep.ok(), "{:?}", rep);
        prop_assert!(rep.detected_source.contains(&d) && rep.detected_target.contains(&d));
        if ta.d.norm() > 0.0 && tb.d.norm() > 0.0 {
            prop_assert_eq!(&rep.detected_source, &rep.detected_target);
        }
        // break one entry: both views must notice
        let mut bad = l.clone();
        let key = bad.u.keys().nth(k % bad.u.len()).unwrap().clone();
        let m = bad.u.get_mut(&key).unwrap();
        m[(0, 0)] += c(0.5, 0.25);
        let (worst, _) = relation_witnesses(&bad, 1e-10).unwrap();
        let jb = j_compat_check(&ta.k, &tb.k, &build_phi_h(&bad).unwrap(), 1e-10).unwrap();
        prop_assert!(worst > 1e-10);
        prop_assert!(!jb.strong);
        prop_assert!(j_compat_check(&ta.k, &tb.k, &phi, 1e-10).unwrap().strong);
    }

    #[test]
    fn diagonalized_lifts(seed in 0u64..10_000, d in prop::sample::select(vec![0u8, 1, 2, 6, 7])) {
        let l = random_lift(seed, d);
        let before: Vec<f64> = sigma(&l).fibers.iter().flat_map(|f| f.eigenvalues.clone()).collect();
        let r = diagonalize_bases(&l, 1e-10).unwrap();
        let sig = sigma(&r);
        prop_assert!(sig.is_diagonal(1e-10));
        let kappa = r.kappa.clone().unwrap();
        for v in &r.source.vertices {
            let jv = &r.source.jim[&v.id];
            prop_assert!((kappa[&v.id] - kappa[jv]).abs() <= 1e-10);
        }
        let after: Vec<f64> = sig.fibers.iter().flat_map(|f| f.eigenvalues.clone()).collect();
        for (x, y) in before.iter().zip(&after) {
            prop_assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()));
        }
        // the rotated pair is still a valid lift with the same Dirac spectrum
        let ta = realize(&r.source).unwrap();
        let tb = realize(&r.target).unwrap();
        prop_assert!(real_grading_check(&r, &ta, &tb, 1e-9).unwrap().ok());
        let s0 = realize(&l.source).unwrap().d.eigvalsh().unwrap();
        let s1 = ta.d.eigvalsh().unwrap();
        for (x, y) in s0.iter().zip(&s1) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
        let phi = build_phi_h(&r).unwrap();
        prop_assert!(bimodule_residual(&r, &phi).unwrap() <= 1e-12);
    }

    #[test]
    fn normalized_lifts_are_isometries(seed in 0u64..10_000, d in prop::sample::select(vec![0u8, 1, 2, 6, 7])) {
        let l = normalize(&diagonalize_bases(&random_lift(seed, d), 1e-10).unwrap(), 1e-10).unwrap();
        let phi = build_phi_h(&l).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let na = phi.matrix.cols();
        for _ in 0..100 {
            let x = column(&mut rng, na);
            let y = column(&mut rng, na);
            let lhs = vdot(phi.matrix.matmul(&x).entries(), phi.matrix.matmul(&y).entries());
            prop_assert!((lhs - vdot(x.entries(), y.entries())).norm() <= 1e-12 * (1.0 + x.norm() * y.norm()));
        }
    }

    #[test]
    fn compatibility_algebra(seed in 0u64..10_000, d in prop::sample::select(vec![0u8, 1, 2, 6, 7])) {
        let l = normalize(&diagonalize_bases(&random_lift(seed, d), 1e-10).unwrap(), 1e-10).unwrap();
        let phi = build_phi_h(&l).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (nb, na) = phi.matrix.shape();
        let q = phi.complement();
        let strong_pair = |rng: &mut ChaCha8Rng| {
            let a = sample::matrix(rng, na, na);
            let b = &(&phi.matrix.matmul(&a).matmul(&phi.matrix.adjoint())
                + &q.matmul(&sample::matrix(rng, nb, nb)).matmul(&q))
                + &phi.projector.matmul(&sample::matrix(rng, nb, nb)).matmul(&q);
            (a, b)
        };
        let (a1, b1) = strong_pair(&mut rng);
        let (a2, b2) = strong_pair(&mut rng);
        prop_assert!(compat_check(&a1, &b1, &phi, 1e-10).unwrap().strong);
        let prod = compat_check(&a1.matmul(&a2), &b1.matmul(&b2), &phi, 1e-10).unwrap();
        prop_assert!(prod.strong && prod.weak_residual <= 1e-12 * (1.0 + a1.norm() * a2.norm()) * 10.0);
        prop_assert!(compat_check(&(&a1 + &a2), &(&b1 + &b2), &phi, 1e-10).unwrap().strong);
        // algebra representations are strong compatible
        let x = sample::element(&mut rng, &l.source.profile);
        let pa = phi.source_layout.left_operator(&x);
        let pb = phi.target_layout.left_operator(&l.arrow.apply(&x).unwrap());
        prop_assert!(compat_check(&pa, &pb, &phi, 1e-10).unwrap().strong);
        // unitary pair: block diagonal, adjoints compatible
        let ua = sample::unitary(&mut rng, na);
        let (vals, vecs) = q.eigh().unwrap();
        let cols: Vec<Vec<C64>> = (0..nb).filter(|&k| vals[k] > 0.5).map(|k| vecs.col(k)).collect();
        let e = ComplexMatrix::from_columns(nb, &cols);
        let rest = sample::unitary(&mut rng, cols.len());
        let ub = &phi.matrix.matmul(&ua).matmul(&phi.matrix.adjoint()) + &e.matmul(&rest).matmul(&e.adjoint());
        prop_assert!(ub.adjoint().matmul(&ub).dist(&ComplexMatrix::identity(nb)) < 1e-10);
        let r = compat_check(&ua, &ub, &phi, 1e-10).unwrap();
        prop_assert!(r.strong && r.phi_perp <= 1e-10 && r.perp_phi <= 1e-10);
        let radj = compat_check(&ua.adjoint(), &ub.adjoint(), &phi, 1e-10).unwrap();
        prop_assert!(radj.strong);
    }
}

#[test]
fn kappa_map_type() {
    let k: BTreeMap<String, f64> = sigma(&random_lift(1, 0)).kappa();
    assert!(k.values().all(|&x| x > 0.0));
}
