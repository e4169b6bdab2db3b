//! Acceptance suite. One line per criterion; exits nonzero on any failure.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use ncg_core::action::{compare_actions, spectral_action, Comparison, CutoffFunction, GaugeConfiguration, L_PHI2, S_B};
use ncg_core::differential::{gauge_covariance_check, gauge_transform, pushforward, UniversalOneForm};
use ncg_core::io::{render_arrow, render_diagram, render_lift, Bundle, LiftEntry};
use ncg_core::krajewski::{classify, detect_ko, minimal_diagram, realize, verify_axioms, KoSignature, KrajewskiDiagram, RealSpectralTriple};
use ncg_core::lifting::{
    build_phi_h, compat_check, diagonalize_bases, format_key, normalize, real_grading_check, sigma, DiagramLift, PhiHMap,
};
use ncg_core::linalg::{vec_norm, ComplexMatrix, C64};
use ncg_core::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const AXIOM_TOL: f64 = 1e-12;
const CLASSIFY_TOL: f64 = 1e-8;
const COMPAT_TOL: f64 = 1e-12;
const SIGMA_TOL: f64 = 1e-10;
const ISOMETRY_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const GAUGE_TOL: f64 = 1e-12;
const ACTION_REL_TOL: f64 = 1e-10;
const COMPARE_TOL: f64 = 1e-10;
const TIME_LIMIT: Duration = Duration::from_secs(60);

/// KO dimensions where diagonal fibers admit the automatic rotation.
const ROTATABLE: [u8; 5] = [0, 1, 2, 6, 7];

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normalized_lift(seed: u64, d: u8) -> (DiagramLift, PhiHMap, ChaCha8Rng) {
    let mut r = rng(seed);
    let l = sample::injective_lift(&mut r, d);
    let l = normalize(&diagonalize_bases(&l, SIGMA_TOL).unwrap(), SIGMA_TOL).unwrap();
    let phi = build_phi_h(&l).unwrap();
    (l, phi, r)
}

fn ko_round_trip() -> Outcome {
    let mut worst: f64 = 0.0;
    for d in 0..8u8 {
        let t = realize(&minimal_diagram(d, 0.75)).map_err(|e| format!("d={d}: {e}"))?;
        let rep = verify_axioms(&t, AXIOM_TOL);
        ensure!(rep.ok(), "d={d}: axiom residuals {:?}", rep.entries);
        worst = worst.max(rep.max_residual());
        let ko = detect_ko(&t, AXIOM_TOL);
        if t.d.norm() > 0.0 {
            ensure!(ko == BTreeSet::from([d]), "d={d}: detected {ko:?}");
        } else {
            ensure!(ko.contains(&d), "d={d}: detected {ko:?}");
        }
    }
    Ok(format!("8 dimensions, max residual {worst:.1e}"))
}

/// Sorted singular values of `D` between each ordered pair of `(i,j)`
/// fiber subspaces; invariant under unitary changes of basis inside fibers.
fn fiber_block_spectra(t: &RealSpectralTriple) -> Vec<((usize, usize), (usize, usize), Vec<f64>)> {
    let mut fibers: std::collections::BTreeMap<(usize, usize), Vec<usize>> = Default::default();
    for b in t.layout.blocks() {
        fibers.entry((b.i, b.j)).or_default().extend(b.offset..b.offset + b.len);
    }
    let mut out = Vec::new();
    for (f1, cols) in &fibers {
        for (f2, rows) in &fibers {
            let block = ComplexMatrix::from_fn(rows.len(), cols.len(), |r, c| t.d[(rows[r], cols[c])]);
            let mut sv = block.singular_values();
            sv.sort_by(|a, b| b.total_cmp(a));
            out.push((*f1, *f2, sv));
        }
    }
    out
}

fn labelled_multiset(d: &KrajewskiDiagram) -> (Vec<(usize, usize, Option<i8>)>, Vec<(usize, usize, Option<u8>)>) {
    let mut s: Vec<_> = d.vertices.iter().map(|v| (v.i, v.j, v.s)).collect();
    let mut chi: Vec<_> = d.vertices.iter().map(|v| (v.i, v.j, v.chi)).collect();
    s.sort();
    chi.sort();
    (s, chi)
}

fn classification_round_trip() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 0..50u64 {
        let d = ROTATABLE[(k % 5) as usize];
        let mut r = rng(1000 + k);
        let p = sample::profile(&mut r, 3, 2);
        let diag = sample::diagram(&mut r, &p, KoSignature::new(d as i64), 2, 0.6);
        let t = realize(&diag).map_err(|e| format!("case {k}: {e}"))?;
        let (back, _) = classify(&t, 1e-10).map_err(|e| format!("case {k}: {e}"))?;
        ensure!(back.multiplicities() == diag.multiplicities(), "case {k}: multiplicities differ");
        ensure!(back.ko == diag.ko, "case {k}: KO signature differs");
        ensure!(labelled_multiset(&back) == labelled_multiset(&diag), "case {k}: s/chi multisets differ");
        let t2 = realize(&back).map_err(|e| format!("case {k}: {e}"))?;
        let (a, b) = (fiber_block_spectra(&t), fiber_block_spectra(&t2));
        ensure!(a.len() == b.len(), "case {k}: fiber structure differs");
        for ((f1, f2, x), (g1, g2, y)) in a.iter().zip(&b) {
            ensure!(f1 == g1 && f2 == g2 && x.len() == y.len(), "case {k}: fiber blocks differ");
            for (p, q) in x.iter().zip(y) {
                worst = worst.max((p - q).abs());
            }
        }
        ensure!(worst <= CLASSIFY_TOL, "case {k}: edge singular values differ by {worst:.2e}");
    }
    Ok(format!("50 diagrams, max singular value deviation {worst:.1e}"))
}

fn compatibility_algebra() -> Outcome {
    let mut pairs = 0;
    let mut weak_only = 0;
    let mut worst: f64 = 0.0;
    for k in 0..20u64 {
        let (_, phi, mut r) = normalized_lift(2000 + k, ROTATABLE[(k % 5) as usize]);
        let (nb, na) = phi.matrix.shape();
        let p = &phi.projector;
        let q = phi.complement();
        let embed = |a: &ComplexMatrix| phi.matrix.matmul(a).matmul(&phi.matrix.adjoint());
        for _ in 0..5 {
            // φAφ† + PXQ + QYQ maps the range of φ_H as A does
            let strong = |r: &mut ChaCha8Rng| {
                let a = sample::matrix(r, na, na);
                let x = sample::matrix(r, nb, nb);
                let y = sample::matrix(r, nb, nb);
                let b = &(&embed(&a) + &p.matmul(&x).matmul(&q)) + &q.matmul(&y).matmul(&q);
                (a, b)
            };
            let (a1, b1) = strong(&mut r);
            let (a2, b2) = strong(&mut r);
            for (name, a, b) in [
                ("pair", a1.clone(), b1.clone()),
                ("composition", a1.matmul(&a2), b1.matmul(&b2)),
                ("sum", &a1 + &a2, &b1 + &b2),
            ] {
                let rep = compat_check(&a, &b, &phi, COMPAT_TOL).map_err(|e| e.to_string())?;
                worst = worst.max(rep.weak_residual).max(rep.leak);
                ensure!(rep.strong, "lift {k}: {name} not strong ({:.2e}, {:.2e})", rep.weak_residual, rep.leak);
            }
            pairs += 1;
            if q.norm() > 1e-6 {
                let a = sample::matrix(&mut r, na, na);
                let x = sample::matrix(&mut r, nb, nb);
                let leak = q.matmul(&x).matmul(p);
                if leak.norm() > 1e-6 {
                    let rep = compat_check(&a, &(&embed(&a) + &leak), &phi, COMPAT_TOL).map_err(|e| e.to_string())?;
                    ensure!(rep.weak && !rep.strong, "lift {k}: weak-only example misclassified {rep:?}");
                    weak_only += 1;
                }
            }
            let a = sample::matrix(&mut r, na, na);
            let off = &embed(&a) + &embed(&ComplexMatrix::identity(na));
            let rep = compat_check(&a, &off, &phi, COMPAT_TOL).map_err(|e| e.to_string())?;
            ensure!(!rep.weak, "lift {k}: incompatible example classified as weak");
        }
    }
    ensure!(weak_only > 0, "no weak-but-not-strong example could be built");
    Ok(format!("{pairs} strong pairs (max residual {worst:.1e}), {weak_only} weak-only examples"))
}

fn real_structure_lift() -> Outcome {
    let mut passing = 0;
    for k in 0..40u64 {
        let d = (k % 8) as u8;
        let mut r = rng(3000 + k);
        let l = sample::injective_lift(&mut r, d);
        let ta = realize(&l.source).map_err(|e| e.to_string())?;
        let tb = realize(&l.target).map_err(|e| e.to_string())?;
        let rep = real_grading_check(&l, &ta, &tb, 1e-10).map_err(|e| e.to_string())?;
        ensure!(rep.ok(), "d={d} case {k}: {rep:?}");
        ensure!(rep.j.strong, "d={d} case {k}: J not strong");
        ensure!(rep.ko_equal, "d={d} case {k}: KO dimensions differ");
        passing += 1;

        // one perturbed entry must be named, together with at most its partner
        let keys: Vec<_> = l.u.keys().cloned().collect();
        let (v, w) = keys[(k as usize * 7) % keys.len()].clone();
        let mut bad = l.clone();
        bad.u.get_mut(&(v.clone(), w.clone())).unwrap()[(0, 0)] += C64::new(0.1, 0.1);
        let rep = real_grading_check(&bad, &ta, &tb, 1e-10).map_err(|e| e.to_string())?;
        ensure!(!rep.ok() && !rep.j.strong, "d={d} case {k}: perturbation of {v}->{w} not detected");
        let jv = &l.source.jim[&v];
        let jw = &l.target.jim[&w];
        let allowed = [format_key(&v, &w), format_key(jv, jw)];
        ensure!(!rep.relation_witnesses.is_empty(), "d={d} case {k}: no witness");
        for wit in &rep.relation_witnesses {
            ensure!(allowed.iter().any(|a| wit.starts_with(a.as_str())), "d={d} case {k}: stray witness {wit}");
        }
    }
    Ok(format!("{passing} lifts over all KO dimensions, perturbations localized"))
}

fn diagonalize_normalize() -> Outcome {
    let mut worst_iso: f64 = 0.0;
    for k in 0..50u64 {
        let d = ROTATABLE[(k % 5) as usize];
        let mut r = rng(4000 + k);
        let l = sample::injective_lift(&mut r, d);
        let rot = diagonalize_bases(&l, SIGMA_TOL).map_err(|e| format!("case {k}: {e}"))?;
        let sig = sigma(&rot);
        for f in &sig.fibers {
            ensure!(f.off_diagonal() <= SIGMA_TOL, "case {k}: sigma off-diagonal {:.2e}", f.off_diagonal());
        }
        let kappa = sig.kappa();
        for v in &rot.source.vertices {
            let jv = &rot.source.jim[&v.id];
            ensure!((kappa[&v.id] - kappa[jv]).abs() <= SIGMA_TOL, "case {k}: kappa({}) != kappa({jv})", v.id);
        }
        let n = normalize(&rot, SIGMA_TOL).map_err(|e| format!("case {k}: {e}"))?;
        let phi = build_phi_h(&n).map_err(|e| e.to_string())?;
        for _ in 0..100 {
            let psi = sample::vector(&mut r, phi.matrix.cols());
            let dev = (vec_norm(phi.matrix.matmul(&psi).entries()) - vec_norm(psi.entries())).abs();
            worst_iso = worst_iso.max(dev);
        }
        ensure!(worst_iso <= ISOMETRY_TOL, "case {k}: isometry defect {worst_iso:.2e}");
    }
    Ok(format!("50 lifts, max norm deviation {worst_iso:.1e}"))
}

fn trace_lemma() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut families = 0;
    for k in 0..25u64 {
        let (_, phi, mut r) = normalized_lift(5000 + k, ROTATABLE[(k % 5) as usize]);
        let (nb, na) = phi.matrix.shape();
        let p = &phi.projector;
        let q = phi.complement();
        for n in 1..=4 {
            let mut a_prod = ComplexMatrix::identity(na);
            let mut b_prod = ComplexMatrix::identity(nb);
            for _ in 0..n {
                let a = sample::matrix(&mut r, na, na);
                let x = sample::matrix(&mut r, nb, nb);
                // weak: P B φ = φ A, every other block arbitrary
                let b = &(&phi.matrix.matmul(&a).matmul(&phi.matrix.adjoint()) + &p.matmul(&x).matmul(&q)) + &q.matmul(&x);
                ensure!(compat_check(&a, &b, &phi, 1e-10).map_err(|e| e.to_string())?.weak, "family member not weak");
                a_prod = a_prod.matmul(&a);
                b_prod = b_prod.matmul(&p.matmul(&b).matmul(p));
            }
            worst = worst.max((b_prod.trace() - a_prod.trace()).norm());
            families += 1;
        }
        ensure!(worst <= TRACE_TOL, "trace difference {worst:.2e}");
    }
    Ok(format!("{families} families, max difference {worst:.1e}"))
}

fn gauge_structure() -> Outcome {
    let mut worst_d: f64 = 0.0;
    let mut worst_s: f64 = 0.0;
    let f = CutoffFunction::gaussian();
    for k in 0..50u64 {
        let d = (k % 8) as u8;
        let mut r = rng(6000 + k);
        let p = sample::profile(&mut r, 3, 2);
        let t = realize(&sample::diagram(&mut r, &p, KoSignature::new(d as i64), 2, 0.7)).map_err(|e| e.to_string())?;
        let w = UniversalOneForm::new(vec![(sample::element(&mut r, &p), sample::element(&mut r, &p))])
            .hermitian_part()
            .map_err(|e| e.to_string())?;
        let u = sample::unitary_element(&mut r, &p);
        let rep = gauge_covariance_check(&t, &w, &u, GAUGE_TOL).map_err(|e| e.to_string())?;
        worst_d = worst_d.max(rep.dirac_residual);
        ensure!(rep.dirac_residual <= GAUGE_TOL, "case {k}: D_omega^u residual {:.2e}", rep.dirac_residual);
        let wu = gauge_transform(&w, &u, 1e-10).map_err(|e| e.to_string())?;
        let s0 = spectral_action(&t, &w, &f, 1.3, 1e-9).map_err(|e| e.to_string())?;
        let s1 = spectral_action(&t, &wu, &f, 1.3, 1e-9).map_err(|e| e.to_string())?;
        let rel = (s0 - s1).abs() / s0.abs().max(f64::MIN_POSITIVE);
        worst_s = worst_s.max(rel);
        ensure!(rel <= ACTION_REL_TOL, "case {k}: spectral action moved by {rel:.2e}");
    }
    let mut worst_u: f64 = 0.0;
    for k in 0..20u64 {
        let (l, phi, mut r) = normalized_lift(6500 + k, ROTATABLE[(k % 5) as usize]);
        let ta = realize(&l.source).map_err(|e| e.to_string())?;
        let tb = realize(&l.target).map_err(|e| e.to_string())?;
        let ua = sample::unitary_element(&mut r, &ta.profile);
        let ub = l.arrow.lift_unitary(&ua, 1e-10).map_err(|e| e.to_string())?;
        ensure!(ub.unitarity_defect() <= GAUGE_TOL, "lift {k}: u_B defect {:.2e}", ub.unitarity_defect());
        let rep = compat_check(&ta.pi(&ua), &tb.pi(&ub), &phi, GAUGE_TOL).map_err(|e| e.to_string())?;
        ensure!(rep.strong, "lift {k}: u_B not strong-compatible {rep:?}");
        ensure!(rep.phi_perp <= GAUGE_TOL && rep.perp_phi <= GAUGE_TOL, "lift {k}: u_B not block-diagonal {rep:?}");
        worst_u = worst_u.max(ub.unitarity_defect()).max(rep.weak_residual).max(rep.leak).max(rep.phi_perp).max(rep.perp_phi);
    }
    Ok(format!(
        "50 (omega,u): D residual {worst_d:.1e}, action rel. {worst_s:.1e}; 20 lifted unitaries {worst_u:.1e}"
    ))
}

fn action_comparison() -> Outcome {
    let mut worst: f64 = 0.0;
    let f = CutoffFunction::gaussian();
    let lambda = 1.5;
    for k in 0..20u64 {
        let (l, phi, mut r) = normalized_lift(7000 + k, ROTATABLE[(k % 5) as usize]);
        let ta = realize(&l.source).map_err(|e| e.to_string())?;
        let mut tb = realize(&l.target).map_err(|e| e.to_string())?;
        tb.d = sample::inherited_dirac(&mut r, &phi, &ta.d, tb.gamma.as_ref());
        let wa = UniversalOneForm::new(vec![(sample::element(&mut r, &ta.profile), sample::element(&mut r, &ta.profile))])
            .hermitian_part()
            .map_err(|e| e.to_string())?;
        let wb = pushforward(&wa, &l.arrow).map_err(|e| e.to_string())?;
        let h = [0, 1, 2, 3].map(|_| sample::hermitian_element(&mut r, &ta.profile));
        let hb = h.clone().map(|x| l.arrow.apply(&x).unwrap());
        let ca = GaugeConfiguration::from_form(&ta, &wa, &h, 1e-9).map_err(|e| e.to_string())?;
        let cb = GaugeConfiguration::from_form(&tb, &wb, &hb, 1e-9).map_err(|e| e.to_string())?;
        let (psi_a, psi_b) = sample::compatible_fermions(&mut r, &phi, &ta, &tb);
        let cmp = Comparison {
            lift: &l,
            phi: &phi,
            ta: &ta,
            tb: &tb,
            omega_a: &wa,
            omega_b: &wb,
            cfg_a: &ca,
            cfg_b: &cb,
            fermions: Some((&psi_a, &psi_b)),
            f: &f,
            lambda,
        };
        let rep = compare_actions(&cmp, 1e-9).map_err(|e| format!("case {k}: {e}"))?;
        for rec in &rep.records {
            let scale = rec.a_side.abs().max(1.0);
            worst = worst.max(rec.lemma_residual() / scale);
            ensure!(rec.lemma_residual() <= COMPARE_TOL * scale, "case {k}: {} inherited {} vs A-side {}", rec.term, rec.inherited, rec.a_side);
        }
        // A-side values against direct evaluation
        let phi2 = ca.phi.matmul(&ca.phi).trace().re * (-2.0 * f.f2() * lambda * lambda / (4.0 * std::f64::consts::PI.powi(2)));
        let got = rep.record(L_PHI2).ok_or("missing L_phi2")?.a_side;
        ensure!((got - phi2).abs() <= COMPARE_TOL * phi2.abs().max(1.0), "case {k}: L_phi2 A-side {got} vs {phi2}");
        let sa = spectral_action(&ta, &wa, &f, lambda, 1e-9).map_err(|e| e.to_string())?;
        let got = rep.record(S_B).ok_or("missing S_b")?.a_side;
        ensure!((got - sa).abs() <= COMPARE_TOL * sa.abs().max(1.0), "case {k}: S_b A-side {got} vs {sa}");
    }
    Ok(format!("20 normalized lifts, max relative lemma residual {worst:.1e}"))
}

fn serialization() -> Outcome {
    let dir = std::env::temp_dir().join(format!("ncg-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let mut bundles = 0;
    for k in 0..10u64 {
        let (l, _, mut r) = normalized_lift(8000 + k, ROTATABLE[(k % 5) as usize]);
        let mut b = Bundle::new();
        b.diagrams.insert("a".into(), l.source.clone());
        b.diagrams.insert("b".into(), l.target.clone());
        b.triples.insert("a".into(), realize(&l.source).map_err(|e| e.to_string())?);
        b.arrows.insert("phi".into(), l.arrow.clone());
        b.lifts.insert("l".into(), LiftEntry::from_lift("phi", "a", "b", &l));
        let p = &l.source.profile;
        b.forms.insert("w".into(), UniversalOneForm::term(sample::element(&mut r, p), sample::element(&mut r, p)));
        let n = b.triples["a"].dim();
        b.configurations.insert(
            "c".into(),
            GaugeConfiguration { b: std::array::from_fn(|_| sample::hermitian(&mut r, n)), phi: sample::hermitian(&mut r, n) },
        );
        let path = dir.join(format!("b{k}.json"));
        ncg_core::io::save_bundle(&b, &path).map_err(|e| e.to_string())?;
        let first = std::fs::read(&path).map_err(|e| e.to_string())?;
        let back = ncg_core::io::load_bundle(&path).map_err(|e| e.to_string())?;
        ensure!(back == b, "bundle {k}: loaded bundle differs");
        ncg_core::io::save_bundle(&back, &path).map_err(|e| e.to_string())?;
        let second = std::fs::read(&path).map_err(|e| e.to_string())?;
        ensure!(first == second, "bundle {k}: save/load/save changed bytes");

        let lift = back.lift("l").map_err(|e| e.to_string())?;
        for (name, x, y) in [
            ("diagram", render_diagram(&l.source), render_diagram(back.diagram("a").unwrap())),
            ("arrow", render_arrow(&l.arrow), render_arrow(back.arrow("phi").unwrap())),
            ("lift", render_lift(&l), render_lift(&lift)),
        ] {
            let (x, y) = (x.map_err(|e| e.to_string())?, y.map_err(|e| e.to_string())?);
            ensure!(x == y, "bundle {k}: {name} DOT differs between runs");
        }
        bundles += 1;
    }
    std::fs::remove_dir_all(&dir).map_err(|e| e.to_string())?;
    Ok(format!("{bundles} bundles byte-stable, DOT identical"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("KO table round trip", ko_round_trip),
        ("classification round trip", classification_round_trip),
        ("phi-compatibility algebra", compatibility_algebra),
        ("real-structure lift", real_structure_lift),
        ("diagonalization and normalization", diagonalize_normalize),
        ("trace lemma", trace_lemma),
        ("gauge structure", gauge_structure),
        ("action comparison", action_comparison),
        ("serialization", serialization),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(_) if elapsed > TIME_LIMIT => Err(format!("took {:.1}s", elapsed.as_secs_f64())),
            o => o,
        };
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} ({:.2}s)", k + 1, elapsed.as_secs_f64()),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail} ({:.2}s)", k + 1, elapsed.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
