use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{epsilon_factor, KoSignature, KrajewskiDiagram};
use crate::algebra::{AlgebraElement, AlgebraProfile, Layout};
use crate::error::{NcgError, Result};
use crate::linalg::{vdot, ComplexMatrix, C64};

/// A concrete finite real spectral triple. The real structure is
/// `J = K ∘ conj`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealSpectralTriple {
    pub profile: AlgebraProfile,
    pub ko: KoSignature,
    pub layout: Layout,
    pub d: ComplexMatrix,
    pub k: ComplexMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<ComplexMatrix>,
}

impl RealSpectralTriple {
    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn check_shapes(&self) -> Result<()> {
        self.layout.check_against(&self.profile)?;
        let n = self.dim();
        let mut mats = vec![("D", &self.d), ("K", &self.k)];
        if let Some(g) = &self.gamma {
            mats.push(("gamma", g));
        }
        for (name, m) in mats {
            if m.shape() != (n, n) {
                return Err(NcgError::Shape(format!("{name} is {:?}, layout has dimension {n}", m.shape())));
            }
        }
        if self.gamma.is_some() != self.ko.is_even() {
            return Err(NcgError::Shape(format!(
                "grading presence does not match KO-dimension {}",
                self.ko.d()
            )));
        }
        Ok(())
    }

    pub fn pi(&self, a: &AlgebraElement) -> ComplexMatrix {
        self.layout.left_operator(a)
    }

    /// `J X J⁻¹ = K X̄ K†`.
    pub fn j_conjugate(&self, x: &ComplexMatrix) -> ComplexMatrix {
        self.k.matmul(&x.conj()).matmul(&self.k.adjoint())
    }

    /// `Jψ = K ψ̄`.
    pub fn j_apply(&self, psi: &ComplexMatrix) -> ComplexMatrix {
        self.k.matmul(&psi.conj())
    }

    /// `J π(b)* J⁻¹`.
    pub fn opposite(&self, b: &AlgebraElement) -> ComplexMatrix {
        self.j_conjugate(&self.pi(b).adjoint())
    }

    /// `V† t V`, with `K ↦ V† K V̄`.
    pub fn conjugated(&self, v: &ComplexMatrix, layout: Layout) -> Self {
        let vd = v.adjoint();
        Self {
            profile: self.profile.clone(),
            ko: self.ko,
            layout,
            d: vd.matmul(&self.d).matmul(v),
            k: vd.matmul(&self.k).matmul(&v.conj()),
            gamma: self.gamma.as_ref().map(|g| vd.matmul(g).matmul(v)),
        }
    }
}

pub fn realize(diag: &KrajewskiDiagram) -> Result<RealSpectralTriple> {
    realize_with_tol(diag, 1e-10)
}

pub fn realize_with_tol(diag: &KrajewskiDiagram, tol: f64) -> Result<RealSpectralTriple> {
    diag.ensure_valid(tol)?;
    let (edges, _, _) = diag.complete_edges(tol)?;
    let order = diag.realization_order();
    let layout = diag.layout();
    let n = layout.dim();
    let mut pos = vec![0; diag.vertices.len()];
    for (slot, &k) in order.iter().enumerate() {
        pos[k] = slot;
    }
    let block = |k: usize| &layout.blocks()[pos[k]];

    let mut d = ComplexMatrix::zeros(n, n);
    for (&(a, b), (_, op)) in &edges {
        d.set_block(block(b).offset, block(a).offset, op);
    }

    let mut k = ComplexMatrix::zeros(n, n);
    for (kv, v) in diag.vertices.iter().enumerate() {
        let w = diag.vertices.iter().position(|w| w.id == diag.jim[&v.id]).expect("validated");
        let eps = epsilon_factor(v, diag.ko)? as f64;
        let s = ComplexMatrix::swap(diag.profile.n(v.i), diag.profile.n(v.j)).scale_re(eps);
        k.set_block(block(w).offset, block(kv).offset, &s);
    }

    let gamma = if diag.ko.is_even() {
        let mut g = vec![C64::new(0.0, 0.0); n];
        for (kv, v) in diag.vertices.iter().enumerate() {
            let b = block(kv);
            let s = v.s.expect("validated") as f64;
            for x in &mut g[b.offset..b.offset + b.len] {
                *x = C64::new(s, 0.0);
            }
        }
        Some(ComplexMatrix::diagonal(&g))
    } else {
        None
    };

    Ok(RealSpectralTriple { profile: diag.profile.clone(), ko: diag.ko, layout, d, k, gamma })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomEntry {
    pub name: String,
    pub residual: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub entries: Vec<AxiomEntry>,
}

impl AxiomReport {
    pub fn ok(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn max_residual(&self) -> f64 {
        self.entries.iter().map(|e| e.residual).fold(0.0, f64::max)
    }

    pub fn residual(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.residual)
    }
}

pub const AX_D_HERMITIAN: &str = "D hermitian";
pub const AX_K_UNITARY: &str = "K unitary";
pub const AX_J_ANTIUNITARY: &str = "J antiunitary (sampled)";
pub const AX_J2: &str = "J^2 = eps";
pub const AX_JD: &str = "JD = eps' DJ";
pub const AX_G2: &str = "gamma^2 = 1";
pub const AX_G_HERMITIAN: &str = "gamma hermitian";
pub const AX_GD: &str = "gamma D = -D gamma";
pub const AX_GA: &str = "gamma pi(a) = pi(a) gamma";
pub const AX_JG: &str = "J gamma = eps'' gamma J";
pub const AX_COMMUTANT: &str = "[pi(a), J pi(b)* J^-1] = 0";
pub const AX_FIRST_ORDER: &str = "[[D, pi(a)], J pi(b)* J^-1] = 0";

pub fn verify_axioms(t: &RealSpectralTriple, tol: f64) -> AxiomReport {
    verify_axioms_seeded(t, tol, 0)
}

pub fn verify_axioms_seeded(t: &RealSpectralTriple, tol: f64, seed: u64) -> AxiomReport {
    let n = t.dim();
    let id = ComplexMatrix::identity(n);
    let mut entries = Vec::new();
    let mut push = |name: &str, residual: f64| {
        entries.push(AxiomEntry { name: name.to_string(), residual, passed: residual <= tol });
    };
    if let Err(e) = t.check_shapes() {
        push(&format!("shapes: {e}"), f64::INFINITY);
        return AxiomReport { entries };
    }
    let eps = t.ko.eps() as f64;
    let eps_p = t.ko.eps_p() as f64;

    push(AX_D_HERMITIAN, t.d.hermiticity_defect());
    push(AX_K_UNITARY, t.k.adjoint().matmul(&t.k).dist(&id));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = || {
        ComplexMatrix::column(
            &(0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect::<Vec<_>>(),
        )
    };
    let mut anti: f64 = 0.0;
    for _ in 0..8 {
        let (x, y) = (sample(), sample());
        let (jx, jy) = (t.j_apply(&x), t.j_apply(&y));
        let lhs = vdot(jx.entries(), jy.entries());
        let rhs = vdot(y.entries(), x.entries());
        anti = anti.max((lhs - rhs).norm());
    }
    push(AX_J_ANTIUNITARY, anti);

    push(AX_J2, t.k.matmul(&t.k.conj()).dist(&id.scale_re(eps)));
    push(AX_JD, t.k.matmul(&t.d.conj()).dist(&t.d.matmul(&t.k).scale_re(eps_p)));

    let gens = AlgebraElement::matrix_units(&t.profile);
    let pis: Vec<ComplexMatrix> = gens.iter().map(|a| t.pi(a)).collect();
    let opps: Vec<ComplexMatrix> = gens.iter().map(|b| t.opposite(b)).collect();

    if let (Some(g), Some(epp)) = (&t.gamma, t.ko.eps_pp()) {
        push(AX_G2, g.matmul(g).dist(&id));
        push(AX_G_HERMITIAN, g.hermiticity_defect());
        push(AX_GD, g.anticommutator(&t.d).norm());
        let ga = pis.iter().map(|p| g.commutator(p).norm()).fold(0.0, f64::max);
        push(AX_GA, ga);
        push(AX_JG, t.k.matmul(&g.conj()).dist(&g.matmul(&t.k).scale_re(epp as f64)));
    }

    let mut comm: f64 = 0.0;
    let mut first: f64 = 0.0;
    for p in &pis {
        let dp = t.d.commutator(p);
        for o in &opps {
            comm = comm.max(p.commutator(o).norm());
            first = first.max(dp.commutator(o).norm());
        }
    }
    push(AX_COMMUTANT, comm);
    push(AX_FIRST_ORDER, first);
    AxiomReport { entries }
}

/// KO-dimensions whose sign row matches the measured signs. Parity is read
/// from the presence of a grading.
pub fn detect_ko(t: &RealSpectralTriple, tol: f64) -> BTreeSet<u8> {
    let n = t.dim();
    let id = ComplexMatrix::identity(n);
    let kk = t.k.matmul(&t.k.conj());
    let kd = t.k.matmul(&t.d.conj());
    let dk = t.d.matmul(&t.k);
    let mut out = BTreeSet::new();
    for eps in [1i8, -1] {
        if kk.dist(&id.scale_re(eps as f64)) > tol {
            continue;
        }
        for eps_p in [1i8, -1] {
            if kd.dist(&dk.scale_re(eps_p as f64)) > tol {
                continue;
            }
            match &t.gamma {
                Some(g) => {
                    let kg = t.k.matmul(&g.conj());
                    let gk = g.matmul(&t.k);
                    for epp in [1i8, -1] {
                        if kg.dist(&gk.scale_re(epp as f64)) <= tol {
                            out.extend(KoSignature::matching(eps, eps_p, Some(epp)));
                        }
                    }
                }
                None => out.extend(KoSignature::matching(eps, eps_p, None)),
            }
        }
    }
    out
}
