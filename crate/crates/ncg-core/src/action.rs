//! Spectral action `Tr f(D_ω/Λ)`, the algebraic bosonic Lagrangian on a
//! flat background with constant fields, the fermionic pairing, and the
//! inherited/non-inherited comparison across a normalized lift.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::algebra::AlgebraElement;
use crate::differential::{fluctuate, fluctuated_operator, represent, UniversalOneForm};
use crate::error::{NcgError, Result};
use crate::krajewski::RealSpectralTriple;
use crate::lifting::{compat_check, DiagramLift, PhiHMap};
use crate::linalg::{vdot, ComplexMatrix, C64};

/// Even cutoff function with its moments `f(0)` and `f₂ = ∫₀^∞ f(x) x dx`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CutoffFunction {
    /// `exp(-(x/width)²)`.
    Gaussian { width: f64 },
    /// `Σ_k c_k x^{2k}`; `f2` has to be given.
    Polynomial { coefficients: Vec<f64>, f2: f64 },
}

impl CutoffFunction {
    pub fn gaussian() -> Self {
        Self::Gaussian { width: 1.0 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Gaussian { width } => (-(x / width).powi(2)).exp(),
            Self::Polynomial { coefficients, .. } => {
                let x2 = x * x;
                coefficients.iter().rev().fold(0.0, |acc, c| acc * x2 + c)
            }
        }
    }

    pub fn f0(&self) -> f64 {
        self.eval(0.0)
    }

    pub fn f2(&self) -> f64 {
        match self {
            Self::Gaussian { width } => width * width / 2.0,
            Self::Polynomial { f2, .. } => *f2,
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            Self::Gaussian { width } if !(*width > 0.0 && width.is_finite()) => {
                Err(NcgError::Precondition(format!("gaussian width must be positive, got {width}")))
            }
            Self::Polynomial { coefficients, .. } if coefficients.is_empty() => {
                Err(NcgError::Precondition("polynomial cutoff without coefficients".into()))
            }
            _ => Ok(()),
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(NcgError::Precondition(format!("Lambda must be positive, got {lambda}")));
    }
    Ok(())
}

/// `Σ_λ f(λ/Λ)` over the spectrum of a Hermitian operator.
pub fn trace_of_function(d: &ComplexMatrix, f: &CutoffFunction, lambda: f64, tol: f64) -> Result<f64> {
    f.check()?;
    check_lambda(lambda)?;
    let defect = d.hermiticity_defect();
    if defect > tol {
        return Err(NcgError::Precondition(format!("operator is not Hermitian (defect {defect:.3e})")));
    }
    Ok(d.eigvalsh()?.iter().map(|&l| f.eval(l / lambda)).sum())
}

/// `S_b[ω] = Tr f(D_ω/Λ)`.
pub fn spectral_action(
    t: &RealSpectralTriple,
    omega: &UniversalOneForm,
    f: &CutoffFunction,
    lambda: f64,
    tol: f64,
) -> Result<f64> {
    let dw = fluctuate(t, omega, tol)?;
    trace_of_function(&dw, f, lambda, tol)
}

/// Constant Hermitian fields `B_μ` (μ = 1..4) and `Φ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeConfiguration {
    pub b: [ComplexMatrix; 4],
    pub phi: ComplexMatrix,
}

impl GaugeConfiguration {
    pub fn new(b: [ComplexMatrix; 4], phi: ComplexMatrix, tol: f64) -> Result<Self> {
        let cfg = Self { b, phi };
        cfg.check(tol)?;
        Ok(cfg)
    }

    pub fn check(&self, tol: f64) -> Result<()> {
        let n = self.phi.rows();
        for (name, m) in self.operators() {
            if m.shape() != (n, n) {
                return Err(NcgError::Shape(format!("{name} is {:?}, expected {n}x{n}", m.shape())));
            }
            let defect = m.hermiticity_defect();
            if defect > tol {
                return Err(NcgError::Precondition(format!("{name} is not Hermitian (defect {defect:.3e})")));
            }
        }
        Ok(())
    }

    pub fn operators(&self) -> Vec<(String, &ComplexMatrix)> {
        let mut out: Vec<(String, &ComplexMatrix)> =
            self.b.iter().enumerate().map(|(m, b)| (format!("B_{}", m + 1), b)).collect();
        out.push(("Phi".into(), &self.phi));
        out
    }

    /// `B_μ = π(h_μ) − J π(h_μ) J⁻¹` and `Φ = D + X + ε′ J X J⁻¹`.
    pub fn from_form(t: &RealSpectralTriple, omega: &UniversalOneForm, h: &[AlgebraElement; 4], tol: f64) -> Result<Self> {
        let x = represent(omega, t)?;
        let defect = x.hermiticity_defect();
        if defect > tol {
            return Err(NcgError::Precondition(format!("pi_D(omega) is not Hermitian (defect {defect:.3e})")));
        }
        let b = h.clone().map(|hm| {
            let a = t.pi(&hm);
            &a - &t.j_conjugate(&a)
        });
        Self::new(b, fluctuated_operator(t, &x), tol)
    }

    /// `F_{μν} = i[B_μ, B_ν]`.
    pub fn curvature(&self, mu: usize, nu: usize) -> ComplexMatrix {
        self.b[mu].commutator(&self.b[nu]).scale(C64::new(0.0, 1.0))
    }

    /// `D_μΦ = i[B_μ, Φ]`.
    pub fn covariant(&self, mu: usize) -> ComplexMatrix {
        self.b[mu].commutator(&self.phi).scale(C64::new(0.0, 1.0))
    }

    /// Every field replaced by `f(field)`.
    pub fn map(&self, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Self {
        Self { b: [f(&self.b[0]), f(&self.b[1]), f(&self.b[2]), f(&self.b[3])], phi: f(&self.phi) }
    }
}

pub const L_B: &str = "L_B";
pub const L_PHI2: &str = "L_phi2";
pub const L_PHI4: &str = "L_phi4";
pub const L_KIN: &str = "L_kin";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagrangianTerm {
    pub name: String,
    pub trace: f64,
    pub coefficient: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagrangianReport {
    pub terms: Vec<LagrangianTerm>,
    pub total: f64,
    /// Largest imaginary part among the traces.
    pub imaginary: f64,
}

impl LagrangianReport {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }
}

/// One traced monomial: its name, coefficient and factors.
struct Monomial {
    name: String,
    coefficient: f64,
    factors: Vec<ComplexMatrix>,
}

fn coefficients(f: &CutoffFunction, lambda: f64) -> (f64, f64, f64, f64) {
    let f0 = f.f0();
    let pi2 = PI * PI;
    (f0 / (24.0 * pi2), -2.0 * f.f2() * lambda * lambda / (4.0 * pi2), f0 / (8.0 * pi2), f0 / (8.0 * pi2))
}

/// Monomials of the bosonic Lagrangian, `F_{μν}` split by unordered pair.
fn monomials(cfg: &GaugeConfiguration, f: &CutoffFunction, lambda: f64) -> Vec<Monomial> {
    let (cb, c2, c4, ck) = coefficients(f, lambda);
    let mut out = Vec::new();
    for mu in 0..4 {
        for nu in mu + 1..4 {
            let fm = cfg.curvature(mu, nu);
            out.push(Monomial { name: format!("{L_B}[{}{}]", mu + 1, nu + 1), coefficient: 2.0 * cb, factors: vec![fm.clone(), fm] });
        }
    }
    let p = cfg.phi.clone();
    out.push(Monomial { name: L_PHI2.into(), coefficient: c2, factors: vec![p.clone(), p.clone()] });
    out.push(Monomial { name: L_PHI4.into(), coefficient: c4, factors: vec![p.clone(), p.clone(), p.clone(), p] });
    for mu in 0..4 {
        let dm = cfg.covariant(mu);
        out.push(Monomial { name: format!("{L_KIN}[{}]", mu + 1), coefficient: ck, factors: vec![dm.clone(), dm] });
    }
    out
}

fn trace_product(factors: &[ComplexMatrix]) -> C64 {
    let mut acc = factors[0].clone();
    for m in &factors[1..] {
        acc = acc.matmul(m);
    }
    acc.trace()
}

pub fn bosonic_lagrangian(cfg: &GaugeConfiguration, f: &CutoffFunction, lambda: f64, tol: f64) -> Result<LagrangianReport> {
    f.check()?;
    check_lambda(lambda)?;
    cfg.check(tol)?;
    let (cb, c2, c4, ck) = coefficients(f, lambda);
    let mut sums = [C64::new(0.0, 0.0); 4];
    for m in monomials(cfg, f, lambda) {
        let tr = trace_product(&m.factors);
        let k = if m.name.starts_with(L_KIN) {
            3
        } else if m.name.starts_with(L_B) {
            0
        } else if m.name == L_PHI2 {
            1
        } else {
            2
        };
        // the F terms were split into unordered pairs
        sums[k] += if k == 0 { tr * 2.0 } else { tr };
    }
    let names = [(L_B, cb), (L_PHI2, c2), (L_PHI4, c4), (L_KIN, ck)];
    let imaginary = sums.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let terms: Vec<LagrangianTerm> = names
        .iter()
        .zip(&sums)
        .map(|(&(name, coefficient), tr)| LagrangianTerm { name: name.into(), trace: tr.re, coefficient, value: coefficient * tr.re })
        .collect();
    let total = terms.iter().map(|t| t.value).sum();
    Ok(LagrangianReport { terms, total, imaginary })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    /// `A(ψ,ψ′) = ⟨Jψ, D_ω ψ′⟩`.
    pub value: C64,
    /// `A(ψ′,ψ)`.
    pub swapped: C64,
    /// `|A(ψ,ψ′) − A(ψ′,ψ)|` and `|A(ψ,ψ′) + A(ψ′,ψ)|`.
    pub symmetric_defect: f64,
    pub antisymmetric_defect: f64,
}

/// Raw bilinear form `⟨Jψ, D ψ′⟩` for a given operator.
pub fn pairing_with(t: &RealSpectralTriple, d: &ComplexMatrix, psi: &ComplexMatrix, psi_p: &ComplexMatrix) -> C64 {
    vdot(t.j_apply(psi).entries(), d.matmul(psi_p).entries())
}

fn check_fermion(t: &RealSpectralTriple, name: &str, psi: &ComplexMatrix, tol: f64) -> Result<()> {
    if psi.shape() != (t.dim(), 1) {
        return Err(NcgError::Shape(format!("{name} is {:?}, expected a column of length {}", psi.shape(), t.dim())));
    }
    if let Some(g) = &t.gamma {
        let off = (&g.matmul(psi) - psi).norm();
        if off > tol * (1.0 + psi.norm()) {
            return Err(NcgError::Precondition(format!("{name} is not in the +1 eigenspace of gamma ({off:.3e})")));
        }
    }
    Ok(())
}

pub fn fermionic_pairing(
    t: &RealSpectralTriple,
    omega: &UniversalOneForm,
    psi: &ComplexMatrix,
    psi_p: &ComplexMatrix,
    tol: f64,
) -> Result<PairingReport> {
    check_fermion(t, "psi", psi, tol)?;
    check_fermion(t, "psi'", psi_p, tol)?;
    let dw = fluctuate(t, omega, tol)?;
    let value = pairing_with(t, &dw, psi, psi_p);
    let swapped = pairing_with(t, &dw, psi_p, psi);
    Ok(PairingReport {
        value,
        swapped,
        symmetric_defect: (value - swapped).norm(),
        antisymmetric_defect: (value + swapped).norm(),
    })
}

/// One compared quantity. `tnic = full − inherited`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub term: String,
    pub full: f64,
    pub inherited: f64,
    pub a_side: f64,
    pub tnic: f64,
}

impl TermRecord {
    fn new(term: impl Into<String>, full: f64, inherited: f64, a_side: f64) -> Self {
        Self { term: term.into(), full, inherited, a_side, tnic: full - inherited }
    }

    /// `|inherited − a_side|`.
    pub fn lemma_residual(&self) -> f64 {
        (self.inherited - self.a_side).abs()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionReport {
    pub records: Vec<TermRecord>,
}

impl ActionReport {
    pub fn record(&self, term: &str) -> Option<&TermRecord> {
        self.records.iter().find(|r| r.term == term)
    }

    pub fn max_lemma_residual(&self) -> f64 {
        self.records.iter().map(|r| r.lemma_residual()).fold(0.0, f64::max)
    }
}

/// Everything `compare_actions` needs. Fermions are `(ψ_A, ψ_B)`.
#[derive(Clone, Debug)]
pub struct Comparison<'a> {
    pub lift: &'a DiagramLift,
    pub phi: &'a PhiHMap,
    pub ta: &'a RealSpectralTriple,
    pub tb: &'a RealSpectralTriple,
    pub omega_a: &'a UniversalOneForm,
    pub omega_b: &'a UniversalOneForm,
    pub cfg_a: &'a GaugeConfiguration,
    pub cfg_b: &'a GaugeConfiguration,
    pub fermions: Option<(&'a ComplexMatrix, &'a ComplexMatrix)>,
    pub f: &'a CutoffFunction,
    pub lambda: f64,
}

pub const S_B: &str = "S_b";
pub const S_F_RE: &str = "S_f (re)";
pub const S_F_IM: &str = "S_f (im)";

pub fn compare_actions(c: &Comparison<'_>, tol: f64) -> Result<ActionReport> {
    if !c.lift.normalized || !c.phi.normalized {
        return Err(NcgError::Precondition("compare_actions needs a normalized lift".into()));
    }
    c.f.check()?;
    check_lambda(c.lambda)?;
    c.cfg_a.check(tol)?;
    c.cfg_b.check(tol)?;
    let phi = c.phi;
    let p = &phi.projector;

    let da = fluctuate(c.ta, c.omega_a, tol)?;
    let db = fluctuate(c.tb, c.omega_b, tol)?;
    let mut failures = Vec::new();
    let mut pairs: Vec<(String, &ComplexMatrix, &ComplexMatrix)> = vec![("D_omega".into(), &da, &db)];
    for ((name, a), (_, b)) in c.cfg_a.operators().into_iter().zip(c.cfg_b.operators()) {
        pairs.push((name, a, b));
    }
    for (name, a, b) in &pairs {
        let r = compat_check(a, b, phi, tol * (1.0 + a.norm()))?;
        if !r.weak {
            failures.push(format!("{name} (residual {:.3e})", r.weak_residual));
        }
    }
    if let Some((pa, pb)) = c.fermions {
        check_fermion(c.ta, "psi_A", pa, tol)?;
        check_fermion(c.tb, "psi_B", pb, tol)?;
        let off = (&p.matmul(pb) - &phi.matrix.matmul(pa)).norm();
        if off > tol * (1.0 + pa.norm()) {
            failures.push(format!("psi_B (residual {off:.3e})"));
        }
    }
    if !failures.is_empty() {
        return Err(NcgError::Precondition(format!("not phi-compatible: {}", failures.join(", "))));
    }

    let inherit = |m: &ComplexMatrix| p.matmul(m).matmul(p);
    let mut records = Vec::new();
    let full_b = monomials(c.cfg_b, c.f, c.lambda);
    let inh_b = monomials(&c.cfg_b.map(inherit), c.f, c.lambda);
    let side_a = monomials(c.cfg_a, c.f, c.lambda);
    for ((full, inh), a) in full_b.iter().zip(&inh_b).zip(&side_a) {
        let k = full.coefficient;
        records.push(TermRecord::new(
            full.name.clone(),
            k * trace_product(&full.factors).re,
            k * trace_product(&inh.factors).re,
            k * trace_product(&a.factors).re,
        ));
    }

    let sa = trace_of_function(&da, c.f, c.lambda, tol)?;
    let sb = trace_of_function(&db, c.f, c.lambda, tol)?;
    let pulled = phi.matrix.adjoint().matmul(&db).matmul(&phi.matrix);
    let si = trace_of_function(&pulled.hermitian_part(), c.f, c.lambda, f64::INFINITY)?;
    records.push(TermRecord::new(S_B, sb, si, sa));

    if let Some((pa, pb)) = c.fermions {
        let full = pairing_with(c.tb, &db, pb, pb);
        let ppb = p.matmul(pb);
        let inh = pairing_with(c.tb, &inherit(&db), &ppb, &ppb);
        let a = pairing_with(c.ta, &da, pa, pa);
        records.push(TermRecord::new(S_F_RE, full.re, inh.re, a.re));
        records.push(TermRecord::new(S_F_IM, full.im, inh.im, a.im));
    }
    Ok(ActionReport { records })
}
