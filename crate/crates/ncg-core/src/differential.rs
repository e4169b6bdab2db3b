//! Universal forms `Σ a⁰ d_U a¹ ⋯ d_U aⁿ`, their representation `π_D` and
//! fluctuations of the Dirac operator.

use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraElement, AlgebraProfile};
use crate::bratteli::BratteliArrow;
use crate::error::{NcgError, Result};
use crate::krajewski::RealSpectralTriple;
use crate::linalg::{ComplexMatrix, C64};

/// `ω = Σ a⁰ d_U a¹`, kept as a list of terms.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniversalOneForm {
    pub terms: Vec<(AlgebraElement, AlgebraElement)>,
}

/// `Σ a⁰ d_U a¹ ⋯ d_U aⁿ`; every term has `n + 1` factors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NFormDoc", into = "NFormDoc")]
pub struct UniversalNForm {
    degree: usize,
    terms: Vec<Vec<AlgebraElement>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NFormDoc {
    degree: usize,
    terms: Vec<Vec<AlgebraElement>>,
}

impl TryFrom<NFormDoc> for UniversalNForm {
    type Error = NcgError;

    fn try_from(d: NFormDoc) -> Result<Self> {
        Self::new(d.degree, d.terms)
    }
}

impl From<UniversalNForm> for NFormDoc {
    fn from(f: UniversalNForm) -> Self {
        Self { degree: f.degree, terms: f.terms }
    }
}

impl UniversalNForm {
    pub fn new(degree: usize, terms: Vec<Vec<AlgebraElement>>) -> Result<Self> {
        if degree == 0 {
            return Err(NcgError::Shape("forms of degree 0 are algebra elements".into()));
        }
        if let Some(t) = terms.iter().find(|t| t.len() != degree + 1) {
            return Err(NcgError::Shape(format!("degree {degree} term with {} factors", t.len())));
        }
        Ok(Self { degree, terms })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self) -> &[Vec<AlgebraElement>] {
        &self.terms
    }
}

impl From<UniversalOneForm> for UniversalNForm {
    fn from(w: UniversalOneForm) -> Self {
        Self { degree: 1, terms: w.terms.into_iter().map(|(a, b)| vec![a, b]).collect() }
    }
}

impl UniversalOneForm {
    pub fn new(terms: Vec<(AlgebraElement, AlgebraElement)>) -> Self {
        Self { terms }
    }

    /// `a⁰ d_U a¹`.
    pub fn term(a0: AlgebraElement, a1: AlgebraElement) -> Self {
        Self { terms: vec![(a0, a1)] }
    }

    /// `𝟙 d_U a`.
    pub fn exact(a: AlgebraElement) -> Self {
        Self::term(AlgebraElement::identity(a.profile()), a)
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn concat(&self, other: &Self) -> Self {
        Self { terms: self.terms.iter().chain(&other.terms).cloned().collect() }
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { terms: self.terms.iter().map(|(a, b)| (a.scale(z), b.clone())).collect() }
    }

    /// `ω*`, with `(a⁰ d_U a¹)* = a¹* d_U a⁰* − d_U(a¹* a⁰*)`.
    pub fn adjoint(&self) -> Result<Self> {
        let mut terms = Vec::with_capacity(2 * self.terms.len());
        for (a0, a1) in &self.terms {
            let (s0, s1) = (a0.adjoint(), a1.adjoint());
            terms.push((s1.clone(), s0.clone()));
            terms.push((AlgebraElement::identity(a0.profile()).scale(C64::new(-1.0, 0.0)), s1.mul(&s0)?));
        }
        Ok(Self { terms })
    }

    /// `(ω + ω*)/2`, whose representation is the Hermitian part.
    pub fn hermitian_part(&self) -> Result<Self> {
        Ok(self.concat(&self.adjoint()?).scale(C64::new(0.5, 0.0)))
    }

    fn check_profile(&self, p: &AlgebraProfile) -> Result<()> {
        for (a0, a1) in &self.terms {
            if a0.profile() != p || a1.profile() != p {
                return Err(NcgError::Shape(format!(
                    "form term over {:?}, triple algebra is {:?}",
                    a0.profile().dims(),
                    p.dims()
                )));
            }
        }
        Ok(())
    }
}

/// `Σ π(a⁰)[D,π(a¹)]`.
pub fn represent(omega: &UniversalOneForm, t: &RealSpectralTriple) -> Result<ComplexMatrix> {
    omega.check_profile(&t.profile)?;
    let n = t.dim();
    let mut out = ComplexMatrix::zeros(n, n);
    for (a0, a1) in &omega.terms {
        out += &t.pi(a0).matmul(&t.d.commutator(&t.pi(a1)));
    }
    Ok(out)
}

/// `Σ π(a⁰)[D,π(a¹)]⋯[D,π(aⁿ)]`.
pub fn represent_n(omega: &UniversalNForm, t: &RealSpectralTriple) -> Result<ComplexMatrix> {
    let n = t.dim();
    let mut out = ComplexMatrix::zeros(n, n);
    for term in &omega.terms {
        if let Some(a) = term.iter().find(|a| a.profile() != &t.profile) {
            return Err(NcgError::Shape(format!("form factor over {:?}, triple algebra is {:?}", a.profile().dims(), t.profile.dims())));
        }
        let mut acc = t.pi(&term[0]);
        for a in &term[1..] {
            acc = acc.matmul(&t.d.commutator(&t.pi(a)));
        }
        out += &acc;
    }
    Ok(out)
}

/// `D + X + ε′ J X J⁻¹` for a given operator `X`, without checks.
pub fn fluctuated_operator(t: &RealSpectralTriple, x: &ComplexMatrix) -> ComplexMatrix {
    let jx = t.j_conjugate(x).scale_re(t.ko.eps_p() as f64);
    &(&t.d + x) + &jx
}

/// `D_ω`. Rejects forms whose representation is not Hermitian within `tol`.
pub fn fluctuate(t: &RealSpectralTriple, omega: &UniversalOneForm, tol: f64) -> Result<ComplexMatrix> {
    let x = represent(omega, t)?;
    let defect = x.hermiticity_defect();
    if defect > tol {
        return Err(NcgError::Precondition(format!("pi_D(omega) is not Hermitian (defect {defect:.3e})")));
    }
    Ok(fluctuated_operator(t, &x))
}

/// `ω^u = u ω u* + u d_U u*`.
pub fn gauge_transform(omega: &UniversalOneForm, u: &AlgebraElement, tol: f64) -> Result<UniversalOneForm> {
    let defect = u.unitarity_defect();
    if defect > tol {
        return Err(NcgError::NotUnitary(defect));
    }
    let us = u.adjoint();
    let mut terms = Vec::with_capacity(2 * omega.terms.len() + 1);
    for (a0, a1) in &omega.terms {
        let ua0 = u.mul(a0)?;
        terms.push((ua0.clone(), a1.mul(&us)?));
        terms.push((ua0.mul(a1)?.scale(C64::new(-1.0, 0.0)), us.clone()));
    }
    terms.push((u.clone(), us));
    Ok(UniversalOneForm { terms })
}

/// `U = π(u) J π(u) J⁻¹`.
pub fn gauge_unitary(t: &RealSpectralTriple, u: &AlgebraElement) -> ComplexMatrix {
    let pu = t.pi(u);
    pu.matmul(&t.j_conjugate(&pu))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeCovarianceReport {
    /// `‖π_D(ω^u) − (π(u) π_D(ω) π(u)* + π(u)[D,π(u)*])‖`.
    pub form_residual: f64,
    /// `‖D_{ω^u} − U D_ω U*‖`.
    pub dirac_residual: f64,
    pub passed: bool,
}

pub fn gauge_covariance_check(
    t: &RealSpectralTriple,
    omega: &UniversalOneForm,
    u: &AlgebraElement,
    tol: f64,
) -> Result<GaugeCovarianceReport> {
    let wu = gauge_transform(omega, u, tol.max(1e-9))?;
    let x = represent(omega, t)?;
    let xu = represent(&wu, t)?;
    let pu = t.pi(u);
    let expected = &pu.matmul(&x).matmul(&pu.adjoint()) + &pu.matmul(&t.d.commutator(&pu.adjoint()));
    let form_residual = xu.dist(&expected);
    let big_u = gauge_unitary(t, u);
    let conj = big_u.matmul(&fluctuated_operator(t, &x)).matmul(&big_u.adjoint());
    let dirac_residual = fluctuated_operator(t, &xu).dist(&conj);
    Ok(GaugeCovarianceReport { form_residual, dirac_residual, passed: form_residual <= tol && dirac_residual <= tol })
}

/// `φ(a⁰ d_U a¹) = φ(a⁰) d_U φ(a¹) − φ(a⁰a¹) d_U p_φ`, `p_φ = φ(𝟙)`.
/// Unital arrows skip the correction term, which represents zero.
pub fn pushforward(omega: &UniversalOneForm, arrow: &BratteliArrow) -> Result<UniversalOneForm> {
    omega.check_profile(arrow.source())?;
    let p = arrow.unit_image();
    let mut terms = Vec::new();
    for (a0, a1) in &omega.terms {
        terms.push((arrow.apply(a0)?, arrow.apply(a1)?));
        if !arrow.is_unital() {
            terms.push((arrow.apply(&a0.mul(a1)?)?.scale(C64::new(-1.0, 0.0)), p.clone()));
        }
    }
    Ok(UniversalOneForm { terms })
}
