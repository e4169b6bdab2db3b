//! Inclusions of finite-dimensional algebras in Bratteli normal form.

use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraElement, AlgebraProfile};
use crate::error::{NcgError, Result};
use crate::linalg::ComplexMatrix;

/// `φ: A → B` with `φ_k(a) = blockdiag(a_1 ⊗ 𝟙_{α_{k1}}, …, a_r ⊗ 𝟙_{α_{kr}}, 0_{n_{0,k}})`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ArrowDoc", into = "ArrowDoc")]
pub struct BratteliArrow {
    source: AlgebraProfile,
    target: AlgebraProfile,
    alpha: Vec<Vec<usize>>,
    n0: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArrowDoc {
    source: AlgebraProfile,
    target: AlgebraProfile,
    alpha: Vec<Vec<usize>>,
    n0: Vec<usize>,
}

impl TryFrom<ArrowDoc> for BratteliArrow {
    type Error = NcgError;

    fn try_from(d: ArrowDoc) -> Result<Self> {
        Self::new(d.source, d.target, d.alpha, d.n0)
    }
}

impl From<BratteliArrow> for ArrowDoc {
    fn from(a: BratteliArrow) -> Self {
        Self { source: a.source, target: a.target, alpha: a.alpha, n0: a.n0 }
    }
}

/// A composed arrow together with the permutation `P` (per target
/// summand) such that `φ(a) = P·φ₂(φ₁(a))·P†`.
#[derive(Clone, Debug, PartialEq)]
pub struct Composition {
    pub arrow: BratteliArrow,
    pub permutation: AlgebraElement,
}

impl BratteliArrow {
    pub fn new(source: AlgebraProfile, target: AlgebraProfile, alpha: Vec<Vec<usize>>, n0: Vec<usize>) -> Result<Self> {
        let (r, s) = (source.len(), target.len());
        if alpha.len() != s || alpha.iter().any(|row| row.len() != r) {
            return Err(NcgError::InvalidArrow(format!("alpha must be {s}x{r}")));
        }
        if n0.len() != s {
            return Err(NcgError::InvalidArrow(format!("n0 must have {s} entries")));
        }
        for k in 0..s {
            let m: usize = n0[k] + (0..r).map(|i| alpha[k][i] * source.n(i)).sum::<usize>();
            if m != target.n(k) {
                return Err(NcgError::InvalidArrow(format!(
                    "target summand {} has size {} but n0 + sum alpha*n = {m}",
                    k + 1,
                    target.n(k)
                )));
            }
        }
        for i in 0..r {
            if (0..s).all(|k| alpha[k][i] == 0) {
                return Err(NcgError::InvalidArrow(format!("source summand {} is not embedded (not injective)", i + 1)));
            }
        }
        Ok(Self { source, target, alpha, n0 })
    }

    /// Builds the arrow with target sizes `m_k = n_{0,k} + Σ α_{ki} n_i`.
    pub fn from_multiplicities(source: AlgebraProfile, alpha: Vec<Vec<usize>>, n0: Vec<usize>) -> Result<Self> {
        let r = source.len();
        if alpha.len() != n0.len() || alpha.iter().any(|row| row.len() != r) {
            return Err(NcgError::InvalidArrow("alpha and n0 shapes disagree".into()));
        }
        let dims = alpha
            .iter()
            .zip(&n0)
            .map(|(row, z)| z + row.iter().enumerate().map(|(i, a)| a * source.n(i)).sum::<usize>())
            .collect();
        let target = AlgebraProfile::new(dims).map_err(|e| NcgError::InvalidArrow(e.to_string()))?;
        Self::new(source, target, alpha, n0)
    }

    pub fn source(&self) -> &AlgebraProfile {
        &self.source
    }

    pub fn target(&self) -> &AlgebraProfile {
        &self.target
    }

    pub fn alpha(&self, k: usize, i: usize) -> usize {
        self.alpha[k][i]
    }

    pub fn alpha_matrix(&self) -> &[Vec<usize>] {
        &self.alpha
    }

    pub fn n0(&self) -> &[usize] {
        &self.n0
    }

    pub fn is_unital(&self) -> bool {
        self.n0.iter().all(|&z| z == 0)
    }

    /// Row offset of the `i`-band inside target summand `k`.
    pub fn band_offset(&self, k: usize, i: usize) -> usize {
        (0..i).map(|x| self.alpha[k][x] * self.source.n(x)).sum()
    }

    /// Row offset of slot `a` (zero-based) of the `i`-band.
    pub fn slot_offset(&self, k: usize, i: usize, a: usize) -> usize {
        self.band_offset(k, i) + a * self.source.n(i)
    }

    fn check_source(&self, a: &AlgebraElement) -> Result<()> {
        if a.profile() != &self.source {
            return Err(NcgError::Shape(format!(
                "element over {:?}, arrow source is {:?}",
                a.profile().dims(),
                self.source.dims()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, a: &AlgebraElement) -> Result<AlgebraElement> {
        self.check_source(a)?;
        let blocks = (0..self.target.len())
            .map(|k| {
                let mut m = ComplexMatrix::zeros(self.target.n(k), self.target.n(k));
                for i in 0..self.source.len() {
                    for s in 0..self.alpha[k][i] {
                        let o = self.slot_offset(k, i, s);
                        m.set_block(o, o, a.block(i));
                    }
                }
                m
            })
            .collect();
        AlgebraElement::new(self.target.clone(), blocks)
    }

    /// `φ_{k,α}^i(a_i)` for a one-based slot, or `φ_k^i(a_i)` when `slot` is
    /// `None`.
    pub fn component(&self, k: usize, i: usize, slot: Option<usize>, a_i: &ComplexMatrix) -> Result<ComplexMatrix> {
        if k >= self.target.len() || i >= self.source.len() {
            return Err(NcgError::Shape(format!("no component ({}, {})", k + 1, i + 1)));
        }
        let n = self.source.n(i);
        if a_i.shape() != (n, n) {
            return Err(NcgError::Shape(format!("a_i is {:?}, expected {n}x{n}", a_i.shape())));
        }
        let mk = self.target.n(k);
        let mut m = ComplexMatrix::zeros(mk, mk);
        let slots: Vec<usize> = match slot {
            None => (0..self.alpha[k][i]).collect(),
            Some(s) if s >= 1 && s <= self.alpha[k][i] => vec![s - 1],
            Some(s) => {
                return Err(NcgError::InvalidArrow(format!(
                    "slot {s} out of range: alpha({},{}) = {}",
                    k + 1,
                    i + 1,
                    self.alpha[k][i]
                )))
            }
        };
        for s in slots {
            let o = self.slot_offset(k, i, s);
            m.set_block(o, o, a_i);
        }
        Ok(m)
    }

    /// `p_{n₀} = 𝟙_B − φ(𝟙_A)`.
    pub fn unit_defect(&self) -> AlgebraElement {
        let blocks = (0..self.target.len())
            .map(|k| {
                let mk = self.target.n(k);
                let mut m = ComplexMatrix::zeros(mk, mk);
                for x in mk - self.n0[k]..mk {
                    m[(x, x)] = crate::linalg::ONE;
                }
                m
            })
            .collect();
        AlgebraElement::new(self.target.clone(), blocks).expect("shapes")
    }

    /// `p_φ = φ(𝟙_A)`.
    pub fn unit_image(&self) -> AlgebraElement {
        self.apply(&AlgebraElement::identity(&self.source)).expect("source profile")
    }

    /// `u_B = φ(u_A) + p_{n₀}`.
    pub fn lift_unitary(&self, u: &AlgebraElement, tol: f64) -> Result<AlgebraElement> {
        self.check_source(u)?;
        let defect = u.unitarity_defect();
        if defect > tol {
            return Err(NcgError::NotUnitary(defect));
        }
        self.apply(u)?.add(&self.unit_defect())
    }

    /// `self: A → B` followed by `next: B → C`.
    pub fn compose(&self, next: &BratteliArrow) -> Result<Composition> {
        if next.source != self.target {
            return Err(NcgError::InvalidArrow("arrows are not composable".into()));
        }
        let (r, s, q) = (self.source.len(), self.target.len(), next.target.len());
        let mut alpha = vec![vec![0; r]; q];
        for (c, row) in alpha.iter_mut().enumerate() {
            for (i, x) in row.iter_mut().enumerate() {
                *x = (0..s).map(|k| next.alpha[c][k] * self.alpha[k][i]).sum();
            }
        }
        let mut n0 = Vec::with_capacity(q);
        for (c, row) in alpha.iter().enumerate() {
            let used: usize = row.iter().enumerate().map(|(i, a)| a * self.source.n(i)).sum();
            let m = next.target.n(c);
            if used > m {
                return Err(NcgError::InvalidArrow(format!("negative defect in summand {}", c + 1)));
            }
            n0.push(m - used);
        }
        let arrow = BratteliArrow::new(self.source.clone(), next.target.clone(), alpha, n0)?;

        // segments of φ₂∘φ₁ in block c: (source summand or None for zeros, start, len)
        let mut blocks = Vec::with_capacity(q);
        for c in 0..q {
            let mut segs: Vec<(Option<usize>, usize, usize)> = Vec::new();
            for k in 0..s {
                for t in 0..next.alpha[c][k] {
                    let base = next.slot_offset(c, k, t);
                    for i in 0..r {
                        for a in 0..self.alpha[k][i] {
                            segs.push((Some(i), base + self.slot_offset(k, i, a), self.source.n(i)));
                        }
                    }
                    let mk = self.target.n(k);
                    for z in mk - self.n0[k]..mk {
                        segs.push((None, base + z, 1));
                    }
                }
            }
            let mc = next.target.n(c);
            for z in mc - next.n0[c]..mc {
                segs.push((None, z, 1));
            }
            let mut perm = ComplexMatrix::zeros(mc, mc);
            let mut next_slot = vec![0usize; r];
            let mut zero_pos = mc - arrow.n0[c];
            for (src, start, len) in segs {
                let dst = match src {
                    Some(i) => {
                        let o = arrow.slot_offset(c, i, next_slot[i]);
                        next_slot[i] += 1;
                        o
                    }
                    None => {
                        zero_pos += 1;
                        zero_pos - 1
                    }
                };
                for x in 0..len {
                    perm[(dst + x, start + x)] = crate::linalg::ONE;
                }
            }
            blocks.push(perm);
        }
        let permutation = AlgebraElement::new(next.target.clone(), blocks)?;
        Ok(Composition { arrow, permutation })
    }
}

pub fn apply_phi(arrow: &BratteliArrow, a: &AlgebraElement) -> Result<AlgebraElement> {
    arrow.apply(a)
}

pub fn phi_component(
    arrow: &BratteliArrow,
    k: usize,
    i: usize,
    slot: Option<usize>,
    a_i: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    arrow.component(k, i, slot, a_i)
}

pub fn unit_defect(arrow: &BratteliArrow) -> AlgebraElement {
    arrow.unit_defect()
}

pub fn lift_unitary(arrow: &BratteliArrow, u: &AlgebraElement, tol: f64) -> Result<AlgebraElement> {
    arrow.lift_unitary(u, tol)
}
