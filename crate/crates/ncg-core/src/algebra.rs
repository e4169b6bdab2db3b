//! Finite direct sums of matrix algebras and their bimodule actions.

use serde::{Deserialize, Serialize};

use crate::error::{NcgError, Result};
use crate::linalg::{ComplexMatrix, C64};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct AlgebraProfile {
    dims: Vec<usize>,
}

impl TryFrom<Vec<usize>> for AlgebraProfile {
    type Error = NcgError;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Self::new(dims)
    }
}

impl From<AlgebraProfile> for Vec<usize> {
    fn from(p: AlgebraProfile) -> Self {
        p.dims
    }
}

impl AlgebraProfile {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(NcgError::Profile("at least one summand is required".into()));
        }
        if let Some(k) = dims.iter().position(|&n| n == 0) {
            return Err(NcgError::Profile(format!("summand {} has size 0", k + 1)));
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n(&self, i: usize) -> usize {
        self.dims[i]
    }

    /// Complex dimension of the algebra.
    pub fn dimension(&self) -> usize {
        self.dims.iter().map(|n| n * n).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ElementDoc", into = "ElementDoc")]
pub struct AlgebraElement {
    profile: AlgebraProfile,
    blocks: Vec<ComplexMatrix>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ElementDoc {
    blocks: Vec<ComplexMatrix>,
}

impl TryFrom<ElementDoc> for AlgebraElement {
    type Error = NcgError;

    fn try_from(doc: ElementDoc) -> Result<Self> {
        let mut dims = Vec::with_capacity(doc.blocks.len());
        for (k, b) in doc.blocks.iter().enumerate() {
            if !b.is_square() {
                return Err(NcgError::Shape(format!("block {} is {:?}, not square", k + 1, b.shape())));
            }
            dims.push(b.rows());
        }
        Self::new(AlgebraProfile::new(dims)?, doc.blocks)
    }
}

impl From<AlgebraElement> for ElementDoc {
    fn from(a: AlgebraElement) -> Self {
        Self { blocks: a.blocks }
    }
}

impl AlgebraElement {
    pub fn new(profile: AlgebraProfile, blocks: Vec<ComplexMatrix>) -> Result<Self> {
        if blocks.len() != profile.len() {
            return Err(NcgError::Shape(format!(
                "{} blocks for a profile with {} summands",
                blocks.len(),
                profile.len()
            )));
        }
        for (i, b) in blocks.iter().enumerate() {
            let n = profile.n(i);
            if b.shape() != (n, n) {
                return Err(NcgError::Shape(format!("block {} is {:?}, expected {n}x{n}", i + 1, b.shape())));
            }
        }
        Ok(Self { profile, blocks })
    }

    pub fn identity(profile: &AlgebraProfile) -> Self {
        let blocks = profile.dims().iter().map(|&n| ComplexMatrix::identity(n)).collect();
        Self { profile: profile.clone(), blocks }
    }

    pub fn zero(profile: &AlgebraProfile) -> Self {
        let blocks = profile.dims().iter().map(|&n| ComplexMatrix::zeros(n, n)).collect();
        Self { profile: profile.clone(), blocks }
    }

    /// `ι^i(x)`: `x` in summand `i`, zero elsewhere.
    pub fn embed(profile: &AlgebraProfile, i: usize, x: ComplexMatrix) -> Result<Self> {
        let mut a = Self::zero(profile);
        if i >= profile.len() || x.shape() != (profile.n(i), profile.n(i)) {
            return Err(NcgError::Shape(format!("cannot place {:?} in summand {}", x.shape(), i + 1)));
        }
        a.blocks[i] = x;
        Ok(a)
    }

    /// Matrix units `e^i_{ab}` spanning the algebra.
    pub fn matrix_units(profile: &AlgebraProfile) -> Vec<Self> {
        let mut out = Vec::with_capacity(profile.dimension());
        for (i, &n) in profile.dims().iter().enumerate() {
            for a in 0..n {
                for b in 0..n {
                    let mut x = ComplexMatrix::zeros(n, n);
                    x[(a, b)] = C64::new(1.0, 0.0);
                    out.push(Self::embed(profile, i, x).expect("shape matches"));
                }
            }
        }
        out
    }

    pub fn profile(&self) -> &AlgebraProfile {
        &self.profile
    }

    pub fn blocks(&self) -> &[ComplexMatrix] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &ComplexMatrix {
        &self.blocks[i]
    }

    fn check_profile(&self, other: &Self) -> Result<()> {
        if self.profile != other.profile {
            return Err(NcgError::Shape(format!(
                "profile mismatch {:?} vs {:?}",
                self.profile.dims(),
                other.profile.dims()
            )));
        }
        Ok(())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_profile(other)?;
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| a.matmul(b)).collect();
        Ok(Self { profile: self.profile.clone(), blocks })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_profile(other)?;
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| a + b).collect();
        Ok(Self { profile: self.profile.clone(), blocks })
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { profile: self.profile.clone(), blocks: self.blocks.iter().map(|b| b.scale(z)).collect() }
    }

    pub fn adjoint(&self) -> Self {
        Self { profile: self.profile.clone(), blocks: self.blocks.iter().map(|b| b.adjoint()).collect() }
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.adjoint().matmul(b).dist(&ComplexMatrix::identity(b.rows())))
            .fold(0.0, f64::max)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    pub fn dist(&self, other: &Self) -> f64 {
        if self.profile != other.profile {
            return f64::INFINITY;
        }
        self.blocks.iter().zip(&other.blocks).map(|(a, b)| a.dist(b).powi(2)).sum::<f64>().sqrt()
    }
}

/// One summand `H_v = C^{n_i} ⊗ C^{n_j∘}` of a Hilbert space, stored as an
/// `n_i × n_j` matrix flattened row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutBlock {
    pub id: String,
    pub i: usize,
    pub j: usize,
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<LayoutBlock>", into = "Vec<LayoutBlock>")]
pub struct Layout {
    blocks: Vec<LayoutBlock>,
}

impl TryFrom<Vec<LayoutBlock>> for Layout {
    type Error = NcgError;

    fn try_from(blocks: Vec<LayoutBlock>) -> Result<Self> {
        let mut offset = 0;
        for b in &blocks {
            if b.offset != offset {
                return Err(NcgError::Shape(format!("block `{}` starts at {} not {}", b.id, b.offset, offset)));
            }
            offset += b.len;
        }
        Ok(Self { blocks })
    }
}

impl From<Layout> for Vec<LayoutBlock> {
    fn from(l: Layout) -> Self {
        l.blocks
    }
}

impl Layout {
    /// Builds a contiguous layout from `(id, i, j)` triples.
    pub fn new(profile: &AlgebraProfile, entries: impl IntoIterator<Item = (String, usize, usize)>) -> Self {
        let mut offset = 0;
        let mut blocks = Vec::new();
        for (id, i, j) in entries {
            let len = profile.n(i) * profile.n(j);
            blocks.push(LayoutBlock { id, i, j, offset, len });
            offset += len;
        }
        Self { blocks }
    }

    pub fn blocks(&self) -> &[LayoutBlock] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.offset + b.len)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.id == id)
    }

    pub fn get(&self, id: &str) -> Option<&LayoutBlock> {
        self.blocks.iter().find(|b| b.id == id)
    }

    pub fn check_against(&self, profile: &AlgebraProfile) -> Result<()> {
        for b in &self.blocks {
            if b.i >= profile.len() || b.j >= profile.len() {
                return Err(NcgError::Shape(format!("block `{}` indexes outside the profile", b.id)));
            }
            if b.len != profile.n(b.i) * profile.n(b.j) {
                return Err(NcgError::Shape(format!("block `{}` has length {}", b.id, b.len)));
            }
        }
        Ok(())
    }

    /// `π(a) = ⊕_v a_{i(v)} ⊗ 𝟙`.
    pub fn left_operator(&self, a: &AlgebraElement) -> ComplexMatrix {
        let p = a.profile();
        let blocks: Vec<_> =
            self.blocks.iter().map(|b| a.block(b.i).kron(&ComplexMatrix::identity(p.n(b.j)))).collect();
        ComplexMatrix::direct_sum(&blocks)
    }

    /// `b° = ⊕_v 𝟙 ⊗ b_{j(v)}ᵀ`, i.e. `X ↦ X b_j` on each block.
    pub fn right_operator(&self, b: &AlgebraElement) -> ComplexMatrix {
        let p = b.profile();
        let blocks: Vec<_> =
            self.blocks.iter().map(|v| ComplexMatrix::identity(p.n(v.i)).kron(&b.block(v.j).transpose())).collect();
        ComplexMatrix::direct_sum(&blocks)
    }
}

pub fn right_action(b: &AlgebraElement, psi: &ComplexMatrix, layout: &Layout) -> Result<ComplexMatrix> {
    layout.check_against(b.profile())?;
    if psi.rows() != layout.dim() {
        return Err(NcgError::Shape(format!("vector has {} rows, layout needs {}", psi.rows(), layout.dim())));
    }
    Ok(layout.right_operator(b).matmul(psi))
}

pub fn left_action(a: &AlgebraElement, psi: &ComplexMatrix, layout: &Layout) -> Result<ComplexMatrix> {
    layout.check_against(a.profile())?;
    if psi.rows() != layout.dim() {
        return Err(NcgError::Shape(format!("vector has {} rows, layout needs {}", psi.rows(), layout.dim())));
    }
    Ok(layout.left_operator(a).matmul(psi))
}
