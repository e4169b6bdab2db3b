//! Lifts of Bratteli arrows to maps `φ_H` between realized Krajewski
//! diagrams, built from the `u(v,w)` matrices, and the φ-compatibility
//! checks.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraElement, Layout};
use crate::bratteli::BratteliArrow;
use crate::error::{NcgError, Result};
use crate::krajewski::{detect_ko, epsilon_factor, Edge, EdgeKind, KoSignature, KrajewskiDiagram, RealSpectralTriple, Vertex};
use crate::linalg::{ComplexMatrix, C64, ZERO};

/// Eigenvalue cutoff for the range projector of a non-normalized `φ_H`.
pub const PINV_CUTOFF: f64 = 1e-12;

/// A lift of `arrow` to a map from `source` to `target`. Absent `u` entries
/// are zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LiftDoc", into = "LiftDoc")]
pub struct DiagramLift {
    pub arrow: BratteliArrow,
    pub source: KrajewskiDiagram,
    pub target: KrajewskiDiagram,
    pub u: BTreeMap<(String, String), ComplexMatrix>,
    pub normalized: bool,
    pub kappa: Option<BTreeMap<String, f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LiftDoc {
    arrow: BratteliArrow,
    source: KrajewskiDiagram,
    target: KrajewskiDiagram,
    #[serde(default)]
    u: BTreeMap<String, ComplexMatrix>,
    #[serde(default)]
    normalized: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kappa: Option<BTreeMap<String, f64>>,
}

impl TryFrom<LiftDoc> for DiagramLift {
    type Error = NcgError;

    fn try_from(doc: LiftDoc) -> Result<Self> {
        let mut lift = DiagramLift::new(doc.arrow, doc.source, doc.target)?;
        for (key, m) in doc.u {
            let (v, w) = parse_key(&key)?;
            lift.set(&v, &w, m)?;
        }
        lift.normalized = doc.normalized;
        lift.kappa = doc.kappa;
        Ok(lift)
    }
}

impl From<DiagramLift> for LiftDoc {
    fn from(l: DiagramLift) -> Self {
        Self {
            arrow: l.arrow,
            source: l.source,
            target: l.target,
            u: l.u.into_iter().map(|((v, w), m)| (format_key(&v, &w), m)).collect(),
            normalized: l.normalized,
            kappa: l.kappa,
        }
    }
}

/// `"v->w"`.
pub fn format_key(v: &str, w: &str) -> String {
    format!("{v}->{w}")
}

pub fn parse_key(key: &str) -> Result<(String, String)> {
    match key.split_once("->") {
        Some((v, w)) if !v.is_empty() && !w.is_empty() => Ok((v.to_string(), w.to_string())),
        _ => Err(NcgError::InvalidLift(format!("u key `{key}` is not of the form `v->w`"))),
    }
}

impl DiagramLift {
    pub fn new(arrow: BratteliArrow, source: KrajewskiDiagram, target: KrajewskiDiagram) -> Result<Self> {
        if arrow.source() != &source.profile {
            return Err(NcgError::InvalidLift(format!(
                "arrow source {:?} differs from the source diagram's algebra {:?}",
                arrow.source().dims(),
                source.profile.dims()
            )));
        }
        if arrow.target() != &target.profile {
            return Err(NcgError::InvalidLift(format!(
                "arrow target {:?} differs from the target diagram's algebra {:?}",
                arrow.target().dims(),
                target.profile.dims()
            )));
        }
        Ok(Self { arrow, source, target, u: BTreeMap::new(), normalized: false, kappa: None })
    }

    fn vertices(&self, v: &str, w: &str) -> Result<(&Vertex, &Vertex)> {
        let sv = self.source.vertex(v).ok_or_else(|| NcgError::Reference(format!("no source vertex `{v}`")))?;
        let tw = self.target.vertex(w).ok_or_else(|| NcgError::Reference(format!("no target vertex `{w}`")))?;
        Ok((sv, tw))
    }

    /// `α_{k(w),i(v)} × α_{ℓ(w),j(v)}`.
    pub fn u_shape(&self, v: &Vertex, w: &Vertex) -> (usize, usize) {
        (self.arrow.alpha(w.i, v.i), self.arrow.alpha(w.j, v.j))
    }

    pub fn set(&mut self, v: &str, w: &str, m: ComplexMatrix) -> Result<()> {
        let (sv, tw) = self.vertices(v, w)?;
        let shape = self.u_shape(sv, tw);
        if shape.0 == 0 || shape.1 == 0 {
            return Err(NcgError::InvalidLift(format!(
                "u({v},{w}) is not allowed: the arrow multiplicities are {shape:?}"
            )));
        }
        if m.shape() != shape {
            return Err(NcgError::Shape(format!("u({v},{w}) is {:?}, expected {shape:?}", m.shape())));
        }
        self.u.insert((v.to_string(), w.to_string()), m);
        Ok(())
    }

    pub fn get(&self, v: &str, w: &str) -> Option<&ComplexMatrix> {
        self.u.get(&(v.to_string(), w.to_string()))
    }

    /// `u(v,w)`, zero when absent. `None` when the pair admits no entry.
    pub fn get_or_zero(&self, v: &Vertex, w: &Vertex) -> Option<ComplexMatrix> {
        let (r, c) = self.u_shape(v, w);
        if r == 0 || c == 0 {
            return None;
        }
        Some(self.get(&v.id, &w.id).cloned().unwrap_or_else(|| ComplexMatrix::zeros(r, c)))
    }

    pub fn check(&self) -> Result<()> {
        if self.arrow.source() != &self.source.profile || self.arrow.target() != &self.target.profile {
            return Err(NcgError::InvalidLift("arrow does not connect the two diagrams".into()));
        }
        for ((v, w), m) in &self.u {
            let (sv, tw) = self.vertices(v, w)?;
            let shape = self.u_shape(sv, tw);
            if shape.0 == 0 || shape.1 == 0 || m.shape() != shape {
                return Err(NcgError::Shape(format!("u({v},{w}) is {:?}, expected {shape:?}", m.shape())));
            }
        }
        Ok(())
    }
}

/// The dense map `φ_H : H_A → H_B` and the projector onto its range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiHMap {
    pub matrix: ComplexMatrix,
    pub projector: ComplexMatrix,
    pub source_layout: Layout,
    pub target_layout: Layout,
    pub normalized: bool,
}

impl PhiHMap {
    /// `‖φ_H†φ_H − 𝟙‖`.
    pub fn isometry_defect(&self) -> f64 {
        let n = self.matrix.cols();
        self.matrix.adjoint().matmul(&self.matrix).dist(&ComplexMatrix::identity(n))
    }

    pub fn complement(&self) -> ComplexMatrix {
        &ComplexMatrix::identity(self.matrix.rows()) - &self.projector
    }
}

pub fn build_phi_h(lift: &DiagramLift) -> Result<PhiHMap> {
    lift.check()?;
    let la = lift.source.layout();
    let lb = lift.target.layout();
    let arrow = &lift.arrow;
    let mut phi = ComplexMatrix::zeros(lb.dim(), la.dim());
    for ((vid, wid), u) in &lift.u {
        let (v, w) = lift.vertices(vid, wid)?;
        let bv = la.get(vid).expect("layout covers vertices");
        let bw = lb.get(wid).expect("layout covers vertices");
        let (ni, nj) = (lift.source.profile.n(v.i), lift.source.profile.n(v.j));
        let ml = lift.target.profile.n(w.j);
        for al in 0..u.rows() {
            for be in 0..u.cols() {
                let z = u[(al, be)];
                if z == ZERO {
                    continue;
                }
                let r0 = arrow.slot_offset(w.i, v.i, al);
                let c0 = arrow.slot_offset(w.j, v.j, be);
                for a in 0..ni {
                    for b in 0..nj {
                        phi[(bw.offset + (r0 + a) * ml + c0 + b, bv.offset + a * nj + b)] += z;
                    }
                }
            }
        }
    }
    let projector = if lift.normalized {
        phi.matmul(&phi.adjoint())
    } else {
        let gram = phi.adjoint().matmul(&phi);
        phi.matmul(&gram.psd_pinv(PINV_CUTOFF)?).matmul(&phi.adjoint())
    };
    Ok(PhiHMap { matrix: phi, projector, source_layout: la, target_layout: lb, normalized: lift.normalized })
}

/// Largest violation of `φ_H π_A(a) = π_B(φ(a)) φ_H` and of the matching
/// right-action law over matrix units.
pub fn bimodule_residual(lift: &DiagramLift, phi: &PhiHMap) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for a in AlgebraElement::matrix_units(&lift.source.profile) {
        let fa = lift.arrow.apply(&a)?;
        let left = phi.matrix.matmul(&phi.source_layout.left_operator(&a));
        let left_b = phi.target_layout.left_operator(&fa).matmul(&phi.matrix);
        let right = phi.matrix.matmul(&phi.source_layout.right_operator(&a));
        let right_b = phi.target_layout.right_operator(&fa).matmul(&phi.matrix);
        worst = worst.max(left.dist(&left_b)).max(right.dist(&right_b));
    }
    Ok(worst)
}

/// `σ̂` on one `(i,j)` fiber of the source diagram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaFiber {
    pub i: usize,
    pub j: usize,
    pub vertices: Vec<String>,
    pub matrix: ComplexMatrix,
    pub eigenvalues: Vec<f64>,
}

impl SigmaFiber {
    pub fn off_diagonal(&self) -> f64 {
        let n = self.matrix.rows();
        let mut s = 0.0;
        for r in 0..n {
            for c in 0..n {
                if r != c {
                    s += self.matrix[(r, c)].norm_sqr();
                }
            }
        }
        s.sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaData {
    pub fibers: Vec<SigmaFiber>,
    /// Vertices `v` with `u(v,·) = 0`.
    pub non_injective: Vec<String>,
    /// Fibers whose `σ̂` has an eigenvalue at or below the tolerance.
    pub singular_fibers: Vec<(usize, usize)>,
}

impl SigmaData {
    pub fn is_diagonal(&self, tol: f64) -> bool {
        self.fibers.iter().all(|f| f.off_diagonal() <= tol)
    }

    pub fn entry(&self, v1: &str, v2: &str) -> Option<C64> {
        self.fibers.iter().find_map(|f| {
            let p = f.vertices.iter().position(|x| x == v1)?;
            let q = f.vertices.iter().position(|x| x == v2)?;
            Some(f.matrix[(p, q)])
        })
    }

    pub fn kappa(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for f in &self.fibers {
            for (p, v) in f.vertices.iter().enumerate() {
                out.insert(v.clone(), f.matrix[(p, p)].re);
            }
        }
        out
    }
}

/// Source vertex indices grouped by `(i,j)` fiber, in realization order.
fn fibers(diag: &KrajewskiDiagram) -> BTreeMap<(usize, usize), Vec<usize>> {
    let mut out: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for k in diag.realization_order() {
        let v = &diag.vertices[k];
        out.entry((v.i, v.j)).or_default().push(k);
    }
    out
}

fn sigma_entry(lift: &DiagramLift, v1: &Vertex, v2: &Vertex) -> C64 {
    let mut s = ZERO;
    for w in &lift.target.vertices {
        if let (Some(a), Some(b)) = (lift.get(&v1.id, &w.id), lift.get(&v2.id, &w.id)) {
            s += a.inner(b);
        }
    }
    s
}

fn sigma_of(lift: &DiagramLift, idx: &[usize]) -> ComplexMatrix {
    let vs = &lift.source.vertices;
    ComplexMatrix::from_fn(idx.len(), idx.len(), |p, q| sigma_entry(lift, &vs[idx[p]], &vs[idx[q]]))
}

pub fn sigma(lift: &DiagramLift) -> SigmaData {
    sigma_with_tol(lift, 1e-12)
}

pub fn sigma_with_tol(lift: &DiagramLift, tol: f64) -> SigmaData {
    let mut out = SigmaData { fibers: Vec::new(), non_injective: Vec::new(), singular_fibers: Vec::new() };
    for ((i, j), idx) in fibers(&lift.source) {
        let matrix = sigma_of(lift, &idx);
        let mut eigenvalues = matrix.eigvalsh().expect("square");
        eigenvalues.reverse();
        for (p, &k) in idx.iter().enumerate() {
            if matrix[(p, p)].re <= tol {
                out.non_injective.push(lift.source.vertices[k].id.clone());
            }
        }
        if eigenvalues.last().is_some_and(|&l| l <= tol) {
            out.singular_fibers.push((i, j));
        }
        let vertices = idx.iter().map(|&k| lift.source.vertices[k].id.clone()).collect();
        out.fibers.push(SigmaFiber { i, j, vertices, matrix, eigenvalues });
    }
    out
}

/// Residual of `u(jim v, jim w) = (ε_A(v)/ε_B(w)) u(v,w)†` for one pair.
fn relation_residual(lift: &DiagramLift, v: &Vertex, w: &Vertex) -> Result<f64> {
    let jv = lift.source.vertex(&lift.source.jim[&v.id]).expect("validated jim");
    let jw = lift.target.vertex(&lift.target.jim[&w.id]).expect("validated jim");
    let (Some(u), Some(ju)) = (lift.get_or_zero(v, w), lift.get_or_zero(jv, jw)) else {
        return Ok(0.0);
    };
    let f = (epsilon_factor(v, lift.source.ko)? * epsilon_factor(w, lift.target.ko)?) as f64;
    Ok(ju.dist(&u.adjoint().scale_re(f)))
}

/// Pairs `(v,w)` whose real-structure relation fails, with residuals.
pub fn relation_witnesses(lift: &DiagramLift, tol: f64) -> Result<(f64, Vec<String>)> {
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for v in &lift.source.vertices {
        for w in &lift.target.vertices {
            let r = relation_residual(lift, v, w)?;
            worst = worst.max(r);
            if r > tol {
                bad.push(format!("{} residual {r:.3e}", format_key(&v.id, &w.id)));
            }
        }
    }
    Ok((worst, bad))
}

/// Nonzero `u(v,w)` with `s(v) ≠ s(w)`.
pub fn grading_witnesses(lift: &DiagramLift, tol: f64) -> Vec<String> {
    let mut bad = Vec::new();
    for ((v, w), m) in &lift.u {
        let (sv, tw) = (lift.source.vertex(v), lift.target.vertex(w));
        if let (Some(sv), Some(tw)) = (sv, tw) {
            if let (Some(a), Some(b)) = (sv.s, tw.s) {
                if a != b && m.norm() > tol {
                    bad.push(format_key(v, w));
                }
            }
        }
    }
    bad
}

/// Rotates the source fiber bases so that every `σ̂_{ij}` is diagonal.
pub fn diagonalize_bases(lift: &DiagramLift, tol: f64) -> Result<DiagramLift> {
    lift.check()?;
    let (_, bad) = relation_witnesses(lift, tol)?;
    if !bad.is_empty() {
        return Err(NcgError::Precondition(format!("real structure relation fails: {}", bad.join("; "))));
    }
    let bad = grading_witnesses(lift, tol);
    if !bad.is_empty() {
        return Err(NcgError::Precondition(format!("u couples opposite gradings: {}", bad.join(", "))));
    }
    let sig = sigma(lift);
    if sig.is_diagonal(tol) {
        let mut out = lift.clone();
        out.kappa = Some(sig.kappa());
        return Ok(out);
    }
    let ko = lift.source.ko;
    if matches!(ko.d(), 3..=5) {
        return Err(NcgError::InvalidLift(format!(
            "unsupported KO dimension for automatic diagonalization (d = {})",
            ko.d()
        )));
    }

    let src = &lift.source;
    let nv = src.vertices.len();
    let idx: BTreeMap<&str, usize> = src.vertices.iter().enumerate().map(|(k, v)| (v.id.as_str(), k)).collect();
    let jim_of = |k: usize| idx[src.jim[&src.vertices[k].id].as_str()];
    // coef[(old, new)]: new vertex = Σ_old coef · old
    let mut coef = ComplexMatrix::identity(nv);
    let mut vertices = src.vertices.clone();

    for ((i, j), members) in fibers(src) {
        if i > j {
            continue;
        }
        let diagonal = i == j;
        let real = diagonal && ko.diagonal_self_paired();
        let mut groups: BTreeMap<i8, Vec<usize>> = BTreeMap::new();
        for &k in &members {
            let s = src.vertices[k].s.unwrap_or(0);
            if diagonal && !ko.diagonal_self_paired() && s < 0 {
                continue;
            }
            groups.entry(s).or_default().push(k);
        }
        for primary in groups.values() {
            let s = sigma_of(lift, primary);
            let off = (0..s.rows())
                .flat_map(|p| (0..s.rows()).map(move |q| (p, q)))
                .filter(|(p, q)| p != q)
                .map(|(p, q)| s[(p, q)].norm())
                .fold(0.0, f64::max);
            if off <= tol {
                continue;
            }
            let v = if real { real_eigenbasis(&s, tol)? } else { complex_eigenbasis(&s)? };
            let chis: BTreeSet<Option<u8>> = primary.iter().map(|&k| src.vertices[k].chi).collect();
            let new_chi = if diagonal && !real {
                Some(if chis.len() == 1 { chis.into_iter().next().flatten().unwrap_or(0) } else { 0 })
            } else {
                None
            };
            for &kq in primary {
                if let Some(c) = new_chi {
                    vertices[kq].chi = Some(c);
                    vertices[jim_of(kq)].chi = Some(1 - c);
                }
            }
            for (q, &kq) in primary.iter().enumerate() {
                let eq = epsilon_factor(&vertices[kq], ko)? as f64;
                for (p, &kp) in primary.iter().enumerate() {
                    coef[(kp, kq)] = v[(p, q)];
                    if !real {
                        let ep = epsilon_factor(&src.vertices[kp], ko)? as f64;
                        coef[(jim_of(kp), jim_of(kq))] = v[(p, q)].conj() * (ep * eq);
                    }
                }
            }
        }
    }

    // Hilbert space basis change
    let t = crate::krajewski::realize_with_tol(src, tol.max(1e-9))?;
    let layout = src.layout();
    let n = layout.dim();
    let mut w = ComplexMatrix::zeros(n, n);
    for a in 0..nv {
        for b in 0..nv {
            let z = coef[(a, b)];
            if z != ZERO {
                let (ba, bb) = (layout.get(&src.vertices[a].id).unwrap(), layout.get(&src.vertices[b].id).unwrap());
                w.set_block(ba.offset, bb.offset, &ComplexMatrix::scalar(ba.len, z));
            }
        }
    }
    let d = w.adjoint().matmul(&t.d).matmul(&w);
    let scale = 1.0 + d.norm();
    let mut edges = Vec::new();
    for va in &vertices {
        let ba = layout.get(&va.id).unwrap();
        for vb in &vertices {
            let bb = layout.get(&vb.id).unwrap();
            let op = d.block(bb.offset, ba.offset, bb.len, ba.len);
            if op.norm() <= 1e-13 * scale {
                continue;
            }
            let kind = match (va.i == vb.i, va.j == vb.j) {
                (true, true) => EdgeKind::General,
                (true, false) => EdgeKind::Right,
                (false, true) => EdgeKind::Left,
                (false, false) => {
                    return Err(NcgError::InvalidLift(format!(
                        "rotated D couples `{}` and `{}` across unrelated fibers",
                        va.id, vb.id
                    )))
                }
            };
            edges.push(Edge { src: va.id.clone(), dst: vb.id.clone(), kind, op });
        }
    }
    let source = KrajewskiDiagram { profile: src.profile.clone(), ko, vertices, jim: src.jim.clone(), edges };
    source.validate_with_tol(tol.max(1e-9)).ok().then_some(()).ok_or_else(|| {
        NcgError::InvalidLift(format!("rotated source diagram is invalid: {:?}", source.validate_with_tol(tol.max(1e-9)).failed()))
    })?;

    let mut out = DiagramLift::new(lift.arrow.clone(), source, lift.target.clone())?;
    let uscale = lift.u.values().map(|m| m.norm()).fold(0.0, f64::max);
    for (b, vb) in out.source.vertices.clone().iter().enumerate() {
        for wv in &lift.target.vertices {
            let Some(mut acc) = lift.get_or_zero(&src.vertices[b], wv) else { continue };
            acc = acc.scale_re(0.0);
            for a in 0..nv {
                let z = coef[(a, b)];
                if z == ZERO {
                    continue;
                }
                if let Some(m) = lift.get(&src.vertices[a].id, &wv.id) {
                    acc += &m.scale(z);
                }
            }
            if acc.norm() > 1e-14 * (1.0 + uscale) {
                out.set(&vb.id, &wv.id, acc)?;
            }
        }
    }
    out.kappa = Some(sigma(&out).kappa());
    Ok(out)
}

/// First significant coordinate of each column made real positive.
fn fix_columns(v: &mut ComplexMatrix) {
    for c in 0..v.cols() {
        let col = v.col(c);
        let big = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if let Some(z) = col.iter().find(|z| z.norm() > 1e-8 * big.max(1e-300)) {
            let ph = z.conj() / z.norm();
            for r in 0..v.rows() {
                v[(r, c)] *= ph;
            }
        }
    }
}

/// Eigenvectors of a Hermitian matrix, eigenvalues descending.
fn complex_eigenbasis(s: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (_, vecs) = s.eigh()?;
    let n = s.rows();
    let mut v = ComplexMatrix::from_fn(n, n, |r, c| vecs[(r, n - 1 - c)]);
    fix_columns(&mut v);
    Ok(v)
}

/// Orthogonal eigenvectors of `(σ + σᵀ)/2`, eigenvalues descending.
fn real_eigenbasis(s: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix> {
    let anti = s.dist(&s.transpose()) / 2.0;
    if anti > tol {
        return Err(NcgError::InvalidLift(format!("sigma on a self-paired fiber is not real symmetric ({anti:.3e})")));
    }
    let n = s.rows();
    let sym = DMatrix::from_fn(n, n, |r, c| (s[(r, c)].re + s[(c, r)].re) / 2.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut v = ComplexMatrix::from_fn(n, n, |r, c| C64::new(eig.eigenvectors[(r, order[c])], 0.0));
    fix_columns(&mut v);
    Ok(v)
}

/// Rescales `u(v,·)` by `κ_v^{-1/2}` so that `φ_H` becomes an isometry.
pub fn normalize(lift: &DiagramLift, tol: f64) -> Result<DiagramLift> {
    let sig = sigma(lift);
    if !sig.is_diagonal(tol) {
        return Err(NcgError::Precondition("sigma is not diagonal; rotate the source bases first".into()));
    }
    let kappa = sig.kappa();
    if let Some((v, k)) = kappa.iter().find(|(_, &k)| k <= tol) {
        return Err(NcgError::InvalidLift(format!("phi_H is not one-to-one: kappa({v}) = {k:.3e}")));
    }
    let mut out = lift.clone();
    for ((v, _), m) in out.u.iter_mut() {
        *m = m.scale_re(1.0 / kappa[v].sqrt());
    }
    out.normalized = true;
    out.kappa = Some(match &lift.kappa {
        Some(prev) if lift.normalized => prev.clone(),
        _ => kappa,
    });
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompatReport {
    /// `max_k ‖P B φ_H e_k − φ_H A e_k‖`.
    pub weak_residual: f64,
    /// `‖(𝟙−P) B φ_H‖`.
    pub leak: f64,
    /// `‖B_φ^⊥‖ = ‖P B (𝟙−P)‖`.
    pub phi_perp: f64,
    /// `‖B_⊥^φ‖ = ‖(𝟙−P) B P‖`.
    pub perp_phi: f64,
    pub weak: bool,
    pub strong: bool,
}

fn max_column_norm(m: &ComplexMatrix) -> f64 {
    (0..m.cols()).map(|c| crate::linalg::vec_norm(&m.col(c))).fold(0.0, f64::max)
}

/// `b_phi` is `B φ_H`, `phi_a` is `φ_H A`; `right_p` is the projector seen
/// by `B` on its input side.
fn report(b: &ComplexMatrix, b_phi: &ComplexMatrix, phi_a: &ComplexMatrix, p: &ComplexMatrix, right_p: &ComplexMatrix, tol: f64) -> CompatReport {
    let q = &ComplexMatrix::identity(p.rows()) - p;
    let right_q = &ComplexMatrix::identity(p.rows()) - right_p;
    let weak_residual = max_column_norm(&(&p.matmul(b_phi) - phi_a));
    let leak = q.matmul(b_phi).norm();
    let phi_perp = p.matmul(b).matmul(&right_q).norm();
    let perp_phi = q.matmul(b).matmul(right_p).norm();
    let weak = weak_residual <= tol;
    CompatReport { weak_residual, leak, phi_perp, perp_phi, weak, strong: weak && leak <= tol }
}

pub fn compat_check(a: &ComplexMatrix, b: &ComplexMatrix, phi: &PhiHMap, tol: f64) -> Result<CompatReport> {
    let (nb, na) = phi.matrix.shape();
    if a.shape() != (na, na) || b.shape() != (nb, nb) {
        return Err(NcgError::Shape(format!(
            "operators are {:?} and {:?}, phi_H is {:?}",
            a.shape(),
            b.shape(),
            phi.matrix.shape()
        )));
    }
    let b_phi = b.matmul(&phi.matrix);
    let phi_a = phi.matrix.matmul(a);
    Ok(report(b, &b_phi, &phi_a, &phi.projector, &phi.projector, tol))
}

/// Compatibility of the antilinear `J_A = K_A∘conj`, `J_B = K_B∘conj`.
pub fn j_compat_check(ka: &ComplexMatrix, kb: &ComplexMatrix, phi: &PhiHMap, tol: f64) -> Result<CompatReport> {
    let (nb, na) = phi.matrix.shape();
    if ka.shape() != (na, na) || kb.shape() != (nb, nb) {
        return Err(NcgError::Shape("K shapes do not match phi_H".into()));
    }
    let b_phi = kb.matmul(&phi.matrix.conj());
    let phi_a = phi.matrix.matmul(ka);
    Ok(report(kb, &b_phi, &phi_a, &phi.projector, &phi.projector.conj(), tol))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealGradingReport {
    pub relation_residual: f64,
    pub relation_witnesses: Vec<String>,
    pub grading_witnesses: Vec<String>,
    pub source_ko: KoSignature,
    pub target_ko: KoSignature,
    pub detected_source: BTreeSet<u8>,
    pub detected_target: BTreeSet<u8>,
    pub ko_equal: bool,
    pub j: CompatReport,
    pub gamma: Option<CompatReport>,
}

impl RealGradingReport {
    pub fn ok(&self) -> bool {
        self.relation_witnesses.is_empty()
            && self.grading_witnesses.is_empty()
            && self.ko_equal
            && self.j.strong
            && self.gamma.as_ref().is_none_or(|g| g.strong)
    }
}

pub fn real_grading_check(
    lift: &DiagramLift,
    ta: &RealSpectralTriple,
    tb: &RealSpectralTriple,
    tol: f64,
) -> Result<RealGradingReport> {
    let phi = build_phi_h(lift)?;
    let (relation_residual, relation_witnesses) = relation_witnesses(lift, tol)?;
    let grading_witnesses = grading_witnesses(lift, tol);
    let detected_source = detect_ko(ta, tol);
    let detected_target = detect_ko(tb, tol);
    let ko_equal = ta.ko == tb.ko && !detected_source.is_disjoint(&detected_target);
    let j = j_compat_check(&ta.k, &tb.k, &phi, tol)?;
    let gamma = match (&ta.gamma, &tb.gamma) {
        (Some(ga), Some(gb)) => Some(compat_check(ga, gb, &phi, tol)?),
        _ => None,
    };
    Ok(RealGradingReport {
        relation_residual,
        relation_witnesses,
        grading_witnesses,
        source_ko: ta.ko,
        target_ko: tb.ko,
        detected_source,
        detected_target,
        ko_equal,
        j,
        gamma,
    })
}

/// `B` split along `P = φ_H φ_H†`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InheritedSplit {
    /// `φ_H† B φ_H`.
    pub pullback: ComplexMatrix,
    /// `‖P B (𝟙−P)‖`.
    pub phi_perp: f64,
    /// `‖(𝟙−P) B P‖`.
    pub perp_phi: f64,
    /// `‖(𝟙−P) B (𝟙−P)‖`.
    pub perp_perp: f64,
}

impl InheritedSplit {
    pub fn tnic_norms(&self) -> [f64; 3] {
        [self.phi_perp, self.perp_phi, self.perp_perp]
    }
}

pub fn inherited_split(b: &ComplexMatrix, phi: &PhiHMap) -> Result<InheritedSplit> {
    if !phi.normalized {
        return Err(NcgError::Precondition("inherited split needs a normalized phi_H".into()));
    }
    let defect = phi.isometry_defect();
    if defect > 1e-8 {
        return Err(NcgError::Precondition(format!("phi_H is flagged normalized but not an isometry ({defect:.3e})")));
    }
    let nb = phi.matrix.rows();
    if b.shape() != (nb, nb) {
        return Err(NcgError::Shape(format!("operator is {:?}, target space has dimension {nb}", b.shape())));
    }
    let p = &phi.projector;
    let q = phi.complement();
    Ok(InheritedSplit {
        pullback: phi.matrix.adjoint().matmul(b).matmul(&phi.matrix),
        phi_perp: p.matmul(b).matmul(&q).norm(),
        perp_phi: q.matmul(b).matmul(p).norm(),
        perp_perp: q.matmul(b).matmul(&q).norm(),
    })
}

#[cfg(test)]
mod tests;
