//! Krajewski diagrams: validation, realization and classification of finite
//! real spectral triples.

mod classify;
mod examples;
mod triple;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::algebra::AlgebraProfile;
use crate::error::{NcgError, Result};
use crate::linalg::{ComplexMatrix, C64};

pub use classify::classify;
pub use examples::{minimal_diagram, trivial_diagram};
pub use triple::{detect_ko, realize, realize_with_tol, verify_axioms, verify_axioms_seeded, AxiomEntry, AxiomReport, RealSpectralTriple};

/// KO-dimension and its sign row `(ε, ε′, ε″)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "KoDoc", into = "KoDoc")]
pub struct KoSignature {
    d: u8,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KoDoc {
    d: i64,
    eps: i8,
    eps_p: i8,
    eps_pp: Option<i8>,
}

impl TryFrom<KoDoc> for KoSignature {
    type Error = NcgError;

    fn try_from(doc: KoDoc) -> Result<Self> {
        let ko = KoSignature::new(doc.d);
        if (doc.eps, doc.eps_p, doc.eps_pp) != (ko.eps(), ko.eps_p(), ko.eps_pp()) {
            return Err(NcgError::InvalidDiagram(format!(
                "signs ({}, {}, {:?}) do not match KO-dimension {}",
                doc.eps, doc.eps_p, doc.eps_pp, ko.d
            )));
        }
        Ok(ko)
    }
}

impl From<KoSignature> for KoDoc {
    fn from(k: KoSignature) -> Self {
        Self { d: k.d as i64, eps: k.eps(), eps_p: k.eps_p(), eps_pp: k.eps_pp() }
    }
}

const KO_TABLE: [(i8, i8, Option<i8>); 8] = [
    (1, 1, Some(1)),
    (1, -1, None),
    (-1, 1, Some(-1)),
    (-1, 1, None),
    (-1, 1, Some(1)),
    (-1, -1, None),
    (1, 1, Some(-1)),
    (1, 1, None),
];

impl KoSignature {
    pub fn new(d: i64) -> Self {
        Self { d: d.rem_euclid(8) as u8 }
    }

    pub fn d(&self) -> u8 {
        self.d
    }

    pub fn eps(&self) -> i8 {
        KO_TABLE[self.d as usize].0
    }

    pub fn eps_p(&self) -> i8 {
        KO_TABLE[self.d as usize].1
    }

    pub fn eps_pp(&self) -> Option<i8> {
        KO_TABLE[self.d as usize].2
    }

    pub fn is_even(&self) -> bool {
        self.d % 2 == 0
    }

    /// Diagonal vertices are fixed by `jim` exactly in these dimensions.
    pub fn diagonal_self_paired(&self) -> bool {
        matches!(self.d, 0 | 1 | 7)
    }

    /// Rows of the table matching the given signs.
    pub fn matching(eps: i8, eps_p: i8, eps_pp: Option<i8>) -> Vec<u8> {
        (0..8u8).filter(|&d| KO_TABLE[d as usize] == (eps, eps_p, eps_pp)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Left,
    Right,
    General,
}

impl EdgeKind {
    fn mirrored(self) -> Self {
        match self {
            EdgeKind::Left => EdgeKind::Right,
            EdgeKind::Right => EdgeKind::Left,
            EdgeKind::General => EdgeKind::General,
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::Left => "left",
            EdgeKind::Right => "right",
            EdgeKind::General => "general",
        })
    }
}

/// A vertex `C^{n_i} ⊗ C^{n_j∘}`. Indices are zero-based in memory and
/// one-based in serialized form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VertexDoc", into = "VertexDoc")]
pub struct Vertex {
    pub id: String,
    pub i: usize,
    pub j: usize,
    pub s: Option<i8>,
    pub chi: Option<u8>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VertexDoc {
    id: String,
    i: usize,
    j: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    s: Option<i8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chi: Option<u8>,
}

impl From<VertexDoc> for Vertex {
    fn from(d: VertexDoc) -> Self {
        // index 0 is kept out of range so validation reports it
        Self { id: d.id, i: d.i.wrapping_sub(1), j: d.j.wrapping_sub(1), s: d.s, chi: d.chi }
    }
}

impl From<Vertex> for VertexDoc {
    fn from(v: Vertex) -> Self {
        Self { id: v.id, i: v.i.wrapping_add(1), j: v.j.wrapping_add(1), s: v.s, chi: v.chi }
    }
}

impl Vertex {
    pub fn new(id: impl Into<String>, i: usize, j: usize) -> Self {
        Self { id: id.into(), i, j, s: None, chi: None }
    }

    pub fn with_s(mut self, s: i8) -> Self {
        self.s = Some(s);
        self
    }

    pub fn with_chi(mut self, chi: u8) -> Self {
        self.chi = Some(chi);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub src: String,
    pub dst: String,
    pub kind: EdgeKind,
    pub op: ComplexMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrajewskiDiagram {
    pub profile: AlgebraProfile,
    pub ko: KoSignature,
    pub vertices: Vec<Vertex>,
    pub jim: BTreeMap<String, String>,
    #[serde(default)]
    pub edges: Vec<Edge>,
}

/// `ε(v,d)`.
pub fn epsilon_factor(v: &Vertex, ko: KoSignature) -> Result<i8> {
    use std::cmp::Ordering::*;
    Ok(match v.i.cmp(&v.j) {
        Less => 1,
        Greater => ko.eps(),
        Equal if ko.diagonal_self_paired() => 1,
        Equal => match v.chi {
            Some(0) => 1,
            Some(1) => ko.eps(),
            Some(x) => return Err(NcgError::InvalidDiagram(format!("vertex `{}` has chi = {x}", v.id))),
            None => {
                return Err(NcgError::InvalidDiagram(format!(
                    "vertex `{}` needs chi in KO-dimension {}",
                    v.id, ko.d
                )))
            }
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    fn push(&mut self, name: &str, failures: Vec<String>, residual: Option<f64>) {
        self.checks.push(Check { name: name.to_string(), passed: failures.is_empty(), residual, failures });
    }

    fn summary(&self) -> String {
        self.failed()
            .iter()
            .map(|c| match c.failures.first() {
                Some(f) => format!("{} ({f})", c.name),
                None => c.name.clone(),
            })
            .collect::<Vec<_>>()
            .join("; ")
    }
}

pub const CHECK_IDS: &str = "vertex ids unique";
pub const CHECK_RANGE: &str = "vertex indices in range";
pub const CHECK_S_PRESENT: &str = "s present iff d even";
pub const CHECK_CHI_PRESENT: &str = "chi present iff i=j and d in {2..6}";
pub const CHECK_JIM_TOTAL: &str = "jim defined on every vertex";
pub const CHECK_JIM_INVOLUTION: &str = "jim is an involution";
pub const CHECK_JIM_SWAP: &str = "lambda(jim v) = rho(v)";
pub const CHECK_JIM_FIXED: &str = "jim fixes diagonal vertices";
pub const CHECK_S_JIM: &str = "s(jim v) = eps'' s(v)";
pub const CHECK_CHI_JIM: &str = "chi(jim v) = 1 - chi(v)";
pub const CHECK_DIAG_EVEN: &str = "diagonal fibers have even size";
pub const CHECK_EDGE_ENDS: &str = "edge endpoints exist";
pub const CHECK_EDGE_KIND: &str = "edge kind matches lambda/rho";
pub const CHECK_EDGE_SHAPE: &str = "edge operator shape";
pub const CHECK_EDGE_NONZERO: &str = "edge operator nonzero";
pub const CHECK_EDGE_FORM: &str = "edge operator has the form of its kind";
pub const CHECK_EDGE_GRADING: &str = "s(v2) = -s(v1)";
pub const CHECK_EDGE_ORBIT: &str = "edge orbits consistent (reverse and jim images)";

/// Orthogonal projection of `op` onto operators of the given kind.
pub(crate) fn edge_form_projection(kind: EdgeKind, op: &ComplexMatrix, n: (usize, usize, usize, usize)) -> ComplexMatrix {
    let (ni1, nj1, ni2, nj2) = n;
    match kind {
        EdgeKind::Right => {
            let r = right_part(op, ni1, nj2, nj1);
            ComplexMatrix::identity(ni1).kron(&r)
        }
        EdgeKind::Left => {
            let l = left_part(op, ni2, ni1, nj1);
            l.kron(&ComplexMatrix::identity(nj1))
        }
        EdgeKind::General => {
            let l = left_part(op, ni2, ni1, nj1);
            let r = right_part(op, ni1, nj2, nj1);
            let c = op.trace() / C64::new((ni1 * nj1) as f64, 0.0);
            let mut p = &l.kron(&ComplexMatrix::identity(nj1)) + &ComplexMatrix::identity(ni1).kron(&r);
            p = &p - &ComplexMatrix::scalar(ni1 * nj1, c);
            p
        }
    }
}

/// `R` with `op ≈ 𝟙_{n} ⊗ R`, `R` of shape `rr × rc`.
fn right_part(op: &ComplexMatrix, n: usize, rr: usize, rc: usize) -> ComplexMatrix {
    let mut r = ComplexMatrix::zeros(rr, rc);
    for a in 0..n {
        r += &op.block(a * rr, a * rc, rr, rc);
    }
    r.scale_re(1.0 / n as f64)
}

/// `L` with `op ≈ L ⊗ 𝟙_m`, `L` of shape `lr × lc`.
fn left_part(op: &ComplexMatrix, lr: usize, lc: usize, m: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(lr, lc, |a, b| op.block(a * m, b * m, m, m).trace() / C64::new(m as f64, 0.0))
}

/// Completed edge set keyed by `(src, dst)` vertex positions.
pub(crate) type EdgeMap = BTreeMap<(usize, usize), (EdgeKind, ComplexMatrix)>;

impl KrajewskiDiagram {
    pub fn vertex(&self, id: &str) -> Option<&Vertex> {
        self.vertices.iter().find(|v| v.id == id)
    }

    fn index(&self) -> HashMap<&str, usize> {
        self.vertices.iter().enumerate().map(|(k, v)| (v.id.as_str(), k)).collect()
    }

    /// Fiber cardinalities `μ_{ij}`.
    pub fn multiplicities(&self) -> Vec<Vec<usize>> {
        let r = self.profile.len();
        let mut mu = vec![vec![0; r]; r];
        for v in &self.vertices {
            if v.i < r && v.j < r {
                mu[v.i][v.j] += 1;
            }
        }
        mu
    }

    /// Vertex positions in realization order `(i, p, j)` with `p` the rank
    /// of the vertex inside its fiber.
    pub fn realization_order(&self) -> Vec<usize> {
        let mut rank = HashMap::new();
        let mut keyed: Vec<(usize, usize, usize, usize)> = Vec::new();
        for (k, v) in self.vertices.iter().enumerate() {
            let p = rank.entry((v.i, v.j)).or_insert(0usize);
            keyed.push((v.i, *p, v.j, k));
            *p += 1;
        }
        keyed.sort();
        keyed.into_iter().map(|t| t.3).collect()
    }

    /// Hilbert space layout used by [`realize`], labelled by vertex ids.
    pub fn layout(&self) -> crate::algebra::Layout {
        let order = self.realization_order();
        crate::algebra::Layout::new(
            &self.profile,
            order.iter().map(|&k| {
                let v = &self.vertices[k];
                (v.id.clone(), v.i, v.j)
            }),
        )
    }

    /// The `jim` image of an edge operator `D_e` from `v1` to `v2`.
    pub(crate) fn jim_edge_op(&self, v1: &Vertex, v2: &Vertex, op: &ComplexMatrix) -> Result<ComplexMatrix> {
        let n = |k: usize| self.profile.n(k);
        let sign = self.ko.eps_p() * epsilon_factor(v1, self.ko)? * epsilon_factor(v2, self.ko)?;
        let left = ComplexMatrix::swap(n(v2.i), n(v2.j));
        let right = ComplexMatrix::swap(n(v1.j), n(v1.i));
        Ok(left.matmul(&op.conj()).matmul(&right).scale_re(sign as f64))
    }

    fn vertex_checks(&self, report: &mut ValidationReport) {
        let r = self.profile.len();
        let ko = self.ko;
        let mut seen = BTreeSet::new();
        let dup: Vec<String> =
            self.vertices.iter().filter(|v| !seen.insert(v.id.as_str())).map(|v| format!("duplicate `{}`", v.id)).collect();
        report.push(CHECK_IDS, dup, None);

        let range: Vec<String> = self
            .vertices
            .iter()
            .filter(|v| v.i >= r || v.j >= r)
            .map(|v| format!("`{}` outside 1..={r}", v.id))
            .collect();
        report.push(CHECK_RANGE, range, None);

        let s_bad: Vec<String> = self
            .vertices
            .iter()
            .filter(|v| match v.s {
                Some(s) => !ko.is_even() || (s != 1 && s != -1),
                None => ko.is_even(),
            })
            .map(|v| format!("`{}` has s = {:?}", v.id, v.s))
            .collect();
        report.push(CHECK_S_PRESENT, s_bad, None);

        let chi_needed = |v: &Vertex| v.i == v.j && matches!(ko.d(), 2..=6);
        let chi_bad: Vec<String> = self
            .vertices
            .iter()
            .filter(|v| match v.chi {
                Some(c) => !chi_needed(v) || c > 1,
                None => chi_needed(v),
            })
            .map(|v| format!("`{}` has chi = {:?}", v.id, v.chi))
            .collect();
        report.push(CHECK_CHI_PRESENT, chi_bad, None);

        let idx = self.index();
        let mut total = Vec::new();
        for v in &self.vertices {
            match self.jim.get(&v.id) {
                None => total.push(format!("no image for `{}`", v.id)),
                Some(w) if !idx.contains_key(w.as_str()) => total.push(format!("`{}` maps to unknown `{w}`", v.id)),
                _ => {}
            }
        }
        for k in self.jim.keys() {
            if !idx.contains_key(k.as_str()) {
                total.push(format!("unknown vertex `{k}` in jim"));
            }
        }
        report.push(CHECK_JIM_TOTAL, total, None);

        let jim = |v: &Vertex| self.jim.get(&v.id).and_then(|w| idx.get(w.as_str())).map(|&k| &self.vertices[k]);
        let mut inv = Vec::new();
        let mut swap = Vec::new();
        let mut fixed = Vec::new();
        let mut s_jim = Vec::new();
        let mut chi_jim = Vec::new();
        for v in &self.vertices {
            let Some(w) = jim(v) else { continue };
            match jim(w) {
                Some(x) if x.id == v.id => {}
                Some(x) => inv.push(format!("`{}` -> `{}` -> `{}`", v.id, w.id, x.id)),
                None => inv.push(format!("`{}` -> `{}` -> ?", v.id, w.id)),
            }
            if w.i != v.j || w.j != v.i {
                swap.push(format!("`{}` -> `{}`", v.id, w.id));
            }
            if v.i == v.j && ko.diagonal_self_paired() && w.id != v.id {
                fixed.push(format!("`{}` -> `{}`", v.id, w.id));
            }
            if let (Some(sv), Some(sw), Some(epp)) = (v.s, w.s, ko.eps_pp()) {
                if sw != epp * sv {
                    s_jim.push(format!("s(`{}`) = {sv}, s(`{}`) = {sw}", v.id, w.id));
                }
            }
            if v.i == v.j && matches!(ko.d(), 2..=6) {
                match (v.chi, w.chi) {
                    (Some(a), Some(b)) if a + b == 1 => {}
                    (a, b) => chi_jim.push(format!("chi(`{}`) = {a:?}, chi(`{}`) = {b:?}", v.id, w.id)),
                }
            }
        }
        report.push(CHECK_JIM_INVOLUTION, inv, None);
        report.push(CHECK_JIM_SWAP, swap, None);
        report.push(CHECK_JIM_FIXED, fixed, None);
        report.push(CHECK_S_JIM, s_jim, None);
        report.push(CHECK_CHI_JIM, chi_jim, None);

        let mut odd = Vec::new();
        if matches!(ko.d(), 2..=6) {
            let mu = self.multiplicities();
            for (i, row) in mu.iter().enumerate() {
                if row[i] % 2 == 1 {
                    odd.push(format!("fiber ({0},{0}) has {1} vertices", i + 1, row[i]));
                }
            }
        }
        report.push(CHECK_DIAG_EVEN, odd, None);

        for (i, row) in self.multiplicities().iter().enumerate() {
            if row.iter().all(|&m| m == 0) {
                report.warnings.push(format!("summand {} acts trivially (non-faithful representation)", i + 1));
            }
        }
    }

    fn edge_checks(&self, report: &mut ValidationReport, tol: f64) {
        let idx = self.index();
        let n = |k: usize| self.profile.n(k);
        let mut ends = Vec::new();
        let mut kind_bad = Vec::new();
        let mut shape_bad = Vec::new();
        let mut zero = Vec::new();
        let mut form_bad = Vec::new();
        let mut form_res: f64 = 0.0;
        let mut grading = Vec::new();
        for (k, e) in self.edges.iter().enumerate() {
            let (Some(&a), Some(&b)) = (idx.get(e.src.as_str()), idx.get(e.dst.as_str())) else {
                ends.push(format!("edge {k}: `{}` -> `{}`", e.src, e.dst));
                continue;
            };
            let (v1, v2) = (&self.vertices[a], &self.vertices[b]);
            let kind_ok = match e.kind {
                EdgeKind::Right => v1.i == v2.i,
                EdgeKind::Left => v1.j == v2.j,
                EdgeKind::General => v1.i == v2.i && v1.j == v2.j,
            };
            if !kind_ok {
                kind_bad.push(format!("{} edge `{}` -> `{}`", e.kind, e.src, e.dst));
            }
            let shape = (n(v2.i) * n(v2.j), n(v1.i) * n(v1.j));
            if e.op.shape() != shape {
                shape_bad.push(format!("`{}` -> `{}` is {:?}, expected {:?}", e.src, e.dst, e.op.shape(), shape));
                continue;
            }
            if e.op.norm() <= tol {
                zero.push(format!("`{}` -> `{}`", e.src, e.dst));
            }
            if kind_ok {
                let proj = edge_form_projection(e.kind, &e.op, (n(v1.i), n(v1.j), n(v2.i), n(v2.j)));
                let res = proj.dist(&e.op);
                form_res = form_res.max(res);
                if res > tol {
                    form_bad.push(format!("{} edge `{}` -> `{}` residual {res:.3e}", e.kind, e.src, e.dst));
                }
            }
            if let (Some(s1), Some(s2)) = (v1.s, v2.s) {
                if s1 != -s2 {
                    grading.push(format!("`{}` -> `{}` with s = {s1}, {s2}", e.src, e.dst));
                }
            }
        }
        report.push(CHECK_EDGE_ENDS, ends, None);
        report.push(CHECK_EDGE_KIND, kind_bad, None);
        report.push(CHECK_EDGE_SHAPE, shape_bad, None);
        report.push(CHECK_EDGE_NONZERO, zero, None);
        report.push(CHECK_EDGE_FORM, form_bad, Some(form_res));
        report.push(CHECK_EDGE_GRADING, grading, None);
    }

    /// Closes the edge set under reversal and `jim`, reporting conflicts.
    pub(crate) fn complete_edges(&self, tol: f64) -> Result<(EdgeMap, Vec<String>, f64)> {
        let idx = self.index();
        let jim_of = |k: usize| idx[self.jim[&self.vertices[k].id].as_str()];
        let mut map: EdgeMap = BTreeMap::new();
        let mut conflicts = Vec::new();
        let mut worst: f64 = 0.0;
        for e in &self.edges {
            let (a, b) = (idx[e.src.as_str()], idx[e.dst.as_str()]);
            let (ja, jb) = (jim_of(a), jim_of(b));
            let jop = self.jim_edge_op(&self.vertices[a], &self.vertices[b], &e.op)?;
            let orbit = [
                ((a, b), e.kind, e.op.clone()),
                ((b, a), e.kind, e.op.adjoint()),
                ((ja, jb), e.kind.mirrored(), jop.clone()),
                ((jb, ja), e.kind.mirrored(), jop.adjoint()),
            ];
            for (key, kind, op) in orbit {
                match map.get(&key) {
                    Some((_, existing)) => {
                        let res = existing.dist(&op);
                        worst = worst.max(res);
                        if res > tol {
                            conflicts.push(format!(
                                "`{}` -> `{}` residual {res:.3e}",
                                self.vertices[key.0].id, self.vertices[key.1].id
                            ));
                        }
                    }
                    None => {
                        map.insert(key, (kind, op));
                    }
                }
            }
        }
        Ok((map, conflicts, worst))
    }

    pub fn validate(&self) -> ValidationReport {
        self.validate_with_tol(1e-10)
    }

    pub fn validate_with_tol(&self, tol: f64) -> ValidationReport {
        let mut report = ValidationReport::default();
        self.vertex_checks(&mut report);
        if !report.ok() {
            report.push(CHECK_EDGE_ORBIT, vec!["skipped: vertex data invalid".into()], None);
            return report;
        }
        self.edge_checks(&mut report, tol);
        if !report.ok() {
            report.push(CHECK_EDGE_ORBIT, vec!["skipped: edge data invalid".into()], None);
            return report;
        }
        match self.complete_edges(tol) {
            Ok((_, conflicts, worst)) => report.push(CHECK_EDGE_ORBIT, conflicts, Some(worst)),
            Err(e) => report.push(CHECK_EDGE_ORBIT, vec![e.to_string()], None),
        }
        report
    }

    pub(crate) fn ensure_valid(&self, tol: f64) -> Result<ValidationReport> {
        let report = self.validate_with_tol(tol);
        if !report.ok() {
            return Err(NcgError::InvalidDiagram(report.summary()));
        }
        Ok(report)
    }
}

pub fn validate(diag: &KrajewskiDiagram) -> ValidationReport {
    diag.validate()
}
