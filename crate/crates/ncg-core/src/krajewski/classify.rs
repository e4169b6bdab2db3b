use std::collections::BTreeMap;

use super::{Edge, EdgeKind, KrajewskiDiagram, RealSpectralTriple, Vertex};
use crate::algebra::{AlgebraElement, Layout};
use crate::error::{NcgError, Result};
use crate::linalg::{vdot, vec_norm, ComplexMatrix, C64, I, ONE, ZERO};

/// Below this norm a Gram-Schmidt candidate is considered dependent.
const GS_CUTOFF: f64 = 1e-6;

fn fail(step: &'static str, detail: impl Into<String>) -> NcgError {
    NcgError::Classification { step, detail: detail.into() }
}

fn unit(n: usize, k: usize) -> Vec<C64> {
    let mut e = vec![ZERO; n];
    e[k] = ONE;
    e
}

fn apply(m: &ComplexMatrix, x: &[C64]) -> Vec<C64> {
    (0..m.rows()).map(|r| (0..m.cols()).map(|c| m[(r, c)] * x[c]).sum()).collect()
}

/// `𝓛(x) = L x̄`.
fn antilinear(l: &ComplexMatrix, x: &[C64]) -> Vec<C64> {
    let xc: Vec<C64> = x.iter().map(|z| z.conj()).collect();
    apply(l, &xc)
}

fn orthogonalize(x: &[C64], basis: &[Vec<C64>], real: bool) -> Vec<C64> {
    let mut y = x.to_vec();
    for b in basis {
        let mut coef = vdot(b, &y);
        if real {
            coef = C64::new(coef.re, 0.0);
        }
        for (yk, bk) in y.iter_mut().zip(b) {
            *yk -= coef * bk;
        }
    }
    y
}

fn normalized(x: Vec<C64>) -> Vec<C64> {
    let n = vec_norm(&x);
    x.into_iter().map(|z| z / n).collect()
}

fn first_significant(x: &[C64]) -> C64 {
    let scale = vec_norm(x);
    x.iter().copied().find(|z| z.norm() > 1e-8 * scale.max(1.0)).unwrap_or(ONE)
}

/// First significant coordinate made real positive.
fn fix_phase(x: Vec<C64>) -> Vec<C64> {
    let z = first_significant(&x);
    let phase = z.conj() / z.norm();
    x.into_iter().map(|w| w * phase).collect()
}

/// Sign fix for vectors constrained to a real form.
fn fix_sign(x: Vec<C64>) -> Vec<C64> {
    let z = first_significant(&x);
    let flip = if z.re.abs() > 1e-8 { z.re < 0.0 } else { z.im < 0.0 };
    if flip {
        x.into_iter().map(|w| -w).collect()
    } else {
        x
    }
}

fn projector(ell: Option<&ComplexMatrix>, sign: f64, mu: usize) -> ComplexMatrix {
    match ell {
        Some(l) => (&ComplexMatrix::identity(mu) + &l.scale_re(sign)).scale_re(0.5),
        None => ComplexMatrix::identity(mu),
    }
}

struct FiberBasis {
    /// Columns are the new basis vectors of the multiplicity space.
    m: ComplexMatrix,
    chi: Vec<Option<u8>>,
    /// Position of the `jim` partner inside the (j,i) fiber.
    partner: Vec<usize>,
}

pub fn classify(t: &RealSpectralTriple, tol: f64) -> Result<(KrajewskiDiagram, ComplexMatrix)> {
    t.check_shapes().map_err(|e| fail("shapes", e.to_string()))?;
    let profile = &t.profile;
    let ko = t.ko;
    let r = profile.len();
    let n = t.dim();
    let blocks = t.layout.blocks();
    let nn = |i: usize| profile.n(i);

    // (1) fibers and their projections
    let mut fib = vec![vec![Vec::<usize>::new(); r]; r];
    for (k, b) in blocks.iter().enumerate() {
        fib[b.i][b.j].push(k);
    }
    for i in 0..r {
        let left = t.pi(&AlgebraElement::embed(profile, i, ComplexMatrix::identity(nn(i)))?);
        for j in 0..r {
            let right = t.opposite(&AlgebraElement::embed(profile, j, ComplexMatrix::identity(nn(j)))?);
            let p = left.matmul(&right);
            let mut q = ComplexMatrix::zeros(n, n);
            for &k in &fib[i][j] {
                let b = &blocks[k];
                q.set_block(b.offset, b.offset, &ComplexMatrix::identity(b.len));
            }
            let res = p.dist(&q);
            if res > tol {
                return Err(fail(
                    "fiber projections",
                    format!("projection onto fiber ({},{}) deviates from the layout by {res:.3e}", i + 1, j + 1),
                ));
            }
        }
    }

    // (2) multiplicities
    let mu: Vec<Vec<usize>> = fib.iter().map(|row| row.iter().map(Vec::len).collect()).collect();
    for i in 0..r {
        for j in 0..r {
            if mu[i][j] != mu[j][i] {
                return Err(fail(
                    "multiplicities",
                    format!("mu({},{}) = {} but mu({},{}) = {}", i + 1, j + 1, mu[i][j], j + 1, i + 1, mu[j][i]),
                ));
            }
        }
    }

    // (3) L_{ij} from K
    let mut ls: BTreeMap<(usize, usize), ComplexMatrix> = BTreeMap::new();
    let mut k_rec = ComplexMatrix::zeros(n, n);
    for i in 0..r {
        for j in 0..r {
            let s = ComplexMatrix::swap(nn(i), nn(j));
            let norm = (nn(i) * nn(j)) as f64;
            let mut l = ComplexMatrix::zeros(mu[j][i], mu[i][j]);
            for (p, &kv) in fib[i][j].iter().enumerate() {
                for (q, &kw) in fib[j][i].iter().enumerate() {
                    let (bv, bw) = (&blocks[kv], &blocks[kw]);
                    let kb = t.k.block(bw.offset, bv.offset, bw.len, bv.len);
                    l[(q, p)] = s.inner(&kb) / norm;
                    k_rec.set_block(bw.offset, bv.offset, &s.scale(l[(q, p)]));
                }
            }
            ls.insert((i, j), l);
        }
    }
    let res = k_rec.dist(&t.k);
    if res > tol {
        return Err(fail("real structure blocks", format!("K is not of the form L_ij ⊗ swap (residual {res:.3e})")));
    }

    // (4) ℓ_{ij} from γ
    let mut ells: BTreeMap<(usize, usize), ComplexMatrix> = BTreeMap::new();
    if let Some(g) = &t.gamma {
        let mut g_rec = ComplexMatrix::zeros(n, n);
        for i in 0..r {
            for j in 0..r {
                let m = mu[i][j];
                let mut ell = ComplexMatrix::zeros(m, m);
                for (p, &kv) in fib[i][j].iter().enumerate() {
                    for (q, &kw) in fib[i][j].iter().enumerate() {
                        let (bv, bw) = (&blocks[kv], &blocks[kw]);
                        ell[(q, p)] = g.block(bw.offset, bv.offset, bw.len, bv.len).trace() / C64::new(bv.len as f64, 0.0);
                        g_rec.set_block(bw.offset, bv.offset, &ComplexMatrix::scalar(bv.len, ell[(q, p)]));
                    }
                }
                ells.insert((i, j), ell);
            }
        }
        let res = g_rec.dist(g);
        if res > tol {
            return Err(fail("grading blocks", format!("gamma is not of the form l_ij ⊗ 1 (residual {res:.3e})")));
        }
    }

    // (5) bases
    let mut bases: BTreeMap<(usize, usize), FiberBasis> = BTreeMap::new();
    for i in 0..r {
        for j in i..r {
            let m = mu[i][j];
            if m == 0 {
                continue;
            }
            let l = &ls[&(i, j)];
            let ell = ells.get(&(i, j));
            if i < j {
                let mut cols: Vec<Vec<C64>> = Vec::new();
                let signs: &[f64] = if ell.is_some() { &[1.0, -1.0] } else { &[1.0] };
                for &sg in signs {
                    let p = projector(ell, sg, m);
                    for k in 0..m {
                        let y = orthogonalize(&apply(&p, &unit(m, k)), &cols, false);
                        if vec_norm(&y) > GS_CUTOFF {
                            cols.push(fix_phase(normalized(y)));
                        }
                    }
                }
                if cols.len() != m {
                    return Err(fail(
                        "bases",
                        format!("grading on fiber ({},{}) does not have eigenvalues ±1", i + 1, j + 1),
                    ));
                }
                let mij = ComplexMatrix::from_columns(m, &cols);
                let mji = l.matmul(&mij.conj());
                let ident: Vec<usize> = (0..m).collect();
                bases.insert((i, j), FiberBasis { m: mij, chi: vec![None; m], partner: ident.clone() });
                bases.insert((j, i), FiberBasis { m: mji, chi: vec![None; m], partner: ident });
            } else if ko.diagonal_self_paired() {
                let mut cols: Vec<Vec<C64>> = Vec::new();
                let signs: &[f64] = if ell.is_some() { &[1.0, -1.0] } else { &[1.0] };
                for &sg in signs {
                    let p = projector(ell, sg, m);
                    for k in 0..m {
                        let c = apply(&p, &unit(m, k));
                        let lc = antilinear(l, &c);
                        let plus: Vec<C64> = c.iter().zip(&lc).map(|(a, b)| a + b).collect();
                        let minus: Vec<C64> = c.iter().zip(&lc).map(|(a, b)| I * (a - b)).collect();
                        for cand in [plus, minus] {
                            let y = orthogonalize(&cand, &cols, true);
                            if vec_norm(&y) > GS_CUTOFF {
                                cols.push(fix_sign(normalized(y)));
                            }
                        }
                    }
                }
                if cols.len() != m {
                    return Err(fail(
                        "bases",
                        format!("no real basis fixed by J on fiber ({0},{0}) ({1} of {m} vectors)", i + 1, cols.len()),
                    ));
                }
                let mii = ComplexMatrix::from_columns(m, &cols);
                bases.insert((i, i), FiberBasis { m: mii, chi: vec![None; m], partner: (0..m).collect() });
            } else {
                if m % 2 == 1 {
                    return Err(fail(
                        "bases",
                        format!("diagonal fiber ({0},{0}) has odd multiplicity {m}; J pairs its vertices", i + 1),
                    ));
                }
                let signs: &[f64] = match (ell.is_some(), ko.eps_pp()) {
                    (true, Some(-1)) => &[-1.0],
                    (true, _) => &[1.0, -1.0],
                    (false, _) => &[1.0],
                };
                let mut cols: Vec<Vec<C64>> = Vec::new();
                for &sg in signs {
                    let p = projector(ell, sg, m);
                    for k in 0..m {
                        let y = orthogonalize(&apply(&p, &unit(m, k)), &cols, false);
                        if vec_norm(&y) > GS_CUTOFF {
                            let x = fix_phase(normalized(y));
                            let lx = antilinear(l, &x);
                            cols.push(x);
                            cols.push(lx);
                        }
                    }
                }
                if cols.len() != m {
                    return Err(fail(
                        "bases",
                        format!("could not pair the vertices of fiber ({0},{0}) ({1} of {m} vectors)", i + 1, cols.len()),
                    ));
                }
                let mii = ComplexMatrix::from_columns(m, &cols);
                let ortho = mii.adjoint().matmul(&mii).dist(&ComplexMatrix::identity(m));
                if ortho > tol.max(1e-9) {
                    return Err(fail("bases", format!("paired basis of fiber ({0},{0}) not orthonormal ({ortho:.3e})", i + 1)));
                }
                let chi = (0..m).map(|k| Some((k % 2) as u8)).collect();
                let partner = (0..m).map(|k| k ^ 1).collect();
                bases.insert((i, i), FiberBasis { m: mii, chi, partner });
            }
        }
    }

    // new vertices in (i, p, j) order
    let pmax = mu.iter().flatten().copied().max().unwrap_or(0);
    let mut order: Vec<(usize, usize, usize)> = Vec::new();
    for i in 0..r {
        for p in 0..pmax {
            for j in 0..r {
                if p < mu[i][j] {
                    order.push((i, p, j));
                }
            }
        }
    }
    let label = |i: usize, p: usize, j: usize| format!("({},{},{})", i + 1, p + 1, j + 1);
    let new_layout = Layout::new(profile, order.iter().map(|&(i, p, j)| (label(i, p, j), i, j)));
    let mut w = ComplexMatrix::zeros(n, n);
    for (slot, &(i, pn, j)) in order.iter().enumerate() {
        let nb = &new_layout.blocks()[slot];
        let basis = &bases[&(i, j)];
        for (po, &kv) in fib[i][j].iter().enumerate() {
            let ob = &blocks[kv];
            let z = basis.m[(po, pn)];
            if z != ZERO {
                w.set_block(ob.offset, nb.offset, &ComplexMatrix::scalar(ob.len, z));
            }
        }
    }
    let unitary = w.adjoint().matmul(&w).dist(&ComplexMatrix::identity(n));
    if unitary > tol.max(1e-9) {
        return Err(fail("bases", format!("basis change is not unitary ({unitary:.3e})")));
    }
    let tn = t.conjugated(&w, new_layout.clone());

    // (6) vertices, jim and edges
    let mut vertices = Vec::new();
    let mut jim = BTreeMap::new();
    for (slot, &(i, p, j)) in order.iter().enumerate() {
        let nb = &new_layout.blocks()[slot];
        let basis = &bases[&(i, j)];
        let mut v = Vertex::new(label(i, p, j), i, j);
        if let Some(g) = &tn.gamma {
            let s = g[(nb.offset, nb.offset)].re;
            v.s = Some(if s >= 0.0 { 1 } else { -1 });
        }
        v.chi = basis.chi[p];
        jim.insert(v.id.clone(), label(j, basis.partner[p], i));
        vertices.push(v);
    }
    let mut edges = Vec::new();
    for (a, va) in vertices.iter().enumerate() {
        let ba = &new_layout.blocks()[a];
        for (b, vb) in vertices.iter().enumerate() {
            let bb = &new_layout.blocks()[b];
            let op = tn.d.block(bb.offset, ba.offset, bb.len, ba.len);
            if op.norm() <= tol {
                continue;
            }
            let kind = match (va.i == vb.i, va.j == vb.j) {
                (true, true) => EdgeKind::General,
                (true, false) => EdgeKind::Right,
                (false, true) => EdgeKind::Left,
                (false, false) => {
                    return Err(fail(
                        "edges",
                        format!("D couples `{}` and `{}`, which share neither lambda nor rho", va.id, vb.id),
                    ))
                }
            };
            edges.push(Edge { src: va.id.clone(), dst: vb.id.clone(), kind, op });
        }
    }
    let diag = KrajewskiDiagram { profile: profile.clone(), ko, vertices, jim, edges };
    let report = diag.validate_with_tol(tol.max(1e-9));
    if !report.ok() {
        return Err(fail("edges", report.summary()));
    }

    // check the witness
    let re = super::triple::realize_with_tol(&diag, tol.max(1e-9)).map_err(|e| fail("reconstruction", e.to_string()))?;
    let scale = 1.0 + tn.d.norm();
    let dropped = (vertices_len(&diag) as f64).max(1.0);
    let mut worst = re.d.dist(&tn.d) / (scale * dropped);
    worst = worst.max(re.k.dist(&tn.k));
    if let (Some(a), Some(b)) = (&re.gamma, &tn.gamma) {
        worst = worst.max(a.dist(b));
    }
    if worst > tol.max(1e-9) {
        return Err(fail("reconstruction", format!("realized diagram differs from the rotated triple by {worst:.3e}")));
    }
    Ok((diag, w))
}

fn vertices_len(d: &KrajewskiDiagram) -> usize {
    d.vertices.len()
}
