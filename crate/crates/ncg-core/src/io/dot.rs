use std::collections::HashMap;
use std::fmt::Write;

use crate::bratteli::BratteliArrow;
use crate::error::Result;
use crate::krajewski::KrajewskiDiagram;
use crate::lifting::DiagramLift;

const TOL: f64 = 1e-10;

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn summand(n: usize) -> String {
    if n == 1 {
        "C".into()
    } else {
        format!("M{n}")
    }
}

/// `(i,p,j)[s,χ]` per vertex, with one-based indices.
fn vertex_labels(d: &KrajewskiDiagram) -> Vec<(String, (usize, usize, usize))> {
    let mut rank: HashMap<(usize, usize), usize> = HashMap::new();
    d.vertices
        .iter()
        .map(|v| {
            let p = rank.entry((v.i, v.j)).or_insert(0);
            *p += 1;
            let mut label = format!("({},{},{})", v.i + 1, p, v.j + 1);
            let s = v.s.map(|s| format!("{s:+}"));
            let chi = v.chi.map(|c| c.to_string());
            match (s, chi) {
                (None, None) => {}
                (s, chi) => {
                    let _ = write!(label, "[{},{}]", s.as_deref().unwrap_or("-"), chi.as_deref().unwrap_or("-"));
                }
            }
            (label, (v.i, *p, v.j))
        })
        .collect()
}

/// Nodes and undirected edges of a diagram, node names prefixed by `prefix`.
fn diagram_body(out: &mut String, d: &KrajewskiDiagram, prefix: &str, indent: &str) -> Result<()> {
    d.ensure_valid(TOL)?;
    let labels = vertex_labels(d);
    for (v, (label, (i, p, j))) in d.vertices.iter().zip(&labels) {
        // lattice position: column j, row i, fiber members side by side
        let x = 2.0 * *j as f64 + 0.4 * (*p as f64 - 1.0);
        let y = -2.0 * *i as f64;
        let _ = writeln!(out, "{indent}{} [label={}, pos=\"{x},{y}!\"];", quote(&format!("{prefix}{}", v.id)), quote(label));
    }
    let (edges, _, _) = d.complete_edges(TOL)?;
    for (&(a, b), (_, op)) in &edges {
        if a > b {
            continue;
        }
        let _ = writeln!(
            out,
            "{indent}{} -> {} [dir=none, label=\"{:.6}\"];",
            quote(&format!("{prefix}{}", d.vertices[a].id)),
            quote(&format!("{prefix}{}", d.vertices[b].id)),
            op.norm()
        );
    }
    Ok(())
}

/// Vertices on the `Λ × Λ` lattice, edges labelled by `‖D_e‖_F`.
pub fn render_diagram(d: &KrajewskiDiagram) -> Result<String> {
    let mut out = String::from("digraph krajewski {\n  node [shape=circle];\n");
    diagram_body(&mut out, d, "", "  ")?;
    out.push_str("}\n");
    Ok(out)
}

/// Bipartite graph of the inclusion with multiplicities `α_{ki}`.
pub fn render_arrow(a: &BratteliArrow) -> Result<String> {
    let mut out = String::from("digraph bratteli {\n  rankdir=BT;\n");
    out.push_str("  { rank=same;");
    for (i, &n) in a.source().dims().iter().enumerate() {
        let _ = write!(out, " \"A{}\" [label=\"{}\"];", i + 1, summand(n));
    }
    out.push_str(" }\n  { rank=same;");
    for (k, &n) in a.target().dims().iter().enumerate() {
        let label = match a.n0()[k] {
            0 => summand(n),
            z => format!("{} (n0={z})", summand(n)),
        };
        let _ = write!(out, " \"B{}\" [label={}];", k + 1, quote(&label));
    }
    out.push_str(" }\n");
    for k in 0..a.target().len() {
        for i in 0..a.source().len() {
            let m = a.alpha(k, i);
            if m > 0 {
                let _ = writeln!(out, "  \"A{}\" -> \"B{}\" [label=\"{m}\"];", i + 1, k + 1);
            }
        }
    }
    out.push_str("}\n");
    Ok(out)
}

/// Both diagrams side by side with green arrows `v → w` labelled `‖u(v,w)‖_F`.
pub fn render_lift(l: &DiagramLift) -> Result<String> {
    l.check()?;
    let mut out = String::from("digraph lift {\n  node [shape=circle];\n");
    out.push_str("  subgraph cluster_source {\n    label=\"source\";\n");
    diagram_body(&mut out, &l.source, "A:", "    ")?;
    out.push_str("  }\n  subgraph cluster_target {\n    label=\"target\";\n");
    diagram_body(&mut out, &l.target, "B:", "    ")?;
    out.push_str("  }\n");
    for ((v, w), m) in &l.u {
        let _ = writeln!(
            out,
            "  {} -> {} [color=green, fontcolor=green, label=\"{:.6}\"];",
            quote(&format!("A:{v}")),
            quote(&format!("B:{w}")),
            m.norm()
        );
    }
    out.push_str("}\n");
    Ok(out)
}
