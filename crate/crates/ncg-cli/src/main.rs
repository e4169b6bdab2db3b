//! `ncg`: command line front end over ncg-core bundles.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ncg_core::action::{
    bosonic_lagrangian, compare_actions, spectral_action, Comparison, CutoffFunction, GaugeConfiguration,
};
use ncg_core::algebra::AlgebraElement;
use ncg_core::differential::{pushforward, UniversalOneForm};
use ncg_core::io::{load_bundle, render_arrow, render_diagram, render_lift, save_bundle, Bundle, LiftEntry};
use ncg_core::krajewski::{classify, detect_ko, realize_with_tol, verify_axioms_seeded, RealSpectralTriple};
use ncg_core::lifting::{
    bimodule_residual, build_phi_h, compat_check, diagonalize_bases, j_compat_check, normalize,
    real_grading_check, sigma_with_tol, CompatReport,
};
use ncg_core::{sample, NcgError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "ncg", version, about = "Finite spectral triples, Krajewski diagrams and Bratteli lifts")]
struct Cli {
    /// Numerical tolerance for every check.
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol: f64,
    /// Seed for randomized steps.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
    Dot,
}

#[derive(Subcommand)]
enum Command {
    /// Load a bundle and validate its diagrams and lifts.
    Validate { bundle: PathBuf },
    /// Realize a diagram as a spectral triple.
    Realize {
        bundle: PathBuf,
        diagram: String,
        /// Write the bundle with the triple added (under the diagram's name).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the axioms of a triple (or of a realized diagram).
    Axioms { bundle: PathBuf, name: String },
    /// Recover a diagram from a triple.
    Classify {
        bundle: PathBuf,
        triple: String,
        /// Write the bundle with the diagram added (under the triple's name).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build phi_H and check the real structure and grading of a lift.
    LiftCheck { bundle: PathBuf, lift: String },
    /// Scalar products sigma of a lift, fiber by fiber.
    Sigma { bundle: PathBuf, lift: String },
    /// Diagonalize and normalize a lift.
    Normalize {
        bundle: PathBuf,
        lift: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// phi-compatibility of D, J and gamma along a lift.
    Compat {
        bundle: PathBuf,
        lift: String,
        #[command(flatten)]
        sides: Sides,
    },
    /// Spectral action and bosonic Lagrangian on one triple.
    Action {
        bundle: PathBuf,
        name: String,
        #[arg(long)]
        form: Option<String>,
        #[arg(long)]
        config: Option<String>,
        #[command(flatten)]
        cutoff: Cutoff,
    },
    /// Compare actions along a normalized lift.
    Compare {
        bundle: PathBuf,
        lift: String,
        #[command(flatten)]
        sides: Sides,
        #[arg(long)]
        form: Option<String>,
        /// Target form; defaults to the pushforward of --form.
        #[arg(long)]
        form_b: Option<String>,
        #[arg(long)]
        config_a: Option<String>,
        #[arg(long)]
        config_b: Option<String>,
        /// Include a sampled pair of compatible fermions.
        #[arg(long)]
        fermions: bool,
        #[command(flatten)]
        cutoff: Cutoff,
    },
    /// DOT for a diagram, arrow or lift.
    Render { bundle: PathBuf, kind: Item, name: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum Item {
    Diagram,
    Arrow,
    Lift,
}

#[derive(Args)]
struct Sides {
    /// Source triple; defaults to the realized source diagram.
    #[arg(long)]
    triple_a: Option<String>,
    /// Target triple; defaults to the realized target diagram.
    #[arg(long)]
    triple_b: Option<String>,
}

#[derive(Args)]
struct Cutoff {
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Width of the Gaussian cutoff.
    #[arg(long, default_value_t = 1.0)]
    width: f64,
}

impl Cutoff {
    fn function(&self) -> CutoffFunction {
        CutoffFunction::Gaussian { width: self.width }
    }
}

/// Result of a command: report, text rendering and whether checks passed.
struct Outcome {
    json: Value,
    text: String,
    ok: bool,
}

enum Failure {
    Load(NcgError),
    Run(NcgError),
    Usage(String),
}

impl From<NcgError> for Failure {
    fn from(e: NcgError) -> Self {
        Failure::Run(e)
    }
}

type Run<T> = Result<T, Failure>;

fn load(path: &PathBuf) -> Run<Bundle> {
    load_bundle(path).map_err(Failure::Load)
}

fn save(bundle: &Bundle, path: &PathBuf) -> Run<()> {
    save_bundle(bundle, path).map_err(Failure::Load)
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

fn compat_line(name: &str, r: &CompatReport) -> String {
    format!(
        "{name}: weak={} strong={} residual={:.3e} leak={:.3e} tnic=({:.3e}, {:.3e})\n",
        r.weak, r.strong, r.weak_residual, r.leak, r.phi_perp, r.perp_phi
    )
}

/// A named triple, or the realization of a diagram of that name.
fn triple_or_realize(b: &Bundle, name: &str, tol: f64) -> Run<RealSpectralTriple> {
    if let Ok(t) = b.triple(name) {
        return Ok(t.clone());
    }
    Ok(realize_with_tol(b.diagram(name)?, tol)?)
}

fn sides(b: &Bundle, s: &Sides, lift: &ncg_core::lifting::DiagramLift, tol: f64) -> Run<(RealSpectralTriple, RealSpectralTriple)> {
    let ta = match &s.triple_a {
        Some(n) => b.triple(n)?.clone(),
        None => realize_with_tol(&lift.source, tol)?,
    };
    let tb = match &s.triple_b {
        Some(n) => b.triple(n)?.clone(),
        None => realize_with_tol(&lift.target, tol)?,
    };
    Ok((ta, tb))
}

fn validate(b: &Bundle, tol: f64) -> Run<Outcome> {
    let mut text = String::new();
    let mut ok = true;
    let mut diagrams = serde_json::Map::new();
    for (name, d) in &b.diagrams {
        let r = d.validate_with_tol(tol);
        ok &= r.ok();
        let _ = writeln!(text, "diagram {name}: {}", if r.ok() { "ok" } else { "FAILED" });
        for c in r.failed() {
            let _ = writeln!(text, "  {}: {}", c.name, c.failures.join("; "));
        }
        for w in &r.warnings {
            let _ = writeln!(text, "  warning: {w}");
        }
        diagrams.insert(name.clone(), to_value(&r));
    }
    let mut lifts = serde_json::Map::new();
    for name in b.lifts.keys() {
        let l = b.lift(name)?;
        let (rel, rel_w) = ncg_core::lifting::relation_witnesses(&l, tol)?;
        let grading = ncg_core::lifting::grading_witnesses(&l, tol);
        let good = rel_w.is_empty() && grading.is_empty();
        ok &= good;
        let _ = writeln!(text, "lift {name}: {} (relation residual {rel:.3e})", if good { "ok" } else { "FAILED" });
        for w in rel_w.iter().chain(&grading) {
            let _ = writeln!(text, "  {w}");
        }
        lifts.insert(name.clone(), json!({"relation_residual": rel, "relation_witnesses": rel_w, "grading_witnesses": grading}));
    }
    Ok(Outcome { json: json!({"ok": ok, "diagrams": diagrams, "lifts": lifts}), text, ok })
}

fn run(cli: &Cli) -> Run<Outcome> {
    let tol = cli.tol;
    if cli.format == Format::Dot && !matches!(cli.command, Command::Render { .. }) {
        return Err(Failure::Usage("--format dot is only available for `render`".into()));
    }
    match &cli.command {
        Command::Validate { bundle } => validate(&load(bundle)?, tol),
        Command::Realize { bundle, diagram, out } => {
            let mut b = load(bundle)?;
            let t = realize_with_tol(b.diagram(diagram)?, tol)?;
            let text = format!("realized `{diagram}`: dimension {}, KO-dimension {}\n", t.dim(), t.ko.d());
            let json = to_value(&t);
            if let Some(path) = out {
                b.triples.insert(diagram.clone(), t);
                save(&b, path)?;
            }
            Ok(Outcome { json, text, ok: true })
        }
        Command::Axioms { bundle, name } => {
            let b = load(bundle)?;
            let t = triple_or_realize(&b, name, tol)?;
            let r = verify_axioms_seeded(&t, tol, cli.seed);
            let ko = detect_ko(&t, tol);
            let mut text = String::new();
            for e in &r.entries {
                let _ = writeln!(text, "{:<40} {:.3e} {}", e.name, e.residual, if e.passed { "ok" } else { "FAILED" });
            }
            let _ = writeln!(text, "detected KO-dimensions: {ko:?}");
            Ok(Outcome { json: json!({"report": r, "ok": r.ok(), "detected_ko": ko}), text, ok: r.ok() })
        }
        Command::Classify { bundle, triple, out } => {
            let mut b = load(bundle)?;
            let (d, w) = classify(b.triple(triple)?, tol)?;
            let text = format!(
                "classified `{triple}`: {} vertices, {} edges, multiplicities {:?}\n",
                d.vertices.len(),
                d.edges.len(),
                d.multiplicities()
            );
            let json = json!({"diagram": d, "w": w});
            if let Some(path) = out {
                b.diagrams.insert(triple.clone(), d);
                save(&b, path)?;
            }
            Ok(Outcome { json, text, ok: true })
        }
        Command::LiftCheck { bundle, lift } => {
            let b = load(bundle)?;
            let l = b.lift(lift)?;
            let ta = realize_with_tol(&l.source, tol)?;
            let tb = realize_with_tol(&l.target, tol)?;
            let phi = build_phi_h(&l)?;
            let bimodule = bimodule_residual(&l, &phi)?;
            let r = real_grading_check(&l, &ta, &tb, tol)?;
            let ok = r.ok() && bimodule <= tol;
            let mut text = format!(
                "phi_H: {}x{}, isometry defect {:.3e}, bimodule residual {bimodule:.3e}\n",
                phi.matrix.rows(),
                phi.matrix.cols(),
                phi.isometry_defect()
            );
            let _ = writeln!(text, "relation residual {:.3e}", r.relation_residual);
            for w in r.relation_witnesses.iter().chain(&r.grading_witnesses) {
                let _ = writeln!(text, "  {w}");
            }
            let _ = writeln!(
                text,
                "KO: source {} target {} detected {:?} / {:?} equal={}",
                r.source_ko.d(),
                r.target_ko.d(),
                r.detected_source,
                r.detected_target,
                r.ko_equal
            );
            text.push_str(&compat_line("J", &r.j));
            if let Some(g) = &r.gamma {
                text.push_str(&compat_line("gamma", g));
            }
            let _ = writeln!(text, "{}", if ok { "ok" } else { "FAILED" });
            Ok(Outcome {
                json: json!({"ok": ok, "isometry_defect": phi.isometry_defect(), "bimodule_residual": bimodule, "report": r}),
                text,
                ok,
            })
        }
        Command::Sigma { bundle, lift } => {
            let b = load(bundle)?;
            let s = sigma_with_tol(&b.lift(lift)?, tol);
            let mut text = String::new();
            for f in &s.fibers {
                let _ = writeln!(
                    text,
                    "fiber ({},{}): vertices {:?} eigenvalues {:?} off-diagonal {:.3e}",
                    f.i + 1,
                    f.j + 1,
                    f.vertices,
                    f.eigenvalues,
                    f.off_diagonal()
                );
            }
            if !s.non_injective.is_empty() {
                let _ = writeln!(text, "not one-to-one on {:?}", s.non_injective);
            }
            Ok(Outcome { json: to_value(&s), text, ok: true })
        }
        Command::Normalize { bundle, lift, out } => {
            let mut b = load(bundle)?;
            let l = normalize(&diagonalize_bases(&b.lift(lift)?, tol)?, tol)?;
            let phi = build_phi_h(&l)?;
            let text = format!("normalized `{lift}`: isometry defect {:.3e}\n", phi.isometry_defect());
            if let Some(path) = out {
                let entry = b.lifts[lift].clone();
                let mut source = entry.source.clone();
                if b.diagram(&source)? != &l.source {
                    // the source bases were rotated
                    source = format!("{lift}-source");
                    b.diagrams.insert(source.clone(), l.source.clone());
                }
                b.lifts.insert(lift.clone(), LiftEntry::from_lift(&entry.arrow, &source, &entry.target, &l));
                save(&b, path)?;
            }
            Ok(Outcome { json: json!({"isometry_defect": phi.isometry_defect(), "lift": l}), text, ok: true })
        }
        Command::Compat { bundle, lift, sides: s } => {
            let b = load(bundle)?;
            let l = b.lift(lift)?;
            let (ta, tb) = sides(&b, s, &l, tol)?;
            let phi = build_phi_h(&l)?;
            let d = compat_check(&ta.d, &tb.d, &phi, tol)?;
            let j = j_compat_check(&ta.k, &tb.k, &phi, tol)?;
            let g = match (&ta.gamma, &tb.gamma) {
                (Some(ga), Some(gb)) => Some(compat_check(ga, gb, &phi, tol)?),
                _ => None,
            };
            let ok = d.weak && j.strong && g.as_ref().is_none_or(|g| g.strong);
            let mut text = compat_line("D", &d) + &compat_line("J", &j);
            if let Some(g) = &g {
                text.push_str(&compat_line("gamma", g));
            }
            Ok(Outcome { json: json!({"ok": ok, "d": d, "j": j, "gamma": g}), text, ok })
        }
        Command::Action { bundle, name, form, config, cutoff } => {
            let b = load(bundle)?;
            let t = triple_or_realize(&b, name, tol)?;
            let omega = match form {
                Some(f) => b.form(f)?.clone(),
                None => UniversalOneForm::default(),
            };
            let f = cutoff.function();
            let s = spectral_action(&t, &omega, &f, cutoff.lambda, tol)?;
            let mut text = format!("S_b = {s:.12}\n");
            let mut json = json!({"spectral_action": s});
            if let Some(c) = config {
                let l = bosonic_lagrangian(b.configuration(c)?, &f, cutoff.lambda, tol)?;
                for term in &l.terms {
                    let _ = writeln!(text, "{:<8} {:.12}", term.name, term.value);
                }
                let _ = writeln!(text, "total    {:.12}", l.total);
                json["lagrangian"] = to_value(&l);
            }
            Ok(Outcome { json, text, ok: true })
        }
        Command::Compare { bundle, lift, sides: s, form, form_b, config_a, config_b, fermions, cutoff } => {
            let b = load(bundle)?;
            let l = b.lift(lift)?;
            let (ta, tb) = sides(&b, s, &l, tol)?;
            let phi = build_phi_h(&l)?;
            let omega_a = match form {
                Some(f) => b.form(f)?.clone(),
                None => UniversalOneForm::default(),
            };
            let omega_b = match form_b {
                Some(f) => b.form(f)?.clone(),
                None => pushforward(&omega_a, &l.arrow)?,
            };
            let cfg = |t: &RealSpectralTriple, w: &UniversalOneForm, name: &Option<String>| -> Run<GaugeConfiguration> {
                match name {
                    Some(n) => Ok(b.configuration(n)?.clone()),
                    None => {
                        let zero = AlgebraElement::zero(&t.profile);
                        Ok(GaugeConfiguration::from_form(t, w, &std::array::from_fn(|_| zero.clone()), tol)?)
                    }
                }
            };
            let cfg_a = cfg(&ta, &omega_a, config_a)?;
            let cfg_b = cfg(&tb, &omega_b, config_b)?;
            let psi = fermions.then(|| sample::compatible_fermions(&mut ChaCha8Rng::seed_from_u64(cli.seed), &phi, &ta, &tb));
            let f = cutoff.function();
            let c = Comparison {
                lift: &l,
                phi: &phi,
                ta: &ta,
                tb: &tb,
                omega_a: &omega_a,
                omega_b: &omega_b,
                cfg_a: &cfg_a,
                cfg_b: &cfg_b,
                fermions: psi.as_ref().map(|(a, b)| (a, b)),
                f: &f,
                lambda: cutoff.lambda,
            };
            let r = compare_actions(&c, tol)?;
            let mut text = format!("{:<12} {:>18} {:>18} {:>18} {:>18}\n", "term", "full", "inherited", "A-side", "tnic");
            for rec in &r.records {
                let _ = writeln!(
                    text,
                    "{:<12} {:>18.10e} {:>18.10e} {:>18.10e} {:>18.10e}",
                    rec.term, rec.full, rec.inherited, rec.a_side, rec.tnic
                );
            }
            let worst = r.max_lemma_residual();
            let scale = r.records.iter().map(|x| x.a_side.abs()).fold(1.0, f64::max);
            let ok = worst <= tol * scale;
            let _ = writeln!(text, "max |inherited - A-side| = {worst:.3e}");
            Ok(Outcome { json: json!({"ok": ok, "max_lemma_residual": worst, "records": r.records}), text, ok })
        }
        Command::Render { bundle, kind, name } => {
            let b = load(bundle)?;
            let dot = match kind {
                Item::Diagram => render_diagram(b.diagram(name)?)?,
                Item::Arrow => render_arrow(b.arrow(name)?)?,
                Item::Lift => render_lift(&b.lift(name)?)?,
            };
            Ok(Outcome { json: json!({"dot": dot}), text: dot, ok: true })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            if cli.format == Format::Json {
                println!("{}", serde_json::to_string_pretty(&out.json).expect("json"));
            } else {
                print!("{}", out.text);
            }
            if out.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Load(e)) | Err(Failure::Run(e @ (NcgError::Io(_) | NcgError::Parse { .. } | NcgError::Reference(_)))) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            if cli.format == Format::Json {
                println!("{}", json!({"ok": false, "error": e.to_string()}));
            }
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
