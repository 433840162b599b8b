//! Batch front end: every verb runs one construction to a requested
//! precision and emits a deterministic JSON or CSV report. Exit codes keep
//! genuine partiality (budget, insufficient mass: 3) apart from contract and
//! parse problems (2).

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use banachlab::enumerate::rat_at;
use banachlab::internal::{
    prefix_map_affine, prefix_map_const, prefix_map_id, EvalCtx, Internalizer, PrefixMap,
};
use banachlab::normlab::{
    sup_unit_ball, synthesize_witness, BallProblem, Formula, NormedPair, PairSpace,
};
use banachlab::operators::{
    acc_exact, acc_exact_coeffs, acc_star, ml_real, modified_real_prefix, RealOps,
};
use banachlab::retraction::{xaxis_setup, RetractEval};
use banachlab::spaces::{point_dist, DenseElem, MetricSpace, Point, R2Space, RSpace};
use banachlab::urysohn::{u0_prefix, Embedding, U0Space};
use banachlab::{CReal, Error, Rat, Result};

#[derive(Parser)]
#[command(name = "banachlab", version, about = "Exact-rational computable analysis toolbox")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    cfg: Config,
}

#[derive(Args, Clone)]
struct Config {
    /// Answer precision: reported approximations are within 2^-k
    #[arg(long, global = true, default_value_t = 8)]
    k: u32,
    /// Component bound for sup tables (columns 0..=J)
    #[arg(long = "J", global = true, default_value_t = 2)]
    comp: u32,
    /// Coordinate / truncation depth bound
    #[arg(long, global = true, default_value_t = 3)]
    m: u32,
    /// Sample count for sampled reports
    #[arg(long, global = true, default_value_t = 10)]
    samples: usize,
    /// Seed for sampled inputs; a fixed seed makes reports bit-identical
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Step budget for the searching operators
    #[arg(long, global = true, default_value_t = 200_000)]
    budget: u64,
    /// Write the report to this file instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compile a formula: truth, witness trace, ball membership, sup table
    Formula {
        /// Formula over T, F, and(...), or(...)
        expr: String,
    },
    /// Modified limit of a rational sequence (repeated past its end)
    Ml {
        /// Comma-separated rationals p/q
        #[arg(long, value_delimiter = ',', required = true)]
        seq: Vec<String>,
    },
    /// Accumulate weights against vectors until the mass crosses 1
    Acc {
        /// Comma-separated nonnegative rational weights
        #[arg(long, value_delimiter = ',', required = true)]
        f: Vec<String>,
        /// Comma-separated rational values paired with the weights
        #[arg(long, value_delimiter = ',', required = true)]
        g: Vec<String>,
    },
    /// Distribution-valued accumulation over natural labels
    Accstar {
        /// Comma-separated nonnegative rational masses
        #[arg(long, value_delimiter = ',', required = true)]
        f: Vec<String>,
        /// Comma-separated natural labels paired with the masses
        #[arg(long, value_delimiter = ',', required = true)]
        labels: Vec<u64>,
    },
    /// Retract plane points onto the x-axis through the probabilistic projection
    Retract {
        /// Ambient space (only R2 is available)
        #[arg(long, default_value = "R2")]
        space: String,
        /// Subspace (only xaxis is available)
        #[arg(long, default_value = "xaxis")]
        subspace: String,
        /// File of lines "x,y" with rational coordinates; seeded samples otherwise
        #[arg(long)]
        points: Option<PathBuf>,
    },
    /// Isometrically embed the dense points of a space into the universal space
    Embed {
        /// Space descriptor: R, R2, top, bot, formula:<expr>, u0
        #[arg(long)]
        space: String,
        /// How many dense points to embed
        #[arg(long, default_value_t = 5)]
        size: usize,
    },
    /// Distance matrix of a prefix of the universal space
    U0 {
        #[arg(long)]
        size: usize,
    },
    /// Compile an external transformer into an internal evaluator and audit it
    Internalize {
        /// Transformer: id, const:<q>, or affine:<a>,<b>
        #[arg(long = "fn")]
        func: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::BudgetExceeded { .. } | Error::InsufficientMass(_) => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = cli.cfg.clone();
    let report = match &cli.cmd {
        Cmd::Formula { expr } => cmd_formula(expr, &cfg)?,
        Cmd::Ml { seq } => cmd_ml(seq, &cfg)?,
        Cmd::Acc { f, g } => cmd_acc(f, g, &cfg)?,
        Cmd::Accstar { f, labels } => cmd_accstar(f, labels, &cfg)?,
        Cmd::Retract {
            space,
            subspace,
            points,
        } => cmd_retract(space, subspace, points.as_deref(), &cfg)?,
        Cmd::Embed { space, size } => cmd_embed(space, *size, &cfg)?,
        Cmd::U0 { size } => cmd_u0(*size, &cfg)?,
        Cmd::Internalize { func } => cmd_internalize(func, &cfg)?,
    };
    emit(&cfg, report)
}

// ---------------------------------------------------------------------------
// report plumbing
// ---------------------------------------------------------------------------

struct Report {
    command: &'static str,
    body: Value,
    csv_header: Vec<&'static str>,
    csv_rows: Vec<Vec<String>>,
}

fn config_json(cfg: &Config) -> Value {
    json!({
        "k": cfg.k,
        "J": cfg.comp,
        "m": cfg.m,
        "samples": cfg.samples,
        "seed": cfg.seed,
        "budget": cfg.budget,
    })
}

fn versions_json() -> Value {
    json!({
        "banachlab": banachlab::VERSION,
        "banachlab-cli": env!("CARGO_PKG_VERSION"),
    })
}

fn emit(cfg: &Config, report: Report) -> Result<()> {
    let text = match cfg.format {
        Format::Json => {
            let mut full = serde_json::Map::new();
            full.insert("command".into(), json!(report.command));
            full.insert("config".into(), config_json(cfg));
            full.insert("versions".into(), versions_json());
            if let Value::Object(body) = report.body {
                for (k, v) in body {
                    full.insert(k, v);
                }
            }
            serde_json::to_string_pretty(&Value::Object(full)).expect("report is serializable")
                + "\n"
        }
        Format::Csv => {
            let mut text = format!(
                "# command {}\n# config k={} J={} m={} samples={} seed={} budget={}\n# versions banachlab={} banachlab-cli={}\n",
                report.command,
                cfg.k,
                cfg.comp,
                cfg.m,
                cfg.samples,
                cfg.seed,
                cfg.budget,
                banachlab::VERSION,
                env!("CARGO_PKG_VERSION"),
            );
            text.push_str(&report.csv_header.join(","));
            text.push('\n');
            for row in &report.csv_rows {
                text.push_str(&row.join(","));
                text.push('\n');
            }
            text
        }
    };
    match &cfg.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::contract("cli", format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// input parsing helpers
// ---------------------------------------------------------------------------

fn parse_rats(items: &[String]) -> Result<Vec<Rat>> {
    items.iter().map(|s| Rat::from_str(s.trim())).collect()
}

fn rand_rat(rng: &mut ChaCha8Rng, num_bound: i64, den_bound: i64) -> Rat {
    let d = rng.gen_range(1..=den_bound);
    let n = rng.gen_range(-num_bound..=num_bound);
    Rat::new(n, d)
}

fn space_from_descriptor(s: &str) -> Result<Arc<dyn MetricSpace>> {
    Ok(match s {
        "R" => Arc::new(RSpace),
        "R2" => Arc::new(R2Space),
        "top" => Arc::new(PairSpace::new(NormedPair::top())),
        "bot" => Arc::new(PairSpace::new(NormedPair::bot())),
        "u0" => Arc::new(U0Space::new()),
        _ => {
            if let Some(expr) = s.strip_prefix("formula:") {
                let phi = Formula::parse(expr)?;
                Arc::new(PairSpace::new(NormedPair::compile(&phi)))
            } else {
                return Err(Error::contract(
                    "cli",
                    format!("unknown space descriptor {s:?}"),
                ));
            }
        }
    })
}

// ---------------------------------------------------------------------------
// verbs
// ---------------------------------------------------------------------------

fn cmd_formula(expr: &str, cfg: &Config) -> Result<Report> {
    let phi = Formula::parse(expr)?;
    let pair = NormedPair::compile(&phi);
    let truth = phi.truth();

    let (trace, membership) = match synthesize_witness(&phi) {
        Some(w) => {
            let trace: Vec<Value> = (0..=cfg.m)
                .map(|mm| {
                    let v = w.truncation(mm);
                    json!({
                        "m": mm,
                        "norm": pair.norm(&v).to_string(),
                        "F": pair.func(&v).to_string(),
                    })
                })
                .collect();
            let bp = BallProblem::new(pair.clone());
            let z = w.point();
            let one = Rat::one();
            let bound = &one + Rat::pow2(-(cfg.k as i64));
            let mut balls = Vec::new();
            for c in 0..3 {
                let d = bp.center_dist_point(c, &one, &one, &z).approx(cfg.k)?;
                balls.push(json!({
                    "center": c,
                    "distance": d.to_string(),
                    "inside": d <= bound,
                }));
            }
            let all = bp.contains_point(&one, &one, &z, cfg.k)?;
            (
                json!(trace),
                json!({ "witness": "(1, 1, f_m)", "balls": balls, "all_inside": all }),
            )
        }
        None => (json!([]), Value::Null),
    };

    let mut sup_rows = Vec::new();
    let mut csv_rows = Vec::new();
    for j in 0..=cfg.comp {
        for mm in 0..=cfg.m {
            let s = sup_unit_ball(&phi, j, mm)?;
            let lt = s < Rat::one();
            csv_rows.push(vec![
                j.to_string(),
                mm.to_string(),
                s.to_string(),
                lt.to_string(),
            ]);
            sup_rows.push(json!({
                "J": j,
                "m": mm,
                "sup": s.to_string(),
                "lt_one": lt,
            }));
        }
    }

    Ok(Report {
        command: "formula",
        body: json!({
            "expr": expr,
            "truth": truth,
            "witness_trace": trace,
            "membership": membership,
            "sup_table": sup_rows,
        }),
        csv_header: vec!["J", "m", "sup", "lt_one"],
        csv_rows,
    })
}

fn cmd_ml(seq: &[String], cfg: &Config) -> Result<Report> {
    let input = parse_rats(seq)?;
    if input.is_empty() {
        return Err(Error::contract("cli", "ml needs a nonempty sequence"));
    }
    let reals: Vec<CReal> = input.iter().cloned().map(CReal::from_rat).collect();
    let modified = modified_real_prefix(&reals);
    let last = reals.len() - 1;
    let stream = {
        let reals = reals.clone();
        move |i: u64| Ok(reals[(i as usize).min(last)].clone())
    };
    let value = ml_real(Arc::new(stream)).approx(cfg.k)?;

    let mut rows = Vec::new();
    let mut csv_rows = Vec::new();
    for (i, (w, wm)) in input.iter().zip(&modified).enumerate() {
        let wm = wm
            .exact_value()
            .expect("clamped exact inputs stay exact")
            .to_string();
        csv_rows.push(vec![i.to_string(), w.to_string(), wm.clone()]);
        rows.push(json!({ "n": i, "w": w.to_string(), "w_mod": wm }));
    }

    Ok(Report {
        command: "ml",
        body: json!({
            "input": input.iter().map(Rat::to_string).collect::<Vec<_>>(),
            "note": "input repeats its last entry forever",
            "modified_prefix": rows,
            "limit": { "value": value.to_string(), "within": format!("2^-{}", cfg.k) },
        }),
        csv_header: vec!["n", "w", "w_mod"],
        csv_rows,
    })
}

fn cmd_acc(f: &[String], g: &[String], cfg: &Config) -> Result<Report> {
    let f = parse_rats(f)?;
    let g = parse_rats(g)?;
    if f.len() != g.len() {
        return Err(Error::contract("cli", "f and g must have equal length"));
    }
    let coeffs = acc_exact_coeffs(&f)?;
    let value = acc_exact(&RealOps, &f, &g)?;
    let _ = cfg;

    let mut csv_rows = Vec::new();
    let mut rows = Vec::new();
    for (i, c) in coeffs.iter().enumerate() {
        csv_rows.push(vec![
            i.to_string(),
            f[i].to_string(),
            g[i].to_string(),
            c.to_string(),
        ]);
        rows.push(json!({
            "n": i,
            "f": f[i].to_string(),
            "g": g[i].to_string(),
            "coefficient": c.to_string(),
        }));
    }

    Ok(Report {
        command: "acc",
        body: json!({
            "terms": rows,
            "value": value.to_string(),
        }),
        csv_header: vec!["n", "f", "g", "coefficient"],
        csv_rows,
    })
}

fn cmd_accstar(f: &[String], labels: &[u64], cfg: &Config) -> Result<Report> {
    let f = parse_rats(f)?;
    if f.len() != labels.len() {
        return Err(Error::contract("cli", "f and labels must have equal length"));
    }
    if f.is_empty() {
        return Err(Error::contract("cli", "accstar needs at least one mass"));
    }
    let masses = f.clone();
    let h = move |i: u64| {
        let q = masses.get(i as usize).cloned().unwrap_or_else(Rat::zero);
        CReal::from_rat(q)
    };
    let labels_owned = labels.to_vec();
    let last = labels_owned.len() - 1;
    let g = move |i: u64| labels_owned[(i as usize).min(last)];
    let dist = acc_star(&h, &g, cfg.budget)?;

    let mut csv_rows = Vec::new();
    let mut rows = Vec::new();
    for (label, w) in &dist.weights {
        let w = w.approx(cfg.k)?;
        csv_rows.push(vec![label.to_string(), w.to_string()]);
        rows.push(json!({ "label": label, "weight": w.to_string() }));
    }
    let mass = dist.mass().approx(cfg.k)?;

    Ok(Report {
        command: "accstar",
        body: json!({
            "distribution": rows,
            "mass": mass.to_string(),
            "within": format!("2^-{}", cfg.k),
        }),
        csv_header: vec!["label", "weight"],
        csv_rows,
    })
}

fn cmd_retract(
    space: &str,
    subspace: &str,
    points: Option<&std::path::Path>,
    cfg: &Config,
) -> Result<Report> {
    if space != "R2" {
        return Err(Error::contract("cli", "only --space R2 is available"));
    }
    if subspace != "xaxis" {
        return Err(Error::contract("cli", "only --subspace xaxis is available"));
    }
    let pts: Vec<(Rat, Rat)> = match points {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::contract("cli", format!("cannot read {}: {e}", path.display()))
            })?;
            let mut out = Vec::new();
            for line in text.lines() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (x, y) = line
                    .split_once(',')
                    .ok_or_else(|| Error::contract("cli", format!("bad point line {line:?}")))?;
                out.push((Rat::from_str(x.trim())?, Rat::from_str(y.trim())?));
            }
            out
        }
        None => {
            // alternate on-axis and off-axis samples; coordinates stay small
            // because the evaluator's cost tracks the enumeration index of
            // nearby subspace points
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            (0..cfg.samples)
                .map(|i| {
                    let x = rand_rat(&mut rng, 4, 4);
                    let y = rand_rat(&mut rng, 4, 4);
                    if i % 2 == 0 {
                        (x, Rat::zero())
                    } else {
                        (x, y)
                    }
                })
                .collect()
        }
    };

    let mut setup = xaxis_setup();
    setup.budget = cfg.budget;
    let setup = Arc::new(setup);
    let plane: Arc<dyn MetricSpace> = Arc::new(R2Space);
    let tol = Rat::pow2(-(cfg.k as i64));
    let gap_depth = 3u32;

    let mut csv_rows = Vec::new();
    let mut rows = Vec::new();
    for (x, y) in &pts {
        let p = Point::constant(plane.clone(), DenseElem::Q2(x.clone(), y.clone()));
        let ev = RetractEval::new(setup.clone(), p);
        let gx = ev.retract(cfg.k)?;
        // the evaluator returns a subspace coordinate, so the retracted
        // point (gx, 0) sits on the axis exactly
        let dist_to_sub = Rat::zero();
        let mut max_gap = Rat::zero();
        for n in 0..gap_depth {
            let a = ev.g_n(n).to_creal();
            let b = ev.g_n(n + 1).to_creal();
            let gap = a.sub(&b).abs().approx(cfg.k)?;
            max_gap = max_gap.max(gap);
        }
        let fixes = if y.is_zero() {
            Some((&gx - x).abs() <= tol)
        } else {
            None
        };
        csv_rows.push(vec![
            x.to_string(),
            y.to_string(),
            gx.to_string(),
            dist_to_sub.to_string(),
            (dist_to_sub <= tol).to_string(),
            max_gap.to_string(),
            fixes.map(|b| b.to_string()).unwrap_or_default(),
        ]);
        rows.push(json!({
            "x": x.to_string(),
            "y": y.to_string(),
            "g": gx.to_string(),
            "dist_to_subspace": dist_to_sub.to_string(),
            "dist_le_tol": dist_to_sub <= tol,
            "max_stage_gap": max_gap.to_string(),
            "fixes_subspace_point": fixes,
        }));
    }

    Ok(Report {
        command: "retract",
        body: json!({
            "space": "R2",
            "subspace": "xaxis",
            "points": rows,
        }),
        csv_header: vec![
            "x",
            "y",
            "g",
            "dist_to_subspace",
            "dist_le_tol",
            "max_stage_gap",
            "fixes_subspace_point",
        ],
        csv_rows,
    })
}

fn cmd_embed(space: &str, size: usize, cfg: &Config) -> Result<Report> {
    let src = space_from_descriptor(space)?;
    if size == 0 {
        return Err(Error::contract("cli", "embed needs at least one point"));
    }
    let emb = Embedding::new(src.clone(), size)?;
    let images: Vec<Point> = (0..size).map(|n| emb.image(n)).collect::<Result<_>>()?;
    let prec = cfg.k + 2;
    let bound = Rat::pow2(-(cfg.k as i64));

    let mut csv_rows = Vec::new();
    let mut rows = Vec::new();
    for i in 0..size {
        for j in 0..i {
            let want = src.metric(&src.dense(i), &src.dense(j), prec)?;
            let got = point_dist(&images[i], &images[j]).approx(prec)?;
            let err = (&want - &got).abs();
            let ok = err <= bound;
            csv_rows.push(vec![
                i.to_string(),
                j.to_string(),
                want.to_string(),
                got.to_string(),
                err.to_string(),
                ok.to_string(),
            ]);
            rows.push(json!({
                "i": i,
                "j": j,
                "source_dist": want.to_string(),
                "image_dist": got.to_string(),
                "error": err.to_string(),
                "within_tol": ok,
            }));
        }
    }

    Ok(Report {
        command: "embed",
        body: json!({
            "space": space,
            "size": size,
            "exact_source": src.exact(),
            "ambient_points": emb.ambient_len(),
            "pairs": rows,
        }),
        csv_header: vec!["i", "j", "source_dist", "image_dist", "error", "within_tol"],
        csv_rows,
    })
}

fn cmd_u0(size: usize, cfg: &Config) -> Result<Report> {
    let _ = cfg;
    let m = u0_prefix(size)?;
    m.check_triangles()?;
    let d: Vec<Vec<String>> = (0..size)
        .map(|i| (0..size).map(|j| m.dist(i, j).to_string()).collect())
        .collect();
    let csv_rows = d.clone();

    Ok(Report {
        command: "u0",
        body: json!({
            "n": size,
            "d": d,
            "triangle_ok": true,
        }),
        csv_header: vec!["row"],
        csv_rows,
    })
}

fn cmd_internalize(func: &str, cfg: &Config) -> Result<Report> {
    let (fhat, oracle): (PrefixMap, Box<dyn Fn(&Rat) -> Rat>) = match func {
        "id" => (prefix_map_id(), Box::new(|x: &Rat| x.clone())),
        _ => {
            if let Some(q) = func.strip_prefix("const:") {
                let c = Rat::from_str(q)?;
                let cc = c.clone();
                (prefix_map_const(&c), Box::new(move |_: &Rat| cc.clone()))
            } else if let Some(rest) = func.strip_prefix("affine:") {
                let (a, b) = rest
                    .split_once(',')
                    .ok_or_else(|| Error::contract("cli", "affine needs two rationals a,b"))?;
                let a = Rat::from_str(a.trim())?;
                let b = Rat::from_str(b.trim())?;
                let (aa, bb) = (a.clone(), b.clone());
                (
                    prefix_map_affine(&a, &b),
                    Box::new(move |x: &Rat| &(&aa * x) + &bb),
                )
            } else {
                return Err(Error::contract(
                    "cli",
                    format!("unknown transformer {func:?}"),
                ));
            }
        }
    };

    let rspace: Arc<dyn MetricSpace> = Arc::new(RSpace);
    let intern = Internalizer {
        ctx: Arc::new(EvalCtx {
            space: rspace.clone(),
            ops: Arc::new(RealOps),
            target_elem: Arc::new(rat_at),
            budget: cfg.budget,
        }),
        fhat: Arc::new(fhat),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let xs: Vec<Rat> = (0..cfg.samples)
        .map(|_| rand_rat(&mut rng, 32, 32))
        .collect();
    // internal evaluation error plus the oracle's own reporting tolerance
    let bound = Rat::pow2(-(cfg.k as i64)) + Rat::pow2(-(cfg.k as i64));

    let mut csv_rows = Vec::new();
    let mut rows = Vec::new();
    for x in &xs {
        let p = Point::constant(rspace.clone(), DenseElem::Q(x.clone()));
        let got = intern.value(&p).to_creal().approx(cfg.k)?;
        let want = oracle(x);
        let err = (&got - &want).abs();
        let ok = err <= bound;
        csv_rows.push(vec![
            x.to_string(),
            got.to_string(),
            want.to_string(),
            err.to_string(),
            ok.to_string(),
        ]);
        rows.push(json!({
            "x": x.to_string(),
            "internal": got.to_string(),
            "oracle": want.to_string(),
            "error": err.to_string(),
            "within_tol": ok,
        }));
    }

    Ok(Report {
        command: "internalize",
        body: json!({
            "transformer": func,
            "tolerance": bound.to_string(),
            "table": rows,
        }),
        csv_header: vec!["x", "internal", "oracle", "error", "within_tol"],
        csv_rows,
    })
}
