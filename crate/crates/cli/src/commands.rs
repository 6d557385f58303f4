use std::fs;
use std::path::{Path, PathBuf};

use anomaly_walk::edgespace::edge_probabilities;
use anomaly_walk::perturb::{perturbation_sweep, shifts_csv, HubLimit};
use anomaly_walk::report::{csv, fmt_sig};
use anomaly_walk::search::{
    classical_baseline, expected_classical_queries, hitting_sweep, hitting_time_fit, run_search_with,
    sweep_csv, sweep_window,
};
use anomaly_walk::stargraph::spec_value;
use anomaly_walk::{
    build_star, build_step_operator, check_unitarity, eigendecompose, fit_scaling, initial_state,
    invariant_basis, make_basis, measure_accessible, parse_spec, predicted_hitting_step, reduce_operator,
    InitialStateKind, NumericPolicy, StarGraph,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::args::{Command, Format, GraphArg, KindArg, LimitArg, OutArg, TemplateArg};

/// A failed run: `error:<category>:` line plus exit status.
#[derive(Debug)]
pub struct Failure {
    pub category: &'static str,
    pub message: String,
    pub code: u8,
}

impl Failure {
    pub fn usage(category: &'static str, message: impl Into<String>) -> Self {
        Self {
            category,
            message: message.into(),
            code: 1,
        }
    }
}

impl From<anomaly_walk::Error> for Failure {
    fn from(e: anomaly_walk::Error) -> Self {
        Self {
            category: e.category(),
            message: e.to_string(),
            code: if e.is_numerical() { 2 } else { 1 },
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

const DENSE_DUMP_CAP: usize = 5000;
const UNITARITY_TOL: f64 = 1e-12;

pub fn run(command: Command) -> Outcome {
    match command {
        Command::Check { graph, format, dump } => check(&graph, format, dump.as_deref()),
        Command::Evolve {
            graph,
            kind,
            steps,
            seed,
            out,
        } => evolve(&graph, &kind, steps, seed, &out),
        Command::Search {
            graph,
            kind,
            max_steps,
            engine,
            out,
            csv,
        } => search(&graph, &kind, max_steps, engine.into(), &out, csv.as_deref()),
        Command::Spectrum { graph, kind, out, dump } => spectrum(&graph, &kind, &out, dump.as_deref()),
        Command::Perturb {
            template,
            n_list,
            limit,
            out,
            fit_out,
        } => perturb(&template, &n_list, limit, &out, fit_out),
        Command::Sweep {
            template,
            kind,
            n_list,
            engine,
            out,
        } => sweep(&template, &kind, &n_list, engine.into(), &out),
        Command::Baseline {
            graph,
            seeds,
            seed,
            out,
        } => baseline(&graph, seeds, seed, &out),
    }
}

/// Reads a spec from a file, or takes it verbatim when it looks like JSON.
pub fn load_graph(spec: &str) -> Outcome<StarGraph> {
    if spec.trim_start().starts_with('{') {
        return parse_spec(spec).map_err(|e| {
            let mut f = Failure::from(e);
            f.message = format!("<inline spec>: {}", f.message);
            f
        });
    }
    let text = fs::read_to_string(spec).map_err(|e| Failure::usage("io", format!("{spec}: {e}")))?;
    parse_spec(&text).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{spec}: {}", f.message);
        f
    })
}

fn load_template(t: &TemplateArg) -> Outcome<StarGraph> {
    match (&t.spec, t.anomaly) {
        (Some(spec), _) => load_graph(spec),
        (None, Some(a)) => Ok(build_star(3, a.anomaly(t.phase))?),
        (None, None) => Err(Failure::usage("usage", "one of --spec or --anomaly is required")),
    }
}

fn kind_for(k: &KindArg, graph: &StarGraph) -> InitialStateKind {
    k.kind.clone().unwrap_or_else(|| InitialStateKind::default_for(graph))
}

/// Fails early when an output's directory does not exist.
fn check_parent(path: &Path) -> Outcome {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(Failure::usage(
            "io",
            format!("{}: directory {} does not exist", path.display(), dir.display()),
        )),
        _ => Ok(()),
    }
}

fn write_file(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::usage("io", format!("{}: {e}", path.display())))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

/// Writes the primary result in the requested format, to `--out` or stdout.
fn emit(out: &OutArg, default: Format, csv_text: impl FnOnce() -> String, json_value: impl FnOnce() -> Value) -> Outcome {
    let text = match out.format.unwrap_or(default) {
        Format::Csv => csv_text(),
        Format::Json => pretty(&json_value()),
    };
    match &out.out {
        Some(path) => write_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn check_outputs(paths: &[Option<&Path>]) -> Outcome {
    paths.iter().flatten().try_for_each(|p| check_parent(p))
}

fn check(graph: &GraphArg, format: Option<Format>, dump: Option<&Path>) -> Outcome {
    check_outputs(&[dump])?;
    let g = load_graph(&graph.spec)?;
    let op = build_step_operator(&g);
    let report = check_unitarity(&op, UNITARITY_TOL);
    if let Some(path) = dump {
        write_file(path, &op.to_csv(DENSE_DUMP_CAP)?)?;
    }
    match format.unwrap_or(Format::Csv) {
        Format::Json => print!(
            "{}",
            pretty(&json!({
                "graph": spec_value(&g),
                "dim": op.dim(),
                "unitary": report.passed,
                "max_deviation": report.max_deviation,
                "tolerance": UNITARITY_TOL,
            }))
        ),
        Format::Csv if report.passed => println!("dim={} unitary=pass max_dev<{UNITARITY_TOL:e}", op.dim()),
        Format::Csv => println!("dim={} unitary=fail max_dev={:.3e}", op.dim(), report.max_deviation),
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure {
            category: "numerical",
            message: format!("step operator deviates from unitarity by {:.3e}", report.max_deviation),
            code: 2,
        })
    }
}

fn evolve(graph: &GraphArg, kind: &KindArg, steps: usize, seed: u64, out: &OutArg) -> Outcome {
    check_outputs(&[out.out.as_deref()])?;
    let g = load_graph(&graph.spec)?;
    let kind = kind_for(kind, &g);
    let op = build_step_operator(&g);
    let basis = make_basis(&g);
    let mut state = initial_state(&g, &kind)?;
    let mut per_step = Vec::with_capacity(steps + 1);
    for n in 0..=steps {
        if n > 0 {
            state = anomaly_walk::apply_step(&op, &state)?;
        }
        per_step.push(edge_probabilities(&state, &basis)?);
    }
    let m = measure_accessible(&state, &g, Some(seed))?;
    let detected = m.detected_edge.map_or("none".to_string(), |j| format!("spoke{j}"));
    eprintln!("measured={detected} p_undetected={} seed={seed}", fmt_sig(m.p_undetected));
    emit(
        out,
        Format::Csv,
        || {
            let rows = per_step.iter().enumerate().flat_map(|(n, probs)| {
                probs
                    .iter()
                    .map(move |(k, p)| vec![n.to_string(), k.to_string(), fmt_sig(*p)])
            });
            csv(&["n", "edge", "probability"], rows)
        },
        || {
            let steps_json: Vec<Value> = per_step
                .iter()
                .enumerate()
                .map(|(n, probs)| {
                    let map: serde_json::Map<String, Value> =
                        probs.iter().map(|(k, p)| (k.to_string(), json!(p))).collect();
                    json!({ "n": n, "probabilities": map })
                })
                .collect();
            json!({
                "graph": spec_value(&g),
                "kind": kind.name(),
                "steps": steps,
                "seed": seed,
                "measurement": {
                    "detected_edge": m.detected_edge,
                    "p_undetected": m.p_undetected,
                },
                "per_step": steps_json,
            })
        },
    )
}

fn search(
    graph: &GraphArg,
    kind: &KindArg,
    max_steps: Option<usize>,
    engine: anomaly_walk::search::Engine,
    out: &OutArg,
    csv_path: Option<&Path>,
) -> Outcome {
    // The per-step table lands beside a JSON `--out` unless placed explicitly.
    let csv_path = csv_path.map(Path::to_path_buf).or_else(|| {
        out.out
            .as_ref()
            .filter(|p| out.format != Some(Format::Csv) && p.extension().map_or(true, |e| e != "csv"))
            .map(|p| p.with_extension("csv"))
    });
    let csv_path = csv_path.as_deref();
    check_outputs(&[out.out.as_deref(), csv_path])?;
    let g = load_graph(&graph.spec)?;
    let kind = kind_for(kind, &g);
    let steps = max_steps.unwrap_or_else(|| sweep_window(&g));
    let r = run_search_with(&g, &kind, steps, engine)?;
    if let Some(w) = r.prediction_warning() {
        eprintln!("warning: {w}");
    }
    if let Some(path) = csv_path {
        write_file(path, &r.to_csv())?;
    }
    emit(out, Format::Json, || r.to_csv(), || {
        let mut v = r.summary(&g, &kind);
        v["per_step"] = json!(r.per_step);
        v
    })
}

fn spectrum(graph: &GraphArg, kind: &KindArg, out: &OutArg, dump: Option<&Path>) -> Outcome {
    check_outputs(&[out.out.as_deref(), dump])?;
    let g = load_graph(&graph.spec)?;
    let kind = kind_for(kind, &g);
    let policy = NumericPolicy::default();
    let op = build_step_operator(&g);
    let init = initial_state(&g, &kind)?;
    let basis = invariant_basis(&op, std::slice::from_ref(&init), &policy)?;
    let red = reduce_operator(&op, &basis)?;
    let spec = eigendecompose(&red.matrix, policy.cluster)?;
    if let Some(path) = dump {
        write_file(path, &red.to_csv())?;
    }
    let coeffs = basis.project(&init)?;
    emit(out, Format::Csv, || spec.to_csv(), || {
        let phases: Vec<Value> = (0..spec.len())
            .map(|j| {
                let weight = (spec.eigenvectors(j).adjoint() * &coeffs).norm_squared();
                json!({
                    "theta": spec.eigenphases()[j],
                    "multiplicity": spec.multiplicity(j),
                    "weight": weight,
                })
            })
            .collect();
        json!({
            "graph": spec_value(&g),
            "kind": kind.name(),
            "closure_dim": basis.dim(),
            "eigenphases": phases,
        })
    })
}

fn perturb(template: &TemplateArg, n_list: &[usize], limit: LimitArg, out: &OutArg, fit_out: Option<PathBuf>) -> Outcome {
    let fit_path = fit_out.or_else(|| {
        out.out.as_ref().map(|p| {
            let stem = p.file_stem().map_or("perturb".into(), |s| s.to_string_lossy().into_owned());
            p.with_file_name(format!("{stem}.fit.csv"))
        })
    });
    check_outputs(&[out.out.as_deref(), fit_path.as_deref()])?;
    let g = load_template(template)?;
    let policy = NumericPolicy::default();
    let limit = match limit {
        LimitArg::Bulk => HubLimit::BulkTransmission,
        LimitArg::Full => HubLimit::FullReflection,
    };
    let points = perturbation_sweep(&g, n_list, limit, &policy)?;
    for p in points.iter().filter(|p| p.joint_closure) {
        eprintln!("note: N={} closure extended under both operators (dim {})", p.n, p.closure_dim);
    }
    let fit = fit_scaling(&points, policy.shift_floor)?;
    match &fit_path {
        Some(path) => write_file(path, &fit.to_csv())?,
        None if out.format != Some(Format::Json) => {
            // both tables on stdout, separated by a blank line
            emit(out, Format::Csv, || shifts_csv(&points), || json!(null))?;
            println!();
            print!("{}", fit.to_csv());
            return Ok(());
        }
        None => {}
    }
    emit(out, Format::Csv, || shifts_csv(&points), || {
        json!({
            "anomaly": spec_value(&g)["anomaly"],
            "n_list": n_list,
            "points": points,
            "fits": fit.branches,
        })
    })
}

fn sweep(
    template: &TemplateArg,
    kind: &KindArg,
    n_list: &[usize],
    engine: anomaly_walk::search::Engine,
    out: &OutArg,
) -> Outcome {
    check_outputs(&[out.out.as_deref()])?;
    let g = load_template(template)?;
    let kind = kind_for(kind, &g);
    let rows = hitting_sweep(&g, &kind, n_list, engine)?;
    let fit = if rows.len() >= 2 {
        hitting_time_fit(&rows).ok()
    } else {
        None
    };
    if let Some(f) = fit {
        eprintln!("peak_step ~ N^{:.4} (r^2 = {:.4})", f.slope, f.r_squared);
    }
    emit(out, Format::Csv, || sweep_csv(&rows), || {
        json!({
            "anomaly": spec_value(&g)["anomaly"],
            "kind": kind.name(),
            "rows": rows,
            "fit": fit,
        })
    })
}

fn baseline(graph: &GraphArg, seeds: u64, seed: u64, out: &OutArg) -> Outcome {
    check_outputs(&[out.out.as_deref()])?;
    if seeds == 0 {
        return Err(Failure::usage("config", "--seeds must be at least 1"));
    }
    let g = load_graph(&graph.spec)?;
    let queries: Vec<usize> = (0..seeds)
        .into_par_iter()
        .map(|s| classical_baseline(&g, seed.wrapping_add(s)).map(|o| o.queries))
        .collect::<Result<_, _>>()?;
    let count = queries.len() as f64;
    let mean = queries.iter().sum::<usize>() as f64 / count;
    let var = if queries.len() > 1 {
        queries.iter().map(|&q| (q as f64 - mean).powi(2)).sum::<f64>() / (count - 1.0)
    } else {
        0.0
    };
    let std = var.sqrt();
    let expected = expected_classical_queries(&g)?;
    let quantum = predicted_hitting_step(&g).ok();
    let ratio = quantum.map(|q| q as f64 / mean);
    emit(
        out,
        Format::Csv,
        || {
            let row = vec![
                g.n_spokes().to_string(),
                seeds.to_string(),
                fmt_sig(mean),
                fmt_sig(std),
                fmt_sig(expected),
                quantum.map_or(String::new(), |q| q.to_string()),
                ratio.map_or(String::new(), fmt_sig),
            ];
            csv(&["N", "seeds", "mean", "std", "expected", "quantum_step", "ratio"], [row])
        },
        || {
            json!({
                "graph": spec_value(&g),
                "seeds": seeds,
                "first_seed": seed,
                "mean": mean,
                "std": std,
                "expected": expected,
                "quantum_step": quantum,
                "ratio": ratio,
            })
        },
    )
}
