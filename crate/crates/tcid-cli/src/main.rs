//! Command-line front end: every verb reads JSON files, prints one JSON
//! object to stdout, and exits 0 on a positive result, 3 on a negative
//! result (not separated, not identifiable, rule inapplicable, demo bound
//! violated), 1 on usage errors and 2 on malformed input.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};

use tcid::calculus::{backdoor, rule1, rule2, rule3, verify_markov, RuleReport};
use tcid::cbn::LiCbn;
use tcid::continuous::{
    demo_backdoor_failure, demo_no_pointwise, demo_positivity_not_necessary,
    shrinking_ball_conditional, Joint2D, QuadratureCfg,
};
use tcid::graph::{fix_graph, id_separated, latent_project, MixedGraph, NodeId};
use tcid::identify::{emit_formula, evaluate, fix_kernel, one_line_identify, IdResult};

#[derive(Parser)]
#[command(name = "tcid", version, disable_help_subcommand = true)]
#[command(about = "Exact causal identification over directed mixed graphs with input nodes")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test graphical separation of --a from --b (plus all inputs) given --c.
    Sep {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_name = "NODES")]
        a: String,
        #[arg(long, value_name = "NODES", default_value = "")]
        b: String,
        #[arg(long, value_name = "NODES", default_value = "")]
        c: String,
    },
    /// Decide identifiability of the treatment → outcome effect; with a
    /// model, also evaluate the formula exactly.
    Identify {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_name = "NODES")]
        treatment: String,
        #[arg(long, value_name = "NODES")]
        outcome: String,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Sweep separation triples and confirm each as a transitional
    /// conditional independence of the observable kernel.
    VerifyMarkov {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Evaluate one calculus rule (1, 2, 3 or backdoor) on a model.
    Calculus {
        #[arg(long)]
        rule: String,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_name = "NODES", default_value = "")]
        a: String,
        #[arg(long, value_name = "NODES", default_value = "")]
        b: String,
        #[arg(long, value_name = "NODES", default_value = "")]
        c: String,
        #[arg(long, value_name = "NODES", default_value = "")]
        d: String,
        #[arg(long, value_name = "NODES", default_value = "")]
        f: String,
    },
    /// Run a numeric demo and write its full report to --out.
    Demos {
        #[arg(long)]
        name: String,
        #[arg(long)]
        out: PathBuf,
        /// Mandatory for randomized demos; never auto-generated.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1_000_000)]
        draws: usize,
    },
    /// Fix a node: move it into the inputs of the graph (and of the
    /// observable kernel, when a model is given).
    Fix {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        node: String,
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

enum Failure {
    /// Exit 1: bad invocation.
    Usage(String),
    /// Exit 2: unreadable or invalid input data.
    Input(String),
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("TCID_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            if e.kind() == clap::error::ErrorKind::DisplayHelp
                || e.kind() == clap::error::ErrorKind::DisplayVersion
            {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli.cmd) {
        Ok((value, negative)) => {
            println!("{}", serde_json::to_string(&round_floats(value)).unwrap());
            if negative {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("input error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Rounds every JSON number to 12 significant digits so identical inputs
/// yield byte-identical output.
fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                let f = n.as_f64().unwrap();
                let rounded = format!("{f:.11e}").parse::<f64>().unwrap();
                return json!(rounded);
            }
            Value::Number(n)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_floats).collect()),
        Value::Object(map) => Value::Object(
            map.into_iter()
                .map(|(k, v)| (k, round_floats(v)))
                .collect(),
        ),
        other => other,
    }
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        Failure::Input(format!(
            "{}: line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

fn read_graph(path: &Path) -> Result<MixedGraph, Failure> {
    MixedGraph::from_json(&read_json(path)?)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn read_model(path: &Path) -> Result<LiCbn, Failure> {
    LiCbn::from_json(&read_json(path)?)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn node_list(s: &str) -> BTreeSet<NodeId> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(NodeId::from)
        .collect()
}

fn input_err<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Input(e.to_string())
}

fn dispatch(cmd: Command) -> Result<(Value, bool), Failure> {
    match cmd {
        Command::Sep { graph, a, b, c } => {
            let g = read_graph(&graph)?;
            let separated = id_separated(&g, &node_list(&a), &node_list(&b), &node_list(&c))
                .map_err(input_err)?;
            Ok((json!({ "separated": separated }), !separated))
        }
        Command::Identify {
            graph,
            treatment,
            outcome,
            model,
        } => {
            let g = read_graph(&graph)?;
            let a = node_list(&outcome);
            let b = node_list(&treatment);
            let res = one_line_identify(&g, &a, &b).map_err(input_err)?;
            match res {
                IdResult::Identifiable { ref formula } => {
                    let mut obj = Map::new();
                    obj.insert("status".into(), json!("identifiable"));
                    obj.insert("formula_string".into(), json!(emit_formula(formula)));
                    if let Some(path) = model {
                        let m = read_model(&path)?;
                        let proj = latent_project(m.graph()).map_err(input_err)?;
                        if proj != g {
                            return Err(Failure::Input(
                                "model does not project onto the given graph".into(),
                            ));
                        }
                        let obs = m.observable_kernel().map_err(input_err)?;
                        let table = evaluate(formula, &obs, &b).map_err(input_err)?;
                        obj.insert("evaluated_table".into(), table.to_json());
                    }
                    Ok((Value::Object(obj), false))
                }
                IdResult::NotIdentifiable { failing_district } => {
                    let district: Vec<String> =
                        failing_district.iter().map(|n| n.0.clone()).collect();
                    Ok((
                        json!({
                            "status": "not_identifiable",
                            "failing_district": district,
                        }),
                        true,
                    ))
                }
            }
        }
        Command::VerifyMarkov { model, budget } => {
            let m = read_model(&model)?;
            let report = verify_markov(&m, budget).map_err(input_err)?;
            let violations: Vec<Value> = report
                .violations
                .iter()
                .map(|v| {
                    let set =
                        |s: &BTreeSet<NodeId>| Value::Array(s.iter().map(|n| json!(n.0)).collect());
                    json!({
                        "a": set(&v.a),
                        "b": set(&v.b),
                        "c": set(&v.c),
                    })
                })
                .collect();
            let sound = report.sound();
            Ok((
                json!({
                    "sound": sound,
                    "checked": report.checked,
                    "total": report.total,
                    "budget_exhausted": report.budget_exhausted,
                    "violations": violations,
                }),
                !sound,
            ))
        }
        Command::Calculus {
            rule,
            model,
            a,
            b,
            c,
            d,
            f,
        } => {
            let m = read_model(&model)?;
            let (a, b, c, d, f) = (
                node_list(&a),
                node_list(&b),
                node_list(&c),
                node_list(&d),
                node_list(&f),
            );
            let report: RuleReport = match rule.as_str() {
                "1" => rule1(&m, &a, &b, &c, &d).map_err(input_err)?,
                "2" => rule2(&m, &a, &b, &c, &d).map_err(input_err)?,
                "3" => rule3(&m, &a, &b, &c, &d).map_err(input_err)?,
                "backdoor" => backdoor(&m, &a, &b, &f).map_err(input_err)?,
                other => {
                    return Err(Failure::Usage(format!(
                        "unknown rule `{other}` (expected 1, 2, 3 or backdoor)"
                    )))
                }
            };
            let ok = report.graphical_ok
                && report.positivity_ok
                && report.equality_ok == Some(true);
            let value = serde_json::to_value(&report).unwrap();
            Ok((value, !ok))
        }
        Command::Demos {
            name,
            out,
            seed,
            draws,
        } => {
            let cfg = QuadratureCfg::default();
            let (report, ok) = match name.as_str() {
                "no-pointwise" => {
                    let rep = demo_no_pointwise(&cfg).map_err(input_err)?;
                    let ok = rep.cases[..3].iter().all(|c| c.tv_distance == 1.0)
                        && rep.cases[3..].iter().all(|c| c.tv_distance == 0.0);
                    (serde_json::to_value(&rep).unwrap(), ok)
                }
                "backdoor-failure" => {
                    let mut reports = Vec::new();
                    let mut ok = true;
                    for x_a in [0.1, 0.25, 0.5, 0.75, 1.0] {
                        let rep = demo_backdoor_failure(x_a, &cfg).map_err(input_err)?;
                        ok = ok
                            && (rep.interventional_integral - 1.0).abs() < 1e-6
                            && (rep.adjusted_integral - 1.0).abs() < 1e-6
                            && rep.l1_distance >= 0.05;
                        reports.push(rep);
                    }
                    (serde_json::to_value(&reports).unwrap(), ok)
                }
                "positivity" => {
                    let seed = seed.ok_or_else(|| {
                        Failure::Usage("--seed is mandatory for the positivity demo".into())
                    })?;
                    let rep =
                        demo_positivity_not_necessary(&cfg, seed, draws).map_err(input_err)?;
                    let ok = rep.grid_max_diff < 1e-12
                        && rep.mass_far_outside == 0.0
                        && rep.mc_sup_deviation < 0.05;
                    (serde_json::to_value(&rep).unwrap(), ok)
                }
                "shrinking-ball" => {
                    let mut reports = Vec::new();
                    let mut ok = true;
                    for rho in [-0.5, 0.0, 0.5] {
                        let rep = shrinking_ball_conditional(
                            Joint2D::BivariateGaussian { rho },
                            1.0,
                            &[1e-1, 1e-2, 1e-3],
                            &cfg,
                        )
                        .map_err(input_err)?;
                        ok = ok && rep.entries.last().unwrap().error < 1e-3;
                        for w in rep.entries.windows(2) {
                            ok = ok && w[1].error <= (w[0].error * 1.1).max(1e-6);
                        }
                        reports.push(rep);
                    }
                    (serde_json::to_value(&reports).unwrap(), ok)
                }
                other => {
                    return Err(Failure::Usage(format!(
                        "unknown demo `{other}` (expected no-pointwise, backdoor-failure, positivity or shrinking-ball)"
                    )))
                }
            };
            let full = json!({ "name": name, "ok": ok, "report": report });
            let rendered = serde_json::to_string_pretty(&round_floats(full)).unwrap();
            std::fs::write(&out, rendered + "\n")
                .map_err(|e| Failure::Input(format!("{}: {e}", out.display())))?;
            Ok((
                json!({ "name": name, "ok": ok, "out": out.display().to_string() }),
                !ok,
            ))
        }
        Command::Fix { graph, node, model } => {
            let g = read_graph(&graph)?;
            let r = NodeId::from(node.as_str());
            let fixable = tcid::graph::fixable(&g, &r).map_err(input_err)?;
            if !fixable {
                return Ok((json!({ "fixable": false }), true));
            }
            let fixed = fix_graph(&g, &r).map_err(input_err)?;
            let mut obj = Map::new();
            obj.insert("fixable".into(), json!(true));
            obj.insert("graph".into(), fixed.to_json());
            if let Some(path) = model {
                let m = read_model(&path)?;
                let proj = latent_project(m.graph()).map_err(input_err)?;
                if proj != g {
                    return Err(Failure::Input(
                        "model does not project onto the given graph".into(),
                    ));
                }
                let obs = m.observable_kernel().map_err(input_err)?;
                let fixed_kernel = fix_kernel(&obs, &r, &g).map_err(input_err)?;
                obj.insert("kernel".into(), fixed_kernel.to_json());
            }
            Ok((Value::Object(obj), false))
        }
    }
}
