//! Implementations of the CLI subcommands.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::rc::Rc;

use clap::Args;

use curvegnn::checkpoint::save_checkpoint;
use curvegnn::exact::exact_curvature_all;
use curvegnn::gnn::{
    assign_depths, train, Aggregator, Labels, Splits, TaskKind, ThresholdSchedule, TrainConfig,
};
use curvegnn::graph::{load_features, load_graph, load_labels, SplitTag, VertexFeatures};
use curvegnn::heat::{default_probes, heat_flow, heat_flow_euler, mixing_time, DEFAULT_DENSE_CAP};
use curvegnn::influence::{
    make_influence_dataset, simulate_ic, simulate_lt, DiffusionModel, IcProbability,
};
use curvegnn::learn::{estimate_curvature, KappaMode, LearnConfig};
use curvegnn::operators::{gamma, gamma2_with_form, laplacian, Gamma2Form};
use curvegnn::{exact_curvature, Tensor};

use crate::config::{resolve, KvConfig};
use crate::errors::{CliError, CliResult};
use crate::manifest::{manifest_path_for, Manifest};
use crate::table::{read_vertex_values, write_text};

fn validate_k(k: f64) -> CliResult<()> {
    if !(k > 0.0 && k <= 100.0) {
        return Err(CliError::usage("k must lie in (0,100]"));
    }
    Ok(())
}

fn validate_lambda(lambda: f64) -> CliResult<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(CliError::usage("lambda must be >= 0"));
    }
    Ok(())
}

fn parse_gamma2_form(s: &str) -> CliResult<Gamma2Form> {
    match s {
        "operator" => Ok(Gamma2Form::Operator),
        "expanded" => Ok(Gamma2Form::Expanded),
        other => Err(CliError::usage(format!(
            "unknown gamma2 form `{other}` (use operator|expanded)"
        ))),
    }
}

fn features_or_one_hot(features: &Option<PathBuf>, n: usize) -> CliResult<VertexFeatures> {
    match features {
        Some(path) => Ok(load_features(path, n)?),
        None => Ok(VertexFeatures::one_hot(n)),
    }
}

// ---------------------------------------------------------------- curvature

#[derive(Args)]
pub struct CurvatureExactArgs {
    /// Edge-list graph file.
    #[arg(long)]
    graph: PathBuf,
    /// Output CSV (vertex,kappa,provenance).
    #[arg(long)]
    out: PathBuf,
}

pub fn curvature_exact(args: CurvatureExactArgs) -> CliResult<()> {
    let g = load_graph(&args.graph)?;
    let estimate = exact_curvature_all(&g)?;
    let mut csv = String::from("vertex,kappa,provenance\n");
    for (x, v) in estimate.values.iter().enumerate() {
        let _ = writeln!(csv, "{x},{v},{}", estimate.provenance.label());
    }
    write_text(&args.out, &csv)?;
    let mut m = Manifest::new("curvature exact");
    m.set("graph", args.graph.display())
        .set("out", args.out.display());
    m.input(&args.graph)?;
    m.write(&manifest_path_for(&args.out, false))
}

#[derive(Args)]
pub struct CurvatureLearnArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Feature CSV; identity one-hot features when omitted.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Family size N.
    #[arg(long, default_value_t = 3)]
    n_functions: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 2000)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Hidden width of family members.
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    /// kappa parameterization: transductive|inductive.
    #[arg(long, default_value = "transductive")]
    mode: String,
    /// Learn log-edge-weights jointly.
    #[arg(long, default_value_t = false)]
    learn_weights: bool,
    /// Keep family members frozen instead of training them.
    #[arg(long, default_value_t = false)]
    freeze_family: bool,
    /// Convexity-operator convention: operator|expanded.
    #[arg(long, default_value = "operator")]
    gamma2_form: String,
    /// Output CSV (vertex,kappa_hat).
    #[arg(long)]
    out: PathBuf,
    /// Frozen edge-weight dump (default: <out>.weights.csv).
    #[arg(long)]
    weights_out: Option<PathBuf>,
}

pub fn curvature_learn(args: CurvatureLearnArgs) -> CliResult<()> {
    validate_lambda(args.lambda)?;
    if args.epochs == 0 {
        return Err(CliError::usage("epochs must be >= 1"));
    }
    if !(args.lr > 0.0) {
        return Err(CliError::usage("lr must be positive"));
    }
    let mode = match args.mode.as_str() {
        "transductive" => KappaMode::Transductive,
        "inductive" => KappaMode::Inductive,
        other => {
            return Err(CliError::usage(format!(
                "unknown mode `{other}` (use transductive|inductive)"
            )))
        }
    };
    let g = Rc::new(load_graph(&args.graph)?);
    let features = features_or_one_hot(&args.features, g.n_vertices())?;
    let cfg = LearnConfig {
        n_functions: args.n_functions,
        lambda: args.lambda,
        epochs: args.epochs,
        lr: args.lr,
        seed: args.seed,
        hidden: args.hidden,
        mode,
        train_family: !args.freeze_family,
        learn_weights: args.learn_weights,
        gamma2_form: parse_gamma2_form(&args.gamma2_form)?,
    };
    let out = estimate_curvature(&g, &features, &cfg)?;

    let mut csv = String::from("vertex,kappa_hat\n");
    for (x, v) in out.estimate.values.iter().enumerate() {
        let _ = writeln!(csv, "{x},{v}");
    }
    write_text(&args.out, &csv)?;

    let weights_path = args.weights_out.clone().unwrap_or_else(|| {
        let mut name = args
            .out
            .file_name()
            .map(|s| s.to_os_string())
            .unwrap_or_default();
        name.push(".weights.csv");
        args.out.with_file_name(name)
    });
    let mut wcsv = String::from("u,v,weight\n");
    for (eid, &(u, v)) in g.edges().iter().enumerate() {
        let _ = writeln!(wcsv, "{u},{v},{}", out.realized_weights[eid]);
    }
    write_text(&weights_path, &wcsv)?;

    let mut m = Manifest::new("curvature learn");
    m.set("graph", args.graph.display())
        .set("n_functions", args.n_functions)
        .set("lambda", args.lambda)
        .set("epochs", args.epochs)
        .set("lr", args.lr)
        .set("seed", args.seed)
        .set("hidden", args.hidden)
        .set("mode", &args.mode)
        .set("learn_weights", args.learn_weights)
        .set("train_family", !args.freeze_family)
        .set("gamma2_form", &args.gamma2_form)
        .set("out", args.out.display())
        .set("weights_out", weights_path.display());
    m.set_opt(
        "features",
        args.features.as_ref().map(|p| p.display().to_string()),
    );
    m.input(&args.graph)?;
    if let Some(f) = &args.features {
        m.input(f)?;
    }
    m.write(&manifest_path_for(&args.out, false))
}

// -------------------------------------------------------------- depth-assign

#[derive(Args)]
pub struct DepthAssignArgs {
    /// Curvature CSV (vertex,kappa[,provenance]).
    #[arg(long)]
    kappa: PathBuf,
    /// Rank threshold percent in (0,100].
    #[arg(long)]
    k: f64,
    /// Depth cap L (default: ceil(100/k)).
    #[arg(long)]
    max_depth: Option<usize>,
    /// Output CSV (vertex,kappa,T).
    #[arg(long)]
    out: PathBuf,
}

pub fn depth_assign(args: DepthAssignArgs) -> CliResult<()> {
    validate_k(args.k)?;
    let kappa = read_vertex_values(&args.kappa, None)?;
    let cap = args
        .max_depth
        .unwrap_or_else(|| (100.0 / args.k).ceil() as usize);
    let assignment = assign_depths(&kappa, args.k, cap)?;
    let mut csv = String::from("vertex,kappa,T\n");
    for (x, (&v, &t)) in kappa.iter().zip(&assignment.depths).enumerate() {
        let _ = writeln!(csv, "{x},{v},{t}");
    }
    write_text(&args.out, &csv)?;
    let mut m = Manifest::new("depth-assign");
    m.set("kappa", args.kappa.display())
        .set("k", args.k)
        .set("max_depth", cap)
        .set("out", args.out.display());
    m.input(&args.kappa)?;
    m.write(&manifest_path_for(&args.out, false))
}

// --------------------------------------------------------------------- train

#[derive(Args)]
pub struct TrainArgs {
    /// node-class | node-reg | graph-class | graph-reg.
    #[arg(long)]
    task: String,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    features: Option<PathBuf>,
    /// Label CSV (vertex,label[,split]) for node tasks.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Graph-level target (graph tasks only).
    #[arg(long)]
    target: Option<f64>,
    /// key=value config file; explicit flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    n_functions: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    family_hidden: Option<usize>,
    #[arg(long)]
    depth_refresh: Option<usize>,
    /// fixed | power-law | normal | linear.
    #[arg(long)]
    schedule: Option<String>,
    /// Reporting-only heat-step scale.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    /// gcn-mean | gin-sum.
    #[arg(long)]
    aggregator: Option<String>,
    /// transductive | inductive.
    #[arg(long)]
    kappa_mode: Option<String>,
    /// Train fraction for a random split when labels carry no split column.
    #[arg(long)]
    train_frac: Option<f64>,
    #[arg(long)]
    learn_weights: Option<bool>,
    #[arg(long)]
    train_family: Option<bool>,
    /// operator | expanded.
    #[arg(long)]
    gamma2_form: Option<String>,
}

const TRAIN_CONFIG_KEYS: &[&str] = &[
    "epochs",
    "lr",
    "seed",
    "k",
    "n-functions",
    "lambda",
    "max-depth",
    "hidden",
    "family-hidden",
    "depth-refresh",
    "schedule",
    "dt",
    "weight-decay",
    "aggregator",
    "kappa-mode",
    "train-frac",
    "learn-weights",
    "train-family",
    "gamma2-form",
];

pub fn train_cmd(args: TrainArgs) -> CliResult<()> {
    let task = TaskKind::parse(&args.task).ok_or_else(|| {
        CliError::usage(format!(
            "unknown task `{}` (use node-class|node-reg|graph-class|graph-reg)",
            args.task
        ))
    })?;
    let file = match &args.config {
        Some(path) => KvConfig::load(path, TRAIN_CONFIG_KEYS)?,
        None => KvConfig::empty(),
    };
    let defaults = TrainConfig::default();
    let schedule_name = resolve(
        args.schedule.clone(),
        file.get::<String>("schedule")?,
        defaults.schedule.label().to_string(),
    );
    let schedule = ThresholdSchedule::parse(&schedule_name).ok_or_else(|| {
        CliError::usage(format!(
            "unknown schedule `{schedule_name}` (use fixed|power-law|normal|linear)"
        ))
    })?;
    let aggregator_name = resolve(
        args.aggregator.clone(),
        file.get::<String>("aggregator")?,
        defaults.aggregator.label().to_string(),
    );
    let aggregator = Aggregator::parse(&aggregator_name).ok_or_else(|| {
        CliError::usage(format!(
            "unknown aggregator `{aggregator_name}` (use gcn-mean|gin-sum)"
        ))
    })?;
    let kappa_mode_name = resolve(
        args.kappa_mode.clone(),
        file.get::<String>("kappa-mode")?,
        "transductive".to_string(),
    );
    let kappa_mode = match kappa_mode_name.as_str() {
        "transductive" => KappaMode::Transductive,
        "inductive" => KappaMode::Inductive,
        other => {
            return Err(CliError::usage(format!(
                "unknown kappa-mode `{other}` (use transductive|inductive)"
            )))
        }
    };
    let gamma2_name = resolve(
        args.gamma2_form.clone(),
        file.get::<String>("gamma2-form")?,
        "operator".to_string(),
    );

    let cfg = TrainConfig {
        task,
        aggregator,
        epochs: resolve(args.epochs, file.get("epochs")?, defaults.epochs),
        lr: resolve(args.lr, file.get("lr")?, defaults.lr),
        seed: resolve(args.seed, file.get("seed")?, defaults.seed),
        k: resolve(args.k, file.get("k")?, defaults.k),
        n_functions: resolve(
            args.n_functions,
            file.get("n-functions")?,
            defaults.n_functions,
        ),
        lambda: resolve(args.lambda, file.get("lambda")?, defaults.lambda),
        max_depth: resolve(args.max_depth, file.get("max-depth")?, defaults.max_depth),
        hidden: resolve(args.hidden, file.get("hidden")?, defaults.hidden),
        family_hidden: resolve(
            args.family_hidden,
            file.get("family-hidden")?,
            defaults.family_hidden,
        ),
        depth_refresh: resolve(
            args.depth_refresh,
            file.get("depth-refresh")?,
            defaults.depth_refresh,
        ),
        schedule,
        dt_report: resolve(args.dt, file.get("dt")?, defaults.dt_report),
        weight_decay: resolve(
            args.weight_decay,
            file.get("weight-decay")?,
            defaults.weight_decay,
        ),
        learn_weights: resolve(
            args.learn_weights,
            file.get("learn-weights")?,
            defaults.learn_weights,
        ),
        train_family: resolve(
            args.train_family,
            file.get("train-family")?,
            defaults.train_family,
        ),
        kappa_mode,
        gamma2_form: parse_gamma2_form(&gamma2_name)?,
    };
    validate_k(cfg.k)?;
    validate_lambda(cfg.lambda)?;
    if cfg.n_functions > 64 {
        return Err(CliError::usage("n-functions must be at most 64"));
    }
    let train_frac = resolve(args.train_frac, file.get("train-frac")?, 1.0);
    if !(0.0..=1.0).contains(&train_frac) {
        return Err(CliError::usage("train-frac must lie in [0,1]"));
    }

    let g = Rc::new(load_graph(&args.graph)?);
    let n = g.n_vertices();
    let features = features_or_one_hot(&args.features, n)?;

    let (labels, splits) = match task {
        TaskKind::NodeClassification | TaskKind::NodeRegression => {
            let path = args
                .labels
                .as_ref()
                .ok_or_else(|| CliError::usage("node tasks require --labels"))?;
            let table = load_labels(path, n)?;
            let splits = match &table.splits {
                Some(tags) => Splits {
                    train: tags.iter().map(|t| *t == SplitTag::Train).collect(),
                    eval: tags.iter().map(|t| *t == SplitTag::Test).collect(),
                },
                None => Splits::random(
                    n,
                    train_frac,
                    resolve(args.seed, file.get("seed")?, defaults.seed),
                ),
            };
            let labels = if task == TaskKind::NodeClassification {
                let mut classes = Vec::with_capacity(n);
                for (x, &v) in table.values.iter().enumerate() {
                    if v.fract() != 0.0 || v < 0.0 {
                        return Err(CliError::usage(format!(
                            "vertex {x}: class label must be a non-negative integer, got {v}"
                        )));
                    }
                    classes.push(v as usize);
                }
                Labels::NodeClass(classes)
            } else {
                Labels::NodeReg(table.values)
            };
            (labels, splits)
        }
        TaskKind::GraphClassification | TaskKind::GraphRegression => {
            let target = args
                .target
                .ok_or_else(|| CliError::usage("graph tasks require --target"))?;
            let labels = if task == TaskKind::GraphClassification {
                if target.fract() != 0.0 || target < 0.0 {
                    return Err(CliError::usage(
                        "graph class target must be a non-negative integer",
                    ));
                }
                Labels::GraphClass(target as usize)
            } else {
                Labels::GraphReg(target)
            };
            (labels, Splits::all_train(n))
        }
    };

    let result = train(&g, &features, &labels, &splits, &cfg)?;

    // degradation is worth a warning, never an error
    if let (Some(first), Some(last)) = (result.history.first(), result.history.last()) {
        let degraded = if task.is_classification() {
            last.metric < first.metric
        } else {
            last.metric > first.metric
        };
        if degraded {
            eprintln!(
                "warning: metric degraded over training ({} -> {})",
                first.metric, last.metric
            );
        }
    }

    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", args.out.display())))?;

    let mut history = String::from("epoch,L_task,L_curv,metric\n");
    for rec in &result.history {
        let _ = writeln!(
            history,
            "{},{},{},{}",
            rec.epoch, rec.task_loss, rec.curv_loss, rec.metric
        );
    }
    write_text(&args.out.join("history.csv"), &history)?;

    let mut depths = String::from("vertex,kappa_hat,T\n");
    for x in 0..n {
        let _ = writeln!(
            depths,
            "{x},{},{}",
            result.final_kappa[x], result.final_depths.depths[x]
        );
    }
    write_text(&args.out.join("depths.csv"), &depths)?;

    let mut wcsv = String::from("u,v,weight\n");
    for (eid, &(u, v)) in g.edges().iter().enumerate() {
        let _ = writeln!(wcsv, "{u},{v},{}", result.realized_weights[eid]);
    }
    write_text(&args.out.join("weights.csv"), &wcsv)?;

    let mut params: Vec<(String, Tensor)> = Vec::new();
    result
        .model
        .visit_params(&mut |name, t| params.push((name, t.clone())));
    result
        .family
        .visit_params(&mut |name, t| params.push((name, t.clone())));
    result
        .curvature
        .visit_params(&mut |name, t| params.push((name, t.clone())));
    save_checkpoint(
        args.out.join("checkpoint.json"),
        params.iter().map(|(n, t)| (n.clone(), t)),
    )?;

    let mut m = Manifest::new("train");
    m.set("task", &args.task)
        .set("graph", args.graph.display())
        .set("out", args.out.display())
        .set("epochs", cfg.epochs)
        .set("lr", cfg.lr)
        .set("seed", cfg.seed)
        .set("k", cfg.k)
        .set("n_functions", cfg.n_functions)
        .set("lambda", cfg.lambda)
        .set("max_depth", cfg.max_depth)
        .set("hidden", cfg.hidden)
        .set("family_hidden", cfg.family_hidden)
        .set("depth_refresh", cfg.depth_refresh)
        .set("schedule", cfg.schedule.label())
        .set("dt", cfg.dt_report)
        .set("weight_decay", cfg.weight_decay)
        .set("aggregator", cfg.aggregator.label())
        .set("kappa_mode", kappa_mode_name)
        .set("gamma2_form", gamma2_name)
        .set("learn_weights", cfg.learn_weights)
        .set("train_family", cfg.train_family)
        .set("train_frac", train_frac);
    m.set_opt(
        "features",
        args.features.as_ref().map(|p| p.display().to_string()),
    );
    m.set_opt(
        "labels",
        args.labels.as_ref().map(|p| p.display().to_string()),
    );
    m.set_opt("target", args.target);
    m.set_opt(
        "config",
        args.config.as_ref().map(|p| p.display().to_string()),
    );
    m.input(&args.graph)?;
    if let Some(f) = &args.features {
        m.input(f)?;
    }
    if let Some(l) = &args.labels {
        m.input(l)?;
    }
    if let Some(c) = &args.config {
        m.input(c)?;
    }
    m.write(&manifest_path_for(&args.out, true))
}

// ------------------------------------------------------------------ heatflow

#[derive(Args)]
pub struct HeatflowArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Initial function CSV (vertex,value).
    #[arg(long)]
    f0: PathBuf,
    /// Comma-separated time grid for the exact semigroup.
    #[arg(long, default_value = "0,0.25,0.5,1,2,4")]
    times: String,
    /// Use the explicit Euler stepper instead of the dense eigensolver.
    #[arg(long, default_value_t = false)]
    euler: bool,
    /// Euler step size.
    #[arg(long, default_value_t = 0.05)]
    dt: f64,
    /// Euler step count.
    #[arg(long, default_value_t = 40)]
    steps: usize,
    /// Dense eigensolver vertex cap.
    #[arg(long, default_value_t = DEFAULT_DENSE_CAP)]
    dense_cap: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

pub fn heatflow_cmd(args: HeatflowArgs) -> CliResult<()> {
    let g = load_graph(&args.graph)?;
    let f0 = read_vertex_values(&args.f0, Some(g.n_vertices()))?;
    let flow = if args.euler {
        heat_flow_euler(&g, &f0, args.dt, args.steps)?
    } else {
        let mut times = Vec::new();
        for tok in args.times.split(',') {
            let t: f64 = tok
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("invalid time `{tok}`")))?;
            times.push(t);
        }
        heat_flow(&g, &f0, &times, args.dense_cap)?
    };

    let mut states = String::from("t,vertex,value\n");
    let mut gammas = String::from("t,vertex,gamma\n");
    for (i, &t) in flow.t_grid.iter().enumerate() {
        for x in 0..g.n_vertices() {
            let _ = writeln!(states, "{t},{x},{}", flow.states[i][x]);
            let _ = writeln!(gammas, "{t},{x},{}", flow.gamma[i][x]);
        }
    }
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", args.out.display())))?;
    write_text(&args.out.join("states.csv"), &states)?;
    write_text(&args.out.join("gamma.csv"), &gammas)?;

    let max_gamma: Vec<f64> = flow
        .gamma
        .iter()
        .map(|row| row.iter().cloned().fold(0.0f64, f64::max))
        .collect();
    let summary = serde_json::json!({
        "t_grid": flow.t_grid,
        "max_gamma": max_gamma,
        "mass": flow.states.iter().map(|s| s.iter().sum::<f64>()).collect::<Vec<f64>>(),
        "mode": if args.euler { "euler" } else { "exact" },
    });
    write_text(
        &args.out.join("summary.json"),
        &serde_json::to_string_pretty(&summary).unwrap(),
    )?;

    let mut m = Manifest::new("heatflow");
    m.set("graph", args.graph.display())
        .set("f0", args.f0.display())
        .set("euler", args.euler)
        .set("out", args.out.display());
    if args.euler {
        m.set("dt", args.dt).set("steps", args.steps);
    } else {
        m.set("times", &args.times).set("dense_cap", args.dense_cap);
    }
    m.input(&args.graph)?;
    m.input(&args.f0)?;
    m.write(&manifest_path_for(&args.out, true))
}

// -------------------------------------------------------------------- mixing

#[derive(Args)]
pub struct MixingArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Vertex whose local mixing time is measured.
    #[arg(long)]
    vertex: usize,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    /// Curvature at the vertex; computed by the exact oracle when omitted.
    #[arg(long)]
    kappa: Option<f64>,
    /// Number of random unit-norm probe functions.
    #[arg(long, default_value_t = 32)]
    probes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// End of the time grid; default 2x the curvature bound (or 10).
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    grid_steps: usize,
    #[arg(long, default_value_t = DEFAULT_DENSE_CAP)]
    dense_cap: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

pub fn mixing_cmd(args: MixingArgs) -> CliResult<()> {
    let g = load_graph(&args.graph)?;
    if !(args.eps > 0.0 && args.eps <= 1.0) {
        return Err(CliError::usage("eps must lie in (0,1]"));
    }
    let kappa = match args.kappa {
        Some(k) => k,
        None => exact_curvature(&g, args.vertex)?,
    };
    let bound = (kappa > 0.0).then(|| (1.0 / args.eps).ln() / kappa);
    let t_max = args
        .t_max
        .unwrap_or_else(|| bound.filter(|b| *b > 0.0).map_or(10.0, |b| 2.0 * b));
    if !(t_max > 0.0) {
        return Err(CliError::usage("t-max must be positive"));
    }
    let grid: Vec<f64> = (0..=args.grid_steps)
        .map(|i| i as f64 * t_max / args.grid_steps as f64)
        .collect();
    let probes = default_probes(&g, args.vertex, args.probes, args.seed)?;
    let report = mixing_time(
        &g,
        args.vertex,
        args.eps,
        kappa,
        &probes,
        &grid,
        args.dense_cap,
    )?;

    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", args.out.display())))?;
    let mut per_probe = String::from("probe,tau\n");
    for (i, tau) in report.per_probe.iter().enumerate() {
        match tau {
            Some(t) => {
                let _ = writeln!(per_probe, "{i},{t}");
            }
            None => {
                let _ = writeln!(per_probe, "{i},");
            }
        }
    }
    write_text(&args.out.join("per_probe.csv"), &per_probe)?;
    let within = match (report.empirical, report.bound) {
        (Some(tau), Some(b)) => Some(tau <= b),
        _ => None,
    };
    let summary = serde_json::json!({
        "vertex": report.vertex,
        "eps": report.eps,
        "kappa": kappa,
        "empirical_tau": report.empirical,
        "bound": report.bound,
        "within_bound": within,
        "skipped_probes": report.skipped_probes,
        "t_max": t_max,
    });
    write_text(
        &args.out.join("summary.json"),
        &serde_json::to_string_pretty(&summary).unwrap(),
    )?;

    let mut m = Manifest::new("mixing");
    m.set("graph", args.graph.display())
        .set("vertex", args.vertex)
        .set("eps", args.eps)
        .set("kappa", kappa)
        .set("probes", args.probes)
        .set("seed", args.seed)
        .set("t_max", t_max)
        .set("grid_steps", args.grid_steps)
        .set("out", args.out.display());
    m.input(&args.graph)?;
    m.write(&manifest_path_for(&args.out, true))
}

// ----------------------------------------------------------------- diffusion

#[derive(Args)]
pub struct DiffusionSimulateArgs {
    /// ic | lt.
    #[arg(long)]
    model: String,
    #[arg(long)]
    graph: PathBuf,
    /// Comma-separated seed vertices (alternative: --fraction).
    #[arg(long)]
    seeds: Option<String>,
    /// Random seed-set fraction of |V| (alternative: --seeds).
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Uniform IC activation probability (default: weighted cascade 1/deg).
    #[arg(long)]
    p: Option<f64>,
    /// Output CSV (vertex,probability).
    #[arg(long)]
    out: PathBuf,
}

pub fn diffusion_simulate(args: DiffusionSimulateArgs) -> CliResult<()> {
    let model = DiffusionModel::parse(&args.model)
        .ok_or_else(|| CliError::usage(format!("unknown model `{}` (use ic|lt)", args.model)))?;
    let g = load_graph(&args.graph)?;
    let ic_mode = match args.p {
        Some(p) => IcProbability::Uniform(p),
        None => IcProbability::WeightedCascade,
    };
    let (seeds, target) = match (&args.seeds, args.fraction) {
        (Some(_), Some(_)) => {
            return Err(CliError::usage(
                "use either --seeds or --fraction, not both",
            ))
        }
        (Some(list), None) => {
            let mut seeds = Vec::new();
            for tok in list.split(',') {
                let s: usize = tok
                    .trim()
                    .parse()
                    .map_err(|_| CliError::usage(format!("invalid seed vertex `{tok}`")))?;
                seeds.push(s);
            }
            let target = match model {
                DiffusionModel::IndependentCascade => {
                    simulate_ic(&g, &seeds, ic_mode, args.runs, args.seed)?
                }
                DiffusionModel::LinearThreshold => simulate_lt(&g, &seeds, args.runs, args.seed)?,
            };
            (seeds, target)
        }
        (None, fraction) => {
            let fraction = fraction.unwrap_or(0.10);
            make_influence_dataset(&g, fraction, model, ic_mode, args.runs, args.seed)?
        }
    };

    let mut csv = String::from("vertex,probability\n");
    for (x, p) in target.probabilities.iter().enumerate() {
        let _ = writeln!(csv, "{x},{p}");
    }
    write_text(&args.out, &csv)?;
    let summary = serde_json::json!({
        "model": model.label(),
        "seeds": seeds,
        "runs": args.runs,
        "mean_probability":
            target.probabilities.iter().sum::<f64>() / target.probabilities.len() as f64,
    });
    let mut sname = args
        .out
        .file_name()
        .map(|s| s.to_os_string())
        .unwrap_or_default();
    sname.push(".summary.json");
    write_text(
        &args.out.with_file_name(sname),
        &serde_json::to_string_pretty(&summary).unwrap(),
    )?;

    let mut m = Manifest::new("diffusion simulate");
    m.set("model", model.label())
        .set("graph", args.graph.display())
        .set("runs", args.runs)
        .set("seed", args.seed)
        .set("out", args.out.display());
    m.set_opt("seeds", args.seeds.as_ref());
    m.set_opt("fraction", args.fraction);
    m.set_opt("p", args.p);
    m.input(&args.graph)?;
    m.write(&manifest_path_for(&args.out, false))
}

// ----------------------------------------------------------------------- ops

#[derive(Args)]
pub struct OpsEvalArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Function CSV (vertex,value).
    #[arg(long)]
    function: PathBuf,
    /// operator | expanded.
    #[arg(long, default_value = "operator")]
    gamma2_form: String,
    /// Output CSV (vertex,laplacian,gamma,gamma2).
    #[arg(long)]
    out: PathBuf,
}

pub fn ops_eval(args: OpsEvalArgs) -> CliResult<()> {
    let g = load_graph(&args.graph)?;
    let f = read_vertex_values(&args.function, Some(g.n_vertices()))?;
    let form = parse_gamma2_form(&args.gamma2_form)?;
    let lap = laplacian(&g, &f).map_err(|e| CliError::usage(e.to_string()))?;
    let gam = gamma(&g, &f).map_err(|e| CliError::usage(e.to_string()))?;
    let g2 = gamma2_with_form(&g, &f, form).map_err(|e| CliError::usage(e.to_string()))?;
    let mut csv = String::from("vertex,laplacian,gamma,gamma2\n");
    for x in 0..g.n_vertices() {
        let _ = writeln!(csv, "{x},{},{},{}", lap[x], gam[x], g2[x]);
    }
    write_text(&args.out, &csv)?;
    let mut m = Manifest::new("ops eval");
    m.set("graph", args.graph.display())
        .set("function", args.function.display())
        .set("gamma2_form", &args.gamma2_form)
        .set("out", args.out.display());
    m.input(&args.graph)?;
    m.input(&args.function)?;
    m.write(&manifest_path_for(&args.out, false))
}

// -------------------------------------------------------------------- report

#[derive(Args)]
pub struct ReportArgs {
    /// A run directory (history.csv + depths.csv) or a directory of runs.
    #[arg(long)]
    run_dir: PathBuf,
}

struct RunSummary {
    final_epoch: usize,
    final_task_loss: f64,
    final_curv_loss: f64,
    final_metric: f64,
    kappa_min: f64,
    kappa_median: f64,
    kappa_max: f64,
    depth_histogram: BTreeMap<usize, usize>,
}

fn summarize_run(dir: &Path) -> CliResult<RunSummary> {
    let mut missing = Vec::new();
    let history_path = dir.join("history.csv");
    let depths_path = dir.join("depths.csv");
    if !history_path.exists() {
        missing.push(history_path.display().to_string());
    }
    if !depths_path.exists() {
        missing.push(depths_path.display().to_string());
    }
    if !missing.is_empty() {
        return Err(CliError::usage(format!(
            "missing inputs: {}",
            missing.join(", ")
        )));
    }

    let history = std::fs::read_to_string(&history_path)?;
    let last = history
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .last()
        .ok_or_else(|| CliError::usage(format!("{}: no data rows", history_path.display())))?;
    let fields: Vec<&str> = last.split(',').collect();
    if fields.len() != 4 {
        return Err(CliError::usage(format!(
            "{}: malformed row `{last}`",
            history_path.display()
        )));
    }
    let parse = |s: &str| -> CliResult<f64> {
        s.trim()
            .parse()
            .map_err(|_| CliError::usage(format!("{}: bad number `{s}`", history_path.display())))
    };
    let final_epoch = parse(fields[0])? as usize;
    let (final_task_loss, final_curv_loss, final_metric) =
        (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);

    let depths_text = std::fs::read_to_string(&depths_path)?;
    let mut kappas = Vec::new();
    let mut histogram = BTreeMap::new();
    for (lineno, line) in depths_text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(CliError::usage(format!(
                "{}:{}: expected vertex,kappa_hat,T",
                depths_path.display(),
                lineno + 1
            )));
        }
        let kappa: f64 = fields[1].trim().parse().map_err(|_| {
            CliError::usage(format!(
                "{}:{}: bad kappa",
                depths_path.display(),
                lineno + 1
            ))
        })?;
        let depth: usize = fields[2].trim().parse().map_err(|_| {
            CliError::usage(format!(
                "{}:{}: bad depth",
                depths_path.display(),
                lineno + 1
            ))
        })?;
        kappas.push(kappa);
        *histogram.entry(depth).or_insert(0usize) += 1;
    }
    if kappas.is_empty() {
        return Err(CliError::usage(format!(
            "{}: no data rows",
            depths_path.display()
        )));
    }
    kappas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(RunSummary {
        final_epoch,
        final_task_loss,
        final_curv_loss,
        final_metric,
        kappa_min: kappas[0],
        kappa_median: kappas[kappas.len() / 2],
        kappa_max: kappas[kappas.len() - 1],
        depth_histogram: histogram,
    })
}

fn summary_json(s: &RunSummary) -> serde_json::Value {
    serde_json::json!({
        "final": {
            "epoch": s.final_epoch,
            "L_task": s.final_task_loss,
            "L_curv": s.final_curv_loss,
            "metric": s.final_metric,
        },
        "kappa_hat": { "min": s.kappa_min, "median": s.kappa_median, "max": s.kappa_max },
        "depth_histogram":
            s.depth_histogram.iter().map(|(d, c)| (d.to_string(), *c)).collect::<BTreeMap<_, _>>(),
    })
}

pub fn report_cmd(args: ReportArgs) -> CliResult<()> {
    let dir = &args.run_dir;
    if !dir.is_dir() {
        return Err(CliError::usage(format!(
            "{} is not a directory",
            dir.display()
        )));
    }
    if dir.join("history.csv").exists() {
        // single run
        let summary = summarize_run(dir)?;
        write_text(
            &dir.join("summary.json"),
            &serde_json::to_string_pretty(&summary_json(&summary)).unwrap(),
        )?;
        let mut m = Manifest::new("report");
        m.set("run_dir", dir.display());
        m.input(&dir.join("history.csv"))?;
        m.input(&dir.join("depths.csv"))?;
        m.write(&dir.join("summary.manifest.json"))?;
        return Ok(());
    }

    // sweep: every subdirectory holding a history.csv becomes one row
    let mut subruns: Vec<PathBuf> = Vec::new();
    for entry in std::fs::read_dir(dir)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", dir.display())))?
    {
        let entry = entry.map_err(|e| CliError::usage(e.to_string()))?;
        let path = entry.path();
        if path.is_dir() && path.join("history.csv").exists() {
            subruns.push(path);
        }
    }
    if subruns.is_empty() {
        return Err(CliError::usage(format!(
            "missing inputs: {} contains neither history.csv nor run subdirectories",
            dir.display()
        )));
    }
    subruns.sort();
    let mut sweep = String::from("run,max_depth,k,final_L_task,final_L_curv,final_metric\n");
    let mut rows = Vec::new();
    for run in &subruns {
        let summary = summarize_run(run)?;
        let (max_depth, k) = read_manifest_config(run);
        let name = run
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let _ = writeln!(
            sweep,
            "{name},{},{},{},{},{}",
            max_depth.as_deref().unwrap_or(""),
            k.as_deref().unwrap_or(""),
            summary.final_task_loss,
            summary.final_curv_loss,
            summary.final_metric
        );
        rows.push((name, summary));
    }
    write_text(&dir.join("sweep.csv"), &sweep)?;
    let value = serde_json::json!({
        "runs": rows
            .iter()
            .map(|(name, s)| (name.clone(), summary_json(s)))
            .collect::<BTreeMap<_, _>>(),
    });
    write_text(
        &dir.join("summary.json"),
        &serde_json::to_string_pretty(&value).unwrap(),
    )?;
    let mut m = Manifest::new("report");
    m.set("run_dir", dir.display()).set("runs", subruns.len());
    m.write(&dir.join("summary.manifest.json"))
}

fn read_manifest_config(run: &Path) -> (Option<String>, Option<String>) {
    let Ok(text) = std::fs::read_to_string(run.join("manifest.json")) else {
        return (None, None);
    };
    let Ok(value) = serde_json::from_str::<serde_json::Value>(&text) else {
        return (None, None);
    };
    let get = |key: &str| {
        value
            .get("config")
            .and_then(|c| c.get(key))
            .and_then(|v| v.as_str())
            .map(|s| s.to_string())
    };
    (get("max_depth"), get("k"))
}
