//! Command-line front end.
//!
//! Subcommands: `generate`, `discover`, `train`, `eval`, `preset <name>`,
//! `verify`, `report`. Every experiment key from the config file can be
//! overridden with a dotted `--key value` flag. Exit codes: 0 success,
//! 1 validation error, 2 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use causal_dqn::discovery::{
    cpe_from_edge_list, discover_skeleton, estimate_cpe, format_cpdag, format_cpe,
    graph_metrics, orient_edges, parse_edge_list, Cpdag, CpeMatrix,
};
use causal_dqn::harness::report::{
    format_curves_csv, format_results_csv, parse_results_csv, svg_line_chart, ResultRow,
};
use causal_dqn::envir::format_trace_csv;
use causal_dqn::harness::{
    evaluate_add, execute_run, preset_runs, trace_single_eval, train, ExperimentConfig,
};
use causal_dqn::qnet::{format_checkpoint, parse_checkpoint};
use causal_dqn::streams::{
    generate_streams, load_csv_streams, write_csv_streams, CausalGraph, ShiftSpec,
};
use causal_dqn::theory::{
    check_contraction, check_convergence_time, check_convexity, check_error_decay,
    check_finite_time_bound, check_qstar_bounds, random_mdp, solve_qstar, BoundReport,
};
use causal_dqn::{harness, Error};

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() {
        eprintln!("{USAGE}");
        return ExitCode::from(1);
    }
    let command = args[0].clone();
    match run(&command, &args[1..]) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Invalid(_) | Error::Parse { .. } => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

const USAGE: &str = "\
usage: causal-dqn <command> [options]

commands:
  generate   emit a synthetic stream CSV (plus optional DAG edge list)
  discover   run causal discovery on a stream CSV, emit edge list + metrics
  train      train a policy, emit checkpoint + propagation + reward curve
  eval       evaluate detection delay of a checkpoint, emit a results CSV
  preset     run a named experiment preset end to end
  verify     numerically certify the theoretical bounds, emit a CSV
  report     re-render CSV results/curves as SVG charts

options are dotted config keys (--p 50, --net.lr 0.001, ...) plus the
command-specific flags described in the README. `--config FILE` loads a
key = value file before the overrides apply.";

/// Parsed flag list: `--key value` pairs in order plus positionals.
struct Flags {
    pairs: Vec<(String, String)>,
    positional: Vec<String>,
}

fn parse_flags(args: &[String]) -> Result<Flags, Error> {
    let mut pairs = Vec::new();
    let mut positional = Vec::new();
    let mut it = args.iter().peekable();
    while let Some(arg) = it.next() {
        if let Some(key) = arg.strip_prefix("--") {
            let value = it
                .next()
                .ok_or_else(|| Error::Invalid(format!("flag --{key} needs a value")))?;
            pairs.push((key.to_string(), value.clone()));
        } else {
            positional.push(arg.clone());
        }
    }
    Ok(Flags { pairs, positional })
}

impl Flags {
    fn take(&mut self, key: &str) -> Option<String> {
        let pos = self.pairs.iter().position(|(k, _)| k == key)?;
        Some(self.pairs.remove(pos).1)
    }

    fn take_parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, Error> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::Invalid(format!("bad value {v:?} for --{key}"))),
        }
    }

    /// Remaining pairs are experiment-config overrides.
    fn into_config(mut self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match self.take("config") {
            Some(path) => {
                let text = std::fs::read_to_string(&path)?;
                harness::config::parse_config(&text)?
            }
            None => ExperimentConfig::default(),
        };
        for (key, value) in &self.pairs {
            cfg.apply_kv(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn run(command: &str, rest: &[String]) -> Result<(), Error> {
    match command {
        "generate" => cmd_generate(parse_flags(rest)?),
        "discover" => cmd_discover(parse_flags(rest)?),
        "train" => cmd_train(parse_flags(rest)?),
        "eval" => cmd_eval(parse_flags(rest)?),
        "preset" => cmd_preset(parse_flags(rest)?),
        "verify" => cmd_verify(parse_flags(rest)?),
        "report" => cmd_report(parse_flags(rest)?),
        "help" | "--help" | "-h" => {
            println!("{USAGE}");
            Ok(())
        }
        other => Err(Error::Invalid(format!("unknown command {other:?}\n{USAGE}"))),
    }
}

fn cmd_generate(mut flags: Flags) -> Result<(), Error> {
    let out = flags
        .take("out")
        .ok_or_else(|| Error::Invalid("generate needs --out FILE".into()))?;
    let dag_out = flags.take("dag-out");
    let onset = flags.take_parsed::<usize>("onset")?;
    let duration = flags.take_parsed::<usize>("duration")?;
    if let Some(delta) = flags.take("delta") {
        flags.pairs.push(("delta_test".into(), delta));
    }
    let cfg = flags.into_config()?;
    let dag = harness::experiment_system(&cfg)?;
    let onset = onset.unwrap_or_else(|| (cfg.horizon / 4).max(1));
    let duration = duration.unwrap_or(cfg.horizon.saturating_sub(onset));
    let spec = ShiftSpec {
        shifted_indices: (0..cfg.k).collect(),
        pattern: cfg.pattern,
        delta: cfg.delta_test,
        onset,
        duration,
        noise_sigma: cfg.noise_sigma,
    };
    let batch = generate_streams(&dag, &spec, cfg.horizon, cfg.seed)?;
    write_file(Path::new(&out), &write_csv_streams(&batch))?;
    println!(
        "wrote {} rows x {} streams to {out} (shift delta={} at t={onset})",
        batch.horizon, batch.p, cfg.delta_test
    );
    if let Some(dag_path) = dag_out {
        write_file(Path::new(&dag_path), &format_cpdag(&Cpdag::from_dag(&dag.graph)))?;
        println!("wrote ground-truth DAG to {dag_path}");
    }
    Ok(())
}

fn cmd_discover(mut flags: Flags) -> Result<(), Error> {
    let input = flags
        .take("input")
        .ok_or_else(|| Error::Invalid("discover needs --input FILE".into()))?;
    let out = flags.take("out");
    let metrics_out = flags.take("metrics-out");
    let truth_path = flags.take("truth");
    let first_col = flags.take_parsed::<usize>("first-col")?.unwrap_or(1);
    let last_col = flags.take_parsed::<usize>("last-col")?;
    let cfg = flags.into_config()?;

    let probe = std::fs::read_to_string(&input)?;
    let cols = probe
        .lines()
        .find(|l| !l.trim().is_empty())
        .map(|l| l.split(',').count())
        .unwrap_or(0);
    let last_col = last_col.unwrap_or(cols);
    let batch = load_csv_streams(Path::new(&input), first_col, last_col)?;
    let skeleton =
        discover_skeleton(&batch.values, cfg.discovery.alpha_sig, cfg.discovery.max_cond)?;
    let graph = orient_edges(&skeleton);
    let cpe = estimate_cpe(&batch.values, &graph)?;
    println!(
        "discovered {} directed + {} undirected edges over p={}",
        graph.directed_edge_count(),
        graph.undirected_edge_count(),
        graph.p
    );
    if let Some(out) = out {
        write_file(Path::new(&out), &format_cpdag(&graph))?;
        let cpe_path = format!("{out}.cpe");
        write_file(Path::new(&cpe_path), &format_cpe(&cpe))?;
        println!("wrote edge list to {out} and propagation weights to {cpe_path}");
    }
    if let Some(truth_path) = truth_path {
        let text = std::fs::read_to_string(&truth_path)?;
        let (p, entries) = parse_edge_list(&text)?;
        if p != graph.p {
            return Err(Error::Invalid(format!(
                "truth graph has p={p}, data has p={}",
                graph.p
            )));
        }
        let mut truth = CausalGraph::empty(p);
        for e in &entries {
            if e.directed {
                truth.adjacency[e.from][e.to] = true;
            }
        }
        let metrics = graph_metrics(&graph, &truth)?;
        let fdr_text = if metrics.fdr_defined {
            format!("{}", metrics.fdr)
        } else {
            "undefined".into()
        };
        let csv = format!(
            "shd,tpr,fdr\n{},{},{}\n",
            metrics.shd, metrics.tpr, fdr_text
        );
        println!("metrics: SHD={} TPR={} FDR={fdr_text}", metrics.shd, metrics.tpr);
        if let Some(mpath) = metrics_out {
            write_file(Path::new(&mpath), &csv)?;
        }
    }
    Ok(())
}

fn out_dir(flags: &mut Flags) -> PathBuf {
    PathBuf::from(flags.take("out-dir").unwrap_or_else(|| "runs".into()))
}

fn cmd_train(mut flags: Flags) -> Result<(), Error> {
    let dir = out_dir(&mut flags);
    let cfg = flags.into_config()?;
    let trained = train(&cfg)?;
    write_file(&dir.join("checkpoint.txt"), &format_checkpoint(&trained.params))?;
    write_file(&dir.join("cpe.txt"), &format_cpe(&trained.cpe))?;
    let label = harness::mode_label(cfg.mode).to_string();
    write_file(
        &dir.join("curve.csv"),
        &format_curves_csv(std::slice::from_ref(&label), std::slice::from_ref(&trained.curve)),
    )?;
    write_file(
        &dir.join("curve.svg"),
        &svg_line_chart(
            &format!("training rewards (p={}, m={})", cfg.p, cfg.m),
            "episode",
            "cumulative reward",
            &[(label, trained.curve.clone())],
        ),
    )?;
    let last = trained.curve.last().copied().unwrap_or(0.0);
    println!(
        "trained {} episodes (final episode reward {last}); artifacts in {}",
        trained.curve.len(),
        dir.display()
    );
    Ok(())
}

fn cmd_eval(mut flags: Flags) -> Result<(), Error> {
    let ckpt = flags
        .take("checkpoint")
        .ok_or_else(|| Error::Invalid("eval needs --checkpoint FILE".into()))?;
    let cpe_path = flags.take("cpe");
    let out = flags.take("out");
    let trace_path = flags.take("trace");
    let cfg = flags.into_config()?;
    let params = parse_checkpoint(&std::fs::read_to_string(&ckpt)?)?;
    if params.input_width() != 3 * cfg.p || params.output_width() != cfg.p {
        return Err(Error::Invalid(format!(
            "checkpoint is {}->{} but config p={} needs {}->{}",
            params.input_width(),
            params.output_width(),
            cfg.p,
            3 * cfg.p,
            cfg.p
        )));
    }
    let cpe = match cpe_path {
        Some(path) => {
            let (p, entries) = parse_edge_list(&std::fs::read_to_string(&path)?)?;
            if p != cfg.p {
                return Err(Error::Invalid(format!("cpe p={p} but config p={}", cfg.p)));
            }
            cpe_from_edge_list(p, &entries)?
        }
        None => CpeMatrix::identity(cfg.p),
    };
    let report = evaluate_add(&params, &cpe, &cfg, cfg.replications)?;
    let row = ResultRow {
        method: harness::mode_label(cfg.mode).to_string(),
        p: cfg.p,
        m: cfg.m,
        delta: cfg.delta_test,
        sigma: cfg.noise_sigma,
        mean_add: report.mean_add,
        stderr: report.stderr,
        false_alarm_rate: report.false_alarm_rate,
        seed_count: report.replications,
    };
    let csv = format_results_csv(&[row]);
    println!(
        "mean ADD {} (stderr {}) over {} replications, false alarm rate {}",
        report.mean_add, report.stderr, report.replications, report.false_alarm_rate
    );
    if let Some(out) = out {
        write_file(Path::new(&out), &csv)?;
        println!("wrote {out}");
    }
    if let Some(trace_path) = trace_path {
        let rows = trace_single_eval(&params, &cpe, &cfg, 0)?;
        write_file(Path::new(&trace_path), &format_trace_csv(&rows))?;
        println!("wrote per-step trace of replication 0 to {trace_path}");
    }
    Ok(())
}

fn cmd_preset(mut flags: Flags) -> Result<(), Error> {
    let name = flags
        .positional
        .first()
        .cloned()
        .ok_or_else(|| Error::Invalid("preset needs a name argument".into()))?;
    let dir = out_dir(&mut flags);
    let overrides = flags.pairs.clone();
    let mut runs = preset_runs(&name)?;
    for run in runs.iter_mut() {
        for (key, value) in &overrides {
            if key != "config" {
                run.cfg.apply_kv(key, value)?;
            }
        }
        run.cfg.validate()?;
    }
    let mut rows = Vec::new();
    let mut curves: Vec<(String, Vec<f64>)> = Vec::new();
    for run in &runs {
        let (row, trained) = execute_run(run)?;
        println!(
            "{}: mean ADD {} (stderr {}), false alarms {}",
            run.label, row.mean_add, row.stderr, row.false_alarm_rate
        );
        rows.push(row);
        curves.push((run.label.clone(), trained.curve));
    }
    write_file(&dir.join(format!("{name}.csv")), &format_results_csv(&rows))?;
    let labels: Vec<String> = curves.iter().map(|(l, _)| l.clone()).collect();
    let series: Vec<Vec<f64>> = curves.iter().map(|(_, c)| c.clone()).collect();
    write_file(&dir.join(format!("{name}-curves.csv")), &format_curves_csv(&labels, &series))?;
    write_file(
        &dir.join(format!("{name}.svg")),
        &svg_line_chart(&name, "episode", "cumulative reward", &curves),
    )?;
    println!("preset {name}: {} runs written to {}", runs.len(), dir.display());
    Ok(())
}

fn cmd_verify(mut flags: Flags) -> Result<(), Error> {
    let out = flags.take("out");
    let mdps = flags.take_parsed::<usize>("mdps")?.unwrap_or(20);
    let trials = flags.take_parsed::<usize>("trials")?.unwrap_or(1000);
    let ft_trials = flags.take_parsed::<usize>("finite-trials")?.unwrap_or(200);
    let seed = flags.take_parsed::<u64>("seed")?.unwrap_or(1);
    if !flags.pairs.is_empty() {
        return Err(Error::Invalid(format!("unknown flag --{}", flags.pairs[0].0)));
    }

    let mut reports: Vec<BoundReport> = Vec::new();
    let mut aggregate = |name: &str, items: Vec<BoundReport>| {
        let checked = items.iter().map(|r| r.checked).sum();
        let violations = items.iter().map(|r| r.violations).sum();
        let max_slack =
            items.iter().map(|r| r.max_slack).fold(f64::INFINITY, f64::min);
        let params = items.first().map(|r| r.params.clone()).unwrap_or_default();
        reports.push(BoundReport {
            check: name.to_string(),
            checked,
            violations,
            max_slack,
            params: format!("mdps={} {}", items.len(), params),
        });
    };

    let mut contraction = Vec::new();
    let mut qbounds = Vec::new();
    let mut decay = Vec::new();
    let mut conv_time = Vec::new();
    for i in 0..mdps {
        let n_states = 3 + (i % 6);
        let n_actions = 2 + (i % 3);
        let gamma = 0.75 + 0.04 * (i % 5) as f64;
        let tau = 0.6 + 0.1 * (i % 4) as f64;
        let mdp = random_mdp(n_states, n_actions, gamma, tau, seed + i as u64);
        contraction.push(check_contraction(&mdp, trials, seed + 1000 + i as u64));
        let qstar = solve_qstar(&mdp, 1e-12)?;
        qbounds.push(check_qstar_bounds(&mdp, &qstar));
        decay.push(check_error_decay(&mdp, &qstar, 200));
        let bias = mdp.gamma / (1.0 - mdp.gamma) * mdp.log_mask_sum() / mdp.tau;
        let eps_grid = [bias + 0.05, bias + 0.5, bias + 2.0];
        conv_time.push(check_convergence_time(&mdp, &qstar, &eps_grid)?);
    }
    aggregate("contraction", contraction);
    aggregate("qstar-bounds", qbounds);
    aggregate("error-decay", decay);
    aggregate("convergence-time", conv_time);

    let mut finite = Vec::new();
    for i in 0..3 {
        let mdp = random_mdp(3, 2, 0.8, 1.0, seed + 500 + i);
        finite.push(check_finite_time_bound(&mdp, 0.1, 1000, ft_trials, seed + 600 + i)?);
    }
    aggregate("finite-time", finite);
    reports.push(check_convexity(6, 10_000, seed + 700));

    let mut csv = String::from("check,checked,violations,max_slack,params\n");
    for r in &reports {
        println!(
            "{}: {} checks, {} violations, max slack {}",
            r.check, r.checked, r.violations, r.max_slack
        );
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    if let Some(out) = out {
        write_file(Path::new(&out), &csv)?;
        println!("wrote {out}");
    }
    if reports.iter().any(|r| r.violations > 0) {
        return Err(Error::Invalid("bound violations detected".into()));
    }
    Ok(())
}

fn cmd_report(mut flags: Flags) -> Result<(), Error> {
    let out = flags
        .take("out")
        .ok_or_else(|| Error::Invalid("report needs --out FILE".into()))?;
    if let Some(curves_path) = flags.take("curves") {
        let text = std::fs::read_to_string(&curves_path)?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse { row: 1, col: 1, msg: "empty curves file".into() })?;
        let labels: Vec<String> =
            header.split(',').skip(1).map(|s| s.to_string()).collect();
        if labels.is_empty() {
            return Err(Error::Parse { row: 1, col: 1, msg: "no curve columns".into() });
        }
        let mut series: Vec<Vec<f64>> = vec![Vec::new(); labels.len()];
        for (idx, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            for (col, cell) in line.split(',').skip(1).enumerate() {
                if cell.is_empty() || col >= series.len() {
                    continue;
                }
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row: idx + 2,
                    col: col + 2,
                    msg: format!("bad number {cell:?}"),
                })?;
                series[col].push(v);
            }
        }
        let chart: Vec<(String, Vec<f64>)> = labels.into_iter().zip(series).collect();
        write_file(Path::new(&out), &svg_line_chart("training rewards", "episode", "cumulative reward", &chart))?;
        println!("wrote {out}");
        return Ok(());
    }
    if let Some(results_path) = flags.take("results") {
        let rows = parse_results_csv(&std::fs::read_to_string(&results_path)?)?;
        if rows.is_empty() {
            return Err(Error::Invalid("results file has no rows".into()));
        }
        // group rows by method; x axis is the row's delta
        let mut methods: Vec<String> = Vec::new();
        for r in &rows {
            if !methods.contains(&r.method) {
                methods.push(r.method.clone());
            }
        }
        let series: Vec<(String, Vec<f64>)> = methods
            .iter()
            .map(|m| {
                (
                    m.clone(),
                    rows.iter().filter(|r| &r.method == m).map(|r| r.mean_add).collect(),
                )
            })
            .collect();
        write_file(Path::new(&out), &svg_line_chart("detection delay", "grid point", "mean ADD", &series))?;
        println!("wrote {out}");
        return Ok(());
    }
    Err(Error::Invalid("report needs --curves FILE or --results FILE".into()))
}
