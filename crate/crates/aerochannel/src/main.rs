use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use aerochannel::cli::{
    self, exit_code_for, gnuplot_script, parse_loads, resolve_env, sanitize_filename, RunManifest,
};
use aerochannel::closed_forms::{
    mi_active_relay, mi_passive_relay, mi_relay_end_to_end, mi_ternary, mi_two_rx, mi_two_tx, mi_z,
    relay_cascade_channel, ternary_channel, two_rx_channels, two_tx_channel, z_channel,
    RelayParams, TwoPartyParams, ZParams,
};
use aerochannel::dmc;
use aerochannel::environment::{builtin, EnvironmentSpec, PRESET_NAMES};
use aerochannel::error::{Error, Result};
use aerochannel::mc;

#[derive(Parser)]
#[command(
    name = "aerochannel",
    version,
    about = "Infection-rate analysis and Monte Carlo particle simulation of airborne transmission"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a closed-form infection rate and compare it against the
    /// exact evaluator on the explicit channel.
    Analytic {
        #[arg(value_enum)]
        model: Model,
        /// Infection probability of emitted particles (first source/class).
        #[arg(long)]
        p1: Option<f64>,
        /// Transition probability to the (first) receiver.
        #[arg(long)]
        q1: Option<f64>,
        /// Second source/class infection probability.
        #[arg(long)]
        p2: Option<f64>,
        /// Second transition probability (second receiver, droplet class, or relay hop).
        #[arg(long)]
        q2: Option<f64>,
        /// Post-incubation emission infection probability of an active relay.
        #[arg(long)]
        boost: Option<f64>,
        /// Also write the comparison table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run Monte Carlo trials and write per-receiver transition estimates.
    Simulate {
        /// Environment: a JSON file path, a preset name under
        /// $AEROCHANNEL_PRESET_DIR, or a builtin preset name.
        #[arg(long)]
        env: String,
        /// Number of statistically independent trials.
        #[arg(long, default_value_t = 1)]
        runs: u32,
        /// Master seed; per-trial seeds derive from it.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads for trial parallelism (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory.
        #[arg(long, default_value = "aerochannel-out")]
        out: PathBuf,
        /// Override the environment's cough count per emitter.
        #[arg(long)]
        n_events: Option<u32>,
    },
    /// Simulate, then sweep viral load and write infection-measure curves.
    Sweep {
        #[arg(long)]
        env: String,
        #[arg(long, default_value_t = 1)]
        runs: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value = "aerochannel-out")]
        out: PathBuf,
        /// Viral loads to evaluate: `start:stop:points[,log|lin]` or a single
        /// value, in virions per milliliter.
        #[arg(long)]
        loads: String,
        /// Override the environment's cough count per emitter.
        #[arg(long)]
        n_events: Option<u32>,
        /// Dose threshold: adds an nPhi_over_theta column to the rate curves.
        #[arg(long)]
        theta: Option<f64>,
    },
    /// List or export the builtin environment presets.
    Presets {
        #[command(subcommand)]
        action: PresetsAction,
    },
}

#[derive(Subcommand)]
enum PresetsAction {
    /// Print the builtin preset names.
    List,
    /// Write a builtin preset's environment document to a file.
    Export { name: String, path: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Model {
    /// Point-to-point (one infected emitter, one receiver).
    Z,
    /// Two independent transmitters, one receiver.
    TwoTx,
    /// One transmitter, two receivers.
    TwoRx,
    /// Passive relay, second-hop form.
    RelayPassive,
    /// Passive relay, end-to-end composed channel.
    RelayEndtoend,
    /// Active relay (post-incubation re-emission).
    RelayActive,
    /// Ternary input: uninfected / aerosol / droplet.
    Ternary,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            let code = if e.use_stderr() {
                cli::EXIT_VALIDATION
            } else {
                cli::EXIT_OK
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::from(cli::EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Analytic {
            model,
            p1,
            q1,
            p2,
            q2,
            boost,
            csv,
        } => run_analytic(model, p1, q1, p2, q2, boost, csv),
        Command::Simulate {
            env,
            runs,
            seed,
            workers,
            out,
            n_events,
        } => run_simulate(&env, runs, seed, workers, &out, n_events),
        Command::Sweep {
            env,
            runs,
            seed,
            workers,
            out,
            loads,
            n_events,
            theta,
        } => run_sweep(&env, runs, seed, workers, &out, &loads, n_events, theta),
        Command::Presets { action } => run_presets(action),
    }
}

struct AnalyticRow {
    label: String,
    closed_form: f64,
    exact: f64,
}

fn require(name: &str, value: Option<f64>) -> Result<f64> {
    value.ok_or_else(|| Error::InvalidParam(format!("--{name} is required for this model")))
}

fn analytic_rows(
    model: Model,
    p1: Option<f64>,
    q1: Option<f64>,
    p2: Option<f64>,
    q2: Option<f64>,
    boost: Option<f64>,
) -> Result<Vec<AnalyticRow>> {
    let rows = match model {
        Model::Z => {
            let params = ZParams::new(require("p1", p1)?, require("q1", q1)?)?;
            let (ch, px) = z_channel(&params);
            vec![AnalyticRow {
                label: "z".into(),
                closed_form: mi_z(&params),
                exact: dmc::per_output_mi(&ch, &px, 1)?,
            }]
        }
        Model::TwoTx => {
            let params = TwoPartyParams::new(
                require("p1", p1)?,
                require("q1", q1)?,
                require("p2", p2)?,
                require("q2", q2)?,
            )?;
            let (ch, px) = two_tx_channel(&params);
            vec![AnalyticRow {
                label: "two-tx".into(),
                closed_form: mi_two_tx(&params),
                exact: dmc::per_output_mi(&ch, &px, 1)?,
            }]
        }
        Model::TwoRx => {
            let params = TwoPartyParams::new(
                require("p1", p1)?,
                require("q1", q1)?,
                p2.unwrap_or(0.0),
                require("q2", q2)?,
            )?;
            let (r1, r2) = mi_two_rx(&params);
            let ((ch1, px1), (ch2, px2)) = two_rx_channels(&params);
            vec![
                AnalyticRow {
                    label: "two-rx:receiver1".into(),
                    closed_form: r1,
                    exact: dmc::per_output_mi(&ch1, &px1, 1)?,
                },
                AnalyticRow {
                    label: "two-rx:receiver2".into(),
                    closed_form: r2,
                    exact: dmc::per_output_mi(&ch2, &px2, 1)?,
                },
            ]
        }
        Model::RelayPassive => {
            let params = RelayParams::new(
                require("p1", p1)?,
                require("q1", q1)?,
                require("q2", q2)?,
                boost,
                false,
            )?;
            // The second hop in isolation is itself a point-to-point channel
            // with input probability p1 * q1.
            let hop = ZParams::new(params.p1 * params.q1, params.q2)?;
            let (ch, px) = z_channel(&hop);
            vec![AnalyticRow {
                label: "relay-passive".into(),
                closed_form: mi_passive_relay(&params)?,
                exact: dmc::per_output_mi(&ch, &px, 1)?,
            }]
        }
        Model::RelayEndtoend => {
            let params = RelayParams::new(
                require("p1", p1)?,
                require("q1", q1)?,
                require("q2", q2)?,
                boost,
                false,
            )?;
            let (ch, px) = relay_cascade_channel(&params)?;
            vec![AnalyticRow {
                label: "relay-endtoend".into(),
                closed_form: mi_relay_end_to_end(&params)?,
                exact: dmc::per_output_mi(&ch, &px, 1)?,
            }]
        }
        Model::RelayActive => {
            let params = RelayParams::new(
                p1.unwrap_or(0.0),
                q1.unwrap_or(0.0),
                require("q2", q2)?,
                Some(require("boost", boost)?),
                true,
            )?;
            let hop = ZParams::new(params.boost.expect("checked above"), params.q2)?;
            let (ch, px) = z_channel(&hop);
            vec![AnalyticRow {
                label: "relay-active".into(),
                closed_form: mi_active_relay(&params)?,
                exact: dmc::per_output_mi(&ch, &px, 1)?,
            }]
        }
        Model::Ternary => {
            let params = TwoPartyParams::new(
                require("p1", p1)?,
                require("q1", q1)?,
                require("p2", p2)?,
                require("q2", q2)?,
            )?;
            let (ch, px) = ternary_channel(&params)?;
            vec![AnalyticRow {
                label: "ternary".into(),
                closed_form: mi_ternary(&params)?,
                exact: dmc::per_output_mi(&ch, &px, 1)?,
            }]
        }
    };
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn run_analytic(
    model: Model,
    p1: Option<f64>,
    q1: Option<f64>,
    p2: Option<f64>,
    q2: Option<f64>,
    boost: Option<f64>,
    csv: Option<PathBuf>,
) -> Result<()> {
    let started = Instant::now();
    let rows = analytic_rows(model, p1, q1, p2, q2, boost)?;

    println!(
        "{:<20} {:>16} {:>16} {:>12}",
        "model", "closed_form", "exact_dmc", "difference"
    );
    for row in &rows {
        println!(
            "{:<20} {:>16.9} {:>16.9} {:>12.3e}",
            row.label,
            row.closed_form,
            row.exact,
            row.closed_form - row.exact
        );
    }

    if let Some(path) = csv {
        let mut text = String::from("model,p1,q1,p2,q2,boost,closed_form,exact,difference\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for row in &rows {
            text.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                row.label,
                opt(p1),
                opt(q1),
                opt(p2),
                opt(q2),
                opt(boost),
                row.closed_form,
                row.exact,
                row.closed_form - row.exact
            ));
        }
        std::fs::write(&path, text)?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        let params_doc =
            format!("{model:?} p1={p1:?} q1={q1:?} p2={p2:?} q2={q2:?} boost={boost:?}");
        let mut manifest = RunManifest::new("analytic", &params_doc, 0, 0);
        manifest.outputs = vec![path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default()];
        manifest.duration_seconds = started.elapsed().as_secs_f64();
        manifest.write(dir)?;
    }
    Ok(())
}

/// Apply command-line overrides (flags beat the environment document).
fn apply_overrides(env: &mut EnvironmentSpec, n_events: Option<u32>) -> Result<()> {
    if let Some(n) = n_events {
        env.n_events = n;
    }
    env.validate()
}

fn with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    match workers {
        None => f(),
        Some(n) => {
            if n == 0 {
                return Err(Error::InvalidParam("--workers must be >= 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParam(format!("worker pool: {e}")))?;
            pool.install(f)
        }
    }
}

fn write_trials_csv(
    path: &Path,
    receiver_ids: &[String],
    trials: &[mc::TrialResult],
) -> Result<()> {
    let mut text = String::from("trial,seed,emitted,wall_absorbed,capped_live,capped");
    for id in receiver_ids {
        text.push_str(&format!(",hits_{id}"));
    }
    text.push('\n');
    for (i, t) in trials.iter().enumerate() {
        text.push_str(&format!(
            "{},{},{},{},{},{}",
            i,
            t.trial_seed,
            t.emitted_total(),
            t.wall_total(),
            t.capped_total(),
            t.capped
        ));
        for r in 0..receiver_ids.len() {
            text.push_str(&format!(",{}", t.hits_total(r)));
        }
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn prepare_run(env_arg: &str, runs: u32, n_events: Option<u32>) -> Result<EnvironmentSpec> {
    if runs == 0 {
        return Err(Error::InvalidParam("--runs must be >= 1".into()));
    }
    let mut env = resolve_env(env_arg)?;
    apply_overrides(&mut env, n_events)?;
    if !mc::integrator_supports_spectrum(&env) {
        return Err(Error::InvalidConfig(
            "physics.integrator: the explicit update is unstable for the smallest emission \
             diameters at this time step; use the exponential integrator or coarsen the spectrum"
                .into(),
        ));
    }
    Ok(env)
}

fn run_simulate(
    env_arg: &str,
    runs: u32,
    seed: u64,
    workers: Option<usize>,
    out: &Path,
    n_events: Option<u32>,
) -> Result<()> {
    let started = Instant::now();
    let env = prepare_run(env_arg, runs, n_events)?;
    std::fs::create_dir_all(out)?;

    let trials = with_workers(workers, || mc::run_trials(&env, runs, seed))?;
    let est = mc::aggregate_trials(&env, &trials)?;

    if !est.memoryless {
        eprintln!(
            "warning: event interval {}s does not clear the fall time of the emission \
             spectrum's mass-median diameter; the memoryless-channel assumption is strained",
            env.event_interval_s
        );
    }
    if est.capped {
        eprintln!(
            "warning: some particles were still airborne at the per-cough time cap; \
             their counts are reported in the capped_live column"
        );
    }

    let transitions_path = out.join("transitions.csv");
    std::fs::write(&transitions_path, est.to_csv_string())?;
    let trials_path = out.join("trials.csv");
    write_trials_csv(&trials_path, &est.receiver_ids, &trials)?;

    let mut manifest = RunManifest::new(env_arg, &env.to_json(), seed, runs);
    manifest.workers = workers;
    manifest.outputs = vec!["transitions.csv".into(), "trials.csv".into()];
    manifest.duration_seconds = started.elapsed().as_secs_f64();
    manifest.write(out)?;

    println!(
        "simulated {} trial(s) of `{}`: {} receivers, {} diameter bins, {} particles",
        runs,
        env_arg,
        est.receiver_ids.len(),
        est.bins.len(),
        est.emitted_by_bin.iter().sum::<u64>()
    );
    println!("wrote {}", transitions_path.display());
    println!("wrote {}", trials_path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_sweep(
    env_arg: &str,
    runs: u32,
    seed: u64,
    workers: Option<usize>,
    out: &Path,
    loads_spec: &str,
    n_events: Option<u32>,
    theta: Option<f64>,
) -> Result<()> {
    let started = Instant::now();
    let loads = parse_loads(loads_spec)?;
    if let Some(theta) = theta {
        if theta <= 0.0 || !theta.is_finite() {
            return Err(Error::InvalidParam(format!(
                "--theta = {theta}, must be > 0"
            )));
        }
    }
    let env = prepare_run(env_arg, runs, n_events)?;
    std::fs::create_dir_all(out)?;

    let trials = with_workers(workers, || mc::run_trials(&env, runs, seed))?;
    let est = mc::aggregate_trials(&env, &trials)?;
    if !est.memoryless {
        eprintln!(
            "warning: event interval {}s does not clear the fall time of the emission \
             spectrum's mass-median diameter; the memoryless-channel assumption is strained",
            env.event_interval_s
        );
    }

    let transitions_path = out.join("transitions.csv");
    std::fs::write(&transitions_path, est.to_csv_string())?;
    let mut outputs = vec!["transitions.csv".into()];

    let n = n_events.unwrap_or(env.n_events) as u64;
    let mut rate_files = Vec::new();
    for id in est.receiver_ids.clone() {
        let curve = mc::rate_curve(&est, &id, &loads, &env.emission, n)?;
        let file = format!("rate_{}.csv", sanitize_filename(&id));
        std::fs::write(out.join(&file), curve.to_csv_string(theta))?;
        if let Some(theta) = theta {
            let last = curve.loads.len() - 1;
            println!(
                "receiver {}: at load {:.3e}, nPhi = {:.4e}, nPhi/theta = {:.4e} ({})",
                id,
                curve.loads[last],
                curve.n_phi(last),
                curve.n_phi(last) / theta,
                if curve.n_phi(last) > theta {
                    "infected"
                } else {
                    "not infected"
                }
            );
        }
        rate_files.push(file);
    }
    outputs.extend(rate_files.iter().cloned());

    let plot_path = out.join("plot.gp");
    std::fs::write(&plot_path, gnuplot_script(&rate_files))?;
    outputs.push("plot.gp".into());

    let mut manifest = RunManifest::new(env_arg, &env.to_json(), seed, runs);
    manifest.workers = workers;
    manifest.outputs = outputs;
    manifest.duration_seconds = started.elapsed().as_secs_f64();
    manifest.write(out)?;

    println!(
        "swept {} load(s) over {} receiver(s); outputs in {}",
        loads.len(),
        est.receiver_ids.len(),
        out.display()
    );
    Ok(())
}

fn run_presets(action: PresetsAction) -> Result<()> {
    match action {
        PresetsAction::List => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
            Ok(())
        }
        PresetsAction::Export { name, path } => {
            let env = builtin(&name)?;
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(&path, env.to_json())?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}
