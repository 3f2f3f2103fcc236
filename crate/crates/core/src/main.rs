use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use globrob::bnb::BnbOptions;
use globrob::depprop::{compute_dependencies, DepOptions};
use globrob::mip::{compute_concrete_bounds, BoundOptions, NetCopy};
use globrob::net::{load_dataset, load_network, Network};
use globrob::perturb::{enumerate_discrete, PerturbationSpec};
use globrob::verify::{
    compute_delta_m, emit_report, grid_oracle, sampling_baselines, Mode, VerificationRequest, DEFAULT_PRECISION,
};
use globrob::{Error, Result};

/// Global robustness bounds for small ReLU image classifiers.
#[derive(Parser)]
#[command(name = "globrob", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bound the maximal globally non-robust confidence of a class.
    Verify(VerifyArgs),
    /// Maximal confidence of a class over the whole input box.
    DeltaM(DeltaMArgs),
    /// Print the dependency matrix for each enumerated perturbation.
    Deps(DepsArgs),
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    net: PathBuf,
    /// Source class c'.
    #[arg(long = "class")]
    class: usize,
    /// Comma-separated target classes, or `all`.
    #[arg(long, default_value = "all")]
    targets: String,
    /// Perturbation, e.g. "occlusion(14,14,3)" or "brightness([0,0.1])".
    #[arg(long)]
    perturb: String,
    /// Seconds per MIP.
    #[arg(long, env = "GLOBROB_TIMEOUT", default_value_t = 60.0)]
    timeout: f64,
    /// Precision level added to the non-robust bound.
    #[arg(long, env = "GLOBROB_DELTA", default_value_t = DEFAULT_PRECISION)]
    delta: f64,
    #[arg(long, env = "GLOBROB_SEED", default_value_t = 0)]
    seed: u64,
    /// Dataset file used to seed the attack.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    no_deps: bool,
    #[arg(long)]
    no_attack: bool,
    /// Ignore attack hints in the MIP.
    #[arg(long)]
    no_hints: bool,
    /// Also compute the dataset and random sampling baselines.
    #[arg(long)]
    baselines: bool,
    #[arg(long, env = "GLOBROB_SAMPLES", default_value_t = 1000)]
    samples: usize,
    /// Run the grid oracle with this step.
    #[arg(long)]
    oracle_grid: Option<f64>,
    #[arg(long, env = "GLOBROB_ATTACK_M", default_value_t = 64)]
    attack_m: usize,
    #[arg(long, env = "GLOBROB_ATTACK_ITERS", default_value_t = 300)]
    attack_iters: usize,
    #[arg(long, env = "GLOBROB_ATTACK_ETA", default_value_t = 0.05)]
    attack_eta: f64,
    /// Absolute optimality gap.
    #[arg(long, env = "GLOBROB_GAP", default_value_t = 1e-6)]
    gap: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DeltaMArgs {
    #[arg(long)]
    net: PathBuf,
    #[arg(long = "class")]
    class: usize,
    #[arg(long, env = "GLOBROB_TIMEOUT", default_value_t = 60.0)]
    timeout: f64,
}

#[derive(Args)]
struct DepsArgs {
    #[arg(long)]
    net: PathBuf,
    #[arg(long)]
    perturb: String,
}

fn parse_targets(text: &str, net: &Network, class: usize) -> Result<Vec<usize>> {
    if text.trim().eq_ignore_ascii_case("all") {
        return Ok(VerificationRequest::all_targets(net, class));
    }
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Argument(format!("bad target class '{t}'")))
        })
        .collect()
}

fn duration(secs: f64) -> Result<Duration> {
    Duration::try_from_secs_f64(secs).map_err(|_| Error::Argument(format!("bad timeout {secs}")))
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn run_verify(a: VerifyArgs) -> Result<()> {
    let net = load_network(&a.net)?;
    let spec: PerturbationSpec = a.perturb.parse()?;
    let targets = parse_targets(&a.targets, &net, a.class)?;
    let dataset: Vec<Vec<f64>> = match &a.dataset {
        Some(p) => load_dataset(p)?.into_iter().map(|x| x.into_values()).collect(),
        None => Vec::new(),
    };
    let mut req = VerificationRequest::new(net, a.class, targets, spec);
    req.timeout = duration(a.timeout)?;
    req.precision = a.delta;
    req.seed = a.seed;
    req.dataset = dataset;
    req.mode = Mode {
        use_deps: !a.no_deps,
        use_attack: !a.no_attack,
        use_hints: !a.no_attack && !a.no_hints,
    };
    req.attack.m = a.attack_m;
    req.attack.iters = a.attack_iters;
    req.attack.eta = a.attack_eta;
    req.mip.gap = a.gap;
    let report = globrob::verify::verify(&req)?;
    let files = emit_report(&report, &a.out)?;
    for r in &report.runs {
        println!(
            "target {} {}: [{}, {}] {:?} attack {} nodes {}",
            r.target, r.perturbation, r.lower, r.upper, r.status, r.delta_ha, r.nodes
        );
    }
    println!(
        "non-robust bound in [{}, {}]; robust bound in [{}, {}]",
        report.nonrobust.lower, report.nonrobust.upper, report.robust.lower, report.robust.upper
    );
    let shape = req.net.input_shape();
    let subs = enumerate_discrete(&req.spec, shape)?;
    if a.baselines {
        let b = sampling_baselines(&req.net, &subs, req.c_prime, &req.targets, &req.dataset, a.samples, req.seed)?;
        println!("dataset sampling {}; random sampling {} ± {}", b.dataset, b.random_mean, b.random_h);
        write_json(&a.out, "baselines.json", &b)?;
    }
    if let Some(step) = a.oracle_grid {
        let o = grid_oracle(&req.net, &subs, req.c_prime, &req.targets, step)?;
        println!("grid oracle {} (slack {}, {} points)", o.value, o.slack, o.points);
        write_json(&a.out, "oracle.json", &o)?;
    }
    println!("report written to {}", files.report.display());
    Ok(())
}

fn run_delta_m(a: DeltaMArgs) -> Result<()> {
    let net = load_network(&a.net)?;
    let mip = BnbOptions {
        timeout: duration(a.timeout)?,
        ..BnbOptions::default()
    };
    let s = compute_delta_m(&net, a.class, &BoundOptions::default(), &mip)?;
    println!("delta_m in [{}, {}] {:?}", s.lower, s.upper, s.status);
    Ok(())
}

fn run_deps(a: DepsArgs) -> Result<()> {
    let net = load_network(&a.net)?;
    let spec: PerturbationSpec = a.perturb.parse()?;
    let opts = BoundOptions::default();
    let bi = compute_concrete_bounds(&net, None, NetCopy::Input, &opts)?;
    for p in enumerate_discrete(&spec, net.input_shape())? {
        let bp = compute_concrete_bounds(&net, Some(&p), NetCopy::Perturbed, &opts)?;
        let d = compute_dependencies(&net, &p, &bi, &bp, &DepOptions::default())?;
        println!("# {p}");
        print!("{}", d.dump());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify(a) => run_verify(a),
        Command::DeltaM(a) => run_delta_m(a),
        Command::Deps(a) => run_deps(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
