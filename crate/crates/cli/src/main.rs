use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use xebsim::campaign::run_campaign;
use xebsim::config::{CampaignConfig, StateKind};
use xebsim::error::{CliError, Result, EXIT_FAILURE, EXIT_INCONCLUSIVE};
use xebsim::recipes::{run_recipe, Recipe, Status, BUILTIN};
use xebsim::store::Estimator;
use xebsim::verify::{compression_audit, estimator_audit, inequality_audit, oracle_audit, AuditReport};
use xebsim_collapse::{fit, fit_p_c, SearchSpec, SweepData, Weighting};
use xebsim_core::audit::within_compressed_bounds;
use xebsim_core::compression::{compress, default_register, resource_report, to_pbc, CompressedCircuit, Resources};
use xebsim_core::rng::{mix_seed, stream, BitStream};
use xebsim_core::{build_circuit, inject_noise, Circuit, CircuitSpec, Connectivity, NoisySpec};

/// Default parent directory for outputs when `--output` is not given.
const OUTPUT_ENV: &str = "XEBSIM_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "xebsim", version, about = "Cross-entropy benchmarks of monitored Clifford circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep with the shot-sampling estimator.
    Run(CampaignArgs),
    /// Sweep with the exact per-circuit cross entropy.
    Exact(CampaignArgs),
    /// Collapse fit of a sweep CSV (columns L, p, chi_bar, eps).
    Fit(FitArgs),
    /// Randomized audits; exits with 1 on any violation.
    Verify(VerifyArgs),
    /// Generate one circuit of the random family in the text format.
    Circuit(CircuitArgs),
    /// Compress a circuit file into the compressed-circuit text format.
    Compress(CompressArgs),
    /// Hardware resources before and after compression.
    Report(ReportArgs),
    /// Run reproduction recipes.
    Reproduce(ReproduceArgs),
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected lo,hi, got {s:?}"))?;
    let a = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let b = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((a, b))
}

#[derive(Args)]
struct CampaignArgs {
    /// TOML campaign configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    connectivity: Option<String>,
    #[arg(long = "L", value_delimiter = ',')]
    l_list: Option<Vec<usize>>,
    #[arg(long = "p", value_delimiter = ',')]
    p_list: Option<Vec<f64>>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    n_circuits: Option<usize>,
    #[arg(long)]
    n_shots: Option<usize>,
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    encoding_ratio: Option<f64>,
    #[arg(long)]
    bulk_ratio: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory (default: $XEBSIM_OUTPUT_DIR/campaign-<hash>).
    #[arg(long)]
    output: Option<PathBuf>,
}

impl CampaignArgs {
    fn resolve(&self) -> Result<CampaignConfig> {
        let mut c = match &self.config {
            Some(path) => CampaignConfig::from_path(path)?,
            None => {
                let conn = self
                    .connectivity
                    .as_deref()
                    .ok_or_else(|| CliError::Config("--connectivity is required without --config".into()))?;
                let (Some(l), Some(p)) = (&self.l_list, &self.p_list) else {
                    return Err(CliError::Config("--L and --p are required without --config".into()));
                };
                CampaignConfig::new(parse_conn(conn)?, l.clone(), p.clone())
            }
        };
        if let Some(s) = &self.connectivity {
            c.connectivity = parse_conn(s)?;
        }
        if let Some(v) = &self.l_list {
            c.l_list = v.clone();
        }
        if let Some(v) = &self.p_list {
            c.p_list = v.clone();
        }
        c.q = self.q.unwrap_or(c.q);
        c.n_circuits = self.n_circuits.unwrap_or(c.n_circuits);
        c.n_shots = self.n_shots.unwrap_or(c.n_shots);
        if let Some(s) = &self.rho {
            c.rho = s.parse::<StateKind>()?;
        }
        if let Some(s) = &self.sigma {
            c.sigma = s.parse::<StateKind>()?;
        }
        c.encoding_ratio = self.encoding_ratio.unwrap_or(c.encoding_ratio);
        c.bulk_ratio = self.bulk_ratio.unwrap_or(c.bulk_ratio);
        c.master_seed = self.seed.unwrap_or(c.master_seed);
        if self.workers.is_some() {
            c.worker_count = self.workers;
        }
        if self.output.is_some() {
            c.output_path = self.output.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

fn parse_conn(s: &str) -> Result<Connectivity> {
    s.parse().map_err(|e: xebsim_core::Error| CliError::Config(e.to_string()))
}

fn default_dir(leaf: &str) -> PathBuf {
    let parent = std::env::var_os(OUTPUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("xebsim-output"));
    parent.join(leaf)
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    /// Search bounds for p_c as lo,hi.
    #[arg(long, value_parser = parse_pair)]
    p_c_bounds: (f64, f64),
    /// Search bounds for nu as lo,hi.
    #[arg(long, value_parser = parse_pair)]
    nu_bounds: (f64, f64),
    #[arg(long, default_value_t = 61)]
    grid: usize,
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    /// Weight residuals by the inverse variance of the data.
    #[arg(long)]
    weighted: bool,
    /// Hold nu fixed and fit p_c only.
    #[arg(long)]
    fixed_nu: Option<f64>,
    /// Keep only these sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<u32>>,
    /// Keep only cells with p in lo,hi.
    #[arg(long, value_parser = parse_pair)]
    p_window: Option<(f64, f64)>,
    /// Directory for fit.json, rescaled.csv and cost_surface.csv.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyMode {
    Compression,
    Inequality,
    Oracle,
    Estimator,
    All,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(value_enum)]
    mode: VerifyMode,
    /// Instances per audit (defaults: compression 500, inequality 10000,
    /// oracle 1000, estimator 1000 repetitions).
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// System sizes drawn by the compression and inequality audits.
    #[arg(long = "L", value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Fixed erasure rate for the inequality audit (random per instance otherwise).
    #[arg(long)]
    q: Option<f64>,
    /// Tamper with every sign map before comparing (negative control).
    #[arg(long)]
    corrupt_sign_map: bool,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CircuitArgs {
    #[arg(long = "L")]
    l: usize,
    #[arg(long)]
    p: f64,
    #[arg(long, default_value = "chain1d")]
    connectivity: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Erasure rate; erasures are drawn from a stream derived from the seed.
    #[arg(long, default_value_t = 0.0)]
    q: f64,
    #[arg(long, default_value_t = 3.0)]
    encoding_ratio: f64,
    #[arg(long, default_value_t = 3.0)]
    bulk_ratio: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CompressArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Seed of the coin stream.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Register qubits (default: the odd qubits).
    #[arg(long, value_delimiter = ',')]
    register: Option<Vec<usize>>,
}

#[derive(Args)]
struct ReportArgs {
    /// A single circuit file; otherwise circuits are drawn from the family.
    #[arg(long)]
    circuit: Option<PathBuf>,
    #[arg(long = "L", default_value_t = 20)]
    l: usize,
    #[arg(long, default_value_t = 0.15)]
    p: f64,
    #[arg(long, default_value = "chain1d")]
    connectivity: String,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Recipe names (all built-in recipes when empty).
    names: Vec<String>,
    /// List the built-in recipes and exit.
    #[arg(long)]
    list: bool,
    /// Extra recipe files.
    #[arg(long)]
    recipe_file: Vec<PathBuf>,
    /// Parent directory; each recipe writes into <output>/<name>.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run(a) => campaign(a, Estimator::Sampled),
        Command::Exact(a) => campaign(a, Estimator::Exact),
        Command::Fit(a) => cmd_fit(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Circuit(a) => cmd_circuit(a),
        Command::Compress(a) => cmd_compress(a),
        Command::Report(a) => cmd_report(a),
        Command::Reproduce(a) => cmd_reproduce(a),
    }
}

fn campaign(args: CampaignArgs, estimator: Estimator) -> Result<ExitCode> {
    let config = args.resolve()?;
    let dir = config
        .output_path
        .clone()
        .unwrap_or_else(|| default_dir(&format!("campaign-{}", &config.hash(estimator.as_str())[..12])));
    let store = run_campaign(&config, estimator, &dir)?;
    println!("{}", dir.join(xebsim::store::SWEEP_FILE).display());
    log::info!("{} cells in {}", store.records().len(), store.dir().display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_fit(a: FitArgs) -> Result<ExitCode> {
    let data = SweepData::read_csv_path(&a.input).map_err(|e| CliError::Config(format!("{}: {e}", a.input.display())))?;
    let data = data.restrict(a.sizes.as_deref(), a.p_window)?;
    let mut spec = SearchSpec::new(a.p_c_bounds, a.nu_bounds);
    spec.grid = (a.grid, a.grid);
    spec.eta = a.eta;
    spec.tolerance = a.tolerance;
    if a.weighted {
        spec.weighting = Weighting::InverseVariance;
    }
    let result = match a.fixed_nu {
        Some(nu) => fit_p_c(&data, nu, &spec),
        None => fit(&data, &spec),
    };
    let f = result.map_err(|e| CliError::Config(e.to_string()))?;
    let dir = a.output.unwrap_or_else(|| default_dir("fit"));
    std::fs::create_dir_all(&dir)?;
    let json = serde_json::to_string_pretty(&f)?;
    std::fs::write(dir.join("fit.json"), json.clone() + "\n")?;
    f.write_rescaled_csv(&data, File::create(dir.join("rescaled.csv"))?)?;
    if let Some(s) = &f.surface {
        s.write_csv(File::create(dir.join("cost_surface.csv"))?)?;
    }
    for flag in &f.flags {
        log::warn!("{flag}");
    }
    println!("{json}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(a: VerifyArgs) -> Result<ExitCode> {
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(w) = a.workers {
            b = b.num_threads(w);
        }
        b.build().map_err(|e| CliError::Config(e.to_string()))?
    };
    let modes = match a.mode {
        VerifyMode::All => vec![VerifyMode::Compression, VerifyMode::Inequality, VerifyMode::Oracle, VerifyMode::Estimator],
        m => vec![m],
    };
    let mut reports = Vec::new();
    for m in modes {
        let t = std::time::Instant::now();
        let r: AuditReport = pool.install(|| -> Result<AuditReport> {
            Ok(match m {
                VerifyMode::Compression => {
                    let sizes = a.sizes.clone().unwrap_or_else(|| vec![2, 4, 6, 8]);
                    compression_audit(a.budget.unwrap_or(500), a.seed, &sizes, a.corrupt_sign_map)?
                }
                VerifyMode::Inequality => {
                    let sizes = a.sizes.clone().unwrap_or_else(|| vec![2, 4, 6, 8, 10]);
                    inequality_audit(a.budget.unwrap_or(10_000), a.seed, &sizes, a.q)?
                }
                VerifyMode::Oracle => oracle_audit(a.budget.unwrap_or(1000), a.seed)?,
                VerifyMode::Estimator => (&estimator_audit(a.budget.unwrap_or(1000), a.seed, 8, 200)?).into(),
                VerifyMode::All => unreachable!(),
            })
        })?;
        log::info!("{} audit finished in {:.1} s", r.name, t.elapsed().as_secs_f64());
        reports.push(r);
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&reports)?);
    } else {
        for r in &reports {
            println!("{}", r.summary());
        }
    }
    Ok(if reports.iter().all(|r| r.passed) { ExitCode::SUCCESS } else { ExitCode::from(EXIT_FAILURE) })
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_circuit(a: CircuitArgs) -> Result<ExitCode> {
    let mut spec = CircuitSpec::new(a.l, parse_conn(&a.connectivity)?, a.p, a.seed);
    spec.encoding_ratio = a.encoding_ratio;
    spec.bulk_ratio = a.bulk_ratio;
    spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let clean = build_circuit(&spec)?;
    let c = inject_noise(&clean, &NoisySpec { q: a.q }, &mut stream(mix_seed(a.seed, 1)))
        .map_err(|e| CliError::Config(e.to_string()))?;
    write_or_print(a.output.as_deref(), &c.to_text())?;
    Ok(ExitCode::SUCCESS)
}

fn read_circuit(path: &Path) -> Result<Circuit> {
    let text = std::fs::read_to_string(path)?;
    Circuit::from_text(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn cmd_compress(a: CompressArgs) -> Result<ExitCode> {
    let c = read_circuit(&a.input)?;
    let register = a.register.unwrap_or_else(|| default_register(c.l));
    let prog = to_pbc(&c).map_err(|e| CliError::Config(e.to_string()))?;
    let cc = compress(&prog, &register, &mut BitStream::from_seed(a.seed)).map_err(|e| CliError::Config(e.to_string()))?;
    write_or_print(a.output.as_deref(), &cc.to_text())?;
    let r = resource_report(&c, &cc);
    log::info!(
        "k = {}, {} quantum measurements, {} coin flips, {} deterministic",
        cc.k,
        cc.quantum_measurements.len(),
        cc.coin_flips.len(),
        cc.deterministic.len()
    );
    log::info!("compressed gates: {} single-qubit, {} CNOT", r.compressed.single_qubit_gates, r.compressed.two_qubit_gates);
    Ok(ExitCode::SUCCESS)
}

#[derive(serde::Serialize)]
struct ResourceSummary {
    circuits: usize,
    l: usize,
    k: usize,
    uncompressed: MeanResources,
    compressed: MeanResources,
    bound_violations: usize,
}

#[derive(serde::Serialize, Default)]
struct MeanResources {
    hardware_qubits: f64,
    depth: f64,
    two_qubit_gates: f64,
    single_qubit_gates: f64,
    measurement_count: f64,
}

impl MeanResources {
    fn add(&mut self, r: &Resources, w: f64) {
        self.hardware_qubits += w * r.hardware_qubits as f64;
        self.depth += w * r.depth as f64;
        self.two_qubit_gates += w * r.two_qubit_gates as f64;
        self.single_qubit_gates += w * r.single_qubit_gates as f64;
        self.measurement_count += w * r.measurement_count as f64;
    }
}

fn cmd_report(a: ReportArgs) -> Result<ExitCode> {
    let circuits: Vec<(Circuit, u64)> = match &a.circuit {
        Some(p) => vec![(read_circuit(p)?, a.seed)],
        None => {
            let conn = parse_conn(&a.connectivity)?;
            (0..a.count)
                .map(|i| {
                    let s = mix_seed(a.seed, i as u64);
                    let spec = CircuitSpec::new(a.l, conn, a.p, s);
                    spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
                    Ok((build_circuit(&spec)?, s))
                })
                .collect::<Result<_>>()?
        }
    };
    let l = circuits[0].0.l;
    let w = 1.0 / circuits.len() as f64;
    let mut summary = ResourceSummary {
        circuits: circuits.len(),
        l,
        k: l / 2,
        uncompressed: MeanResources::default(),
        compressed: MeanResources::default(),
        bound_violations: 0,
    };
    for (c, s) in &circuits {
        let prog = to_pbc(c).map_err(|e| CliError::Config(e.to_string()))?;
        let cc: CompressedCircuit = compress(&prog, &default_register(c.l), &mut BitStream::from_seed(*s))?;
        let r = resource_report(c, &cc);
        summary.uncompressed.add(&r.uncompressed, w);
        summary.compressed.add(&r.compressed, w);
        if !within_compressed_bounds(c.l, &r) {
            summary.bound_violations += 1;
        }
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        let k = summary.k as f64;
        println!("{} circuit(s), L = {}, k = {}", summary.circuits, l, summary.k);
        println!("{:<22} {:>14} {:>14} {:>14}", "mean", "uncompressed", "compressed", "bound");
        let (u, c) = (&summary.uncompressed, &summary.compressed);
        let rows = [
            ("hardware qubits", u.hardware_qubits, c.hardware_qubits, format!("= {}", summary.k)),
            ("depth", u.depth, c.depth, "-".to_string()),
            ("two-qubit gates", u.two_qubit_gates, c.two_qubit_gates, format!("<= {}", 2.0 * k * k)),
            ("single-qubit gates", u.single_qubit_gates, c.single_qubit_gates, format!("<= {}", k * k)),
            ("measurements", u.measurement_count, c.measurement_count, format!("<= {}", summary.k)),
        ];
        for (name, a, b, bound) in rows {
            println!("{name:<22} {a:>14.1} {b:>14.1} {bound:>14}");
        }
        println!("circuits outside the compressed bounds: {}", summary.bound_violations);
    }
    Ok(if summary.bound_violations == 0 { ExitCode::SUCCESS } else { ExitCode::from(EXIT_FAILURE) })
}

fn cmd_reproduce(a: ReproduceArgs) -> Result<ExitCode> {
    if a.list {
        for (name, _) in BUILTIN {
            let r = Recipe::builtin(name)?;
            println!("{name:<28} {}", r.description);
        }
        return Ok(ExitCode::SUCCESS);
    }
    let mut recipes = Vec::new();
    let names: Vec<String> = if a.names.is_empty() && a.recipe_file.is_empty() {
        BUILTIN.iter().map(|(n, _)| n.to_string()).collect()
    } else {
        a.names.clone()
    };
    for n in &names {
        recipes.push(Recipe::builtin(n)?);
    }
    for p in &a.recipe_file {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
        recipes.push(Recipe::from_toml(&text)?);
    }
    let parent = a.output.unwrap_or_else(|| default_dir("reproduce"));
    let mut worst = Status::Pass;
    for r in &recipes {
        log::info!("recipe {}: {}", r.name, r.description);
        let outcome = run_recipe(r, &parent.join(&r.name), a.workers)?;
        print!("{}", outcome.table());
        if !outcome.informational {
            worst = match (worst, outcome.status) {
                (Status::Fail, _) | (_, Status::Fail) => Status::Fail,
                (Status::Inconclusive, _) | (_, Status::Inconclusive) => Status::Inconclusive,
                _ => Status::Pass,
            };
        }
    }
    Ok(match worst {
        Status::Pass => ExitCode::SUCCESS,
        Status::Fail => ExitCode::from(EXIT_FAILURE),
        Status::Inconclusive => ExitCode::from(EXIT_INCONCLUSIVE),
    })
}
