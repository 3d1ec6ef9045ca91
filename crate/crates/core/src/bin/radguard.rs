//! `radguard` command-line interface.
//!
//! Exit codes: 0 success / Robust / all accepted, 1 Unknown / some input
//! rejected, 2 usage error, 3 data error.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use radguard::attacks::{self, PgdConfig};
use radguard::dataset::{gen_synthetic, SyntheticSpec};
use radguard::evaluation::{self, CategorizeConfig, EvaluationConfig, Selection};
use radguard::radius::{batch_radii, SearchParams, Verifier, DEFAULT_TOL, DEFAULT_UP};
use radguard::train::{train_sgd, TrainConfig};
use radguard::validators::{bootstrap_window, threshold_certify, Decision, ThresholdPolicy, WindowConfig};
use radguard::{
    is_robust, load_dataset, load_network, save_network, Activation, Architecture, Dataset, DatasetFormat, Domain,
    Error, Network, Tensor,
};

#[derive(Parser, Serialize)]
#[command(name = "radguard", version, about = "Runtime input validation via certified robustness radii")]
struct Cli {
    #[command(subcommand)]
    #[serde(flatten)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// Generate a synthetic Gaussian-cluster dataset (train.csv, test.csv).
    GenData(GenDataArgs),
    /// Train a network with mini-batch SGD and write it in the weight format.
    Train(TrainArgs),
    /// Run an adversarial attack on dataset samples.
    Attack(AttackArgs),
    /// Approximate robustness radius of each input.
    Radius(RadiusArgs),
    /// Single robustness query at a fixed radius.
    Certify(CertifyArgs),
    /// Stream inputs from stdin, one per line, and emit one decision per line.
    Validate(ValidateArgs),
    /// Full evaluation: categories, radii, survival, ROC, rejection and mean reports.
    Evaluate(EvaluateArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Idx,
}

impl From<Format> for DatasetFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => DatasetFormat::Csv,
            Format::Idx => DatasetFormat::Idx,
        }
    }
}

#[derive(Args, Serialize)]
struct DataArgs {
    /// Dataset path (for idx: the image file).
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args, Serialize)]
struct SearchArgs {
    /// Initial upper end of the radius bracket.
    #[arg(long, default_value_t = DEFAULT_UP)]
    up: f64,
    /// Bracket width at which the search stops.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Abstract domain: zonotope or interval.
    #[arg(long, default_value_t = Domain::Zonotope)]
    domain: Domain,
}

impl SearchArgs {
    fn params(&self) -> SearchParams {
        SearchParams { up: self.up, tol: self.tol, domain: self.domain }
    }
}

#[derive(Args, Serialize)]
struct GenDataArgs {
    #[arg(long, default_value_t = 4)]
    classes: usize,
    #[arg(long, default_value_t = 10)]
    dims: usize,
    #[arg(long, default_value_t = 1000)]
    per_class: usize,
    /// Standard deviation of each cluster.
    #[arg(long, default_value_t = 0.1)]
    spread: f64,
    /// Samples written to train.csv; the rest go to test.csv.
    #[arg(long, default_value_t = 2000)]
    train_size: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Held-out dataset for reporting test accuracy.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Architecture string, e.g. `32,32,4` or `6c3p1,mp2,16c3,mp2,128,10`.
    #[arg(long, default_value = "32,32,4")]
    arch: String,
    #[arg(long, default_value_t = Activation::Relu)]
    activation: Activation,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output weight file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum AttackKind {
    Fgsm,
    Pgd,
    MinPgd,
    RandomMinPgd,
}

#[derive(Args, Serialize)]
struct AttackArgs {
    #[arg(long)]
    network: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "fgsm")]
    attack: AttackKind,
    /// Budget for fgsm and pgd.
    #[arg(long, default_value_t = attacks::FGSM_EPSILONS[0])]
    epsilon: f64,
    #[arg(long, default_value_t = 20)]
    steps: usize,
    /// Attack at most this many samples.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV file receiving successful adversarial inputs with their true labels.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct RadiusArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long, conflicts_with = "input")]
    dataset: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// A single flattened input, comma or space separated.
    #[arg(long, allow_hyphen_values = true)]
    input: Option<String>,
    #[arg(long)]
    limit: Option<usize>,
    #[command(flatten)]
    search: SearchArgs,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args, Serialize)]
struct CertifyArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long, conflicts_with = "input", requires = "index")]
    dataset: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    index: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    input: Option<String>,
    /// L∞ radius to certify.
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = Domain::Zonotope)]
    domain: Domain,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Threshold,
    Window,
}

#[derive(Args, Serialize)]
struct ValidateArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long, value_enum, default_value = "window")]
    mode: Mode,
    /// Threshold validator: reject inputs whose radius is below this.
    #[arg(long, default_value_t = 0.01)]
    threshold: f64,
    #[arg(long, default_value_t = 50)]
    window_size: usize,
    #[arg(long, default_value_t = 0.014)]
    sigma0: f64,
    #[arg(long, default_value_t = 0.001)]
    sigma1: f64,
    /// Dataset whose first correctly classified samples seed the window.
    #[arg(long)]
    bootstrap: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SelectionArg {
    First,
    Random,
}

#[derive(Args, Serialize)]
struct EvaluateArgs {
    #[arg(long)]
    network: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 100)]
    per_category: usize,
    #[arg(long, value_enum, default_value = "first")]
    selection: SelectionArg,
    /// The two single-step attack budgets.
    #[arg(long, num_args = 2, default_values_t = attacks::FGSM_EPSILONS)]
    epsilon: Vec<f64>,
    #[arg(long, default_value_t = 0.01)]
    threshold: f64,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Report directory.
    #[arg(long)]
    out: PathBuf,
}

/// Failure that maps onto an exit code.
enum Failure {
    Usage(String),
    Data(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type CmdResult = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match serde_json::to_string(&cli) {
        Ok(echo) => eprintln!("config: {echo}"),
        Err(e) => eprintln!("config: <unavailable: {e}>"),
    }
    let result = match &cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Attack(a) => attack(a),
        Command::Radius(a) => radius(a),
        Command::Certify(a) => certify(a),
        Command::Validate(a) => validate(a),
        Command::Evaluate(a) => evaluate(a, &cli),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

fn print_json<T: Serialize>(out: &mut impl Write, value: &T) -> Result<(), Failure> {
    serde_json::to_writer(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn parse_input(text: &str, net: &Network) -> Result<Tensor, Failure> {
    let values = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Failure::Data(format!("bad input value `{t}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != net.input_len() {
        return Err(Failure::Data(format!("input has {} values, network expects {}", values.len(), net.input_len())));
    }
    Ok(Tensor::new(net.input_shape().to_vec(), values)?)
}

fn load_for(net: &Network, path: &Path, format: Format) -> Result<Dataset, Failure> {
    let data = load_dataset(path, format.into(), Some(net.label_count()))?;
    Ok(data.with_input_shape(net.input_shape().to_vec())?)
}

fn gen_data(a: &GenDataArgs) -> CmdResult {
    let data = gen_synthetic(SyntheticSpec {
        classes: a.classes,
        dims: a.dims,
        per_class: a.per_class,
        spread: a.spread,
        seed: a.seed,
    })?;
    let (train, test) = data.split_at(a.train_size);
    fs::create_dir_all(&a.out)?;
    train.write_csv(a.out.join("train.csv"))?;
    test.write_csv(a.out.join("test.csv"))?;
    println!("wrote {} training and {} test samples to {}", train.len(), test.len(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn train(a: &TrainArgs) -> CmdResult {
    let architecture: Architecture = a.arch.parse()?;
    let data = load_dataset(&a.data.dataset, a.data.format.into(), Some(architecture.label_count()))?;
    let test = a.test.as_ref().map(|p| load_dataset(p, a.data.format.into(), None)).transpose()?;
    let config = TrainConfig {
        architecture,
        activation: a.activation,
        epochs: a.epochs,
        learning_rate: a.learning_rate,
        batch_size: a.batch_size,
        seed: a.seed,
    };
    let (net, report) = train_sgd(&data, test.as_ref(), &config)?;
    save_network(&net, &a.out)?;
    print_json(&mut io::stdout().lock(), &report)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct AttackRecord {
    index: usize,
    label: usize,
    adversarial_label: usize,
    success: bool,
    perturbation_linf: f64,
    epsilon: f64,
}

fn attack(a: &AttackArgs) -> CmdResult {
    let net = load_network(&a.network)?;
    let data = load_for(&net, &a.data.dataset, a.data.format)?;
    let pgd_config = PgdConfig { steps: a.steps, ..PgdConfig::default() };
    let mut out = io::stdout().lock();
    let mut adversarial = Vec::new();
    let n = a.limit.unwrap_or(data.len()).min(data.len());
    for (i, s) in data.samples()[..n].iter().enumerate() {
        let r = match a.attack {
            AttackKind::Fgsm => attacks::fgsm(&net, &s.input, s.label, a.epsilon)?,
            AttackKind::Pgd => {
                attacks::pgd(&net, &s.input, s.label, a.epsilon, a.steps, a.epsilon * pgd_config.step_fraction)?
            }
            AttackKind::MinPgd => attacks::min_pgd(&net, &s.input, s.label, &pgd_config)?,
            AttackKind::RandomMinPgd => {
                attacks::min_pgd_random_start(&net, &s.input, s.label, &pgd_config, a.seed ^ i as u64)?
            }
        };
        print_json(
            &mut out,
            &AttackRecord {
                index: i,
                label: s.label,
                adversarial_label: r.adversarial_label,
                success: r.success,
                perturbation_linf: r.perturbation_linf,
                epsilon: r.epsilon,
            },
        )?;
        if r.success {
            adversarial.push(radguard::Sample { input: r.adversarial, label: s.label });
        }
    }
    if let Some(path) = &a.out {
        Dataset::new(data.input_shape().to_vec(), adversarial)?.write_csv(path)?;
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct RadiusRecord<'a> {
    index: usize,
    #[serde(flatten)]
    result: &'a radguard::RadiusResult,
}

fn radius(a: &RadiusArgs) -> CmdResult {
    let net = load_network(&a.network)?;
    let params = a.search.params();
    let inputs: Vec<Tensor> = match (&a.dataset, &a.input) {
        (Some(path), None) => {
            let data = load_for(&net, path, a.format)?;
            let n = a.limit.unwrap_or(data.len()).min(data.len());
            data.samples()[..n].iter().map(|s| s.input.clone()).collect()
        }
        (None, Some(text)) => vec![parse_input(text, &net)?],
        _ => return Err(Failure::Usage("give either --dataset or --input".into())),
    };
    let slices: Vec<&[f64]> = inputs.iter().map(Tensor::data).collect();
    let verifier = Verifier::new(&net, params.domain);
    let mut out = io::stdout().lock();
    for (index, r) in batch_radii(&verifier, &slices, &params, a.jobs)?.into_iter().enumerate() {
        print_json(&mut out, &RadiusRecord { index, result: &r? })?;
    }
    Ok(ExitCode::SUCCESS)
}

fn certify(a: &CertifyArgs) -> CmdResult {
    let net = load_network(&a.network)?;
    let x = match (&a.dataset, a.index, &a.input) {
        (Some(path), Some(i), None) => {
            let data = load_for(&net, path, a.format)?;
            data.samples()
                .get(i)
                .map(|s| s.input.clone())
                .ok_or_else(|| Failure::Usage(format!("index {i} out of range ({} samples)", data.len())))?
        }
        (None, _, Some(text)) => parse_input(text, &net)?,
        _ => return Err(Failure::Usage("give either --dataset with --index, or --input".into())),
    };
    let verdict = is_robust(&net, x.data(), a.delta, a.domain)?;
    print_json(&mut io::stdout().lock(), &verdict)?;
    Ok(if verdict.is_robust() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

#[derive(Serialize)]
struct DecisionRecord {
    line: usize,
    label: usize,
    radius: Option<f64>,
    #[serde(flatten)]
    decision: Decision,
}

fn validate(a: &ValidateArgs) -> CmdResult {
    let net = load_network(&a.network)?;
    let params = a.search.params();
    params.validate()?;
    let verifier = Verifier::new(&net, params.domain);
    let policy = ThresholdPolicy::new(a.threshold, params.domain)?;
    let mut window = match a.mode {
        Mode::Threshold => None,
        Mode::Window => {
            let config = WindowConfig { size: a.window_size, sigma0: a.sigma0, sigma1: a.sigma1 };
            config.validate()?;
            let path =
                a.bootstrap.as_ref().ok_or_else(|| Failure::Usage("window mode needs --bootstrap <dataset>".into()))?;
            let data = load_for(&net, path, a.format)?;
            let mut radii = Vec::with_capacity(config.size);
            for s in data.samples() {
                if radii.len() == config.size {
                    break;
                }
                if net.predict(s.input.data())? == s.label {
                    radii.push(radguard::search_radius(&verifier, s.input.data(), params.up, params.tol)?.radius);
                }
            }
            Some(bootstrap_window(&radii, config)?)
        }
    };
    let stdin = io::stdin().lock();
    let mut out = io::stdout().lock();
    let mut rejected = false;
    for (line, text) in stdin.lines().enumerate() {
        let text = text?;
        if text.trim().is_empty() {
            continue;
        }
        let x = parse_input(&text, &net)?;
        let label = net.predict(x.data())?;
        let (radius, decision) = match window.as_mut() {
            None => (None, threshold_certify(&verifier, x.data(), &policy)?),
            Some(w) => {
                let r = radguard::search_radius(&verifier, x.data(), params.up, params.tol)?.radius;
                (Some(r), w.step_mut(r))
            }
        };
        rejected |= !decision.is_accept();
        print_json(&mut out, &DecisionRecord { line: line + 1, label, radius, decision })?;
        out.flush()?;
    }
    Ok(if rejected { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn evaluate(a: &EvaluateArgs, cli: &Cli) -> CmdResult {
    let net = load_network(&a.network)?;
    let data = load_for(&net, &a.data.dataset, a.data.format)?;
    let config = EvaluationConfig {
        categorize: CategorizeConfig {
            per_category: a.per_category,
            fgsm_eps: [a.epsilon[0], a.epsilon[1]],
            pgd: PgdConfig::default(),
            selection: match a.selection {
                SelectionArg::First => Selection::First,
                SelectionArg::Random => Selection::Random,
            },
            seed: a.seed,
            jobs: a.jobs,
        },
        search: a.search.params(),
        threshold: ThresholdPolicy::new(a.threshold, a.search.domain)?,
        survival_grid: evaluation::uniform_grid(a.search.up, 0.002),
        rejection_thresholds: evaluation::default_rejection_thresholds(),
    };
    config.search.validate()?;
    let run = evaluation::run_evaluation(&net, &data, &config)?;
    evaluation::write_report(&a.out, &run)?;
    fs::write(a.out.join("config.json"), serde_json::to_string_pretty(cli)?)?;
    print!("{}", evaluation::render_text(&run.report));
    Ok(ExitCode::SUCCESS)
}
