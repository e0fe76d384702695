use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dpmrf::harness::{self, ExperimentSpec};
use dpmrf::learners::{
    learn_ising, learn_mrf_l1, learn_mrf_linf, learn_pairwise, EstimateMeta, LearnConfig, LinfConfig, ParitySource,
};
use dpmrf::pfw::IterationRule;
use dpmrf::privacy::{pure_to_zcdp, zcdp_to_approx, Accountant};
use dpmrf::query_release::{empirical_parities, pmw_release, PmwConfig, UpdateRule};
use dpmrf::sampler::{exact_sample, gibbs_sample, DEFAULT_BURN_IN};
use dpmrf::structure::{stable_mode_structure, BaseLearner, BaseStructure, ModelKind, StabilityConfig};
use dpmrf::{Alphabet, Dataset, Model, Result};

/// Differentially private learning of Markov random fields.
///
/// The state-space cap of exact enumeration can be raised with the
/// DPMRF_STATE_CAP environment variable.
#[derive(Parser)]
#[command(name = "dpmrf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw samples from a model.
    Sample(SampleArgs),
    /// Fit an Ising model.
    LearnIsing(LearnArgs),
    /// Fit a pairwise model over k symbols.
    LearnPairwise(PairwiseArgs),
    /// Fit a binary t-wise MRF.
    LearnMrf(MrfArgs),
    /// Release all parities of order at most t.
    ReleaseParities(ParityArgs),
    /// Estimate the dependency graph under (ε, δ)-DP.
    LearnStructure(StructureArgs),
    /// Convert between privacy notions.
    Accountant(AccountantArgs),
    /// Run an experiment sweep.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SampleArgs {
    /// Model JSON.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gibbs sampling instead of exact enumeration.
    #[arg(long)]
    gibbs: bool,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    /// Output CSV; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DataArgs {
    /// Sample CSV.
    #[arg(long)]
    data: PathBuf,
    /// Output file; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the privacy ledger as CSV.
    #[arg(long)]
    ledger: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run without noise. The output is not private.
    #[arg(long)]
    non_private: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Corollary,
    Lemma,
}

#[derive(Args)]
struct LearnArgs {
    #[command(flatten)]
    io: DataArgs,
    /// Width bound λ.
    #[arg(long)]
    lambda: f64,
    /// zCDP budget ρ.
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, value_enum, default_value_t = Rule::Corollary)]
    rule: Rule,
    /// Fixed number of Frank-Wolfe iterations.
    #[arg(long)]
    iterations: Option<usize>,
}

impl LearnArgs {
    fn config(&self) -> LearnConfig {
        let mut cfg = if self.io.non_private {
            LearnConfig::non_private(self.lambda, self.io.seed)
        } else {
            LearnConfig::private(self.lambda, self.rho, self.io.seed)
        };
        cfg.rule = match self.rule {
            Rule::Corollary => IterationRule::Corollary,
            Rule::Lemma => IterationRule::Lemma,
        };
        cfg.iterations = self.iterations;
        cfg
    }

    fn accountant(&self) -> Result<Accountant> {
        Accountant::new(if self.io.non_private { 0.0 } else { self.rho })
    }
}

#[derive(Args)]
struct PairwiseArgs {
    #[command(flatten)]
    learn: LearnArgs,
    /// Alphabet size; inferred from the data if absent.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Objective {
    L1,
    Linf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Parities {
    Pmw,
    Empirical,
}

#[derive(Args)]
struct MrfArgs {
    #[command(flatten)]
    learn: LearnArgs,
    #[arg(long)]
    t: usize,
    #[arg(long, value_enum, default_value_t = Objective::L1)]
    objective: Objective,
    /// Fraction of rows for the regressions under the ℓ∞ objective.
    #[arg(long, default_value_t = 0.5)]
    split: f64,
    /// Parity source under the ℓ∞ objective.
    #[arg(long, value_enum, default_value_t = Parities::Pmw)]
    parities: Parities,
}

#[derive(Clone, Copy, ValueEnum)]
enum Update {
    Multiplicative,
    Projection,
}

#[derive(Args)]
struct ParityArgs {
    #[command(flatten)]
    io: DataArgs,
    #[arg(long)]
    t: usize,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long, value_enum, default_value_t = Update::Projection)]
    rule: Update,
    /// Exact empirical parities instead of a release.
    #[arg(long)]
    empirical: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Ising,
    Pairwise,
    Mrf,
}

#[derive(Args)]
struct StructureArgs {
    #[command(flatten)]
    io: DataArgs,
    #[arg(long, value_enum, default_value_t = Kind::Ising)]
    kind: Kind,
    /// Order for `--kind mrf`.
    #[arg(long, default_value_t = 2)]
    t: usize,
    #[arg(long)]
    lambda: f64,
    /// Smallest edge strength to detect.
    #[arg(long)]
    eta: f64,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Conversion {
    PureToZcdp,
    ZcdpToApprox,
}

#[derive(Args)]
struct AccountantArgs {
    #[arg(long, value_enum)]
    convert: Conversion,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment spec JSON.
    #[arg(long)]
    spec: PathBuf,
    /// Per-trial results CSV.
    #[arg(long)]
    out: PathBuf,
    /// Per-n summary CSV; `<out>.summary.csv` if absent.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Directory for `(n, success_rate)` curve files.
    #[arg(long)]
    emit_plot_data: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    let mut out = output(path)?;
    writeln!(out, "{text}")?;
    out.flush()?;
    Ok(())
}

fn read_data(path: &Path, alphabet: Option<Alphabet>) -> Result<Dataset> {
    Dataset::read_csv(BufReader::new(File::open(path)?), alphabet)
}

fn write_ledger(path: Option<&Path>, meta: &EstimateMeta, total: f64) -> Result<()> {
    let Some(path) = path else { return Ok(()) };
    let mut acct = Accountant::new(total)?;
    for c in &meta.ledger {
        acct.spend(c.label.clone(), c.rho)?;
    }
    acct.write_csv(BufWriter::new(File::create(path)?))
}

fn warn(meta: &EstimateMeta) {
    for w in &meta.warnings {
        eprintln!("warning: {w}");
    }
}

fn sample(args: SampleArgs) -> Result<()> {
    let model = Model::from_json(&std::fs::read_to_string(&args.model)?)?;
    let data = if args.gibbs {
        gibbs_sample(&model, args.n, args.burn_in, args.thin, args.seed)?
    } else {
        exact_sample(&model, args.n, args.seed)?
    };
    let mut out = output(args.out.as_deref())?;
    data.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn learn_ising_cmd(args: LearnArgs) -> Result<()> {
    let data = read_data(&args.io.data, Some(Alphabet::Binary))?;
    let est = learn_ising(&data, &args.config(), &mut args.accountant()?)?;
    warn(&est.meta);
    write_ledger(args.io.ledger.as_deref(), &est.meta, args.rho)?;
    write_text(args.io.out.as_deref(), &est.to_json())
}

fn learn_pairwise_cmd(args: PairwiseArgs) -> Result<()> {
    let data = read_data(&args.learn.io.data, args.k.map(Alphabet::Categorical))?;
    let est = learn_pairwise(&data, &args.learn.config(), &mut args.learn.accountant()?)?;
    warn(&est.meta);
    write_ledger(args.learn.io.ledger.as_deref(), &est.meta, args.learn.rho)?;
    write_text(args.learn.io.out.as_deref(), &est.to_json())
}

fn learn_mrf_cmd(args: MrfArgs) -> Result<()> {
    let data = read_data(&args.learn.io.data, Some(Alphabet::Binary))?;
    let cfg = args.learn.config();
    let mut acct = args.learn.accountant()?;
    let est = match args.objective {
        Objective::L1 => learn_mrf_l1(&data, args.t, &cfg, &mut acct)?,
        Objective::Linf => {
            let parities = match args.parities {
                Parities::Pmw => ParitySource::Pmw(PmwConfig::default()),
                Parities::Empirical => ParitySource::Empirical,
            };
            learn_mrf_linf(&data, args.t, &cfg, &LinfConfig { split: args.split, parities }, &mut acct)?
        }
    };
    warn(&est.meta);
    write_ledger(args.learn.io.ledger.as_deref(), &est.meta, args.learn.rho)?;
    write_text(args.learn.io.out.as_deref(), &est.to_json())
}

fn release_parities_cmd(args: ParityArgs) -> Result<()> {
    let data = read_data(&args.io.data, Some(Alphabet::Binary))?;
    let mut acct = Accountant::new(if args.io.non_private || args.empirical { 0.0 } else { args.rho })?;
    let table = if args.empirical {
        eprintln!("warning: empirical parities are not private");
        empirical_parities(&data, args.t)?
    } else {
        let cfg = PmwConfig {
            rounds: args.rounds,
            rule: match args.rule {
                Update::Multiplicative => UpdateRule::Multiplicative,
                Update::Projection => UpdateRule::Projection,
            },
            non_private: args.io.non_private,
            seed: args.io.seed,
            ..PmwConfig::default()
        };
        pmw_release(&data, args.t, args.rho, &cfg, &mut acct)?.table
    };
    if let Some(path) = args.io.ledger.as_deref() {
        acct.write_csv(BufWriter::new(File::create(path)?))?;
    }
    write_text(args.io.out.as_deref(), &table.to_json())
}

fn learn_structure_cmd(args: StructureArgs) -> Result<()> {
    let alphabet = match args.kind {
        Kind::Pairwise => None,
        _ => Some(Alphabet::Binary),
    };
    let data = read_data(&args.io.data, alphabet)?;
    let kind = match args.kind {
        Kind::Ising => ModelKind::Ising,
        Kind::Pairwise => ModelKind::Pairwise,
        Kind::Mrf => ModelKind::Mrf { t: args.t },
    };
    let mut base = BaseStructure::new(kind, args.lambda, args.eta);
    base.iterations = args.iterations;
    let graph = if args.io.non_private {
        base.learn(&data)?
    } else {
        let cfg = StabilityConfig { blocks: args.blocks, ..StabilityConfig::new(args.eps, args.delta) };
        stable_mode_structure(&data, &base, &cfg, args.io.seed)?
    };
    write_text(args.io.out.as_deref(), &graph.to_json())
}

fn accountant_cmd(args: AccountantArgs) -> Result<()> {
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| dpmrf::Error::InvalidArgument(format!("--{name} is required for this conversion")))
    };
    match args.convert {
        Conversion::PureToZcdp => {
            let eps = need(args.eps, "eps")?;
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(dpmrf::Error::InvalidArgument(format!("eps must be positive, got {eps}")));
            }
            println!("rho={}", pure_to_zcdp(eps));
        }
        Conversion::ZcdpToApprox => {
            let (rho, delta) = (need(args.rho, "rho")?, need(args.delta, "delta")?);
            println!("eps={}", zcdp_to_approx(rho, delta)?);
        }
    }
    Ok(())
}

fn experiment_cmd(args: ExperimentArgs) -> Result<()> {
    let spec = ExperimentSpec::from_json(&std::fs::read_to_string(&args.spec)?)?;
    let rows = harness::run_experiment(&spec)?;
    harness::write_trials_csv(&rows, BufWriter::new(File::create(&args.out)?))?;
    let summary = harness::summarize(&rows);
    let summary_path = args.summary.unwrap_or_else(|| {
        let mut name = args.out.clone().into_os_string();
        name.push(".summary.csv");
        PathBuf::from(name)
    });
    harness::write_summary_csv(&summary, BufWriter::new(File::create(summary_path)?))?;
    if let Some(dir) = &args.emit_plot_data {
        harness::write_plot_data(dir, &spec.name, &summary)?;
    }
    print!("{}", harness::summary_table(&summary));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sample(a) => sample(a),
        Command::LearnIsing(a) => learn_ising_cmd(a),
        Command::LearnPairwise(a) => learn_pairwise_cmd(a),
        Command::LearnMrf(a) => learn_mrf_cmd(a),
        Command::ReleaseParities(a) => release_parities_cmd(a),
        Command::LearnStructure(a) => learn_structure_cmd(a),
        Command::Accountant(a) => accountant_cmd(a),
        Command::Experiment(a) => experiment_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
