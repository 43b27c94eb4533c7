//! `mga` — train a graph convolutional surrogate, rewire links against it
//! with momentum or plain gradient attacks, and run the evaluation,
//! link-analysis, community-deception, and limited-knowledge suites.
//!
//! Every command accepts `--config FILE` with `key = value` lines whose
//! keys are the long flag names; explicit flags win. One global `--seed`
//! drives every stochastic choice through fixed offsets, so identical
//! configs produce byte-identical outputs.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use mga_core::attack::{AttackConfig, AttackMethod, AttackMode};
use mga_core::evaluation::TargetStrategy;
use mga_core::gcn::TrainConfig;
use mga_core::{seeds, Error, Result};

use commands::{AblateRun, AttackRun, DeceiveRun, GenRun, TrainRun};
use config::{resolve, DatasetSpec, FileConfig};

#[derive(Parser)]
#[command(
    name = "mga",
    version,
    about = "Gradient-based adversarial rewiring of node-classified graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic planted-partition dataset
    Gen(GenArgs),
    /// Train the two-layer GCN surrogate and write a checkpoint
    Train(TrainArgs),
    /// Attack selected targets against a checkpoint and report ASR/AML
    Attack(AttackArgs),
    /// Selected-link analysis over an attack report directory
    Analyze(AnalyzeArgs),
    /// Limited-knowledge grid over missing-link modes and probabilities
    AblateKnowledge(AblateArgs),
    /// Community deception against a label propagation detector
    Deceive(DeceiveArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Config file with `key = value` lines (keys are long flag names)
    #[arg(long)]
    config: Option<String>,
    /// Global seed; subsystem seeds derive from it by fixed offsets
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<String>,
}

impl CommonArgs {
    fn load(&self) -> Result<FileConfig> {
        FileConfig::load(self.config.as_deref())
    }

    fn seed(&self, file: &FileConfig) -> Result<u64> {
        Ok(resolve(self.seed, file, "seed")?.unwrap_or(0))
    }

    fn out(&self, file: &FileConfig) -> Result<PathBuf> {
        resolve(self.out.clone(), file, "out")?
            .map(PathBuf::from)
            .ok_or_else(|| Error::Config("--out is required".into()))
    }
}

#[derive(Args, Debug)]
struct DatasetArgs {
    /// Edge list file: one `u<TAB>v` line per edge, `#` comments
    #[arg(long)]
    edges: Option<String>,
    /// Label file: `node<TAB>class` per line
    #[arg(long)]
    labels: Option<String>,
    /// Feature file: `node<TAB>v1,v2,...,vd` per line (default: one-hot)
    #[arg(long)]
    features: Option<String>,
    /// Declared node count for the edge list
    #[arg(long)]
    nodes: Option<usize>,
    /// Planted-partition generator: node count
    #[arg(long)]
    gen_n: Option<usize>,
    /// Planted-partition generator: community count
    #[arg(long)]
    gen_k: Option<usize>,
    /// Planted-partition generator: intra-community link probability
    #[arg(long)]
    p_in: Option<f64>,
    /// Planted-partition generator: inter-community link probability
    #[arg(long)]
    p_out: Option<f64>,
}

impl DatasetArgs {
    fn resolve(&self, file: &FileConfig) -> Result<DatasetSpec> {
        Ok(DatasetSpec {
            edges: resolve(self.edges.clone(), file, "edges")?,
            labels: resolve(self.labels.clone(), file, "labels")?,
            features: resolve(self.features.clone(), file, "features")?,
            nodes: resolve(self.nodes, file, "nodes")?,
            gen_n: resolve(self.gen_n, file, "gen-n")?,
            gen_k: resolve(self.gen_k, file, "gen-k")?,
            p_in: resolve(self.p_in, file, "p-in")?,
            p_out: resolve(self.p_out, file, "p-out")?,
        })
    }
}

#[derive(Args, Debug)]
struct TrainHyperArgs {
    /// Learning rate for plain full-batch gradient descent
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Hidden layer width
    #[arg(long)]
    hidden: Option<usize>,
    /// Fraction of labeled nodes used for training
    #[arg(long)]
    train_frac: Option<f64>,
    /// Fraction of labeled nodes used for validation
    #[arg(long)]
    val_frac: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
}

impl TrainHyperArgs {
    fn resolve(&self, file: &FileConfig, seed: u64) -> Result<TrainConfig> {
        let defaults = TrainConfig::default();
        Ok(TrainConfig {
            learning_rate: resolve(self.lr, file, "lr")?.unwrap_or(defaults.learning_rate),
            epochs: resolve(self.epochs, file, "epochs")?.unwrap_or(defaults.epochs),
            hidden: resolve(self.hidden, file, "hidden")?.unwrap_or(defaults.hidden),
            seed,
            train_fraction: resolve(self.train_frac, file, "train-frac")?
                .unwrap_or(defaults.train_fraction),
            val_fraction: resolve(self.val_frac, file, "val-frac")?
                .unwrap_or(defaults.val_fraction),
            weight_decay: resolve(self.weight_decay, file, "weight-decay")?
                .unwrap_or(defaults.weight_decay),
        })
    }
}

#[derive(Args, Debug)]
struct AttackHyperArgs {
    /// Maximum number of rewired links (and iteration cap)
    #[arg(long)]
    budget: Option<usize>,
    /// Momentum decay factor in [0, 1]
    #[arg(long)]
    mu: Option<f64>,
    /// unlimited | direct | indirect
    #[arg(long)]
    mode: Option<String>,
    /// mga | fga
    #[arg(long)]
    method: Option<String>,
    /// Stop a target's attack at its first success
    #[arg(long)]
    early_exit: bool,
    /// Permit deletions that isolate the target node
    #[arg(long)]
    allow_target_isolation: bool,
}

impl AttackHyperArgs {
    fn resolve(&self, file: &FileConfig, seed: u64) -> Result<AttackConfig> {
        let defaults = AttackConfig::default();
        let mode = match resolve(self.mode.clone(), file, "mode")? {
            Some(s) => AttackMode::parse(&s)?,
            None => defaults.mode,
        };
        let method = match resolve(self.method.clone(), file, "method")? {
            Some(s) => AttackMethod::parse(&s)?,
            None => defaults.method,
        };
        let early_exit = self.early_exit
            || resolve(None::<bool>, file, "early-exit")?.unwrap_or(false);
        let allow_isolation = self.allow_target_isolation
            || resolve(None::<bool>, file, "allow-target-isolation")?.unwrap_or(false);
        let cfg = AttackConfig {
            budget: resolve(self.budget, file, "budget")?.unwrap_or(defaults.budget),
            mu: resolve(self.mu, file, "mu")?.unwrap_or(defaults.mu),
            mode,
            method,
            seed: seeds::derive(seed, seeds::ATTACK),
            early_exit,
            forbid_target_isolation: !allow_isolation,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Node count
    #[arg(long)]
    gen_n: Option<usize>,
    /// Community count
    #[arg(long)]
    gen_k: Option<usize>,
    /// Intra-community link probability
    #[arg(long)]
    p_in: Option<f64>,
    /// Inter-community link probability
    #[arg(long)]
    p_out: Option<f64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    dataset: DatasetArgs,
    #[command(flatten)]
    hyper: TrainHyperArgs,
}

#[derive(Args, Debug)]
struct AttackArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    dataset: DatasetArgs,
    #[command(flatten)]
    attack: AttackHyperArgs,
    /// Trained checkpoint path
    #[arg(long)]
    model: Option<String>,
    /// uniform | hub | bridge
    #[arg(long)]
    strategy: Option<String>,
    /// Targets per class (uniform) or in total (hub/bridge)
    #[arg(long)]
    count: Option<usize>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Directory holding report.json and perturbations/
    #[arg(long)]
    report_dir: Option<String>,
    /// Largest gamma row to emit (default: the attack budget)
    #[arg(long)]
    gamma_max: Option<usize>,
    /// Train fraction used for the split-restricted distance columns
    #[arg(long)]
    train_frac: Option<f64>,
    #[arg(long)]
    val_frac: Option<f64>,
    /// Seed the training split was derived from (default: the report seed)
    #[arg(long)]
    train_seed: Option<u64>,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    dataset: DatasetArgs,
    #[command(flatten)]
    attack: AttackHyperArgs,
    /// Trained checkpoint path
    #[arg(long)]
    model: Option<String>,
}

#[derive(Args, Debug)]
struct DeceiveArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    dataset: DatasetArgs,
    #[command(flatten)]
    attack: AttackHyperArgs,
    #[command(flatten)]
    hyper: TrainHyperArgs,
    /// uniform | hub | bridge
    #[arg(long)]
    strategy: Option<String>,
    /// Targets per community (uniform) or in total (hub/bridge)
    #[arg(long)]
    count: Option<usize>,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(args) => {
            let file = args.common.load()?;
            let run = GenRun {
                gen_n: resolve(args.gen_n, &file, "gen-n")?
                    .ok_or_else(|| Error::Config("--gen-n is required".into()))?,
                gen_k: resolve(args.gen_k, &file, "gen-k")?
                    .ok_or_else(|| Error::Config("--gen-k is required".into()))?,
                p_in: resolve(args.p_in, &file, "p-in")?
                    .ok_or_else(|| Error::Config("--p-in is required".into()))?,
                p_out: resolve(args.p_out, &file, "p-out")?
                    .ok_or_else(|| Error::Config("--p-out is required".into()))?,
                seed: args.common.seed(&file)?,
            };
            commands::cmd_gen(run, &args.common.out(&file)?)
        }
        Command::Train(args) => {
            let file = args.common.load()?;
            let seed = args.common.seed(&file)?;
            let run = TrainRun {
                dataset: args.dataset.resolve(&file)?,
                train: args.hyper.resolve(&file, seed)?,
                seed,
            };
            commands::cmd_train(run, &args.common.out(&file)?)
        }
        Command::Attack(args) => {
            let file = args.common.load()?;
            let seed = args.common.seed(&file)?;
            let model = resolve(args.model, &file, "model")?
                .ok_or_else(|| Error::Config("--model is required".into()))?;
            let strategy = match resolve(args.strategy, &file, "strategy")? {
                Some(s) => TargetStrategy::parse(&s)?,
                None => TargetStrategy::Uniform,
            };
            let run = AttackRun {
                dataset: args.dataset.resolve(&file)?,
                model_digest: String::new(),
                attack: args.attack.resolve(&file, seed)?,
                strategy,
                count: resolve(args.count, &file, "count")?.unwrap_or(20),
                seed,
            };
            commands::cmd_attack(run, &model, &args.common.out(&file)?)
        }
        Command::Analyze(args) => {
            let file = args.common.load()?;
            let report_dir = resolve(args.report_dir, &file, "report-dir")?
                .map(PathBuf::from)
                .ok_or_else(|| Error::Config("--report-dir is required".into()))?;
            let out = match resolve(args.common.out.clone(), &file, "out")? {
                Some(dir) => PathBuf::from(dir),
                None => report_dir.clone(),
            };
            commands::cmd_analyze(
                &report_dir,
                resolve(args.gamma_max, &file, "gamma-max")?,
                resolve(args.train_frac, &file, "train-frac")?.unwrap_or(0.1),
                resolve(args.val_frac, &file, "val-frac")?.unwrap_or(0.1),
                resolve(args.train_seed, &file, "train-seed")?,
                &out,
            )
        }
        Command::AblateKnowledge(args) => {
            let file = args.common.load()?;
            let seed = args.common.seed(&file)?;
            let model = resolve(args.model, &file, "model")?
                .ok_or_else(|| Error::Config("--model is required".into()))?;
            let run = AblateRun {
                dataset: args.dataset.resolve(&file)?,
                model_digest: String::new(),
                attack: args.attack.resolve(&file, seed)?,
                seed,
            };
            commands::cmd_ablate(run, &model, &args.common.out(&file)?)
        }
        Command::Deceive(args) => {
            let file = args.common.load()?;
            let seed = args.common.seed(&file)?;
            let strategy = match resolve(args.strategy, &file, "strategy")? {
                Some(s) => TargetStrategy::parse(&s)?,
                None => TargetStrategy::Uniform,
            };
            let run = DeceiveRun {
                dataset: args.dataset.resolve(&file)?,
                train: args.hyper.resolve(&file, seed)?,
                attack: args.attack.resolve(&file, seed)?,
                strategy,
                count: resolve(args.count, &file, "count")?.unwrap_or(5),
                seed,
            };
            commands::cmd_deceive(run, &args.common.out(&file)?)
        }
    }
}

/// 0 on success, 2 for user/config mistakes, 1 for internal failures.
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Parse { .. }
        | Error::NodeOutOfRange { .. }
        | Error::InsufficientTargets(_)
        | Error::Checkpoint(_)
        | Error::EmptyTrainingSplit => 2,
        _ => 1,
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
