use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use lwgcn::graph::PowerLawParams;
use lwgcn_cli::{
    cmd_gen, cmd_preprocess, cmd_report, cmd_simulate, cmd_sweep, exit, ArchOverrides, DatasetSource, FileConfig,
    ModelChoice, SweepSpec,
};

#[derive(Parser)]
#[command(name = "lwgcn", version, about = "Sparse GCN accelerator preprocessor and cycle-level simulator")]
struct Cli {
    /// TOML file with `[arch]`, `[graph]`, `seed` and `jobs`; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic power-law graph with features and weights.
    Gen(GenArgs),
    /// Build PCOO streams and schedule metadata for a graph.
    Preprocess(RunArgs),
    /// Run inference on the simulator and check it against the oracle.
    Simulate(SimulateArgs),
    /// Simulate a grid of architecture points and print a CSV table.
    Sweep(SweepArgs),
    /// Summarize a report.json written by `simulate`.
    Report { report: PathBuf },
}

#[derive(Args, Default)]
struct ArchArgs {
    #[arg(long = "pe")]
    pes: Option<usize>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long = "tile")]
    tile_width: Option<usize>,
    #[arg(long)]
    lanes: Option<usize>,
    #[arg(long)]
    value_bits: Option<u32>,
    #[arg(long)]
    load_bw: Option<usize>,
    #[arg(long)]
    move_bw: Option<usize>,
}

impl ArchArgs {
    fn overrides(&self) -> ArchOverrides {
        ArchOverrides {
            pes: self.pes,
            replicas: self.replicas,
            tile_width: self.tile_width,
            lanes: self.lanes,
            value_bits: self.value_bits,
            load_bw: self.load_bw,
            move_bw: self.move_bw,
        }
    }
}

#[derive(Args)]
struct GraphArgs {
    /// Directory with edges.txt, features.txt and layer<i>.lwfp; without it
    /// a power-law graph is generated from the config and `--seed`.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "gcn")]
    model: ModelChoice,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    arch: ArchArgs,
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    arch: ArchArgs,
    #[command(flatten)]
    graph: GraphArgs,
    /// Output directory of an earlier `preprocess`; its architecture is used.
    #[arg(long)]
    schedules: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long = "pe", value_delimiter = ',')]
    pes: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    replicas: Vec<usize>,
    #[arg(long = "tile", value_delimiter = ',')]
    tile_widths: Vec<usize>,
    #[arg(long)]
    lanes: Option<usize>,
    #[arg(long)]
    value_bits: Option<u32>,
    #[arg(long)]
    load_bw: Option<usize>,
    #[arg(long)]
    move_bw: Option<usize>,
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    jobs: Option<usize>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    avg_degree: Option<f64>,
    #[arg(long)]
    exponent: Option<f64>,
    #[arg(long)]
    features: Option<usize>,
    #[arg(long)]
    feature_density: Option<f64>,
    /// Output widths of the generated layers, e.g. `16,8`.
    #[arg(long, value_delimiter = ',')]
    layers: Vec<usize>,
    #[arg(long, value_enum, default_value = "gcn")]
    model: ModelChoice,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

fn source(graph: &GraphArgs, file: &FileConfig) -> DatasetSource {
    match &graph.graph {
        Some(dir) => DatasetSource::Directory(dir.clone()),
        None => {
            let seed = graph.seed.or(file.seed).unwrap_or(file.graph.seed);
            let weight_blocks = graph.model.weight_blocks();
            DatasetSource::Synthetic(PowerLawParams { seed, weight_blocks, ..file.graph.clone() })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let stdout = io::stdout();
    match cli.command {
        Command::Gen(a) => {
            let params = PowerLawParams {
                nodes: a.nodes.unwrap_or(file.graph.nodes),
                avg_degree: a.avg_degree.unwrap_or(file.graph.avg_degree),
                exponent: a.exponent.unwrap_or(file.graph.exponent),
                features: a.features.unwrap_or(file.graph.features),
                feature_density: a.feature_density.unwrap_or(file.graph.feature_density),
                layer_widths: if a.layers.is_empty() { file.graph.layer_widths.clone() } else { a.layers },
                weight_blocks: a.model.weight_blocks(),
                seed: a.seed.or(file.seed).unwrap_or(file.graph.seed),
            };
            let paths = cmd_gen(&params, &a.out)?;
            writeln!(stdout.lock(), "wrote {} and {} weight files", paths.edges.display(), paths.weights.len())?;
        }
        Command::Preprocess(a) => {
            let cfg = a.arch.overrides().apply(file.arch)?;
            let bundle = source(&a.graph, &file).load()?;
            let summary = cmd_preprocess(&bundle, a.graph.model, &cfg, &a.out)?;
            write!(stdout.lock(), "{}", summary.table)?;
        }
        Command::Simulate(a) => {
            let cfg = a.arch.overrides().apply(file.arch)?;
            let bundle = source(&a.graph, &file).load()?;
            let record = cmd_simulate(&bundle, a.graph.model, &cfg, a.schedules.as_deref(), a.out.as_deref())?;
            if a.schedules.is_some() && record.config != cfg {
                eprintln!("note: using the architecture recorded with the schedules");
            }
            write!(stdout.lock(), "{}", record.summary())?;
        }
        Command::Sweep(a) => {
            let overrides = ArchOverrides {
                lanes: a.lanes,
                value_bits: a.value_bits,
                load_bw: a.load_bw,
                move_bw: a.move_bw,
                ..Default::default()
            };
            let spec = SweepSpec {
                base: overrides.apply(file.arch)?,
                pes: a.pes,
                replicas: a.replicas,
                tile_widths: a.tile_widths,
            };
            let bundle = source(&a.graph, &file).load()?;
            let jobs = a.jobs.or(file.jobs).unwrap_or(1);
            match &a.out {
                Some(p) => {
                    let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
                    cmd_sweep(&spec, &bundle, a.graph.model, jobs, &mut BufWriter::new(f))?;
                }
                None => {
                    cmd_sweep(&spec, &bundle, a.graph.model, jobs, &mut stdout.lock())?;
                }
            }
        }
        Command::Report { report } => {
            write!(stdout.lock(), "{}", cmd_report(&report)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::ExitCategory::Usage as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let cat = exit::category(&e);
            eprintln!("{}: {e:#}", cat.label());
            ExitCode::from(cat as u8)
        }
    }
}
