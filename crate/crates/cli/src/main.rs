use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use stereocost::census::DEFAULT_RADIUS;
use stereocost::cnn::{
    load_weights, save_weights, train_with_progress, FeatureNetwork, PatchTriple, TrainConfig,
};
use stereocost::disparity::{median_fuse, DEFAULT_LR_TOLERANCE};
use stereocost::evaluation::{error_image, evaluate, histogram_path, write_report, EvalConfig};
use stereocost::image_io::{load_pfm, load_pgm, save_pfm, save_pgm};
use stereocost::pipeline::{match_pair, MatchCost, MatchParams};
use stereocost::sgm::SgmParams;
use stereocost::synth::{
    extract_triples, generate, read_scene, write_scene, Augmentation, SceneSpec, TRUTH_FILE,
};
use stereocost::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

/// Census and learned matching costs for rectified stereo pairs.
#[derive(Parser)]
#[command(name = "stereocost", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic pair (left.pgm, right.pgm, truth.pfm) from a key=value scene file.
    Synth { config: PathBuf, out_dir: PathBuf },
    /// Compute a disparity map for a rectified pair.
    Match(MatchArgs),
    /// Train network weights on synthetic scenes.
    Train(TrainArgs),
    /// Score a disparity map against ground truth.
    Eval(EvalArgs),
    /// Median-fuse disparity maps: `fuse a.pfm b.pfm ... out.pfm`.
    Fuse {
        #[arg(required = true, num_args = 2..)]
        paths: Vec<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CostKind {
    Census,
    Cnn,
}

#[derive(Parser)]
struct MatchArgs {
    left: PathBuf,
    right: PathBuf,
    output: PathBuf,
    #[arg(long, value_enum, default_value = "census")]
    cost: CostKind,
    /// Network weights; required with --cost cnn.
    #[arg(long, required_if_eq("cost", "cnn"))]
    weights: Option<PathBuf>,
    /// Largest disparity searched.
    #[arg(long, default_value_t = 64)]
    dmax: usize,
    /// Census window radius.
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    radius: usize,
    #[arg(long, default_value_t = SgmParams::default().p1)]
    p1: f32,
    #[arg(long, default_value_t = SgmParams::default().p2)]
    p2: f32,
    /// SGM path count, 4 or 8.
    #[arg(long, default_value_t = SgmParams::default().num_paths)]
    paths: usize,
    /// Winner-take-all on the raw cost volume.
    #[arg(long)]
    no_sgm: bool,
    /// Aggregate raw costs without mapping them to [0, 1] first.
    #[arg(long)]
    no_normalize: bool,
    /// Parabolic sub-pixel refinement.
    #[arg(long)]
    subpixel: bool,
    /// Left-right consistency tolerance in pixels.
    #[arg(long, default_value_t = DEFAULT_LR_TOLERANCE)]
    lr_tol: f32,
    #[arg(long)]
    no_lr_check: bool,
}

#[derive(Parser)]
struct TrainArgs {
    /// Directory holding left.pgm, right.pgm and truth.pfm, or subdirectories that do.
    data: PathBuf,
    output: PathBuf,
    #[arg(long, default_value_t = TrainConfig::default().margin)]
    margin: f32,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    lr: f32,
    #[arg(long, default_value_t = TrainConfig::default().momentum)]
    momentum: f32,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    batch: usize,
    /// Seeds initialization, sampling and shuffling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Triples drawn in total, split evenly across scenes.
    #[arg(long, default_value_t = 5000)]
    triples: usize,
    /// Comma-separated channel widths of the four layers.
    #[arg(long, value_delimiter = ',', default_values_t = [64, 64, 64, 64])]
    widths: Vec<usize>,
    /// Start from these weights instead of a random network.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Skip gain/bias and vertical-jitter augmentation.
    #[arg(long)]
    no_augment: bool,
}

#[derive(Parser)]
struct EvalArgs {
    disparity: PathBuf,
    truth: PathBuf,
    /// JSON report; the histogram goes next to it as .csv.
    report: PathBuf,
    /// Error cap in pixels.
    #[arg(long, default_value_t = EvalConfig::default().sigma)]
    sigma: f64,
    /// Histogram bin width in pixels.
    #[arg(long, default_value_t = EvalConfig::default().bin_width)]
    bin: f64,
    /// Also write capped errors scaled to [0, 1] as a PGM.
    #[arg(long)]
    error_map: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth { config, out_dir } => synth(&config, &out_dir),
        Command::Match(args) => run_match(&args),
        Command::Train(args) => run_train(&args),
        Command::Eval(args) => run_eval(&args),
        Command::Fuse { paths } => fuse(&paths),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stereocost: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Param(_) => EXIT_USAGE,
        Error::Numeric(_) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

fn synth(config: &Path, out_dir: &Path) -> stereocost::Result<()> {
    let spec = SceneSpec::load(config)?;
    write_scene(&generate(&spec)?, out_dir)
}

fn run_match(args: &MatchArgs) -> stereocost::Result<()> {
    let left = load_pgm(&args.left)?;
    let right = load_pgm(&args.right)?;
    let net;
    let cost = match args.cost {
        CostKind::Census => MatchCost::Census {
            radius: args.radius,
        },
        CostKind::Cnn => {
            let path = args
                .weights
                .as_ref()
                .ok_or_else(|| Error::Param("--cost cnn needs --weights".into()))?;
            net = load_weights(path)?;
            MatchCost::Cnn(&net)
        }
    };
    let params = MatchParams {
        d_max: args.dmax,
        cost,
        sgm: (!args.no_sgm).then_some(SgmParams {
            p1: args.p1,
            p2: args.p2,
            num_paths: args.paths,
            normalize: !args.no_normalize,
        }),
        subpixel: args.subpixel,
        lr_tol: (!args.no_lr_check).then_some(args.lr_tol),
    };
    save_pfm(&match_pair(&left, &right, &params)?, &args.output)
}

fn scene_dirs(root: &Path) -> stereocost::Result<Vec<PathBuf>> {
    if root.join(TRUTH_FILE).is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root)? {
        let path = entry?.path();
        if path.join(TRUTH_FILE).is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Data(format!(
            "no scenes found under {}",
            root.display()
        )));
    }
    Ok(dirs)
}

fn run_train(args: &TrainArgs) -> stereocost::Result<()> {
    let cfg = TrainConfig {
        margin: args.margin,
        learning_rate: args.lr,
        momentum: args.momentum,
        epochs: args.epochs,
        batch_size: args.batch,
        seed: args.seed,
    };
    if args.triples == 0 {
        return Err(Error::Param("--triples must be positive".into()));
    }
    if args.widths.len() != 4 || args.widths.contains(&0) {
        return Err(Error::Param(
            "--widths takes four positive layer widths".into(),
        ));
    }
    let dirs = scene_dirs(&args.data)?;
    let per_scene = args.triples.div_ceil(dirs.len());
    let augment = (!args.no_augment).then(Augmentation::default);
    let mut data: Vec<PatchTriple> = Vec::with_capacity(args.triples);
    for (i, dir) in dirs.iter().enumerate() {
        let scene = read_scene(dir)?;
        let n = per_scene.min(args.triples - data.len());
        data.extend(extract_triples(
            &scene.left,
            &scene.right,
            &scene.truth,
            n,
            args.seed.wrapping_add(i as u64),
            augment.as_ref(),
        )?);
    }
    let net = match &args.init {
        Some(path) => load_weights(path)?,
        None => {
            let w = &args.widths;
            FeatureNetwork::random([w[0], w[1], w[2], w[3]], args.seed)
        }
    };
    eprintln!(
        "training on {} triples from {} scene(s)",
        data.len(),
        dirs.len()
    );
    let (trained, report) = train_with_progress(&net, &data, &cfg, |epoch, loss| {
        eprintln!("epoch {epoch:>3}  mean loss {loss:.6}");
    })?;
    eprintln!(
        "loss {:.6} -> {:.6}",
        report.initial_loss, report.final_loss
    );
    save_weights(&trained, &args.output)
}

fn run_eval(args: &EvalArgs) -> stereocost::Result<()> {
    let cfg = EvalConfig {
        sigma: args.sigma,
        bin_width: args.bin,
    };
    cfg.num_bins()?;
    let d = load_pfm(&args.disparity)?;
    let truth = load_pfm(&args.truth)?;
    let report = evaluate(&d, &truth, &cfg)?;
    write_report(&report, &args.report)?;
    if let Some(path) = &args.error_map {
        save_pgm(&error_image(&d, &truth, &cfg)?, path)?;
    }
    println!("M_ab   {:.6}", report.m_ab);
    println!("M_sys  {:.6}", report.m_sys);
    println!("M_cpl  {:.6}", report.m_cpl);
    println!(
        "pixels {} evaluated, {} valid, {} invalid",
        report.n_evaluated, report.n_valid, report.n_invalid
    );
    println!("histogram {}", histogram_path(&args.report).display());
    Ok(())
}

fn fuse(paths: &[PathBuf]) -> stereocost::Result<()> {
    let (output, inputs) = paths.split_last().expect("clap enforces two paths");
    let maps = inputs
        .iter()
        .map(load_pfm)
        .collect::<stereocost::Result<Vec<_>>>()?;
    save_pfm(&median_fuse(&maps)?, output)
}
