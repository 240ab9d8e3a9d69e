use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use moddrop::harness::config::{load_config, RunConfig};
use moddrop::harness::gesture::run_gesture_pipeline;
use moddrop::harness::persist::{load_model, save_matrix, save_model, SavedModel};
use moddrop::harness::{
    grid_report, grid_table, mnist_topology, robustness_grid, run_mnist_experiment, run_robustness_comparison,
    strategy_table, MnistData, MnistExperimentConfig,
};
use moddrop::network::ForwardOptions;
use moddrop::skeleton::{describe_sequence, dynamic_pose_matrix, parse_frames, SkeletonTree};
use moddrop::temporal::{format_labelings, jaccard_pairs, parse_labelings, per_class_jaccard};
use moddrop::training::{evaluate, fuse_train, initialize_shared, pretrain_all, TrainLog};

#[derive(Parser)]
#[command(name = "moddrop", version, about = "Multi-modal fusion training with modality dropout")]
struct Cli {
    /// Seed for every random stream (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// INI configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory holding the four MNIST IDX files.
    #[arg(long, global = true, default_value = "data/mnist")]
    data_dir: PathBuf,
    /// Output directory for models and reports.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain every image-quarter path with its own softmax head.
    Pretrain,
    /// Fuse pretrained paths: a frozen-gate stage, then a relaxed stage.
    Fuse {
        /// Model written by `pretrain`.
        #[arg(long)]
        model: PathBuf,
        /// Train the relaxed stage with ModDrop.
        #[arg(long)]
        moddrop: bool,
    },
    /// Evaluate a model on the clean, occluded and noisy test sets.
    Eval {
        #[arg(long)]
        model: PathBuf,
    },
    /// Compare dropout-only and dropout+ModDrop training on MNIST quarters.
    MnistExperiment {
        /// Train only the strategy selected in the config file.
        #[arg(long)]
        single: bool,
    },
    /// Per-frame pose descriptors (or dynamic poses) of a skeleton file.
    PoseExtract {
        /// One frame per line, 33 coordinates.
        #[arg(long)]
        frames: PathBuf,
        /// Emit dynamic poses sampled at this stride instead.
        #[arg(long)]
        stride: Option<usize>,
        /// Normalize to bone lengths averaged over the file instead of
        /// the built-in adult proportions.
        #[arg(long)]
        estimate_lengths: bool,
    },
    /// Train and evaluate the gesture pipeline on synthetic streams.
    PipelineRun {
        /// Number of consecutive seeds to run.
        #[arg(long, default_value_t = 1)]
        runs: u64,
    },
    /// Jaccard index of predicted segments against ground truth.
    Report {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        predicted: PathBuf,
    },
}

fn write(out: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(p) => load_config(p).with_context(|| format!("reading {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    let out = &cli.out;
    match cli.command {
        Command::Pretrain => {
            let data = MnistData::load(&cli.data_dir, &cfg.mnist)?;
            let topology = mnist_topology();
            let tcfg = cfg.mnist.training_config();
            let m = MnistExperimentConfig { pretrain: true, ..cfg.mnist.clone() };
            let (params, _, log) = pretrain_all(&topology, &data.train, &data.val, &tcfg, &m.stage_plan())?;
            let model = SavedModel {
                topology,
                params,
                input_keep: tcfg.input_keep,
            };
            fs::create_dir_all(out)?;
            save_model(&model, &out.join("pretrained.model"))?;
            write(out, "pretrain_log.tsv", log.to_tsv())?;
            println!("wrote {}", out.join("pretrained.model").display());
        }
        Command::Fuse { model, moddrop } => {
            let data = MnistData::load(&cli.data_dir, &cfg.mnist)?;
            let SavedModel { topology, mut params, .. } = load_model(&model)?;
            let m = MnistExperimentConfig {
                pretrain: true,
                moddrop: cfg.mnist.moddrop || moddrop,
                ..cfg.mnist.clone()
            };
            let tcfg = m.training_config();
            initialize_shared(&mut params, &topology, m.init_mode(), tcfg.seed)?;
            let mut log = TrainLog::default();
            let (params, _) = fuse_train(params, &topology, &data.train, &data.val, &tcfg, &m.stage_plan(), &mut log)?;
            fs::create_dir_all(out)?;
            let path = out.join("fused.model");
            save_model(
                &SavedModel {
                    topology,
                    params,
                    input_keep: tcfg.input_keep,
                },
                &path,
            )?;
            write(out, "fuse_log.tsv", log.to_tsv())?;
            println!("wrote {}", path.display());
        }
        Command::Eval { model } => {
            let data = MnistData::load(&cli.data_dir, &cfg.mnist)?;
            let m = load_model(&model)?;
            let opts = ForwardOptions::eval(m.input_keep, 1.0);
            let clean = evaluate(&m.params, &m.topology, &data.test, &opts)?;
            let grid = robustness_grid(&m.params, &m.topology, &data.test, &opts, cfg.mnist.noise_rate, cfg.mnist.training.seed)?;
            let mut report = format!("errors\ttest_count\n{}\t{}\n\n", clean.errors, clean.count);
            report.push_str(&grid_report(&[("model", &grid)]));
            write(out, "eval.tsv", &report)?;
            print!("{report}");
        }
        Command::MnistExperiment { single } => {
            let data = MnistData::load(&cli.data_dir, &cfg.mnist)?;
            let mut log = TrainLog::default();
            let report = if single {
                let run = run_mnist_experiment(&cfg.mnist, &data, &mut log)?;
                format!(
                    "{}\n{}",
                    strategy_table(std::slice::from_ref(&run)),
                    grid_report(&[(&run.strategy, &run.grid)])
                )
            } else {
                let c = run_robustness_comparison(&cfg.mnist, &data, &mut log)?;
                format!("{}\n{}", strategy_table(&[c.dropout.clone(), c.moddrop.clone()]), grid_table(&c))
            };
            write(out, "mnist_report.tsv", &report)?;
            write(out, "mnist_log.tsv", log.to_tsv())?;
            print!("{report}");
        }
        Command::PoseExtract {
            frames,
            stride,
            estimate_lengths,
        } => {
            let text = fs::read_to_string(&frames).with_context(|| format!("reading {}", frames.display()))?;
            let seq = parse_frames(&text)?;
            let tree = if estimate_lengths {
                SkeletonTree::estimate(&seq)?
            } else {
                SkeletonTree::standard()
            };
            let desc = describe_sequence(&seq, &tree, &cfg.gesture.descriptor)?;
            let (matrix, name) = match stride {
                Some(s) => (dynamic_pose_matrix(&desc, s)?.0, format!("dynamic_poses_s{s}.bin")),
                None => (desc, "descriptors.bin".to_string()),
            };
            fs::create_dir_all(out)?;
            let path = out.join(name);
            save_matrix(&matrix, &path)?;
            println!("wrote {} ({} x {})", path.display(), matrix.rows(), matrix.cols());
        }
        Command::PipelineRun { runs } => {
            if runs == 0 {
                bail!("--runs must be at least 1");
            }
            let mut summary = String::from("seed\twithout_localization\twith_localization\n");
            for i in 0..runs {
                let mut g = cfg.gesture.clone();
                g.seed += i;
                let report = run_gesture_pipeline(&g)?;
                let _ = writeln!(
                    summary,
                    "{}\t{:.4}\t{:.4}",
                    g.seed, report.without_localization.mean, report.with_localization.mean
                );
                write(out, &format!("gesture_report_{}.tsv", g.seed), report.to_tsv())?;
                let plain: Vec<_> = report.predictions.iter().map(|p| p.plain.clone()).collect();
                let refined: Vec<_> = report.predictions.iter().map(|p| p.refined.clone()).collect();
                write(out, &format!("truth_{}.txt", g.seed), format_labelings(&report.truth))?;
                write(out, &format!("predicted_plain_{}.txt", g.seed), format_labelings(&plain))?;
                write(out, &format!("predicted_refined_{}.txt", g.seed), format_labelings(&refined))?;
                if runs == 1 {
                    print!("{}", report.to_tsv());
                }
            }
            write(out, "gesture_summary.tsv", &summary)?;
            print!("{summary}");
        }
        Command::Report { truth, predicted } => {
            let read = |p: &Path| -> Result<_> {
                Ok(parse_labelings(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?)
            };
            let (t, p) = (read(&truth)?, read(&predicted)?);
            let mut report = String::from("sequence\tclass\tjaccard\n");
            let pairs = jaccard_pairs(&t, &p)?;
            for (seq, class, j) in &pairs {
                let _ = writeln!(report, "{seq}\t{class}\t{j:.4}");
            }
            report.push_str("\nclass\tmean_jaccard\n");
            for (class, j) in per_class_jaccard(&t, &p)? {
                let _ = writeln!(report, "{class}\t{j:.4}");
            }
            let mean = if pairs.is_empty() { 0.0 } else { pairs.iter().map(|x| x.2).sum::<f64>() / pairs.len() as f64 };
            let _ = writeln!(report, "mean\t{mean:.4}");
            write(out, "jaccard_report.tsv", &report)?;
            print!("{report}");
        }
    }
    Ok(())
}
