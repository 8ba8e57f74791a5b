//! `keygrid`: train, detect, evaluate, and stress-test keypoint models.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use keygrid::data::{load_cloud, load_dataset, write_ply, DatasetSource, DatasetSpec, PlyEncoding, Shape, Split, SynthFamilyParams, SynthKind};
use keygrid::evaluation::{das_all_pairs, miou, predict_records, render_table, robustness_suite, Matching, RobustnessConfig, DEFAULT_THRESHOLD};
use keygrid::geometry::{normalize_unit_cube, Frame, NormalizeTransform, PointCloud};
use keygrid::model::KeyGrid;
use keygrid::training::{load_checkpoint, TrainConfig, Trainer};
use keygrid::Error;
use serde_json::json;

#[derive(Parser)]
#[command(name = "keygrid", version, about = "Unsupervised 3D keypoint detection with grid heatmaps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a `key = value` config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Continue from this checkpoint instead of starting fresh.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Predict keypoints for one cloud.
    Detect {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write a colored point file with the keypoints.
        #[arg(long)]
        viz: Option<PathBuf>,
        /// The input is already in the normalized unit-cube frame.
        #[arg(long)]
        normalized: bool,
    },
    /// Score predictions with DAS or mIoU.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        metric: Metric,
        /// DAS radius or mIoU threshold.
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long, value_enum, default_value_t = MatchingArg::Greedy)]
        matching: MatchingArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute DAS and keypoint displacement under noise and downsampling.
    Perturb {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated noise standard deviations.
        #[arg(long, allow_hyphen_values = true, default_value = "0,0.01,0.03,0.06,0.08")]
        noise: String,
        /// Comma-separated downsampling factors.
        #[arg(long, allow_hyphen_values = true, default_value = "1,8,16")]
        downsample: String,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        radius: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct DataArgs {
    /// `checkpoint` (the training dataset), a directory of clouds, or
    /// `synthetic:KIND[:FRAMES[:MAGNITUDE[:SEED]]]`.
    #[arg(long, default_value = "checkpoint")]
    dataset: String,
    /// Subdirectory of a directory dataset.
    #[arg(long)]
    category: Option<String>,
    #[arg(long, value_enum, default_value_t = SplitArg::All)]
    split: SplitArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Das,
    Miou,
}

#[derive(Clone, Copy, ValueEnum)]
enum MatchingArg {
    Greedy,
    Optimal,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::UnknownConfigKey(_) | Error::BadConfigValue { .. } | Error::InvalidArgument(_)) => 2,
        Some(Error::ShapeMismatch(_) | Error::WrongFrame { .. } | Error::OutsideUnitCube { .. }) => 3,
        Some(Error::MissingAnnotations(_) | Error::NeedTwoFrames(_) | Error::Unpaired(_)) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train { config, resume } => cmd_train(&config, resume.as_deref()),
        Command::Detect {
            checkpoint,
            input,
            out,
            viz,
            normalized,
        } => cmd_detect(&checkpoint, &input, &out, viz.as_deref(), normalized),
        Command::Eval {
            checkpoint,
            data,
            metric,
            threshold,
            matching,
            out,
        } => cmd_eval(&checkpoint, &data, metric, threshold, matching, out.as_deref()),
        Command::Perturb {
            checkpoint,
            data,
            noise,
            downsample,
            seeds,
            radius,
            out,
        } => cmd_perturb(&checkpoint, &data, &noise, &downsample, seeds, radius, &out),
    }
}

fn cmd_train(config: &Path, resume: Option<&Path>) -> Result<()> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let mut cfg = TrainConfig::parse(&text)?;
    cfg.override_seed(std::env::var("KEYGRID_SEED").ok().as_deref())?;
    let mut trainer = match resume {
        Some(path) => {
            let mut ckpt = load_checkpoint(path)?;
            ckpt.config.epochs = cfg.epochs;
            ckpt.config.output_dir = cfg.output_dir.clone();
            Trainer::from_checkpoint(ckpt)?
        }
        None => Trainer::new(cfg)?,
    };
    let path = trainer.run(|e| {
        println!("epoch {:>4}  l_sim {:.6}  l_far {:.6}  l_total {:.6}", e.epoch, e.l_sim, e.l_far, e.l_total);
    })?;
    println!("checkpoint written to {}", path.display());
    Ok(())
}

fn load_model(path: &Path) -> Result<KeyGrid> {
    let ckpt = load_checkpoint(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(KeyGrid::with_params(ckpt.config.model, ckpt.params)?)
}

fn keypoint_colors(k: usize) -> Vec<[u8; 3]> {
    (0..k)
        .map(|i| {
            let h = i as f64 / k as f64 * 6.0;
            let x = 1.0 - (h % 2.0 - 1.0).abs();
            let (r, g, b) = match h as usize {
                0 => (1.0, x, 0.0),
                1 => (x, 1.0, 0.0),
                2 => (0.0, 1.0, x),
                3 => (0.0, x, 1.0),
                4 => (x, 0.0, 1.0),
                _ => (1.0, 0.0, x),
            };
            [(r * 255.0) as u8, (g * 255.0) as u8, (b * 255.0) as u8]
        })
        .collect()
}

fn cmd_detect(checkpoint: &Path, input: &Path, out: &Path, viz: Option<&Path>, normalized: bool) -> Result<()> {
    let model = load_model(checkpoint)?;
    let raw = load_cloud(input)?;
    let n = model.config().num_points;
    if raw.len() != n {
        return Err(Error::ShapeMismatch(format!("model expects {n} points, {} has {}", input.display(), raw.len())).into());
    }
    let (cloud, transform) = if normalized {
        let c = PointCloud::with_frame(raw.id.clone(), raw.into_points(), Frame::UnitCube)?;
        (c, NormalizeTransform::identity())
    } else {
        normalize_unit_cube(&raw)?
    };
    let pred = model.infer(&cloud)?.prediction;
    let original = transform.invert_all(&pred.keypoints);
    let report = json!({
        "shape_id": cloud.id,
        "keypoints": original,
        "keypoints_normalized": pred.keypoints,
        "segment_weights": pred.segment_weights,
        "normalization": { "offset": transform.offset, "scale": transform.scale },
    });
    fs::write(out, serde_json::to_string_pretty(&report)? + "\n")?;
    if let Some(viz) = viz {
        let mut pts = transform.invert_all(cloud.points());
        let mut colors = vec![[128u8; 3]; pts.len()];
        pts.extend_from_slice(&original);
        colors.extend(keypoint_colors(original.len()));
        write_ply(viz, &pts, Some(&colors), PlyEncoding::Ascii)?;
    }
    println!("{} keypoints written to {}", original.len(), out.display());
    Ok(())
}

fn dataset_spec(arg: &DataArgs, checkpoint_spec: &DatasetSpec, points: usize) -> Result<DatasetSpec> {
    let mut spec = if arg.dataset == "checkpoint" {
        checkpoint_spec.clone()
    } else if let Some(rest) = arg.dataset.strip_prefix("synthetic:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let kind = SynthKind::parse(parts[0])
            .ok_or_else(|| Error::InvalidArgument(format!("unknown synthetic family `{}`", parts[0])))?;
        let num = |i: usize, name: &str| -> Result<Option<f64>> {
            parts
                .get(i)
                .map(|s| s.parse::<f64>().map_err(|_| Error::InvalidArgument(format!("bad {name} `{s}`")).into()))
                .transpose()
        };
        let d = SynthFamilyParams::default();
        DatasetSpec {
            source: DatasetSource::Synthetic(SynthFamilyParams {
                kind,
                frames: num(1, "frame count")?.map_or(d.frames, |v| v as usize),
                magnitude: num(2, "magnitude")?.unwrap_or(d.magnitude),
                seed: num(3, "seed")?.map_or(d.seed, |v| v as u64),
                points,
            }),
            ..checkpoint_spec.clone()
        }
    } else {
        DatasetSpec {
            source: DatasetSource::Directory {
                root: PathBuf::from(&arg.dataset),
                category: arg.category.clone(),
            },
            ..checkpoint_spec.clone()
        }
    };
    spec.points = points;
    Ok(spec)
}

fn selected_shapes(arg: &DataArgs, checkpoint: &Path, model: &KeyGrid) -> Result<Vec<Shape>> {
    let ckpt = load_checkpoint(checkpoint)?;
    let spec = dataset_spec(arg, &ckpt.config.dataset, model.config().num_points)?;
    let data = load_dataset(&spec)?;
    let split = match arg.split {
        SplitArg::Train => Split::Train,
        SplitArg::Val => Split::Val,
        SplitArg::Test => Split::Test,
        SplitArg::All => Split::All,
    };
    Ok(data.indices(split).into_iter().map(|i| data.shapes[i].clone()).collect())
}

fn emit(out: Option<&Path>, report: &serde_json::Value, table: &str) -> Result<()> {
    print!("{table}");
    if let Some(out) = out {
        fs::write(out, serde_json::to_string_pretty(report)? + "\n")?;
        println!("report written to {}", out.display());
    }
    Ok(())
}

fn cmd_eval(checkpoint: &Path, data: &DataArgs, metric: Metric, threshold: f64, matching: MatchingArg, out: Option<&Path>) -> Result<()> {
    let model = load_model(checkpoint)?;
    let shapes = selected_shapes(data, checkpoint, &model)?;
    match metric {
        Metric::Das => {
            if shapes.len() < 2 {
                bail!(Error::NeedTwoFrames(shapes.len()));
            }
            let records = predict_records(&model, &shapes)?;
            let report = das_all_pairs(&records, threshold)?;
            emit(out, &json!({ "metric": "das", "report": report }), &report.to_table())
        }
        Metric::Miou => {
            let matching = match matching {
                MatchingArg::Greedy => Matching::Greedy,
                MatchingArg::Optimal => Matching::Optimal,
            };
            if shapes.is_empty() {
                bail!(Error::MissingAnnotations("no shapes selected".into()));
            }
            let mut rows = Vec::new();
            let mut per_shape = Vec::new();
            for s in &shapes {
                let labels = s
                    .labels
                    .as_ref()
                    .ok_or_else(|| Error::MissingAnnotations(format!("shape `{}` has no annotations", s.cloud.id)))?;
                let pts: Vec<_> = labels.iter().map(|l| l.xyz).collect();
                let kp = model.infer(&s.cloud)?.prediction.keypoints;
                let score = miou(&kp, &pts, threshold, matching)?;
                rows.push(vec![s.cloud.id.clone(), format!("{score:.2}")]);
                per_shape.push(json!({ "shape_id": s.cloud.id, "miou": score }));
            }
            let mean = per_shape.iter().map(|v| v["miou"].as_f64().unwrap_or(0.0)).sum::<f64>() / shapes.len() as f64;
            rows.push(vec!["mean".into(), format!("{mean:.2}")]);
            let report = json!({ "metric": "miou", "threshold": threshold, "score": mean, "shapes": per_shape });
            emit(out, &report, &render_table(&["shape", "mIoU"], &rows))
        }
    }
}

fn parse_list<T: std::str::FromStr>(flag: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("--{flag}: cannot parse `{}`", t.trim())).into())
        })
        .collect()
}

fn cmd_perturb(checkpoint: &Path, data: &DataArgs, noise: &str, downsample: &str, seeds: u64, radius: f64, out: &Path) -> Result<()> {
    let cfg = RobustnessConfig {
        noise_scales: parse_list("noise", noise)?,
        downsample_factors: parse_list("downsample", downsample)?,
        seeds,
        radius,
    };
    if let Some(s) = cfg.noise_scales.iter().find(|s| s.is_nan() || **s < 0.0) {
        bail!(Error::InvalidArgument(format!("noise scale must be nonnegative, got {s}")));
    }
    let model = load_model(checkpoint)?;
    let shapes = selected_shapes(data, checkpoint, &model)?;
    let report = robustness_suite(&model, &shapes, &cfg)?;
    emit(Some(out), &serde_json::to_value(&report)?, &report.to_table())
}
