//! The five subcommands. Argument structs double as the library surface:
//! integration tests drive the same functions the binary dispatches to.
//!
//! Every command is deterministic given its flags and inputs; all
//! randomness descends from --seed through named sub-seeds. On failure the
//! declared outputs are removed so a nonzero exit never leaves partial
//! results behind.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;

use dehaze_core::guided::{refine_transmission, GuidedFilterParams};
use dehaze_core::metrics::{mse_255, psnr, ssim_eval};
use dehaze_core::network::{estimate_scalar_airlight, forward_cascade, train, TrainHyper};
use dehaze_core::scattering::invert_scattering;
use dehaze_core::synth::SampleRanges;

use crate::config::load_config;
use crate::dataset::{
    self, find_gt_image, list_prediction_ids, load_samples, procedural_rgbd, read_airlight,
    DatasetManifest, SynthParams,
};
use crate::pnm;
use crate::report::{ImageRecord, MetricsReport};
use crate::weights::{load_weights, save_weights};

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .context("building worker pool")
}

/// Remove best-effort any outputs a failed command may have written.
fn cleanup(paths: &[PathBuf]) {
    for p in paths {
        if p.is_dir() {
            let _ = fs::remove_dir_all(p);
        } else {
            let _ = fs::remove_file(p);
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output dataset directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Generate N procedural RGB-D source images instead of reading a manifest.
    #[arg(long, conflicts_with = "manifest")]
    pub procedural: Option<usize>,
    /// RGB-D manifest JSON ({"split", "seed", "entries": [{"id","clean","depth"}]}).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Dataset split label for procedural generation.
    #[arg(long, default_value = "train")]
    pub split: String,
    /// Hazy samples per source image.
    #[arg(long, default_value_t = 5)]
    pub per_image: usize,
    /// Sample width.
    #[arg(long, default_value_t = 207)]
    pub width: usize,
    /// Sample height.
    #[arg(long, default_value_t = 154)]
    pub height: usize,
    /// Attenuation coefficient range, low end.
    #[arg(long, default_value_t = 0.6)]
    pub beta_min: f64,
    /// Attenuation coefficient range, high end.
    #[arg(long, default_value_t = 2.8)]
    pub beta_max: f64,
    /// Airlight range, low end.
    #[arg(long, default_value_t = 0.7)]
    pub airlight_min: f64,
    /// Airlight range, high end.
    #[arg(long, default_value_t = 1.0)]
    pub airlight_max: f64,
    /// Master seed; all draws derive from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for per-image synthesis.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let created = vec![args.out.clone()];
    let existed = args.out.exists();
    let run = || -> Result<()> {
        fs::create_dir_all(&args.out)
            .with_context(|| format!("creating {}", args.out.display()))?;
        let pool = thread_pool(args.threads)?;
        let (manifest, base) = match (&args.procedural, &args.manifest) {
            (Some(count), None) => {
                let manifest = pool.install(|| {
                    procedural_rgbd(&args.out, *count, args.height, args.width, args.seed, &args.split)
                })?;
                (manifest, args.out.clone())
            }
            (None, Some(path)) => {
                let manifest = DatasetManifest::load(path)?;
                let base = path.parent().unwrap_or(Path::new(".")).to_owned();
                (manifest, base)
            }
            _ => bail!("exactly one of --procedural N or --manifest FILE is required"),
        };
        let ranges = SampleRanges {
            beta_min: args.beta_min,
            beta_max: args.beta_max,
            airlight_min: args.airlight_min,
            airlight_max: args.airlight_max,
        };
        ranges.validate()?;
        let params = SynthParams {
            per_image: args.per_image,
            ranges,
            width: args.width,
            height: args.height,
            seed: args.seed,
        };
        let index = pool.install(|| dataset::synth_dataset(&args.out, &base, &manifest, &params))?;
        println!(
            "synthesized {} samples from {} images ({}x{}, beta [{}, {}], airlight [{}, {}]) -> {}",
            index.samples.len(),
            manifest.entries.len(),
            args.width,
            args.height,
            args.beta_min,
            args.beta_max,
            args.airlight_min,
            args.airlight_max,
            args.out.display()
        );
        Ok(())
    };
    run().inspect_err(|_| {
        if !existed {
            cleanup(&created);
        }
    })
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Synthesized training dataset directory.
    #[arg(long)]
    pub train_dir: PathBuf,
    /// Synthesized validation dataset directory.
    #[arg(long)]
    pub val_dir: PathBuf,
    /// Output weight file.
    #[arg(long)]
    pub out: PathBuf,
    /// Loss curve CSV (default: <out>.losses.csv).
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
    /// Network configuration JSON; defaults to the basic setting.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    /// Adam learning rate.
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    /// Mini-batch size.
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    /// Adam first-moment decay.
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    /// Adam second-moment decay.
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    /// Adam epsilon.
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub struct TrainSummary {
    pub initial_val: dehaze_core::network::LossParts,
    pub final_val: dehaze_core::network::LossParts,
    pub optimizer_steps: u64,
    pub elapsed_sec: f64,
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainSummary> {
    let csv_path = args
        .loss_csv
        .clone()
        .unwrap_or_else(|| args.out.with_extension("losses.csv"));
    let outputs = vec![args.out.clone(), csv_path.clone()];
    let run = || -> Result<TrainSummary> {
        let config = load_config(args.config.as_deref())?;
        let train_set = load_samples(&args.train_dir)
            .with_context(|| format!("loading training set {}", args.train_dir.display()))?;
        let val_set = load_samples(&args.val_dir)
            .with_context(|| format!("loading validation set {}", args.val_dir.display()))?;
        let hyper = TrainHyper {
            lr: args.lr,
            batch_size: args.batch,
            beta1: args.beta1,
            beta2: args.beta2,
            eps: args.eps,
            epochs: args.epochs,
            seed: args.seed,
        };
        println!(
            "training on {} samples (val {}), {} epochs, batch {}, lr {}",
            train_set.len(),
            val_set.len(),
            args.epochs,
            args.batch,
            args.lr
        );
        let started = Instant::now();
        let (store, report) = train(&train_set, &val_set, &config, &hyper)?;
        println!(
            "initial val loss {:.6} (ssim {:.6}, mse {:.6})",
            report.initial_val.total, report.initial_val.ssim, report.initial_val.mse
        );
        if let Some(last) = report.epochs.last() {
            println!(
                "final val loss {:.6} (ssim {:.6}, mse {:.6}) after {:.1}s",
                last.val.total,
                last.val.ssim,
                last.val.mse,
                started.elapsed().as_secs_f64()
            );
        }
        save_weights(&store, &args.out)?;
        let mut csv = String::from("epoch,train_loss,val_loss,val_ssim_loss,val_mse_loss\n");
        for e in &report.epochs {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                e.epoch, e.train_total, e.val.total, e.val.ssim, e.val.mse
            ));
        }
        fs::write(&csv_path, csv).with_context(|| format!("writing {}", csv_path.display()))?;
        println!("weights -> {}", args.out.display());
        println!("loss curve -> {}", csv_path.display());
        Ok(TrainSummary {
            initial_val: report.initial_val,
            final_val: report.epochs.last().map(|e| e.val).unwrap_or(report.initial_val),
            optimizer_steps: report.optimizer_steps,
            elapsed_sec: started.elapsed().as_secs_f64(),
        })
    };
    run().inspect_err(|_| cleanup(&outputs))
}

#[derive(Debug, Args)]
pub struct DehazeArgs {
    /// Weight file produced by `train`.
    #[arg(long)]
    pub weights: PathBuf,
    /// Input hazy image (P6 PPM).
    #[arg(long)]
    pub input: PathBuf,
    /// Output dehazed image (P6 PPM).
    #[arg(long)]
    pub output: PathBuf,
    /// Network configuration JSON matching the weight file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Skip guided-filter refinement of the transmission map.
    #[arg(long)]
    pub no_refine: bool,
    /// Lower clamp on transmission during inversion.
    #[arg(long, default_value_t = 0.1)]
    pub t_floor: f64,
    /// Guided filter radius (window side 2r+1).
    #[arg(long, default_value_t = 16)]
    pub radius: usize,
    /// Guided filter regularization.
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    /// Also write the transmission map used for inversion (16-bit PGM).
    #[arg(long)]
    pub save_transmission: Option<PathBuf>,
    /// Also write <output>.json with the estimated airlight.
    #[arg(long)]
    pub save_meta: bool,
}

pub struct DehazeOutcome {
    pub airlight: f64,
    pub elapsed_sec: f64,
}

pub fn cmd_dehaze(args: &DehazeArgs) -> Result<DehazeOutcome> {
    let mut outputs = vec![args.output.clone()];
    if let Some(p) = &args.save_transmission {
        outputs.push(p.clone());
    }
    if args.save_meta {
        outputs.push(meta_path(&args.output));
    }
    let run = || -> Result<DehazeOutcome> {
        let config = load_config(args.config.as_deref())?;
        let store = load_weights(&args.weights, &config)?;
        let hazy = pnm::decode_ppm(
            &fs::read(&args.input).with_context(|| format!("reading {}", args.input.display()))?,
        )
        .with_context(|| format!("decoding {}", args.input.display()))?;
        if !(0.0 < args.t_floor && args.t_floor < 1.0) {
            bail!("--t-floor must be in (0, 1), got {}", args.t_floor);
        }

        let started = Instant::now();
        let out = forward_cascade(&hazy, &store, &config)?;
        let airlight = estimate_scalar_airlight(&out.airlight);
        let transmission = if args.no_refine {
            out.transmission.clamp(0.0, 1.0)
        } else {
            refine_transmission(
                &hazy,
                &out.transmission,
                &GuidedFilterParams {
                    radius: args.radius,
                    eps: args.eps,
                },
            )?
        };
        let dehazed = invert_scattering(&hazy, &transmission, airlight, args.t_floor)?;
        fs::write(&args.output, pnm::encode_ppm(&dehazed)?)
            .with_context(|| format!("writing {}", args.output.display()))?;
        let elapsed_sec = started.elapsed().as_secs_f64();

        if let Some(path) = &args.save_transmission {
            fs::write(path, pnm::encode_pgm16(&transmission)?)
                .with_context(|| format!("writing {}", path.display()))?;
        }
        if args.save_meta {
            let meta = serde_json::json!({ "airlight_pred": airlight });
            fs::write(meta_path(&args.output), serde_json::to_vec_pretty(&meta)?)?;
        }
        println!(
            "estimated airlight B = {airlight:.4}; {} -> {} ({:.3}s)",
            args.input.display(),
            args.output.display(),
            elapsed_sec
        );
        Ok(DehazeOutcome {
            airlight,
            elapsed_sec,
        })
    };
    run().inspect_err(|_| cleanup(&outputs))
}

fn meta_path(output: &Path) -> PathBuf {
    let mut os = output.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of predicted images (<id>.ppm, optional <id>.ppm.json).
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of ground-truth images (<id>.ppm or synth layout).
    #[arg(long)]
    pub gt: PathBuf,
    /// Output report JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Airlight accuracy tolerance.
    #[arg(long, default_value_t = 0.05)]
    pub airlight_tol: f64,
    /// Record wall-clock seconds per image (off by default so reports are
    /// byte-reproducible).
    #[arg(long)]
    pub timing: bool,
    /// Worker threads for per-image metrics.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<MetricsReport> {
    let outputs = vec![args.out.clone()];
    let run = || -> Result<MetricsReport> {
        let ids = list_prediction_ids(&args.pred)?;
        if ids.is_empty() {
            bail!("no .ppm predictions found in {}", args.pred.display());
        }
        let missing: Vec<&String> = ids
            .iter()
            .filter(|id| find_gt_image(&args.gt, id).is_none())
            .collect();
        if !missing.is_empty() {
            bail!(
                "missing ground truth for {} id(s): {}",
                missing.len(),
                missing
                    .iter()
                    .map(|s| s.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            );
        }
        let pool = thread_pool(args.threads)?;
        let records: Vec<Result<ImageRecord>> = pool.install(|| {
            use rayon::prelude::*;
            ids.par_iter()
                .map(|id| evaluate_one(id, args).with_context(|| format!("evaluating {id}")))
                .collect()
        });
        let records = records.into_iter().collect::<Result<Vec<_>>>()?;
        let report = MetricsReport::from_records(records, args.airlight_tol);
        report.save(&args.out)?;
        let agg = &report.aggregate;
        println!(
            "eval: {} images, mse {:.4}, psnr {} dB, ssim {:.4}{}",
            report.images.len(),
            agg.mse,
            agg.psnr_db
                .map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "inf".into()),
            agg.ssim,
            agg.airlight_accuracy
                .map(|a| format!(", airlight acc {a:.3}"))
                .unwrap_or_default()
        );
        println!("report -> {}", args.out.display());
        Ok(report)
    };
    run().inspect_err(|_| cleanup(&outputs))
}

fn evaluate_one(id: &str, args: &EvalArgs) -> Result<ImageRecord> {
    let started = Instant::now();
    let pred_path = args.pred.join(format!("{id}.ppm"));
    let pred = pnm::decode_ppm(&fs::read(&pred_path)?)?;
    let gt_path = find_gt_image(&args.gt, id).expect("checked above");
    let gt = pnm::decode_ppm(&fs::read(&gt_path)?)?;
    let mse = mse_255(&pred, &gt)?;
    let psnr_db = psnr(mse)?;
    let ssim = ssim_eval(&pred, &gt)?;
    // Airlight error when both sidecars exist: prediction metadata next to
    // the image, ground truth in the synth layout.
    let pred_b = read_airlight(&args.pred.join(format!("{id}.ppm.json")), "airlight_pred");
    let gt_b = [
        args.gt.join(format!("{id}.json")),
        args.gt.join("samples").join(format!("{id}.json")),
    ]
    .iter()
    .find_map(|p| read_airlight(p, "airlight"));
    let airlight_abs_err = match (pred_b, gt_b) {
        (Some(p), Some(g)) => Some((p - g).abs()),
        _ => None,
    };
    Ok(ImageRecord {
        id: id.to_string(),
        mse,
        psnr_db: psnr_db.is_finite().then_some(psnr_db),
        ssim,
        airlight_abs_err,
        runtime_sec: args.timing.then(|| started.elapsed().as_secs_f64()),
    })
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Seed for the randomized check inputs (varies inputs, not outcomes).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Negative-control hook: perturb one analytic gradient and expect the
    /// suite to fail.
    #[arg(long)]
    pub perturb_gradient: bool,
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<()> {
    let results = crate::verify::run_all(args.seed, args.perturb_gradient);
    let mut failed = 0;
    for check in &results {
        println!(
            "{:<44} {:>4}  {}",
            check.name,
            if check.passed { "pass" } else { "FAIL" },
            check.detail
        );
        if !check.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        bail!("{failed} of {} verification checks failed", results.len());
    }
    println!("all {} verification checks passed", results.len());
    Ok(())
}
