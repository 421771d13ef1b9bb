//! `salfuse`: saliency detection pipeline and benchmark harness.

mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use salfuse_core::fusion::{load_model, poly_lr, save_model, train, Arch, TrainConfig};
use salfuse_core::pipeline::{build_training_set, run_pipeline, PipelineConfig, FUSION_SIZE};
use salfuse_core::superpixel::{save_labels_png, slic, write_stats_json};
use salfuse_core::{
    evaluate_dataset, fuse_forward, load_image, mssf_refine, rbd_map, rgb_to_lab, DatasetManifest,
    EvalReport, Provenance, RbdParams, SaliencyMap, ScaleSet,
};

#[derive(Parser)]
#[command(
    name = "salfuse",
    version,
    about = "Salient object detection: boundary-connectivity saliency, learned map fusion, \
             multi-scale superpixel refinement, and MAE/PR benchmarking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RbdFlags {
    /// Superpixel count for the saliency segmentation.
    #[arg(long)]
    n_seg: Option<usize>,
    /// SLIC compactness.
    #[arg(long)]
    compactness: Option<f64>,
    /// SLIC iterations.
    #[arg(long)]
    iters: Option<usize>,
    /// Color bandwidth (CIELAB units).
    #[arg(long)]
    sigma_clr: Option<f64>,
    /// Boundary-connectivity bandwidth.
    #[arg(long)]
    sigma_bnd: Option<f64>,
    /// Spatial bandwidth (diagonal-normalized).
    #[arg(long)]
    sigma_spa: Option<f64>,
    /// Smoothness weight floor.
    #[arg(long)]
    smooth_mu: Option<f64>,
}

impl RbdFlags {
    fn apply(&self, params: &mut RbdParams) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { params.$field = v; })*
            };
        }
        set!(n_seg, compactness, iters, sigma_clr, sigma_bnd, sigma_spa, smooth_mu);
    }
}

#[derive(Subcommand)]
enum Command {
    /// Over-segment an image; writes a 16-bit label PNG and a JSON sidecar
    /// with per-superpixel statistics.
    Slic {
        /// Input image (PNG or JPEG).
        #[arg(short, long)]
        input: PathBuf,
        /// Output label map (PNG); the sidecar lands next to it as .json.
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 200)]
        n_seg: usize,
        #[arg(long, default_value_t = 10.0)]
        compactness: f64,
        #[arg(long, default_value_t = 10)]
        iters: usize,
    },
    /// Boundary-connectivity saliency map for one image.
    Rbd {
        #[arg(short, long)]
        input: PathBuf,
        /// Output saliency PNG.
        #[arg(short, long)]
        output: PathBuf,
        /// key=value config file applied before individual flags.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        flags: RbdFlags,
    },
    /// Train the fusion network from a manifest whose entries carry deep maps.
    FuseTrain {
        #[arg(short, long)]
        manifest: PathBuf,
        /// Output model file.
        #[arg(long)]
        model_out: PathBuf,
        /// Loss trace CSV; defaults to the model path with a .csv extension.
        #[arg(long)]
        loss_csv: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        k1: usize,
        #[arg(long, default_value_t = 8)]
        hidden: usize,
        #[arg(long, default_value_t = 3)]
        k2: usize,
        #[arg(long, default_value_t = 1e-4)]
        base_lr: f64,
        #[arg(long, default_value_t = 0.9)]
        momentum: f64,
        /// Poly decay exponent.
        #[arg(long, default_value_t = 0.9)]
        power: f64,
        #[arg(long, default_value_t = 1000)]
        max_iter: usize,
        #[arg(long, default_value_t = 8)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// key=value config file for the unsupervised-saliency stage.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Worker threads for assembling the training set.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Fuse a deep map and an unsupervised map with a trained model.
    FuseInfer {
        #[arg(long)]
        model: PathBuf,
        /// Deep saliency map (grayscale PNG).
        #[arg(long)]
        deep: PathBuf,
        /// Unsupervised saliency map (grayscale PNG).
        #[arg(long)]
        rbd: PathBuf,
        /// Output fused PNG at the fusion working resolution.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Multi-scale superpixel median refinement of a map against its image.
    Mssf {
        #[arg(long)]
        image: PathBuf,
        /// Map to refine (grayscale PNG).
        #[arg(long)]
        map: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Comma-separated superpixel counts.
        #[arg(long, default_value = "100,200,300,400")]
        scales: String,
        /// Comma-separated per-scale weights; defaults to equal weights.
        #[arg(long)]
        weights: Option<String>,
    },
    /// Evaluate a directory of maps (named <id>.png) against a manifest.
    Eval {
        #[arg(short, long)]
        manifest: PathBuf,
        /// Directory holding the maps to score.
        #[arg(long)]
        maps: PathBuf,
        /// Method label recorded in the report.
        #[arg(long, default_value = "method")]
        method: String,
        /// Write the report as JSON here.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write the PR curve as CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Full pipeline over a manifest: saliency, optional fusion with provided
    /// deep maps, refinement, and per-stage reports.
    Run {
        #[arg(short, long)]
        manifest: PathBuf,
        #[arg(short, long)]
        out_dir: PathBuf,
        /// Trained fusion model; omit for a saliency-only run.
        #[arg(long)]
        model: Option<PathBuf>,
        /// key=value config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Worker threads.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        flags: RbdFlags,
    },
    /// Render a report's PR curve as an SVG line chart.
    Plot {
        /// Report JSON produced by `eval` or `run`.
        #[arg(short, long)]
        report: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

/// Process exit classification: 1 usage, 2 data, 3 quality gate.
enum Failure {
    Usage(String),
    Data(String),
    Gate(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Gate(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Gate(m) => m,
        }
    }
}

impl From<salfuse_core::Error> for Failure {
    fn from(e: salfuse_core::Error) -> Self {
        use salfuse_core::Error::*;
        match e {
            InvalidConfig { .. } | InvalidScaleSet { .. } => Failure::Usage(e.to_string()),
            other => Failure::Data(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if ok { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, Failure> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = path {
        cfg.apply_file(path)?;
    }
    Ok(cfg)
}

fn parse_scale_set(scales: &str, weights: Option<&str>) -> Result<ScaleSet, Failure> {
    let parse_usize = |s: &str| -> Result<Vec<usize>, Failure> {
        s.split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| Failure::Usage(format!("invalid scales list: '{s}'")))
    };
    let parse_f64 = |s: &str| -> Result<Vec<f64>, Failure> {
        s.split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| Failure::Usage(format!("invalid weights list: '{s}'")))
    };
    let set = match weights {
        Some(w) => ScaleSet::new(parse_usize(scales)?, parse_f64(w)?)?,
        None => ScaleSet::uniform(parse_usize(scales)?)?,
    };
    Ok(set)
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Slic {
            input,
            output,
            n_seg,
            compactness,
            iters,
        } => {
            let image = load_image(&input)?;
            let lab = rgb_to_lab(&image.to_srgb3()?)?;
            let seg = slic(&lab, n_seg, compactness, iters)?;
            save_labels_png(&seg, &output)?;
            let sidecar = output.with_extension("json");
            write_stats_json(&seg, &sidecar)?;
            println!(
                "{} superpixels -> {} (+ {})",
                seg.num_superpixels(),
                output.display(),
                sidecar.display()
            );
            Ok(())
        }
        Command::Rbd {
            input,
            output,
            config,
            flags,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            flags.apply(&mut cfg.rbd);
            let image = load_image(&input)?;
            let map = rbd_map(&image, &cfg.rbd)?;
            map.save_png(&output)?;
            println!("saliency map -> {}", output.display());
            Ok(())
        }
        Command::FuseTrain {
            manifest,
            model_out,
            loss_csv,
            k1,
            hidden,
            k2,
            base_lr,
            momentum,
            power,
            max_iter,
            batch,
            seed,
            config,
            jobs,
        } => {
            let cfg = load_config(config.as_deref())?;
            let manifest = DatasetManifest::load(&manifest)?;
            let dataset = build_training_set(&manifest, &cfg.rbd, jobs)?;
            let arch = Arch { k1, hidden, k2 };
            let train_cfg = TrainConfig {
                base_lr,
                momentum,
                power,
                max_iter,
                batch,
                seed,
            };
            let outcome = train(&dataset, arch, &train_cfg)?;
            save_model(&outcome.params, &model_out)?;

            let csv_path = loss_csv.unwrap_or_else(|| model_out.with_extension("csv"));
            let mut csv = String::from("iteration,lr,loss\n");
            for (t, loss) in outcome.loss_trace.iter().enumerate() {
                csv.push_str(&format!("{t},{},{loss}\n", poly_lr(&train_cfg, t)));
            }
            std::fs::write(&csv_path, csv)
                .map_err(|e| Failure::Data(format!("cannot write '{}': {e}", csv_path.display())))?;
            println!(
                "trained {} samples for {} iterations; final loss {:.6}",
                dataset.len(),
                max_iter,
                outcome.loss_trace.last().unwrap_or(&f64::NAN)
            );
            println!("model -> {}", model_out.display());
            println!("loss trace -> {}", csv_path.display());
            Ok(())
        }
        Command::FuseInfer {
            model,
            deep,
            rbd,
            output,
        } => {
            let params = load_model(&model)?;
            let deep =
                SaliencyMap::load_png(&deep, Provenance::Deep)?.resized(FUSION_SIZE, FUSION_SIZE)?;
            let rbd =
                SaliencyMap::load_png(&rbd, Provenance::Rbd)?.resized(FUSION_SIZE, FUSION_SIZE)?;
            let fused = fuse_forward(&params, &deep, &rbd)?;
            fused.save_png(&output)?;
            println!("fused map -> {}", output.display());
            Ok(())
        }
        Command::Mssf {
            image,
            map,
            output,
            scales,
            weights,
        } => {
            let scales = parse_scale_set(&scales, weights.as_deref())?;
            let image = load_image(&image)?;
            let map = SaliencyMap::load_png(&map, Provenance::Fused)?;
            let refined = mssf_refine(&map, &image, &scales)?;
            refined.save_png(&output)?;
            println!("refined map -> {}", output.display());
            Ok(())
        }
        Command::Eval {
            manifest,
            maps,
            method,
            json,
            csv,
        } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let report = evaluate_dataset(&manifest, &maps, &method)?;
            print_report_line(&report);
            if let Some(path) = json {
                report.write_json(&path)?;
                println!("report -> {}", path.display());
            }
            if let Some(path) = csv {
                report.write_pr_csv(&path)?;
                println!("pr curve -> {}", path.display());
            }
            Ok(())
        }
        Command::Run {
            manifest,
            out_dir,
            model,
            config,
            jobs,
            seed,
            flags,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            flags.apply(&mut cfg.rbd);
            if let Some(jobs) = jobs {
                cfg.jobs = Some(jobs);
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let manifest = DatasetManifest::load(&manifest)?;
            let params = model.as_deref().map(load_model).transpose()?;
            let outcome = run_pipeline(&manifest, params.as_ref(), &cfg, &out_dir)?;

            print_report_line(&outcome.rbd);
            for report in [&outcome.ds, &outcome.dsm].into_iter().flatten() {
                print_report_line(report);
            }
            for failure in &outcome.failures {
                eprintln!("skipped '{}': {}", failure.id, failure.reason);
            }
            if outcome.quality_gate_failed {
                return Err(Failure::Gate(format!(
                    "{} of {} entries failed (tolerance {:.0}%)",
                    outcome.failures.len(),
                    outcome.total_entries,
                    cfg.skip_tolerance * 100.0
                )));
            }
            Ok(())
        }
        Command::Plot { report, output } => {
            let report = EvalReport::load_json(&report)?;
            let svg = plot::pr_curve_svg(&report);
            std::fs::write(&output, svg)
                .map_err(|e| Failure::Data(format!("cannot write '{}': {e}", output.display())))?;
            println!("pr curve chart -> {}", output.display());
            Ok(())
        }
    }
}

fn print_report_line(report: &EvalReport) {
    println!(
        "{}: mean MAE {:.4} over {} images ({} skipped)",
        report.method, report.mean_mae, report.evaluated, report.skipped
    );
}
