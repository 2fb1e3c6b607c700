//! Command-line surface: evaluate losses and metrics, check gradients,
//! optimize maps directly, train the micro net, and run the benchmark.
//!
//! Exit codes: 0 success, 1 check failure, 2 usage error, 3 I/O or
//! format error, 4 numeric divergence.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use saliency_core::combo::{center_bias_from_maps, preset, EvalResources, LossCombination};
use saliency_core::error::Error;
use saliency_core::io::{load_fixations, load_map, save_salmap, save_weights};
use saliency_core::loss::perceptual::FeatureExtractor;
use saliency_core::map::{FixationSet, SaliencyMap};
use saliency_core::metrics::{evaluate_all, MetricConfig, MetricReport};
use saliency_core::optim::micro::{train_micro, MicroNet, TrainSample};
use saliency_core::optim::{gradcheck, optimize_map, OptimizeConfig, Projection};

#[derive(Parser)]
#[command(name = "saliency", version, about = "Saliency loss and metric toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a loss combination on a (ground truth, prediction) pair.
    Loss {
        /// Preset name or path to a combination spec file.
        spec: String,
        #[command(flatten)]
        pair: PairArgs,
        /// Also print gradient summary statistics.
        #[arg(long)]
        grad: bool,
    },
    /// Compare the analytic gradient against central finite differences.
    Gradcheck {
        spec: String,
        #[command(flatten)]
        pair: PairArgs,
        /// Finite-difference step.
        #[arg(long, default_value_t = 1e-5)]
        h: f64,
        /// Maximum allowed relative error; exit 1 beyond it.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Gradient-descend a free map under a loss combination.
    Optimize {
        spec: String,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        fix: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        /// CSV destination for the per-iteration loss curve.
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        /// Projection applied after each step: clamp | distribution | none.
        #[arg(long, default_value = "clamp")]
        projection: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Apply 5x5 Gaussian smoothing (sigma 1) to the saved map.
        #[arg(long)]
        smooth: bool,
    },
    /// Train the micro conv net on a dataset directory.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        spec: String,
        /// Destination for the flat weight vector (SALWTS1 container).
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 0.1)]
        step: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Print the seven-metric CSV row for one triple.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        fix: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Benchmark presets over a dataset by direct-map optimization.
    Bench {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated preset names.
        #[arg(long)]
        presets: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        /// Write the CSV here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write one row per (preset, image) to this CSV.
        #[arg(long)]
        per_image: Option<PathBuf>,
    },
    /// Average the dataset's ground-truth maps into a center-bias map.
    CenterBias {
        #[arg(long)]
        data: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct PairArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    fix: Option<PathBuf>,
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Format(_) => 3,
        Error::Diverged { .. } => 4,
        Error::UnknownPreset(_) | Error::ParseSpec(_) | Error::BadParameter(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

/// Loads a preset by name, or parses a spec file if the argument names
/// an existing path.
fn load_spec(arg: &str) -> Result<LossCombination<f64>, Error> {
    let path = Path::new(arg);
    if path.exists() {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        LossCombination::parse_spec(&text)
    } else {
        preset(arg)
    }
}

struct DatasetEntry {
    id: String,
    gt: SaliencyMap<f64>,
    fix: FixationSet,
    stimulus: Option<SaliencyMap<f64>>,
}

/// Reads `<dir>/maps/<id>.*` + `<dir>/fix/<id>.csv` (+ optional
/// `<dir>/stimuli/<id>.*`), sorted by id.
fn load_dataset(dir: &Path) -> Result<Vec<DatasetEntry>, Error> {
    let maps_dir = dir.join("maps");
    let mut ids: Vec<(String, PathBuf)> = fs::read_dir(&maps_dir)
        .map_err(|e| Error::Io(format!("{}: {e}", maps_dir.display())))?
        .filter_map(|entry| {
            let path = entry.ok()?.path();
            let id = path.file_stem()?.to_str()?.to_string();
            Some((id, path))
        })
        .collect();
    ids.sort();
    if ids.is_empty() {
        return Err(Error::Io(format!("{}: no maps found", maps_dir.display())));
    }

    let find_with_stem = |sub: &str, id: &str| -> Option<PathBuf> {
        let d = dir.join(sub);
        fs::read_dir(d).ok()?.filter_map(|e| e.ok()).find_map(|e| {
            let p = e.path();
            (p.file_stem()?.to_str()? == id).then_some(p)
        })
    };

    let mut entries = Vec::with_capacity(ids.len());
    for (id, map_path) in ids {
        let gt = load_map(&map_path)?;
        let fix_path = dir.join("fix").join(format!("{id}.csv"));
        let fix = load_fixations(&fix_path, gt.width(), gt.height())?;
        let stimulus = match find_with_stem("stimuli", &id) {
            Some(p) => Some(load_map(&p)?),
            None => None,
        };
        entries.push(DatasetEntry {
            id,
            gt,
            fix,
            stimulus,
        });
    }
    Ok(entries)
}

fn parse_projection(s: &str) -> Result<Projection, Error> {
    match s {
        "clamp" => Ok(Projection::ClampUnit),
        "distribution" => Ok(Projection::Distribution),
        "none" => Ok(Projection::None),
        other => Err(Error::BadParameter(format!("unknown projection `{other}`"))),
    }
}

/// 5x5 Gaussian blur, sigma 1, zero-padded borders.
fn gaussian_smooth(map: &SaliencyMap<f64>) -> SaliencyMap<f64> {
    let kernel1d: [f64; 5] = {
        let raw = [-2.0f64, -1.0, 0.0, 1.0, 2.0].map(|d: f64| (-d * d / 2.0).exp());
        let sum: f64 = raw.iter().sum();
        raw.map(|v| v / sum)
    };
    let (w, h) = map.dims();
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (ky, wy) in kernel1d.iter().enumerate() {
                for (kx, wx) in kernel1d.iter().enumerate() {
                    let yy = y as isize + ky as isize - 2;
                    let xx = x as isize + kx as isize - 2;
                    if yy >= 0 && yy < h as isize && xx >= 0 && xx < w as isize {
                        acc += wy * wx * map.get(xx as usize, yy as usize);
                    }
                }
            }
            out[y * w + x] = acc;
        }
    }
    SaliencyMap::new(w, h, out).expect("smoothing preserves validity")
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn curve_csv(trace: &[f64]) -> String {
    let mut s = String::from("iteration,loss\n");
    for (i, v) in trace.iter().enumerate() {
        s.push_str(&format!("{i},{v}\n"));
    }
    s
}

fn report_row(id: &str, r: &MetricReport<f64>) -> String {
    let mut row = String::from(id);
    for v in r.values() {
        row.push_str(&format!(",{},{}", v.value, v.status.flag()));
    }
    row.push('\n');
    row
}

fn report_header() -> String {
    let mut s = String::from("id");
    for col in MetricReport::<f64>::COLUMNS {
        s.push_str(&format!(",{col},{col}_flag"));
    }
    s.push('\n');
    s
}

fn load_fix_for(pred: &SaliencyMap<f64>, path: &Path) -> Result<FixationSet, Error> {
    load_fixations(path, pred.width(), pred.height())
}

/// Shared evaluation resources for presets that need them: a fixed-seed
/// feature extractor and (for bench/train) the dataset center bias.
fn default_extractor() -> FeatureExtractor<f64> {
    FeatureExtractor::default_seeded(0x5EED)
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Loss { spec, pair, grad } => {
            let spec = load_spec(&spec)?;
            let gt = load_map(&pair.gt)?;
            let pred = load_map(&pair.pred)?;
            let fix = pair
                .fix
                .as_deref()
                .map(|p| load_fix_for(&pred, p))
                .transpose()?;
            let extractor = default_extractor();
            let bias = SaliencyMap::zeros(pred.width(), pred.height());
            let resources = EvalResources {
                extractor: Some(&extractor),
                center_bias: Some(&bias),
            };
            let r = spec.evaluate(&gt, &pred, fix.as_ref(), &resources)?;
            println!("{}", r.value);
            if grad {
                let n = r.gradient.len() as f64;
                let mean = r.gradient.iter().sum::<f64>() / n;
                let linf = r.gradient.iter().fold(0.0f64, |a, g| a.max(g.abs()));
                let l2 = r.gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
                println!("grad_mean {mean}");
                println!("grad_linf {linf}");
                println!("grad_l2 {l2}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Gradcheck { spec, pair, h, tol } => {
            let spec = load_spec(&spec)?;
            let gt = load_map(&pair.gt)?;
            let pred = load_map(&pair.pred)?;
            let fix = pair
                .fix
                .as_deref()
                .map(|p| load_fix_for(&pred, p))
                .transpose()?;
            let extractor = default_extractor();
            let bias = SaliencyMap::zeros(pred.width(), pred.height());
            let resources = EvalResources {
                extractor: Some(&extractor),
                center_bias: Some(&bias),
            };
            let report = gradcheck(&spec, &gt, &pred, fix.as_ref(), &resources, h)?;
            println!("max_rel_err {}", report.max_rel_err);
            println!("skipped {}", report.skipped);
            if report.max_rel_err > tol {
                println!("FAIL (tol {tol})");
                Ok(ExitCode::from(1))
            } else {
                println!("PASS (tol {tol})");
                Ok(ExitCode::SUCCESS)
            }
        }
        Command::Optimize {
            spec,
            gt,
            fix,
            output,
            curve,
            step,
            iters,
            projection,
            seed,
            smooth,
        } => {
            let spec = load_spec(&spec)?;
            let gt = load_map(&gt)?;
            let fix = fix.as_deref().map(|p| load_fix_for(&gt, p)).transpose()?;
            let extractor = default_extractor();
            let bias = SaliencyMap::zeros(gt.width(), gt.height());
            let resources = EvalResources {
                extractor: Some(&extractor),
                center_bias: Some(&bias),
            };
            let cfg = OptimizeConfig {
                step,
                max_iters: iters,
                projection: parse_projection(&projection)?,
                tol: 1e-12,
                seed,
            };
            let (opt, trace) = optimize_map(&spec, &gt, fix.as_ref(), &cfg, &resources)?;
            let final_map = if smooth { gaussian_smooth(&opt) } else { opt };
            save_salmap(&output, &final_map)?;
            if let Some(curve_path) = curve {
                write_text(&curve_path, &curve_csv(&trace))?;
            }
            println!("final_loss {}", trace.last().unwrap());
            println!("iterations {}", trace.len() - 1);
            Ok(ExitCode::SUCCESS)
        }
        Command::Train {
            data,
            spec,
            output,
            curve,
            epochs,
            step,
            seed,
        } => {
            let spec = load_spec(&spec)?;
            let entries = load_dataset(&data)?;
            let bias = center_bias_from_maps(
                &entries.iter().map(|e| e.gt.clone()).collect::<Vec<_>>(),
            )?;
            let extractor = default_extractor();
            let resources = EvalResources {
                extractor: Some(&extractor),
                center_bias: Some(&bias),
            };
            let samples: Vec<TrainSample<f64>> = entries
                .iter()
                .map(|e| TrainSample {
                    input: e.stimulus.clone().unwrap_or_else(|| e.gt.clone()),
                    gt: e.gt.clone(),
                    fix: e.fix.clone(),
                })
                .collect();
            let net = MicroNet::<f64>::seeded(seed);
            let (trained, loss_curve) =
                train_micro(net, &samples, &spec, epochs, step, &resources)?;
            save_weights(&output, &trained.params())?;
            if let Some(curve_path) = curve {
                write_text(&curve_path, &curve_csv(&loss_curve))?;
            }
            if let Some(last) = loss_curve.last() {
                println!("final_loss {last}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval {
            gt,
            pred,
            fix,
            seed,
        } => {
            let gt = load_map(&gt)?;
            let pred = load_map(&pred)?;
            let fix = load_fix_for(&pred, &fix)?;
            let config = MetricConfig {
                borji_seed: seed,
                ..MetricConfig::default()
            };
            let r = evaluate_all(&gt, &pred, &fix, &config);
            print!("{}", report_header());
            print!("{}", report_row("input", &r));
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench {
            data,
            presets,
            seed,
            iters,
            step,
            output,
            per_image,
        } => {
            let entries = load_dataset(&data)?;
            let preset_names: Vec<&str> =
                presets.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
            if preset_names.is_empty() {
                return Err(Error::BadParameter("no presets given".into()));
            }
            let bias = center_bias_from_maps(
                &entries.iter().map(|e| e.gt.clone()).collect::<Vec<_>>(),
            )?;
            let extractor = default_extractor();

            let mut csv = String::from("preset,cc,sim,auc_judd,auc_borji,nss,emd,kl\n");
            let mut per_image_csv = report_header();
            for name in preset_names {
                let spec = load_spec(name)?;
                let reports: Vec<MetricReport<f64>> = entries
                    .par_iter()
                    .map(|entry| {
                        let resources = EvalResources {
                            extractor: Some(&extractor),
                            center_bias: Some(&bias),
                        };
                        let cfg = OptimizeConfig {
                            step,
                            max_iters: iters,
                            projection: Projection::ClampUnit,
                            tol: 1e-12,
                            seed,
                        };
                        let fix =
                            (!entry.fix.is_empty()).then_some(&entry.fix);
                        let (opt, _) = optimize_map(&spec, &entry.gt, fix, &cfg, &resources)?;
                        let config = MetricConfig {
                            borji_seed: seed,
                            ..MetricConfig::default()
                        };
                        Ok(evaluate_all(&entry.gt, &opt, &entry.fix, &config))
                    })
                    .collect::<Result<_, Error>>()?;

                // rows come out in id order because entries are sorted
                for (entry, r) in entries.iter().zip(&reports) {
                    per_image_csv.push_str(&report_row(
                        &format!("{name}/{}", entry.id),
                        r,
                    ));
                }

                // mean over the images where the metric was computable
                csv.push_str(name);
                for col in 0..7 {
                    let vals: Vec<f64> = reports
                        .iter()
                        .map(|r| r.values()[col])
                        .filter(|v| v.is_ok())
                        .map(|v| v.value)
                        .collect();
                    if vals.is_empty() {
                        csv.push_str(",nan");
                    } else {
                        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                        csv.push_str(&format!(",{mean}"));
                    }
                }
                csv.push('\n');
            }
            if let Some(path) = per_image {
                write_text(&path, &per_image_csv)?;
            }
            match output {
                Some(path) => write_text(&path, &csv)?,
                None => print!("{csv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::CenterBias { data, output } => {
            let entries = load_dataset(&data)?;
            let bias = center_bias_from_maps(
                &entries.iter().map(|e| e.gt.clone()).collect::<Vec<_>>(),
            )?;
            save_salmap(&output, &bias)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
