use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use pointup::cloud::io::{load_ply, load_xyz, save_ply, save_xyz};
use pointup::cloud::PointCloud;
use pointup::config::load_layered;
use pointup::dataset::{build_dataset, load_dataset, sample_surface, save_dataset, DatasetConfig, ShapeSpec, Split};
use pointup::gradcheck;
use pointup::metrics::{error_map, evaluate, write_csv, MetricsRow};
use pointup::model::{Model, Variant};
use pointup::pipeline::{
    evaluate_entries, mean_row, noise_sweep, run_ablation, upsample_cloud, AblationRow, NOISE_LEVELS,
};
use pointup::training::{train_with, TrainConfig};

const EFFECTIVE_CONFIG: &str = "effective-config.json";

#[derive(Parser)]
#[command(
    name = "pointup",
    version,
    about = "Point cloud upsampling: data, training, inference and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON or key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configuration's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// `key=value` override; dotted keys reach nested fields. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Train on the training split of a dataset.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Upsample a whole point cloud with a trained checkpoint.
    Upsample {
        #[command(flatten)]
        common: Common,
        /// Sparse input cloud (.xyz or .ply).
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        /// Expected upsampling rate; must match the checkpoint.
        #[arg(long)]
        r: Option<usize>,
        /// Dense reference cloud for the error map.
        #[arg(long, conflicts_with = "surface")]
        target: Option<PathBuf>,
        /// JSON surface description; a reference is sampled from it.
        #[arg(long)]
        surface: Option<PathBuf>,
    },
    /// Score a checkpoint on the test split of a dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
    },
    /// Finite-difference check of every primitive and the full model loss.
    Gradcheck {
        #[command(flatten)]
        common: Common,
    },
    /// Train and score the ablation variants under one budget.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Score a checkpoint across input noise levels.
    NoiseSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
    },
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct UpsampleConfig {
    /// Patch seeds; defaults to `ceil(3M / N)`.
    num_seeds: Option<usize>,
    /// Seed for sampling a reference from `--surface`.
    seed: u64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct EvalConfig {
    /// Gaussian input noise level.
    noise: f64,
    seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct NoiseSweepConfig {
    levels: Vec<f64>,
    seed: u64,
}

impl Default for NoiseSweepConfig {
    fn default() -> Self {
        Self {
            levels: NOISE_LEVELS.to_vec(),
            seed: 0,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct GradcheckConfig {
    cases_per_primitive: usize,
    seed: u64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            cases_per_primitive: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct AblateConfig {
    train: TrainConfig,
    /// Seeds `seed, seed + 1, ...`; table rows average over them.
    seeds: usize,
    variants: Vec<Variant>,
    seed: u64,
}

impl Default for AblateConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            seeds: 1,
            variants: Variant::ALL.to_vec(),
            seed: 0,
        }
    }
}

/// Loads the layered config, applies `--seed`, creates the output directory
/// and echoes the result there.
fn setup<T>(common: &Common) -> Result<T>
where
    T: Default + Serialize + DeserializeOwned,
{
    let mut overrides = common.overrides.clone();
    if let Some(seed) = common.seed {
        overrides.push(format!("seed={seed}"));
    }
    let cfg: T = load_layered(common.config.as_deref(), &overrides)?;
    fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    fs::write(common.out.join(EFFECTIVE_CONFIG), serde_json::to_string_pretty(&cfg)?)?;
    Ok(cfg)
}

fn load_cloud(path: &Path) -> Result<PointCloud> {
    let cloud = match path.extension().and_then(|e| e.to_str()) {
        Some("ply") => load_ply(path),
        _ => load_xyz(path),
    };
    cloud.with_context(|| format!("reading {}", path.display()))
}

fn load_model(path: &Path) -> Result<Model> {
    Model::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { common } => {
            let cfg: DatasetConfig = setup(&common)?;
            let ds = build_dataset(&cfg)?;
            save_dataset(&ds, &common.out)?;
            println!(
                "wrote {} train and {} test pairs to {}",
                ds.split(Split::Train).count(),
                ds.split(Split::Test).count(),
                common.out.display()
            );
        }
        Command::Train { common, data } => {
            let cfg: TrainConfig = setup(&common)?;
            let ds = load_dataset(&data)?;
            if (ds.config.n, ds.config.r) != (cfg.model.n, cfg.model.r) {
                bail!(
                    "dataset has n = {}, r = {} but the model expects n = {}, r = {}; set model.n and model.r to match",
                    ds.config.n,
                    ds.config.r,
                    cfg.model.n,
                    cfg.model.r
                );
            }
            let pairs = ds.pairs(Split::Train);
            let out = train_with(&pairs, &cfg, Some(&common.out), |e| {
                if e.epoch % 10 == 0 || e.epoch + 1 == cfg.epochs {
                    println!(
                        "epoch {:4}  loss {:.6}  coarse {:.6}  refined {:.6}  lambda {:.3}  lr {:.2e}",
                        e.epoch, e.loss_total, e.loss_coarse, e.loss_refined, e.lambda, e.lr
                    );
                }
            })?;
            println!("{} iterations, checkpoint in {}", out.log.len(), common.out.display());
        }
        Command::Upsample {
            common,
            input,
            ckpt,
            r,
            target,
            surface,
        } => {
            let cfg: UpsampleConfig = setup(&common)?;
            let model = load_model(&ckpt)?;
            if let Some(r) = r {
                if r != model.config.r {
                    bail!("--r {r} does not match the checkpoint's rate {}", model.config.r);
                }
            }
            let cloud = load_cloud(&input)?;
            let dense = upsample_cloud(&model, &cloud, cfg.num_seeds)?;
            let out_path = common.out.join("upsampled.xyz");
            save_xyz(&dense, &out_path)?;
            println!(
                "{} -> {} points, wrote {}",
                cloud.len(),
                dense.len(),
                out_path.display()
            );

            let geometry = surface
                .map(|p| -> Result<ShapeSpec> { Ok(serde_json::from_str(&fs::read_to_string(&p)?)?) })
                .transpose()?;
            let reference = match (&target, &geometry) {
                (Some(path), _) => Some(load_cloud(path)?),
                (None, Some(geometry)) => Some(sample_surface(geometry, dense.len(), cfg.seed)?),
                (None, None) => None,
            };
            if let Some(reference) = reference {
                let errors = error_map(reference.points(), dense.points())?;
                let map = PointCloud::new(reference.points().to_vec())?.with_attr("error", errors)?;
                let ply = common.out.join("error_map.ply");
                save_ply(&map, &ply)?;
                let report = evaluate(&dense, &reference, geometry.as_ref())?;
                let (cd, hd, p2f, _) = report.scaled();
                print!("CD {cd:.4}e-3  HD {hd:.4}e-3");
                if let Some(p) = p2f {
                    print!("  P2F {p:.4}e-3");
                }
                println!(", error map in {}", ply.display());
            }
        }
        Command::Eval { common, data, ckpt } => {
            let cfg: EvalConfig = setup(&common)?;
            let model = load_model(&ckpt)?;
            let ds = load_dataset(&data)?;
            let test: Vec<_> = ds.split(Split::Test).collect();
            let mut rows = evaluate_entries(&model, &test, cfg.noise, cfg.seed)?;
            let mean = mean_row("mean", &rows)?;
            print_row(&mean);
            rows.push(mean);
            write_csv(&common.out.join("metrics.csv"), &rows)?;
        }
        Command::Gradcheck { common } => {
            let cfg: GradcheckConfig = setup(&common)?;
            let mut results = gradcheck::check_primitives(cfg.cases_per_primitive, cfg.seed)?;
            results.extend(gradcheck::check_composite(&gradcheck::composite_config(), cfg.seed)?);
            let mut failed = 0;
            for r in &results {
                let status = if r.passed() { "ok" } else { "FAIL" };
                failed += usize::from(!r.passed());
                println!("{status:4} {:<48} {:.3e}", r.name, r.error);
            }
            #[derive(Serialize)]
            struct Row<'a> {
                name: &'a str,
                max_rel_error: f64,
                cases: usize,
                passed: bool,
            }
            let rows: Vec<_> = results
                .iter()
                .map(|r| Row {
                    name: &r.name,
                    max_rel_error: r.error,
                    cases: r.cases,
                    passed: r.passed(),
                })
                .collect();
            write_csv(&common.out.join("gradcheck.csv"), &rows)?;
            if failed > 0 {
                bail!(
                    "{failed} of {} gradient checks exceed {:e}",
                    results.len(),
                    gradcheck::TOLERANCE
                );
            }
        }
        Command::Ablate { common, data } => {
            let cfg: AblateConfig = setup(&common)?;
            let ds = load_dataset(&data)?;
            let pairs = ds.pairs(Split::Train);
            let test: Vec<_> = ds.split(Split::Test).collect();
            let mut per_seed: Vec<AblationRow> = Vec::new();
            for s in 0..cfg.seeds as u64 {
                let rows = run_ablation(&pairs, &test, &cfg.train, &cfg.variants, cfg.seed + s)?;
                per_seed.extend(rows.into_iter().map(|(row, _)| row));
            }
            #[derive(Serialize)]
            struct TableRow {
                model: String,
                cd_e3: f64,
                hd_e3: f64,
                p2f_mean_e3: Option<f64>,
                seeds: usize,
            }
            let table: Vec<TableRow> = cfg
                .variants
                .iter()
                .map(|v| {
                    let rows: Vec<_> = per_seed.iter().filter(|r| r.model == v.label()).collect();
                    let n = rows.len() as f64;
                    TableRow {
                        model: v.label().to_string(),
                        cd_e3: rows.iter().map(|r| r.cd_e3).sum::<f64>() / n,
                        hd_e3: rows.iter().map(|r| r.hd_e3).sum::<f64>() / n,
                        p2f_mean_e3: rows.iter().map(|r| r.p2f_mean_e3).sum::<Option<f64>>().map(|s| s / n),
                        seeds: rows.len(),
                    }
                })
                .collect();
            for row in &table {
                println!("{:<5} CD {:.4}e-3  HD {:.4}e-3", row.model, row.cd_e3, row.hd_e3);
            }
            write_csv(&common.out.join("ablation.csv"), &table)?;
            write_csv(&common.out.join("ablation_per_seed.csv"), &per_seed)?;
        }
        Command::NoiseSweep { common, data, ckpt } => {
            let cfg: NoiseSweepConfig = setup(&common)?;
            let model = load_model(&ckpt)?;
            let ds = load_dataset(&data)?;
            let test: Vec<_> = ds.split(Split::Test).collect();
            let rows = noise_sweep(&model, &test, &cfg.levels, cfg.seed)?;
            for row in &rows {
                println!(
                    "noise {:<6} CD {:.4}e-3  HD {:.4}e-3",
                    row.noise_level, row.cd_e3, row.hd_e3
                );
            }
            write_csv(&common.out.join("noise_sweep.csv"), &rows)?;
        }
    }
    Ok(())
}

fn print_row(row: &MetricsRow) {
    print!("{}: CD {:.4}e-3  HD {:.4}e-3", row.name, row.cd_e3, row.hd_e3);
    if let (Some(m), Some(s)) = (row.p2f_mean_e3, row.p2f_std_e3) {
        print!("  P2F {m:.4}e-3 (std {s:.4}e-3)");
    }
    println!();
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
