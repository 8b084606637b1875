use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::Matrix3x4;

use blocktrifocal::block::{build_block_tensor, camera_stack, check_block_properties};
use blocktrifocal::camera::CameraMatrix;
use blocktrifocal::config::{RawConfig, RunConfig, Source, ENV_PREFIX, KEYS};
use blocktrifocal::eval::evaluate_cameras;
use blocktrifocal::io;
use blocktrifocal::scene::{corrupt_blocks, generate_line_experiment, generate_scene};
use blocktrifocal::sync::{extract_cameras, synchronize};
use blocktrifocal::tensor::{mode_singular_values, multilinear_rank};
use blocktrifocal::{Error, Result};

const RANK_TOL: f64 = 1e-10;

#[derive(Parser)]
#[command(name = "blocktrifocal", version, about = "Block trifocal tensor toolkit")]
#[command(after_help = keys_help())]
struct Cli {
    /// key=value configuration file.
    #[arg(long, global = true, env = "BLOCKTRIFOCAL_CONFIG")]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 picks the number of cores.
    #[arg(long, global = true, default_value_t = 0, env = "BLOCKTRIFOCAL_THREADS")]
    threads: usize,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".", env = "BLOCKTRIFOCAL_OUT_DIR")]
    out_dir: PathBuf,
    /// Extra key=value override; may be repeated.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scene and a corrupted block tensor.
    Generate,
    /// Build the ground-truth block tensor from a cameras file.
    Build {
        #[arg(long)]
        cameras: PathBuf,
    },
    /// Report structural properties and the multilinear rank of a tensor.
    Check {
        #[arg(long)]
        tensor: PathBuf,
        /// Cameras used for the fundamental-matrix comparison.
        #[arg(long)]
        cameras: Option<PathBuf>,
        /// Skip the calibrated-only singular value check.
        #[arg(long)]
        uncalibrated: bool,
    },
    /// Synchronize scales and complete a partially observed tensor.
    Sync(TensorArgs),
    /// Compare recovered cameras with the ground truth.
    Eval {
        #[arg(long)]
        cameras: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
    },
    /// Read cameras directly off a fully observed, consistently scaled tensor.
    Oneshot(TensorArgs),
}

#[derive(Args)]
struct TensorArgs {
    #[arg(long)]
    tensor: PathBuf,
    /// Evaluate the recovered cameras against this cameras file.
    #[arg(long)]
    ground_truth: Option<PathBuf>,
}

fn keys_help() -> String {
    let mut s = format!("Configuration keys (env override: {ENV_PREFIX}<KEY>):\n");
    for (k, v, doc) in KEYS {
        let _ = writeln!(s, "  {k:<22} [{v}] {doc}");
    }
    s
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut raw = RawConfig::default();
    if let Some(p) = &cli.config {
        raw.apply_text(&io::read_file(p)?)?;
    }
    raw.apply_env(std::env::vars(), &["CONFIG", "THREADS", "OUT_DIR"])?;
    for o in &cli.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("--set expects key=value, got '{o}'")))?;
        raw.set(k.trim(), v)?;
    }
    if let Some(seed) = cli.seed {
        raw.set("seed", &seed.to_string())?;
    }
    raw.resolve()
}

fn require_file(p: &Path) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("no such file: {}", p.display())))
    }
}

fn load_cameras(p: &Path) -> Result<Vec<CameraMatrix>> {
    let stack = io::read_cameras(&io::read_file(p)?)?;
    (0..stack.nrows() / 3)
        .map(|i| CameraMatrix::decompose(Matrix3x4::from_fn(|r, c| stack[(3 * i + r, c)])))
        .collect()
}

fn generate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let (cameras, tensor, scales) = match cfg.source {
        Source::Exact => {
            let scene = generate_scene(&cfg.scene)?;
            let truth = build_block_tensor(&scene.cameras)?;
            let c = corrupt_blocks(&truth, &cfg.corruption)?;
            (scene.cameras, c.tensor, Some(c.lambda))
        }
        Source::Lines => {
            let exp = generate_line_experiment(&cfg.line_experiment())?;
            (exp.scene.cameras, exp.estimated, None)
        }
    };
    io::write_file(&out.join("cameras_gt.txt"), &io::write_cameras(&camera_stack(&cameras))?)?;
    io::write_file(&out.join("tensor.txt"), &io::write_block_tensor(&tensor))?;
    if let Some(l) = scales {
        io::write_file(&out.join("scales_gt.txt"), &io::write_scales(&l))?;
    }
    println!(
        "generated n={} layout={} source={:?} observed={:.3}",
        tensor.n(),
        cfg.scene.layout,
        cfg.source,
        tensor.observed_fraction()
    );
    Ok(())
}

fn check(tensor: &Path, cameras: Option<&Path>, calibrated: bool, out: &Path) -> Result<()> {
    let t = io::read_block_tensor(&io::read_file(tensor)?)?;
    let cams = cameras.map(load_cameras).transpose()?;
    let ranks = multilinear_rank(t.tensor(), RANK_TOL);
    let mut csv = String::from("check,result,detail\n");
    let _ = writeln!(csv, "multilinear_rank,{},{}", ranks == [6, 4, 4], ranks.map(|r| r.to_string()).join(" "));
    println!("multilinear rank: {ranks:?}");
    if t.mask().iter().all(|&m| m) {
        let r = check_block_properties(&t, cams.as_deref(), calibrated, 1e-9)?;
        let rows = [
            ("diagonal_zero", Some(r.diagonal_zero)),
            ("repeated_blocks_skew", Some(r.repeated_blocks_skew)),
            ("fundamental_match", r.fundamental_match),
            ("slices_skew", Some(r.slices_skew)),
            ("equal_singular_values", r.equal_singular_values),
        ];
        for (name, v) in rows {
            let shown = v.map_or("skipped".to_string(), |b| if b { "pass" } else { "FAIL" }.to_string());
            println!("{name}: {shown}");
            let _ = writeln!(csv, "{name},{},", v.map_or("skipped".into(), |b| b.to_string()));
        }
        for f in r.failures.iter().take(10) {
            println!("  {f}");
        }
        if r.failures.len() > 10 {
            println!("  ... and {} more", r.failures.len() - 10);
        }
    } else {
        println!("tensor is partially observed; structural checks skipped");
        let [s1, s2, _] = mode_singular_values(t.tensor());
        let _ = writeln!(csv, "structural,skipped,partially observed (sigma1={:e} sigma2={:e})", s1[0], s2[0]);
    }
    io::write_file(&out.join("check.csv"), &csv)
}

fn report_eval(est: &nalgebra::DMatrix<f64>, gt: &Path, out: &Path) -> Result<()> {
    let gt = load_cameras(gt)?;
    let e = evaluate_cameras(est, &gt)?;
    io::write_file(&out.join("eval.csv"), &io::write_eval_csv(&e.summary))?;
    println!(
        "meanR_deg={:.6e} medianR_deg={:.6e} meanT={:.6e} medianT={:.6e}",
        e.summary.mean_rotation_deg,
        e.summary.median_rotation_deg,
        e.summary.mean_location,
        e.summary.median_location
    );
    if e.alignment.failed {
        return Err(Error::Numerical(format!(
            "projective alignment failed (residual {:.3})",
            e.alignment.residual
        )));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Build { cameras } | Command::Eval { cameras, .. } => require_file(cameras)?,
        Command::Check { tensor, cameras, .. } => {
            require_file(tensor)?;
            cameras.as_deref().map(require_file).transpose()?;
        }
        Command::Sync(a) | Command::Oneshot(a) => {
            require_file(&a.tensor)?;
            a.ground_truth.as_deref().map(require_file).transpose()?;
        }
        Command::Generate => {}
    }
    if let Command::Eval { ground_truth, .. } = &cli.command {
        require_file(ground_truth)?;
    }
    let cfg = load_config(cli)?;
    std::fs::create_dir_all(&cli.out_dir)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let out = cli.out_dir.as_path();

    match &cli.command {
        Command::Generate => generate(&cfg, out),
        Command::Build { cameras } => {
            let t = build_block_tensor(&load_cameras(cameras)?)?;
            io::write_file(&out.join("tensor_gt.txt"), &io::write_block_tensor(&t))
        }
        Command::Check {
            tensor,
            cameras,
            uncalibrated,
        } => check(tensor, cameras.as_deref(), !uncalibrated, out),
        Command::Sync(a) => {
            let t = io::read_block_tensor(&io::read_file(&a.tensor)?)?;
            let r = synchronize(&t, &cfg.sync)?;
            io::write_file(&out.join("cameras_est.txt"), &io::write_cameras(&r.cameras)?)?;
            io::write_file(&out.join("scales_est.txt"), &io::write_scales(&r.scales))?;
            io::write_file(&out.join("diagnostics.csv"), &io::write_diagnostics_csv(&r.diagnostics))?;
            println!("stop={} iterations={}", r.stop, r.iterations);
            a.ground_truth
                .as_deref()
                .map(|gt| report_eval(&r.cameras, gt, out))
                .transpose()
                .map(|_| ())
        }
        Command::Eval {
            cameras,
            ground_truth,
        } => report_eval(&io::read_cameras(&io::read_file(cameras)?)?, ground_truth, out),
        Command::Oneshot(a) => {
            let t = io::read_block_tensor(&io::read_file(&a.tensor)?)?;
            if t.mask().iter().any(|&m| !m) {
                return Err(Error::InvalidConfig(
                    "oneshot needs a fully observed tensor; use sync".into(),
                ));
            }
            let c = extract_cameras(t.tensor())?;
            io::write_file(&out.join("cameras_est.txt"), &io::write_cameras(&c)?)?;
            a.ground_truth
                .as_deref()
                .map(|gt| report_eval(&c, gt, out))
                .transpose()
                .map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
