//! The `dualcam` command-line tool.
//!
//! Exit codes: 0 on success, 1 when processing fails, 2 for bad arguments
//! or missing inputs. Every command prints a one-line JSON summary.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgAction, Args, Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;
use serde_json::json;

use crate::config::CliConfig;
use crate::denoise::merge_burst_detailed;
use crate::error::Error;
use crate::flow::{estimate_flow, read_flo, write_flo, FlowField};
use crate::fusion::{burst_flows, deblur_long, restore_detailed, FusionMode, RestoreConfig};
use crate::imaging::{load_image, save_image, write_tensor, BitDepth, ImageBuffer};
use crate::metrics::{evaluate_dirs, evaluate_pair};
use crate::synth::{synthesize_triplet, triplet_seed};
use crate::trajectory::{build_trajectories, DeconvMethod};

pub const THREADS_ENV: &str = "DUALCAM_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "dualcam",
    version,
    about = "Dual-camera capture synthesis and joint deblurring/denoising"
)]
pub struct Cli {
    /// Worker threads (0 = one per core). Falls back to DUALCAM_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log progress to stderr (-vv for more).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize (burst, long, gt) triplets from ordered frames.
    Synth(SynthArgs),
    /// Full restoration: deblur, denoise and fuse.
    Restore(RestoreArgs),
    /// Dense optical flow between two images, written as .flo.
    Flow(FlowArgs),
    /// Deblur the long exposure along burst-derived trajectories.
    Deblur(DeblurArgs),
    /// Align and merge a burst.
    Denoise(DenoiseArgs),
    /// PSNR/SSIM of a prediction against ground truth (files or directories).
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    input_dir: PathBuf,
    #[arg(long)]
    output_dir: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// PNG bit depth of the outputs (8 or 16).
    #[arg(long, default_value_t = 16)]
    depth: u32,
}

#[derive(Debug, Args)]
struct RestoreArgs {
    #[arg(long)]
    long: PathBuf,
    #[arg(long)]
    burst_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Precomputed flows `flow_<i>.flo` (skips flow estimation).
    #[arg(long)]
    flow_dir: Option<PathBuf>,
    /// Also write deblurred.png, denoised.png, weights.dckt and flows next
    /// to the output.
    #[arg(long)]
    dump_intermediates: bool,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    kernel: Option<usize>,
    #[arg(long, value_parser = parse_fusion_mode)]
    fusion: Option<FusionMode>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = 16)]
    depth: u32,
}

#[derive(Debug, Args)]
struct FlowArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
}

#[derive(Debug, Args)]
struct DeblurArgs {
    #[arg(long)]
    long: PathBuf,
    /// Burst used to estimate the trajectories.
    #[arg(long, required_unless_present = "flow_dir")]
    burst_dir: Option<PathBuf>,
    #[arg(long)]
    flow_dir: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, value_parser = parse_method)]
    method: Option<DeconvMethod>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    kernel: Option<usize>,
    #[arg(long, default_value_t = 16)]
    depth: u32,
}

#[derive(Debug, Args)]
struct DenoiseArgs {
    #[arg(long)]
    burst_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    flow_dir: Option<PathBuf>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    patch: Option<usize>,
    /// Write the merge weights as a DCKT tensor.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    depth: u32,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Also write the report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_fusion_mode(s: &str) -> Result<FusionMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_method(s: &str) -> Result<DeconvMethod, String> {
    match s {
        "landweber" => Ok(DeconvMethod::Landweber),
        "richardson_lucy" | "rl" => Ok(DeconvMethod::RichardsonLucy),
        other => Err(format!(
            "unknown method '{other}' (expected landweber or richardson_lucy)"
        )),
    }
}

/// Why a command stopped.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CmdResult = std::result::Result<serde_json::Value, Failure>;

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_env("RUST_LOG")
        .format_timestamp(None)
        .try_init();

    let outcome = thread_count(cli.threads).and_then(|threads| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Failure::Runtime(format!("cannot start worker pool: {e}")))?;
        pool.install(|| dispatch(&cli))
    });
    match outcome {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(f) => {
            let msg = match &f {
                Failure::Usage(m) | Failure::Runtime(m) => m,
            };
            eprintln!("error: {msg}");
            f.code()
        }
    }
}

fn thread_count(flag: Option<usize>) -> std::result::Result<usize, Failure> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v.trim().parse().map_err(|_| {
            usage(format!(
                "{THREADS_ENV} must be a non-negative integer, got '{v}'"
            ))
        }),
        _ => Ok(0),
    }
}

fn dispatch(cli: &Cli) -> CmdResult {
    let config = CliConfig::load_or_default(cli.config.as_deref()).map_err(usage)?;
    let start = Instant::now();
    let mut summary = match &cli.command {
        Command::Synth(a) => cmd_synth(a, config),
        Command::Restore(a) => cmd_restore(a, config),
        Command::Flow(a) => cmd_flow(a, config),
        Command::Deblur(a) => cmd_deblur(a, config),
        Command::Denoise(a) => cmd_denoise(a, config),
        Command::Eval(a) => return cmd_eval(a),
    }?;
    summary["elapsed_ms"] = json!(start.elapsed().as_millis() as u64);
    Ok(summary)
}

fn depth(bits: u32) -> std::result::Result<BitDepth, Failure> {
    BitDepth::from_bits(bits).ok_or_else(|| usage(format!("--depth must be 8 or 16, got {bits}")))
}

fn require_file(path: &Path, what: &str) -> std::result::Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{what} not found: {}", path.display())))
    }
}

fn load_input(path: &Path, what: &str) -> std::result::Result<ImageBuffer, Failure> {
    require_file(path, what)?;
    Ok(load_image(path, None)?)
}

fn save(img: &ImageBuffer, path: &Path, depth: BitDepth) -> std::result::Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(save_image(img, path, depth)?)
}

/// `burst_0.png … burst_{N−1}.png` in `dir` (indices may be zero-padded),
/// which must be contiguous and odd in number.
fn find_burst(dir: &Path) -> std::result::Result<Vec<PathBuf>, Failure> {
    if !dir.is_dir() {
        return Err(usage(format!(
            "burst directory not found: {}",
            dir.display()
        )));
    }
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = BTreeMap::new();
    for path in entries.filter_map(|e| e.ok()).map(|e| e.path()) {
        let index = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("burst_"))
            .and_then(|s| s.strip_suffix(".png"))
            .and_then(|s| s.parse::<usize>().ok());
        if let Some(i) = index {
            if let Some(other) = found.insert(i, path.clone()) {
                return Err(usage(format!(
                    "burst frame {i} is ambiguous: {} and {}",
                    other.display(),
                    path.display()
                )));
            }
        }
    }
    let count = found
        .keys()
        .next_back()
        .map(|m| m + 1)
        .ok_or_else(|| usage(format!("no burst_<i>.png files in {}", dir.display())))?;
    if let Some(i) = (0..count).find(|i| !found.contains_key(i)) {
        return Err(usage(format!(
            "missing burst frame: {}",
            dir.join(format!("burst_{i}.png")).display()
        )));
    }
    if count % 2 == 0 {
        return Err(usage(format!(
            "burst needs an odd number of frames, found {count}; missing burst frame: {}",
            dir.join(format!("burst_{count}.png")).display()
        )));
    }
    Ok(found.into_values().collect())
}

fn load_burst(dir: &Path) -> std::result::Result<Vec<ImageBuffer>, Failure> {
    find_burst(dir)?
        .par_iter()
        .map(|p| load_image(p, None).map_err(Failure::from))
        .collect()
}

fn load_flows(dir: &Path, count: usize) -> std::result::Result<Vec<FlowField>, Failure> {
    if !dir.is_dir() {
        return Err(usage(format!(
            "flow directory not found: {}",
            dir.display()
        )));
    }
    (0..count)
        .map(|i| {
            let p = dir.join(format!("flow_{i}.flo"));
            require_file(&p, "flow file")?;
            Ok(read_flo(&p)?)
        })
        .collect()
}

fn list_pngs(dir: &Path) -> std::result::Result<Vec<PathBuf>, Failure> {
    if !dir.is_dir() {
        return Err(usage(format!(
            "input directory not found: {}",
            dir.display()
        )));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .is_some_and(|x| x.to_string_lossy().eq_ignore_ascii_case("png"))
        })
        .collect();
    files.sort_by_key(|p| p.file_name().map(|n| n.to_os_string()));
    Ok(files)
}

fn cmd_synth(a: &SynthArgs, config: CliConfig) -> CmdResult {
    let mut cfg = config.synth;
    if let Some(n) = a.n {
        cfg.n = n;
    }
    if let Some(r) = a.ratio {
        cfg.ratio = r;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(usage)?;
    let depth = depth(a.depth)?;
    let frames = list_pngs(&a.input_dir)?;
    let group = cfg.sequence_len();
    if frames.is_empty() || frames.len() % group != 0 {
        return Err(usage(format!(
            "found {} frames in {}; burst size {} needs groups of {group}",
            frames.len(),
            a.input_dir.display(),
            cfg.n
        )));
    }
    let created_root = !a.output_dir.exists();
    std::fs::create_dir_all(&a.output_dir).map_err(|e| Error::io(&a.output_dir, e))?;
    let groups: Vec<&[PathBuf]> = frames.chunks(group).collect();
    let dirs: Vec<PathBuf> = (0..groups.len())
        .map(|j| a.output_dir.join(format!("triplet_{j:04}")))
        .collect();

    let result: std::result::Result<Vec<()>, Failure> = groups
        .par_iter()
        .zip(&dirs)
        .enumerate()
        .map(|(j, (paths, dir))| {
            let imgs = paths
                .iter()
                .map(|p| load_image(p, None))
                .collect::<crate::Result<Vec<_>>>()?;
            let mut tcfg = cfg.clone();
            tcfg.seed = triplet_seed(cfg.seed, j as u64);
            let mut tri = synthesize_triplet(&imgs, &tcfg)?;
            tri.meta.source_frames = paths
                .iter()
                .map(|p| {
                    p.file_name()
                        .unwrap_or_default()
                        .to_string_lossy()
                        .into_owned()
                })
                .collect();
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            save(&tri.long, &dir.join("long.png"), depth)?;
            save(&tri.gt, &dir.join("gt.png"), depth)?;
            for (i, b) in tri.burst.iter().enumerate() {
                save(b, &dir.join(format!("burst_{i}.png")), depth)?;
            }
            let meta = serde_json::to_string_pretty(&tri.meta).map_err(Error::from)?;
            let meta_path = dir.join("meta.json");
            std::fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))?;
            info!("wrote {}", dir.display());
            Ok(())
        })
        .collect();

    if let Err(f) = result {
        for d in &dirs {
            let _ = std::fs::remove_dir_all(d);
        }
        if created_root {
            let _ = std::fs::remove_dir(&a.output_dir);
        }
        return Err(f);
    }
    Ok(json!({
        "command": "synth",
        "frames": frames.len(),
        "triplets": groups.len(),
        "n": cfg.n,
        "seed": cfg.seed,
    }))
}

fn restore_config(
    config: &CliConfig,
    iters: Option<usize>,
    kernel: Option<usize>,
) -> std::result::Result<RestoreConfig, Failure> {
    let mut rc = config.restore_config();
    if let Some(i) = iters {
        rc.deconv.max_iters = i;
    }
    if let Some(k) = kernel {
        rc.kernel = k;
    }
    Ok(rc)
}

fn cmd_restore(a: &RestoreArgs, config: CliConfig) -> CmdResult {
    let depth = depth(a.depth)?;
    let mut rc = restore_config(&config, a.iters, a.kernel)?;
    if let Some(m) = a.fusion {
        rc.fusion.mode = m;
    }
    if let Some(t) = a.tau {
        rc.merge.tau = t;
    }
    rc.validate().map_err(usage)?;
    let burst_paths = find_burst(&a.burst_dir)?;
    let flows = match &a.flow_dir {
        Some(d) => Some(load_flows(d, burst_paths.len())?),
        None => None,
    };
    let long = load_input(&a.long, "long exposure")?;
    let burst = load_burst(&a.burst_dir)?;
    let out = restore_detailed(&long, &burst, flows, &rc)?;
    save(&out.image, &a.out, depth)?;
    if a.dump_intermediates {
        let dir = a.out.parent().unwrap_or(Path::new("."));
        save(&out.deblurred, &dir.join("deblurred.png"), depth)?;
        save(&out.denoised, &dir.join("denoised.png"), depth)?;
        write_tensor(&out.weights.to_tensor(), dir.join("weights.dckt"))?;
        write_tensor(&out.trajectory.to_tensor(), dir.join("trajectory.dckt"))?;
        for (i, f) in out.flows.iter().enumerate() {
            write_flo(f, dir.join(format!("flow_{i}.flo")))?;
        }
    }
    Ok(json!({
        "command": "restore",
        "frames": burst.len(),
        "width": long.width(),
        "height": long.height(),
        "deconv_iterations": out.residuals.len().saturating_sub(1),
        "mean_flow": out.flows.iter().map(|f| f.mean_magnitude()).collect::<Vec<_>>(),
    }))
}

fn cmd_flow(a: &FlowArgs, config: CliConfig) -> CmdResult {
    let mut cfg = config.flow;
    if let Some(v) = a.levels {
        cfg.levels = v;
    }
    if let Some(v) = a.window {
        cfg.window = v;
    }
    if let Some(v) = a.iters {
        cfg.iters_per_level = v;
    }
    cfg.validate().map_err(usage)?;
    let r = load_input(&a.reference, "reference image")?;
    let t = load_input(&a.tgt, "target image")?;
    if !r.same_shape(&t) {
        return Err(usage(format!(
            "reference is {}x{}, target is {}x{}",
            r.width(),
            r.height(),
            t.width(),
            t.height()
        )));
    }
    let flow = estimate_flow(&r, &t, &cfg)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    write_flo(&flow, &a.out)?;
    Ok(json!({
        "command": "flow",
        "width": flow.width(),
        "height": flow.height(),
        "mean_magnitude": flow.mean_magnitude(),
    }))
}

fn cmd_deblur(a: &DeblurArgs, config: CliConfig) -> CmdResult {
    let depth = depth(a.depth)?;
    let mut rc = config.restore_config();
    rc.deconv = config.deconv.clone().unwrap_or_default();
    if let Some(i) = a.iters {
        rc.deconv.max_iters = i;
    }
    if let Some(m) = a.method {
        rc.deconv.method = m;
    }
    if a.step.is_some() {
        rc.deconv.step = a.step;
    }
    if let Some(k) = a.kernel {
        rc.kernel = k;
    }
    rc.validate().map_err(usage)?;
    let long = load_input(&a.long, "long exposure")?;
    let flows = match (&a.flow_dir, &a.burst_dir) {
        (Some(fd), _) => {
            let count = match &a.burst_dir {
                Some(b) => find_burst(b)?.len(),
                None => count_flows(fd)?,
            };
            load_flows(fd, count)?
        }
        (None, Some(b)) => burst_flows(&load_burst(b)?, &rc.flow)?,
        (None, None) => return Err(usage("either --burst-dir or --flow-dir is required")),
    };
    if flows.iter().any(|f| !f.matches(&long)) {
        return Err(usage("flows do not match the long exposure size"));
    }
    let traj = build_trajectories(&flows, rc.kernel)?;
    let (img, residuals) = deblur_long(&long, &traj, &rc)?;
    for (i, r) in residuals.iter().enumerate() {
        info!("iteration {i}: residual {r:.9e}");
    }
    let monotone = residuals.windows(2).all(|w| w[1] <= w[0]);
    if !monotone {
        warn!("data fit increased during deconvolution");
    }
    save(&img, &a.out, depth)?;
    Ok(json!({
        "command": "deblur",
        "iterations": residuals.len().saturating_sub(1),
        "residual_initial": residuals.first(),
        "residual_final": residuals.last(),
        "monotone": monotone,
    }))
}

/// Number of contiguous `flow_<i>.flo` files starting at 0.
fn count_flows(dir: &Path) -> std::result::Result<usize, Failure> {
    let n = (0..)
        .take_while(|i| dir.join(format!("flow_{i}.flo")).is_file())
        .count();
    if n == 0 || n % 2 == 0 {
        return Err(usage(format!(
            "{} must hold an odd number of flow_<i>.flo files, found {n}",
            dir.display()
        )));
    }
    Ok(n)
}

fn cmd_denoise(a: &DenoiseArgs, config: CliConfig) -> CmdResult {
    let depth = depth(a.depth)?;
    let mut mc = config.merge.clone();
    if let Some(t) = a.tau {
        mc.tau = t;
    }
    if let Some(p) = a.patch {
        mc.patch = p;
    }
    mc.validate().map_err(usage)?;
    config.flow.validate().map_err(usage)?;
    let count = find_burst(&a.burst_dir)?.len();
    let flows = match &a.flow_dir {
        Some(d) => Some(load_flows(d, count)?),
        None => None,
    };
    let burst = load_burst(&a.burst_dir)?;
    let flows = match flows {
        Some(f) => f,
        None => burst_flows(&burst, &config.flow)?,
    };
    let merged = merge_burst_detailed(&burst, &flows, &mc)?;
    save(&merged.image, &a.out, depth)?;
    if let Some(w) = &a.weights {
        write_tensor(&merged.weights.to_tensor(), w)?;
    }
    Ok(json!({
        "command": "denoise",
        "frames": burst.len(),
        "max_weight_sum_error": merged.weights.max_sum_error(),
    }))
}

fn cmd_eval(a: &EvalArgs) -> CmdResult {
    let report = if a.pred.is_dir() && a.gt.is_dir() {
        serde_json::to_value(evaluate_dirs(&a.pred, &a.gt)?).map_err(Error::from)?
    } else {
        require_file(&a.pred, "prediction")?;
        require_file(&a.gt, "ground truth")?;
        serde_json::to_value(evaluate_pair(&a.pred, &a.gt)?).map_err(Error::from)?
    };
    if let Some(out) = &a.out {
        std::fs::write(out, format!("{report}\n")).map_err(|e| Error::io(out, e))?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_subcommands() {
        for args in [
            vec![
                "dualcam",
                "synth",
                "--input-dir",
                "a",
                "--output-dir",
                "b",
                "--n",
                "5",
            ],
            vec![
                "dualcam",
                "restore",
                "--long",
                "l.png",
                "--burst-dir",
                "b",
                "--out",
                "o.png",
                "--dump-intermediates",
            ],
            vec![
                "dualcam", "flow", "--ref", "r.png", "--tgt", "t.png", "--out", "f.flo",
            ],
            vec![
                "dualcam",
                "deblur",
                "--long",
                "l.png",
                "--burst-dir",
                "b",
                "--iters",
                "50",
                "--out",
                "d.png",
            ],
            vec![
                "dualcam",
                "denoise",
                "--burst-dir",
                "b",
                "--out",
                "d.png",
                "--threads",
                "2",
            ],
            vec!["dualcam", "eval", "--pred", "a.png", "--gt", "b.png"],
        ] {
            Cli::try_parse_from(&args).unwrap_or_else(|e| panic!("{args:?}: {e}"));
        }
    }

    #[test]
    fn bad_arguments_exit_with_usage_code() {
        assert_eq!(run(["dualcam", "frobnicate"]), 2);
        assert_eq!(run(["dualcam", "eval", "--pred", "x.png"]), 2);
        assert_eq!(
            run([
                "dualcam",
                "restore",
                "--long",
                "l.png",
                "--burst-dir",
                "b",
                "--out",
                "o.png",
                "--fusion",
                "median"
            ]),
            2
        );
        assert_eq!(
            run(["dualcam", "deblur", "--long", "l.png", "--out", "d.png"]),
            2
        );
    }

    #[test]
    fn missing_inputs_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nope.png");
        let p = p.to_str().unwrap();
        assert_eq!(run(["dualcam", "eval", "--pred", p, "--gt", p]), 2);
        let d = dir.path().to_str().unwrap();
        assert!(matches!(find_burst(dir.path()), Err(Failure::Usage(_))));
        assert_eq!(run(["dualcam", "denoise", "--burst-dir", d, "--out", p]), 2);
    }

    #[test]
    fn burst_discovery_names_missing_frame() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageBuffer::filled(4, 4, 3, crate::imaging::ColorSpace::Srgb, 0.5);
        for i in [0, 1, 3, 4] {
            save_image(
                &img,
                dir.path().join(format!("burst_{i}.png")),
                BitDepth::Eight,
            )
            .unwrap();
        }
        match find_burst(dir.path()) {
            Err(Failure::Usage(m)) => assert!(m.contains("burst_2.png"), "{m}"),
            other => panic!("{other:?}"),
        }
        save_image(&img, dir.path().join("burst_2.png"), BitDepth::Eight).unwrap();
        assert_eq!(find_burst(dir.path()).unwrap().len(), 5);
        std::fs::rename(
            dir.path().join("burst_3.png"),
            dir.path().join("burst_03.png"),
        )
        .unwrap();
        assert_eq!(
            find_burst(dir.path()).unwrap()[3],
            dir.path().join("burst_03.png")
        );
        std::fs::remove_file(dir.path().join("burst_4.png")).unwrap();
        match find_burst(dir.path()) {
            Err(Failure::Usage(m)) => assert!(m.contains("burst_4.png"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn thread_flag_wins_over_environment() {
        assert_eq!(thread_count(Some(3)).unwrap(), 3);
    }
}
