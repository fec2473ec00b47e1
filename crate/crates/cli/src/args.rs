use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use facehall::degrade::Psf;
use facehall::Dims;

#[derive(Debug, Parser)]
#[command(name = "facehall", version, about = "Identity-preserving face hallucination")]
pub struct Cli {
    /// Worker threads for batch commands (0 = all cores).
    #[arg(long, global = true, env = "FACEHALL_JOBS", default_value_t = 0)]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a paired HR/LR dictionary from a directory of aligned faces.
    BuildDict(BuildDictArgs),
    /// Blur, decimate and add noise to an image.
    Degrade(DegradeArgs),
    /// Super-resolve one low-resolution face.
    Hallucinate(HallucinateArgs),
    /// PSNR/SSIM table over reference/candidate image pairs.
    Evaluate(EvaluateArgs),
    /// Sparse-representation recognition over a directory of probes.
    Recognize(RecognizeArgs),
    /// Build a pose-aligned dictionary from meshes and landmarks.
    AlignDict(AlignDictArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PsfArgs {
    /// Blur kernel: delta, avg:K or gauss:K:SIGMA.
    #[arg(long, default_value = "avg:4", conflicts_with = "psf_file")]
    pub psf: Psf,

    /// Kernel weights as text, one row per line (normalized on load).
    #[arg(long)]
    pub psf_file: Option<PathBuf>,

    /// Integer down-sampling factor.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
    pub scale: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChannelArg {
    Gray,
    R,
    G,
    B,
}

#[derive(Debug, Args)]
pub struct BuildDictArgs {
    #[arg(long)]
    pub hr_dir: PathBuf,
    /// `filename<TAB>subject_id` per line.
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub psf: PsfArgs,
    /// Plane of color training images to use.
    #[arg(long, value_enum, default_value_t = ChannelArg::Gray)]
    pub channel: ChannelArg,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DegradeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub psf: PsfArgs,
    /// Standard deviation of the additive Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1e-8)]
    pub mu: f64,
    #[arg(long, default_value_t = 2700.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u32).range(1..))]
    pub iters: u32,
    /// Relative-decrease stopping tolerance of the l1 solver.
    #[arg(long, default_value_t = 1e-6)]
    pub l1_tol: f64,
    #[arg(long, default_value_t = 2000)]
    pub l1_max_iters: usize,
}

#[derive(Debug, Args)]
pub struct HallucinateArgs {
    /// Dictionary file; give three (R, G, B) to use one per channel.
    #[arg(long, required = true, num_args = 1)]
    pub dict: Vec<PathBuf>,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Binary LR mask image; pixels below 128 are ignored.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Compute report metrics on the unclipped estimate (the saved image is
    /// always 8-bit).
    #[arg(long)]
    pub no_clip: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// `reference<TAB>candidate` per line, relative to the list's directory.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ResidualArg {
    Hr,
    Lr,
}

#[derive(Debug, Args)]
pub struct RecognizeArgs {
    #[arg(long)]
    pub dict: PathBuf,
    /// Probe images, LR or HR (HR probes are degraded with the dictionary's
    /// model first).
    #[arg(long)]
    pub in_dir: PathBuf,
    /// `filename<TAB>subject_id` ground truth for the probes.
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Space in which class residuals are measured.
    #[arg(long, value_enum, default_value_t = ResidualArg::Hr)]
    pub residual: ResidualArg,
    /// Largest rank of the cumulative match curve (default: min(10, classes)).
    #[arg(long)]
    pub max_rank: Option<usize>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AlignDictArgs {
    /// Directory of `.obj` meshes, one per training sample.
    #[arg(long)]
    pub meshes: PathBuf,
    /// Directory holding `<mesh stem>.lmk` landmark files.
    #[arg(long)]
    pub landmarks: PathBuf,
    /// Reference landmarks.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Landmarks of the target face.
    #[arg(long)]
    pub y_landmarks: PathBuf,
    #[arg(long, default_value_t = 100.0)]
    pub theta: f64,
    /// HR render size as HEIGHTxWIDTH.
    #[arg(long, value_parser = parse_dims)]
    pub size: Dims,
    #[command(flatten)]
    pub psf: PsfArgs,
    /// `mesh filename<TAB>subject_id`; without it every mesh is its own subject.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

pub fn parse_dims(s: &str) -> Result<Dims, String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HEIGHTxWIDTH, got {s:?}"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height in {s:?}"))?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
    if h == 0 || w == 0 {
        return Err(format!("empty size {s:?}"));
    }
    Ok(Dims::new(h, w))
}
