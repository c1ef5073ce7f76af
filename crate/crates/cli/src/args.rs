use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use moco_core::{CgConfig, Split};

#[derive(Debug, Parser)]
#[command(
    name = "moco",
    version,
    about = "Simulate multishot MRI motion artifacts and reconstruct with CG SENSE",
    long_about = "Simulate multishot MRI motion artifacts and reconstruct with CG SENSE.\n\n\
                  Numeric results are printed as JSON on stdout; progress goes to stderr."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a Shepp-Logan phantom.
    Phantom(PhantomArgs),
    /// Generate SOS-normalized Gaussian coil sensitivity maps.
    Maps(MapsArgs),
    /// Motion-corrupt one image into combined multicoil k-space.
    Corrupt(CorruptArgs),
    /// Reconstruct saved k-space with CG SENSE.
    Reconstruct(ReconstructArgs),
    /// Generate corrupted/target training pairs and a manifest.
    Dataset(DatasetArgs),
    /// PSNR and SSIM between two images or across a manifest split.
    Metrics(MetricsArgs),
    /// Time CG SENSE reconstructions per image.
    Bench(BenchArgs),
}

/// `HxW` or `N` for a square grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Size {
    pub height: usize,
    pub width: usize,
}

impl std::str::FromStr for Size {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| format!("invalid size {s:?}; expected HxW or N"))
        };
        match s.split_once(['x', 'X']) {
            Some((h, w)) => Ok(Size {
                height: parse(h)?,
                width: parse(w)?,
            }),
            None => {
                let n = parse(s)?;
                Ok(Size {
                    height: n,
                    width: n,
                })
            }
        }
    }
}

fn parse_degree(s: &str) -> Result<f64, String> {
    let d: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("invalid degree {s:?}"))?;
    if !d.is_finite() || d.abs() >= 90.0 {
        return Err(format!("degree must be finite with |degree| < 90, got {s}"));
    }
    Ok(d)
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Args)]
pub struct CoilArgs {
    /// Number of receive coils.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
    pub coils: u32,
    /// Gaussian width as a fraction of the smaller image side.
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Maximum CG iterations.
    #[arg(long, default_value_t = 20)]
    pub iters: usize,
    /// Relative residual stopping tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Tikhonov regularization weight.
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
}

impl SolverArgs {
    pub fn config(&self) -> CgConfig {
        CgConfig {
            max_iters: self.iters,
            tol: self.tol,
            lambda: self.lambda,
        }
    }
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long, default_value = "128")]
    pub size: Size,
    /// Render a randomized variant instead of the canonical table.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a PNG next to the tensor.
    #[arg(long)]
    pub png: bool,
}

#[derive(Debug, Args)]
pub struct MapsArgs {
    #[arg(long, default_value = "128")]
    pub size: Size,
    #[command(flatten)]
    pub coil: CoilArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write one magnitude PNG per coil.
    #[arg(long)]
    pub png: bool,
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    /// Real image tensor or grayscale PNG.
    #[arg(long)]
    pub input: PathBuf,
    /// Precomputed maps; generated from --coils/--sigma/--seed otherwise.
    #[arg(long)]
    pub maps: Option<PathBuf>,
    #[command(flatten)]
    pub coil: CoilArgs,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
    pub shots: u32,
    /// Rotation of every shot after the first, in degrees.
    #[arg(long, default_value_t = 0.0, value_parser = parse_degree, allow_negative_numbers = true)]
    pub degree: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Combined coil k-space written by `corrupt`.
    #[arg(long)]
    pub kspace: PathBuf,
    #[arg(long)]
    pub maps: Option<PathBuf>,
    /// Width of generated maps when --maps is not given.
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
    pub shots: u32,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Keep the complex reconstruction instead of its magnitude.
    #[arg(long)]
    pub complex: bool,
    #[arg(long)]
    pub png: bool,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Directory of grayscale PNG sources; phantoms are used otherwise.
    #[arg(long)]
    pub inputs: Option<PathBuf>,
    /// Number of phantoms when --inputs is not given.
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, default_value = "128")]
    pub size: Size,
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_degree, allow_negative_numbers = true)]
    pub degrees: Vec<f64>,
    #[command(flatten)]
    pub coil: CoilArgs,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
    pub shots: u32,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write input/target PNGs.
    #[arg(long)]
    pub png: bool,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["reference", "manifest"]))]
pub struct MetricsArgs {
    /// Reference image tensor.
    #[arg(long = "ref", requires = "test")]
    pub reference: Option<PathBuf>,
    /// Image tensor to score.
    #[arg(long, requires = "reference")]
    pub test: Option<PathBuf>,
    /// Score every pair of a manifest split, per degree.
    #[arg(long, conflicts_with_all = ["reference", "test"])]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value = "128")]
    pub size: Size,
    /// Number of phantom images to reconstruct.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    pub count: u32,
    #[command(flatten)]
    pub coil: CoilArgs,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
    pub shots: u32,
    #[arg(long, default_value_t = 10.0, value_parser = parse_degree, allow_negative_numbers = true)]
    pub degree: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}
