use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use woundmesh_cli::commands::{self, EvaluateArgs, LabelSource};
use woundmesh_cli::{CliError, PipelineConfig};

#[derive(Parser)]
#[command(name = "woundmesh", version, about = "RGB-D surface reconstruction and region measurement")]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

/// Flags override the config file, which overrides the defaults.
#[derive(Args)]
struct ConfigArgs {
    /// TOML pipeline configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Any config key, e.g. `--set meshing.grid=[20,20]`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Registration method: odometry or marker.
    #[arg(long, global = true)]
    method: Option<String>,
    /// Weight of the geometric odometry term, in [0, 1].
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    pyramid_levels: Option<usize>,
    /// Dataset frame numbers, comma separated; the first is the reference.
    #[arg(long, global = true, value_delimiter = ',')]
    frames: Option<Vec<usize>>,
    /// Meshing method: bspline or alpha.
    #[arg(long, global = true)]
    mesh_method: Option<String>,
    #[arg(long, global = true)]
    voxel_size: Option<f64>,
    #[arg(long, global = true)]
    smoothness: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Neighbours in the label vote.
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let mut sets = self.set.clone();
        let mut put = |k: &str, v: String| sets.push(format!("{k}={v}"));
        if let Some(m) = &self.method {
            put("registration.method", format!("{m:?}"));
        }
        if let Some(v) = self.lambda {
            put("registration.lambda", format!("{v:?}"));
        }
        if let Some(v) = self.pyramid_levels {
            put("registration.pyramid_levels", v.to_string());
        }
        if let Some(f) = &self.frames {
            put("registration.frames", format!("{f:?}"));
        }
        if let Some(m) = &self.mesh_method {
            put("meshing.method", format!("{m:?}"));
        }
        if let Some(v) = self.voxel_size {
            put("fusion.voxel_size_mm", format!("{v:?}"));
        }
        if let Some(v) = self.smoothness {
            put("meshing.smoothness", format!("{v:?}"));
        }
        if let Some(v) = self.alpha {
            put("meshing.alpha_mm", format!("{v:?}"));
        }
        if let Some(v) = self.k {
            put("labeling.k", v.to_string());
        }
        if let Some(v) = self.seed {
            put("synth.seed", v.to_string());
            put("evaluation.seed", v.to_string());
        }
        PipelineConfig::load(self.config.as_deref(), &sets)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Render the synthetic crater phantom into a dataset directory.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Number of frames along the sweep.
        #[arg(long = "n-frames")]
        n_frames: Option<usize>,
        /// Depth noise standard deviation in mm.
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Fuse a dataset into a cloud and mesh it.
    Reconstruct {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label a mesh from reference clouds or masked frames and measure the
    /// region.
    Measure {
        #[arg(long)]
        mesh: PathBuf,
        /// Labeled point cloud PLY in the mesh frame. Repeatable.
        #[arg(long, conflicts_with_all = ["dataset", "poses"])]
        labeled: Vec<PathBuf>,
        /// Dataset whose masks give the labels; needs --poses.
        #[arg(long, requires = "poses")]
        dataset: Option<PathBuf>,
        /// Frame poses in the mesh frame, as written by `reconstruct`.
        #[arg(long, requires = "dataset")]
        poses: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a reconstruction against a ground-truth cloud.
    Evaluate {
        /// Mesh or point cloud (PLY or OBJ).
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Poses file giving the initial alignment into the ground-truth frame.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Frame of the pose to use from --init; the first record by default.
        #[arg(long, requires = "init")]
        init_frame: Option<usize>,
        /// Crop box JSON; overrides evaluation.crop.
        #[arg(long)]
        crop: Option<PathBuf>,
        /// Metrics JSON path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct and measure several frame subsets and report the spread.
    Repeat {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = cli.config.resolve()?;
    match cli.command {
        Command::Synth { out, n_frames, sigma } => {
            if let Some(n) = n_frames {
                cfg.synth.frames = n;
            }
            if let Some(s) = sigma {
                cfg.synth.depth_noise_sigma_mm = s;
            }
            cfg.validate()?;
            commands::synth(&out, &cfg)?;
            println!("wrote {}", out.display());
        }
        Command::Reconstruct { dataset, out } => {
            commands::reconstruct(&dataset, &out, &cfg)?;
            println!("wrote {}", out.display());
        }
        Command::Measure {
            mesh,
            labeled,
            dataset,
            poses,
            out,
        } => {
            let src = match (dataset, poses) {
                (Some(dataset), Some(poses)) => LabelSource::Dataset { dataset, poses },
                _ if !labeled.is_empty() => LabelSource::Clouds(labeled),
                _ => return Err(CliError::Config("measure needs --labeled or --dataset with --poses".into())),
            };
            let r = commands::measure(&mesh, &src, &out, &cfg)?;
            println!(
                "perimeter {:.2} mm | area {:.2} mm2 | box {:.2} x {:.2} x {:.2} mm",
                r.perimeter_mm, r.surface_area_mm2, r.height_mm, r.width_mm, r.depth_mm
            );
        }
        Command::Evaluate {
            pred,
            gt,
            init,
            init_frame,
            crop,
            out,
        } => {
            let args = EvaluateArgs {
                pred: &pred,
                gt: &gt,
                init: init.as_deref().map(|p| (p, init_frame)),
                crop: crop.as_deref(),
                out: &out,
            };
            let m = commands::evaluate(&args, &cfg)?;
            println!("{}", commands::metrics_row(&m));
        }
        Command::Repeat { dataset, out } => {
            let s = commands::repeat(&dataset, &out, &cfg)?;
            println!(
                "{} runs | area mean {:.2} mm2, mean pairwise diff {:.2} mm2 ({:.2}%)",
                s.runs,
                s.surface_area_mm2.mean,
                s.surface_area_mm2.mean_pairwise_diff,
                100.0 * s.surface_area_mm2.mean_pairwise_diff / s.surface_area_mm2.mean
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
