use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use image::{DynamicImage, ImageBuffer, Pixel};
use serde::Serialize;
use warpcrop::{
    compute_importance, distortion_curve, retarget_with_importance, save_map, CurvePoint, RetargetPlan,
    StageTimings,
};

mod settings;

use settings::{Resolved, Settings};

/// Retarget an image to a new aspect ratio by warping what the distortion
/// budget allows and cropping the rest.
///
/// Every option can also come from a `RETARGET_<NAME>` environment variable
/// (e.g. RETARGET_DT) or from the JSON file given by --config, keyed by flag
/// name. The command line wins over the environment, which wins over the file.
#[derive(Parser, Debug)]
#[command(name = "retarget", version)]
struct Cli {
    /// Source image.
    #[arg(long)]
    input: Option<PathBuf>,

    /// Where to write the retargeted image; the format follows the extension.
    #[arg(long)]
    output: Option<PathBuf>,

    /// Target width in pixels.
    #[arg(long, conflicts_with = "factor")]
    width: Option<u32>,

    /// Target width as a fraction of the source width.
    #[arg(long)]
    factor: Option<f64>,

    /// Target height in pixels (defaults to the source height).
    #[arg(long)]
    height: Option<u32>,

    /// Distortion threshold.
    #[arg(long)]
    dt: Option<f64>,

    /// Baseline importance added to every cell.
    #[arg(long)]
    omega0: Option<f64>,

    /// Mesh resolution as COLSxROWS.
    #[arg(long, value_name = "CxR")]
    grid: Option<String>,

    /// Precomputed importance map (8-bit grayscale).
    #[arg(long)]
    importance: Option<PathBuf>,

    /// Segmentation mask; non-zero pixels are objects.
    #[arg(long)]
    mask: Option<PathBuf>,

    /// Minimum mask coverage for the mask to be used as importance.
    #[arg(long)]
    coverage_threshold: Option<f64>,

    /// Scale uniformly instead of failing when an expansion exceeds the budget.
    #[arg(long)]
    allow_scale_fallback: bool,

    /// Write the solved mesh as JSON.
    #[arg(long)]
    dump_mesh: Option<PathBuf>,

    /// Write the importance map as a grayscale PNG.
    #[arg(long)]
    dump_importance: Option<PathBuf>,

    /// Include N samples of the distortion curve in the report.
    #[arg(long, value_name = "N")]
    curve: Option<usize>,

    /// JSON settings file.
    #[arg(long, env = "RETARGET_CONFIG")]
    config: Option<PathBuf>,
}

impl Cli {
    fn into_settings(self) -> (Settings, Option<PathBuf>) {
        let settings = Settings {
            input: self.input,
            output: self.output,
            width: self.width,
            factor: self.factor,
            height: self.height,
            dt: self.dt,
            omega0: self.omega0,
            grid: self.grid,
            importance: self.importance,
            mask: self.mask,
            coverage_threshold: self.coverage_threshold,
            allow_scale_fallback: self.allow_scale_fallback.then_some(true),
            dump_mesh: self.dump_mesh,
            dump_importance: self.dump_importance,
            curve: self.curve,
        };
        (settings, self.config)
    }
}

/// Printed to stdout as JSON on success.
#[derive(Serialize)]
struct Report {
    output: PathBuf,
    plan: RetargetPlan,
    timings: StageTimings,
    #[serde(skip_serializing_if = "Option::is_none")]
    curve: Option<Vec<CurvePoint>>,
}

enum Failure {
    Usage(String),
    Engine(warpcrop::Error),
}

impl From<warpcrop::Error> for Failure {
    fn from(e: warpcrop::Error) -> Self {
        Failure::Engine(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Engine(e) if e.is_input_error() => 2,
            Failure::Engine(e) if e.is_budget_error() => 3,
            Failure::Engine(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(msg) => f.write_str(msg),
            Failure::Engine(e) => write!(f, "{e}"),
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|source| {
        Failure::Engine(warpcrop::Error::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

fn run_typed<P>(source: &ImageBuffer<P, Vec<u8>>, job: &Resolved) -> Result<Report, Failure>
where
    P: Pixel<Subpixel = u8>,
    DynamicImage: From<ImageBuffer<P, Vec<u8>>>,
{
    let t = std::time::Instant::now();
    let (importance, coverage) = compute_importance::<P, f64>(source, &job.config)?;
    let importance_ms = t.elapsed().as_secs_f64() * 1e3;
    if let Some(c) = coverage {
        log::info!("segmentation covers {:.1}% of the image", c * 100.0);
    }
    if let Some(path) = &job.dump_importance {
        save_map(&importance, path)?;
    }

    let mut result = retarget_with_importance(source, &importance, &job.config)?;
    result.timings.importance_ms = importance_ms;

    if let Some(path) = &job.dump_mesh {
        let json = serde_json::to_vec_pretty(&result.mesh).expect("mesh dump serialises");
        write_file(path, &json)?;
    }
    let curve = job
        .curve
        .map(|n| distortion_curve(&importance, &job.config, n))
        .transpose()?;

    DynamicImage::from(result.image).save(&job.output).map_err(warpcrop::Error::from)?;

    let plan = result.plan;
    if plan.scale_fallback() {
        log::warn!("expansion exceeded the distortion budget; the remainder was scaled uniformly");
    }
    log::info!(
        "{}x{} -> {}x{}: warp {:.1} px wide (D = {:.3}), crop {}+{} columns",
        plan.source_width,
        plan.source_height,
        plan.target_width,
        plan.target_height,
        plan.horizontal.intermediate_len,
        plan.horizontal.distortion,
        plan.horizontal.crop_left,
        plan.horizontal.crop_right,
    );
    Ok(Report {
        output: job.output.clone(),
        plan,
        timings: result.timings,
        curve,
    })
}

fn run(cli: Cli) -> Result<Report, Failure> {
    let (from_cli, config_path) = cli.into_settings();
    let from_env = Settings::from_env(|k| std::env::var(k).ok()).map_err(Failure::Usage)?;
    let from_file = match config_path {
        Some(path) => Settings::from_file(&path).map_err(Failure::Usage)?,
        None => Settings::default(),
    };
    let job = from_cli.over(from_env).over(from_file).resolve().map_err(Failure::Usage)?;

    let source = image::open(&job.input).map_err(warpcrop::Error::from)?;
    match source {
        DynamicImage::ImageLuma8(img) => run_typed(&img, &job),
        DynamicImage::ImageLumaA8(_) => run_typed(&source.to_luma_alpha8(), &job),
        img if img.color().has_alpha() => run_typed(&img.to_rgba8(), &job),
        img => run_typed(&img.to_rgb8(), &job),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
            ExitCode::SUCCESS
        }
        Err(failure) => {
            eprintln!("retarget: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
