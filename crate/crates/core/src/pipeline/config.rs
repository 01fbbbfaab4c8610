use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::distortion::DistortionParams;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::warp::WarpParams;

/// Where the importance map comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceSource {
    /// Built-in spectral-residual saliency.
    #[default]
    Fallback,
    /// A precomputed importance raster (8-bit grayscale).
    External(PathBuf),
    /// A segmentation mask, with a saliency raster (or the built-in detector)
    /// used when the mask covers too little of the image.
    Combined {
        mask: PathBuf,
        #[serde(default)]
        saliency: Option<PathBuf>,
    },
}

impl ImportanceSource {
    pub fn generator(&self) -> &'static str {
        match self {
            ImportanceSource::Fallback => "fallback",
            ImportanceSource::External(_) => "external",
            ImportanceSource::Combined { .. } => "combined",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetargetConfig {
    /// Output width in pixels. Mutually exclusive with `factor`.
    pub target_width: Option<u32>,
    /// Output width as a fraction of the source width.
    pub factor: Option<f64>,
    /// Output height; the source height when unset.
    pub target_height: Option<u32>,
    pub omega0: f64,
    pub d_threshold: f64,
    pub bisection_tol: f64,
    pub max_bisection_iters: usize,
    pub grid_cols: usize,
    pub grid_rows: usize,
    pub min_cell_fraction: f64,
    pub coverage_threshold: f64,
    pub importance_source: ImportanceSource,
    pub allow_scale_fallback: bool,
}

impl Default for RetargetConfig {
    fn default() -> Self {
        Self {
            target_width: None,
            factor: None,
            target_height: None,
            omega0: 1.0,
            d_threshold: 1.0,
            bisection_tol: 1e-3,
            max_bisection_iters: 30,
            grid_cols: 25,
            grid_rows: 25,
            min_cell_fraction: 0.15,
            coverage_threshold: 0.05,
            importance_source: ImportanceSource::Fallback,
            allow_scale_fallback: false,
        }
    }
}

impl RetargetConfig {
    pub fn with_factor(factor: f64) -> Self {
        Self {
            factor: Some(factor),
            ..Self::default()
        }
    }

    pub fn with_size(width: u32, height: u32) -> Self {
        Self {
            target_width: Some(width),
            target_height: Some(height),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_width.is_some() && self.factor.is_some() {
            return Err(Error::input("give either a target width or a factor, not both"));
        }
        if let Some(f) = self.factor {
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::input("factor must be positive and finite"));
            }
        }
        if self.target_width == Some(0) || self.target_height == Some(0) {
            return Err(Error::input("target dimensions must be positive"));
        }
        if self.grid_cols == 0 || self.grid_rows == 0 {
            return Err(Error::input("grid needs at least one column and one row"));
        }
        if !(self.min_cell_fraction > 0.0 && self.min_cell_fraction < 1.0) {
            return Err(Error::input("min_cell_fraction must lie in (0, 1)"));
        }
        if !(self.coverage_threshold > 0.0 && self.coverage_threshold < 1.0) {
            return Err(Error::input("coverage_threshold must lie in (0, 1)"));
        }
        self.distortion_params::<f64>().validate()
    }

    /// Output dimensions for a source of the given size.
    pub fn resolve_target(&self, width: u32, height: u32) -> Result<(u32, u32)> {
        self.validate()?;
        let w = match (self.target_width, self.factor) {
            (Some(w), _) => w,
            (None, Some(f)) => (f * width as f64).round() as u32,
            (None, None) => width,
        };
        let h = self.target_height.unwrap_or(height);
        if w == 0 || h == 0 {
            return Err(Error::input("target rounds to an empty image"));
        }
        Ok((w, h))
    }

    pub fn distortion_params<T: Scalar>(&self) -> DistortionParams<T> {
        DistortionParams {
            omega0: T::lit(self.omega0),
            d_threshold: T::lit(self.d_threshold),
            bisection_tol: T::lit(self.bisection_tol),
            max_bisection_iters: self.max_bisection_iters,
        }
    }

    pub fn warp_params<T: Scalar>(&self) -> WarpParams<T> {
        WarpParams {
            min_cell_fraction: T::lit(self.min_cell_fraction),
            ..WarpParams::default()
        }
    }
}
