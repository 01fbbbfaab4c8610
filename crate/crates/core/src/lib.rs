//! Content-aware image retargeting that combines an axis-aligned grid warp
//! with cropping.
//!
//! The warp absorbs as much of the size change as a distortion budget
//! allows; the rest is cropped from the sides where the warped importance is
//! lowest. Numeric types are generic over [`Scalar`] (`f32` or `f64`); the
//! `*F64` and `*F32` aliases below fix the precision.
//!
//! ```
//! use warpcrop::{fixtures, retarget, RetargetConfig};
//!
//! let img = fixtures::houses(120, 80);
//! let out = retarget::<_, f64>(&img, &RetargetConfig::with_factor(0.5)).unwrap();
//! assert_eq!(out.image.dimensions(), (60, 80));
//! assert!(out.plan.horizontal.distortion <= 1.0 + 1e-9);
//! ```

// Guards are written `!(x > 0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod crop;
pub mod distortion;
pub mod error;
pub mod fixtures;
pub mod importance;
mod linalg;
pub mod mesh;
pub mod pipeline;
pub mod render;
pub mod saliency;
pub mod scalar;
pub mod warp;

pub use crop::{merge_crop_into_mesh, optimal_crop_split, CropSplit, FinalMesh};
pub use distortion::{distortion, max_admissible_warp, DistortionParams, WarpSearchResult};
pub use error::{Error, Result};
pub use importance::{
    cell_importance, column_profile, combine_importance, load_external_map, load_segmentation_mask, save_map,
    CellImportance, ColumnProfile, ImportanceMap, SegmentationMask,
};
pub use mesh::{build_uniform_mesh, MeshDump, MeshGrid, UniformMeshSpec};
pub use pipeline::{
    compute_importance, distortion_curve, plan_retarget, precompute_importance, retarget, retarget_cached,
    retarget_with_importance, source_hash, AxisPlan, CachedImportance, CurvePoint, ImportanceCache,
    ImportanceSource, RetargetConfig, RetargetPlan, RetargetResult, StageTimings,
};
pub use render::{build_separable_map, build_warp_map, render, transpose_image, PiecewiseLinear, SeparableMap};
pub use saliency::fallback_saliency;
pub use scalar::Scalar;
pub use warp::{solve_warp, solve_warp_with, WarpParams, WarpSolution};

pub type MeshGridF64 = MeshGrid<f64>;
pub type MeshGridF32 = MeshGrid<f32>;
pub type UniformMeshSpecF64 = UniformMeshSpec<f64>;
pub type UniformMeshSpecF32 = UniformMeshSpec<f32>;
pub type ImportanceMapF64 = ImportanceMap<f64>;
pub type ImportanceMapF32 = ImportanceMap<f32>;
pub type CellImportanceF64 = CellImportance<f64>;
pub type CellImportanceF32 = CellImportance<f32>;
pub type DistortionParamsF64 = DistortionParams<f64>;
pub type DistortionParamsF32 = DistortionParams<f32>;
pub type WarpParamsF64 = WarpParams<f64>;
pub type WarpParamsF32 = WarpParams<f32>;
pub type WarpSolutionF64 = WarpSolution<f64>;
pub type WarpSolutionF32 = WarpSolution<f32>;
pub type CropSplitF64 = CropSplit<f64>;
pub type CropSplitF32 = CropSplit<f32>;
pub type SeparableMapF64 = SeparableMap<f64>;
pub type SeparableMapF32 = SeparableMap<f32>;
pub type ImportanceCacheF64 = ImportanceCache<f64>;
pub type ImportanceCacheF32 = ImportanceCache<f32>;
