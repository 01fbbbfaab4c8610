//! End-to-end retargeting: importance, warp search, crop and render.
//!
//! A width change runs the warp search on the importance map, snaps the
//! admissible warp to a whole pixel width, and crops the remaining columns
//! at the cheapest split. A height change runs the same procedure on the
//! transposed problem. When both change, the height pass sees the importance
//! map already pushed through the width pass, the two coordinate maps are
//! composed, and the source is sampled once.

mod cache;
mod config;

use std::sync::Arc;
use std::time::Instant;

use image::{ImageBuffer, Pixel};
use serde::{Deserialize, Serialize};

pub use cache::{cache_key, source_hash, CachedImportance, ImportanceCache, ImportanceSidecar};
pub use config::{ImportanceSource, RetargetConfig};

use crate::crop::{merge_crop_into_mesh, optimal_crop_split, CropSplit};
use crate::distortion::{distortion, max_admissible_warp};
use crate::error::{Error, Result};
use crate::importance::{
    cell_importance, column_profile, combine_importance, load_external_map, load_segmentation_mask, CellImportance,
    ImportanceMap,
};
use crate::mesh::{build_uniform_mesh, MeshDump, MeshGrid, UniformMeshSpec};
use crate::render::{build_separable_map, render, SeparableMap};
use crate::saliency::fallback_saliency;
use crate::scalar::Scalar;
use crate::warp::{solve_warp_with, WarpSolution};

/// What happened along one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisPlan {
    pub source_len: u32,
    pub target_len: u32,
    /// Warped length over source length, before cropping.
    pub intermediate_factor: f64,
    pub intermediate_len: f64,
    /// Distortion of the intermediate warp.
    pub distortion: f64,
    pub crop_left: u32,
    pub crop_right: u32,
    pub removed_mass: f64,
    pub reached_target: bool,
    pub scale_fallback: bool,
    pub dense_scan: bool,
}

impl AxisPlan {
    fn unchanged(len: u32) -> Self {
        Self {
            source_len: len,
            target_len: len,
            intermediate_factor: 1.0,
            intermediate_len: len as f64,
            distortion: 0.0,
            crop_left: 0,
            crop_right: 0,
            removed_mass: 0.0,
            reached_target: true,
            scale_fallback: false,
            dense_scan: false,
        }
    }
}

/// Per-axis plans for a retarget. `horizontal` describes the width change
/// and `vertical` the height change, with "left"/"right" meaning top/bottom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetargetPlan {
    pub source_width: u32,
    pub source_height: u32,
    pub target_width: u32,
    pub target_height: u32,
    pub horizontal: AxisPlan,
    pub vertical: AxisPlan,
}

impl RetargetPlan {
    pub fn reached_target(&self) -> bool {
        self.horizontal.reached_target && self.vertical.reached_target
    }

    pub fn scale_fallback(&self) -> bool {
        self.horizontal.scale_fallback || self.vertical.scale_fallback
    }
}

/// Wall-clock time per stage, in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub importance_ms: f64,
    pub warp_and_crop_ms: f64,
    pub render_ms: f64,
}

impl StageTimings {
    pub fn total_ms(&self) -> f64 {
        self.importance_ms + self.warp_and_crop_ms + self.render_ms
    }
}

#[derive(Debug, Clone)]
pub struct RetargetResult<P: Pixel<Subpixel = u8>> {
    pub image: ImageBuffer<P, Vec<u8>>,
    pub plan: RetargetPlan,
    /// Intermediate mesh of the width pass, or of the height pass (in image
    /// orientation) when only the height changes.
    pub mesh: MeshDump,
    pub timings: StageTimings,
}

/// One sample of the distortion curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub factor: f64,
    pub d: f64,
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Builds the importance map for `source` as configured, quantised to 8 bits
/// so that it matches what the cache stores. Also returns the segmentation
/// coverage for combined maps.
pub fn compute_importance<P, T>(
    source: &ImageBuffer<P, Vec<u8>>,
    config: &RetargetConfig,
) -> Result<(ImportanceMap<T>, Option<f64>)>
where
    P: Pixel<Subpixel = u8>,
    T: Scalar,
{
    let dims = source.dimensions();
    let external = |path: &std::path::Path| -> Result<ImportanceMap<T>> {
        let ext = load_external_map(path, dims)?;
        if let Some(w) = ext.warning {
            log::warn!("{w}");
        }
        Ok(ext.map)
    };
    let (map, coverage) = match &config.importance_source {
        ImportanceSource::Fallback => (fallback_saliency(source)?, None),
        ImportanceSource::External(path) => (external(path)?, None),
        ImportanceSource::Combined { mask, saliency } => {
            let mask = load_segmentation_mask(mask, dims)?;
            let saliency = match saliency {
                Some(p) => external(p)?,
                None => fallback_saliency(source)?,
            };
            let combined = combine_importance(&mask, &saliency, config.coverage_threshold)?;
            (combined, Some(mask.coverage()))
        }
    };
    Ok((map.quantized(), coverage))
}

/// Computes the importance map through `cache` so later retargets of the
/// same image skip it.
pub fn precompute_importance<P, T>(
    source: &ImageBuffer<P, Vec<u8>>,
    config: &RetargetConfig,
    cache: &ImportanceCache<T>,
) -> Result<Arc<CachedImportance<T>>>
where
    P: Pixel<Subpixel = u8>,
    T: Scalar,
{
    cache.get_or_compute(source, &source_hash(source), config)
}

pub fn retarget<P, T>(source: &ImageBuffer<P, Vec<u8>>, config: &RetargetConfig) -> Result<RetargetResult<P>>
where
    P: Pixel<Subpixel = u8>,
    T: Scalar,
{
    let t = Instant::now();
    let (importance, _) = compute_importance::<P, T>(source, config)?;
    let importance_ms = ms_since(t);
    let mut out = retarget_with_importance(source, &importance, config)?;
    out.timings.importance_ms = importance_ms;
    Ok(out)
}

/// Retargets with the importance map taken from `cache` (computed on a miss).
/// `source_hash` is the hash of `source` as returned by [`source_hash`].
pub fn retarget_cached<P, T>(
    source: &ImageBuffer<P, Vec<u8>>,
    source_hash: &str,
    config: &RetargetConfig,
    cache: &ImportanceCache<T>,
) -> Result<RetargetResult<P>>
where
    P: Pixel<Subpixel = u8>,
    T: Scalar,
{
    let t = Instant::now();
    let entry = cache.get_or_compute(source, source_hash, config)?;
    let importance_ms = ms_since(t);
    let mut out = retarget_with_importance(source, &entry.map, config)?;
    out.timings.importance_ms = importance_ms;
    Ok(out)
}

/// Retargets with a caller-supplied importance map of the source's size.
/// The importance stage is reported as zero.
pub fn retarget_with_importance<P, T>(
    source: &ImageBuffer<P, Vec<u8>>,
    importance: &ImportanceMap<T>,
    config: &RetargetConfig,
) -> Result<RetargetResult<P>>
where
    P: Pixel<Subpixel = u8>,
    T: Scalar,
{
    if importance.dims() != source.dimensions() {
        return Err(Error::input(format!(
            "importance map is {}x{} but the image is {}x{}",
            importance.width(),
            importance.height(),
            source.width(),
            source.height()
        )));
    }
    let t = Instant::now();
    let (map, plan, mesh) = plan_retarget(importance, config)?;
    let warp_and_crop_ms = ms_since(t);

    let t = Instant::now();
    let image = render(source, &map, (plan.target_width, plan.target_height))?;
    let render_ms = ms_since(t);

    Ok(RetargetResult {
        image,
        plan,
        mesh,
        timings: StageTimings {
            importance_ms: 0.0,
            warp_and_crop_ms,
            render_ms,
        },
    })
}

/// Runs the warp search and crop for both axes and returns the composed
/// target-to-source map without touching pixels.
pub fn plan_retarget<T: Scalar>(
    importance: &ImportanceMap<T>,
    config: &RetargetConfig,
) -> Result<(SeparableMap<T>, RetargetPlan, MeshDump)> {
    let (w, h) = importance.dims();
    let (tw, th) = config.resolve_target(w, h)?;

    let horizontal = plan_axis(importance, tw, (config.grid_cols, config.grid_rows), config)?;
    let plan_h = horizontal.plan.clone();
    if th == h {
        let plan = RetargetPlan {
            source_width: w,
            source_height: h,
            target_width: tw,
            target_height: th,
            horizontal: plan_h,
            vertical: AxisPlan::unchanged(h),
        };
        return Ok((horizontal.map, plan, horizontal.mesh));
    }

    // The height pass works on the transposed importance of the width pass output.
    let warped = if tw == w {
        importance.clone()
    } else {
        resample_nearest(importance, &horizontal.map, tw, h)?
    };
    let vertical = plan_axis(&warped.transpose(), th, (config.grid_rows, config.grid_cols), config)?;
    let v_map = vertical.map.transpose();
    let (map, mesh) = if tw == w {
        (v_map, transpose_dump(&vertical.mesh))
    } else {
        (horizontal.map.compose(&v_map), horizontal.mesh)
    };
    let plan = RetargetPlan {
        source_width: w,
        source_height: h,
        target_width: tw,
        target_height: th,
        horizontal: plan_h,
        vertical: vertical.plan,
    };
    Ok((map, plan, mesh))
}

fn transpose_dump(d: &MeshDump) -> MeshDump {
    MeshDump {
        grid_cols: d.grid_rows,
        grid_rows: d.grid_cols,
        col_widths: d.row_heights.clone(),
        row_heights: d.col_widths.clone(),
        energy: d.energy,
        converged: d.converged,
    }
}

fn resample_nearest<T: Scalar>(
    map: &ImportanceMap<T>,
    through: &SeparableMap<T>,
    width: u32,
    height: u32,
) -> Result<ImportanceMap<T>> {
    let xs = through.x_map.nearest_indices(width, map.width());
    let ys = through.y_map.nearest_indices(height, map.height());
    ImportanceMap::from_fn(width, height, |x, y| map.get(xs[x as usize] as u32, ys[y as usize] as u32))
}

struct AxisOutcome<T> {
    plan: AxisPlan,
    map: SeparableMap<T>,
    mesh: MeshDump,
}

fn solve_at<T: Scalar>(
    spec: &UniformMeshSpec<T>,
    omega: &CellImportance<T>,
    width: u32,
    config: &RetargetConfig,
) -> Result<(WarpSolution<T>, T)> {
    let wt = T::from_u32(width).unwrap();
    let sol = solve_warp_with(spec, omega, wt, spec.source_height_t(), &config.warp_params()).map_err(|e| {
        Error::AtFactor {
            context: "warp solve",
            factor: width as f64 / spec.source_width as f64,
            source: Box::new(e),
        }
    })?;
    let d = distortion(&sol.mesh, spec, omega, T::lit(config.omega0))?;
    Ok((sol, d))
}

/// Width-only retarget of `importance` to `target` columns.
fn plan_axis<T: Scalar>(
    importance: &ImportanceMap<T>,
    target: u32,
    grid: (usize, usize),
    config: &RetargetConfig,
) -> Result<AxisOutcome<T>> {
    let (w, h) = importance.dims();
    let spec = UniformMeshSpec::<T>::new(w, h, grid.0, grid.1)?;
    if target == w {
        return Ok(AxisOutcome {
            plan: AxisPlan::unchanged(w),
            map: SeparableMap::identity(w, h),
            mesh: MeshDump::new(&build_uniform_mesh(&spec), T::zero(), true),
        });
    }
    let omega = cell_importance(importance, &build_uniform_mesh(&spec))?;
    let params = config.distortion_params::<T>();
    // The warp cannot squeeze below the minimum cell size; cropping covers the rest.
    let narrowest = (config.min_cell_fraction * w as f64 - 1e-9).ceil().max(1.0) as u32;
    let warp_target = target.max(narrowest);
    let search = max_admissible_warp(
        &spec,
        &omega,
        T::from_u32(warp_target).unwrap(),
        &params,
        &config.warp_params(),
    )?;
    let mut plan = AxisPlan {
        source_len: w,
        target_len: target,
        intermediate_factor: search.factor.to_f64_lossy(),
        intermediate_len: search.mesh().total_width().to_f64_lossy(),
        distortion: search.distortion.to_f64_lossy(),
        crop_left: 0,
        crop_right: 0,
        removed_mass: 0.0,
        reached_target: search.reached_target && warp_target == target,
        scale_fallback: false,
        dense_scan: search.dense_scan,
    };

    if plan.reached_target {
        let final_mesh = merge_crop_into_mesh(search.mesh(), &CropSplit::none())?;
        return Ok(AxisOutcome {
            plan,
            map: build_separable_map(&final_mesh, &spec)?,
            mesh: dump(&search.solution),
        });
    }

    if target > w {
        let reached = search.mesh().total_width();
        if !config.allow_scale_fallback {
            return Err(Error::ExpansionBudget {
                reached: reached.to_f64_lossy(),
                requested: target,
            });
        }
        // Uniform stretch of whatever the warp could not cover.
        let final_mesh = merge_crop_into_mesh(search.mesh(), &CropSplit::none())?;
        let mut map = build_separable_map(&final_mesh, &spec)?;
        map.x_map = map.x_map.scale_domain(reached / T::from_u32(target).unwrap());
        plan.scale_fallback = true;
        return Ok(AxisOutcome {
            plan,
            map,
            mesh: dump(&search.solution),
        });
    }

    // Cropping removes whole columns, so the warp stops at a whole pixel
    // width no narrower than the admissible one.
    let exact = (search.factor * spec.source_width_t()).to_f64_lossy();
    let mut width = ((exact - 1e-6).ceil() as u32).clamp(warp_target, w);
    let (mut sol, mut d) = if (width as f64 - exact).abs() <= 1e-9 {
        (search.solution.clone(), search.distortion)
    } else {
        solve_at(&spec, &omega, width, config)?
    };
    let slack = params.d_threshold + T::lit(1e-9);
    while d > slack && width < w {
        width += 1;
        (sol, d) = solve_at(&spec, &omega, width, config)?;
    }
    let snapped = snap_width(&sol.mesh, width)?;
    let profile = column_profile(importance, &snapped)?;
    let split = optimal_crop_split(&profile, width - target)?;
    let final_mesh = merge_crop_into_mesh(&snapped, &split)?;

    plan.intermediate_factor = width as f64 / w as f64;
    plan.intermediate_len = width as f64;
    plan.distortion = d.to_f64_lossy();
    plan.crop_left = split.left;
    plan.crop_right = split.right;
    plan.removed_mass = split.removed_mass.to_f64_lossy();
    Ok(AxisOutcome {
        plan,
        map: build_separable_map(&final_mesh, &spec)?,
        mesh: dump(&sol),
    })
}

/// Absorbs floating-point drift in the column sum into the last column so the
/// mesh spans exactly `width` pixels.
fn snap_width<T: Scalar>(mesh: &MeshGrid<T>, width: u32) -> Result<MeshGrid<T>> {
    let mut cols = mesh.col_widths().to_vec();
    let drift = T::from_u32(width).unwrap() - mesh.total_width();
    if let Some(last) = cols.last_mut() {
        *last += drift;
    }
    MeshGrid::new(cols, mesh.row_heights().to_vec())
}

fn dump<T: Scalar>(sol: &WarpSolution<T>) -> MeshDump {
    MeshDump::new(&sol.mesh, sol.energy, sol.converged)
}

/// `D` of the optimal warp at `samples` evenly spaced factors from 1 down
/// (or up) to the configured target width.
pub fn distortion_curve<T: Scalar>(
    importance: &ImportanceMap<T>,
    config: &RetargetConfig,
    samples: usize,
) -> Result<Vec<CurvePoint>> {
    if samples < 2 {
        return Err(Error::input("a distortion curve needs at least two samples"));
    }
    let (w, h) = importance.dims();
    let (tw, _) = config.resolve_target(w, h)?;
    let spec = UniformMeshSpec::<T>::new(w, h, config.grid_cols, config.grid_rows)?;
    let omega = cell_importance(importance, &build_uniform_mesh(&spec))?;
    let end = tw as f64 / w as f64;
    let warp = config.warp_params::<T>();
    (0..samples)
        .map(|k| {
            let factor = 1.0 + (end - 1.0) * k as f64 / (samples - 1) as f64;
            let width = T::lit(factor) * spec.source_width_t();
            let sol = solve_warp_with(&spec, &omega, width, spec.source_height_t(), &warp).map_err(|e| {
                Error::AtFactor {
                    context: "distortion curve",
                    factor,
                    source: Box::new(e),
                }
            })?;
            let d = distortion(&sol.mesh, &spec, &omega, T::lit(config.omega0))?;
            Ok(CurvePoint {
                factor,
                d: d.to_f64_lossy(),
            })
        })
        .collect()
}
