//! Importance maps and their aggregates.
//!
//! A map assigns each source pixel a score in `[0, 1]`. Maps come from an
//! external model (segmentation mask and/or saliency raster on disk), or from
//! the built-in spectral-residual detector in [`crate::saliency`]. The warp
//! consumes per-cell means ([`cell_importance`]); the crop search consumes a
//! per-column profile of the warped map ([`column_profile`]).

use std::path::Path;

use image::GrayImage;

use crate::error::{Error, Result};
use crate::mesh::{MeshGrid, UniformMeshSpec};
use crate::render::build_warp_map;
use crate::scalar::Scalar;

/// Per-pixel importance, row-major, every score in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceMap<T> {
    width: u32,
    height: u32,
    scores: Vec<T>,
}

impl<T: Scalar> ImportanceMap<T> {
    pub fn new(width: u32, height: u32, scores: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::input("importance map must have positive area"));
        }
        if scores.len() != width as usize * height as usize {
            return Err(Error::input(format!(
                "importance map {}x{} needs {} scores, got {}",
                width,
                height,
                width as usize * height as usize,
                scores.len()
            )));
        }
        if let Some(bad) = scores.iter().find(|s| !(**s >= T::zero() && **s <= T::one())) {
            return Err(Error::input(format!("importance score {bad} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            scores,
        })
    }

    pub fn constant(width: u32, height: u32, value: T) -> Result<Self> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> T) -> Result<Self> {
        let mut scores = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                scores.push(f(x, y));
            }
        }
        Self::new(width, height, scores)
    }

    /// Scores are `value / 255`.
    pub fn from_gray(img: &GrayImage) -> Result<Self> {
        let inv = T::one() / T::lit(255.0);
        let scores = img.as_raw().iter().map(|&p| T::from_u8(p).unwrap() * inv).collect();
        Self::new(img.width(), img.height(), scores)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn scores(&self) -> &[T] {
        &self.scores
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> T {
        self.scores[y as usize * self.width as usize + x as usize]
    }

    pub fn mean(&self) -> T {
        self.scores.iter().copied().sum::<T>() / T::from_usize_lossy(self.scores.len())
    }

    pub fn transpose(&self) -> Self {
        let (w, h) = (self.width as usize, self.height as usize);
        let mut scores = Vec::with_capacity(w * h);
        for x in 0..w {
            for y in 0..h {
                scores.push(self.scores[y * w + x]);
            }
        }
        Self {
            width: self.height,
            height: self.width,
            scores,
        }
    }

    /// Rounds every score to the nearest multiple of 1/255, the precision of the on-disk artifact.
    pub fn quantized(&self) -> Self {
        let img = self.to_gray();
        Self::from_gray(&img).expect("gray image yields a valid map")
    }

    pub fn to_gray(&self) -> GrayImage {
        let raw = self
            .scores
            .iter()
            .map(|s| (s.to_f64_lossy() * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        GrayImage::from_raw(self.width, self.height, raw).expect("buffer matches dims")
    }

    pub fn cast<U: Scalar>(&self) -> ImportanceMap<U> {
        ImportanceMap {
            width: self.width,
            height: self.height,
            scores: self.scores.iter().map(|s| U::lit(s.to_f64_lossy())).collect(),
        }
    }

    /// Bilinear resampling with pixel-center alignment and edge clamping.
    pub fn resize_bilinear(&self, width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::input("resize target must have positive area"));
        }
        let taps_x = bilinear_taps::<T>(self.width, width);
        let taps_y = bilinear_taps::<T>(self.height, height);
        let sw = self.width as usize;
        let mut scores = Vec::with_capacity(width as usize * height as usize);
        for &(y0, y1, fy) in &taps_y {
            for &(x0, x1, fx) in &taps_x {
                let p00 = self.scores[y0 * sw + x0];
                let p01 = self.scores[y0 * sw + x1];
                let p10 = self.scores[y1 * sw + x0];
                let p11 = self.scores[y1 * sw + x1];
                let top = p00 + (p01 - p00) * fx;
                let bottom = p10 + (p11 - p10) * fx;
                let v = top + (bottom - top) * fy;
                scores.push(v.max(T::zero()).min(T::one()));
            }
        }
        Self::new(width, height, scores)
    }
}

/// For each destination index: the two source indices and the weight of the second.
fn bilinear_taps<T: Scalar>(src: u32, dst: u32) -> Vec<(usize, usize, T)> {
    let scale = T::from_u32(src).unwrap() / T::from_u32(dst).unwrap();
    let half = T::lit(0.5);
    let max = (src - 1) as usize;
    (0..dst)
        .map(|d| {
            let s = ((T::from_u32(d).unwrap() + half) * scale - half).max(T::zero());
            let i0 = s.floor().to_usize().unwrap_or(0).min(max);
            let i1 = (i0 + 1).min(max);
            let frac = if i0 == max { T::zero() } else { s - T::from_usize_lossy(i0) };
            (i0, i1, frac)
        })
        .collect()
}

/// Class labels from a segmentation model, 0 = background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationMask {
    width: u32,
    height: u32,
    labels: Vec<u32>,
}

impl SegmentationMask {
    pub fn new(width: u32, height: u32, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != width as usize * height as usize {
            return Err(Error::input("segmentation mask label count does not match its dimensions"));
        }
        if width == 0 || height == 0 {
            return Err(Error::input("segmentation mask must have positive area"));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    /// Any nonzero pixel value is an object.
    pub fn from_gray(img: &GrayImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            labels: img.as_raw().iter().map(|&p| p as u32).collect(),
        }
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Fraction of pixels labelled as non-background.
    pub fn coverage(&self) -> f64 {
        let objects = self.labels.iter().filter(|&&l| l != 0).count();
        objects as f64 / self.labels.len() as f64
    }

    pub fn transpose(&self) -> Self {
        let (w, h) = (self.width as usize, self.height as usize);
        let mut labels = Vec::with_capacity(w * h);
        for x in 0..w {
            for y in 0..h {
                labels.push(self.labels[y * w + x]);
            }
        }
        Self {
            width: self.height,
            height: self.width,
            labels,
        }
    }

    fn resize_nearest(&self, width: u32, height: u32) -> Self {
        let mut labels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            let sy = ((y as u64 * self.height as u64) / height as u64) as usize;
            for x in 0..width {
                let sx = ((x as u64 * self.width as u64) / width as u64) as usize;
                labels.push(self.labels[sy * self.width as usize + sx]);
            }
        }
        Self {
            width,
            height,
            labels,
        }
    }
}

/// Segmentation wins when its object coverage reaches `coverage_threshold`
/// (binary map, 1 on objects). Otherwise the saliency map is returned as is.
pub fn combine_importance<T: Scalar>(
    mask: &SegmentationMask,
    saliency: &ImportanceMap<T>,
    coverage_threshold: f64,
) -> Result<ImportanceMap<T>> {
    if mask.dims() != saliency.dims() {
        return Err(Error::input(format!(
            "segmentation mask is {}x{} but saliency map is {}x{}",
            mask.width, mask.height, saliency.width, saliency.height
        )));
    }
    if !(coverage_threshold > 0.0 && coverage_threshold < 1.0) {
        return Err(Error::input("coverage threshold must lie in (0, 1)"));
    }
    // Integer comparison: objects / total >= threshold.
    let objects = mask.labels.iter().filter(|&&l| l != 0).count();
    let needed = (coverage_threshold * mask.labels.len() as f64 - 1e-9).ceil() as usize;
    if objects >= needed {
        let scores = mask
            .labels
            .iter()
            .map(|&l| if l != 0 { T::one() } else { T::zero() })
            .collect();
        ImportanceMap::new(mask.width, mask.height, scores)
    } else {
        Ok(saliency.clone())
    }
}

/// An externally produced map together with any ingestion warning.
#[derive(Debug, Clone)]
pub struct ExternalMap<T> {
    pub map: ImportanceMap<T>,
    pub warning: Option<String>,
}

fn open_gray(path: &Path) -> Result<(GrayImage, Option<String>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory(&bytes)?;
    let warning = (img.color() != image::ColorType::L8).then(|| {
        format!(
            "{} is {:?}, not 8-bit grayscale; converted to luma",
            path.display(),
            img.color()
        )
    });
    Ok((img.into_luma8(), warning))
}

pub fn load_external_map<T: Scalar>(path: &Path, expected: (u32, u32)) -> Result<ExternalMap<T>> {
    let (img, mut warning) = open_gray(path)?;
    let map = ImportanceMap::from_gray(&img)?;
    if map.dims() == expected {
        return Ok(ExternalMap { map, warning });
    }
    let note = format!(
        "{} is {}x{}, resampled to {}x{}",
        path.display(),
        map.width,
        map.height,
        expected.0,
        expected.1
    );
    log::warn!("{note}");
    warning = Some(match warning {
        Some(w) => format!("{w}; {note}"),
        None => note,
    });
    Ok(ExternalMap {
        map: map.resize_bilinear(expected.0, expected.1)?,
        warning,
    })
}

/// Reads a mask raster (0 = background). A size mismatch is fixed by
/// nearest-neighbour resampling so labels stay crisp.
pub fn load_segmentation_mask(path: &Path, expected: (u32, u32)) -> Result<SegmentationMask> {
    let (img, warning) = open_gray(path)?;
    if let Some(w) = warning {
        log::warn!("{w}");
    }
    let mask = SegmentationMask::from_gray(&img);
    if mask.dims() == expected {
        return Ok(mask);
    }
    log::warn!(
        "{} is {}x{}, resampled to {}x{}",
        path.display(),
        mask.width,
        mask.height,
        expected.0,
        expected.1
    );
    Ok(mask.resize_nearest(expected.0, expected.1))
}

/// Mean importance of each mesh cell, row-major `grid_rows x grid_cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellImportance<T> {
    grid_rows: usize,
    grid_cols: usize,
    omega: Vec<T>,
}

impl<T: Scalar> CellImportance<T> {
    pub fn new(grid_rows: usize, grid_cols: usize, omega: Vec<T>) -> Result<Self> {
        if grid_rows == 0 || grid_cols == 0 || omega.len() != grid_rows * grid_cols {
            return Err(Error::input("cell importance grid does not match its dimensions"));
        }
        if omega.iter().any(|o| !(*o >= T::zero() && *o <= T::one())) {
            return Err(Error::input("cell importance outside [0, 1]"));
        }
        Ok(Self {
            grid_rows,
            grid_cols,
            omega,
        })
    }

    pub fn uniform(grid_rows: usize, grid_cols: usize, value: T) -> Result<Self> {
        Self::new(grid_rows, grid_cols, vec![value; grid_rows * grid_cols])
    }

    pub fn grid_rows(&self) -> usize {
        self.grid_rows
    }

    pub fn grid_cols(&self) -> usize {
        self.grid_cols
    }

    pub fn values(&self) -> &[T] {
        &self.omega
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.omega[row * self.grid_cols + col]
    }

    pub fn transpose(&self) -> Self {
        let mut omega = Vec::with_capacity(self.omega.len());
        for c in 0..self.grid_cols {
            for r in 0..self.grid_rows {
                omega.push(self.get(r, c));
            }
        }
        Self {
            grid_rows: self.grid_cols,
            grid_cols: self.grid_rows,
            omega,
        }
    }
}

/// Index of the cell owning each pixel, by pixel center. The last cell takes
/// any pixel whose center lands past the final edge through rounding.
fn owning_cells<T: Scalar>(edges: &[T], pixels: u32) -> Vec<usize> {
    let cells = edges.len() - 1;
    let half = T::lit(0.5);
    let mut out = Vec::with_capacity(pixels as usize);
    let mut cell = 0;
    for p in 0..pixels {
        let center = T::from_u32(p).unwrap() + half;
        while cell + 1 < cells && center >= edges[cell + 1] {
            cell += 1;
        }
        out.push(cell);
    }
    out
}

pub fn cell_importance<T: Scalar>(map: &ImportanceMap<T>, mesh: &MeshGrid<T>) -> Result<CellImportance<T>> {
    let (w, h) = (T::from_u32(map.width).unwrap(), T::from_u32(map.height).unwrap());
    if (mesh.total_width() - w).abs() > pixel_tol(w) || (mesh.total_height() - h).abs() > pixel_tol(h) {
        return Err(Error::input(format!(
            "mesh spans {}x{} but importance map is {}x{}",
            mesh.total_width(),
            mesh.total_height(),
            map.width,
            map.height
        )));
    }
    let (cols, rows) = (mesh.grid_cols(), mesh.grid_rows());
    let col_of = owning_cells(&mesh.col_edges(), map.width);
    let row_of = owning_cells(&mesh.row_edges(), map.height);

    let mut sums = vec![T::zero(); rows * cols];
    let mut counts = vec![0usize; rows * cols];
    for (y, &r) in row_of.iter().enumerate() {
        let line = &map.scores[y * map.width as usize..(y + 1) * map.width as usize];
        let base = r * cols;
        for (&s, &c) in line.iter().zip(&col_of) {
            sums[base + c] += s;
            counts[base + c] += 1;
        }
    }

    let col_edges = mesh.col_edges();
    let row_edges = mesh.row_edges();
    let half = T::lit(0.5);
    let mut omega = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let k = r * cols + c;
            if counts[k] > 0 {
                omega.push((sums[k] / T::from_usize_lossy(counts[k])).min(T::one()));
            } else {
                // Cell thinner than a pixel: sample the pixel under its center.
                let cx = ((col_edges[c] + col_edges[c + 1]) * half).floor();
                let cy = ((row_edges[r] + row_edges[r + 1]) * half).floor();
                let x = cx.to_u32().unwrap_or(0).min(map.width - 1);
                let y = cy.to_u32().unwrap_or(0).min(map.height - 1);
                omega.push(map.get(x, y));
            }
        }
    }
    CellImportance::new(rows, cols, omega)
}

/// Column sums of the warped importance map, with prefix sums for O(1) range queries.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnProfile<T> {
    weights: Vec<T>,
    prefix_sums: Vec<T>,
}

impl<T: Scalar> ColumnProfile<T> {
    pub fn new(weights: Vec<T>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= T::zero())) {
            return Err(Error::input("column profile weights must be finite and non-negative"));
        }
        let mut prefix_sums = Vec::with_capacity(weights.len() + 1);
        let mut acc = T::zero();
        prefix_sums.push(acc);
        for &w in &weights {
            acc += w;
            prefix_sums.push(acc);
        }
        Ok(Self {
            weights,
            prefix_sums,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `len + 1` entries; entry `k` is the mass of columns `0..k`.
    pub fn prefix_sums(&self) -> &[T] {
        &self.prefix_sums
    }

    /// Mass of columns `start..end`.
    #[inline]
    pub fn range(&self, start: usize, end: usize) -> T {
        self.prefix_sums[end] - self.prefix_sums[start]
    }

    pub fn total(&self) -> T {
        self.prefix_sums[self.weights.len()]
    }
}

/// Pushes `map` through the intermediate warp with nearest-neighbour
/// sampling and sums each column of the result.
///
/// The source-side mesh is the uniform mesh over the map with the same grid
/// shape as `intermediate`. The warped width must be a whole number of pixels.
pub fn column_profile<T: Scalar>(map: &ImportanceMap<T>, intermediate: &MeshGrid<T>) -> Result<ColumnProfile<T>> {
    let spec = UniformMeshSpec::<T>::new(map.width, map.height, intermediate.grid_cols(), intermediate.grid_rows())?;
    let out_w = whole_pixels(intermediate.total_width(), "intermediate width")?;
    let out_h = whole_pixels(intermediate.total_height(), "intermediate height")?;
    let warp = build_warp_map(intermediate, &spec)?;
    let xs = warp.x_map.nearest_indices(out_w, map.width);
    let ys = warp.y_map.nearest_indices(out_h, map.height);

    let mut weights = vec![T::zero(); out_w as usize];
    for &sy in &ys {
        let line = &map.scores[sy * map.width as usize..(sy + 1) * map.width as usize];
        for (w, &sx) in weights.iter_mut().zip(&xs) {
            *w += line[sx];
        }
    }
    ColumnProfile::new(weights)
}

pub(crate) fn whole_pixels<T: Scalar>(v: T, what: &str) -> Result<u32> {
    let r = v.round();
    if (v - r).abs() > pixel_tol(r) || r < T::one() {
        return Err(Error::input(format!("{what} {v} is not a positive whole number of pixels")));
    }
    Ok(r.to_u32().unwrap())
}

/// Slack allowed when a floating-point extent should be a whole pixel count.
pub(crate) fn pixel_tol<T: Scalar>(len: T) -> T {
    T::lit(1e-6).max(T::lit(256.0) * T::epsilon() * len.abs())
}

/// Writes a map as an 8-bit grayscale raster.
pub fn save_map<T: Scalar>(map: &ImportanceMap<T>, path: &Path) -> Result<()> {
    map.to_gray().save(path)?;
    Ok(())
}
