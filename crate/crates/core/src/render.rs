//! Final rendering: axis-aligned meshes factor into independent x and y
//! coordinate maps, so the output is pulled back one axis at a time and
//! sampled bilinearly from the source.

use image::{ImageBuffer, Pixel};

use crate::crop::FinalMesh;
use crate::error::{Error, Result};
use crate::importance::pixel_tol;
use crate::mesh::{edges, MeshGrid, UniformMeshSpec};
use crate::scalar::Scalar;

/// A strictly increasing piecewise-linear function stored as breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear<T> {
    domain: Vec<T>,
    range: Vec<T>,
}

impl<T: Scalar> PiecewiseLinear<T> {
    pub fn new(domain: Vec<T>, range: Vec<T>) -> Result<Self> {
        if domain.len() < 2 || domain.len() != range.len() {
            return Err(Error::Internal("piecewise-linear map needs matching breakpoints".into()));
        }
        let increasing = |v: &[T]| v.windows(2).all(|w| w[1] > w[0]);
        if !increasing(&domain) || !increasing(&range) {
            return Err(Error::Internal("coordinate map is not strictly increasing".into()));
        }
        Ok(Self { domain, range })
    }

    pub fn identity(len: T) -> Self {
        Self {
            domain: vec![T::zero(), len],
            range: vec![T::zero(), len],
        }
    }

    pub fn domain(&self) -> &[T] {
        &self.domain
    }

    pub fn range(&self) -> &[T] {
        &self.range
    }

    pub fn domain_end(&self) -> T {
        *self.domain.last().unwrap()
    }

    /// Linear extrapolation past either end.
    pub fn eval(&self, t: T) -> T {
        let n = self.domain.len();
        let seg = self.domain[1..n - 1].partition_point(|&d| d <= t);
        self.eval_in(seg, t)
    }

    #[inline]
    fn eval_in(&self, seg: usize, t: T) -> T {
        let (d0, d1) = (self.domain[seg], self.domain[seg + 1]);
        let (r0, r1) = (self.range[seg], self.range[seg + 1]);
        r0 + (t - d0) * (r1 - r0) / (d1 - d0)
    }

    /// Evaluates at the pixel centers `0.5, 1.5, ...` of an axis `len` pixels long.
    pub fn eval_centers(&self, len: u32) -> Vec<T> {
        let half = T::lit(0.5);
        let last = self.domain.len() - 2;
        let mut seg = 0;
        (0..len)
            .map(|p| {
                let t = T::from_u32(p).unwrap() + half;
                while seg < last && t >= self.domain[seg + 1] {
                    seg += 1;
                }
                self.eval_in(seg, t)
            })
            .collect()
    }

    pub fn inverse(&self) -> Self {
        Self {
            domain: self.range.clone(),
            range: self.domain.clone(),
        }
    }

    /// `t -> self(inner(t))`.
    pub fn compose(&self, inner: &Self) -> Self {
        let inv = inner.inverse();
        let (lo, hi) = (inner.range[0], *inner.range.last().unwrap());
        let mut pts: Vec<T> = inner.domain.clone();
        pts.extend(
            self.domain
                .iter()
                .filter(|&&d| d > lo && d < hi)
                .map(|&d| inv.eval(d)),
        );
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let tol = T::lit(1e-9);
        pts.dedup_by(|b, a| (*b - *a).abs() <= tol);
        let range = pts.iter().map(|&t| self.eval(inner.eval(t))).collect();
        Self { domain: pts, range }
    }

    /// The map on `[start, end]` re-based so its domain starts at 0.
    pub fn window(&self, start: T, end: T) -> Result<Self> {
        let mut domain = vec![T::zero()];
        let mut range = vec![self.eval(start)];
        for (&d, &r) in self.domain.iter().zip(&self.range) {
            if d > start && d < end {
                domain.push(d - start);
                range.push(r);
            }
        }
        domain.push(end - start);
        range.push(self.eval(end));
        Self::new(domain, range)
    }

    /// `t -> self(t * factor)`, stretching the domain by `1 / factor`.
    pub fn scale_domain(&self, factor: T) -> Self {
        Self {
            domain: self.domain.iter().map(|&d| d / factor).collect(),
            range: self.range.clone(),
        }
    }

    /// Source pixel index nearest to each of `len` target pixel centers.
    pub fn nearest_indices(&self, len: u32, src_len: u32) -> Vec<usize> {
        let max = src_len as usize - 1;
        self.eval_centers(len)
            .into_iter()
            .map(|s| s.floor().max(T::zero()).to_usize().unwrap_or(0).min(max))
            .collect()
    }

    /// Bilinear taps `(i0, i1, weight of i1)` for each target pixel, edge clamped.
    fn bilinear_taps(&self, len: u32, src_len: u32) -> Vec<(usize, usize, T)> {
        let max = src_len as usize - 1;
        let half = T::lit(0.5);
        self.eval_centers(len)
            .into_iter()
            .map(|s| {
                let s = (s - half).max(T::zero());
                let i0 = s.floor().to_usize().unwrap_or(0).min(max);
                if i0 >= max {
                    (max, max, T::zero())
                } else {
                    (i0, i0 + 1, s - T::from_usize_lossy(i0))
                }
            })
            .collect()
    }
}

/// Target-to-source coordinate maps, one per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableMap<T> {
    pub x_map: PiecewiseLinear<T>,
    pub y_map: PiecewiseLinear<T>,
}

impl<T: Scalar> SeparableMap<T> {
    pub fn identity(width: u32, height: u32) -> Self {
        Self {
            x_map: PiecewiseLinear::identity(T::from_u32(width).unwrap()),
            y_map: PiecewiseLinear::identity(T::from_u32(height).unwrap()),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            x_map: self.y_map.clone(),
            y_map: self.x_map.clone(),
        }
    }

    /// `self` applied after `inner`: a target point goes through `inner` first.
    pub fn compose(&self, inner: &Self) -> Self {
        Self {
            x_map: self.x_map.compose(&inner.x_map),
            y_map: self.y_map.compose(&inner.y_map),
        }
    }
}

fn axis_map<T: Scalar>(warped: &[T], cells: usize, source_len: u32) -> Result<PiecewiseLinear<T>> {
    let domain = edges(warped);
    let src = T::from_u32(source_len).unwrap();
    let n = T::from_usize_lossy(cells);
    let mut range: Vec<T> = (0..=cells).map(|k| src * T::from_usize_lossy(k) / n).collect();
    range[cells] = src;
    PiecewiseLinear::new(domain, range)
}

/// Maps each cell of a warped mesh linearly onto the matching cell of the
/// uniform source mesh.
pub fn build_warp_map<T: Scalar>(mesh: &MeshGrid<T>, spec: &UniformMeshSpec<T>) -> Result<SeparableMap<T>> {
    if !spec.matches(mesh) {
        return Err(Error::input("mesh grid shape does not match the uniform spec"));
    }
    Ok(SeparableMap {
        x_map: axis_map(mesh.col_widths(), spec.grid_cols, spec.source_width)?,
        y_map: axis_map(mesh.row_heights(), spec.grid_rows, spec.source_height)?,
    })
}

/// Coordinate maps for a final mesh: the intermediate warp, windowed to the
/// columns that survive the crop.
pub fn build_separable_map<T: Scalar>(final_mesh: &FinalMesh<T>, spec: &UniformMeshSpec<T>) -> Result<SeparableMap<T>> {
    let warp = build_warp_map(&final_mesh.source_mesh, spec)?;
    let width = final_mesh.mesh.total_width();
    let x_map = warp.x_map.window(final_mesh.x_offset, final_mesh.x_offset + width)?;
    Ok(SeparableMap {
        x_map,
        y_map: warp.y_map,
    })
}

/// Pulls each target pixel center back through `map` and samples the source
/// bilinearly with edge clamping.
pub fn render<P, T>(
    source: &ImageBuffer<P, Vec<u8>>,
    map: &SeparableMap<T>,
    target_dims: (u32, u32),
) -> Result<ImageBuffer<P, Vec<u8>>>
where
    P: Pixel<Subpixel = u8>,
    T: Scalar,
{
    let (tw, th) = target_dims;
    if tw == 0 || th == 0 || source.width() == 0 || source.height() == 0 {
        return Err(Error::input("render needs non-empty source and target"));
    }
    let (twt, tht) = (T::from_u32(tw).unwrap(), T::from_u32(th).unwrap());
    if (map.x_map.domain_end() - twt).abs() > pixel_tol(twt) || (map.y_map.domain_end() - tht).abs() > pixel_tol(tht) {
        return Err(Error::input("coordinate map does not cover the target dimensions"));
    }
    let xs = map.x_map.bilinear_taps(tw, source.width());
    let ys = map.y_map.bilinear_taps(th, source.height());
    let ch = P::CHANNEL_COUNT as usize;
    let src = source.as_raw();
    let stride = source.width() as usize * ch;
    let mut out = vec![0u8; tw as usize * th as usize * ch];
    let max = T::lit(255.0);

    for (row, &(y0, y1, fy)) in out.chunks_exact_mut(tw as usize * ch).zip(&ys) {
        let line0 = &src[y0 * stride..(y0 + 1) * stride];
        let line1 = &src[y1 * stride..(y1 + 1) * stride];
        let gy = T::one() - fy;
        for (px, &(x0, x1, fx)) in row.chunks_exact_mut(ch).zip(&xs) {
            let gx = T::one() - fx;
            // Diagonal and anti-diagonal pairs are summed separately so that
            // swapping the axes reproduces the same floating-point result.
            let (w00, w11) = (gx * gy, fx * fy);
            let (w01, w10) = (fx * gy, gx * fy);
            for c in 0..ch {
                let p = |line: &[u8], x: usize| T::from_u8(line[x * ch + c]).unwrap();
                let v = (w00 * p(line0, x0) + w11 * p(line1, x1)) + (w01 * p(line0, x1) + w10 * p(line1, x0));
                px[c] = v.round().max(T::zero()).min(max).to_u8().unwrap_or(0);
            }
        }
    }
    ImageBuffer::from_raw(tw, th, out).ok_or_else(|| Error::Internal("output buffer size".into()))
}

pub fn transpose_image<P>(img: &ImageBuffer<P, Vec<u8>>) -> ImageBuffer<P, Vec<u8>>
where
    P: Pixel<Subpixel = u8>,
{
    let (w, h) = img.dimensions();
    let mut out = ImageBuffer::new(h, w);
    for (x, y, p) in img.enumerate_pixels() {
        out.put_pixel(y, x, *p);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crop::{merge_crop_into_mesh, CropSplit};
    use crate::mesh::build_uniform_mesh;
    use image::{Rgb, RgbImage};
    use proptest::prelude::*;

    fn textured(w: u32, h: u32) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| {
            Rgb([
                ((x * 37 + y * 11) % 256) as u8,
                ((x * x + 3 * y) % 256) as u8,
                ((x ^ y) * 5 % 256) as u8,
            ])
        })
    }

    #[test]
    fn identity_mesh_gives_identity_maps() {
        let spec = UniformMeshSpec::<f64>::new(40, 30, 5, 3).unwrap();
        let warp = build_warp_map(&build_uniform_mesh(&spec), &spec).unwrap();
        for (&d, &r) in warp.x_map.domain().iter().zip(warp.x_map.range()) {
            assert!((d - r).abs() < 1e-12);
        }
        for (&d, &r) in warp.y_map.domain().iter().zip(warp.y_map.range()) {
            assert!((d - r).abs() < 1e-12);
        }
    }

    #[test]
    fn single_cell_half_width_has_slope_two() {
        let spec = UniformMeshSpec::<f64>::new(64, 64, 1, 1).unwrap();
        let mesh = MeshGrid::new(vec![32.0], vec![64.0]).unwrap();
        let warp = build_warp_map(&mesh, &spec).unwrap();
        for t in [0.0, 3.5, 17.25, 32.0] {
            assert!((warp.x_map.eval(t) - 2.0 * t).abs() < 1e-12);
        }
    }

    #[test]
    fn crop_only_map_is_translation() {
        let spec = UniformMeshSpec::<f64>::new(50, 20, 5, 2).unwrap();
        let fm = merge_crop_into_mesh(
            &build_uniform_mesh(&spec),
            &CropSplit {
                left: 7,
                right: 3,
                removed_mass: 0.0,
            },
        )
        .unwrap();
        let map = build_separable_map(&fm, &spec).unwrap();
        for t in [0.0, 1.5, 20.0, 40.0] {
            assert!((map.x_map.eval(t) - (t + 7.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_render_is_bit_exact() {
        let src = textured(43, 29);
        let spec = UniformMeshSpec::<f64>::new(43, 29, 7, 4).unwrap();
        let map = build_warp_map(&build_uniform_mesh(&spec), &spec).unwrap();
        assert_eq!(render(&src, &map, (43, 29)).unwrap(), src);
    }

    #[test]
    fn integer_crop_render_is_sub_image() {
        let src = textured(60, 20);
        let spec = UniformMeshSpec::<f64>::new(60, 20, 6, 2).unwrap();
        let fm = merge_crop_into_mesh(
            &build_uniform_mesh(&spec),
            &CropSplit {
                left: 13,
                right: 5,
                removed_mass: 0.0,
            },
        )
        .unwrap();
        let map = build_separable_map(&fm, &spec).unwrap();
        let out = render(&src, &map, (42, 20)).unwrap();
        let expect = image::imageops::crop_imm(&src, 13, 0, 42, 20).to_image();
        assert_eq!(out, expect);
    }

    #[test]
    fn half_width_matches_bilinear_oracle() {
        let src = textured(64, 64);
        let spec = UniformMeshSpec::<f64>::new(64, 64, 1, 1).unwrap();
        let mesh = MeshGrid::new(vec![32.0], vec![64.0]).unwrap();
        let out = render(&src, &build_warp_map(&mesh, &spec).unwrap(), (32, 64)).unwrap();
        for y in 0..64 {
            for x in 0..32u32 {
                // Center x + 0.5 maps to 2x + 1, i.e. continuous pixel 2x + 0.5.
                let a = src.get_pixel(2 * x, y);
                let b = src.get_pixel(2 * x + 1, y);
                for c in 0..3 {
                    let expect = 0.5 * a[c] as f64 + 0.5 * b[c] as f64;
                    let got = out.get_pixel(x, y)[c] as f64;
                    assert!((got - expect).abs() <= 1.0, "({x},{y}) ch{c}");
                }
            }
        }
    }

    #[test]
    fn render_rejects_uncovered_target() {
        let src = textured(10, 10);
        let map = SeparableMap::<f64>::identity(10, 10);
        assert!(render(&src, &map, (12, 10)).is_err());
    }

    #[test]
    fn compose_and_inverse() {
        let a = PiecewiseLinear::<f64>::new(vec![0.0, 2.0, 10.0], vec![0.0, 6.0, 10.0]).unwrap();
        let b = PiecewiseLinear::<f64>::new(vec![0.0, 5.0, 10.0], vec![0.0, 3.0, 10.0]).unwrap();
        let c = a.compose(&b);
        for t in [0.0f64, 1.0, 2.5, 4.0, 5.0, 7.5, 10.0] {
            assert!((c.eval(t) - a.eval(b.eval(t))).abs() < 1e-12);
        }
        let inv = a.inverse();
        for t in [0.0f64, 1.0, 6.0, 8.0] {
            assert!((a.eval(inv.eval(t)) - t).abs() < 1e-12);
        }
        assert!(PiecewiseLinear::new(vec![0.0, 1.0, 1.0], vec![0.0, 1.0, 2.0]).is_err());
    }

    fn arb_widths(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.3f64..3.0, n)
    }

    proptest! {
        #[test]
        fn render_is_transpose_symmetric(
            cols in arb_widths(4),
            rows in arb_widths(3),
        ) {
            let src = textured(24, 18);
            let spec = UniformMeshSpec::<f64>::new(24, 18, 4, 3).unwrap();
            // Rescale to whole-pixel totals.
            let sw: f64 = cols.iter().sum();
            let sh: f64 = rows.iter().sum();
            let cols: Vec<f64> = cols.iter().map(|c| c * 15.0 / sw).collect();
            let rows: Vec<f64> = rows.iter().map(|r| r * 21.0 / sh).collect();
            let mesh = MeshGrid::new(cols, rows).unwrap();
            let map = build_warp_map(&mesh, &spec).unwrap();
            let direct = render(&src, &map, (15, 21)).unwrap();
            let via_t = render(&transpose_image(&src), &map.transpose(), (21, 15)).unwrap();
            prop_assert_eq!(transpose_image(&via_t), direct.clone());

            // Convex combination: never leaves the source range.
            for c in 0..3 {
                let lo = src.pixels().map(|p| p[c]).min().unwrap();
                let hi = src.pixels().map(|p| p[c]).max().unwrap();
                prop_assert!(direct.pixels().all(|p| p[c] >= lo && p[c] <= hi));
            }
        }
    }
}
