//! Classical spectral-residual saliency, used when no model output is supplied.
//!
//! The image is reduced to a small working raster, the log-amplitude
//! spectrum is compared with its local average, and the residual is
//! transformed back with the original phase. The squared magnitude is
//! smoothed, upsampled and normalised to `[0, 1]`.
//!
//! The detector is evaluated on the image and on its transpose and the two
//! responses are summed, so transposing the input transposes the output
//! exactly.

use image::{ImageBuffer, Pixel};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::importance::ImportanceMap;
use crate::scalar::Scalar;

/// Longer side of the working raster.
const WORKING_SIZE: usize = 64;
/// Gaussian smoothing in working-raster pixels.
const SMOOTHING_SIGMA: f64 = 2.5;
/// Below this spread the raw response is treated as flat.
const FLAT_SPREAD: f64 = 1e-12;

/// Plain row-major f64 raster.
#[derive(Debug, Clone, PartialEq)]
struct Plane {
    w: usize,
    h: usize,
    v: Vec<f64>,
}

impl Plane {
    fn transpose(&self) -> Plane {
        let mut v = Vec::with_capacity(self.v.len());
        for x in 0..self.w {
            for y in 0..self.h {
                v.push(self.v[y * self.w + x]);
            }
        }
        Plane {
            w: self.h,
            h: self.w,
            v,
        }
    }
}

pub fn fallback_saliency<P, T>(image: &ImageBuffer<P, Vec<u8>>) -> Result<ImportanceMap<T>>
where
    P: Pixel<Subpixel = u8>,
    T: Scalar,
{
    let (w, h) = image.dimensions();
    if w == 0 || h == 0 {
        return Err(Error::input("saliency needs a non-empty image"));
    }
    let gray = Plane {
        w: w as usize,
        h: h as usize,
        v: image.pixels().map(|p| p.to_luma()[0] as f64 / 255.0).collect(),
    };
    let direct = response(&gray);
    let swapped = response(&gray.transpose()).transpose();
    let raw: Vec<f64> = direct.v.iter().zip(&swapped.v).map(|(a, b)| a + b).collect();

    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let scores = if hi - lo < FLAT_SPREAD {
        vec![T::lit(0.5); raw.len()]
    } else {
        raw.iter().map(|&v| T::lit(((v - lo) / (hi - lo)).clamp(0.0, 1.0))).collect()
    };
    ImportanceMap::new(w, h, scores)
}

/// Spectral-residual response at full resolution, unnormalised.
fn response(gray: &Plane) -> Plane {
    let scale = WORKING_SIZE as f64 / gray.w.max(gray.h) as f64;
    let (sw, sh) = if scale < 1.0 {
        (
            ((gray.w as f64 * scale).round() as usize).max(1),
            ((gray.h as f64 * scale).round() as usize).max(1),
        )
    } else {
        (gray.w, gray.h)
    };
    let small = box_downsample(gray, sw, sh);
    let sal = gaussian_blur(&spectral_residual(&small), SMOOTHING_SIGMA);
    bilinear_resize(&sal, gray.w, gray.h)
}

fn box_downsample(src: &Plane, w: usize, h: usize) -> Plane {
    if (w, h) == (src.w, src.h) {
        return src.clone();
    }
    let mut sum = vec![0.0; w * h];
    let mut count = vec![0u32; w * h];
    for y in 0..src.h {
        let ty = y * h / src.h;
        for x in 0..src.w {
            let tx = x * w / src.w;
            sum[ty * w + tx] += src.v[y * src.w + x];
            count[ty * w + tx] += 1;
        }
    }
    let v = sum.iter().zip(&count).map(|(s, &c)| s / c.max(1) as f64).collect();
    Plane { w, h, v }
}

fn fft2(data: &mut [Complex<f64>], w: usize, h: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (row, col) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    for line in data.chunks_exact_mut(w) {
        row.process(line);
    }
    let mut column = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            column[y] = data[y * w + x];
        }
        col.process(&mut column);
        for y in 0..h {
            data[y * w + x] = column[y];
        }
    }
}

fn spectral_residual(img: &Plane) -> Plane {
    let (w, h) = (img.w, img.h);
    let n = w * h;
    let (lo, hi) = img
        .v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi - lo < FLAT_SPREAD {
        return Plane { w, h, v: vec![0.0; n] };
    }
    let mean = img.v.iter().sum::<f64>() / n as f64;
    let mut spec: Vec<Complex<f64>> = img.v.iter().map(|&v| Complex::new(v - mean, 0.0)).collect();
    fft2(&mut spec, w, h, false);

    let floor = 1e-12 * n as f64;
    let log_amp: Vec<f64> = spec.iter().map(|c| (c.norm() + floor).ln()).collect();
    // 3x3 mean of the periodic log spectrum.
    let mut avg = vec![0.0; n];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for dy in [h - 1, 0, 1] {
                for dx in [w - 1, 0, 1] {
                    acc += log_amp[((y + dy) % h) * w + (x + dx) % w];
                }
            }
            avg[y * w + x] = acc / 9.0;
        }
    }
    for (k, c) in spec.iter_mut().enumerate() {
        let amp = c.norm();
        *c = if amp > floor {
            Complex::from_polar((log_amp[k] - avg[k]).exp(), c.arg())
        } else {
            Complex::new(0.0, 0.0)
        };
    }
    fft2(&mut spec, w, h, true);
    let norm = 1.0 / n as f64;
    Plane {
        w,
        h,
        v: spec.iter().map(|c| (c * norm).norm_sqr()).collect(),
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

fn blur_rows(p: &Plane, kernel: &[f64]) -> Plane {
    let r = (kernel.len() / 2) as i64;
    let mut v = vec![0.0; p.v.len()];
    for y in 0..p.h {
        let line = &p.v[y * p.w..(y + 1) * p.w];
        for x in 0..p.w {
            let mut acc = 0.0;
            for (k, &wk) in kernel.iter().enumerate() {
                let sx = (x as i64 + k as i64 - r).clamp(0, p.w as i64 - 1) as usize;
                acc += wk * line[sx];
            }
            v[y * p.w + x] = acc;
        }
    }
    Plane { w: p.w, h: p.h, v }
}

fn gaussian_blur(p: &Plane, sigma: f64) -> Plane {
    let kernel = gaussian_kernel(sigma);
    blur_rows(&blur_rows(p, &kernel).transpose(), &kernel).transpose()
}

fn bilinear_resize(src: &Plane, w: usize, h: usize) -> Plane {
    if (w, h) == (src.w, src.h) {
        return src.clone();
    }
    let taps = |s: usize, d: usize| -> Vec<(usize, usize, f64)> {
        let scale = s as f64 / d as f64;
        (0..d)
            .map(|i| {
                let c = ((i as f64 + 0.5) * scale - 0.5).max(0.0);
                let i0 = (c.floor() as usize).min(s - 1);
                let i1 = (i0 + 1).min(s - 1);
                (i0, i1, if i0 == i1 { 0.0 } else { c - i0 as f64 })
            })
            .collect()
    };
    let tx = taps(src.w, w);
    let ty = taps(src.h, h);
    let mut v = Vec::with_capacity(w * h);
    for &(y0, y1, fy) in &ty {
        for &(x0, x1, fx) in &tx {
            let p = |x: usize, y: usize| src.v[y * src.w + x];
            let top = p(x0, y0) + (p(x1, y0) - p(x0, y0)) * fx;
            let bot = p(x0, y1) + (p(x1, y1) - p(x0, y1)) * fx;
            v.push(top + (bot - top) * fy);
        }
    }
    Plane { w, h, v }
}
