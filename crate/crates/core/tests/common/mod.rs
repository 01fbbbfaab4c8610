//! Reference implementations used as test oracles. Written directly from the
//! problem statements in pixel units and sharing no code with the library.

#![allow(dead_code, clippy::needless_range_loop)]

/// Warp problem in pixel units: `cols`×`rows` grid over a `sw`×`sh` source,
/// `omega` row-major.
#[derive(Debug, Clone)]
pub struct QpInstance {
    pub sw: f64,
    pub sh: f64,
    pub cols: usize,
    pub rows: usize,
    pub omega: Vec<f64>,
    pub tw: f64,
    pub th: f64,
    pub m: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl QpInstance {
    pub fn w0(&self) -> f64 {
        self.sw / self.cols as f64
    }

    pub fn h0(&self) -> f64 {
        self.sh / self.rows as f64
    }

    /// `Σ (Ω+λ) ŵĥ (w/ŵ − h/ĥ)² + μ Σ (w − fx ŵ)² + μ Σ (h − fy ĥ)²`.
    pub fn energy(&self, w: &[f64], h: &[f64]) -> f64 {
        let (w0, h0) = (self.w0(), self.h0());
        let (fx, fy) = (self.tw / self.sw, self.th / self.sh);
        let mut e = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let d = w[j] / w0 - h[i] / h0;
                e += (self.omega[i * self.cols + j] + self.lambda) * w0 * h0 * d * d;
            }
        }
        e += self.mu * w.iter().map(|&x| (x - fx * w0).powi(2)).sum::<f64>();
        e += self.mu * h.iter().map(|&x| (x - fy * h0).powi(2)).sum::<f64>();
        e
    }

    /// Hessian `Q` and linear term `b` with `E = ½xᵀQx − bᵀx + const`,
    /// variables ordered as all widths then all heights.
    fn quadratic_form(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let n = self.cols + self.rows;
        let (w0, h0) = (self.w0(), self.h0());
        let (fx, fy) = (self.tw / self.sw, self.th / self.sh);
        let mut q = vec![vec![0.0; n]; n];
        let mut b = vec![0.0; n];
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = (self.omega[i * self.cols + j] + self.lambda) * w0 * h0;
                let (wj, hi) = (j, self.cols + i);
                q[wj][wj] += 2.0 * a / (w0 * w0);
                q[hi][hi] += 2.0 * a / (h0 * h0);
                q[wj][hi] -= 2.0 * a / (w0 * h0);
                q[hi][wj] -= 2.0 * a / (w0 * h0);
            }
        }
        for j in 0..self.cols {
            q[j][j] += 2.0 * self.mu;
            b[j] += 2.0 * self.mu * fx * w0;
        }
        for i in 0..self.rows {
            let k = self.cols + i;
            q[k][k] += 2.0 * self.mu;
            b[k] += 2.0 * self.mu * fy * h0;
        }
        (q, b)
    }

    fn lower(&self, k: usize) -> f64 {
        if k < self.cols {
            self.m * self.w0()
        } else {
            self.m * self.h0()
        }
    }

    /// Global minimiser by enumerating every set of variables held at their
    /// lower bound. For each set the equality-constrained problem on the free
    /// variables is solved exactly; the feasible candidate with the lowest
    /// energy is the optimum of the convex problem.
    pub fn solve_by_enumeration(&self) -> Option<(Vec<f64>, Vec<f64>, f64)> {
        let n = self.cols + self.rows;
        let (q, b) = self.quadratic_form();
        let mut best: Option<(Vec<f64>, f64)> = None;
        for mask in 0u32..(1 << n) {
            let fixed = |k: usize| mask & (1 << k) != 0;
            let free: Vec<usize> = (0..n).filter(|&k| !fixed(k)).collect();
            let col_free = free.iter().filter(|&&k| k < self.cols).count();
            let row_free = free.len() - col_free;
            if col_free == 0 || row_free == 0 {
                continue;
            }
            let mut x: Vec<f64> = (0..n).map(|k| self.lower(k)).collect();
            let fixed_cols: f64 = (0..self.cols).filter(|&k| fixed(k)).map(|k| x[k]).sum();
            let fixed_rows: f64 = (self.cols..n).filter(|&k| fixed(k)).map(|k| x[k]).sum();

            // KKT: [Q_FF Aᵀ; A 0] [x_F; ν] = [b_F − Q_FS x_S; rhs].
            let nf = free.len();
            let size = nf + 2;
            let mut kkt = vec![vec![0.0; size]; size];
            let mut rhs = vec![0.0; size];
            for (r, &kr) in free.iter().enumerate() {
                for (c, &kc) in free.iter().enumerate() {
                    kkt[r][c] = q[kr][kc];
                }
                rhs[r] = b[kr] - (0..n).filter(|&k| fixed(k)).map(|k| q[kr][k] * x[k]).sum::<f64>();
                let group = if kr < self.cols { nf } else { nf + 1 };
                kkt[r][group] = 1.0;
                kkt[group][r] = 1.0;
            }
            rhs[nf] = self.tw - fixed_cols;
            rhs[nf + 1] = self.th - fixed_rows;
            let Some(sol) = gauss_jordan(kkt, rhs) else {
                continue;
            };
            for (r, &k) in free.iter().enumerate() {
                x[k] = sol[r];
            }
            if (0..n).any(|k| x[k] < self.lower(k) - 1e-12) {
                continue;
            }
            let e = self.energy(&x[..self.cols], &x[self.cols..]);
            if best.as_ref().is_none_or(|(_, be)| e < *be) {
                best = Some((x, e));
            }
        }
        best.map(|(x, e)| (x[..self.cols].to_vec(), x[self.cols..].to_vec(), e))
    }

    /// True when no feasible move of `step` pixels along a pairwise exchange
    /// direction (one variable up, another of the same group down) lowers the
    /// energy by more than `slack`.
    pub fn is_grid_local_minimum(&self, w: &[f64], h: &[f64], step: f64, slack: f64) -> bool {
        let base = self.energy(w, h);
        let groups = [(0usize, self.cols), (self.cols, self.cols + self.rows)];
        let mut x: Vec<f64> = w.iter().chain(h).copied().collect();
        for &(lo, hi) in &groups {
            for a in lo..hi {
                for c in lo..hi {
                    if a == c {
                        continue;
                    }
                    x[a] += step;
                    x[c] -= step;
                    if x[c] >= self.lower(c) {
                        let e = self.energy(&x[..self.cols], &x[self.cols..]);
                        if e < base - slack {
                            return false;
                        }
                    }
                    x[a] -= step;
                    x[c] += step;
                }
            }
        }
        true
    }
}

/// Dense Gauss-Jordan elimination with full row pivoting.
pub fn gauss_jordan(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let p = a[col][col];
        for k in 0..n {
            a[col][k] /= p;
        }
        b[col] /= p;
        for r in 0..n {
            if r != col && a[r][col] != 0.0 {
                let f = a[r][col];
                for k in 0..n {
                    a[r][k] -= f * a[col][k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some(b)
}

/// Direct per-cell evaluation of the distortion measure.
pub fn distortion_oracle(widths: &[f64], heights: &[f64], w0: f64, h0: f64, omega: &[f64], omega0: f64) -> f64 {
    let total_w: f64 = widths.iter().sum();
    let total_h: f64 = heights.iter().sum();
    let mut acc = 0.0;
    for (i, &h) in heights.iter().enumerate() {
        for (j, &w) in widths.iter().enumerate() {
            let aspect = (h / h0) / (w / w0);
            let bracket = if aspect >= 1.0 { aspect - 1.0 } else { 1.0 / aspect - 1.0 };
            acc += bracket * (w * h) * (omega[i * widths.len() + j] + omega0);
        }
    }
    acc / (total_w * total_h)
}

/// Every split `(l, deficit − l)` scored by direct summation. Ties go to the
/// smaller `|l − r|`, then the smaller `l`.
pub fn crop_oracle(weights: &[f64], deficit: usize) -> (usize, usize, f64) {
    let n = weights.len();
    let mut best = (0, 0, f64::INFINITY);
    for l in 0..=deficit {
        let r = deficit - l;
        let mut mass = 0.0;
        for (x, &w) in weights.iter().enumerate() {
            if x < l || x >= n - r {
                mass += w;
            }
        }
        let key = (l as i64 - r as i64).abs();
        let best_key = (best.0 as i64 - best.1 as i64).abs();
        if mass < best.2 || (mass == best.2 && (key < best_key || (key == best_key && l < best.0))) {
            best = (l, r, mass);
        }
    }
    best
}

/// Plain bilinear resize with pixel-center alignment and edge clamping.
pub fn bilinear_resize_oracle(src: &image::RgbImage, tw: u32, th: u32) -> image::RgbImage {
    let (sw, sh) = src.dimensions();
    image::RgbImage::from_fn(tw, th, |x, y| {
        let sx = ((x as f64 + 0.5) * sw as f64 / tw as f64 - 0.5).clamp(0.0, (sw - 1) as f64);
        let sy = ((y as f64 + 0.5) * sh as f64 / th as f64 - 0.5).clamp(0.0, (sh - 1) as f64);
        let (x0, y0) = (sx.floor() as u32, sy.floor() as u32);
        let (x1, y1) = ((x0 + 1).min(sw - 1), (y0 + 1).min(sh - 1));
        let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
        let mut px = [0u8; 3];
        for (c, out) in px.iter_mut().enumerate() {
            let p = |x: u32, y: u32| src.get_pixel(x, y)[c] as f64;
            let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
            let bot = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
            *out = (top * (1.0 - fy) + bot * fy).round() as u8;
        }
        image::Rgb(px)
    })
}
