//! Area- and importance-weighted aspect-ratio distortion of a warped mesh,
//! and the search for the largest warp whose distortion stays under a threshold.

use crate::error::{Error, Result};
use crate::importance::CellImportance;
use crate::mesh::{MeshGrid, UniformMeshSpec};
use crate::scalar::Scalar;
use crate::warp::{solve_warp_with, WarpParams, WarpSolution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionParams<T> {
    /// Background penalty added to every cell's importance.
    pub omega0: T,
    /// Largest admissible distortion. May be `+inf`.
    pub d_threshold: T,
    /// Stop bisecting once the factor bracket is this narrow.
    pub bisection_tol: T,
    pub max_bisection_iters: usize,
}

impl<T: Scalar> Default for DistortionParams<T> {
    fn default() -> Self {
        Self {
            omega0: T::one(),
            d_threshold: T::one(),
            bisection_tol: T::lit(1e-3),
            max_bisection_iters: 30,
        }
    }
}

impl<T: Scalar> DistortionParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 >= T::zero()) || self.omega0.is_infinite() {
            return Err(Error::input("omega0 must be finite and non-negative"));
        }
        if !(self.d_threshold >= T::zero()) {
            return Err(Error::input("distortion threshold must be non-negative"));
        }
        if !(self.bisection_tol > T::zero()) {
            return Err(Error::input("bisection tolerance must be positive"));
        }
        Ok(())
    }
}

/// Mean departure of the cells from their original aspect ratio, weighted
/// by warped cell area and by `Ω + Ω₀`:
///
/// `D = (1/A) Σ [max(h', w') / min(h', w') − 1] · h · w · (Ω + Ω₀)`
///
/// with `h' = h/h₀`, `w' = w/w₀` and `A` the warped image area.
pub fn distortion<T: Scalar>(
    mesh: &MeshGrid<T>,
    spec: &UniformMeshSpec<T>,
    omega: &CellImportance<T>,
    omega0: T,
) -> Result<T> {
    if !spec.matches(mesh) || omega.grid_cols() != mesh.grid_cols() || omega.grid_rows() != mesh.grid_rows() {
        return Err(Error::input("mesh, spec and cell importance grids differ"));
    }
    let positive = |v: &T| *v > T::zero() && v.is_finite();
    if !mesh.col_widths().iter().all(positive) || !mesh.row_heights().iter().all(positive) {
        return Err(Error::input("every mesh cell must have positive width and height"));
    }
    let mut sum = T::zero();
    for (i, &h) in mesh.row_heights().iter().enumerate() {
        let hn = h / spec.cell_h0;
        for (j, &w) in mesh.col_widths().iter().enumerate() {
            let wn = w / spec.cell_w0;
            let ratio = hn.max(wn) / hn.min(wn);
            sum += (ratio - T::one()) * h * w * (omega.get(i, j) + omega0);
        }
    }
    Ok(sum / (mesh.total_width() * mesh.total_height()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarpSearchResult<T> {
    /// Warped width over source width.
    pub factor: T,
    pub solution: WarpSolution<T>,
    pub distortion: T,
    pub reached_target: bool,
    /// Set when the probes contradicted monotonicity and a dense scan picked the factor.
    pub dense_scan: bool,
    /// Every `(factor, D)` evaluated, in evaluation order.
    pub probes: Vec<(T, T)>,
}

impl<T: Scalar> WarpSearchResult<T> {
    pub fn mesh(&self) -> &MeshGrid<T> {
        &self.solution.mesh
    }
}

const DENSE_SCAN_SAMPLES: usize = 64;

/// Solves the warp at the target width and accepts it if `D ≤ D_t`.
/// Otherwise bisects the width factor between the target and 1 for the
/// strongest warp that stays admissible. Heights keep the source height.
///
/// Works for widening too (target above the source width); then the
/// bracket is `[1, f_target]`.
pub fn max_admissible_warp<T: Scalar>(
    spec: &UniformMeshSpec<T>,
    omega: &CellImportance<T>,
    target_width: T,
    params: &DistortionParams<T>,
    warp: &WarpParams<T>,
) -> Result<WarpSearchResult<T>> {
    params.validate()?;
    if !(target_width > T::zero()) || !target_width.is_finite() {
        return Err(Error::input("target width must be positive"));
    }
    let source_w = spec.source_width_t();
    let height = spec.source_height_t();
    let f_target = target_width / source_w;
    let mut probes = Vec::new();

    let probe = |probes: &mut Vec<(T, T)>, f: T, width: T| -> Result<(WarpSolution<T>, T)> {
        let sol = solve_warp_with(spec, omega, width, height, warp).map_err(|e| Error::AtFactor {
            context: "warp solve",
            factor: f.to_f64_lossy(),
            source: Box::new(e),
        })?;
        let d = distortion(&sol.mesh, spec, omega, params.omega0)?;
        probes.push((f, d));
        Ok((sol, d))
    };

    let (sol, d) = probe(&mut probes, f_target, target_width)?;
    if d <= params.d_threshold {
        return Ok(WarpSearchResult {
            factor: f_target,
            solution: sol,
            distortion: d,
            reached_target: true,
            dense_scan: false,
            probes,
        });
    }

    // `inadmissible` always violates the threshold, `admissible` never does.
    let mut inadmissible = f_target;
    let mut admissible = T::one();
    let (mut best, mut best_d) = probe(&mut probes, T::one(), source_w)?;
    let half = T::lit(0.5);
    let mut iters = 0;
    while (admissible - inadmissible).abs() > params.bisection_tol && iters < params.max_bisection_iters {
        iters += 1;
        let mid = (admissible + inadmissible) * half;
        let (sol, d) = probe(&mut probes, mid, mid * source_w)?;
        if d <= params.d_threshold {
            admissible = mid;
            best = sol;
            best_d = d;
        } else {
            inadmissible = mid;
        }
    }

    if is_monotone(&probes) {
        return Ok(WarpSearchResult {
            factor: admissible,
            solution: best,
            distortion: best_d,
            reached_target: false,
            dense_scan: false,
            probes,
        });
    }

    log::warn!("distortion is not monotone in the warp factor on this input; falling back to a dense scan");
    let n = T::from_usize_lossy(DENSE_SCAN_SAMPLES - 1);
    // From the target towards 1; the first admissible sample is the strongest warp.
    for k in 1..DENSE_SCAN_SAMPLES {
        let f = f_target + (T::one() - f_target) * T::from_usize_lossy(k) / n;
        let f = if k == DENSE_SCAN_SAMPLES - 1 { T::one() } else { f };
        let (sol, d) = probe(&mut probes, f, f * source_w)?;
        if d <= params.d_threshold {
            return Ok(WarpSearchResult {
                factor: f,
                solution: sol,
                distortion: d,
                reached_target: false,
                dense_scan: true,
                probes,
            });
        }
    }
    Err(Error::Internal("no admissible warp factor found, not even the identity".into()))
}

/// D must not decrease as the factor moves away from 1.
fn is_monotone<T: Scalar>(probes: &[(T, T)]) -> bool {
    let mut sorted: Vec<(T, T)> = probes.to_vec();
    sorted.sort_by(|a, b| (a.0 - T::one()).abs().partial_cmp(&(b.0 - T::one()).abs()).unwrap());
    let slack = T::lit(1e-9);
    sorted.windows(2).all(|w| w[1].1 + slack >= w[0].1)
}
