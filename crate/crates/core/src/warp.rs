//! Importance-weighted axis-aligned warp.
//!
//! Unknowns are the column widths `w_j` and row heights `h_i` of the mesh.
//! With `ŵ`, `ĥ` the uniform cell size and `a_ij = Ω_ij + λ`, the solver minimises
//!
//! ```text
//! E = Σ_ij a_ij ŵĥ (w_j/ŵ − h_i/ĥ)² + μ Σ_j (w_j − f_x ŵ)² + μ Σ_i (h_i − f_y ĥ)²
//! ```
//!
//! subject to `Σ w_j = target_width`, `Σ h_i = target_height` and the lower
//! bounds `w_j ≥ m ŵ`, `h_i ≥ m ĥ`. The first term asks every cell to scale
//! uniformly, more strongly where it matters; `λ` and `μ` keep the problem
//! strictly convex when whole rows or columns carry no importance.
//!
//! Internally the problem is solved in the dimensionless scale factors
//! `u_j = w_j/ŵ`, `v_i = h_i/ĥ` with the energy divided by `ŵĥ`, by a primal
//! active-set method over the lower bounds.

use crate::error::{Error, Result};
use crate::importance::CellImportance;
use crate::linalg::Dense;
use crate::mesh::{MeshGrid, UniformMeshSpec};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpParams<T> {
    /// Importance floor `λ` added to every cell weight.
    pub lambda: T,
    /// Tether `μ` towards uniform scaling.
    pub mu: T,
    /// Lower bound on each cell's size as a fraction of its uniform size.
    pub min_cell_fraction: T,
    pub max_iterations: usize,
}

impl<T: Scalar> Default for WarpParams<T> {
    fn default() -> Self {
        Self {
            lambda: T::lit(0.01),
            mu: T::lit(1e-3),
            min_cell_fraction: T::lit(0.15),
            max_iterations: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarpSolution<T> {
    pub mesh: MeshGrid<T>,
    /// `E` at the solution, in pixel units.
    pub energy: T,
    pub iterations: usize,
    pub converged: bool,
    /// Energy after each accepted step, starting with the initial point.
    pub energy_trace: Vec<T>,
    /// Largest violation of the optimality conditions on the dimensionless problem.
    pub kkt_residual: T,
}

/// Solves with the default `λ`, `μ` and iteration cap.
pub fn solve_warp<T: Scalar>(
    spec: &UniformMeshSpec<T>,
    omega: &CellImportance<T>,
    target_width: T,
    target_height: T,
    min_cell_fraction: T,
) -> Result<WarpSolution<T>> {
    let params = WarpParams {
        min_cell_fraction,
        ..WarpParams::default()
    };
    solve_warp_with(spec, omega, target_width, target_height, &params)
}

struct Problem<T> {
    cols: usize,
    rows: usize,
    /// `a_ij`, row-major.
    weight: Vec<T>,
    alpha: T,
    beta: T,
    fx: T,
    fy: T,
    lower: T,
}

impl<T: Scalar> Problem<T> {
    fn n(&self) -> usize {
        self.cols + self.rows
    }

    #[inline]
    fn a(&self, i: usize, j: usize) -> T {
        self.weight[i * self.cols + j]
    }

    fn group(&self, k: usize) -> usize {
        usize::from(k >= self.cols)
    }

    fn energy(&self, x: &[T]) -> T {
        let (u, v) = x.split_at(self.cols);
        let mut e = T::zero();
        for (i, &vi) in v.iter().enumerate() {
            for (j, &uj) in u.iter().enumerate() {
                let d = uj - vi;
                e += self.a(i, j) * d * d;
            }
        }
        let tx: T = u.iter().map(|&uj| (uj - self.fx) * (uj - self.fx)).sum();
        let ty: T = v.iter().map(|&vi| (vi - self.fy) * (vi - self.fy)).sum();
        e + self.alpha * tx + self.beta * ty
    }

    /// Evaluated term by term so that a stationary point gives an exactly zero gradient.
    fn gradient(&self, x: &[T]) -> Vec<T> {
        let (u, v) = x.split_at(self.cols);
        let two = T::lit(2.0);
        let mut g = vec![T::zero(); self.n()];
        for (j, &uj) in u.iter().enumerate() {
            let mut acc = T::zero();
            for (i, &vi) in v.iter().enumerate() {
                acc += self.a(i, j) * (uj - vi);
            }
            g[j] = two * (acc + self.alpha * (uj - self.fx));
        }
        for (i, &vi) in v.iter().enumerate() {
            let mut acc = T::zero();
            for (j, &uj) in u.iter().enumerate() {
                acc += self.a(i, j) * (vi - uj);
            }
            g[self.cols + i] = two * (acc + self.beta * (vi - self.fy));
        }
        g
    }

    fn hessian(&self, r: usize, c: usize) -> T {
        let two = T::lit(2.0);
        match (r < self.cols, c < self.cols) {
            (true, true) if r == c => two * ((0..self.rows).map(|i| self.a(i, r)).sum::<T>() + self.alpha),
            (false, false) if r == c => {
                let i = r - self.cols;
                two * ((0..self.cols).map(|j| self.a(i, j)).sum::<T>() + self.beta)
            }
            (true, false) => -two * self.a(c - self.cols, r),
            (false, true) => -two * self.a(r - self.cols, c),
            _ => T::zero(),
        }
    }
}

/// Step on the free variables that minimises the model with the working set
/// held at its bounds, plus the equality multipliers at the stepped point.
struct Step<T> {
    p: Vec<T>,
    nu: [Option<T>; 2],
}

fn equality_step<T: Scalar>(prob: &Problem<T>, g: &[T], fixed: &[bool]) -> Result<Step<T>> {
    let free: Vec<usize> = (0..prob.n()).filter(|&k| !fixed[k]).collect();
    let groups: Vec<usize> = (0..2).filter(|&grp| free.iter().any(|&k| prob.group(k) == grp)).collect();
    let nf = free.len();
    let size = nf + groups.len();
    let mut kkt = Dense::zeros(size);
    let mut rhs = vec![T::zero(); size];
    for (a, &ka) in free.iter().enumerate() {
        for (b, &kb) in free.iter().enumerate() {
            kkt.set(a, b, prob.hessian(ka, kb));
        }
        for (e, &grp) in groups.iter().enumerate() {
            if prob.group(ka) == grp {
                kkt.set(a, nf + e, T::one());
                kkt.set(nf + e, a, T::one());
            }
        }
        rhs[a] = -g[ka];
    }
    if size > 0 && kkt.solve_in_place(&mut rhs).is_none() {
        return Err(Error::Internal("singular KKT system in warp solver".into()));
    }
    let mut p = vec![T::zero(); prob.n()];
    for (a, &k) in free.iter().enumerate() {
        p[k] = rhs[a];
    }
    let mut nu = [None, None];
    for (e, &grp) in groups.iter().enumerate() {
        nu[grp] = Some(-rhs[nf + e]);
    }
    Ok(Step { p, nu })
}

/// Bound multipliers given gradient `g` and equality multipliers. A group
/// with every variable on its bound takes the multiplier that leaves all of
/// its bound multipliers non-negative.
fn bound_multipliers<T: Scalar>(prob: &Problem<T>, g: &[T], fixed: &[bool], nu: [Option<T>; 2]) -> (Vec<T>, [T; 2]) {
    let mut resolved = [T::zero(); 2];
    for (grp, slot) in resolved.iter_mut().enumerate() {
        *slot = nu[grp].unwrap_or_else(|| {
            (0..prob.n())
                .filter(|&k| prob.group(k) == grp && fixed[k])
                .map(|k| g[k])
                .fold(T::infinity(), |m, v| m.min(v))
        });
    }
    let kappa = (0..prob.n())
        .map(|k| if fixed[k] { g[k] - resolved[prob.group(k)] } else { T::zero() })
        .collect();
    (kappa, resolved)
}

pub fn solve_warp_with<T: Scalar>(
    spec: &UniformMeshSpec<T>,
    omega: &CellImportance<T>,
    target_width: T,
    target_height: T,
    params: &WarpParams<T>,
) -> Result<WarpSolution<T>> {
    let (cols, rows) = (spec.grid_cols, spec.grid_rows);
    if omega.grid_cols() != cols || omega.grid_rows() != rows {
        return Err(Error::input(format!(
            "cell importance is {}x{} but mesh grid is {}x{}",
            omega.grid_cols(),
            omega.grid_rows(),
            cols,
            rows
        )));
    }
    if !(target_width > T::zero() && target_height > T::zero()) || !target_width.is_finite() || !target_height.is_finite() {
        return Err(Error::input("target dimensions must be positive"));
    }
    let m = params.min_cell_fraction;
    if !(m > T::zero() && m < T::one()) {
        return Err(Error::input("min_cell_fraction must lie in (0, 1)"));
    }
    let fx = target_width / spec.source_width_t();
    let fy = target_height / spec.source_height_t();
    if fx < m || fy < m {
        return Err(Error::Constraint(format!(
            "target {}x{} is below the minimum cell size {} of the uniform mesh",
            target_width, target_height, m
        )));
    }

    let prob = Problem {
        cols,
        rows,
        weight: omega.values().iter().map(|&o| o + params.lambda).collect(),
        alpha: params.mu * spec.cell_w0 / spec.cell_h0,
        beta: params.mu * spec.cell_h0 / spec.cell_w0,
        fx,
        fy,
        lower: m,
    };
    let n = prob.n();

    // Uniform scaling is feasible and starts with no bound active unless f == m.
    let mut x: Vec<T> = (0..n).map(|k| if k < cols { fx } else { fy }).collect();
    let mut fixed: Vec<bool> = x.iter().map(|&v| v <= m).collect();
    for (xk, &fk) in x.iter_mut().zip(&fixed) {
        if fk {
            *xk = m;
        }
    }

    let tol = T::solver_tol();
    let hscale = (0..n).map(|k| prob.hessian(k, k)).fold(T::one(), |a, b| a.max(b));
    let mut energy_trace = vec![prob.energy(&x)];
    let mut converged = false;
    let mut iterations = 0;
    let mut final_nu = [None, None];

    while iterations < params.max_iterations {
        iterations += 1;
        let g = prob.gradient(&x);
        let step = equality_step(&prob, &g, &fixed)?;
        let pmax = step.p.iter().fold(T::zero(), |a, b| a.max(b.abs()));
        let xmax = x.iter().fold(T::one(), |a, b| a.max(b.abs()));

        if pmax <= tol * xmax {
            let (kappa, _) = bound_multipliers(&prob, &g, &fixed, step.nu);
            let release = (0..n)
                .filter(|&k| fixed[k] && kappa[k] < -tol * hscale)
                .min_by(|&a, &b| kappa[a].partial_cmp(&kappa[b]).unwrap());
            match release {
                Some(k) => fixed[k] = false,
                None => {
                    converged = true;
                    final_nu = step.nu;
                    break;
                }
            }
            continue;
        }

        let mut alpha = T::one();
        let mut blocking = None;
        for k in 0..n {
            if !fixed[k] && step.p[k] < T::zero() {
                let ratio = (m - x[k]) / step.p[k];
                if ratio < alpha {
                    alpha = ratio.max(T::zero());
                    blocking = Some(k);
                }
            }
        }
        for k in 0..n {
            if !fixed[k] {
                x[k] += alpha * step.p[k];
            }
        }
        if let Some(k) = blocking {
            x[k] = m;
            fixed[k] = true;
        }
        // Rounding can leave a variable a hair under its bound.
        for k in 0..n {
            if !fixed[k] && x[k] < m {
                x[k] = m;
                fixed[k] = true;
            }
        }
        energy_trace.push(prob.energy(&x));
    }

    let mesh_of = |x: &[T]| -> Result<MeshGrid<T>> {
        MeshGrid::new(
            x[..cols].iter().map(|&u| u * spec.cell_w0).collect(),
            x[cols..].iter().map(|&v| v * spec.cell_h0).collect(),
        )
    };

    if !converged {
        let best = mesh_of(&x)?;
        return Err(Error::NotConverged {
            iterations,
            best_col_widths: best.col_widths().iter().map(|v| v.to_f64_lossy()).collect(),
            best_row_heights: best.row_heights().iter().map(|v| v.to_f64_lossy()).collect(),
        });
    }

    let g = prob.gradient(&x);
    let kkt_residual = kkt_residual(&prob, &x, &g, &fixed, final_nu);
    let energy = prob.energy(&x) * spec.cell_w0 * spec.cell_h0;
    Ok(WarpSolution {
        mesh: mesh_of(&x)?,
        energy,
        iterations,
        converged,
        energy_trace: energy_trace.into_iter().map(|e| e * spec.cell_w0 * spec.cell_h0).collect(),
        kkt_residual,
    })
}

fn kkt_residual<T: Scalar>(prob: &Problem<T>, x: &[T], g: &[T], fixed: &[bool], nu: [Option<T>; 2]) -> T {
    let (kappa, nu) = bound_multipliers(prob, g, fixed, nu);
    let mut worst = T::zero();
    for k in 0..prob.n() {
        // Stationarity on free variables, dual feasibility and complementarity on bounds.
        let r = if fixed[k] {
            (-kappa[k]).max(T::zero()).max((kappa[k] * (x[k] - prob.lower)).abs())
        } else {
            (g[k] - nu[prob.group(k)]).abs()
        };
        worst = worst.max(r).max(prob.lower - x[k]);
    }
    let su: T = x[..prob.cols].iter().copied().sum();
    let sv: T = x[prob.cols..].iter().copied().sum();
    worst
        .max((su - prob.fx * T::from_usize_lossy(prob.cols)).abs())
        .max((sv - prob.fy * T::from_usize_lossy(prob.rows)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_uniform_mesh;

    fn spec(w: u32, h: u32, c: usize, r: usize) -> UniformMeshSpec<f64> {
        UniformMeshSpec::new(w, h, c, r).unwrap()
    }

    #[test]
    fn identity_target_is_exact() {
        let s = spec(120, 90, 6, 5);
        let omega = CellImportance::new(5, 6, (0..30).map(|k| (k % 7) as f64 / 6.0).collect()).unwrap();
        let sol = solve_warp(&s, &omega, 120.0, 90.0, 0.15).unwrap();
        assert_eq!(sol.mesh, build_uniform_mesh(&s));
        assert_eq!(sol.energy, 0.0);
        assert!(sol.converged);
    }

    #[test]
    fn uniform_importance_shrinks_evenly() {
        let s = spec(100, 50, 5, 4);
        let omega = CellImportance::uniform(4, 5, 0.4).unwrap();
        let sol = solve_warp(&s, &omega, 50.0, 50.0, 0.15).unwrap();
        for &w in sol.mesh.col_widths() {
            assert!((w - 10.0).abs() < 1e-9);
        }
        for &h in sol.mesh.row_heights() {
            assert!((h - 12.5).abs() < 1e-9);
        }
    }

    #[test]
    fn important_column_keeps_width() {
        let s = spec(3, 1, 3, 1);
        let omega = CellImportance::new(1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        let sol = solve_warp(&s, &omega, 1.5, 1.0, 0.15).unwrap();
        let w = sol.mesh.col_widths();
        assert!(w[0] > w[1] && w[0] > w[2]);
        assert!((w.iter().sum::<f64>() - 1.5).abs() < 1e-12);
        assert!(sol.kkt_residual <= 1e-9);
    }

    #[test]
    fn bounds_activate_under_heavy_squeeze() {
        let s = spec(100, 10, 5, 1);
        let omega = CellImportance::new(1, 5, vec![1.0, 1.0, 1.0, 1.0, 0.0]).unwrap();
        let sol = solve_warp(&s, &omega, 40.0, 10.0, 0.3).unwrap();
        let w = sol.mesh.col_widths();
        assert!((w[4] - 6.0).abs() < 1e-12);
        assert!(w.iter().all(|&v| v >= 6.0 - 1e-12));
        assert!(w[..4].iter().all(|&v| (v - 8.5).abs() < 0.1));
        assert!(sol.kkt_residual <= 1e-9);
        for pair in sol.energy_trace.windows(2) {
            assert!(pair[1] <= pair[0] * (1.0 + 1e-12) + 1e-12);
        }
    }

    #[test]
    fn all_columns_on_bound() {
        let s = spec(100, 10, 4, 2);
        let omega = CellImportance::uniform(2, 4, 0.2).unwrap();
        let sol = solve_warp(&s, &omega, 15.0, 10.0, 0.15).unwrap();
        assert!(sol.mesh.col_widths().iter().all(|&w| (w - 3.75).abs() < 1e-12));
    }

    #[test]
    fn infeasible_target() {
        let s = spec(100, 100, 4, 4);
        let omega = CellImportance::uniform(4, 4, 0.0).unwrap();
        assert!(matches!(solve_warp(&s, &omega, 10.0, 100.0, 0.15), Err(Error::Constraint(_))));
        assert!(matches!(solve_warp(&s, &omega, 0.0, 100.0, 0.15), Err(Error::Input(_))));
        let wrong = CellImportance::uniform(3, 4, 0.0).unwrap();
        assert!(matches!(solve_warp(&s, &wrong, 50.0, 100.0, 0.15), Err(Error::Input(_))));
    }

    #[test]
    fn iteration_cap_reports_best_iterate() {
        let s = spec(100, 10, 5, 1);
        let omega = CellImportance::new(1, 5, vec![1.0, 1.0, 1.0, 1.0, 0.0]).unwrap();
        let params = WarpParams {
            min_cell_fraction: 0.3,
            max_iterations: 1,
            ..WarpParams::default()
        };
        match solve_warp_with(&s, &omega, 40.0, 10.0, &params) {
            Err(Error::NotConverged { best_col_widths, .. }) => assert_eq!(best_col_widths.len(), 5),
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn f32_solves() {
        let s = UniformMeshSpec::<f32>::new(80, 60, 4, 3).unwrap();
        let omega = CellImportance::new(3, 4, vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let sol = solve_warp(&s, &omega, 48.0, 60.0, 0.15).unwrap();
        assert!((sol.mesh.total_width() - 48.0).abs() < 1e-3);
        assert!(sol.mesh.col_widths()[1] > sol.mesh.col_widths()[0]);
    }
}
