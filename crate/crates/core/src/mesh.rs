//! Axis-aligned meshes: a rectangle cut by vertical and horizontal lines,
//! described by its ordered column widths and row heights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Column widths and row heights of an axis-aligned mesh, in pixels.
///
/// Cell `(i, j)` is `row_heights[i]` tall and `col_widths[j]` wide. All entries
/// are strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshGrid<T> {
    col_widths: Vec<T>,
    row_heights: Vec<T>,
}

impl<T: Scalar> MeshGrid<T> {
    pub fn new(col_widths: Vec<T>, row_heights: Vec<T>) -> Result<Self> {
        if col_widths.is_empty() || row_heights.is_empty() {
            return Err(Error::input("mesh needs at least one column and one row"));
        }
        let positive = |v: &T| v.is_finite() && *v > T::zero();
        if !col_widths.iter().all(positive) {
            return Err(Error::input("mesh column widths must be finite and positive"));
        }
        if !row_heights.iter().all(positive) {
            return Err(Error::input("mesh row heights must be finite and positive"));
        }
        Ok(Self {
            col_widths,
            row_heights,
        })
    }

    pub fn col_widths(&self) -> &[T] {
        &self.col_widths
    }

    pub fn row_heights(&self) -> &[T] {
        &self.row_heights
    }

    pub fn grid_cols(&self) -> usize {
        self.col_widths.len()
    }

    pub fn grid_rows(&self) -> usize {
        self.row_heights.len()
    }

    pub fn total_width(&self) -> T {
        self.col_widths.iter().copied().sum()
    }

    pub fn total_height(&self) -> T {
        self.row_heights.iter().copied().sum()
    }

    /// Positions of the vertical mesh lines, `grid_cols + 1` values starting at 0.
    pub fn col_edges(&self) -> Vec<T> {
        edges(&self.col_widths)
    }

    /// Positions of the horizontal mesh lines, `grid_rows + 1` values starting at 0.
    pub fn row_edges(&self) -> Vec<T> {
        edges(&self.row_heights)
    }

    /// Swaps the roles of columns and rows.
    pub fn transpose(&self) -> Self {
        Self {
            col_widths: self.row_heights.clone(),
            row_heights: self.col_widths.clone(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> MeshGrid<U> {
        let conv = |v: &T| U::lit(v.to_f64_lossy());
        MeshGrid {
            col_widths: self.col_widths.iter().map(conv).collect(),
            row_heights: self.row_heights.iter().map(conv).collect(),
        }
    }
}

pub(crate) fn edges<T: Scalar>(sizes: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(sizes.len() + 1);
    let mut acc = T::zero();
    out.push(acc);
    for &s in sizes {
        acc += s;
        out.push(acc);
    }
    out
}

/// The regular mesh laid over the source image before any warping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformMeshSpec<T> {
    pub source_width: u32,
    pub source_height: u32,
    pub grid_cols: usize,
    pub grid_rows: usize,
    pub cell_w0: T,
    pub cell_h0: T,
}

impl<T: Scalar> UniformMeshSpec<T> {
    pub fn new(source_width: u32, source_height: u32, grid_cols: usize, grid_rows: usize) -> Result<Self> {
        if source_width == 0 || source_height == 0 {
            return Err(Error::input("source dimensions must be positive"));
        }
        if grid_cols == 0 || grid_rows == 0 {
            return Err(Error::input("grid needs at least one column and one row"));
        }
        Ok(Self {
            source_width,
            source_height,
            grid_cols,
            grid_rows,
            cell_w0: T::from_u32(source_width).unwrap() / T::from_usize_lossy(grid_cols),
            cell_h0: T::from_u32(source_height).unwrap() / T::from_usize_lossy(grid_rows),
        })
    }

    pub fn source_width_t(&self) -> T {
        T::from_u32(self.source_width).unwrap()
    }

    pub fn source_height_t(&self) -> T {
        T::from_u32(self.source_height).unwrap()
    }

    pub fn transpose(&self) -> Self {
        Self {
            source_width: self.source_height,
            source_height: self.source_width,
            grid_cols: self.grid_rows,
            grid_rows: self.grid_cols,
            cell_w0: self.cell_h0,
            cell_h0: self.cell_w0,
        }
    }

    /// True when `mesh` has this spec's grid shape.
    pub fn matches(&self, mesh: &MeshGrid<T>) -> bool {
        mesh.grid_cols() == self.grid_cols && mesh.grid_rows() == self.grid_rows
    }
}

pub fn build_uniform_mesh<T: Scalar>(spec: &UniformMeshSpec<T>) -> MeshGrid<T> {
    MeshGrid {
        col_widths: vec![spec.cell_w0; spec.grid_cols],
        row_heights: vec![spec.cell_h0; spec.grid_rows],
    }
}

/// JSON form of a solved mesh, used by `--dump-mesh` and the preview service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshDump {
    pub grid_cols: usize,
    pub grid_rows: usize,
    pub col_widths: Vec<f64>,
    pub row_heights: Vec<f64>,
    pub energy: f64,
    pub converged: bool,
}

impl MeshDump {
    pub fn new<T: Scalar>(mesh: &MeshGrid<T>, energy: T, converged: bool) -> Self {
        Self {
            grid_cols: mesh.grid_cols(),
            grid_rows: mesh.grid_rows(),
            col_widths: mesh.col_widths.iter().map(|v| v.to_f64_lossy()).collect(),
            row_heights: mesh.row_heights.iter().map(|v| v.to_f64_lossy()).collect(),
            energy: energy.to_f64_lossy(),
            converged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_mesh_divides_source() {
        let spec = UniformMeshSpec::<f64>::new(100, 80, 4, 4).unwrap();
        let mesh = build_uniform_mesh(&spec);
        assert!(mesh.col_widths().iter().all(|&w| w == 25.0));
        assert!(mesh.row_heights().iter().all(|&h| h == 20.0));
    }

    #[test]
    fn uniform_mesh_large_source() {
        let spec = UniformMeshSpec::<f64>::new(2152, 1534, 25, 25).unwrap();
        let mesh = build_uniform_mesh(&spec);
        for &w in mesh.col_widths() {
            assert!((w - 86.08).abs() < 1e-12);
        }
        for &h in mesh.row_heights() {
            assert!((h - 61.36).abs() < 1e-12);
        }
        assert!((mesh.total_width() - 2152.0).abs() < 1e-6);
        assert!((mesh.total_height() - 1534.0).abs() < 1e-6);
    }

    #[test]
    fn single_cell_mesh() {
        let spec = UniformMeshSpec::<f32>::new(10, 10, 1, 1).unwrap();
        let mesh = build_uniform_mesh(&spec);
        assert_eq!(mesh.col_widths(), &[10.0]);
        assert_eq!(mesh.row_heights(), &[10.0]);
    }

    #[test]
    fn rejects_degenerate_meshes() {
        assert!(MeshGrid::<f64>::new(vec![], vec![1.0]).is_err());
        assert!(MeshGrid::<f64>::new(vec![1.0, 0.0], vec![1.0]).is_err());
        assert!(MeshGrid::<f64>::new(vec![1.0], vec![-2.0]).is_err());
        assert!(UniformMeshSpec::<f64>::new(0, 10, 1, 1).is_err());
        assert!(UniformMeshSpec::<f64>::new(10, 10, 0, 1).is_err());
    }

    #[test]
    fn dump_serializes_expected_keys() {
        let mesh = MeshGrid::new(vec![1.0f64, 2.0], vec![3.0]).unwrap();
        let v = serde_json::to_value(MeshDump::new(&mesh, 0.5, true)).unwrap();
        assert_eq!(v["grid_cols"], 2);
        assert_eq!(v["grid_rows"], 1);
        assert_eq!(v["col_widths"][1], 2.0);
        assert_eq!(v["energy"], 0.5);
        assert_eq!(v["converged"], true);
    }
}
