//! Content-aware cropping of the remaining width deficit, and merging the
//! crop into the warp mesh so rendering happens in a single pass.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::importance::ColumnProfile;
use crate::mesh::MeshGrid;
use crate::scalar::Scalar;

/// Columns removed from each side of the intermediate image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropSplit<T> {
    pub left: u32,
    pub right: u32,
    pub removed_mass: T,
}

impl<T: Scalar> CropSplit<T> {
    pub fn none() -> Self {
        Self {
            left: 0,
            right: 0,
            removed_mass: T::zero(),
        }
    }

    pub fn deficit(&self) -> u32 {
        self.left + self.right
    }
}

/// Among all `left + right = deficit`, the split removing the least profile
/// mass. Ties prefer the most balanced split, then the smaller left crop.
pub fn optimal_crop_split<T: Scalar>(profile: &ColumnProfile<T>, deficit: u32) -> Result<CropSplit<T>> {
    let n = profile.len();
    let d = deficit as usize;
    if d > n {
        return Err(Error::input(format!(
            "crop deficit {deficit} exceeds profile length {n}"
        )));
    }
    let mut best = CropSplit::none();
    let mut best_key: Option<(T, u32)> = None;
    for left in 0..=d {
        let right = d - left;
        let mass = profile.range(0, left) + profile.range(n - right, n);
        let imbalance = (left as i64 - right as i64).unsigned_abs() as u32;
        // Iterating left upward means an equal (mass, imbalance) keeps the smaller left.
        let better = match best_key {
            None => true,
            Some((m, imb)) => mass < m || (mass == m && imbalance < imb),
        };
        if better {
            best_key = Some((mass, imbalance));
            best = CropSplit {
                left: left as u32,
                right: right as u32,
                removed_mass: mass,
            };
        }
    }
    Ok(best)
}

/// The final mesh over the target: the intermediate mesh clipped to
/// `[left, width - right]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalMesh<T> {
    pub mesh: MeshGrid<T>,
    pub x_offset: T,
    pub source_mesh: MeshGrid<T>,
}

pub fn merge_crop_into_mesh<T: Scalar>(intermediate: &MeshGrid<T>, split: &CropSplit<T>) -> Result<FinalMesh<T>> {
    let total = intermediate.total_width();
    let start = T::from_u32(split.left).unwrap();
    let end = total - T::from_u32(split.right).unwrap();
    if end <= start {
        return Err(Error::input(format!(
            "crop of {} columns leaves nothing of width {total}",
            split.deficit()
        )));
    }
    let sliver = T::lit(1e-9);
    let widths: Vec<T> = intermediate
        .col_edges()
        .windows(2)
        .filter_map(|e| {
            let kept = e[1].min(end) - e[0].max(start);
            (kept > sliver).then_some(kept)
        })
        .collect();
    Ok(FinalMesh {
        mesh: MeshGrid::new(widths, intermediate.row_heights().to_vec())?,
        x_offset: start,
        source_mesh: intermediate.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn profile(v: &[f64]) -> ColumnProfile<f64> {
        ColumnProfile::new(v.to_vec()).unwrap()
    }

    /// Direct summation over every split; same tie rule.
    fn brute_force(weights: &[f64], deficit: usize) -> (usize, usize, f64) {
        let n = weights.len();
        let mut best: Option<(usize, usize, f64)> = None;
        for l in 0..=deficit {
            let r = deficit - l;
            let mass: f64 = weights[..l].iter().sum::<f64>() + weights[n - r..].iter().sum::<f64>();
            let key = |l: usize, r: usize| (l as i64 - r as i64).abs();
            best = match best {
                Some((bl, br, bm)) if bm < mass || (bm == mass && key(bl, br) <= key(l, r)) => Some((bl, br, bm)),
                _ => Some((l, r, mass)),
            };
        }
        best.unwrap()
    }

    #[test]
    fn zero_deficit() {
        let s = optimal_crop_split(&profile(&[1.0, 2.0]), 0).unwrap();
        assert_eq!((s.left, s.right, s.removed_mass), (0, 0, 0.0));
    }

    #[test]
    fn balanced_tie_break() {
        let s = optimal_crop_split(&profile(&[0.0, 0.0, 5.0, 5.0, 0.0, 0.0]), 2).unwrap();
        assert_eq!((s.left, s.right, s.removed_mass), (1, 1, 0.0));
    }

    #[test]
    fn tie_then_smaller_left() {
        // (1,2) and (2,1) both remove 0 and are equally unbalanced.
        let s = optimal_crop_split(&profile(&[0.0, 0.0, 9.0, 0.0, 0.0]), 3).unwrap();
        assert_eq!((s.left, s.right), (1, 2));
    }

    #[test]
    fn heavy_left_edge_crops_right() {
        let s = optimal_crop_split(&profile(&[9.0, 1.0, 1.0, 1.0, 1.0, 0.0]), 2).unwrap();
        assert_eq!((s.left, s.right, s.removed_mass), (0, 2, 1.0));
    }

    #[test]
    fn deficit_beyond_profile() {
        assert!(optimal_crop_split(&profile(&[1.0, 2.0]), 3).is_err());
        let s = optimal_crop_split(&profile(&[1.0, 2.0]), 2).unwrap();
        assert_eq!(s.removed_mass, 3.0);
    }

    #[test]
    fn merge_noop() {
        let m = MeshGrid::new(vec![10.0, 10.0, 10.0], vec![5.0]).unwrap();
        let f = merge_crop_into_mesh(&m, &CropSplit::none()).unwrap();
        assert_eq!(f.mesh, m);
        assert_eq!(f.x_offset, 0.0);
    }

    #[test]
    fn merge_drops_whole_column() {
        let m = MeshGrid::new(vec![10.0, 10.0, 10.0], vec![5.0]).unwrap();
        let split = CropSplit {
            left: 10,
            right: 0,
            removed_mass: 0.0,
        };
        let f = merge_crop_into_mesh(&m, &split).unwrap();
        assert_eq!(f.mesh.col_widths(), &[10.0, 10.0]);
        assert_eq!(f.x_offset, 10.0);
    }

    #[test]
    fn merge_clips_boundary_columns() {
        let m = MeshGrid::new(vec![10.0, 10.0, 10.0], vec![5.0, 2.0]).unwrap();
        let split = CropSplit {
            left: 5,
            right: 7,
            removed_mass: 0.0,
        };
        let f = merge_crop_into_mesh(&m, &split).unwrap();
        // Interval intersection oracle: [0,10)∩[5,23) = 5, [10,20) = 10, [20,30)∩ = 3.
        assert_eq!(f.mesh.col_widths(), &[5.0, 10.0, 3.0]);
        assert_eq!(f.x_offset, 5.0);
        assert_eq!(f.mesh.row_heights(), m.row_heights());
    }

    #[test]
    fn merge_rejects_total_crop() {
        let m = MeshGrid::new(vec![10.0], vec![5.0]).unwrap();
        let split = CropSplit {
            left: 6,
            right: 4,
            removed_mass: 0.0,
        };
        assert!(merge_crop_into_mesh(&m, &split).is_err());
    }

    proptest! {
        #[test]
        fn split_matches_brute_force_on_integer_profiles(
            weights in prop::collection::vec(0u8..6, 1..40),
            frac in 0.0f64..=1.0,
        ) {
            let w: Vec<f64> = weights.iter().map(|&v| v as f64).collect();
            let d = (frac * w.len() as f64).floor() as usize;
            let s = optimal_crop_split(&profile(&w), d as u32).unwrap();
            let (l, r, m) = brute_force(&w, d);
            prop_assert_eq!((s.left as usize, s.right as usize), (l, r));
            prop_assert_eq!(s.removed_mass, m);

            // Never worse than the three trivial splits.
            let p = profile(&w);
            let n = w.len();
            for (a, b) in [(d, 0), (0, d), (d / 2, d - d / 2)] {
                prop_assert!(s.removed_mass <= p.range(0, a) + p.range(n - b, n));
            }
        }

        #[test]
        fn removed_mass_monotone_in_deficit(weights in prop::collection::vec(0.0f64..10.0, 1..30)) {
            let p = profile(&weights);
            let mut prev = 0.0;
            for d in 0..=weights.len() {
                let m = optimal_crop_split(&p, d as u32).unwrap().removed_mass;
                prop_assert!(m + 1e-9 >= prev);
                prev = m;
            }
        }

        #[test]
        fn merge_preserves_width(
            widths in prop::collection::vec(0.5f64..20.0, 1..10),
            lf in 0.0f64..0.45,
            rf in 0.0f64..0.45,
        ) {
            let total: f64 = widths.iter().sum();
            let left = (lf * total).floor() as u32;
            let right = (rf * total).floor() as u32;
            let m = MeshGrid::new(widths, vec![3.0, 4.0]).unwrap();
            let f = merge_crop_into_mesh(&m, &CropSplit { left, right, removed_mass: 0.0 }).unwrap();
            prop_assert!((f.mesh.total_width() + (left + right) as f64 - total).abs() < 1e-9);
            prop_assert_eq!(f.mesh.row_heights(), m.row_heights());
        }
    }
}
