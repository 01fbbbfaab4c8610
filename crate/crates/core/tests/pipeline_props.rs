use std::sync::OnceLock;

use proptest::prelude::*;
use warpcrop::{fixtures, plan_retarget, AxisPlan, ImportanceMap, PiecewiseLinear, RetargetConfig};

fn importance() -> &'static ImportanceMap<f64> {
    static MAP: OnceLock<ImportanceMap<f64>> = OnceLock::new();
    MAP.get_or_init(|| warpcrop::compute_importance(&fixtures::houses(60, 40), &RetargetConfig::default()).unwrap().0)
}

fn check_map(map: &PiecewiseLinear<f64>, target: u32, source: u32) -> Result<(), TestCaseError> {
    let (d, r) = (map.domain(), map.range());
    prop_assert!((map.domain_end() - target as f64).abs() <= 1e-6, "domain ends at {}", map.domain_end());
    prop_assert!(d.windows(2).all(|p| p[1] > p[0]), "domain not increasing: {d:?}");
    prop_assert!(r.windows(2).all(|p| p[1] > p[0]), "range not increasing: {r:?}");
    prop_assert!(r[0] >= -1e-9 && *r.last().unwrap() <= source as f64 + 1e-9, "range leaves the source: {r:?}");
    Ok(())
}

fn check_axis(p: &AxisPlan, dt: f64) -> Result<(), TestCaseError> {
    prop_assert!(p.distortion <= dt + 1e-9, "D {} > {dt}", p.distortion);
    if p.scale_fallback {
        prop_assert!(p.target_len > p.source_len && p.crop_left + p.crop_right == 0);
    } else {
        let kept = p.intermediate_len - (p.crop_left + p.crop_right) as f64;
        prop_assert!((kept - p.target_len as f64).abs() <= 1e-6, "{p:?}");
    }
    if p.crop_left + p.crop_right > 0 {
        prop_assert!(!p.reached_target);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn plans_hit_the_requested_size_within_budget(
        tw in 1u32..=90,
        th in 1u32..=60,
        dt in prop_oneof![Just(0.0), Just(f64::INFINITY), 0.0f64..3.0],
        omega0 in 0.0f64..2.0,
    ) {
        let config = RetargetConfig {
            d_threshold: dt,
            omega0,
            grid_cols: 8,
            grid_rows: 6,
            allow_scale_fallback: true,
            ..RetargetConfig::with_size(tw, th)
        };
        let (map, plan, _) = plan_retarget(importance(), &config).unwrap();
        prop_assert_eq!((plan.target_width, plan.target_height), (tw, th));
        check_map(&map.x_map, tw, 60)?;
        check_map(&map.y_map, th, 40)?;
        check_axis(&plan.horizontal, dt)?;
        check_axis(&plan.vertical, dt)?;
    }
}
