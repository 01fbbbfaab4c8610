//! Layered settings: command line, then `RETARGET_*` environment variables,
//! then an optional JSON file, then the engine defaults.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use warpcrop::{ImportanceSource, RetargetConfig};

/// One layer of settings. Every field is optional so layers can be merged
/// field by field. The JSON file uses the flag names (`dt`, `grid`, ...).
#[derive(Debug, Default, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub width: Option<u32>,
    pub factor: Option<f64>,
    pub height: Option<u32>,
    pub dt: Option<f64>,
    pub omega0: Option<f64>,
    pub grid: Option<String>,
    pub importance: Option<PathBuf>,
    pub mask: Option<PathBuf>,
    pub coverage_threshold: Option<f64>,
    pub allow_scale_fallback: Option<bool>,
    pub dump_mesh: Option<PathBuf>,
    pub dump_importance: Option<PathBuf>,
    pub curve: Option<usize>,
}

/// Everything needed for one run, after merging.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub input: PathBuf,
    pub output: PathBuf,
    pub config: RetargetConfig,
    pub dump_mesh: Option<PathBuf>,
    pub dump_importance: Option<PathBuf>,
    pub curve: Option<usize>,
}

fn env_var<T: FromStr>(
    lookup: &impl Fn(&str) -> Option<String>,
    name: &str,
) -> Result<Option<T>, String> {
    let key = format!("RETARGET_{name}");
    match lookup(&key) {
        None => Ok(None),
        Some(raw) if raw.trim().is_empty() => Ok(None),
        Some(raw) => raw
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| format!("cannot parse {key}={raw:?}")),
    }
}

impl Settings {
    pub fn from_env(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, String> {
        Ok(Settings {
            input: env_var(&lookup, "INPUT")?,
            output: env_var(&lookup, "OUTPUT")?,
            width: env_var(&lookup, "WIDTH")?,
            factor: env_var(&lookup, "FACTOR")?,
            height: env_var(&lookup, "HEIGHT")?,
            dt: env_var(&lookup, "DT")?,
            omega0: env_var(&lookup, "OMEGA0")?,
            grid: env_var(&lookup, "GRID")?,
            importance: env_var(&lookup, "IMPORTANCE")?,
            mask: env_var(&lookup, "MASK")?,
            coverage_threshold: env_var(&lookup, "COVERAGE_THRESHOLD")?,
            allow_scale_fallback: env_var(&lookup, "ALLOW_SCALE_FALLBACK")?,
            dump_mesh: env_var(&lookup, "DUMP_MESH")?,
            dump_importance: env_var(&lookup, "DUMP_IMPORTANCE")?,
            curve: env_var(&lookup, "CURVE")?,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("bad config file {}: {e}", path.display()))
    }

    /// Fills every unset field of `self` from `lower`. Width and factor are
    /// one choice: a layer that names either hides both in lower layers.
    pub fn over(self, lower: Settings) -> Settings {
        let size_set = self.width.is_some() || self.factor.is_some();
        Settings {
            input: self.input.or(lower.input),
            output: self.output.or(lower.output),
            width: if size_set { self.width } else { lower.width },
            factor: if size_set { self.factor } else { lower.factor },
            height: self.height.or(lower.height),
            dt: self.dt.or(lower.dt),
            omega0: self.omega0.or(lower.omega0),
            grid: self.grid.or(lower.grid),
            importance: self.importance.or(lower.importance),
            mask: self.mask.or(lower.mask),
            coverage_threshold: self.coverage_threshold.or(lower.coverage_threshold),
            allow_scale_fallback: self.allow_scale_fallback.or(lower.allow_scale_fallback),
            dump_mesh: self.dump_mesh.or(lower.dump_mesh),
            dump_importance: self.dump_importance.or(lower.dump_importance),
            curve: self.curve.or(lower.curve),
        }
    }

    pub fn resolve(self) -> Result<Resolved, String> {
        let input = self.input.ok_or("no input image given (--input)")?;
        let output = self.output.ok_or("no output path given (--output)")?;
        if self.width.is_none() && self.factor.is_none() {
            return Err("give a target with --width or --factor".into());
        }
        if self.width.is_some() && self.factor.is_some() {
            return Err("--width and --factor are mutually exclusive".into());
        }

        let mut config = RetargetConfig {
            target_width: self.width,
            factor: self.factor,
            target_height: self.height,
            ..RetargetConfig::default()
        };
        if let Some(dt) = self.dt {
            config.d_threshold = dt;
        }
        if let Some(omega0) = self.omega0 {
            config.omega0 = omega0;
        }
        if let Some(grid) = &self.grid {
            (config.grid_cols, config.grid_rows) = parse_grid(grid)?;
        }
        if let Some(t) = self.coverage_threshold {
            config.coverage_threshold = t;
        }
        config.allow_scale_fallback = self.allow_scale_fallback.unwrap_or(false);
        config.importance_source = match (self.mask, self.importance) {
            (Some(mask), saliency) => ImportanceSource::Combined { mask, saliency },
            (None, Some(path)) => ImportanceSource::External(path),
            (None, None) => ImportanceSource::Fallback,
        };
        config.validate().map_err(|e| e.to_string())?;
        if self.curve.is_some_and(|n| n < 2) {
            return Err("--curve needs at least 2 samples".into());
        }

        Ok(Resolved {
            input,
            output,
            config,
            dump_mesh: self.dump_mesh,
            dump_importance: self.dump_importance,
            curve: self.curve,
        })
    }
}

/// Parses `CxR`, e.g. `25x25`.
pub fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let bad = || format!("grid must look like 25x25, got {s:?}");
    let (c, r) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
    let cols: usize = c.trim().parse().map_err(|_| bad())?;
    let rows: usize = r.trim().parse().map_err(|_| bad())?;
    if cols == 0 || rows == 0 {
        return Err(bad());
    }
    Ok((cols, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Settings {
        Settings {
            input: Some("in.png".into()),
            output: Some("out.png".into()),
            factor: Some(0.5),
            ..Settings::default()
        }
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("25x25"), Ok((25, 25)));
        assert_eq!(parse_grid(" 8X3 "), Ok((8, 3)));
        for bad in ["25", "0x4", "ax3", "3x", ""] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn higher_layer_wins_field_by_field() {
        let cli = Settings {
            dt: Some(0.3),
            ..Settings::default()
        };
        let file = Settings {
            dt: Some(2.0),
            omega0: Some(4.0),
            ..base()
        };
        let merged = cli.over(file);
        assert_eq!((merged.dt, merged.omega0), (Some(0.3), Some(4.0)));
    }

    #[test]
    fn width_in_a_higher_layer_hides_a_lower_factor() {
        let cli = Settings {
            width: Some(100),
            ..Settings::default()
        };
        let r = cli.over(base()).resolve().unwrap();
        assert_eq!((r.config.target_width, r.config.factor), (Some(100), None));
    }

    #[test]
    fn env_layer_parses_and_rejects() {
        let vars = |k: &str| match k {
            "RETARGET_DT" => Some("0.25".to_string()),
            "RETARGET_GRID" => Some("10x12".to_string()),
            "RETARGET_ALLOW_SCALE_FALLBACK" => Some("true".to_string()),
            _ => None,
        };
        let s = Settings::from_env(vars).unwrap();
        assert_eq!(s.dt, Some(0.25));
        assert_eq!(s.grid.as_deref(), Some("10x12"));
        assert_eq!(s.allow_scale_fallback, Some(true));
        assert!(Settings::from_env(|k| (k == "RETARGET_WIDTH").then(|| "wide".to_string())).is_err());
    }

    #[test]
    fn importance_flags_select_the_source() {
        let r = Settings {
            mask: Some("m.png".into()),
            ..base()
        }
        .resolve()
        .unwrap();
        assert_eq!(
            r.config.importance_source,
            ImportanceSource::Combined {
                mask: "m.png".into(),
                saliency: None
            }
        );
        let r = Settings {
            importance: Some("s.png".into()),
            ..base()
        }
        .resolve()
        .unwrap();
        assert_eq!(r.config.importance_source, ImportanceSource::External("s.png".into()));
    }

    #[test]
    fn resolve_reports_missing_and_conflicting_targets() {
        let no_target = Settings {
            factor: None,
            ..base()
        };
        assert!(no_target.resolve().is_err());
        let both = Settings {
            width: Some(10),
            ..base()
        };
        assert!(both.resolve().is_err());
        let bad_dt = Settings {
            dt: Some(-1.0),
            ..base()
        };
        assert!(bad_dt.resolve().is_err());
    }

    #[test]
    fn file_uses_flag_names() {
        let s: Settings = serde_json::from_str(r#"{"factor": 0.6, "dt": 0.5, "grid": "5x5", "allow-scale-fallback": true}"#).unwrap();
        assert_eq!((s.factor, s.dt, s.allow_scale_fallback), (Some(0.6), Some(0.5), Some(true)));
        assert!(serde_json::from_str::<Settings>(r#"{"dtt": 1}"#).is_err());
    }
}
