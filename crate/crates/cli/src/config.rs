//! Run configuration (TOML) and its validation.

use std::fmt;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use divergent_core::corpus::parse_instant;
use divergent_core::hashnet::default_alpha_grid;
use divergent_core::wordshift::WeightBasis;
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Newline-delimited record files; relative paths resolve against the config file.
    pub inputs: Vec<PathBuf>,
    pub anchor_a: String,
    pub anchor_b: String,
    #[serde(default)]
    pub stoplist: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub windows: Vec<WindowSpec>,
    #[serde(default)]
    pub timeseries: TimeseriesConfig,
    #[serde(default)]
    pub shift: ShiftSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub centrality: CentralitySection,
    #[serde(default)]
    pub diversity: DiversitySection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_alpha() -> f64 {
    0.03
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub label: String,
    pub start: String,
    pub end: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeseriesConfig {
    pub bin_hours: i64,
    /// One CSV per anchor instead of a single CSV over both.
    pub per_anchor: bool,
}

impl Default for TimeseriesConfig {
    fn default() -> Self {
        TimeseriesConfig {
            bin_hours: 24,
            per_anchor: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShiftSection {
    pub top_k: usize,
    pub diversity_threshold_bits: f64,
    pub min_occurrences: u64,
    pub weight_basis: WeightBasis,
    pub dominance_fraction: f64,
    /// Anchor drawn on the left of the shift graph.
    pub left: Side,
}

impl Default for ShiftSection {
    fn default() -> Self {
        ShiftSection {
            top_k: 50,
            diversity_threshold_bits: 3.0,
            min_occurrences: 1,
            weight_basis: WeightBasis::Tokens,
            dominance_fraction: 0.5,
            left: Side::A,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    pub alpha_grid: Vec<f64>,
    pub top_k: usize,
    pub size_scale: f64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            alpha_grid: default_alpha_grid(),
            top_k: 10,
            size_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CentralitySection {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CentralitySection {
    fn default() -> Self {
        CentralitySection {
            damping: 0.85,
            tol: 1e-10,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiversitySection {
    pub sample_size: usize,
    pub n_draws: usize,
    /// Period split into calendar months; defaults to the span of all windows.
    pub start: Option<String>,
    pub end: Option<String>,
    pub lexical_excludes_all_hashtags: bool,
    pub exclude_own_anchor: bool,
    /// Months with fewer tweets than `sample_size` are listed in the
    /// manifest as skipped instead of failing the run.
    pub skip_insufficient: bool,
}

impl Default for DiversitySection {
    fn default() -> Self {
        DiversitySection {
            sample_size: 2000,
            n_draws: 1000,
            start: None,
            end: None,
            lexical_excludes_all_hashtags: true,
            exclude_own_anchor: true,
            skip_insufficient: true,
        }
    }
}

/// One validation problem, addressed by its field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// A window with parsed bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub label: String,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Reads a config file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        self.inputs = self.inputs.iter().map(join).collect();
        self.stoplist = self.stoplist.as_ref().map(join);
        self.output_dir = join(&self.output_dir);
    }

    pub fn windows(&self) -> Vec<Window> {
        self.windows
            .iter()
            .filter_map(|w| {
                Some(Window {
                    label: w.label.clone(),
                    start: parse_instant(&w.start).ok()?,
                    end: parse_instant(&w.end).ok()?,
                })
            })
            .collect()
    }

    /// The period split into months by the diversity stage.
    pub fn diversity_period(&self) -> Option<(DateTime<Utc>, DateTime<Utc>)> {
        let windows = self.windows();
        let start = match &self.diversity.start {
            Some(s) => parse_instant(s).ok()?,
            None => windows.iter().map(|w| w.start).min()?,
        };
        let end = match &self.diversity.end {
            Some(s) => parse_instant(s).ok()?,
            None => windows.iter().map(|w| w.end).max()?,
        };
        Some((start, end))
    }

    /// Every problem found, in field order. Empty means valid.
    pub fn validate(&self) -> Vec<Finding> {
        let mut out = Vec::new();
        let mut bad = |path: String, message: String| out.push(Finding { path, message });

        if self.inputs.is_empty() {
            bad("inputs".into(), "at least one input file is required".into());
        }
        for (i, p) in self.inputs.iter().enumerate() {
            if !p.is_file() {
                bad(format!("inputs[{i}]"), format!("file not found: {}", p.display()));
            }
        }
        for (name, anchor) in [("anchor_a", &self.anchor_a), ("anchor_b", &self.anchor_b)] {
            let tag = anchor.trim_start_matches('#');
            if tag.is_empty() || !tag.chars().all(|c| c.is_alphanumeric() || c == '_') {
                bad(name.into(), format!("not a hashtag: {anchor:?}"));
            }
        }
        if normalize_anchor(&self.anchor_a) == normalize_anchor(&self.anchor_b) {
            bad("anchor_b".into(), "must differ from anchor_a".into());
        }
        if let Some(p) = &self.stoplist {
            if !p.is_file() {
                bad("stoplist".into(), format!("file not found: {}", p.display()));
            }
        }
        if !in_open_unit(self.alpha) {
            bad("alpha".into(), format!("must lie in (0, 1), got {}", self.alpha));
        }

        let mut labels = std::collections::BTreeSet::new();
        for (i, w) in self.windows.iter().enumerate() {
            if w.label.is_empty() || !w.label.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
                bad(
                    format!("windows[{i}].label"),
                    format!("use letters, digits, '-', '_' or '.': {:?}", w.label),
                );
            } else if !labels.insert(&w.label) {
                bad(format!("windows[{i}].label"), format!("duplicate label {:?}", w.label));
            }
            let start = parse_instant(&w.start);
            let end = parse_instant(&w.end);
            if let Err(e) = &start {
                bad(format!("windows[{i}].start"), e.to_string());
            }
            if let Err(e) = &end {
                bad(format!("windows[{i}].end"), e.to_string());
            }
            if let (Ok(s), Ok(e)) = (start, end) {
                if s >= e {
                    bad(format!("windows[{i}]"), "start must precede end".into());
                }
            }
        }

        if self.timeseries.bin_hours <= 0 {
            bad("timeseries.bin_hours".into(), "must be positive".into());
        }

        let s = &self.shift;
        if s.top_k == 0 {
            bad("shift.top_k".into(), "must be positive".into());
        }
        if !(s.diversity_threshold_bits >= 0.0 && s.diversity_threshold_bits.is_finite()) {
            bad(
                "shift.diversity_threshold_bits".into(),
                "must be a nonnegative number".into(),
            );
        }
        if !(s.dominance_fraction > 0.0 && s.dominance_fraction <= 1.0) {
            bad("shift.dominance_fraction".into(), "must lie in (0, 1]".into());
        }

        let n = &self.network;
        for (i, a) in n.alpha_grid.iter().enumerate() {
            if !in_open_unit(*a) {
                bad(
                    format!("network.alpha_grid[{i}]"),
                    format!("must lie in (0, 1), got {a}"),
                );
            }
        }
        if n.alpha_grid.windows(2).any(|w| w[0] >= w[1]) {
            bad("network.alpha_grid".into(), "must be strictly ascending".into());
        }
        if n.top_k == 0 {
            bad("network.top_k".into(), "must be positive".into());
        }
        if !(n.size_scale > 0.0 && n.size_scale.is_finite()) {
            bad("network.size_scale".into(), "must be positive".into());
        }

        let c = &self.centrality;
        if !in_open_unit(c.damping) {
            bad(
                "centrality.damping".into(),
                format!("must lie in (0, 1), got {}", c.damping),
            );
        }
        if !(c.tol > 0.0 && c.tol.is_finite()) {
            bad("centrality.tol".into(), "must be positive".into());
        }
        if c.max_iter == 0 {
            bad("centrality.max_iter".into(), "must be positive".into());
        }

        let d = &self.diversity;
        if d.sample_size == 0 {
            bad("diversity.sample_size".into(), "must be positive".into());
        }
        if d.n_draws < 5 {
            bad("diversity.n_draws".into(), "box plots need at least 5 draws".into());
        }
        for (name, value) in [("diversity.start", &d.start), ("diversity.end", &d.end)] {
            if let Some(Err(e)) = value.as_ref().map(|v| parse_instant(v)) {
                bad(name.into(), e.to_string());
            }
        }
        if let (Some(Ok(s)), Some(Ok(e))) = (
            d.start.as_ref().map(|v| parse_instant(v)),
            d.end.as_ref().map(|v| parse_instant(v)),
        ) {
            if s >= e {
                bad("diversity".into(), "start must precede end".into());
            }
        }
        out
    }
}

pub fn normalize_anchor(a: &str) -> String {
    a.trim_start_matches('#').to_lowercase()
}

fn in_open_unit(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(dir: &Path) -> RunConfig {
        let input = dir.join("in.jsonl");
        std::fs::write(&input, "").unwrap();
        let mut cfg = RunConfig::from_toml(
            r##"
            inputs = ["in.jsonl"]
            anchor_a = "rally"
            anchor_b = "#counter"

            [[windows]]
            label = "w1"
            start = "2015-03-01T00:00:00Z"
            end = "2015-04-01T00:00:00Z"
            "##,
        )
        .unwrap();
        cfg.resolve_paths(dir);
        cfg
    }

    #[test]
    fn clean_config_has_no_findings() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = minimal(dir.path());
        assert_eq!(cfg.validate(), vec![]);
        assert_eq!(cfg.alpha, 0.03);
        assert_eq!(cfg.diversity.sample_size, 2000);
        assert_eq!(cfg.network.alpha_grid.len(), 10);
    }

    #[test]
    fn findings_name_fields() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = minimal(dir.path());
        cfg.alpha = 1.5;
        cfg.stoplist = Some(dir.path().join("missing.txt"));
        cfg.windows[0].end = "yesterday".into();
        cfg.centrality.damping = 1.0;
        cfg.diversity.n_draws = 3;
        let paths: Vec<String> = cfg.validate().into_iter().map(|f| f.path).collect();
        assert_eq!(
            paths,
            vec![
                "stoplist",
                "alpha",
                "windows[0].end",
                "centrality.damping",
                "diversity.n_draws"
            ]
        );
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = RunConfig::from_toml("inputs = []\nanchor_a = \"a\"\nanchor_b = \"b\"\nalhpa = 0.1\n").unwrap_err();
        assert!(err.contains("alhpa"));
    }

    #[test]
    fn diversity_period_defaults_to_window_span() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = minimal(dir.path());
        cfg.windows.push(WindowSpec {
            label: "w0".into(),
            start: "2015-01-15T00:00:00Z".into(),
            end: "2015-02-01T00:00:00Z".into(),
        });
        let (s, e) = cfg.diversity_period().unwrap();
        assert_eq!(s, parse_instant("2015-01-15T00:00:00Z").unwrap());
        assert_eq!(e, parse_instant("2015-04-01T00:00:00Z").unwrap());
    }
}
