//! Flat `key = value` configuration with dotted section keys.
//!
//! ```text
//! seed = 42
//! paths.prices = data/prices.csv
//! walk.p = 2
//! train.dim = 16
//! sweep.dim = 16, 32, 64
//! ```

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sgns::{Architecture, Extraction, TrainConfig, WindowMode};
use crate::walk_gen::WalkParams;

/// Values swept by `sweep`. An empty list means "use the base value".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepGrid {
    pub walk_length: Vec<usize>,
    pub walks_per_node: Vec<usize>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub window: Vec<usize>,
    pub dim: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub prices: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub graph: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub embedding: Option<PathBuf>,
    pub out: PathBuf,
    /// `seed` is ignored; walk seeds derive from the master seed.
    pub walk: WalkParams,
    /// `seed` is ignored; training seeds derive from the master seed.
    pub train: TrainConfig,
    pub restarts: usize,
    pub grid: SweepGrid,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            prices: None,
            labels: None,
            graph: None,
            corpus: None,
            embedding: None,
            out: PathBuf::from("out"),
            walk: WalkParams::default(),
            train: TrainConfig::default(),
            restarts: 10,
            grid: SweepGrid::default(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad value '{value}' for '{key}'")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn strip_comment(line: &str) -> &str {
    let mut prev_space = true;
    for (i, c) in line.char_indices() {
        if c == '#' && prev_space {
            return &line[..i];
        }
        prev_space = c.is_whitespace();
    }
    line
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text, &path.display().to_string())?;
        Ok(cfg)
    }

    /// Applies every `key = value` line. `#` at the start of a line, or
    /// after whitespace, begins a comment.
    pub fn apply_text(&mut self, text: &str, source: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(
                    source,
                    i + 1,
                    format!("expected 'key = value', found '{line}'"),
                )
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::parse(source, i + 1, e.to_string()))?;
        }
        Ok(())
    }

    /// Applies a `key=value` override as given on the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| {
            Error::InvalidArgument(format!("override '{assignment}' is not key=value"))
        })?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let path = || Some(PathBuf::from(value));
        match key {
            "seed" => self.seed = parse_num(key, value)?,
            "paths.prices" => self.prices = path(),
            "paths.labels" => self.labels = path(),
            "paths.graph" => self.graph = path(),
            "paths.corpus" => self.corpus = path(),
            "paths.embedding" => self.embedding = path(),
            "paths.out" => self.out = PathBuf::from(value),
            "walk.length" => self.walk.walk_length = parse_num(key, value)?,
            "walk.walks_per_node" => self.walk.walks_per_node = parse_num(key, value)?,
            "walk.p" => self.walk.p = parse_num(key, value)?,
            "walk.q" => self.walk.q = parse_num(key, value)?,
            "train.architecture" => {
                self.train.architecture = match value {
                    "skipgram" => Architecture::SkipGram,
                    "cbow" => Architecture::Cbow,
                    _ => {
                        return Err(Error::InvalidArgument(format!(
                            "unknown architecture '{value}'"
                        )))
                    }
                }
            }
            "train.window" => self.train.window = parse_num(key, value)?,
            "train.window_mode" => {
                self.train.window_mode = match value {
                    "dynamic" => WindowMode::Dynamic,
                    "fixed" => WindowMode::Fixed,
                    _ => {
                        return Err(Error::InvalidArgument(format!(
                            "unknown window mode '{value}'"
                        )))
                    }
                }
            }
            "train.dim" => self.train.dim = parse_num(key, value)?,
            "train.epochs" => self.train.epochs = parse_num(key, value)?,
            "train.negatives" => self.train.negatives = parse_num(key, value)?,
            "train.lr_start" => self.train.lr_start = parse_num(key, value)?,
            "train.lr_end" => self.train.lr_end = parse_num(key, value)?,
            "train.extraction" => {
                self.train.extraction = match value {
                    "average" => Extraction::Average,
                    "input_only" => Extraction::InputOnly,
                    _ => {
                        return Err(Error::InvalidArgument(format!(
                            "unknown extraction '{value}'"
                        )))
                    }
                }
            }
            "eval.restarts" => self.restarts = parse_num(key, value)?,
            "sweep.length" => self.grid.walk_length = parse_list(key, value)?,
            "sweep.walks_per_node" => self.grid.walks_per_node = parse_list(key, value)?,
            "sweep.p" => self.grid.p = parse_list(key, value)?,
            "sweep.q" => self.grid.q = parse_list(key, value)?,
            "sweep.window" => self.grid.window = parse_list(key, value)?,
            "sweep.dim" => self.grid.dim = parse_list(key, value)?,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown config key '{key}'"
                )))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.walk.validate()?;
        self.train.validate()?;
        if self.restarts < 1 {
            return Err(Error::InvalidArgument("eval.restarts must be >= 1".into()));
        }
        Ok(())
    }

    /// Every setting that influences artifact contents, in a fixed order.
    /// Paths are left out so relocating inputs or outputs keeps the digest.
    pub fn canonical(&self) -> String {
        let t = &self.train;
        let arch = match t.architecture {
            Architecture::SkipGram => "skipgram",
            Architecture::Cbow => "cbow",
        };
        let mode = match t.window_mode {
            WindowMode::Dynamic => "dynamic",
            WindowMode::Fixed => "fixed",
        };
        let extraction = match t.extraction {
            Extraction::Average => "average",
            Extraction::InputOnly => "input_only",
        };
        let g = &self.grid;
        [
            format!("seed = {}", self.seed),
            format!("walk.length = {}", self.walk.walk_length),
            format!("walk.walks_per_node = {}", self.walk.walks_per_node),
            format!("walk.p = {}", self.walk.p),
            format!("walk.q = {}", self.walk.q),
            format!("train.architecture = {arch}"),
            format!("train.window = {}", t.window),
            format!("train.window_mode = {mode}"),
            format!("train.dim = {}", t.dim),
            format!("train.epochs = {}", t.epochs),
            format!("train.negatives = {}", t.negatives),
            format!("train.lr_start = {}", t.lr_start),
            format!("train.lr_end = {}", t.lr_end),
            format!("train.extraction = {extraction}"),
            format!("eval.restarts = {}", self.restarts),
            format!("sweep.length = {}", join(&g.walk_length)),
            format!("sweep.walks_per_node = {}", join(&g.walks_per_node)),
            format!("sweep.p = {}", join(&g.p)),
            format!("sweep.q = {}", join(&g.q)),
            format!("sweep.window = {}", join(&g.window)),
            format!("sweep.dim = {}", join(&g.dim)),
        ]
        .join("\n")
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical`].
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical().as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// The comment line written at the top of every artifact.
    pub fn provenance(&self) -> String {
        format!(
            "{} {} config={}",
            env!("CARGO_PKG_NAME"),
            env!("CARGO_PKG_VERSION"),
            self.digest()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trailing_comments() {
        let mut cfg = PipelineConfig::default();
        cfg.apply_text("walk.length = 30   # nodes\npaths.prices = a#b.csv\n", "t")
            .unwrap();
        assert_eq!(cfg.walk.walk_length, 30);
        assert_eq!(cfg.prices.as_deref(), Some(Path::new("a#b.csv")));
    }

    #[test]
    fn parses_text_and_overrides() {
        let mut cfg = PipelineConfig::default();
        cfg.apply_text(
            "# comment\nseed = 7\nwalk.p = 0.5\ntrain.architecture = cbow\nsweep.dim = 16, 32\npaths.prices = a.csv\n",
            "cfg",
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.walk.p, 0.5);
        assert_eq!(cfg.train.architecture, Architecture::Cbow);
        assert_eq!(cfg.grid.dim, vec![16, 32]);
        assert_eq!(cfg.prices, Some(PathBuf::from("a.csv")));
        cfg.apply_override("walk.p=3").unwrap();
        assert_eq!(cfg.walk.p, 3.0);
    }

    #[test]
    fn rejects_unknown_keys_and_values() {
        let mut cfg = PipelineConfig::default();
        assert!(cfg.apply_text("walk.z = 1\n", "cfg").is_err());
        assert!(cfg.apply_text("walk.p = fast\n", "cfg").is_err());
        assert!(cfg.apply_text("no equals sign\n", "cfg").is_err());
        assert!(cfg.apply_override("seed").is_err());
    }

    #[test]
    fn digest_ignores_paths_but_not_parameters() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.out = PathBuf::from("elsewhere");
        b.prices = Some(PathBuf::from("p.csv"));
        assert_eq!(a.digest(), b.digest());
        b.walk.q = 0.25;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 16);
    }

    #[test]
    fn canonical_form_reparses_to_same_config() {
        let mut a = PipelineConfig::default();
        a.apply_text(
            "seed = 3\nwalk.q = 0.2\nsweep.p = 0.5,2\ntrain.extraction = input_only\n",
            "x",
        )
        .unwrap();
        let mut b = PipelineConfig::default();
        b.apply_text(&a.canonical(), "canonical").unwrap();
        assert_eq!(a, b);
    }
}
