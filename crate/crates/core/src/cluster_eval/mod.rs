//! Quantitative evaluation: cluster the embedding with K-means and score
//! the clusters against each level of a three-level label taxonomy.

mod kmeans;
mod vmeasure;

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

pub use kmeans::{kmeans, ClusterAssignment, KMeansConfig};
pub use vmeasure::{v_measure, VMeasureReport};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::rng;
use crate::textio::{self, fmt9};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    Sector,
    IndustryGroup,
    IndustrySubgroup,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Sector, Level::IndustryGroup, Level::IndustrySubgroup];

    pub fn name(self) -> &'static str {
        match self {
            Level::Sector => "sector",
            Level::IndustryGroup => "industry_group",
            Level::IndustrySubgroup => "industry_subgroup",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labels {
    pub sector: String,
    pub industry_group: String,
    pub industry_subgroup: String,
}

impl Labels {
    pub fn at(&self, level: Level) -> &str {
        match level {
            Level::Sector => &self.sector,
            Level::IndustryGroup => &self.industry_group,
            Level::IndustrySubgroup => &self.industry_subgroup,
        }
    }
}

/// Ticker to (sector, industry group, industry subgroup).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelTable {
    entries: HashMap<String, Labels>,
}

impl LabelTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, ticker: impl Into<String>, labels: Labels) -> Result<()> {
        let ticker = ticker.into();
        if Level::ALL.iter().any(|&l| labels.at(l).is_empty()) {
            return Err(Error::InvalidData(format!(
                "empty class label for '{ticker}'"
            )));
        }
        if self.entries.contains_key(&ticker) {
            return Err(Error::InvalidData(format!(
                "duplicate label row for '{ticker}'"
            )));
        }
        self.entries.insert(ticker, labels);
        Ok(())
    }

    /// Same class at every level; handy for single-level taxonomies.
    pub fn insert_flat(&mut self, ticker: impl Into<String>, class: &str) -> Result<()> {
        self.insert(
            ticker,
            Labels {
                sector: class.into(),
                industry_group: class.into(),
                industry_subgroup: class.into(),
            },
        )
    }

    pub fn get(&self, ticker: &str) -> Option<&Labels> {
        self.entries.get(ticker)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rows sorted by ticker, in the format [`LabelTable::parse`] reads.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "ticker,sector,industry_group,industry_subgroup")?;
        let mut tickers: Vec<&String> = self.entries.keys().collect();
        tickers.sort();
        for t in tickers {
            let l = &self.entries[t];
            writeln!(
                out,
                "{t},{},{},{}",
                l.sector, l.industry_group, l.industry_subgroup
            )?;
        }
        out.flush()
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = textio::create(path)?;
        self.write_csv(&mut out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(file, &path.display().to_string())
    }

    /// CSV with header `ticker,sector,industry_group,industry_subgroup`.
    pub fn parse<R: Read>(reader: R, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| Error::parse(source, 1, e.to_string()))?
            .clone();
        let expected = ["ticker", "sector", "industry_group", "industry_subgroup"];
        let got: Vec<&str> = header
            .iter()
            .map(|h| h.trim_start_matches('\u{feff}'))
            .collect();
        if got != expected {
            return Err(Error::parse(
                source,
                1,
                format!(
                    "header must be '{}', found '{}'",
                    expected.join(","),
                    got.join(",")
                ),
            ));
        }
        let mut table = Self::new();
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                Error::parse(source, line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let labels = Labels {
                sector: record[1].to_string(),
                industry_group: record[2].to_string(),
                industry_subgroup: record[3].to_string(),
            };
            table
                .insert(&record[0], labels)
                .map_err(|e| Error::parse(source, line, e.to_string()))?;
        }
        Ok(table)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelReport {
    pub level: Level,
    pub k: usize,
    pub scores: VMeasureReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub levels: Vec<LevelReport>,
    /// Mean V-measure across levels.
    pub average: f64,
}

impl EvalReport {
    pub fn v_at(&self, level: Level) -> Option<f64> {
        self.levels
            .iter()
            .find(|l| l.level == level)
            .map(|l| l.scores.v_measure)
    }

    /// `level,K,homogeneity,completeness,v_measure` rows plus an `average` row.
    pub fn write_csv<W: Write>(&self, mut out: W, header: Option<&str>) -> std::io::Result<()> {
        textio::write_header(&mut out, header)?;
        writeln!(out, "level,K,homogeneity,completeness,v_measure")?;
        for l in &self.levels {
            writeln!(
                out,
                "{},{},{},{},{}",
                l.level.name(),
                l.k,
                fmt9(l.scores.homogeneity),
                fmt9(l.scores.completeness),
                fmt9(l.scores.v_measure)
            )?;
        }
        writeln!(out, "average,,,,{}", fmt9(self.average))?;
        out.flush()
    }
}

/// Scores one taxonomy level: K-means with K equal to the number of
/// distinct classes among the embedded tickers, then V-measure at beta 1.
pub fn evaluate_level(
    emb: &EmbeddingMatrix,
    labels: &LabelTable,
    level: Level,
    restarts: usize,
    seed: u64,
) -> Result<LevelReport> {
    let truth: Vec<&str> = emb
        .tokens()
        .iter()
        .map(|t| {
            labels
                .get(t)
                .map(|l| l.at(level))
                .ok_or_else(|| Error::MissingLabel(t.clone()))
        })
        .collect::<Result<_>>()?;
    let k = truth.iter().collect::<BTreeSet<_>>().len();
    let config = KMeansConfig {
        restarts,
        ..KMeansConfig::new(k, seed)
    };
    let clusters = kmeans(emb.data(), emb.dim(), &config)?;
    let scores = v_measure(&truth, &clusters.labels, 1.0)?;
    Ok(LevelReport { level, k, scores })
}

/// Evaluates all three levels; level `i` clusters with seed `(seed, i)`.
pub fn evaluate_embedding(
    emb: &EmbeddingMatrix,
    labels: &LabelTable,
    restarts: usize,
    seed: u64,
) -> Result<EvalReport> {
    let levels = Level::ALL
        .iter()
        .enumerate()
        .map(|(i, &level)| {
            evaluate_level(
                emb,
                labels,
                level,
                restarts,
                rng::derive_seed(seed, &[i as u64]),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let average = levels.iter().map(|l| l.scores.v_measure).sum::<f64>() / levels.len() as f64;
    Ok(EvalReport { levels, average })
}
