use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;

use super::{embed_graph, load_graph, required, save_with, PipelineConfig, StageSeeds, SWEEP_FILE};
use crate::cluster_eval::{evaluate_embedding, EvalReport, LabelTable, Level};
use crate::error::{Error, Result};
use crate::rng;
use crate::sgns::TrainConfig;
use crate::textio::fmt9;
use crate::walk_gen::WalkParams;

const SWEEP_STREAM: u64 = 3;

/// Hyperparameters of one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub p: f64,
    pub q: f64,
    pub window: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    pub point: GridPoint,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Row indices ordered by (average, then sector) V-measure, best first.
    pub by_average: Vec<usize>,
    /// Row indices ordered by (sector, then average) V-measure, best first.
    pub by_sector: Vec<usize>,
}

impl SweepResult {
    pub fn from_rows(rows: Vec<SweepRow>) -> Self {
        let sector = |r: &SweepRow| r.report.v_at(Level::Sector).unwrap_or(0.0);
        let order = |primary: &dyn Fn(&SweepRow) -> f64, secondary: &dyn Fn(&SweepRow) -> f64| {
            let mut idx: Vec<usize> = (0..rows.len()).collect();
            idx.sort_by(|&a, &b| {
                primary(&rows[b])
                    .total_cmp(&primary(&rows[a]))
                    .then(secondary(&rows[b]).total_cmp(&secondary(&rows[a])))
                    .then(a.cmp(&b))
            });
            idx
        };
        let by_average = order(&|r| r.report.average, &sector);
        let by_sector = order(&sector, &|r| r.report.average);
        Self {
            rows,
            by_average,
            by_sector,
        }
    }

    /// The selected point: best by average V-measure, ties to sector.
    pub fn optimum(&self) -> &SweepRow {
        &self.rows[self.by_average[0]]
    }

    /// One row per grid point with both rank columns, then `optimum,<index>`.
    pub fn write_csv<W: Write>(&self, mut out: W, header: Option<&str>) -> std::io::Result<()> {
        crate::textio::write_header(&mut out, header)?;
        writeln!(
            out,
            "index,l,r,p,q,w,dim,sector,industry_group,industry_subgroup,average,rank_average,rank_sector"
        )?;
        let rank = |order: &[usize], i: usize| order.iter().position(|&x| x == i).unwrap() + 1;
        for (i, row) in self.rows.iter().enumerate() {
            let pt = &row.point;
            let v = |l| fmt9(row.report.v_at(l).unwrap_or(f64::NAN));
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                row.index,
                pt.walk_length,
                pt.walks_per_node,
                pt.p,
                pt.q,
                pt.window,
                pt.dim,
                v(Level::Sector),
                v(Level::IndustryGroup),
                v(Level::IndustrySubgroup),
                fmt9(row.report.average),
                rank(&self.by_average, i),
                rank(&self.by_sector, i),
            )?;
        }
        writeln!(out, "optimum,{}", self.optimum().index)?;
        out.flush()
    }
}

fn or_base<T: Copy>(list: &[T], base: T) -> Vec<T> {
    if list.is_empty() {
        vec![base]
    } else {
        list.to_vec()
    }
}

/// Cartesian product of the grid lists, `l` varying slowest and `dim`
/// fastest.
pub fn grid_points(cfg: &PipelineConfig) -> Vec<GridPoint> {
    let g = &cfg.grid;
    let mut points = Vec::new();
    for &walk_length in &or_base(&g.walk_length, cfg.walk.walk_length) {
        for &walks_per_node in &or_base(&g.walks_per_node, cfg.walk.walks_per_node) {
            for &p in &or_base(&g.p, cfg.walk.p) {
                for &q in &or_base(&g.q, cfg.walk.q) {
                    for &window in &or_base(&g.window, cfg.train.window) {
                        for &dim in &or_base(&g.dim, cfg.train.dim) {
                            points.push(GridPoint {
                                walk_length,
                                walks_per_node,
                                p,
                                q,
                                window,
                                dim,
                            });
                        }
                    }
                }
            }
        }
    }
    points
}

/// Seeds of grid point `index`: the stage seeds of master seed
/// `hash(seed, index)`. Adding points never perturbs existing ones.
pub fn point_seeds(master: u64, index: usize) -> StageSeeds {
    StageSeeds::from_master(rng::derive_seed(master, &[SWEEP_STREAM, index as u64]))
}

/// Trains and evaluates every grid point (in parallel on the current rayon
/// pool), then writes `sweep.csv` in grid order.
pub fn cmd_sweep(cfg: &PipelineConfig) -> Result<(SweepResult, PathBuf)> {
    cfg.validate()?;
    let graph = load_graph(cfg)?;
    let labels = LabelTable::load(required(&cfg.labels, "paths.labels")?)?;
    let points = grid_points(cfg);
    let rows = points
        .par_iter()
        .enumerate()
        .map(|(index, &point)| {
            let seeds = point_seeds(cfg.seed, index);
            let walk = WalkParams {
                walks_per_node: point.walks_per_node,
                walk_length: point.walk_length,
                p: point.p,
                q: point.q,
                seed: seeds.walk,
            };
            let train = TrainConfig {
                window: point.window,
                dim: point.dim,
                seed: seeds.train,
                ..cfg.train
            };
            let fail = |e: Error| {
                Error::InvalidArgument(format!("grid point {index} ({point:?}) failed: {e}"))
            };
            let (_, emb) = embed_graph(&graph, &walk, &train).map_err(fail)?;
            let report =
                evaluate_embedding(&emb, &labels, cfg.restarts, seeds.eval).map_err(fail)?;
            Ok(SweepRow {
                index,
                point,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let result = SweepResult::from_rows(rows);
    let path = cfg.out.join(SWEEP_FILE);
    save_with(&path, |w| result.write_csv(w, Some(&cfg.provenance())))?;
    Ok((result, path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster_eval::{LevelReport, VMeasureReport};

    fn row(index: usize, sector: f64, average: f64) -> SweepRow {
        let scores = |v| VMeasureReport {
            homogeneity: v,
            completeness: v,
            v_measure: v,
            beta: 1.0,
        };
        SweepRow {
            index,
            point: GridPoint {
                walk_length: 10,
                walks_per_node: 1,
                p: 1.0,
                q: 1.0,
                window: 2,
                dim: 4,
            },
            report: EvalReport {
                levels: vec![LevelReport {
                    level: Level::Sector,
                    k: 2,
                    scores: scores(sector),
                }],
                average,
            },
        }
    }

    #[test]
    fn ranking_rules() {
        let r = SweepResult::from_rows(vec![
            row(0, 0.3, 0.6),
            row(1, 0.35, 0.63),
            row(2, 0.4, 0.63),
            row(3, 0.5, 0.5),
        ]);
        assert_eq!(r.by_average, vec![2, 1, 0, 3]);
        assert_eq!(r.by_sector, vec![3, 2, 1, 0]);
        assert_eq!(r.optimum().index, 2);
    }

    #[test]
    fn single_point_is_optimal() {
        let r = SweepResult::from_rows(vec![row(0, 0.1, 0.2)]);
        assert_eq!(r.optimum().index, 0);
        let mut buf = Vec::new();
        r.write_csv(&mut buf, None).unwrap();
        assert!(String::from_utf8(buf).unwrap().ends_with("optimum,0\n"));
    }

    #[test]
    fn grid_expansion() {
        let mut cfg = PipelineConfig::default();
        assert_eq!(grid_points(&cfg).len(), 1);
        cfg.grid.p = vec![0.5, 2.0];
        cfg.grid.dim = vec![16, 32, 64];
        let pts = grid_points(&cfg);
        assert_eq!(pts.len(), 6);
        assert_eq!((pts[0].p, pts[0].dim), (0.5, 16));
        assert_eq!((pts[1].p, pts[1].dim), (0.5, 32));
        assert_eq!((pts[5].p, pts[5].dim), (2.0, 64));
        assert_eq!(pts[0].walk_length, cfg.walk.walk_length);
    }

    #[test]
    fn point_seeds_are_index_stable() {
        assert_eq!(point_seeds(5, 3), point_seeds(5, 3));
        assert_ne!(point_seeds(5, 3), point_seeds(5, 4));
    }
}
