//! Lloyd's algorithm with k-means++ seeding and best-of-n restarts.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            restarts: 10,
            max_iter: 300,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    /// Cluster index of each point, `< k`.
    pub labels: Vec<usize>,
    /// `k x dim`, row-major.
    pub centroids: Vec<f64>,
    /// Sum of squared distances to assigned centroids.
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after every assignment step of the winning run.
    pub inertia_trace: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Clusters `n = data.len() / dim` row-major points. Restarts run in
/// parallel with seeds derived from `(seed, restart)`; the lowest-inertia
/// run wins, ties going to the lower restart index.
pub fn kmeans(data: &[f64], dim: usize, config: &KMeansConfig) -> Result<ClusterAssignment> {
    if dim == 0 || !data.len().is_multiple_of(dim) {
        return Err(Error::InvalidArgument(format!(
            "{} values do not form rows of dimension {dim}",
            data.len()
        )));
    }
    let n = data.len() / dim;
    if config.k < 1 || config.k > n {
        return Err(Error::InvalidArgument(format!(
            "k = {} must lie in 1..={n}",
            config.k
        )));
    }
    if config.restarts < 1 || config.max_iter < 1 {
        return Err(Error::InvalidArgument(
            "restarts and max_iter must be >= 1".into(),
        ));
    }
    let runs: Vec<ClusterAssignment> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(config.seed, &[r as u64]);
            lloyd(data, dim, config.k, config.max_iter, &mut rng)
        })
        .collect();
    Ok(runs
        .into_iter()
        .reduce(|best, run| {
            if run.inertia < best.inertia {
                run
            } else {
                best
            }
        })
        .expect("at least one restart"))
}

fn plus_plus<R: Rng>(data: &[f64], dim: usize, k: usize, rng: &mut R) -> Vec<f64> {
    let n = data.len() / dim;
    let row = |i: usize| &data[i * dim..(i + 1) * dim];
    let mut centroids = Vec::with_capacity(k * dim);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    centroids.extend_from_slice(row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(row(i), row(first))).collect();

    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if u < w {
                        break;
                    }
                    u -= w;
                }
            }
            pick.expect("positive total mass")
        } else {
            // Every point coincides with a centroid: take any unused one.
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        centroids.extend_from_slice(row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(row(i), row(pick)));
        }
    }
    centroids
}

fn assign(data: &[f64], dim: usize, centroids: &[f64], labels: &mut [usize]) -> (bool, f64) {
    let k = centroids.len() / dim;
    let mut changed = false;
    let mut inertia = 0.0;
    for (i, label) in labels.iter_mut().enumerate() {
        let p = &data[i * dim..(i + 1) * dim];
        let (best, dist) = (0..k)
            .map(|c| (c, sq_dist(p, &centroids[c * dim..(c + 1) * dim])))
            .fold(
                (0, f64::INFINITY),
                |acc, x| if x.1 < acc.1 { x } else { acc },
            );
        if *label != best {
            *label = best;
            changed = true;
        }
        inertia += dist;
    }
    (changed, inertia)
}

fn lloyd<R: Rng>(
    data: &[f64],
    dim: usize,
    k: usize,
    max_iter: usize,
    rng: &mut R,
) -> ClusterAssignment {
    let n = data.len() / dim;
    let mut centroids = plus_plus(data, dim, k, rng);
    let mut labels = vec![usize::MAX; n];
    let mut trace = Vec::new();
    let mut iterations = 0;

    loop {
        let (changed, inertia) = assign(data, dim, &centroids, &mut labels);
        trace.push(inertia);
        iterations += 1;
        if !changed || iterations >= max_iter {
            break;
        }
        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for (s, x) in sums[c * dim..(c + 1) * dim]
                .iter_mut()
                .zip(&data[i * dim..(i + 1) * dim])
            {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for (dst, s) in centroids[c * dim..(c + 1) * dim]
                    .iter_mut()
                    .zip(&sums[c * dim..(c + 1) * dim])
                {
                    *dst = s / counts[c] as f64;
                }
            }
        }
        // An empty cluster takes over the point farthest from its centroid.
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[labels[i]] > 1)
                .map(|i| {
                    let l = labels[i];
                    (
                        i,
                        sq_dist(
                            &data[i * dim..(i + 1) * dim],
                            &centroids[l * dim..(l + 1) * dim],
                        ),
                    )
                })
                .fold(None, |acc: Option<(usize, f64)>, x| match acc {
                    Some(a) if a.1 >= x.1 => Some(a),
                    _ => Some(x),
                });
            if let Some((i, _)) = far {
                counts[labels[i]] -= 1;
                counts[c] = 1;
                labels[i] = c;
                centroids[c * dim..(c + 1) * dim].copy_from_slice(&data[i * dim..(i + 1) * dim]);
            }
        }
    }

    let inertia = *trace.last().expect("at least one assignment");
    ClusterAssignment {
        labels,
        centroids,
        inertia,
        iterations,
        inertia_trace: trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_separated_groups() {
        let mut data = Vec::new();
        for i in 0..10 {
            let off = (i % 3) as f64 * 0.05;
            data.extend([off, off]);
            data.extend([100.0 + off, 100.0 - off]);
        }
        let out = kmeans(&data, 2, &KMeansConfig::new(2, 1)).unwrap();
        for i in 0..10 {
            assert_eq!(out.labels[2 * i], out.labels[0]);
            assert_eq!(out.labels[2 * i + 1], out.labels[1]);
        }
        assert_ne!(out.labels[0], out.labels[1]);
    }

    #[test]
    fn k_equals_n_has_zero_inertia() {
        let data = [0.0, 1.0, 1.0, 5.0, 2.5, -3.0];
        let out = kmeans(&data, 2, &KMeansConfig::new(3, 4)).unwrap();
        assert_eq!(out.inertia, 0.0);
        let mut l = out.labels.clone();
        l.sort();
        assert_eq!(l, vec![0, 1, 2]);
    }

    #[test]
    fn duplicate_points_with_k_equals_n() {
        let data = [1.0, 1.0, 1.0, 2.0];
        let out = kmeans(&data, 1, &KMeansConfig::new(4, 0)).unwrap();
        assert_eq!(out.inertia, 0.0);
        assert!(out.labels.iter().all(|&l| l < 4));
    }

    #[test]
    fn rejects_bad_k() {
        let data = [0.0, 1.0];
        assert!(kmeans(&data, 1, &KMeansConfig::new(0, 0)).is_err());
        assert!(kmeans(&data, 1, &KMeansConfig::new(3, 0)).is_err());
        assert!(kmeans(&data, 0, &KMeansConfig::new(1, 0)).is_err());
    }

    #[test]
    fn inertia_never_increases() {
        let mut rng = rng::stream(99, &[]);
        for trial in 0..30 {
            let data: Vec<f64> = (0..120).map(|_| rng.random::<f64>()).collect();
            let cfg = KMeansConfig {
                restarts: 1,
                ..KMeansConfig::new(5, trial)
            };
            let out = kmeans(&data, 3, &cfg).unwrap();
            for w in out.inertia_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{:?}", out.inertia_trace);
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let data: Vec<f64> = (0..60).map(|i| ((i * 37) % 17) as f64).collect();
        let a = kmeans(&data, 2, &KMeansConfig::new(4, 8)).unwrap();
        let b = kmeans(&data, 2, &KMeansConfig::new(4, 8)).unwrap();
        assert_eq!(a, b);
    }
}
