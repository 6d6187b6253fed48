//! Read-only queries over a trained embedding. Vectors are used as stored;
//! normalization happens inside the cosine computation only.

use std::collections::HashSet;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::textio::{self, fmt9};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn cosine_unchecked(a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    // `+ 0.0` maps -0.0 to +0.0.
    (d / (na * nb)).clamp(-1.0, 1.0) + 0.0
}

/// Normalized dot product. Fails on a dimension mismatch or a zero vector.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 {
        return Err(Error::ZeroVector("first argument".into()));
    }
    if nb == 0.0 {
        return Err(Error::ZeroVector("second argument".into()));
    }
    Ok(cosine_unchecked(a, b, na, nb))
}

/// `(ticker, score)` rows, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityResult {
    pub entries: Vec<(String, f64)>,
}

impl SimilarityResult {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tickers(&self) -> Vec<&str> {
        self.entries.iter().map(|(t, _)| t.as_str()).collect()
    }

    /// `rank,ticker,score` CSV; scores with 3 decimals, or 9 significant
    /// digits when `machine` is set.
    pub fn write_csv<W: Write>(&self, mut out: W, machine: bool) -> std::io::Result<()> {
        writeln!(out, "rank,ticker,score")?;
        for (i, (t, s)) in self.entries.iter().enumerate() {
            let score = if machine { fmt9(*s) } else { format!("{s:.3}") };
            writeln!(out, "{},{},{}", i + 1, t, score)?;
        }
        out.flush()
    }
}

/// Ranks every token not in `exclude` by cosine to `target`; descending
/// score, ties to the lower vocabulary index.
fn rank_against(
    emb: &EmbeddingMatrix,
    target: &[f64],
    exclude: &HashSet<usize>,
    k: usize,
) -> Result<SimilarityResult> {
    let nt = norm(target);
    if nt == 0.0 {
        return Err(Error::ZeroVector("query target".into()));
    }
    let mut scored = Vec::with_capacity(emb.len());
    for i in (0..emb.len()).filter(|i| !exclude.contains(i)) {
        let row = emb.row(i);
        let nr = norm(row);
        if nr == 0.0 {
            return Err(Error::ZeroVector(emb.tokens()[i].clone()));
        }
        scored.push((i, cosine_unchecked(target, row, nt, nr)));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(SimilarityResult {
        entries: scored
            .into_iter()
            .map(|(i, s)| (emb.tokens()[i].clone(), s))
            .collect(),
    })
}

/// The `k` tickers closest to `ticker`, excluding itself.
pub fn most_similar(emb: &EmbeddingMatrix, ticker: &str, k: usize) -> Result<SimilarityResult> {
    let q = emb.index_of(ticker)?;
    if k < 1 || k + 1 > emb.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must lie in 1..={}",
            emb.len().saturating_sub(1)
        )));
    }
    rank_against(emb, emb.row(q), &HashSet::from([q]), k)
}

/// "`a` is to `b` as `c` is to ?": ranks by cosine to `b - a + c`,
/// excluding the three query tickers. Scores are cosines to that offset
/// vector.
pub fn analogy(
    emb: &EmbeddingMatrix,
    a: &str,
    b: &str,
    c: &str,
    k: usize,
) -> Result<SimilarityResult> {
    let (ia, ib, ic) = (emb.index_of(a)?, emb.index_of(b)?, emb.index_of(c)?);
    let exclude = HashSet::from([ia, ib, ic]);
    if k < 1 || k + exclude.len() > emb.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {} candidates",
            emb.len() - exclude.len()
        )));
    }
    let target: Vec<f64> = (0..emb.dim())
        .map(|d| emb.row(ib)[d] - emb.row(ia)[d] + emb.row(ic)[d])
        .collect();
    rank_against(emb, &target, &exclude, k)
}

fn distinct_indices(emb: &EmbeddingMatrix, tickers: &[&str]) -> Result<Vec<usize>> {
    let mut seen = HashSet::new();
    tickers
        .iter()
        .map(|t| {
            let i = emb.index_of(t)?;
            if !seen.insert(i) {
                return Err(Error::InvalidArgument(format!("ticker '{t}' listed twice")));
            }
            Ok(i)
        })
        .collect()
}

/// The member least similar to the mean of the set's vectors; ties go to
/// the lower vocabulary index.
pub fn odd_one_out<'a>(emb: &EmbeddingMatrix, tickers: &[&'a str]) -> Result<&'a str> {
    if tickers.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "odd-one-out needs at least 3 tickers, got {}",
            tickers.len()
        )));
    }
    let idx = distinct_indices(emb, tickers)?;
    let mut mean = vec![0.0; emb.dim()];
    for &i in &idx {
        for (m, v) in mean.iter_mut().zip(emb.row(i)) {
            *m += v;
        }
    }
    let inv = 1.0 / idx.len() as f64;
    mean.iter_mut().for_each(|m| *m *= inv);
    let nm = norm(&mean);
    if nm == 0.0 {
        return Err(Error::ZeroVector("mean of the set".into()));
    }
    let mut best: Option<(usize, usize, f64)> = None;
    for (pos, &i) in idx.iter().enumerate() {
        let nr = norm(emb.row(i));
        if nr == 0.0 {
            return Err(Error::ZeroVector(emb.tokens()[i].clone()));
        }
        let s = cosine_unchecked(&mean, emb.row(i), nm, nr);
        let better = match best {
            None => true,
            Some((_, bi, bs)) => s < bs || (s == bs && i < bi),
        };
        if better {
            best = Some((pos, i, s));
        }
    }
    Ok(tickers[best.expect("non-empty set").0])
}

/// The candidate with the highest cosine to `query`.
pub fn best_match_from_set(
    emb: &EmbeddingMatrix,
    query: &str,
    candidates: &[&str],
) -> Result<(String, f64)> {
    let q = emb.index_of(query)?;
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("candidate set is empty".into()));
    }
    let idx = distinct_indices(emb, candidates)?;
    if idx.contains(&q) {
        return Err(Error::InvalidArgument(format!(
            "query '{query}' is among the candidates"
        )));
    }
    let exclude: HashSet<usize> = (0..emb.len()).filter(|i| !idx.contains(i)).collect();
    let top = rank_against(emb, emb.row(q), &exclude, 1)?;
    Ok(top.entries.into_iter().next().expect("one candidate"))
}

/// Coordinates of every token on the leading principal components.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub tickers: Vec<String>,
    /// `N x components`, row-major.
    pub coords: Vec<f64>,
    pub components: usize,
    /// Sample-covariance eigenvalue of each component, descending.
    pub explained_variance: Vec<f64>,
    /// Unit principal axes, `components x dim`, row-major.
    pub axes: Vec<f64>,
}

impl Projection {
    pub fn coord(&self, i: usize) -> &[f64] {
        &self.coords[i * self.components..(i + 1) * self.components]
    }

    /// `ticker,pc1,pc2,...` CSV with nine significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W, header: Option<&str>) -> std::io::Result<()> {
        textio::write_header(&mut out, header)?;
        write!(out, "ticker")?;
        for c in 0..self.components {
            write!(out, ",pc{}", c + 1)?;
        }
        writeln!(out)?;
        for (i, t) in self.tickers.iter().enumerate() {
            write!(out, "{t}")?;
            for &x in self.coord(i) {
                write!(out, ",{}", fmt9(x))?;
            }
            writeln!(out)?;
        }
        out.flush()
    }
}

/// Projects mean-centered rows onto the top `components` principal axes,
/// the eigenvectors of `XᵀX` (equivalently the right singular vectors of
/// the centered data `X`). Each axis is signed so its largest-magnitude
/// loading is positive.
pub fn pca_project(emb: &EmbeddingMatrix, components: usize) -> Result<Projection> {
    let (n, dim) = (emb.len(), emb.dim());
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "PCA needs at least 2 rows, got {n}"
        )));
    }
    if components < 1 || components > dim {
        return Err(Error::InvalidArgument(format!(
            "components = {components} must lie in 1..={dim}"
        )));
    }
    let x = DMatrix::from_row_slice(n, dim, emb.data());
    let mean = x.row_mean();
    let centered = DMatrix::from_fn(n, dim, |i, j| x[(i, j)] - mean[j]);
    let scatter = centered.transpose() * &centered;
    let eig = SymmetricEigen::new(scatter);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });

    let mut axes = Vec::with_capacity(components * dim);
    let mut explained_variance = Vec::with_capacity(components);
    for &c in order.iter().take(components) {
        let mut axis: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
        let lead = axis
            .iter()
            .copied()
            .enumerate()
            .fold((0, 0.0f64), |acc, (i, v)| {
                if v.abs() > acc.1.abs() {
                    (i, v)
                } else {
                    acc
                }
            });
        if lead.1 < 0.0 {
            axis.iter_mut().for_each(|v| *v = -*v);
        }
        axes.extend(axis);
        explained_variance.push(eig.eigenvalues[c].max(0.0) / (n - 1) as f64);
    }

    let mut coords = Vec::with_capacity(n * components);
    for i in 0..n {
        let row = centered.row(i);
        for c in 0..components {
            let axis = &axes[c * dim..(c + 1) * dim];
            coords.push(row.iter().zip(axis).map(|(a, b)| a * b).sum());
        }
    }
    Ok(Projection {
        tickers: emb.tokens().to_vec(),
        coords,
        components,
        explained_variance,
        axes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(rows: Vec<(&str, Vec<f64>)>) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn orthogonal_ties_ignore_zero_sign() {
        // cos(Q, A) = -0.0 and cos(Q, B) = +0.0 in floating point.
        let e = emb(vec![
            ("Q", vec![0.0, -1.0]),
            ("A", vec![-2.0, 0.0]),
            ("B", vec![1.0, 0.0]),
        ]);
        let r = most_similar(&e, "Q", 2).unwrap();
        assert_eq!(r.tickers(), ["A", "B"]);
        assert!(r.entries[0].1.is_sign_positive());
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine_similarity(&[1.0, 2.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 0.0);
        let s = cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(matches!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroVector(_))
        ));
        assert!(cosine_similarity(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn duplicate_row_is_most_similar() {
        let e = emb(vec![
            ("X", vec![0.3, -1.0, 2.0]),
            ("Z", vec![1.0, 0.0, 0.0]),
            ("Y", vec![0.3, -1.0, 2.0]),
        ]);
        let r = most_similar(&e, "X", 1).unwrap();
        assert_eq!(r.entries[0].0, "Y");
        assert!((r.entries[0].1 - 1.0).abs() < 1e-15);
        assert!(matches!(
            most_similar(&e, "Q", 1),
            Err(Error::UnknownTicker(_))
        ));
        assert!(most_similar(&e, "X", 3).is_err());
    }

    #[test]
    fn ties_go_to_lower_index() {
        let e = emb(vec![
            ("Q", vec![1.0, 0.0]),
            ("B", vec![0.0, 1.0]),
            ("A", vec![0.0, 2.0]),
        ]);
        let r = most_similar(&e, "Q", 2).unwrap();
        assert_eq!(r.tickers(), vec!["B", "A"]);
    }

    #[test]
    fn parallelogram_analogy() {
        let e = emb(vec![
            ("a", vec![1.0, 0.0, 0.0, 0.0]),
            ("b", vec![1.0, 1.0, 0.0, 0.0]),
            ("c", vec![0.0, 0.0, 1.0, 0.0]),
            ("d", vec![0.0, 1.0, 1.0, 0.0]),
            ("e", vec![0.0, 0.0, 0.0, 1.0]),
            ("f", vec![1.0, -1.0, 0.0, 1.0]),
        ]);
        let r = analogy(&e, "a", "b", "c", 2).unwrap();
        assert_eq!(r.entries[0].0, "d");
        assert!((r.entries[0].1 - 1.0).abs() < 1e-15);
        assert!(!r.tickers().iter().any(|t| ["a", "b", "c"].contains(t)));
    }

    #[test]
    fn orthogonal_outlier_is_odd() {
        let e = emb(vec![
            ("p", vec![1.0, 1.0, 0.0]),
            ("q", vec![1.0, 1.0, 0.0]),
            ("r", vec![1.0, 1.0, 0.0]),
            ("s", vec![0.0, 0.0, 1.0]),
        ]);
        assert_eq!(odd_one_out(&e, &["p", "s", "q", "r"]).unwrap(), "s");
        assert!(odd_one_out(&e, &["p", "q"]).is_err());
        assert!(odd_one_out(&e, &["p", "q", "p"]).is_err());
    }

    #[test]
    fn best_match_picks_duplicate() {
        let e = emb(vec![
            ("G", vec![0.2, 0.9]),
            ("J", vec![1.0, 0.0]),
            ("F", vec![0.2, 0.9]),
            ("M", vec![-1.0, 0.3]),
        ]);
        let (t, s) = best_match_from_set(&e, "G", &["J", "F", "M"]).unwrap();
        assert_eq!(t, "F");
        assert!((s - 1.0).abs() < 1e-15);
        assert!(best_match_from_set(&e, "G", &[]).is_err());
        assert!(best_match_from_set(&e, "G", &["G", "J"]).is_err());
        assert!(best_match_from_set(&e, "G", &["nope"]).is_err());
    }

    #[test]
    fn pca_of_a_line() {
        let dir: Vec<f64> = (0..16).map(|i| (i as f64 * 0.37).sin()).collect();
        let rows = (0..10)
            .map(|k| {
                let t = k as f64 - 3.5;
                (format!("t{k}"), dir.iter().map(|d| 2.0 + t * d).collect())
            })
            .collect();
        let e = EmbeddingMatrix::from_rows(rows).unwrap();
        let p = pca_project(&e, 3).unwrap();
        let total: f64 = p.explained_variance.iter().sum();
        assert!((p.explained_variance[0] / total - 1.0).abs() < 1e-12);
        for i in 0..10 {
            assert!(p.coord(i)[1].abs() < 1e-9 && p.coord(i)[2].abs() < 1e-9);
        }
        for a in 0..3 {
            for b in 0..3 {
                let dot: f64 = (0..16)
                    .map(|j| p.axes[a * 16 + j] * p.axes[b * 16 + j])
                    .sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pca_argument_checks() {
        let e = emb(vec![("a", vec![1.0, 2.0]), ("b", vec![0.0, 1.0])]);
        assert!(pca_project(&e, 3).is_err());
        assert!(pca_project(&e, 0).is_err());
        assert_eq!(pca_project(&e, 2).unwrap().components, 2);
        let single = emb(vec![("a", vec![1.0, 2.0])]);
        assert!(pca_project(&single, 1).is_err());
    }

    #[test]
    fn similarity_csv() {
        let r = SimilarityResult {
            entries: vec![("GS".into(), 0.92812345678)],
        };
        let mut human = Vec::new();
        r.write_csv(&mut human, false).unwrap();
        assert_eq!(
            String::from_utf8(human).unwrap(),
            "rank,ticker,score\n1,GS,0.928\n"
        );
        let mut machine = Vec::new();
        r.write_csv(&mut machine, true).unwrap();
        assert_eq!(
            String::from_utf8(machine).unwrap(),
            "rank,ticker,score\n1,GS,0.928123457\n"
        );
    }
}
