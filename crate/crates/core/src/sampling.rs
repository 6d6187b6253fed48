//! Discrete sampling over small finite supports.
//!
//! [`Discrete`] picks between a cumulative table (linear scan, cheapest for
//! a handful of outcomes) and Vose's alias method (O(1) draws) depending on
//! the support size.

use rand::Rng;

use crate::error::{Error, Result};

/// Supports up to this size are sampled by a linear CDF scan.
pub const LINEAR_MAX: usize = 4;

#[derive(Debug, Clone)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    /// Builds the table from normalized probabilities.
    pub fn new(probs: &[f64]) -> Self {
        let n = probs.len();
        let mut prob = vec![0.0; n];
        let mut alias = vec![0u32; n];
        let mut scaled: Vec<f64> = probs.iter().map(|p| p * n as f64).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) =
            (0..n).partition(|&i| scaled[i] < 1.0);

        while let (Some(s), Some(&l)) = (small.pop(), large.last()) {
            prob[s] = scaled[s];
            alias[s] = l as u32;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // Leftovers are 1 up to rounding.
        for i in large.into_iter().chain(small) {
            prob[i] = 1.0;
            alias[i] = i as u32;
        }
        Self { prob, alias }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let n = self.prob.len();
        let u: f64 = rng.random::<f64>() * n as f64;
        let i = (u as usize).min(n - 1);
        let frac = u - i as f64;
        if frac < self.prob[i] {
            i
        } else {
            self.alias[i] as usize
        }
    }
}

#[derive(Debug, Clone)]
enum Sampler {
    Linear(Vec<f64>),
    Alias(AliasTable),
}

/// A normalized discrete distribution over `0..len()`.
#[derive(Debug, Clone)]
pub struct Discrete {
    probs: Vec<f64>,
    sampler: Sampler,
}

impl Discrete {
    /// Normalizes non-negative masses. Fails when the support is empty, any
    /// mass is negative or non-finite, or the total is not positive.
    pub fn from_masses(masses: &[f64]) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::InvalidArgument("empty distribution".into()));
        }
        if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "masses must be finite and non-negative: {masses:?}"
            )));
        }
        let total: f64 = masses.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::InvalidArgument(
                "distribution has zero total mass".into(),
            ));
        }
        let probs: Vec<f64> = masses.iter().map(|m| m / total).collect();
        let sampler = if probs.len() <= LINEAR_MAX {
            let mut acc = 0.0;
            let mut cdf: Vec<f64> = probs
                .iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect();
            *cdf.last_mut().unwrap() = 1.0;
            Sampler::Linear(cdf)
        } else {
            Sampler::Alias(AliasTable::new(&probs))
        };
        Ok(Self { probs, sampler })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.sampler {
            Sampler::Linear(cdf) => {
                let u: f64 = rng.random();
                cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
            }
            Sampler::Alias(table) => table.sample(rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn empirical(d: &Discrete, draws: usize) -> Vec<f64> {
        let mut rng = rng::stream(11, &[]);
        let mut counts = vec![0usize; d.len()];
        for _ in 0..draws {
            counts[d.sample(&mut rng)] += 1;
        }
        counts.iter().map(|&c| c as f64 / draws as f64).collect()
    }

    #[test]
    fn linear_and_alias_match_target() {
        for masses in [
            vec![1.0, 2.0, 3.0],
            vec![0.5, 0.0, 4.0, 1.0, 2.5, 7.0, 0.25],
            vec![1.0; 9],
        ] {
            let d = Discrete::from_masses(&masses).unwrap();
            let total: f64 = masses.iter().sum();
            for (p, m) in empirical(&d, 200_000).iter().zip(&masses) {
                assert!((p - m / total).abs() < 0.006, "{p} vs {}", m / total);
            }
        }
    }

    #[test]
    fn zero_mass_outcome_is_never_drawn() {
        let d = Discrete::from_masses(&[1.0, 0.0, 1.0, 1.0, 1.0, 0.0]).unwrap();
        let freq = empirical(&d, 50_000);
        assert_eq!(freq[1], 0.0);
        assert_eq!(freq[5], 0.0);
    }

    #[test]
    fn rejects_degenerate_masses() {
        assert!(Discrete::from_masses(&[]).is_err());
        assert!(Discrete::from_masses(&[0.0, 0.0]).is_err());
        assert!(Discrete::from_masses(&[1.0, -1.0]).is_err());
        assert!(Discrete::from_masses(&[f64::NAN]).is_err());
    }

    #[test]
    fn probabilities_sum_to_one() {
        let d = Discrete::from_masses(&[3.0, 1e-9, 7.5, 2.0, 11.0]).unwrap();
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
