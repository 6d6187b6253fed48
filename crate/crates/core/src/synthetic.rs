//! Planted-structure market data: returns driven by one factor per sector
//! plus idiosyncratic noise, `r_i(t) = vol * (loading * f_s(i)(t) + noise * e_i(t))`
//! with independent standard normal `f` and `e`.

use chrono::{Datelike, NaiveDate, Weekday};
use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::cluster_eval::LabelTable;
use crate::error::Result;
use crate::market_data::PricePanel;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorModel {
    pub sectors: usize,
    pub per_sector: usize,
    /// Number of return observations; the panel has one more price row.
    pub days: usize,
    pub loading: f64,
    pub noise: f64,
    /// Overall scale of daily returns.
    pub volatility: f64,
    pub seed: u64,
}

impl Default for FactorModel {
    fn default() -> Self {
        Self {
            sectors: 4,
            per_sector: 15,
            days: 252,
            loading: 0.9,
            noise: 0.44,
            volatility: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticMarket {
    pub panel: PricePanel,
    /// Sector class at every taxonomy level.
    pub labels: LabelTable,
    pub sector_of: Vec<usize>,
}

pub fn ticker_name(sector: usize, member: usize) -> String {
    format!("S{sector}N{member:02}")
}

fn business_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    start
        .iter_days()
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .take(count)
        .collect()
}

impl FactorModel {
    pub fn generate(&self) -> Result<SyntheticMarket> {
        let n = self.sectors * self.per_sector;
        let mut factor_rng = rng::stream(self.seed, &[0]);
        let mut noise_rng = rng::stream(self.seed, &[1]);
        let factors: Vec<f64> = (0..self.days * self.sectors)
            .map(|_| StandardNormal.sample(&mut factor_rng))
            .collect();

        let sector_of: Vec<usize> = (0..n).map(|i| i / self.per_sector).collect();
        let mut prices = DMatrix::zeros(self.days + 1, n);
        for i in 0..n {
            prices[(0, i)] = 100.0;
        }
        for t in 0..self.days {
            for i in 0..n {
                let e: f64 = StandardNormal.sample(&mut noise_rng);
                let f = factors[t * self.sectors + sector_of[i]];
                let r = self.volatility * (self.loading * f + self.noise * e);
                prices[(t + 1, i)] = prices[(t, i)] * r.exp();
            }
        }

        let tickers: Vec<String> = (0..n)
            .map(|i| ticker_name(sector_of[i], i % self.per_sector))
            .collect();
        let mut labels = LabelTable::new();
        for (t, &s) in tickers.iter().zip(&sector_of) {
            labels.insert_flat(t.clone(), &format!("sector{s}"))?;
        }
        let dates = business_days(NaiveDate::from_ymd_opt(2021, 1, 4).unwrap(), self.days + 1);
        Ok(SyntheticMarket {
            panel: PricePanel::new(dates, tickers, prices)?,
            labels,
            sector_of,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{compute_correlation, compute_log_returns};

    #[test]
    fn planted_correlations() {
        let m = FactorModel {
            seed: 3,
            ..Default::default()
        }
        .generate()
        .unwrap();
        assert_eq!(m.panel.prices().shape(), (253, 60));
        let rho = compute_correlation(&compute_log_returns(&m.panel)).unwrap();
        // Within-sector correlation is 0.81 / (0.81 + 0.1936) ≈ 0.807.
        let (mut within, mut across) = (Vec::new(), Vec::new());
        for i in 0..60 {
            for j in i + 1..60 {
                let v = rho.rho()[(i, j)];
                if m.sector_of[i] == m.sector_of[j] {
                    within.push(v)
                } else {
                    across.push(v)
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean(&within) - 0.807).abs() < 0.05, "{}", mean(&within));
        assert!(mean(&across).abs() < 0.1, "{}", mean(&across));
    }

    #[test]
    fn dates_skip_weekends() {
        let d = business_days(NaiveDate::from_ymd_opt(2021, 1, 1).unwrap(), 3);
        assert_eq!(d[1], NaiveDate::from_ymd_opt(2021, 1, 4).unwrap());
    }
}
