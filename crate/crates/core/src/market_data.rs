//! Price panels, log returns and the Pearson correlation matrix.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Dense `T x N` panel of adjusted close prices, one column per ticker.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    prices: DMatrix<f64>,
}

impl PricePanel {
    /// Validates and wraps a price matrix with `dates.len()` rows and
    /// `tickers.len()` columns.
    pub fn new(dates: Vec<NaiveDate>, tickers: Vec<String>, prices: DMatrix<f64>) -> Result<Self> {
        if prices.nrows() != dates.len() || prices.ncols() != tickers.len() {
            return Err(Error::InvalidData(format!(
                "price matrix is {}x{}, expected {}x{}",
                prices.nrows(),
                prices.ncols(),
                dates.len(),
                tickers.len()
            )));
        }
        if dates.len() < 3 {
            return Err(Error::InvalidData(format!(
                "need at least 3 dates, got {}",
                dates.len()
            )));
        }
        if tickers.is_empty() {
            return Err(Error::InvalidData("panel has no tickers".into()));
        }
        check_tickers(&tickers)?;
        if let Some(w) = dates.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidData(format!(
                "dates not strictly increasing at {} -> {}",
                dates[w],
                dates[w + 1]
            )));
        }
        for (col, ticker) in tickers.iter().enumerate() {
            for row in 0..dates.len() {
                let p = prices[(row, col)];
                if !(p.is_finite() && p > 0.0) {
                    return Err(Error::InvalidData(format!(
                        "price {p} for '{ticker}' on {} is not strictly positive",
                        dates[row]
                    )));
                }
            }
        }
        Ok(Self {
            dates,
            tickers,
            prices,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn prices(&self) -> &DMatrix<f64> {
        &self.prices
    }

    /// Writes the panel in the format [`parse_price_panel`] reads, with
    /// shortest round-trip price formatting.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "date")?;
        for t in &self.tickers {
            write!(out, ",{t}")?;
        }
        writeln!(out)?;
        for (row, date) in self.dates.iter().enumerate() {
            write!(out, "{}", date.format("%Y-%m-%d"))?;
            for col in 0..self.tickers.len() {
                write!(out, ",{}", self.prices[(row, col)])?;
            }
            writeln!(out)?;
        }
        out.flush()
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = crate::textio::create(path)?;
        self.write_csv(&mut out).map_err(|e| Error::io(path, e))
    }
}

fn check_tickers(tickers: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for t in tickers {
        if t.trim().is_empty() {
            return Err(Error::InvalidData("empty ticker identifier".into()));
        }
        if !seen.insert(t.as_str()) {
            return Err(Error::InvalidData(format!("duplicate ticker '{t}'")));
        }
    }
    Ok(())
}

/// `(T - 1) x N` log returns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel {
    tickers: Vec<String>,
    returns: DMatrix<f64>,
}

impl ReturnsPanel {
    pub fn new(tickers: Vec<String>, returns: DMatrix<f64>) -> Result<Self> {
        if returns.ncols() != tickers.len() {
            return Err(Error::InvalidData(format!(
                "{} return columns for {} tickers",
                returns.ncols(),
                tickers.len()
            )));
        }
        check_tickers(&tickers)?;
        if returns.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidData("non-finite return".into()));
        }
        Ok(Self { tickers, returns })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }
}

/// Symmetric correlation matrix with unit diagonal and entries in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    tickers: Vec<String>,
    rho: DMatrix<f64>,
}

impl CorrelationMatrix {
    /// Builds a correlation matrix from arbitrary input. The upper triangle
    /// is authoritative: it is clamped into `[-1, 1]` and mirrored, and the
    /// diagonal is set to 1.
    pub fn from_upper(tickers: Vec<String>, mut rho: DMatrix<f64>) -> Result<Self> {
        let n = tickers.len();
        if rho.nrows() != n || rho.ncols() != n {
            return Err(Error::InvalidData(format!(
                "correlation matrix is {}x{}, expected {n}x{n}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        check_tickers(&tickers)?;
        for i in 0..n {
            rho[(i, i)] = 1.0;
            for j in i + 1..n {
                let v = rho[(i, j)];
                if v.is_nan() {
                    return Err(Error::InvalidData(format!(
                        "NaN correlation between '{}' and '{}'",
                        tickers[i], tickers[j]
                    )));
                }
                let v = v.clamp(-1.0, 1.0);
                rho[(i, j)] = v;
                rho[(j, i)] = v;
            }
        }
        Ok(Self { tickers, rho })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn rho(&self) -> &DMatrix<f64> {
        &self.rho
    }

    pub fn len(&self) -> usize {
        self.tickers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tickers.is_empty()
    }
}

/// Loads a price CSV: header `date,<ticker>,...`, ISO dates, one decimal
/// price per cell. Every cell must be present.
pub fn load_price_panel(path: impl AsRef<Path>) -> Result<PricePanel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_price_panel(file, &path.display().to_string())
}

/// Parses price CSV text from any reader; `source` labels error messages.
pub fn parse_price_panel<R: Read>(reader: R, source: &str) -> Result<PricePanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| Error::parse(source, 1, e.to_string()))?,
        None => return Err(Error::parse(source, 1, "empty file")),
    };
    let first = header.get(0).unwrap_or("");
    if !first
        .trim_start_matches('\u{feff}')
        .eq_ignore_ascii_case("date")
    {
        return Err(Error::parse_cell(
            source,
            1,
            "date",
            format!("header must start with 'date', found '{first}'"),
        ));
    }
    let tickers: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if tickers.is_empty() {
        return Err(Error::parse(source, 1, "header names no tickers"));
    }
    let mut seen = HashSet::new();
    for t in &tickers {
        if t.is_empty() {
            return Err(Error::parse(source, 1, "empty ticker in header"));
        }
        if !seen.insert(t.as_str()) {
            return Err(Error::parse_cell(source, 1, t, "duplicate ticker"));
        }
    }

    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for record in records {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(source, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != tickers.len() + 1 {
            return Err(Error::parse(
                source,
                line,
                format!(
                    "malformed row: expected {} fields, found {}",
                    tickers.len() + 1,
                    record.len()
                ),
            ));
        }
        let raw_date = &record[0];
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|_| {
            Error::parse_cell(source, line, "date", format!("invalid date '{raw_date}'"))
        })?;
        if let Some(&prev) = dates.last() {
            if date == prev {
                return Err(Error::parse_cell(
                    source,
                    line,
                    "date",
                    format!("duplicate date {date}"),
                ));
            }
            if date < prev {
                return Err(Error::parse_cell(
                    source,
                    line,
                    "date",
                    format!("dates not strictly increasing ({prev} then {date})"),
                ));
            }
        }
        for (cell, ticker) in record.iter().skip(1).zip(&tickers) {
            if cell.is_empty() {
                return Err(Error::parse_cell(source, line, ticker, "missing price"));
            }
            let price: f64 = cell.parse().map_err(|_| {
                Error::parse_cell(source, line, ticker, format!("non-numeric price '{cell}'"))
            })?;
            if !(price.is_finite() && price > 0.0) {
                return Err(Error::parse_cell(
                    source,
                    line,
                    ticker,
                    format!("price '{cell}' is not strictly positive"),
                ));
            }
            values.push(price);
        }
        dates.push(date);
    }

    let prices = DMatrix::from_row_slice(dates.len(), tickers.len(), &values);
    PricePanel::new(dates, tickers, prices)
}

/// `returns[t][i] = ln(prices[t+1][i]) - ln(prices[t][i])`.
pub fn compute_log_returns(panel: &PricePanel) -> ReturnsPanel {
    let p = panel.prices();
    let logs = p.map(f64::ln);
    let t = p.nrows();
    let returns = logs.rows(1, t - 1) - logs.rows(0, t - 1);
    ReturnsPanel {
        tickers: panel.tickers.clone(),
        returns,
    }
}

/// Pearson correlation with population moments (plain averages over the
/// return rows). Moments are taken about the column mean, which is the
/// written `<xy> - <x><y>` form rearranged to avoid cancellation.
pub fn compute_correlation(returns: &ReturnsPanel) -> Result<CorrelationMatrix> {
    let r = returns.returns();
    let (t, n) = r.shape();
    if t < 2 {
        return Err(Error::InvalidData(format!(
            "need at least 2 return observations, got {t}"
        )));
    }
    let tf = t as f64;
    let mut centered = r.clone();
    let mut scale = vec![0.0; n];
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        let mean = col.sum() / tf;
        col.add_scalar_mut(-mean);
        let var = col.norm_squared() / tf;
        if var.is_nan() || var <= 0.0 {
            return Err(Error::ZeroVariance(returns.tickers[j].clone()));
        }
        scale[j] = var.sqrt();
    }

    let mut rho = DMatrix::identity(n, n);
    for i in 0..n {
        let ci = centered.column(i);
        for j in i + 1..n {
            let cov = ci.dot(&centered.column(j)) / tf;
            let v = (cov / (scale[i] * scale[j])).clamp(-1.0, 1.0);
            rho[(i, j)] = v;
            rho[(j, i)] = v;
        }
    }
    Ok(CorrelationMatrix {
        tickers: returns.tickers.clone(),
        rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(csv: &str) -> Result<PricePanel> {
        parse_price_panel(csv.as_bytes(), "test.csv")
    }

    fn returns_of(cols: &[&[f64]]) -> ReturnsPanel {
        let t = cols[0].len();
        let m = DMatrix::from_fn(t, cols.len(), |r, c| cols[c][r]);
        let tickers = (0..cols.len()).map(|i| format!("T{i}")).collect();
        ReturnsPanel::new(tickers, m).unwrap()
    }

    #[test]
    fn csv_round_trip() {
        let p =
            panel("date,A,B\n2021-01-04,1.5,2\n2021-01-05,1.25,2.1\n2021-01-06,0.1,3\n").unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(panel(std::str::from_utf8(&buf).unwrap()).unwrap(), p);
    }

    #[test]
    fn reads_small_panel() {
        let p = panel("date,AAA,BBB\n2021-01-04,100,50\n2021-01-05,110,50\n2021-01-06,121,50\n")
            .unwrap();
        assert_eq!(p.dates().len(), 3);
        assert_eq!(p.tickers(), ["AAA", "BBB"]);
        assert_eq!(p.prices()[(2, 0)], 121.0);
    }

    #[test]
    fn accepts_crlf() {
        let p = panel("date,A,B\r\n2021-01-04,1,2\r\n2021-01-05,1.5,2\r\n2021-01-06,1,2.5\r\n")
            .unwrap();
        assert_eq!(p.tickers(), ["A", "B"]);
    }

    #[test]
    fn zero_price_names_the_cell() {
        let err = panel("date,A,B\n2021-01-04,1,2\n2021-01-05,0.0,2\n2021-01-06,1,2\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("test.csv:3"), "{err}");
        assert!(err.contains("'A'"), "{err}");
    }

    #[test]
    fn rejects_unordered_dates() {
        let err = panel("date,A\n2021-01-05,1\n2021-01-04,2\n2021-01-06,3\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("dates not strictly increasing"), "{err}");
        let err = panel("date,A\n2021-01-04,1\n2021-01-04,2\n2021-01-06,3\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("duplicate date"), "{err}");
    }

    #[test]
    fn rejects_bad_cells_and_headers() {
        assert!(panel("date,A,A\n2021-01-04,1,1\n").is_err());
        assert!(panel("day,A\n2021-01-04,1\n").is_err());
        assert!(panel("date,A\n2021-01-04,x\n").is_err());
        assert!(panel("date,A,B\n2021-01-04,1\n").is_err());
        assert!(panel("date,A,B\n2021-01-04,1,\n2021-01-05,1,1\n2021-01-06,1,1\n").is_err());
        // Too few rows for a correlation.
        assert!(panel("date,A\n2021-01-04,1\n2021-01-05,2\n").is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_price_panel("/nonexistent/prices.csv").unwrap_err();
        assert_eq!(err.kind(), "io");
    }

    #[test]
    fn log_returns_examples() {
        let p =
            panel("date,A,B\n2021-01-04,100,50\n2021-01-05,110,50\n2021-01-06,121,50\n").unwrap();
        let r = compute_log_returns(&p);
        assert_eq!(r.returns().nrows(), 2);
        // ln(1.1), from an independent high-precision evaluation.
        for t in 0..2 {
            assert!((r.returns()[(t, 0)] - 0.095_310_179_804_324_9).abs() < 1e-12);
            assert_eq!(r.returns()[(t, 1)], 0.0);
        }

        let e = std::f64::consts::E;
        let p = PricePanel::new(
            vec![
                NaiveDate::from_ymd_opt(2021, 1, 4).unwrap(),
                NaiveDate::from_ymd_opt(2021, 1, 5).unwrap(),
                NaiveDate::from_ymd_opt(2021, 1, 6).unwrap(),
            ],
            vec!["X".into()],
            DMatrix::from_column_slice(3, 1, &[100.0, 100.0 * e, 100.0 * e * e]),
        )
        .unwrap();
        let r = compute_log_returns(&p);
        assert!((r.returns()[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn correlation_examples() {
        let c = compute_correlation(&returns_of(&[&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]])).unwrap();
        assert_eq!(c.rho()[(0, 1)], 1.0);
        let c = compute_correlation(&returns_of(&[&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]])).unwrap();
        assert_eq!(c.rho()[(0, 1)], -1.0);
        // 3 / sqrt(2 * 42/9), evaluated by hand.
        let c = compute_correlation(&returns_of(&[&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]])).unwrap();
        assert!((c.rho()[(0, 1)] - 0.981_980_506_061_965_7).abs() < 1e-12);
        assert_eq!(c.rho()[(0, 0)], 1.0);
    }

    #[test]
    fn zero_variance_is_an_error() {
        let err =
            compute_correlation(&returns_of(&[&[1.0, 2.0, 3.0], &[0.5, 0.5, 0.5]])).unwrap_err();
        assert!(matches!(err, Error::ZeroVariance(ref t) if t == "T1"));
    }

    #[test]
    fn from_upper_clamps_and_mirrors() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0 + 1e-15, 7.0, 0.0]);
        let c = CorrelationMatrix::from_upper(vec!["a".into(), "b".into()], m).unwrap();
        assert_eq!(c.rho()[(0, 1)], 1.0);
        assert_eq!(c.rho()[(1, 0)], 1.0);
        assert_eq!(c.rho()[(1, 1)], 1.0);
    }
}
