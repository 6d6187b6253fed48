//! Number formatting and small helpers shared by the text file formats.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Formats `x` with `sig` significant digits in the style of C's `%.{sig}g`:
/// fixed notation for moderate exponents, scientific otherwise, trailing
/// zeros stripped.
pub fn fmt_sig(x: f64, sig: usize) -> String {
    assert!(sig >= 1, "need at least one significant digit");
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    // Scientific rendering gives the exponent after rounding to `sig` digits.
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if exp < -5 || exp >= sig as i32 {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Nine significant digits, the precision used by every numeric artifact.
pub fn fmt9(x: f64) -> String {
    fmt_sig(x, 9)
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

pub(crate) fn write_header<W: Write>(out: &mut W, header: Option<&str>) -> std::io::Result<()> {
    if let Some(h) = header {
        writeln!(out, "# {h}")?;
    }
    Ok(())
}

/// Yields `(1-based line number, line)` for every line that is not blank and
/// not a `#` comment. Trailing `\r` is removed.
pub(crate) fn content_lines<'a, R: BufRead + 'a>(
    reader: R,
    file: &'a str,
) -> impl Iterator<Item = Result<(usize, String)>> + 'a {
    reader
        .lines()
        .enumerate()
        .filter_map(move |(i, line)| match line {
            Err(e) => Some(Err(Error::parse(file, i + 1, e.to_string()))),
            Ok(mut l) => {
                if l.ends_with('\r') {
                    l.pop();
                }
                let t = l.trim_start();
                if t.is_empty() || t.starts_with('#') {
                    None
                } else {
                    Some(Ok((i + 1, l)))
                }
            }
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_like_printf_g() {
        assert_eq!(fmt_sig(0.9, 9), "0.9");
        assert_eq!(fmt_sig(1.0, 9), "1");
        assert_eq!(fmt_sig(-0.123456789012, 9), "-0.123456789");
        assert_eq!(fmt_sig(123456789.4, 9), "123456789");
        assert_eq!(fmt_sig(1234567890.0, 9), "1.23456789e+09");
        assert_eq!(fmt_sig(1e-6, 9), "1e-06");
        assert_eq!(fmt_sig(0.0001234, 9), "0.0001234");
        assert_eq!(fmt_sig(9.9999999999, 9), "10");
        assert_eq!(fmt_sig(std::f64::consts::FRAC_1_SQRT_2, 3), "0.707");
        assert_eq!(fmt_sig(0.0, 9), "0");
    }

    #[test]
    fn reparse_is_a_fixed_point() {
        for &x in &[0.1, 1.0 / 3.0, -2.5e-7, 6.02214076e23, 0.928374651234] {
            let s = fmt9(x);
            let y: f64 = s.parse().unwrap();
            assert_eq!(fmt9(y), s);
        }
    }
}
