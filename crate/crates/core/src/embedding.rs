//! The trained artifact: one dense vector per token, plus its text format.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::textio::{self, fmt9};

/// `N x dim` row-major matrix with a token for each row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(tokens: Vec<String>, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "embedding dimension must be >= 1".into(),
            ));
        }
        if data.len() != tokens.len() * dim {
            return Err(Error::InvalidData(format!(
                "{} values for {} tokens of dimension {dim}",
                data.len(),
                tokens.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite component in vector of '{}'",
                tokens[i / dim]
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidData(format!("duplicate token '{t}'")));
            }
        }
        Ok(Self {
            tokens,
            index,
            dim,
            data,
        })
    }

    /// Convenience constructor from `(token, vector)` rows.
    pub fn from_rows<S: Into<String>>(rows: Vec<(S, Vec<f64>)>) -> Result<Self> {
        let dim = rows.first().map_or(0, |(_, v)| v.len());
        let mut tokens = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (t, v) in rows {
            let t = t.into();
            if v.len() != dim {
                return Err(Error::InvalidData(format!(
                    "vector for '{t}' has dimension {}, expected {dim}",
                    v.len()
                )));
            }
            tokens.push(t);
            data.extend(v);
        }
        Self::new(tokens, dim, data)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn index_of(&self, token: &str) -> Result<usize> {
        self.index
            .get(token)
            .copied()
            .ok_or_else(|| Error::UnknownTicker(token.to_string()))
    }

    pub fn vector(&self, token: &str) -> Result<&[f64]> {
        Ok(self.row(self.index_of(token)?))
    }

    /// Header line `N dim`, then `token v1 .. vdim` per row with nine
    /// significant digits.
    pub fn write<W: Write>(&self, mut out: W, header: Option<&str>) -> std::io::Result<()> {
        textio::write_header(&mut out, header)?;
        writeln!(out, "{} {}", self.len(), self.dim)?;
        for (i, t) in self.tokens.iter().enumerate() {
            out.write_all(t.as_bytes())?;
            for &v in self.row(i) {
                write!(out, " {}", fmt9(v))?;
            }
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn save(&self, path: &Path, header: Option<&str>) -> Result<()> {
        let out = textio::create(path)?;
        self.write(out, header).map_err(|e| Error::io(path, e))
    }

    pub fn read<R: BufRead>(reader: R, source: &str) -> Result<Self> {
        let mut lines = textio::content_lines(reader, source);
        let (line, head) = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::parse(source, 1, "empty embedding file"))?;
        let dims: Vec<usize> = head
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(source, line, format!("bad header '{head}'")))?;
        let [n, dim] = dims[..] else {
            return Err(Error::parse(source, line, "header must be 'N dim'"));
        };
        let mut tokens = Vec::with_capacity(n);
        let mut data = Vec::with_capacity(n * dim);
        for item in lines {
            let (line, text) = item?;
            let mut fields = text.split_whitespace();
            let token = fields.next().unwrap_or_default().to_string();
            let before = data.len();
            for f in fields {
                let v: f64 = f.parse().map_err(|_| {
                    Error::parse_cell(source, line, &token, format!("bad value '{f}'"))
                })?;
                data.push(v);
            }
            if data.len() - before != dim {
                return Err(Error::parse(
                    source,
                    line,
                    format!(
                        "'{token}' has {} values, expected {dim}",
                        data.len() - before
                    ),
                ));
            }
            tokens.push(token);
        }
        if tokens.len() != n {
            return Err(Error::parse(
                source,
                line,
                format!("header promises {n} rows, found {}", tokens.len()),
            ));
        }
        Self::new(tokens, dim, data).map_err(|e| Error::parse(source, line, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let reader = textio::open(path)?;
        Self::read(reader, &path.display().to_string())
    }
}
