use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planar taxel positions in millimeters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxelLayout {
    positions: Vec<[f64; 2]>,
    names: Option<Vec<String>>,
}

impl TaxelLayout {
    pub fn new(positions: Vec<[f64; 2]>) -> Result<Self> {
        Self::with_names(positions, None)
    }

    pub fn with_names(positions: Vec<[f64; 2]>, names: Option<Vec<String>>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidLayout("layout has no taxels".into()));
        }
        if let Some(names) = &names {
            if names.len() != positions.len() {
                return Err(Error::InvalidLayout(format!(
                    "{} names for {} taxels",
                    names.len(),
                    positions.len()
                )));
            }
        }
        for (i, p) in positions.iter().enumerate() {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(Error::InvalidLayout(format!("taxel {i} has a non-finite coordinate")));
            }
        }
        let mut order: Vec<usize> = (0..positions.len()).collect();
        order.sort_by(|&a, &b| {
            let (pa, pb) = (positions[a], positions[b]);
            pa[0].total_cmp(&pb[0]).then(pa[1].total_cmp(&pb[1]))
        });
        for w in order.windows(2) {
            if positions[w[0]] == positions[w[1]] {
                return Err(Error::InvalidLayout(format!(
                    "taxels {} and {} share coordinates",
                    w[0].min(w[1]),
                    w[0].max(w[1])
                )));
            }
        }
        Ok(Self { positions, names })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// Euclidean distance between taxels `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.positions[i], self.positions[j]);
        (a[0] - b[0]).hypot(a[1] - b[1])
    }

    /// Parses the layout text format: one `index x_mm y_mm [name]` per line, `#` comments.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut rows: Vec<(usize, [f64; 2], Option<String>)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let lineno = lineno + 1;
            let mut fields = line.split_whitespace();
            let mut next = |what: &str| {
                fields.next().ok_or_else(|| Error::parse(path, lineno, format!("missing {what}")))
            };
            let index: usize = next("index")?
                .parse()
                .map_err(|_| Error::parse(path, lineno, "index is not a nonnegative integer"))?;
            let x: f64 = next("x coordinate")?
                .parse()
                .map_err(|_| Error::parse(path, lineno, "x coordinate is not a number"))?;
            let y: f64 = next("y coordinate")?
                .parse()
                .map_err(|_| Error::parse(path, lineno, "y coordinate is not a number"))?;
            let name = fields.next().map(str::to_owned);
            if fields.next().is_some() {
                return Err(Error::parse(path, lineno, "trailing fields after name"));
            }
            rows.push((index, [x, y], name));
        }
        if rows.is_empty() {
            return Err(Error::Data { path: path.into(), msg: "layout has no taxels".into() });
        }
        rows.sort_by_key(|r| r.0);
        for (expected, row) in rows.iter().enumerate() {
            if row.0 != expected {
                return Err(Error::Data {
                    path: path.into(),
                    msg: format!("taxel indices must be 0..{} without gaps or repeats", rows.len()),
                });
            }
        }
        let named = rows.iter().filter(|r| r.2.is_some()).count();
        let names = match named {
            0 => None,
            n if n == rows.len() => Some(rows.iter().map(|r| r.2.clone().unwrap()).collect()),
            _ => {
                return Err(Error::Data {
                    path: path.into(),
                    msg: "either every taxel is named or none is".into(),
                })
            }
        };
        let positions = rows.into_iter().map(|r| r.1).collect();
        Self::with_names(positions, names).map_err(|e| Error::Data { path: path.into(), msg: e.to_string() })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# index x_mm y_mm [name]\n");
        for (i, p) in self.positions.iter().enumerate() {
            write!(out, "{i} {} {}", p[0], p[1]).unwrap();
            if let Some(names) = &self.names {
                write!(out, " {}", names[i]).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Illustrative 39-taxel radial layout: a center taxel surrounded by rings of
    /// 6, 12 and 20 taxels. Not the measured geometry of any real sensor.
    pub fn radial_example() -> Self {
        let mut positions = vec![[0.0, 0.0]];
        for &(count, radius, phase) in &[(6usize, 1.6, 0.0), (12, 3.2, 0.13), (20, 5.0, 0.05)] {
            for i in 0..count {
                let theta = phase + std::f64::consts::TAU * i as f64 / count as f64;
                // Flatten vertically to mimic an elongated fingertip pad.
                positions.push([radius * theta.cos(), 1.3 * radius * theta.sin()]);
            }
        }
        Self::new(positions).expect("radial example layout is valid")
    }

    /// Jittered grid on a 2 mm pitch, deterministic for a given rng state.
    pub fn random_grid(num_taxels: usize, rng: &mut impl Rng) -> Result<Self> {
        if num_taxels == 0 {
            return Err(Error::InvalidLayout("layout has no taxels".into()));
        }
        let cols = (num_taxels as f64).sqrt().ceil() as usize;
        let positions = (0..num_taxels)
            .map(|i| {
                let (r, c) = (i / cols, i % cols);
                [2.0 * c as f64 + rng.random_range(-0.4..0.4), 2.0 * r as f64 + rng.random_range(-0.4..0.4)]
            })
            .collect();
        Self::new(positions)
    }
}

pub(crate) fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}
