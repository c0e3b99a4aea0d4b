//! Labelled group-by-group matrices and cells with explicit infinite and
//! undefined states.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A ratio-like value that may be infinite (`x / 0` with `x > 0`) or
/// undefined (`0 / 0`, or not applicable).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum Cell {
    #[serde(rename = "value")]
    Value(f64),
    #[serde(rename = "inf")]
    Infinite,
    #[serde(rename = "n/a")]
    Undefined,
}

impl Cell {
    pub fn ratio(num: f64, den: f64) -> Cell {
        if den > 0.0 {
            Cell::Value(num / den)
        } else if num > 0.0 {
            Cell::Infinite
        } else {
            Cell::Undefined
        }
    }

    /// Quotient of two cells, extending [`Cell::ratio`] to infinite operands.
    pub fn over(self, other: Cell) -> Cell {
        match (self, other) {
            (Cell::Undefined, _) | (_, Cell::Undefined) => Cell::Undefined,
            (Cell::Value(a), Cell::Value(b)) => Cell::ratio(a, b),
            (Cell::Value(_), Cell::Infinite) => Cell::Value(0.0),
            (Cell::Infinite, Cell::Value(_)) => Cell::Infinite,
            (Cell::Infinite, Cell::Infinite) => Cell::Undefined,
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Cell::Value(v) => Some(v),
            _ => None,
        }
    }

    /// Numeric view with `inf` mapped to `f64::INFINITY`; `None` when undefined.
    pub fn as_f64(self) -> Option<f64> {
        match self {
            Cell::Value(v) => Some(v),
            Cell::Infinite => Some(f64::INFINITY),
            Cell::Undefined => None,
        }
    }

    pub fn from_option(v: Option<f64>) -> Cell {
        v.map_or(Cell::Undefined, Cell::Value)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Value(v) => write!(f, "{v}"),
            Cell::Infinite => f.write_str("inf"),
            Cell::Undefined => f.write_str("n/a"),
        }
    }
}

/// Dense row-major matrix indexed by group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupMatrix<T> {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    data: Vec<T>,
}

impl<T: Clone> GroupMatrix<T> {
    pub fn filled(rows: &[String], cols: &[String], value: T) -> Self {
        Self {
            rows: rows.to_vec(),
            cols: cols.to_vec(),
            data: vec![value; rows.len() * cols.len()],
        }
    }
}

impl<T> GroupMatrix<T> {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn same_shape<U>(&self, other: &GroupMatrix<U>) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.cols.len() + j]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut T {
        let n = self.cols.len();
        &mut self.data[i * n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        *self.get_mut(i, j) = v;
    }

    pub fn map<U>(&self, mut f: impl FnMut(usize, usize, &T) -> U) -> GroupMatrix<U> {
        let n = self.cols.len();
        GroupMatrix {
            rows: self.rows.clone(),
            cols: self.cols.clone(),
            data: self
                .data
                .iter()
                .enumerate()
                .map(|(k, v)| f(k / n, k % n, v))
                .collect(),
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        let n = self.cols.len();
        self.data.iter().enumerate().map(move |(k, v)| (k / n, k % n, v))
    }

    /// CSV with a header row of column labels and the row label first.
    pub fn to_csv(&self, corner: &str, mut fmt_cell: impl FnMut(&T) -> String) -> String {
        let mut out = String::new();
        out.push_str(corner);
        for c in &self.cols {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (i, r) in self.rows.iter().enumerate() {
            out.push_str(r);
            for j in 0..self.cols.len() {
                out.push(',');
                out.push_str(&fmt_cell(self.get(i, j)));
            }
            out.push('\n');
        }
        out
    }
}

impl<T: PartialEq> GroupMatrix<T> {
    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.n_rows()).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}
