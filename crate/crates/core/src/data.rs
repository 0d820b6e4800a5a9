//! Response vector plus a column-partitioned design matrix.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// `y = X₁β₁ + X₂β₂ + ε` with the first `p1` columns of `x` forming `X₁`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    y: DVector<f64>,
    x: DMatrix<f64>,
    p1: usize,
    names: Vec<String>,
}

impl Dataset {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>, p1: usize) -> Result<Self> {
        let names = (0..x.ncols()).map(|j| format!("x{}", j + 1)).collect();
        Self::with_names(y, x, p1, names)
    }

    pub fn with_names(y: DVector<f64>, x: DMatrix<f64>, p1: usize, names: Vec<String>) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 || y.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if y.len() != n {
            return Err(Error::domain(format!("response has {} rows, design has {n}", y.len())));
        }
        if p == 0 {
            return Err(Error::domain("design matrix has no columns"));
        }
        if n < p {
            return Err(Error::domain(format!("need n >= p, got n = {n}, p = {p}")));
        }
        if p1 == 0 || p1 > p {
            return Err(Error::domain(format!("partition p1 = {p1} outside 1..={p}")));
        }
        if names.len() != p {
            return Err(Error::domain(format!("{} names for {p} columns", names.len())));
        }
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::domain("dataset contains nonfinite entries"));
        }
        Ok(Self { y, x, p1, names })
    }

    /// Reorders columns so that `sub` (the `X₁` block) comes first, followed by
    /// every remaining column in its original order.
    pub fn from_partition(
        y: DVector<f64>,
        x: DMatrix<f64>,
        sub: &[usize],
        names: Option<Vec<String>>,
    ) -> Result<Self> {
        let p = x.ncols();
        let mut seen = vec![false; p];
        for &j in sub {
            if j >= p {
                return Err(Error::domain(format!("column index {j} out of range for {p} columns")));
            }
            if seen[j] {
                return Err(Error::domain(format!("column index {j} listed twice")));
            }
            seen[j] = true;
        }
        let order: Vec<usize> = sub.iter().copied().chain((0..p).filter(|j| !seen[*j])).collect();
        let names = names.unwrap_or_else(|| (0..p).map(|j| format!("x{}", j + 1)).collect());
        if names.len() != p {
            return Err(Error::domain(format!("{} names for {p} columns", names.len())));
        }
        let reordered = linalg::select_columns(&x, &order);
        let names = order.iter().map(|&j| names[j].clone()).collect();
        Self::with_names(y, reordered, sub.len(), names)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn p1(&self) -> usize {
        self.p1
    }

    pub fn p2(&self) -> usize {
        self.p() - self.p1
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn x1(&self) -> DMatrix<f64> {
        self.x.columns(0, self.p1).into_owned()
    }

    pub fn x2(&self) -> DMatrix<f64> {
        self.x.columns(self.p1, self.p2()).into_owned()
    }

    /// Index of a column whose entries are all exactly one.
    pub fn intercept_column(&self) -> Option<usize> {
        (0..self.p()).find(|&j| self.x.column(j).iter().all(|&v| v == 1.0))
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        Self::with_names(
            linalg::select_entries(&self.y, rows),
            linalg::select_rows(&self.x, rows),
            self.p1,
            self.names.clone(),
        )
    }

    pub fn with_response(&self, y: DVector<f64>) -> Result<Self> {
        Self::with_names(y, self.x.clone(), self.p1, self.names.clone())
    }

    /// Same rows, repartitioned with a new `p1` (columns keep their order).
    pub fn with_p1(&self, p1: usize) -> Result<Self> {
        Self::with_names(self.y.clone(), self.x.clone(), p1, self.names.clone())
    }
}
