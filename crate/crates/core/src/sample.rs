//! Observation matrices and rank transforms.

use crate::error::{Error, Result};
use crate::special::norm_quantile;
use nalgebra::{DMatrix, DVector};
use std::io::{Read, Write};

/// An `n x d` matrix of observations, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    data: DMatrix<f64>,
}

impl SampleMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::invalid("sample matrix must be nonempty"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sample matrix contains non-finite values"));
        }
        Ok(SampleMatrix { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("sample matrix must be nonempty"));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("ragged rows in sample matrix"));
        }
        let data = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Self::new(data)
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Number of coordinates per observation.
    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.data.row(i).transpose()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.data.column(j).iter().copied().collect()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn mean_vector(&self) -> DVector<f64> {
        let n = self.n() as f64;
        let mut m = DVector::zeros(self.dim());
        for i in 0..self.n() {
            m += self.row(i);
        }
        m / n
    }

    /// Sample covariance with denominator `n - 1`.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        let n = self.n();
        if n < 2 {
            return Err(Error::Degenerate(
                "covariance needs at least two observations".into(),
            ));
        }
        let mean = self.mean_vector();
        let mut cov = DMatrix::zeros(self.dim(), self.dim());
        for i in 0..n {
            let c = self.row(i) - &mean;
            cov += &c * c.transpose();
        }
        Ok(cov / (n as f64 - 1.0))
    }

    pub fn column_min_max(&self, j: usize) -> (f64, f64) {
        let col = self.data.column(j);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in col.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    pub fn all_in_open_unit_cube(&self) -> bool {
        self.data.iter().all(|&v| v > 0.0 && v < 1.0)
    }

    pub fn all_in_closed_unit_cube(&self) -> bool {
        self.data.iter().all(|&v| (0.0..=1.0).contains(&v))
    }

    /// Column-wise average ranks scaled by `1/(n+1)`, mapping any real data
    /// into the open unit cube.
    pub fn pseudo_observations(&self) -> SampleMatrix {
        let n = self.n();
        let mut out = DMatrix::zeros(n, self.dim());
        for j in 0..self.dim() {
            let ranks = ranks_average_ties(&self.column(j));
            for i in 0..n {
                out[(i, j)] = ranks[i] / (n as f64 + 1.0);
            }
        }
        SampleMatrix { data: out }
    }

    /// Map unit-cube data through the standard normal quantile, coordinate by
    /// coordinate. Errors if any entry lies outside (0,1).
    pub fn normal_scores(&self) -> Result<SampleMatrix> {
        let mut out = DMatrix::zeros(self.n(), self.dim());
        for i in 0..self.n() {
            for j in 0..self.dim() {
                out[(i, j)] = norm_quantile(self.data[(i, j)])?;
            }
        }
        Ok(SampleMatrix { data: out })
    }

    /// Write as CSV with header `u1,...,ud`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let header: Vec<String> = (1..=self.dim()).map(|j| format!("u{j}")).collect();
        wtr.write_record(&header)?;
        for i in 0..self.n() {
            let row: Vec<String> = (0..self.dim())
                .map(|j| format!("{}", self.data[(i, j)]))
                .collect();
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Read a headered CSV of reals. Header names are not interpreted.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let row: std::result::Result<Vec<f64>, _> =
                record.iter().map(|f| f.trim().parse::<f64>()).collect();
            let row =
                row.map_err(|e| Error::Config(format!("non-numeric CSV field: {e}")))?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Config("CSV contains no data rows".into()));
        }
        Self::from_rows(&rows)
    }
}

/// 1-based ranks with ties assigned their average rank.
pub fn ranks_average_ties(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        // Positions i..=j share the average of ranks i+1..=j+1.
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[idx[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}
