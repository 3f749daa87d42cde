use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative residual norm below which a column counts as a linear
/// combination of the columns before it.
const COLLINEAR_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub r_squared: f64,
    /// `(X'X)⁻¹`.
    pub xtx_inv: DMatrix<f64>,
    pub x: DMatrix<f64>,
}

impl OlsFit {
    pub fn n_obs(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.x.ncols()
    }
}

/// Names of columns that lie in the span of the columns before them.
pub fn collinear_columns(x: &DMatrix<f64>, names: &[String]) -> Vec<String> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut out = Vec::new();
    for (j, name) in names.iter().enumerate() {
        let col = x.column(j).into_owned();
        let norm = col.norm();
        let mut v = col.clone();
        for q in &basis {
            let p = q.dot(&v);
            v -= q * p;
        }
        // A second pass keeps the projection accurate on ill-conditioned data.
        for q in &basis {
            let p = q.dot(&v);
            v -= q * p;
        }
        let rest = v.norm();
        if norm == 0.0 || rest <= COLLINEAR_TOL * norm {
            out.push(name.clone());
        } else {
            basis.push(v / rest);
        }
    }
    out
}

/// Least squares via Householder QR. `x` carries its own intercept column
/// when one is wanted; `centered_r2` selects the centered total sum of squares.
pub fn ols_fit(y: &[f64], x: DMatrix<f64>, names: Vec<String>, centered_r2: bool) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if n != y.len() || names.len() != k {
        return Err(Error::validation("design matrix, target and names disagree in shape"));
    }
    if n < k || k == 0 {
        return Err(Error::validation(format!("{n} observations for {k} parameters")));
    }
    let bad = collinear_columns(&x, &names);
    if !bad.is_empty() {
        return Err(Error::RankDeficient { columns: bad });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * DVector::from_column_slice(y);
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient { columns: names.clone() })?;
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient { columns: names.clone() })?;
    let xtx_inv = &r_inv * r_inv.transpose();
    let fitted = &x * &beta;
    let residuals: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let mean = if centered_r2 { y.iter().sum::<f64>() / n as f64 } else { 0.0 };
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if sst > 0.0 { 1.0 - ssr / sst } else { f64::NAN };
    Ok(OlsFit { names, coefficients: beta.iter().copied().collect(), residuals, r_squared, xtx_inv, x })
}

/// Design matrix from columns, with a leading column of ones if asked.
pub fn design(columns: &[Vec<f64>], intercept: bool) -> DMatrix<f64> {
    let n = columns.first().map_or(0, Vec::len);
    let k = columns.len() + usize::from(intercept);
    DMatrix::from_fn(n, k, |i, j| match (intercept, j) {
        (true, 0) => 1.0,
        (true, j) => columns[j - 1][i],
        (false, j) => columns[j][i],
    })
}
