//! Per-feature z-score standardization.

use alloc::vec::Vec;

use crate::error::{check_dim, Result};
use crate::tensor::Tensor2;

/// Column means and population standard deviations of a view. Constant
/// columns get a zero scale and map to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(view: &Tensor2) -> Self {
        let n = view.rows() as f64;
        let d = view.cols();
        let mut mean = alloc::vec![0.0; d];
        for row in view.iter_rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = alloc::vec![0.0; d];
        for row in view.iter_rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = libm::sqrt(s / n);
                // Rounding noise of a constant column.
                if sd <= 1e-12 * m.abs().max(1.0) {
                    0.0
                } else {
                    sd
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn from_parts(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        check_dim("standardizer scale length", mean.len(), std.len())?;
        Ok(Self { mean, std })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, view: &Tensor2) -> Result<Tensor2> {
        check_dim("standardized view width", self.mean.len(), view.cols())?;
        let mut data = Vec::with_capacity(view.as_slice().len());
        for row in view.iter_rows() {
            for ((v, m), s) in row.iter().zip(&self.mean).zip(&self.std) {
                data.push(if *s == 0.0 { 0.0 } else { (v - m) / s });
            }
        }
        Ok(Tensor2::from_raw(view.rows(), view.cols(), data))
    }
}

/// Standardizes a view with its own statistics.
pub fn standardize(view: &Tensor2) -> Tensor2 {
    let s = Standardizer::fit(view);
    // Widths match by construction.
    s.transform(view).unwrap_or_else(|_| view.clone())
}
