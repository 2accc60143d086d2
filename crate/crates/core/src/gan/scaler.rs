use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Per-dimension affine map of `[min, max]` onto `[−1, 1]`. Constant
/// dimensions map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(x: &Matrix) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::Config("cannot fit a scaler on zero rows".into()));
        }
        let mut min = x.row(0).to_vec();
        let mut max = min.clone();
        for row in x.row_iter().skip(1) {
            for ((lo, hi), &v) in min.iter_mut().zip(max.iter_mut()).zip(row) {
                *lo = lo.min(v);
                *hi = hi.max(v);
            }
        }
        Ok(Self { min, max })
    }

    /// The scaler that leaves `[−1, 1]` data unchanged.
    pub fn identity(dim: usize) -> Self {
        Self {
            min: vec![-1.0; dim],
            max: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.dim() {
            return Err(Error::Usage(format!(
                "scaler fitted on {} dims, input has {}",
                self.dim(),
                x.cols()
            )));
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                let (lo, hi) = (self.min[j], self.max[j]);
                *v = if hi > lo {
                    2.0 * (*v - lo) / (hi - lo) - 1.0
                } else {
                    0.0
                };
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maps_range_and_constants() {
        let x = Matrix::from_rows(&[[0.0, 5.0], [4.0, 5.0], [2.0, 5.0]]).unwrap();
        let s = MinMaxScaler::fit(&x).unwrap();
        let y = s.transform(&x).unwrap();
        assert_eq!(y, Matrix::from_rows(&[[-1.0, 0.0], [1.0, 0.0], [0.0, 0.0]]).unwrap());
    }

    #[test]
    fn identity_is_identity() {
        let x = Matrix::from_rows(&[[0.25, -0.5]]).unwrap();
        assert_eq!(MinMaxScaler::identity(2).transform(&x).unwrap(), x);
    }
}
