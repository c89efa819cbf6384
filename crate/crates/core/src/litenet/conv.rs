//! Single-channel valid cross-correlation module: conv, rectifier, global
//! average pool, scalar affine head.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvModule {
    pub size: usize,
    /// Row-major `size x size` kernel. Masked entries are stored as 0.
    pub kernel: Vec<f64>,
    /// `true` = weight retained.
    pub mask: Vec<bool>,
    pub bias: f64,
    pub head_w: f64,
    pub head_b: f64,
}

impl ConvModule {
    pub fn new(size: usize, kernel: Vec<f64>, bias: f64, head_w: f64, head_b: f64) -> Result<Self> {
        if size == 0 {
            return Err(Error::size("kernel size must be >= 1"));
        }
        if kernel.len() != size * size {
            return Err(Error::size(format!("{size}x{size} kernel needs {} weights", size * size)));
        }
        Ok(Self { size, mask: vec![true; kernel.len()], kernel, bias, head_w, head_b })
    }

    pub fn zeros(size: usize) -> Self {
        Self::new(size, vec![0.0; size * size], 0.0, 0.0, 0.0).expect("size >= 1")
    }

    /// Activation-map shape for a `rows x cols` input.
    pub fn output_dims(&self, rows: usize, cols: usize) -> Result<(usize, usize)> {
        if rows < self.size || cols < self.size {
            return Err(Error::size(format!("{rows}x{cols} input is smaller than the {0}x{0} kernel", self.size)));
        }
        Ok((rows - self.size + 1, cols - self.size + 1))
    }

    pub fn unmasked(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Pre-activation at output position `(m, n)`.
    #[inline]
    pub(crate) fn pre_activation(&self, input: &[f64], cols: usize, m: usize, n: usize) -> f64 {
        let f = self.size;
        let mut acc = 0.0;
        for i in 0..f {
            let row = &input[(m + i) * cols + n..(m + i) * cols + n + f];
            for (j, x) in row.iter().enumerate() {
                if self.mask[i * f + j] {
                    acc += self.kernel[i * f + j] * x;
                }
            }
        }
        acc + self.bias
    }
}

/// `Z[m][n] = relu(sum_ij W[i][j] * X[m+i][n+j] + b)` over every valid
/// position.
pub fn conv_forward(input: &Matrix, module: &ConvModule) -> Result<Matrix> {
    let (out_r, out_c) = module.output_dims(input.rows(), input.cols())?;
    if !input.is_finite() {
        return Err(Error::data("non-finite input"));
    }
    let mut out = Matrix::zeros(out_r, out_c);
    for m in 0..out_r {
        for n in 0..out_c {
            let z = module.pre_activation(input.as_slice(), input.cols(), m, n);
            out.set(m, n, z.max(0.0));
        }
    }
    Ok(out)
}

/// Module output `head_w * mean(conv_forward(X)) + head_b`.
pub fn module_forward(input: &Matrix, module: &ConvModule) -> Result<f64> {
    let map = conv_forward(input, module)?;
    let pooled = map.as_slice().iter().sum::<f64>() / map.as_slice().len() as f64;
    Ok(module.head_w * pooled + module.head_b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(r: usize, c: usize) -> Matrix {
        Matrix::new(r, c, vec![1.0; r * c]).unwrap()
    }

    #[test]
    fn zero_kernel_gives_zero_map() {
        let x = Matrix::new(4, 5, (0..20).map(|v| v as f64 - 7.0).collect()).unwrap();
        let out = conv_forward(&x, &ConvModule::zeros(3)).unwrap();
        assert_eq!((out.rows(), out.cols()), (2, 3));
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ones_on_ones() {
        let m = ConvModule::new(2, vec![1.0; 4], 0.0, 1.0, 0.0).unwrap();
        let out = conv_forward(&ones(3, 3), &m).unwrap();
        assert_eq!(out, Matrix::new(2, 2, vec![4.0; 4]).unwrap());
        assert_eq!(module_forward(&ones(3, 3), &m).unwrap(), 4.0);
    }

    #[test]
    fn rectifier_clips() {
        let m = ConvModule::new(1, vec![-1.0], 0.0, 1.0, 0.0).unwrap();
        assert_eq!(conv_forward(&ones(1, 1), &m).unwrap().get(0, 0), 0.0);
    }

    #[test]
    fn index_convention() {
        // Z[0][1] = sum W[i][j] X[i][1 + j]
        let x = Matrix::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let m = ConvModule::new(2, vec![1.0, 10.0, 100.0, 1000.0], 0.5, 1.0, 0.0).unwrap();
        let out = conv_forward(&x, &m).unwrap();
        assert_eq!(out.get(0, 0), 1.0 + 20.0 + 400.0 + 5000.0 + 0.5);
        assert_eq!(out.get(0, 1), 2.0 + 30.0 + 500.0 + 6000.0 + 0.5);
    }

    #[test]
    fn constant_heads() {
        let mut m = ConvModule::zeros(2);
        m.head_b = 3.0;
        let x = Matrix::new(3, 3, (0..9).map(|v| v as f64).collect()).unwrap();
        assert_eq!(module_forward(&x, &m).unwrap(), 3.0);
        let m = ConvModule::new(2, vec![0.3, -0.2, 0.9, 0.1], 0.2, 0.0, -1.25).unwrap();
        assert_eq!(module_forward(&x, &m).unwrap(), -1.25);
    }

    #[test]
    fn input_smaller_than_kernel() {
        assert!(matches!(conv_forward(&ones(2, 5), &ConvModule::zeros(3)), Err(Error::Size(_))));
    }
}
