//! Mean-squared-error loss with analytic gradients for every parameter.

use crate::error::{Error, Result};

use super::model::FusedNet;

/// One training example: a row-major network input and its target.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub input: &'a [f64],
    pub target: f64,
}

fn check_batch(net: &FusedNet, batch: &[Sample<'_>]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::size("empty batch"));
    }
    let len = net.rows() * net.cols();
    if batch.iter().any(|s| s.input.len() != len) {
        return Err(Error::size(format!("batch inputs must hold {len} values")));
    }
    Ok(())
}

pub fn mse_loss(net: &FusedNet, batch: &[Sample<'_>]) -> Result<f64> {
    check_batch(net, batch)?;
    let sse: f64 = batch.iter().map(|s| (net.forward(s.input) - s.target).powi(2)).sum();
    Ok(sse / batch.len() as f64)
}

/// Loss and its gradient, laid out like [`FusedNet::parameters`]. Masked
/// kernel weights get gradient 0.
pub fn loss_and_gradients(net: &FusedNet, batch: &[Sample<'_>]) -> Result<(f64, Vec<f64>)> {
    check_batch(net, batch)?;
    let (rows, cols) = (net.rows(), net.cols());
    let modules = net.modules();
    let alpha = net.alpha();
    let mut grad = vec![0.0; net.parameter_count()];
    let alpha_at = grad.len() - alpha.len();
    let inv_b = 1.0 / batch.len() as f64;
    let mut loss = 0.0;

    for s in batch {
        let outputs = net.module_outputs(s.input);
        let pred: f64 = outputs.iter().zip(alpha).map(|(m, a)| a * m).sum();
        let err = pred - s.target;
        loss += err * err;
        let g = 2.0 * err * inv_b;

        let mut at = 0;
        for (i, m) in modules.iter().enumerate() {
            let f = m.size;
            let (out_r, out_c) = (rows - f + 1, cols - f + 1);
            let positions = (out_r * out_c) as f64;

            let mut pooled_sum = 0.0;
            let d_pooled = g * alpha[i] * m.head_w;
            let dz = d_pooled / positions;
            let (kernel_grad, rest) = grad[at..at + f * f + 3].split_at_mut(f * f);
            for p in 0..out_r {
                for q in 0..out_c {
                    let z = m.pre_activation(s.input, cols, p, q);
                    if z > 0.0 {
                        pooled_sum += z;
                        for a in 0..f {
                            let row = &s.input[(p + a) * cols + q..(p + a) * cols + q + f];
                            for (b, x) in row.iter().enumerate() {
                                if m.mask[a * f + b] {
                                    kernel_grad[a * f + b] += dz * x;
                                }
                            }
                        }
                        rest[0] += dz;
                    }
                }
            }
            let pooled = pooled_sum / positions;
            rest[1] += g * alpha[i] * pooled;
            rest[2] += g * alpha[i];
            grad[alpha_at + i] += g * outputs[i];
            at += f * f + 3;
        }
    }
    Ok((loss * inv_b, grad))
}

/// Kernel weights that are still retained but already within `epsilon` of 0.
pub fn small_weight_count(net: &FusedNet, epsilon: f64) -> usize {
    net.modules()
        .iter()
        .flat_map(|m| m.kernel.iter().zip(&m.mask))
        .filter(|(w, keep)| **keep && w.abs() <= epsilon)
        .count()
}

/// MSE plus `lambda` times the number of retained kernel weights with
/// `|w| <= epsilon`. The indicator term is reported, never differentiated.
pub fn penalized_loss(net: &FusedNet, batch: &[Sample<'_>], epsilon: f64, lambda: f64) -> Result<f64> {
    Ok(mse_loss(net, batch)? + lambda * small_weight_count(net, epsilon) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::litenet::conv::ConvModule;

    fn constant(v: f64) -> ConvModule {
        let mut m = ConvModule::zeros(2);
        m.head_b = v;
        m
    }

    #[test]
    fn exact_fit_has_zero_loss_and_gradient() {
        let net = FusedNet::new(vec![constant(2.0), constant(3.0)], vec![0.5, 0.5], 3, 3).unwrap();
        let x = [0.4; 9];
        let batch = [Sample { input: &x, target: 2.5 }, Sample { input: &x, target: 2.5 }];
        let (loss, grad) = loss_and_gradients(&net, &batch).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn alpha_gradient_by_hand() {
        // M = (2, 3), alpha = (0.5, 0.5) -> y_hat = 2.5; targets 1.5 and 3.5.
        let net = FusedNet::new(vec![constant(2.0), constant(3.0)], vec![0.5, 0.5], 3, 3).unwrap();
        let x = [0.0; 9];
        let batch = [Sample { input: &x, target: 1.5 }, Sample { input: &x, target: 3.5 }];
        let (loss, grad) = loss_and_gradients(&net, &batch).unwrap();
        assert_eq!(loss, 1.0);
        let n = grad.len();
        // mean of 2*(y_hat - y)*M_i: (2*1*2 + 2*(-1)*2)/2 = 0 and likewise 0.
        assert_eq!(grad[n - 2], 0.0);
        assert_eq!(grad[n - 1], 0.0);

        let batch = [Sample { input: &x, target: 1.5 }, Sample { input: &x, target: 2.0 }];
        let (_, grad) = loss_and_gradients(&net, &batch).unwrap();
        // errors 1.0 and 0.5: (2*1*2 + 2*0.5*2)/2 = 3, (2*1*3 + 2*0.5*3)/2 = 4.5
        assert_eq!(grad[n - 2], 3.0);
        assert_eq!(grad[n - 1], 4.5);
    }

    #[test]
    fn penalty_examples() {
        let mut m = ConvModule::new(2, vec![0.005, -0.002, 0.01, 0.5], 0.0, 0.0, 0.0).unwrap();
        let x = [1.0; 9];
        let net = FusedNet::new(vec![m.clone()], vec![1.0], 3, 3).unwrap();
        // constant zero prediction against target 1 -> MSE 1; three small weights.
        let batch = [Sample { input: &x, target: 1.0 }];
        assert_eq!(penalized_loss(&net, &batch, 0.01, 0.0).unwrap(), 1.0);
        assert!((penalized_loss(&net, &batch, 0.01, 0.1).unwrap() - 1.3).abs() < 1e-15);
        assert_eq!(penalized_loss(&net, &batch, 0.001, 0.1).unwrap(), 1.0);

        let target = (0.5f64).sqrt();
        let batch = [Sample { input: &x, target }];
        let loss = mse_loss(&net, &batch).unwrap();
        assert!((loss - 0.5).abs() < 1e-15);
        assert!((penalized_loss(&net, &batch, 0.01, 0.1).unwrap() - 0.8).abs() < 1e-12);

        m.mask[0] = false;
        m.kernel[0] = 0.0;
        let net = FusedNet::new(vec![m], vec![1.0], 3, 3).unwrap();
        assert_eq!(small_weight_count(&net, 0.01), 2);
    }

    #[test]
    fn empty_batch() {
        let net = FusedNet::new(vec![constant(1.0)], vec![1.0], 3, 3).unwrap();
        assert!(matches!(loss_and_gradients(&net, &[]), Err(Error::Size(_))));
    }
}
