//! Inverse cluster-weighted variance feature weights.
//!
//! For feature `i` and cluster `j`, the population variance of the feature
//! inside the cluster is `var[i][j]`; the weight is the reciprocal of
//! `sum_j p(C_j) * var[i][j]` with `p(C_j) = |C_j| / n`. Low within-cluster
//! dispersion means high weight.

use crate::clustering::ClusterModel;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Lower bound applied to the weighted mean variance before inversion.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWeightVector {
    pub weights: Vec<f64>,
    /// `d x k` per-cluster variances.
    pub variances: Matrix,
    pub cluster_probs: Vec<f64>,
    /// Features whose weighted variance hit [`VARIANCE_FLOOR`].
    pub clamped: Vec<bool>,
}

/// `d x k` matrix of within-cluster population variances.
pub fn weighted_cluster_variance(x: &Matrix, model: &ClusterModel) -> Result<Matrix> {
    let (n, d, k) = (x.rows(), x.cols(), model.k());
    if model.n() != n || model.centers.cols() != d {
        return Err(Error::size("cluster model was not fitted on this matrix"));
    }
    let mut sizes = vec![0usize; k];
    let mut sums = Matrix::zeros(k, d);
    for (i, &a) in model.assignments.iter().enumerate() {
        sizes[a] += 1;
        for (s, v) in sums.row_mut(a).iter_mut().zip(x.row(i)) {
            *s += v;
        }
    }
    if let Some(j) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::degenerate(format!("cluster {j} is empty")));
    }
    let means: Vec<Vec<f64>> = (0..k).map(|j| sums.row(j).iter().map(|s| s / sizes[j] as f64).collect()).collect();

    let mut var = Matrix::zeros(d, k);
    for (i, &a) in model.assignments.iter().enumerate() {
        for (f, v) in x.row(i).iter().enumerate() {
            let dev = v - means[a][f];
            var.set(f, a, var.get(f, a) + dev * dev);
        }
    }
    for f in 0..d {
        for (j, &size) in sizes.iter().enumerate() {
            var.set(f, j, var.get(f, j) / size as f64);
        }
    }
    Ok(var)
}

pub fn cluster_probabilities(model: &ClusterModel) -> Vec<f64> {
    let n = model.n() as f64;
    model.sizes.iter().map(|&s| s as f64 / n).collect()
}

pub fn compute_feature_weights(variances: &Matrix, probs: &[f64]) -> Result<FeatureWeightVector> {
    if variances.cols() != probs.len() {
        return Err(Error::size("one probability per cluster required"));
    }
    if probs.iter().any(|p| p.is_nan() || *p < 0.0) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::data("cluster probabilities must lie on the simplex"));
    }
    if variances.as_slice().iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::data("variances must be finite and non-negative"));
    }
    let mut weights = Vec::with_capacity(variances.rows());
    let mut clamped = Vec::with_capacity(variances.rows());
    for f in 0..variances.rows() {
        let mean_var: f64 = variances.row(f).iter().zip(probs).map(|(v, p)| p * v).sum();
        clamped.push(mean_var < VARIANCE_FLOOR);
        weights.push(1.0 / mean_var.max(VARIANCE_FLOOR));
    }
    Ok(FeatureWeightVector { weights, variances: variances.clone(), cluster_probs: probs.to_vec(), clamped })
}

/// Variances and weights of `x` under an already fitted clustering.
pub fn feature_weights(x: &Matrix, model: &ClusterModel) -> Result<FeatureWeightVector> {
    let var = weighted_cluster_variance(x, model)?;
    compute_feature_weights(&var, &cluster_probabilities(model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{fit_kmeans, KMeansParams, Standardizer};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model_from(assignments: Vec<usize>, k: usize, d: usize) -> ClusterModel {
        let mut sizes = vec![0; k];
        for &a in &assignments {
            sizes[a] += 1;
        }
        ClusterModel {
            centers: Matrix::zeros(k, d),
            assignments,
            sizes,
            objective: 0.0,
            iterations: 0,
            objective_trace: vec![],
        }
    }

    #[test]
    fn hand_variances() {
        // cluster 0 holds {0, 2}, cluster 1 holds {4, 8}; feature 1 constant.
        let x = Matrix::from_rows(&[vec![0.0, 7.0], vec![2.0, 7.0], vec![4.0, 7.0], vec![8.0, 7.0]]).unwrap();
        let var = weighted_cluster_variance(&x, &model_from(vec![0, 0, 1, 1], 2, 2)).unwrap();
        assert_eq!(var.row(0), &[1.0, 4.0]);
        assert_eq!(var.row(1), &[0.0, 0.0]);
    }

    #[test]
    fn singleton_cluster_has_zero_variance() {
        let x = Matrix::from_rows(&[vec![1.0], vec![5.0], vec![6.0]]).unwrap();
        let var = weighted_cluster_variance(&x, &model_from(vec![0, 1, 1], 2, 1)).unwrap();
        assert_eq!(var.get(0, 0), 0.0);
        assert_eq!(var.get(0, 1), 0.25);
    }

    #[test]
    fn two_cluster_worked_example() {
        let var = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let w = compute_feature_weights(&var, &[0.5, 0.5]).unwrap();
        assert_eq!(w.weights, vec![2.0, 0.5]);
        assert_eq!(w.clamped, vec![false, false]);
    }

    #[test]
    fn unit_and_zero_variance() {
        let var = Matrix::from_rows(&[vec![1.0, 1.0, 1.0], vec![0.0, 0.0, 0.0]]).unwrap();
        let w = compute_feature_weights(&var, &[0.2, 0.3, 0.5]).unwrap();
        assert!((w.weights[0] - 1.0).abs() < 1e-15);
        assert_eq!(w.weights[1], 1e12);
        assert_eq!(w.clamped, vec![false, true]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let var = Matrix::from_rows(&[vec![-1.0, 1.0]]).unwrap();
        assert!(matches!(compute_feature_weights(&var, &[0.5, 0.5]), Err(Error::Data(_))));
        let var = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        assert!(compute_feature_weights(&var, &[0.5, 0.6]).is_err());
        assert!(matches!(compute_feature_weights(&var, &[1.0]), Err(Error::Size(_))));
    }

    fn random_matrix(n: usize, d: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::new(n, d, (0..n * d).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect()).unwrap()
    }

    #[test]
    fn reconstruction_identity_and_simplex() {
        let x = random_matrix(200, 4, 2);
        let m = fit_kmeans(&x, &KMeansParams { k: 5, seed: 1, ..Default::default() }).unwrap();
        let w = feature_weights(&x, &m).unwrap();
        assert!((w.cluster_probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for f in 0..4 {
            let mean_var: f64 = w.variances.row(f).iter().zip(&w.cluster_probs).map(|(v, p)| v * p).sum();
            assert!((w.weights[f] * mean_var - 1.0).abs() < 1e-10);
            assert!(w.weights[f] > 0.0 && w.weights[f].is_finite());
        }
    }

    #[test]
    fn scale_covariance_on_fixed_clusters() {
        let x = random_matrix(150, 3, 4);
        let m = fit_kmeans(&x, &KMeansParams { k: 4, seed: 0, ..Default::default() }).unwrap();
        let base = feature_weights(&x, &m).unwrap();
        let c = -3.5;
        let mut scaled = x.clone();
        for r in 0..scaled.rows() {
            scaled.set(r, 1, scaled.get(r, 1) * c);
        }
        let w = feature_weights(&scaled, &m).unwrap();
        for j in 0..4 {
            let expect = base.variances.get(1, j) * c * c;
            assert!((w.variances.get(1, j) - expect).abs() <= 1e-10 * expect);
        }
        let expect = base.weights[1] / (c * c);
        assert!((w.weights[1] - expect).abs() <= 1e-10 * expect);
        assert_eq!(w.weights[0], base.weights[0]);
    }

    #[test]
    fn standardized_weights_ignore_input_scale() {
        let x = random_matrix(150, 3, 6);
        let mut scaled = x.clone();
        for r in 0..scaled.rows() {
            scaled.set(r, 0, scaled.get(r, 0) * 8.0);
        }
        let params = KMeansParams { k: 4, seed: 3, ..Default::default() };
        let weights = |m: &Matrix| {
            let z = Standardizer::fit(m).transform(m);
            let model = fit_kmeans(&z, &params).unwrap();
            feature_weights(&z, &model).unwrap().weights
        };
        let (a, b) = (weights(&x), weights(&scaled));
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() <= 1e-10 * u.abs());
        }
    }

    #[test]
    fn lower_variance_ranks_higher() {
        let var = Matrix::from_rows(&[vec![0.5, 1.0, 2.0], vec![0.5, 1.5, 2.0]]).unwrap();
        let w = compute_feature_weights(&var, &[0.2, 0.4, 0.4]).unwrap();
        assert!(w.weights[0] > w.weights[1]);
    }
}
