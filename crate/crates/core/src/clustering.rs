//! k-means++ seeding followed by Lloyd iterations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Per-column z-score parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    /// Population standard deviations; zero-variance columns store 1.
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let n = x.rows() as f64;
        let mut means = vec![0.0; x.cols()];
        let mut stds = vec![0.0; x.cols()];
        for c in 0..x.cols() {
            let m = (0..x.rows()).map(|r| x.get(r, c)).sum::<f64>() / n;
            let v = (0..x.rows()).map(|r| (x.get(r, c) - m).powi(2)).sum::<f64>() / n;
            means[c] = m;
            stds[c] = if v > 0.0 { v.sqrt() } else { 1.0 };
        }
        Self { means, stds }
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.means[c]) / self.stds[c];
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    pub max_iter: usize,
    /// Stop once the largest L2 center movement drops below this.
    pub tol: f64,
    pub seed: u64,
    /// Independent seedings; the run with the lowest objective is kept.
    pub n_init: usize,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self { k: 10, max_iter: 100, tol: 1e-6, seed: 0, n_init: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub centers: Matrix,
    pub assignments: Vec<usize>,
    pub sizes: Vec<usize>,
    /// Sum of squared distances to the assigned centers.
    pub objective: f64,
    pub iterations: usize,
    /// Objective after every assignment step, in order.
    pub objective_trace: Vec<f64>,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centers.rows()
    }

    pub fn n(&self) -> usize {
        self.assignments.len()
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest center for every row (ties to the lowest index) and the objective.
fn assign(x: &Matrix, centers: &Matrix, assignments: &mut [usize], dists: &mut [f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..x.rows() {
        let row = x.row(i);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for j in 0..centers.rows() {
            let d = sq_dist(row, centers.row(j));
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        assignments[i] = best;
        dists[i] = best_d;
        total += best_d;
    }
    total
}

fn seed_plus_plus(x: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = x.rows();
    let mut centers = Matrix::zeros(k, x.cols());
    let first = rng.random_range(0..n);
    centers.row_mut(0).copy_from_slice(x.row(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), centers.row(0))).collect();

    for j in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &d) in nearest.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` just past the final sum.
            chosen.unwrap_or_else(|| nearest.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(j).copy_from_slice(x.row(pick));
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), centers.row(j)));
        }
    }
    centers
}

/// Moves every empty center onto the point currently farthest from its own
/// center. Returns false when no point has a positive distance left.
fn reseed_empty(x: &Matrix, centers: &mut Matrix, sizes: &[usize], dists: &mut [f64]) -> bool {
    for j in (0..sizes.len()).filter(|&j| sizes[j] == 0) {
        let (far, &far_d) =
            dists.iter().enumerate().fold((0, &f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        if far_d <= 0.0 {
            return false;
        }
        centers.row_mut(j).copy_from_slice(x.row(far));
        dists[far] = 0.0;
    }
    true
}

fn counts(assignments: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    sizes
}

pub fn fit_kmeans(x: &Matrix, params: &KMeansParams) -> Result<ClusterModel> {
    let (n, k) = (x.rows(), params.k);
    if k < 1 {
        return Err(Error::size("k must be >= 1"));
    }
    if n < k {
        return Err(Error::size(format!("{n} points cannot form {k} clusters")));
    }
    if params.max_iter < 1 {
        return Err(Error::size("max_iter must be >= 1"));
    }
    if params.tol.is_nan() || params.tol < 0.0 {
        return Err(Error::data("tol must be >= 0"));
    }
    if params.n_init < 1 {
        return Err(Error::size("n_init must be >= 1"));
    }
    if !x.is_finite() {
        return Err(Error::data("clustering input contains non-finite values"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best = fit_once(x, params, &mut rng)?;
    for _ in 1..params.n_init {
        let run = fit_once(x, params, &mut rng)?;
        if run.objective < best.objective {
            best = run;
        }
    }
    Ok(best)
}

fn fit_once(x: &Matrix, params: &KMeansParams, rng: &mut ChaCha8Rng) -> Result<ClusterModel> {
    let (n, d, k) = (x.rows(), x.cols(), params.k);
    let mut centers = seed_plus_plus(x, k, rng);
    let mut assignments = vec![0usize; n];
    let mut dists = vec![0.0; n];
    let mut trace = Vec::new();
    let mut iterations = 0;

    while iterations < params.max_iter {
        iterations += 1;
        trace.push(assign(x, &centers, &mut assignments, &mut dists));

        let sizes = counts(&assignments, k);
        let mut next = Matrix::zeros(k, d);
        for (i, &a) in assignments.iter().enumerate() {
            for (c, v) in next.row_mut(a).iter_mut().zip(x.row(i)) {
                *c += v;
            }
        }
        for (j, &size) in sizes.iter().enumerate() {
            if size > 0 {
                next.row_mut(j).iter_mut().for_each(|v| *v /= size as f64);
            }
        }
        // Distances relative to the updated centers drive re-seeding.
        for (i, &a) in assignments.iter().enumerate() {
            dists[i] = sq_dist(x.row(i), next.row(a));
        }
        reseed_empty(x, &mut next, &sizes, &mut dists);

        let movement = (0..k).map(|j| sq_dist(centers.row(j), next.row(j)).sqrt()).fold(0.0, f64::max);
        centers = next;
        if movement < params.tol {
            break;
        }
    }

    let mut objective = assign(x, &centers, &mut assignments, &mut dists);
    trace.push(objective);
    let mut sizes = counts(&assignments, k);
    let mut attempts = 0;
    while sizes.contains(&0) {
        if attempts == k || !reseed_empty(x, &mut centers, &sizes, &mut dists) {
            return Err(Error::degenerate(format!("fewer than {k} distinct points; cannot fill every cluster")));
        }
        attempts += 1;
        objective = assign(x, &centers, &mut assignments, &mut dists);
        trace.push(objective);
        sizes = counts(&assignments, k);
    }

    Ok(ClusterModel { centers, assignments, sizes, objective, iterations, objective_trace: trace })
}

/// Sum over points of the squared distance to the nearest center.
pub fn kmeans_objective(x: &Matrix, centers: &Matrix) -> Result<f64> {
    if x.cols() != centers.cols() {
        return Err(Error::size(format!("points have {} dimensions, centers {}", x.cols(), centers.cols())));
    }
    if centers.rows() == 0 {
        return Err(Error::size("no centers"));
    }
    Ok((0..x.rows())
        .map(|i| (0..centers.rows()).map(|j| sq_dist(x.row(i), centers.row(j))).fold(f64::INFINITY, f64::min))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(k: usize, seed: u64) -> KMeansParams {
        KMeansParams { k, max_iter: 100, tol: 1e-9, seed, n_init: 10 }
    }

    /// Exhaustive optimum over every 2-partition.
    fn brute_force_two(x: &Matrix) -> f64 {
        let n = x.rows();
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << n) - 1 {
            let mut cost = 0.0;
            for side in [true, false] {
                let members: Vec<usize> = (0..n).filter(|&i| ((mask >> i) & 1 == 1) == side).collect();
                let mut mean = vec![0.0; x.cols()];
                for &i in &members {
                    for (m, v) in mean.iter_mut().zip(x.row(i)) {
                        *m += v / members.len() as f64;
                    }
                }
                cost += members.iter().map(|&i| sq_dist(x.row(i), &mean)).sum::<f64>();
            }
            best = best.min(cost);
        }
        best
    }

    fn sorted_centers(m: &ClusterModel) -> Vec<Vec<f64>> {
        let mut c: Vec<Vec<f64>> = (0..m.k()).map(|j| m.centers.row(j).to_vec()).collect();
        c.sort_by(|a, b| a.partial_cmp(b).unwrap());
        c
    }

    #[test]
    fn one_dimensional_pairs() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![10.0], vec![11.0]]).unwrap();
        assert_eq!(brute_force_two(&x), 1.0);
        for seed in 0..10 {
            let m = fit_kmeans(&x, &params(2, seed)).unwrap();
            assert_eq!(sorted_centers(&m), vec![vec![0.5], vec![10.5]]);
            assert!((m.objective - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn square_corners() {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 2.0], vec![8.0, 0.0], vec![8.0, 2.0]]).unwrap();
        assert_eq!(brute_force_two(&x), 4.0);
        let m = fit_kmeans(&x, &params(2, 3)).unwrap();
        assert_eq!(sorted_centers(&m), vec![vec![0.0, 1.0], vec![8.0, 1.0]]);
        assert!((m.objective - 4.0).abs() < 1e-12);
        assert!((kmeans_objective(&x, &m.centers).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn repeated_point_single_cluster() {
        let x = Matrix::from_rows(&vec![vec![3.0, -1.0]; 6]).unwrap();
        let m = fit_kmeans(&x, &params(1, 0)).unwrap();
        assert_eq!(m.centers.row(0), &[3.0, -1.0]);
        assert_eq!(m.objective, 0.0);
        assert_eq!(m.sizes, vec![6]);
    }

    #[test]
    fn too_few_distinct_points_is_degenerate() {
        let x = Matrix::from_rows(&vec![vec![1.0]; 4]).unwrap();
        assert!(matches!(fit_kmeans(&x, &params(2, 0)), Err(Error::Degenerate(_))));
    }

    #[test]
    fn objective_examples() {
        let x = Matrix::from_rows(&[vec![0.0], vec![2.0]]).unwrap();
        let c = Matrix::from_rows(&[vec![1.0]]).unwrap();
        assert_eq!(kmeans_objective(&x, &c).unwrap(), 2.0);
        let single = Matrix::from_rows(&[vec![4.0, 4.0]]).unwrap();
        assert_eq!(kmeans_objective(&single, &single).unwrap(), 0.0);
        let wrong = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        assert!(matches!(kmeans_objective(&x, &wrong), Err(Error::Size(_))));
    }

    #[test]
    fn errors() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(matches!(fit_kmeans(&x, &params(3, 0)), Err(Error::Size(_))));
        let bad = Matrix::from_rows(&[vec![0.0], vec![f64::NAN]]).unwrap();
        assert!(matches!(fit_kmeans(&bad, &params(1, 0)), Err(Error::Data(_))));
    }

    #[test]
    fn invariants_on_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..300).map(|_| (0..3).map(|_| rng.random::<f64>() * 10.0).collect()).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let m = fit_kmeans(&x, &params(10, 1)).unwrap();
        assert_eq!(m.sizes.iter().sum::<usize>(), 300);
        assert!(m.sizes.iter().all(|&s| s > 0));
        for w in m.objective_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9));
        }
        for i in 0..x.rows() {
            let a = m.assignments[i];
            let da = sq_dist(x.row(i), m.centers.row(a));
            for j in 0..m.k() {
                let dj = sq_dist(x.row(i), m.centers.row(j));
                assert!(da < dj || (da == dj && a <= j));
            }
        }
        let recomputed: f64 = (0..x.rows()).map(|i| sq_dist(x.row(i), m.centers.row(m.assignments[i]))).sum();
        assert!((recomputed - m.objective).abs() <= 1e-10 * recomputed);
        assert_eq!(m, fit_kmeans(&x, &params(10, 1)).unwrap());
    }

    #[test]
    fn standardizer_zero_mean_unit_variance() {
        let x = Matrix::from_rows(&[vec![1.0, 5.0], vec![3.0, 5.0], vec![5.0, 5.0]]).unwrap();
        let s = Standardizer::fit(&x);
        assert_eq!(s.means, vec![3.0, 5.0]);
        assert_eq!(s.stds[1], 1.0);
        let z = s.transform(&x);
        assert_eq!(z.column(1), vec![0.0; 3]);
        let col = z.column(0);
        assert!((col.iter().map(|v| v * v).sum::<f64>() / 3.0 - 1.0).abs() < 1e-12);
    }
}
