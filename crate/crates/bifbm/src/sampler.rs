//! Exact bi-fBm sampling on a uniform grid.
//!
//! The increments of bi-fBm are not stationary, so circulant/FFT embeddings
//! do not apply; instead the finite-dimensional law is realized exactly via
//! a dense Cholesky factor of the covariance matrix over the grid nodes
//! (node `t_0 = 0` is excluded as a degenerate row and `B_0 = 0` is
//! prepended). At desk scale (up to a few thousand nodes) the `O(n^3)`
//! factorization is paid once per batch.

use std::io::Write;

use ndarray::{Array2, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::kernel::covariance;
use crate::math::fmt_sig12;
use crate::params::ModelParams;
use crate::rng::path_rng;

/// Covariance matrix `[R(t_i, t_j)]` over the nodes `t_1..t_{n+pad}`.
pub fn build_cov_matrix(params: &ModelParams, grid: &TimeGrid) -> Result<Array2<f64>> {
    let dim = grid.n_nodes() - 1;
    let mut m = Array2::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..=i {
            let v = covariance(params, grid.node(i + 1), grid.node(j + 1))?;
            m[[i, j]] = v;
            m[[j, i]] = v;
        }
    }
    Ok(m)
}

/// Lower-triangular Cholesky factor with jitter escalation.
///
/// A failed pivot restarts the factorization with `1e-12 * max_diag` added
/// to the diagonal, escalating tenfold up to `1e-8 * max_diag` before giving
/// up with the failing pivot index.
pub fn cholesky_factor(matrix: &Array2<f64>) -> Result<Array2<f64>> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::domain("matrix must be square".to_string()));
    }
    let mut max_abs = 0.0f64;
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            asym = asym.max((matrix[[i, j]] - matrix[[j, i]]).abs());
        }
        for j in 0..n {
            max_abs = max_abs.max(matrix[[i, j]].abs());
        }
    }
    if asym > 1e-10 * max_abs.max(1e-300) {
        return Err(Error::domain(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    let max_diag = (0..n).fold(0.0f64, |m, i| m.max(matrix[[i, i]].abs()));

    let mut last_pivot = 0;
    for jitter_exp in [f64::NEG_INFINITY, -12.0, -11.0, -10.0, -9.0, -8.0] {
        let jitter = if jitter_exp.is_finite() {
            10f64.powf(jitter_exp) * max_diag
        } else {
            0.0
        };
        match try_cholesky(matrix, jitter, n) {
            Ok(l) => return Ok(l),
            Err(pivot) => last_pivot = pivot,
        }
    }
    Err(Error::Factorization { pivot: last_pivot })
}

/// Left-looking Cholesky on a flat row-major buffer; the column update is
/// parallel over the trailing rows.
fn try_cholesky(
    matrix: &Array2<f64>,
    jitter: f64,
    n: usize,
) -> std::result::Result<Array2<f64>, usize> {
    let mut buf: Vec<f64> = matrix.iter().copied().collect();
    if jitter > 0.0 {
        for i in 0..n {
            buf[i * n + i] += jitter;
        }
    }
    for j in 0..n {
        let (head, tail) = buf.split_at_mut((j + 1) * n);
        let row_j = &mut head[j * n..];
        let diag = row_j[j] - row_j[..j].iter().map(|v| v * v).sum::<f64>();
        if diag <= 0.0 || !diag.is_finite() {
            return Err(j);
        }
        let ljj = diag.sqrt();
        row_j[j] = ljj;
        let prefix = &row_j[..j];
        tail.par_chunks_mut(n).for_each(|row| {
            let dot: f64 = row[..j].iter().zip(prefix).map(|(a, b)| a * b).sum();
            row[j] = (row[j] - dot) / ljj;
        });
    }
    // zero the strict upper triangle left over from the input copy
    for i in 0..n {
        for j in i + 1..n {
            buf[i * n + j] = 0.0;
        }
    }
    Ok(Array2::from_shape_vec((n, n), buf).expect("shape"))
}

/// A batch of sampled trajectories on a common grid; immutable once built.
#[derive(Debug, Clone)]
pub struct PathBatch {
    params: ModelParams,
    grid: TimeGrid,
    seed: u64,
    /// `n_paths x n_nodes`, `values[[p, 0]] = 0`.
    values: Array2<f64>,
}

impl PathBatch {
    /// Wrap externally supplied values (synthetic batches for tests and
    /// degenerate cases). Every path must start at zero.
    pub fn from_values(
        params: ModelParams,
        grid: TimeGrid,
        seed: u64,
        values: Array2<f64>,
    ) -> Result<Self> {
        if values.ncols() != grid.n_nodes() {
            return Err(Error::domain(format!(
                "expected {} nodes per path, got {}",
                grid.n_nodes(),
                values.ncols()
            )));
        }
        if values.nrows() == 0 {
            return Err(Error::domain("batch needs at least one path".to_string()));
        }
        if (0..values.nrows()).any(|p| values[[p, 0]] != 0.0) {
            return Err(Error::domain("paths must start at B(0) = 0".to_string()));
        }
        Ok(Self {
            params,
            grid,
            seed,
            values,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_paths(&self) -> usize {
        self.values.nrows()
    }

    pub fn path(&self, p: usize) -> ArrayView1<'_, f64> {
        self.values.row(p)
    }

    pub fn value(&self, p: usize, node: usize) -> f64 {
        self.values[[p, node]]
    }

    /// CSV dump `path_id,t,value`, one row per node per path, times and
    /// values printed with 12 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "path_id,t,value")?;
        for p in 0..self.n_paths() {
            for i in 0..self.grid.n_nodes() {
                writeln!(
                    w,
                    "{p},{},{}",
                    fmt_sig12(self.grid.node(i)),
                    fmt_sig12(self.values[[p, i]])
                )?;
            }
        }
        Ok(())
    }
}

/// Draws `n_paths` exact trajectories. Each path is `L z` with `z` standard
/// normal from the `(seed, path_index)` substream, so identical arguments
/// reproduce bit-identical batches regardless of thread count.
pub fn sample_paths(
    params: &ModelParams,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<PathBatch> {
    if n_paths == 0 {
        return Err(Error::domain("n_paths must be at least 1".to_string()));
    }
    let cov = build_cov_matrix(params, grid)?;
    let factor = cholesky_factor(&cov)?;
    sample_with_factor(params, grid, n_paths, seed, &factor)
}

/// Sampling against a precomputed factor (shared across estimator runs).
pub fn sample_with_factor(
    params: &ModelParams,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    factor: &Array2<f64>,
) -> Result<PathBatch> {
    let dim = factor.nrows();
    let n_nodes = grid.n_nodes();
    if dim + 1 != n_nodes {
        return Err(Error::domain(format!(
            "factor dimension {dim} does not match grid with {n_nodes} nodes"
        )));
    }
    let owned;
    let l = match factor.as_slice() {
        Some(s) => s,
        None => {
            owned = factor.to_owned();
            owned.as_slice().expect("owned arrays are contiguous")
        }
    };
    let rows: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p as u64);
            let z: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let mut row = Vec::with_capacity(n_nodes);
            row.push(0.0);
            for i in 0..dim {
                let li = &l[i * dim..i * dim + i + 1];
                row.push(li.iter().zip(&z).map(|(a, b)| a * b).sum());
            }
            row
        })
        .collect();
    let mut values = Array2::zeros((n_paths, n_nodes));
    for (p, row) in rows.into_iter().enumerate() {
        for (i, v) in row.into_iter().enumerate() {
            values[[p, i]] = v;
        }
    }
    Ok(PathBatch {
        params: *params,
        grid: *grid,
        seed,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::norm_cdf;

    fn crit() -> ModelParams {
        ModelParams::new(0.75, 2.0 / 3.0).unwrap()
    }

    #[test]
    fn cov_matrix_brownian_two_nodes() {
        let grid = TimeGrid::new(2.0, 2, 0).unwrap();
        let m = build_cov_matrix(&ModelParams::brownian(), &grid).unwrap();
        let want = [[1.0, 1.0], [1.0, 2.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((m[[i, j]] - want[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cov_matrix_diagonal_is_time() {
        let grid = TimeGrid::new(1.0, 7, 2).unwrap();
        let m = build_cov_matrix(&crit(), &grid).unwrap();
        for i in 0..m.nrows() {
            assert!((m[[i, i]] - grid.node(i + 1)).abs() < 1e-12);
        }
        // nodes {1, 2} at (3/4, 2/3)
        let m2 = build_cov_matrix(&crit(), &TimeGrid::new(2.0, 2, 0).unwrap()).unwrap();
        assert!((m2[[0, 1]] - 0.911_717_182_609_293_6).abs() < 1e-12);
        assert!((m2[[0, 0]] - 1.0).abs() < 1e-12);
        assert!((m2[[1, 1]] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_identity_and_hand_checkable() {
        let eye = Array2::eye(3);
        let l = cholesky_factor(&eye).unwrap();
        assert!(l
            .iter()
            .zip(eye.iter())
            .all(|(a, b)| (a - b).abs() < 1e-15));

        let m = ndarray::arr2(&[[1.0, 1.0], [1.0, 2.0]]);
        let l = cholesky_factor(&m).unwrap();
        let want = [[1.0, 0.0], [1.0, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((l[[i, j]] - want[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_reconstructs_bifbm_matrix() {
        let grid = TimeGrid::new(1.0, 256, 0).unwrap();
        let m = build_cov_matrix(&crit(), &grid).unwrap();
        let l = cholesky_factor(&m).unwrap();
        let recon = l.dot(&l.t());
        let num: f64 = (&recon - &m).iter().map(|d| d * d).sum::<f64>().sqrt();
        let den: f64 = m.iter().map(|d| d * d).sum::<f64>().sqrt();
        assert!(num / den <= 1e-8, "relative Frobenius error {}", num / den);
    }

    #[test]
    fn cholesky_rejects_indefinite_with_pivot() {
        let m = ndarray::arr2(&[[1.0, 0.0], [0.0, -5.0]]);
        match cholesky_factor(&m) {
            Err(Error::Factorization { pivot }) => assert_eq!(pivot, 1),
            other => panic!("expected factorization error, got {other:?}"),
        }
        let asym = ndarray::arr2(&[[1.0, 0.5], [0.1, 1.0]]);
        assert!(cholesky_factor(&asym).is_err());
    }

    #[test]
    fn sampling_is_reproducible() {
        let grid = TimeGrid::new(1.0, 32, 4).unwrap();
        let a = sample_paths(&crit(), &grid, 8, 99).unwrap();
        let b = sample_paths(&crit(), &grid, 8, 99).unwrap();
        assert_eq!(a.values, b.values);
        let c = sample_paths(&crit(), &grid, 8, 100).unwrap();
        assert_ne!(a.values, c.values);
        for p in 0..8 {
            assert_eq!(a.value(p, 0), 0.0);
        }
    }

    #[test]
    fn terminal_variance_matches_covariance() {
        // E[B_T^2] = T, checked over 10^4 single-step paths within 3 SE
        let grid = TimeGrid::new(1.0, 1, 0).unwrap();
        let batch = sample_paths(&crit(), &grid, 10_000, 5).unwrap();
        let n = batch.n_paths() as f64;
        let var: f64 = (0..batch.n_paths())
            .map(|p| batch.value(p, 1).powi(2))
            .sum::<f64>()
            / n;
        let se = 1.0 * (2.0 / n).sqrt(); // Var(B_T^2) = 2 T^2 for a Gaussian
        assert!((var - 1.0).abs() <= 3.0 * se, "var {var} vs 1 +- {se}");
    }

    #[test]
    fn empirical_covariance_matches_matrix() {
        let grid = TimeGrid::new(1.0, 16, 0).unwrap();
        let params = crit();
        let batch = sample_paths(&params, &grid, 10_000, 21).unwrap();
        let want = build_cov_matrix(&params, &grid).unwrap();
        let n = batch.n_paths() as f64;
        for i in 0..16 {
            for j in 0..=i {
                let emp: f64 = (0..batch.n_paths())
                    .map(|p| batch.value(p, i + 1) * batch.value(p, j + 1))
                    .sum::<f64>()
                    / n;
                let se = ((want[[i, i]] * want[[j, j]] + want[[i, j]].powi(2)) / n).sqrt();
                assert!(
                    (emp - want[[i, j]]).abs() <= 3.0 * se,
                    "entry ({i},{j}): {emp} vs {} +- {se}",
                    want[[i, j]]
                );
            }
        }
    }

    #[test]
    fn brownian_disjoint_increments_uncorrelated() {
        let grid = TimeGrid::new(1.0, 4, 0).unwrap();
        let batch = sample_paths(&ModelParams::brownian(), &grid, 10_000, 31).unwrap();
        let n = batch.n_paths() as f64;
        let mut corr = 0.0;
        for p in 0..batch.n_paths() {
            let d1 = batch.value(p, 1) - batch.value(p, 0);
            let d2 = batch.value(p, 3) - batch.value(p, 2);
            corr += d1 * d2;
        }
        corr /= n * 0.25; // each increment has variance 1/4
        assert!(corr.abs() <= 3.0 / n.sqrt(), "correlation {corr}");
    }

    #[test]
    fn standardized_marginals_pass_ks() {
        // Kolmogorov-Smirnov at significance 1e-3 with 10^4 paths
        let grid = TimeGrid::new(1.0, 8, 0).unwrap();
        let batch = sample_paths(&crit(), &grid, 10_000, 17).unwrap();
        for node in [1usize, 4, 8] {
            let t = grid.node(node);
            let mut z: Vec<f64> = (0..batch.n_paths())
                .map(|p| batch.value(p, node) / t.sqrt())
                .collect();
            z.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = z.len() as f64;
            let mut d = 0.0f64;
            for (i, v) in z.iter().enumerate() {
                let cdf = norm_cdf(*v);
                d = d.max((cdf - i as f64 / n).abs());
                d = d.max(((i + 1) as f64 / n - cdf).abs());
            }
            // critical value sqrt(ln(2/alpha)/2)/sqrt(n) at alpha = 1e-3
            let crit_val = 1.949_474_603_520_405 / n.sqrt();
            assert!(d < crit_val, "node {node}: KS statistic {d} vs {crit_val}");
        }
    }

    #[test]
    fn max_increment_scaling_probe() {
        // max_i |dB_i| should track sqrt(2^{1-K} delta) * sqrt(2 ln n) within x3
        let grid = TimeGrid::new(1.0, 1024, 0).unwrap();
        let params = crit();
        let batch = sample_paths(&params, &grid, 32, 77).unwrap();
        let delta = grid.delta();
        let scale = (params.qv_constant() * delta).sqrt() * (2.0 * (1024f64).ln()).sqrt();
        for p in 0..batch.n_paths() {
            let m = (1..grid.n_nodes())
                .map(|i| (batch.value(p, i) - batch.value(p, i - 1)).abs())
                .fold(0.0f64, f64::max);
            assert!(m < 3.0 * scale && m > scale / 3.0, "path {p}: max increment {m} vs {scale}");
        }
    }

    #[test]
    fn csv_dump_format() {
        let grid = TimeGrid::new(1.0, 1, 0).unwrap();
        let batch = sample_paths(&crit(), &grid, 2, 3).unwrap();
        let mut out = Vec::new();
        batch.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "path_id,t,value");
        assert_eq!(text.lines().count(), 1 + 2 * 2);
        assert!(text.lines().nth(1).unwrap().starts_with("0,0.00000000000e0,"));
    }
}
