//! Data matrix `Y` (columns `X_p/√n`), the spectrum of the block matrix
//! `W = [[0, Yᵀ], [Y, 0]]`, and empirical Stieltjes transforms.
//!
//! `W` has eigenvalues `±σ_i` (the singular values of `Y`) and `m − n`
//! structural zeros, so spectra are computed from the `n × m` matrix and the
//! zeros are appended exactly. Indices `0..m` of `W` form the `m`-block,
//! indices `m..m+n` the `n`-block.

use nalgebra::{DMatrix, DVector, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::SampleBatch;

const SVD_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    pub n: usize,
    pub m: usize,
    pub entries: DMatrix<f64>,
}

impl DataMatrix {
    /// Wraps an `n × m` matrix; requires `m >= n` and finite entries.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        let (n, m) = entries.shape();
        if n == 0 {
            return Err(Error::invalid("n", "data matrix must have at least one row"));
        }
        if m < n {
            return Err(Error::AspectRatio { n, m });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("data matrix entries"));
        }
        Ok(DataMatrix { n, m, entries })
    }

    /// Dense `(n+m) × (n+m)` block matrix `W`.
    pub fn block_matrix(&self) -> DMatrix<f64> {
        let (n, m) = (self.n, self.m);
        let mut w = DMatrix::zeros(n + m, n + m);
        for p in 0..m {
            for i in 0..n {
                let y = self.entries[(i, p)];
                w[(m + i, p)] = y;
                w[(p, m + i)] = y;
            }
        }
        w
    }
}

/// Column `p` of `Y` is `batch.vector(p) / √n`.
pub fn build_data_matrix(batch: &SampleBatch) -> Result<DataMatrix> {
    if batch.m == 0 {
        return Err(Error::invalid("batch", "batch is empty"));
    }
    let scale = 1.0 / (batch.n as f64).sqrt();
    let entries = DMatrix::from_iterator(batch.n, batch.m, batch.data.iter().map(|v| v * scale));
    DataMatrix::from_matrix(entries)
}

/// Singular values of `Y`, sorted descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub n: usize,
    pub m: usize,
    pub singular_values: Vec<f64>,
}

pub fn spectrum_of(y: &DataMatrix) -> Result<Spectrum> {
    let svd = SVD::try_new(y.entries.clone(), false, false, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(|| Error::Decomposition(format!("SVD of {}x{} did not converge", y.n, y.m)))?;
    let mut singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    Ok(Spectrum {
        n: y.n,
        m: y.m,
        singular_values,
    })
}

impl Spectrum {
    /// Largest eigenvalue of `W`.
    pub fn lambda_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// `Σ_i z/(σ_i² − z²)`, the trace of the `n`-block of `(W − z)⁻¹`.
    fn n_block_trace(&self, z: Complex64) -> Complex64 {
        let z2 = z * z;
        self.singular_values
            .iter()
            .map(|&s| z / (s * s - z2))
            .sum()
    }

    /// `s_{n,m}(z) = (n s¹ + m s²)/(n + m)`.
    pub fn stieltjes(&self, z: Complex64) -> Result<Complex64> {
        let (s1, s2) = block_stieltjes(self, z)?;
        let (n, m) = (self.n as f64, self.m as f64);
        Ok((n * s1 + m * s2) / (n + m))
    }

    /// `Σ_i f(λ_i)` over all `n + m` eigenvalues of `W`.
    pub fn linear_statistic(&self, f: impl Fn(f64) -> f64) -> f64 {
        let zeros = (self.m - self.n) as f64 * f(0.0);
        self.singular_values
            .iter()
            .map(|&s| f(s) + f(-s))
            .sum::<f64>()
            + zeros
    }
}

/// All `n + m` eigenvalues of `W`, ascending.
pub fn eigenvalues_w(s: &Spectrum) -> Vec<f64> {
    let mut out = Vec::with_capacity(s.n + s.m);
    out.extend(s.singular_values.iter().map(|v| -v));
    out.extend(std::iter::repeat_n(0.0, s.m - s.n));
    out.extend(s.singular_values.iter().copied());
    out.sort_by(|a, b| a.total_cmp(b));
    out
}

fn check_off_axis(z: Complex64) -> Result<()> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::NonFinite("evaluation point"));
    }
    if z.im == 0.0 {
        return Err(Error::RealAxis { re: z.re, im: z.im });
    }
    Ok(())
}

/// `(1/N) Σ_i 1/(λ_i − z)`.
pub fn empirical_stieltjes(eigs: &[f64], z: Complex64) -> Result<Complex64> {
    check_off_axis(z)?;
    if eigs.is_empty() {
        return Err(Error::invalid("eigs", "empty spectrum"));
    }
    let sum: Complex64 = eigs.iter().map(|&l| 1.0 / (l - z)).sum();
    Ok(sum / eigs.len() as f64)
}

/// Normalized traces of the two diagonal blocks of `(W − z)⁻¹`:
/// `s¹ = (1/n) Σ z/(σ_i² − z²)` and `s² = (1/m)[Σ z/(σ_i² − z²) − (m − n)/z]`.
pub fn block_stieltjes(s: &Spectrum, z: Complex64) -> Result<(Complex64, Complex64)> {
    check_off_axis(z)?;
    let t = s.n_block_trace(z);
    let s1 = t / s.n as f64;
    let s2 = (t - (s.m - s.n) as f64 / z) / s.m as f64;
    Ok((s1, s2))
}

fn shifted(a: &DMatrix<f64>, z: Complex64) -> DMatrix<Complex64> {
    let d = a.nrows();
    DMatrix::from_fn(d, d, |i, j| {
        let v = Complex64::new(a[(i, j)], 0.0);
        if i == j {
            v - z
        } else {
            v
        }
    })
}

/// `(A − z)⁻¹` by LU factorization.
pub fn resolvent(a: &DMatrix<f64>, z: Complex64) -> Result<DMatrix<Complex64>> {
    check_off_axis(z)?;
    shifted(a, z)
        .try_inverse()
        .ok_or_else(|| Error::Decomposition("resolvent matrix is singular".into()))
}

const SCHUR_MAX_DIM: usize = 64;

fn check_small_symmetric(a: &DMatrix<f64>) -> Result<()> {
    let (r, c) = a.shape();
    if r != c || r == 0 {
        return Err(Error::invalid("A", format!("must be square and non-empty, got {r}x{c}")));
    }
    if r > SCHUR_MAX_DIM {
        return Err(Error::invalid(
            "A",
            format!("dimension {r} exceeds the oracle limit {SCHUR_MAX_DIM}"),
        ));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix entries"));
    }
    if (0..r).any(|i| (0..i).any(|j| a[(i, j)] != a[(j, i)])) {
        return Err(Error::invalid("A", "matrix is not symmetric"));
    }
    Ok(())
}

/// `(B_k, β_k, b_kk)` for `B = A − z`: the principal minor without row and
/// column `k`, the removed column without its diagonal entry, the diagonal.
fn split_minor(b: &DMatrix<Complex64>, k: usize) -> (DMatrix<Complex64>, DVector<Complex64>, Complex64) {
    let minor = b.clone().remove_row(k).remove_column(k);
    let col = b.column(k).clone_owned().remove_row(k);
    (minor, col, b[(k, k)])
}

/// `u = B_k⁻¹ β_k` and the Schur complement `b_kk − β_kᵀ u`.
fn schur_complement(
    b: &DMatrix<Complex64>,
    k: usize,
) -> Result<(DMatrix<Complex64>, DVector<Complex64>, Complex64)> {
    let (minor, col, diag) = split_minor(b, k);
    if minor.nrows() == 0 {
        return Ok((minor, col, diag));
    }
    let u = minor.clone().lu().solve(&col).ok_or(Error::SingularMinor(k))?;
    let complement = diag - col.dot(&u);
    Ok((minor, u, complement))
}

/// `Tr((A − z)⁻¹) = Σ_k 1/(b_kk − β_kᵀ B_k⁻¹ β_k)`, computed row by row
/// from Schur complements. Test-oracle scale only (dimension ≤ 64).
pub fn resolvent_trace_schur(a: &DMatrix<f64>, z: Complex64) -> Result<Complex64> {
    check_small_symmetric(a)?;
    check_off_axis(z)?;
    let b = shifted(a, z);
    let mut total = Complex64::new(0.0, 0.0);
    for k in 0..a.nrows() {
        let (_, _, complement) = schur_complement(&b, k)?;
        if complement.norm() == 0.0 {
            return Err(Error::SingularMinor(k));
        }
        total += 1.0 / complement;
    }
    Ok(total)
}

/// Difference between the two sides of
/// `Tr(B⁻¹) − Tr(B_k⁻¹) = (1 + β_kᵀ B_k⁻² β_k)/(b_kk − β_kᵀ B_k⁻¹ β_k)`
/// for `B = A − z`; both sides are computed independently.
pub fn schur_rank_one_diff(a: &DMatrix<f64>, k: usize, z: Complex64) -> Result<Complex64> {
    check_small_symmetric(a)?;
    check_off_axis(z)?;
    if k >= a.nrows() {
        return Err(Error::invalid("k", format!("index {k} out of range")));
    }
    let b = shifted(a, z);
    let (minor, u, complement) = schur_complement(&b, k)?;
    let full_inv = b.try_inverse().ok_or(Error::SingularMinor(usize::MAX))?;
    let minor_trace = if minor.nrows() == 0 {
        Complex64::new(0.0, 0.0)
    } else {
        minor.try_inverse().ok_or(Error::SingularMinor(k))?.trace()
    };
    let lhs = full_inv.trace() - minor_trace;
    let rhs = (1.0 + u.dot(&u)) / complement;
    Ok(lhs - rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::gaussian_baseline;
    use nalgebra::SymmetricEigen;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = crate::seed::rng_from_seed(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    fn random_symmetric(d: usize, seed: u64) -> DMatrix<f64> {
        let g = random_matrix(d, d, seed);
        (&g + g.transpose()) * 0.5
    }

    fn dense_w_eigenvalues(y: &DataMatrix) -> Vec<f64> {
        let mut e: Vec<f64> = SymmetricEigen::new(y.block_matrix())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        e.sort_by(|a, b| a.total_cmp(b));
        e
    }

    #[test]
    fn data_matrix_scaling_and_precondition() {
        let batch = SampleBatch {
            n: 2,
            m: 2,
            data: vec![1.0, 0.0, 0.0, 1.0],
            ..gaussian_baseline(2, 2, 0)
        };
        let y = build_data_matrix(&batch).unwrap();
        let r = 1.0 / 2f64.sqrt();
        assert_eq!(y.entries, DMatrix::from_row_slice(2, 2, &[r, 0.0, 0.0, r]));
        let narrow = gaussian_baseline(3, 2, 0);
        assert!(matches!(
            build_data_matrix(&narrow),
            Err(Error::AspectRatio { n: 3, m: 2 })
        ));
    }

    #[test]
    fn frobenius_norm_tracks_column_count() {
        // E ||Y||_F^2 = m; average over replications
        let mut total = 0.0;
        for r in 0..400 {
            let y = build_data_matrix(&gaussian_baseline(4, 8, r)).unwrap();
            total += y.entries.norm_squared();
        }
        let mean = total / 400.0;
        // per-replication sd = sqrt(2*32)/4 = 2, se = 0.1
        assert!((mean - 8.0).abs() < 0.4, "{mean}");
    }

    #[test]
    fn tiny_spectra() {
        let y = DataMatrix::from_matrix(DMatrix::from_element(1, 1, -3.0)).unwrap();
        let s = spectrum_of(&y).unwrap();
        assert_eq!(s.singular_values, vec![3.0]);
        assert_eq!(eigenvalues_w(&s), vec![-3.0, 3.0]);

        let y = DataMatrix::from_matrix(DMatrix::from_row_slice(1, 2, &[3.0, 4.0])).unwrap();
        let s = spectrum_of(&y).unwrap();
        assert!((s.singular_values[0] - 5.0).abs() < 1e-14);
        let e = eigenvalues_w(&s);
        assert_eq!(e.len(), 3);
        assert!((e[0] + 5.0).abs() < 1e-14 && e[1] == 0.0 && (e[2] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn eigenvalue_assembly() {
        let s = Spectrum {
            n: 2,
            m: 3,
            singular_values: vec![2.0, 1.0],
        };
        assert_eq!(eigenvalues_w(&s), vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        let s = Spectrum {
            n: 2,
            m: 2,
            singular_values: vec![2.0, 1.0],
        };
        assert_eq!(eigenvalues_w(&s), vec![-2.0, -1.0, 1.0, 2.0]);
    }

    #[test]
    fn singular_values_match_dense_eigensolver() {
        for seed in 0..5 {
            let y = DataMatrix::from_matrix(random_matrix(5, 7, seed)).unwrap();
            let fast = eigenvalues_w(&spectrum_of(&y).unwrap());
            let dense = dense_w_eigenvalues(&y);
            for (a, b) in fast.iter().zip(&dense) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn stieltjes_simple_spectra() {
        let s = empirical_stieltjes(&[-1.0, 1.0], c(0.0, 1.0)).unwrap();
        assert!((s - c(0.0, 0.5)).norm() < 1e-15);
        let s = empirical_stieltjes(&[0.0], c(0.0, 2.0)).unwrap();
        assert!((s - c(0.0, 0.5)).norm() < 1e-15);
        assert!(matches!(
            empirical_stieltjes(&[0.0], c(1.0, 0.0)),
            Err(Error::RealAxis { .. })
        ));
    }

    #[test]
    fn block_stieltjes_hand_values() {
        let s = Spectrum {
            n: 1,
            m: 2,
            singular_values: vec![1.0],
        };
        let (s1, s2) = block_stieltjes(&s, c(0.0, 2.0)).unwrap();
        assert!((s1 - c(0.0, 0.4)).norm() < 1e-15);
        assert!((s2 - c(0.0, 0.45)).norm() < 1e-15);
        let direct = empirical_stieltjes(&[-1.0, 0.0, 1.0], c(0.0, 2.0)).unwrap();
        assert!(((s1 + 2.0 * s2) / 3.0 - direct).norm() < 1e-15);
        assert!(block_stieltjes(&s, c(0.3, 0.0)).is_err());
    }

    #[test]
    fn block_stieltjes_square_blocks_coincide() {
        let y = DataMatrix::from_matrix(random_matrix(6, 6, 3)).unwrap();
        let s = spectrum_of(&y).unwrap();
        let (s1, s2) = block_stieltjes(&s, c(0.4, 0.7)).unwrap();
        assert!((s1 - s2).norm() < 1e-15);
    }

    #[test]
    fn schur_trace_diagonal_case() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0]));
        let z = c(0.0, 1.0);
        let expected = 1.0 / (c(1.0, 0.0) - z) + 1.0 / (c(3.0, 0.0) - z);
        assert!((resolvent_trace_schur(&a, z).unwrap() - expected).norm() < 1e-15);
        assert!(schur_rank_one_diff(&a, 0, z).unwrap().norm() < 1e-15);
    }

    #[test]
    fn schur_trace_matches_direct_inverse() {
        let a = random_symmetric(6, 21);
        let z = c(0.0, 2.0);
        let direct = resolvent(&a, z).unwrap().trace();
        assert!((resolvent_trace_schur(&a, z).unwrap() - direct).norm() < 1e-10);
        for k in 0..6 {
            assert!(schur_rank_one_diff(&a, k, z).unwrap().norm() < 1e-10);
        }
    }

    #[test]
    fn schur_trace_on_block_matrix() {
        let y = DataMatrix::from_matrix(random_matrix(3, 3, 8) / 3f64.sqrt()).unwrap();
        let z = c(1.0, 1.0);
        let w = y.block_matrix();
        let eigs = eigenvalues_w(&spectrum_of(&y).unwrap());
        let via_spectrum = empirical_stieltjes(&eigs, z).unwrap() * 6.0;
        assert!((resolvent_trace_schur(&w, z).unwrap() - via_spectrum).norm() < 1e-10);
        let y = DataMatrix::from_matrix(random_matrix(2, 3, 9)).unwrap();
        assert!(schur_rank_one_diff(&y.block_matrix(), 1, z).unwrap().norm() < 1e-10);
    }

    #[test]
    fn schur_rejects_bad_input() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert!(resolvent_trace_schur(&a, c(0.0, 1.0)).is_err());
        let big = DMatrix::<f64>::identity(65, 65);
        assert!(resolvent_trace_schur(&big, c(0.0, 1.0)).is_err());
        let a = DMatrix::<f64>::identity(3, 3);
        assert!(schur_rank_one_diff(&a, 3, c(0.0, 1.0)).is_err());
    }
}
