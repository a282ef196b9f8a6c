//! Small numeric statistics toolbox: linearly interpolated percentiles,
//! chi-square quantiles, and multivariate mean/covariance with Mahalanobis
//! distances via Cholesky factorization.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("percentile needs a nonempty sample")]
    EmptySample,
    #[error("percentile fraction {0} outside [0, 1]")]
    BadFraction(f64),
    #[error("covariance matrix is singular even after regularization")]
    SingularCovariance,
    #[error("need at least 2 observations to fit covariance, got {0}")]
    TooFewObservations(usize),
}

/// Percentile with linear interpolation between order statistics.
///
/// For a sorted sample `v` of size `n` and fraction `p`, the rank is
/// `h = (n - 1) * p`; the result interpolates between `v[floor(h)]` and
/// `v[floor(h) + 1]`.
pub fn percentile(values: &[f64], p: f64) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(StatsError::BadFraction(p));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return Ok(sorted[sorted.len() - 1]);
    }
    let frac = h - lo as f64;
    Ok(sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]))
}

/// Regularized lower incomplete gamma function P(a, x).
fn gamma_p(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        // series representation
        let mut sum = 1.0 / a;
        let mut term = sum;
        let mut ap = a;
        for _ in 0..500 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        sum * (-x + a * x.ln() - ln_gamma(a)).exp()
    } else {
        // continued fraction for Q(a, x)
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        let q = (-x + a * x.ln() - ln_gamma(a)).exp() * h;
        1.0 - q
    }
}

/// Lanczos approximation of ln Γ(x) for x > 0.
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 6] = [
        76.180_091_729_471_46,
        -86.505_320_329_416_77,
        24.014_098_240_830_91,
        -1.231_739_572_450_155,
        0.120_865_097_386_617_5e-2,
        -0.539_523_938_495_3e-5,
    ];
    let mut y = x;
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut ser = 1.000_000_000_190_015;
    for c in COEF {
        y += 1.0;
        ser += c / y;
    }
    -tmp + (2.506_628_274_631_000_5 * ser / x).ln()
}

/// Chi-square CDF with `k` degrees of freedom.
pub fn chi2_cdf(x: f64, k: usize) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        gamma_p(k as f64 / 2.0, x / 2.0)
    }
}

/// Chi-square quantile (inverse CDF) by bisection.
pub fn chi2_quantile(p: f64, k: usize) -> f64 {
    assert!((0.0..1.0).contains(&p), "quantile fraction must be in [0,1)");
    if p == 0.0 {
        return 0.0;
    }
    let mut hi = k as f64 + 10.0;
    while chi2_cdf(hi, k) < p {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_cdf(mid, k) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Mean vector and covariance matrix of a multivariate sample, with a
/// Cholesky factor for Mahalanobis distances.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MultivariateStats {
    pub mean: Vec<f64>,
    /// Row-major covariance, possibly regularized (see [`MultivariateStats::fit`]).
    pub cov: Vec<f64>,
    dim: usize,
    chol: Vec<f64>,
}

impl MultivariateStats {
    /// Fit mean and (population) covariance over `rows`, each of length `dim`.
    ///
    /// If the covariance is not positive definite, `1e-6 * trace * I` is added
    /// once; a matrix still singular after that is an error.
    pub fn fit(rows: &[Vec<f64>], dim: usize) -> Result<Self, StatsError> {
        if rows.len() < 2 {
            return Err(StatsError::TooFewObservations(rows.len()));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut cov = vec![0.0; dim * dim];
        for r in rows {
            for i in 0..dim {
                let di = r[i] - mean[i];
                for j in i..dim {
                    cov[i * dim + j] += di * (r[j] - mean[j]);
                }
            }
        }
        for i in 0..dim {
            for j in i..dim {
                cov[i * dim + j] /= n;
                cov[j * dim + i] = cov[i * dim + j];
            }
        }
        let chol = match cholesky(&cov, dim) {
            Some(c) => c,
            None => {
                let trace: f64 = (0..dim).map(|i| cov[i * dim + i]).sum();
                let eps = 1e-6 * trace;
                let mut reg = cov.clone();
                for i in 0..dim {
                    reg[i * dim + i] += eps;
                }
                let c = cholesky(&reg, dim).ok_or(StatsError::SingularCovariance)?;
                cov = reg;
                c
            }
        };
        Ok(Self {
            mean,
            cov,
            dim,
            chol,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Squared Mahalanobis distance of `x` from the fitted mean.
    pub fn mahalanobis_sq(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        let diff: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        // solve L y = diff, then d^2 = |y|^2
        let mut y = vec![0.0; self.dim];
        for i in 0..self.dim {
            let mut s = diff[i];
            for (j, &yj) in y.iter().enumerate().take(i) {
                s -= self.chol[i * self.dim + j] * yj;
            }
            y[i] = s / self.chol[i * self.dim + i];
        }
        y.iter().map(|v| v * v).sum()
    }
}

/// Lower-triangular Cholesky factor of a symmetric matrix, or `None` if the
/// matrix is not (numerically) positive definite.
fn cholesky(a: &[f64], dim: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut s = a[i * dim + j];
            for k in 0..j {
                s -= l[i * dim + k] * l[j * dim + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * dim + i] = s.sqrt();
            } else {
                l[i * dim + j] = s / l[j * dim + j];
            }
        }
    }
    Some(l)
}
