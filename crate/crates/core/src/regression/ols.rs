//! Ordinary least squares with an intercept and classical inference.
//!
//! The design is column-equilibrated and factored by Householder QR. A
//! column whose distance from the span of the preceding ones falls below
//! [`RANK_TOLERANCE`] (relative to its own norm) is reported as a singular
//! fit rather than regularized away.

use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

/// Relative pivot threshold for rank detection.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    /// `[intercept, slope_1, …, slope_k]`.
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    /// Two-sided, Student-t with `n − p` degrees of freedom.
    pub p_values: Vec<f64>,
    pub r2: f64,
    pub f_statistic: f64,
    pub f_statistic_p: f64,
    pub residuals: Vec<f64>,
    pub ssr: f64,
    pub sst: f64,
    pub n_obs: usize,
}

impl OlsFit {
    pub fn dof(&self) -> usize {
        self.n_obs - self.coefficients.len()
    }
}

/// Fits `response ~ 1 + regressors` from row-form data.
pub fn ols(rows: &[(Vec<f64>, f64)]) -> Result<OlsFit> {
    let k = rows.first().map_or(0, |r| r.0.len());
    if rows.iter().any(|r| r.0.len() != k) {
        return Err(Error::Schema("design rows have differing widths".into()));
    }
    let columns: Vec<Vec<f64>> = (0..k).map(|j| rows.iter().map(|r| r.0[j]).collect()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
    ols_columns(&refs, &y)
}

/// Fits `y ~ 1 + regressors`, with each regressor given as a column.
pub fn ols_columns(regressors: &[&[f64]], y: &[f64]) -> Result<OlsFit> {
    let n = y.len();
    let p = regressors.len() + 1;
    if regressors.iter().any(|c| c.len() != n) {
        return Err(Error::Schema("regressor and response lengths differ".into()));
    }
    if n <= p {
        return Err(Error::InsufficientData { have: n, need: p + 1 });
    }
    if y.iter().chain(regressors.iter().flat_map(|c| c.iter())).any(|v| !v.is_finite()) {
        return Err(Error::Schema("non-finite value in regression data".into()));
    }

    // Column-major design with unit-norm columns.
    let mut a: Vec<Vec<f64>> = Vec::with_capacity(p);
    a.push(vec![1.0; n]);
    a.extend(regressors.iter().map(|c| c.to_vec()));
    let mut scale = vec![0.0; p];
    for (j, col) in a.iter_mut().enumerate() {
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::SingularFit { column: j });
        }
        col.iter_mut().for_each(|v| *v /= norm);
        scale[j] = norm;
    }

    let mut qty = y.to_vec();
    let mut r = vec![vec![0.0; p]; p];
    for j in 0..p {
        let norm = a[j][j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < RANK_TOLERANCE {
            return Err(Error::SingularFit { column: j });
        }
        let alpha = if a[j][j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for col in a.iter_mut().skip(j + 1) {
                let dot: f64 = v.iter().zip(&col[j..]).map(|(a, b)| a * b).sum();
                let f = 2.0 * dot / vnorm2;
                col[j..].iter_mut().zip(&v).for_each(|(c, vi)| *c -= f * vi);
            }
            let dot: f64 = v.iter().zip(&qty[j..]).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm2;
            qty[j..].iter_mut().zip(&v).for_each(|(c, vi)| *c -= f * vi);
        }
        r[j][j] = alpha;
        for i in (j + 1)..p {
            r[j][i] = a[i][j];
        }
    }

    // Back-substitution for the scaled coefficients.
    let mut beta_s = vec![0.0; p];
    for j in (0..p).rev() {
        let s: f64 = ((j + 1)..p).map(|i| r[j][i] * beta_s[i]).sum();
        beta_s[j] = (qty[j] - s) / r[j][j];
    }
    let coefficients: Vec<f64> = beta_s.iter().zip(&scale).map(|(b, s)| b / s).collect();

    let residuals: Vec<f64> = (0..n)
        .map(|i| {
            let fitted = coefficients[0]
                + regressors
                    .iter()
                    .zip(&coefficients[1..])
                    .map(|(c, b)| c[i] * b)
                    .sum::<f64>();
            y[i] - fitted
        })
        .collect();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r2 = if sst > 0.0 { (1.0 - ssr / sst).clamp(0.0, 1.0) } else { 0.0 };

    // (RᵀR)⁻¹ = R⁻¹R⁻ᵀ in scaled coordinates.
    let mut rinv = vec![vec![0.0; p]; p];
    for j in 0..p {
        rinv[j][j] = 1.0 / r[j][j];
        for i in (0..j).rev() {
            let s: f64 = ((i + 1)..=j).map(|m| r[i][m] * rinv[m][j]).sum();
            rinv[i][j] = -s / r[i][i];
        }
    }
    let dof = (n - p) as f64;
    let sigma2 = ssr / dof;
    let std_errors: Vec<f64> = (0..p)
        .map(|j| {
            let diag: f64 = (j..p).map(|m| rinv[j][m] * rinv[j][m]).sum();
            (sigma2 * diag).sqrt() / scale[j]
        })
        .collect();
    let t_values: Vec<f64> = coefficients
        .iter()
        .zip(&std_errors)
        .map(|(b, se)| t_ratio(*b, *se))
        .collect();
    let p_values = t_values.iter().map(|t| two_sided_t_p(*t, dof)).collect();

    let df_model = (p - 1) as f64;
    let (f_statistic, f_statistic_p) = if p == 1 {
        (f64::NAN, f64::NAN)
    } else {
        let explained = (sst - ssr).max(0.0);
        let f = if ssr > 0.0 {
            (explained / df_model) / (ssr / dof)
        } else if explained > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        (f, f_upper_tail(f, df_model, dof))
    };

    Ok(OlsFit {
        coefficients,
        std_errors,
        t_values,
        p_values,
        r2,
        f_statistic,
        f_statistic_p,
        residuals,
        ssr,
        sst,
        n_obs: n,
    })
}

fn t_ratio(b: f64, se: f64) -> f64 {
    if se > 0.0 {
        b / se
    } else if b == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(b)
    }
}

/// `P(|T| ≥ |t|)` for Student-t with `dof` degrees of freedom.
pub fn two_sided_t_p(t: f64, dof: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = dof / (dof + t * t);
    beta_reg(dof / 2.0, 0.5, x)
}

/// `P(F ≥ f)` for Fisher–Snedecor with `(d1, d2)` degrees of freedom.
pub fn f_upper_tail(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_infinite() {
        return 0.0;
    }
    if f <= 0.0 {
        return 1.0;
    }
    let x = d2 / (d2 + d1 * f);
    beta_reg(d2 / 2.0, d1 / 2.0, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn exact_line() {
        let rows: Vec<_> = (0..10).map(|i| (vec![i as f64], 2.0 * i as f64 + 1.0)).collect();
        let fit = ols(&rows).unwrap();
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_response() {
        let rows: Vec<_> = (0..10).map(|i| (vec![i as f64 * 0.7], 4.2)).collect();
        let fit = ols(&rows).unwrap();
        assert!(fit.coefficients[1].abs() < 1e-12);
        assert!((fit.coefficients[0] - 4.2).abs() < 1e-12);
        assert_eq!(fit.r2, 0.0);
    }

    #[test]
    fn noisy_slope_within_three_std_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rows: Vec<_> = (0..1000)
            .map(|i| {
                let x = i as f64 / 100.0;
                let e: f64 = StandardNormal.sample(&mut rng);
                (vec![x], x + e)
            })
            .collect();
        let fit = ols(&rows).unwrap();
        assert!((fit.coefficients[1] - 1.0).abs() < 3.0 * fit.std_errors[1]);
        assert!(fit.p_values[1] < 1e-10);
    }

    #[test]
    fn rank_deficient_design() {
        let rows: Vec<_> = (0..10).map(|i| (vec![3.0], i as f64)).collect();
        assert!(matches!(ols(&rows), Err(Error::SingularFit { column: 1 })));
        let rows: Vec<_> = (0..10)
            .map(|i| (vec![i as f64, 2.0 * i as f64], i as f64))
            .collect();
        assert!(matches!(ols(&rows), Err(Error::SingularFit { column: 2 })));
    }

    #[test]
    fn too_few_observations() {
        let rows = vec![(vec![1.0], 1.0), (vec![2.0], 2.0)];
        assert!(matches!(ols(&rows), Err(Error::InsufficientData { .. })));
    }

    /// Simple-regression standard errors from the closed-form textbook
    /// expressions, independent of the QR path.
    #[test]
    fn matches_closed_form_simple_regression() {
        let xs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() * 4.0 + i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| 0.5 * x - 1.2 + ((i * 7919) % 13) as f64 * 0.05)
            .collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let b1 = sxy / sxx;
        let b0 = my - b1 * mx;
        let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - b0 - b1 * x).powi(2)).sum();
        let s2 = ssr / (n - 2.0);
        let se1 = (s2 / sxx).sqrt();
        let se0 = (s2 * (1.0 / n + mx * mx / sxx)).sqrt();

        let fit = ols_columns(&[&xs], &ys).unwrap();
        assert!((fit.coefficients[1] - b1).abs() < 1e-12);
        assert!((fit.coefficients[0] - b0).abs() < 1e-12);
        assert!((fit.std_errors[1] - se1).abs() < 1e-12 * se1.max(1.0));
        assert!((fit.std_errors[0] - se0).abs() < 1e-12 * se0.max(1.0));
        // With a single regressor F = t².
        assert!((fit.f_statistic - fit.t_values[1].powi(2)).abs() < 1e-8 * fit.f_statistic);
        assert!((fit.f_statistic_p - fit.p_values[1]).abs() <= 1e-10 * fit.p_values[1].max(1e-300));
    }

    #[test]
    fn t_tail_reference_values() {
        // t = 2.228 with 10 dof is the two-sided 5% critical value.
        assert!((two_sided_t_p(2.228_138_851_986_272, 10.0) - 0.05).abs() < 1e-9);
        assert_eq!(two_sided_t_p(0.0, 5.0), 1.0);
        // F(1, 10) = t² gives the same tail.
        assert!((f_upper_tail(2.228_138_851_986_272f64.powi(2), 1.0, 10.0) - 0.05).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn residuals_orthogonal_and_r2_consistent(
            pts in prop::collection::vec((-50.0f64..50.0, -5.0f64..5.0, -10.0f64..10.0), 8..60),
        ) {
            let x1: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let x2: Vec<f64> = pts.iter().map(|p| p.1 * p.0.abs().sqrt()).collect();
            let y: Vec<f64> = pts.iter().map(|p| 0.3 * p.0 - 2.0 * p.1 + p.2).collect();
            let fit = match ols_columns(&[&x1, &x2], &y) {
                Ok(f) => f,
                Err(Error::SingularFit { .. }) => return Ok(()),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            for col in [&vec![1.0; y.len()], &x1, &x2] {
                let dot: f64 = col.iter().zip(&fit.residuals).map(|(a, b)| a * b).sum();
                let cnorm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!(dot.abs() <= 1e-8 * cnorm * ynorm.max(1.0));
            }
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
            let ssr: f64 = fit.residuals.iter().map(|e| e * e).sum();
            prop_assert!((fit.r2 - (1.0 - ssr / sst)).abs() < 1e-10);
        }
    }
}
