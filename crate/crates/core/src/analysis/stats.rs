use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "series lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::Validation(format!("need at least 3 points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Validation("series contain non-finite values".into()));
    }
    Ok(())
}

/// Pearson product-moment correlation of two equal-length series.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("a series has zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    /// t statistic of the slope against zero.
    pub t_stat: f64,
    /// Two-sided p-value of `t_stat` on `n − 2` degrees of freedom.
    pub p_value: f64,
    pub r2: f64,
    pub adj_r2: f64,
    pub n: usize,
}

/// Two-sided tail probability of Student's t with `df` degrees of freedom.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Ordinary least squares `y = intercept + slope·x`.
pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<Regression> {
    check_pair(x, y)?;
    let n = x.len();
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return Err(Error::Validation("regressor has zero variance".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - (intercept + slope * a);
            e * e
        })
        .sum();
    let df = (n - 2) as f64;
    let r2 = if syy == 0.0 { 1.0 } else { (1.0 - sse / syy).clamp(0.0, 1.0) };
    let adj_r2 = 1.0 - (1.0 - r2) * (n - 1) as f64 / df;

    let se = (sse / df / sxx).sqrt();
    let (t_stat, p_value) = if se == 0.0 || sse <= 1e-28 * syy.max(f64::MIN_POSITIVE) {
        (f64::INFINITY.copysign(slope), 0.0)
    } else {
        let t = slope / se;
        (t, t_two_sided_p(t, df))
    };
    Ok(Regression {
        slope,
        intercept,
        t_stat,
        p_value,
        r2,
        adj_r2,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Rng;

    #[test]
    fn perfect_correlations() {
        let x = [1.0, 2.0, 4.0, 7.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn six_point_hand_computation() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [2.0, 1.0, 4.0, 3.0, 7.0, 5.0];
        // mean x 3.5, mean y 11/3, Sxy 93 - 77 = 16, Sxx 17.5
        let sxy = 16.0;
        let sxx = 17.5;
        let syy: f64 = y.iter().map(|v| (v - 22.0 / 6.0) * (v - 22.0 / 6.0)).sum();
        let r = pearson(&x, &y).unwrap();
        assert!((r - sxy / (sxx * syy).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_variance() {
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let r = linear_regression(&x, &y).unwrap();
        assert!((r.slope - 2.0).abs() < 1e-12);
        assert!(r.intercept.abs() < 1e-12);
        assert!((r.adj_r2 - 1.0).abs() < 1e-12);
        assert_eq!(r.p_value, 0.0);
    }

    #[test]
    fn matches_normal_equations() {
        let mut rng = Rng::new(21);
        let x: Vec<f64> = (0..50).map(|_| rng.uniform(0.0, 10.0)).collect();
        let noise: Vec<f64> = (0..50).map(|_| rng.uniform(-0.5, 0.5)).collect();
        let nm = noise.iter().sum::<f64>() / 50.0;
        let y: Vec<f64> = x.iter().zip(&noise).map(|(v, e)| v + e - nm).collect();
        // normal equations [n Σx; Σx Σx²] [b; m] = [Σy; Σxy]
        let n = 50.0;
        let sx: f64 = x.iter().sum();
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let sy: f64 = y.iter().sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let det = n * sxx - sx * sx;
        let slope = (n * sxy - sx * sy) / det;
        let intercept = (sxx * sy - sx * sxy) / det;
        let r = linear_regression(&x, &y).unwrap();
        assert!((r.slope - slope).abs() < 1e-10);
        assert!((r.intercept - intercept).abs() < 1e-10);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn t_test_p_value() {
        // two-sided 5% critical value on 10 df is 2.228139
        assert!((t_two_sided_p(2.228139, 10.0) - 0.05).abs() < 1e-6);
        assert!((t_two_sided_p(-2.0, 10.0) - 0.073388).abs() < 1e-6);
        assert!(linear_regression(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }
}
