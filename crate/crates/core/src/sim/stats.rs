use statrs::distribution::{ContinuousCDF, StudentsT};

/// Two-sided Student-t quantile for `level` confidence with `dof` degrees of freedom.
pub fn student_t_quantile(level: f64, dof: f64) -> f64 {
    StudentsT::new(0.0, 1.0, dof)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.5 + level / 2.0)
}

/// Sample mean and t-interval half-width. With fewer than two samples the
/// half-width is infinite.
pub fn mean_and_halfwidth(samples: &[f64], level: f64) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, student_t_quantile(level, n - 1.0) * (var / n).sqrt())
}
