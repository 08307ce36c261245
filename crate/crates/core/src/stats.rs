use libm::{exp, sqrt};

/// Pairwise summation; the result depends only on the order of `xs`.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Mean and standard error (sample std / √n).
pub(crate) fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let mut dev = alloc::vec::Vec::with_capacity(n);
    dev.extend(xs.iter().map(|x| (x - mean) * (x - mean)));
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (mean, sqrt(var / n as f64))
}

/// Least-squares rate `θ` for `y_k ≈ C θ^{x_k}` given `(x_k, ln y_k)`.
pub(crate) fn fitted_rate(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(exp(sxy / sxx))
}

pub(crate) fn median(xs: &mut [f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    Some(if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_of_exact_geometric_sequence() {
        let pts: alloc::vec::Vec<(f64, f64)> = (0..6)
            .map(|k| (k as f64, libm::log(3.0 * 0.25f64.powi(k))))
            .collect();
        assert!((fitted_rate(&pts).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn mean_stderr_small() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }
}
