//! Small least-squares helpers shared by the experiments.

/// Ordinary least squares y ≈ slope·x + intercept; `None` with fewer than two
/// distinct abscissae.
pub fn linear_fit(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Least-squares coefficients c minimizing Σ_i (rows_i · c − y_i)², by
/// normal equations; `None` if they are singular.
pub fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let k = rows.first()?.len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for (r, &yi) in rows.iter().zip(y) {
        for i in 0..k {
            for j in 0..k {
                a[i][j] += r[i] * r[j];
            }
            a[i][k] += r[i] * yi;
        }
    }
    for col in 0..k {
        let piv = (col..k).max_by(|&x, &z| a[x][col].abs().total_cmp(&a[z][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        for r in 0..k {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=k {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    Some((0..k).map(|i| a[i][k] / a[i][i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 * i as f64 - 1.0)).collect();
        let (a, b) = linear_fit(&pts).unwrap();
        assert!((a - 2.0).abs() < 1e-14 && (b + 1.0).abs() < 1e-14);
        assert!(linear_fit(&pts[..1]).is_none());
    }

    #[test]
    fn least_squares_recovers_quadratic() {
        let rows: Vec<Vec<f64>> = (0..7)
            .map(|i| {
                let x = i as f64 * 0.3 - 1.0;
                vec![1.0, x, x * x]
            })
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| 0.5 - 2.0 * r[1] + 3.0 * r[2]).collect();
        let c = least_squares(&rows, &y).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-12 && (c[1] + 2.0).abs() < 1e-12 && (c[2] - 3.0).abs() < 1e-12);
    }
}
