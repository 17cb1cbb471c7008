//! Reference implementations the acceptance checks compare against.
//! Kept deliberately plain so they share no machinery with the crate:
//! dense column copies, cyclic updates, no working sets, no groups.

/// Minimizes (1/2n)‖y − Xw‖² + λ‖w‖₁ by cyclic coordinate descent.
///
/// `x_rows` is row-major. Stops when no coordinate moves by more than
/// `tol` in one sweep.
pub fn lasso_reference(
    x_rows: &[Vec<f64>],
    y: &[f64],
    lambda: f64,
    tol: f64,
    max_sweeps: usize,
) -> Vec<f64> {
    let n = x_rows.len();
    let p = x_rows[0].len();
    let cols: Vec<Vec<f64>> = (0..p)
        .map(|j| x_rows.iter().map(|r| r[j]).collect())
        .collect();
    let scaled_sq_norms: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>() / n as f64)
        .collect();
    let mut w = vec![0.0; p];
    let mut resid: Vec<f64> = y.to_vec();
    for _ in 0..max_sweeps {
        let mut max_delta = 0.0f64;
        for j in 0..p {
            if scaled_sq_norms[j] == 0.0 {
                continue;
            }
            let corr = cols[j]
                .iter()
                .zip(&resid)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / n as f64;
            let target = corr + scaled_sq_norms[j] * w[j];
            let updated = soft_threshold(target, lambda) / scaled_sq_norms[j];
            let delta = updated - w[j];
            if delta != 0.0 {
                for (r, xj) in resid.iter_mut().zip(&cols[j]) {
                    *r -= delta * xj;
                }
                w[j] = updated;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta <= tol {
            break;
        }
    }
    w
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}
