//! Small dense Levenberg–Marquardt solver.

pub const MAX_ITERATIONS: usize = 200;
pub const STEP_TOLERANCE: f64 = 1e-10;

pub(crate) struct LmOutcome {
    pub params: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes Σr² where `model(p)` returns residuals and their Jacobian
/// (one row per residual), or `None` outside the parameter domain.
pub(crate) fn levenberg_marquardt<F>(p0: Vec<f64>, model: F) -> Option<LmOutcome>
where
    F: Fn(&[f64]) -> Option<(Vec<f64>, Vec<Vec<f64>>)>,
{
    let k = p0.len();
    let mut p = p0;
    let (mut r, mut jac) = model(&p)?;
    let mut cost = sum_sq(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            break;
        }
        let (jtj, jtr) = normal_equations(&jac, &r, k);
        let mut accepted = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for i in 0..k {
                a[i][i] += lambda * jtj[i][i].max(1e-300);
            }
            let Some(step) = solve(a, jtr.iter().map(|v| -v).collect()) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(&step).map(|(a, b)| a + b).collect();
            match model(&trial) {
                Some((rt, jt)) if sum_sq(&rt) <= cost => {
                    let rel = norm(&step) / norm(&trial).max(1e-300);
                    p = trial;
                    cost = sum_sq(&rt);
                    r = rt;
                    jac = jt;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    if rel < STEP_TOLERANCE {
                        converged = true;
                    }
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if converged {
            break;
        }
        if !accepted {
            // no downhill step at any damping: a stationary point
            converged = true;
            break;
        }
    }
    let (jtj, _) = normal_equations(&jac, &r, k);
    let dof = r.len().saturating_sub(k).max(1) as f64;
    let sigma2 = cost / dof;
    let covariance = invert(jtj)
        .map(|inv| inv.iter().map(|row| row.iter().map(|v| v * sigma2).collect()).collect())
        .unwrap_or_else(|| vec![vec![f64::NAN; k]; k]);
    Some(LmOutcome {
        params: p,
        covariance,
        residual_norm: cost.sqrt(),
        iterations,
        converged,
    })
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn norm(v: &[f64]) -> f64 {
    sum_sq(v).sqrt()
}

fn normal_equations(jac: &[Vec<f64>], r: &[f64], k: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut jtj = vec![vec![0.0; k]; k];
    let mut jtr = vec![0.0; k];
    for (row, ri) in jac.iter().zip(r) {
        for i in 0..k {
            jtr[i] += row[i] * ri;
            for j in 0..k {
                jtj[i][j] += row[i] * row[j];
            }
        }
    }
    (jtj, jtr)
}

/// Gaussian elimination with partial pivoting.
pub(crate) fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-300 || !a[piv][c].is_finite() {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for i in c + 1..n {
            let f = a[i][c] / a[c][c];
            let (top, rest) = a.split_at_mut(i);
            for (x, p) in rest[0][c..].iter_mut().zip(&top[c][c..]) {
                *x -= f * p;
            }
            b[i] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

pub(crate) fn invert(a: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let cols = (0..n)
        .map(|c| {
            let mut e = vec![0.0; n];
            e[c] = 1.0;
            solve(a.clone(), e)
        })
        .collect::<Option<Vec<_>>>()?;
    Some((0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_a_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let out = levenberg_marquardt(vec![0.0, 0.0], |p| {
            let r = xs.iter().zip(&ys).map(|(x, y)| p[0] + p[1] * x - y).collect();
            let j = xs.iter().map(|x| vec![1.0, *x]).collect();
            Some((r, j))
        })
        .unwrap();
        assert!(out.converged);
        assert!((out.params[0] - 1.0).abs() < 1e-9 && (out.params[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn inverse() {
        let inv = invert(vec![vec![4.0, 7.0], vec![2.0, 6.0]]).unwrap();
        assert!((inv[0][0] - 0.6).abs() < 1e-12 && (inv[0][1] + 0.7).abs() < 1e-12);
    }
}
