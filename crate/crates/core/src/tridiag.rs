//! Thomas algorithm for tridiagonal systems.
//!
//! Both implicit solvers (Crank-Nicolson diffusion and the semi-implicit
//! momentum step) reduce to one tridiagonal solve per time step.

/// Solve `A x = rhs` for a tridiagonal `A` with sub-diagonal `lower`,
/// main diagonal `diag` and super-diagonal `upper`.
///
/// `lower[i]` couples row `i+1` to column `i`; `upper[i]` couples row `i`
/// to column `i+1`. Panics on inconsistent lengths or a zero pivot (the
/// callers assemble strictly diagonally dominant systems).
pub fn solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    assert_eq!(rhs.len(), n);
    assert_eq!(lower.len(), n.saturating_sub(1));
    assert_eq!(upper.len(), n.saturating_sub(1));
    assert!(n > 0, "empty system");

    let mut c = vec![0.0; n]; // modified super-diagonal
    let mut d = vec![0.0; n]; // modified rhs

    let mut pivot = diag[0];
    assert!(pivot != 0.0, "zero pivot in tridiagonal solve");
    if n > 1 {
        c[0] = upper[0] / pivot;
    }
    d[0] = rhs[0] / pivot;

    for i in 1..n {
        pivot = diag[i] - lower[i - 1] * c[i - 1];
        assert!(pivot != 0.0, "zero pivot in tridiagonal solve");
        if i < n - 1 {
            c[i] = upper[i] / pivot;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / pivot;
    }

    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn multiply(lower: &[f64], diag: &[f64], upper: &[f64], x: &[f64]) -> Vec<f64> {
        let n = diag.len();
        (0..n)
            .map(|i| {
                let mut v = diag[i] * x[i];
                if i > 0 {
                    v += lower[i - 1] * x[i - 1];
                }
                if i < n - 1 {
                    v += upper[i] * x[i + 1];
                }
                v
            })
            .collect()
    }

    #[test]
    fn solves_small_system() {
        let lower = [1.0, 1.0];
        let diag = [4.0, 4.0, 4.0];
        let upper = [1.0, 1.0];
        let rhs = [6.0, 12.0, 14.0];
        let x = solve(&lower, &diag, &upper, &rhs);
        let back = multiply(&lower, &diag, &upper, &x);
        for (a, b) in back.iter().zip(rhs.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn solves_single_unknown() {
        let x = solve(&[], &[3.0], &[], &[9.0]);
        assert!((x[0] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn residual_small_on_dominant_systems() {
        // deterministic pseudo-random coefficients, diagonally dominant
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for n in [2usize, 5, 33, 128] {
            let lower: Vec<f64> = (0..n - 1).map(|_| next()).collect();
            let upper: Vec<f64> = (0..n - 1).map(|_| next()).collect();
            let diag: Vec<f64> = (0..n).map(|_| 3.0 + next()).collect();
            let rhs: Vec<f64> = (0..n).map(|_| next()).collect();
            let x = solve(&lower, &diag, &upper, &rhs);
            let back = multiply(&lower, &diag, &upper, &x);
            for (a, b) in back.iter().zip(rhs.iter()) {
                assert!((a - b).abs() < 1e-10, "n = {n}");
            }
        }
    }
}
