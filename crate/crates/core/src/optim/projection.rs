//! Euclidean projection onto {beta : G beta = d} intersected with a box.
//!
//! Dykstra's alternating projections with correction vectors. The affine
//! projection needs (G G')^-1; for the power/energy generator family the Gram
//! matrix is tridiagonal and solved by a cached Thomas factorization, any
//! other generator matrix falls back to a dense Cholesky factor.

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Residual below which the two projections are considered to agree.
pub const TOL_PROJ: f64 = 1e-7;

const MAX_SWEEPS: usize = 100_000;
/// Stall window: if the residual fails to improve over this many sweeps while
/// still above tolerance, the intersection is treated as empty.
const STALL_WINDOW: usize = 2_000;

enum GramSolver {
    /// LDL' factors of a symmetric positive definite tridiagonal Gram matrix:
    /// pivots d and unit subdiagonal l.
    Tridiag { d: Vec<f64>, l: Vec<f64> },
    /// Lower Cholesky factor of a dense Gram matrix.
    Dense(Mat),
}

impl GramSolver {
    fn build(g: &Mat) -> Result<GramSolver> {
        let n = g.rows();
        let gram = g.matmul_transpose_rhs();
        let mut tridiag = true;
        'scan: for i in 0..n {
            for j in 0..n {
                if (j + 1 < i || j > i + 1) && gram.get(i, j).abs() > 1e-14 {
                    tridiag = false;
                    break 'scan;
                }
            }
        }
        if tridiag {
            let mut d = vec![0.0; n];
            let mut l = vec![0.0; n];
            for i in 0..n {
                let e = if i > 0 { gram.get(i, i - 1) } else { 0.0 };
                let li = if i > 0 { e / d[i - 1] } else { 0.0 };
                l[i] = li;
                d[i] = gram.get(i, i) - li * e;
                if d[i] <= 1e-12 {
                    return Err(Error::NumericalFailure("gram matrix not positive definite"));
                }
            }
            Ok(GramSolver::Tridiag { d, l })
        } else {
            let mut chol = Mat::zeros(n, n);
            for j in 0..n {
                for i in j..n {
                    let mut acc = gram.get(i, j);
                    for k in 0..j {
                        acc -= chol.get(i, k) * chol.get(j, k);
                    }
                    if i == j {
                        if acc <= 1e-12 {
                            return Err(Error::NumericalFailure(
                                "gram matrix not positive definite",
                            ));
                        }
                        chol.set(j, j, acc.sqrt());
                    } else {
                        chol.set(i, j, acc / chol.get(j, j));
                    }
                }
            }
            Ok(GramSolver::Dense(chol))
        }
    }

    /// Solves (G G') z = v in place.
    fn solve(&self, v: &mut [f64]) {
        match self {
            GramSolver::Tridiag { d, l } => {
                let n = d.len();
                for i in 1..n {
                    v[i] -= l[i] * v[i - 1];
                }
                for i in 0..n {
                    v[i] /= d[i];
                }
                for i in (0..n.saturating_sub(1)).rev() {
                    v[i] -= l[i + 1] * v[i + 1];
                }
            }
            GramSolver::Dense(chol) => {
                let n = chol.rows();
                for i in 0..n {
                    let mut acc = v[i];
                    for k in 0..i {
                        acc -= chol.get(i, k) * v[k];
                    }
                    v[i] = acc / chol.get(i, i);
                }
                for i in (0..n).rev() {
                    let mut acc = v[i];
                    for k in (i + 1)..n {
                        acc -= chol.get(k, i) * v[k];
                    }
                    v[i] = acc / chol.get(i, i);
                }
            }
        }
    }
}

/// Reusable projector onto {beta : G beta = d} for varying d.
pub struct AffineProjector {
    g: Mat,
    solver: GramSolver,
}

impl AffineProjector {
    /// Requires G with full row rank (true for both generator families).
    pub fn new(g: &Mat) -> Result<AffineProjector> {
        Ok(AffineProjector { g: g.clone(), solver: GramSolver::build(g)? })
    }

    /// Projects v onto {beta : G beta = d}: v - G'(GG')^-1 (G v - d).
    pub fn project(&self, v: &[f64], d: &[f64]) -> Vec<f64> {
        let mut r = self.g.matvec(v);
        for i in 0..r.len() {
            r[i] -= d[i];
        }
        self.solver.solve(&mut r);
        let corr = self.g.tr_matvec(&r);
        v.iter().zip(corr.iter()).map(|(a, c)| a - c).collect()
    }

    /// Dykstra projection of x0 onto {G beta = d} and |beta| <= betabar.
    /// Fails with EmptyIntersection when the residual stalls above tolerance.
    pub fn project_box(&self, d: &[f64], betabar: &[f64], x0: &[f64]) -> Result<Vec<f64>> {
        let n = x0.len();
        debug_assert_eq!(betabar.len(), n);
        debug_assert_eq!(d.len(), self.g.rows());
        let mut x = x0.to_vec();
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        let mut window_best = f64::INFINITY;
        for sweep in 1..=MAX_SWEEPS {
            for i in 0..n {
                tmp[i] = x[i] + p[i];
            }
            let y = self.project(&tmp, d);
            for i in 0..n {
                p[i] = tmp[i] - y[i];
                tmp[i] = y[i] + q[i];
            }
            let mut resid = 0.0_f64;
            for i in 0..n {
                let clamped = tmp[i].clamp(-betabar[i], betabar[i]);
                q[i] = tmp[i] - clamped;
                resid = resid.max((y[i] - clamped).abs());
                x[i] = clamped;
            }
            if resid <= TOL_PROJ {
                return Ok(x);
            }
            if sweep % STALL_WINDOW == 0 {
                if resid > window_best * (1.0 - 1e-9) {
                    return Err(Error::EmptyIntersection);
                }
                window_best = resid;
            }
        }
        Err(Error::EmptyIntersection)
    }
}

/// One-shot convenience wrapper around [`AffineProjector::project_box`].
pub fn project_affine_box(g: &Mat, d: &[f64], betabar: &[f64], x0: &[f64]) -> Result<Vec<f64>> {
    AffineProjector::new(g)?.project_box(d, betabar, x0)
}

/// Componentwise clamp onto |beta| <= betabar, the projection used when the
/// feasible set is a plain box.
pub fn clamp_box(v: &[f64], betabar: &[f64]) -> Vec<f64> {
    v.iter().zip(betabar.iter()).map(|(&x, &b)| x.clamp(-b, b)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::FlexRng;
    use crate::zonotope::pe_generators;

    #[test]
    fn fixed_point_stays() {
        // x0 already in both sets: projection returns it (within tolerance)
        let g = pe_generators(3).g;
        let betabar = vec![1.0; 5];
        let x0 = vec![0.2, -0.1, 0.3, 0.0, 0.1];
        let d = g.matvec(&x0);
        let out = project_affine_box(&g, &d, &betabar, &x0).unwrap();
        for i in 0..5 {
            assert!((out[i] - x0[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn horizon_one_singleton() {
        // N=1: single generator, affine set is the point d
        let g = pe_generators(1).g;
        let out = project_affine_box(&g, &[0.4], &[1.0], &[-0.9]).unwrap();
        assert!((out[0] - 0.4).abs() < 1e-6);
    }

    #[test]
    fn empty_intersection_detected() {
        // G beta = 5 requires beta_1 = 5 for N=1, but the box caps at 1
        let g = pe_generators(1).g;
        let err = project_affine_box(&g, &[5.0], &[1.0], &[0.0]).unwrap_err();
        assert!(matches!(err, Error::EmptyIntersection));
    }

    /// Solves the dense linear system A z = rhs by Gaussian elimination with
    /// partial pivoting. Returns None when A is numerically singular.
    fn dense_solve(mut a: Vec<f64>, mut rhs: Vec<f64>, dim: usize) -> Option<Vec<f64>> {
        for k in 0..dim {
            let mut piv = k;
            for r in (k + 1)..dim {
                if a[r * dim + k].abs() > a[piv * dim + k].abs() {
                    piv = r;
                }
            }
            if a[piv * dim + k].abs() < 1e-10 {
                return None;
            }
            if piv != k {
                for c in 0..dim {
                    a.swap(k * dim + c, piv * dim + c);
                }
                rhs.swap(k, piv);
            }
            for r in (k + 1)..dim {
                let f = a[r * dim + k] / a[k * dim + k];
                if f != 0.0 {
                    for c in k..dim {
                        a[r * dim + c] -= f * a[k * dim + c];
                    }
                    rhs[r] -= f * rhs[k];
                }
            }
        }
        for k in (0..dim).rev() {
            let mut acc = rhs[k];
            for c in (k + 1)..dim {
                acc -= a[k * dim + c] * rhs[c];
            }
            rhs[k] = acc / a[k * dim + k];
        }
        Some(rhs)
    }

    /// Brute-force oracle: minimize ||x - x0||^2 over G x = d, |x| <= bb by
    /// enumerating which coordinates sit on which bound. For each pattern the
    /// pinned coordinates are fixed and the free ones solve the KKT system
    /// [I Gf'; Gf 0][xf; lam] = [x0f; d - G_pin x_pin]. Every feasible
    /// candidate is a feasible point of the QP, and the true active set shows
    /// up as one of the patterns, so the best candidate is the optimum.
    fn qp_oracle(g: &Mat, d: &[f64], bb: &[f64], x0: &[f64]) -> Option<Vec<f64>> {
        let n = x0.len();
        let m = g.rows();
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut pat = vec![0u8; n]; // 0 free, 1 at +bb, 2 at -bb
        loop {
            let free: Vec<usize> = (0..n).filter(|&i| pat[i] == 0).collect();
            let nf = free.len();
            let mut x = vec![0.0; n];
            for i in 0..n {
                match pat[i] {
                    1 => x[i] = bb[i],
                    2 => x[i] = -bb[i],
                    _ => {}
                }
            }
            let mut rhs_eq = d.to_vec();
            for r in 0..m {
                for i in 0..n {
                    if pat[i] != 0 {
                        rhs_eq[r] -= g.get(r, i) * x[i];
                    }
                }
            }
            let candidate = if nf == 0 {
                if rhs_eq.iter().all(|v| v.abs() < 1e-9) {
                    Some(x.clone())
                } else {
                    None
                }
            } else {
                let dim = nf + m;
                let mut a = vec![0.0; dim * dim];
                let mut rhs = vec![0.0; dim];
                for (fi, &i) in free.iter().enumerate() {
                    a[fi * dim + fi] = 1.0;
                    for r in 0..m {
                        a[fi * dim + nf + r] = g.get(r, i);
                        a[(nf + r) * dim + fi] = g.get(r, i);
                    }
                    rhs[fi] = x0[i];
                }
                for r in 0..m {
                    rhs[nf + r] = rhs_eq[r];
                }
                dense_solve(a, rhs, dim).and_then(|sol| {
                    let mut xc = x.clone();
                    for (fi, &i) in free.iter().enumerate() {
                        if sol[fi].abs() > bb[i] + 1e-9 {
                            return None;
                        }
                        xc[i] = sol[fi];
                    }
                    Some(xc)
                })
            };
            if let Some(xc) = candidate {
                let obj: f64 = xc.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum();
                if best.as_ref().map_or(true, |(bo, _)| obj < *bo) {
                    best = Some((obj, xc));
                }
            }
            // advance the ternary pattern
            let mut k = 0;
            loop {
                if k == n {
                    return best.map(|(_, x)| x);
                }
                pat[k] += 1;
                if pat[k] == 3 {
                    pat[k] = 0;
                    k += 1;
                } else {
                    break;
                }
            }
        }
    }

    #[test]
    fn matches_active_set_oracle_small() {
        let g = pe_generators(2).g; // 2 x 3
        let mut rng = FlexRng::new(99, 0);
        for _case in 0..40 {
            let bb = vec![
                rng.uniform(0.3, 1.5),
                rng.uniform(0.3, 1.5),
                rng.uniform(0.3, 1.5),
            ];
            // pick d inside the image of the box so the intersection is nonempty
            let inside: Vec<f64> = bb.iter().map(|&b| rng.uniform(-0.9, 0.9) * b).collect();
            let d = g.matvec(&inside);
            let x0: Vec<f64> = (0..3).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let got = project_affine_box(&g, &d, &bb, &x0).unwrap();
            let want = qp_oracle(&g, &d, &bb, &x0).expect("oracle found none");
            for i in 0..3 {
                assert!(
                    (got[i] - want[i]).abs() < 2e-5,
                    "coord {i}: dykstra {} oracle {}",
                    got[i],
                    want[i]
                );
            }
        }
    }

    #[test]
    fn variational_inequality_holds() {
        // (x0 - proj)'(z - proj) <= tol for feasible z: characterizes the
        // projection without any reference solver
        let g = pe_generators(4).g; // 4 x 7
        let mut rng = FlexRng::new(7, 1);
        let bb: Vec<f64> = (0..7).map(|_| rng.uniform(0.5, 2.0)).collect();
        let inside: Vec<f64> = bb.iter().map(|&b| rng.uniform(-0.7, 0.7) * b).collect();
        let d = g.matvec(&inside);
        let x0: Vec<f64> = (0..7).map(|_| rng.uniform(-4.0, 4.0)).collect();
        let proj = project_affine_box(&g, &d, &bb, &x0).unwrap();
        for _ in 0..200 {
            // random feasible z: project a random box point onto the affine set,
            // then re-clamp; accept only if it stays feasible for both sets
            let raw: Vec<f64> = bb.iter().map(|&b| rng.uniform(-1.0, 1.0) * b).collect();
            let z = AffineProjector::new(&g).unwrap().project(&raw, &d);
            if z.iter().zip(&bb).any(|(v, b)| v.abs() > *b) {
                continue;
            }
            let ip: f64 = (0..7).map(|i| (x0[i] - proj[i]) * (z[i] - proj[i])).sum();
            assert!(ip <= 1e-4, "variational inequality violated: {ip}");
        }
    }
}
