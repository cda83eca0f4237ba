use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::mat::{check_square, dot, norm2, Mat};
use crate::error::{shape_err, Error, Result};
use crate::rng;

/// Result of an iterative spectral estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub value: f64,
    pub iterations: usize,
    pub tolerance: f64,
    pub converged: bool,
}

const PERTURBATION_SEED: u64 = 0x5eed_0f_5eed;

/// Fixed unit vector used to knock power iteration off a start vector that
/// is orthogonal to the dominant direction.
pub(crate) fn perturbation_vector(n: usize) -> Vec<f64> {
    let mut r = rng::stream(PERTURBATION_SEED, "numkernel/perturbation");
    let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
    let nv = norm2(&v);
    v.into_iter().map(|x| x / nv).collect()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = norm2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn mat_vec(m: &Mat, v: &[f64]) -> Vec<f64> {
    (0..m.rows()).map(|i| dot(m.row(i), v)).collect()
}

fn mat_t_vec(m: &Mat, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for (i, &ui) in u.iter().enumerate() {
        if ui == 0.0 {
            continue;
        }
        for (o, &a) in out.iter_mut().zip(m.row(i)) {
            *o += ui * a;
        }
    }
    out
}

enum PowerRun {
    Done {
        sigma: f64,
        v: Vec<f64>,
        iters: usize,
        converged: bool,
    },
    Stalled {
        iters: usize,
    },
}

fn power_run(m: &Mat, mut v: Vec<f64>, tol: f64, max_iters: usize, floor: f64) -> PowerRun {
    let mut prev = f64::NAN;
    let mut sigma = 0.0;
    for it in 1..=max_iters {
        let u = mat_vec(m, &v);
        sigma = norm2(&u);
        let mut w = mat_t_vec(m, &u);
        let nw = normalize(&mut w);
        if !(nw > floor) {
            return PowerRun::Stalled { iters: it };
        }
        v = w;
        if (sigma - prev).abs() <= tol * sigma {
            return PowerRun::Done {
                sigma,
                v,
                iters: it,
                converged: true,
            };
        }
        prev = sigma;
    }
    PowerRun::Done {
        sigma,
        v,
        iters: max_iters,
        converged: false,
    }
}

/// Largest singular value by power iteration on `mᵀm`.
///
/// Starts from the normalized all-ones vector. If the iterate collapses (start
/// vector in the null space) it restarts from a perturbed vector, and every
/// converged estimate is confirmed by one perturbed restart so a start vector
/// orthogonal to the top singular direction cannot go unnoticed.
pub fn max_singular_value(m: &Mat, tol: f64, max_iters: usize) -> Result<SpectralEstimate> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::Input("max_singular_value of an empty matrix".into()));
    }
    let fro = m.frobenius_norm();
    if fro == 0.0 {
        return Err(Error::Input("max_singular_value of a zero matrix".into()));
    }
    let n = m.cols();
    let floor = fro * fro * 1e-300_f64.max(f64::EPSILON * 1e-6);
    let perturb = perturbation_vector(n);
    let mut start = vec![1.0 / (n as f64).sqrt(); n];
    let mut total = 0;
    let mut best: Option<(f64, bool)> = None;
    let mut restarts = 0;
    loop {
        match power_run(m, start.clone(), tol, max_iters, floor) {
            PowerRun::Stalled { iters } => {
                total += iters;
                restarts += 1;
                if restarts > 4 {
                    break;
                }
                start = start
                    .iter()
                    .zip(&perturb)
                    .map(|(s, p)| s + p * restarts as f64)
                    .collect();
                normalize(&mut start);
            }
            PowerRun::Done {
                sigma,
                v,
                iters,
                converged,
            } => {
                total += iters;
                let improved = match best {
                    None => true,
                    Some((b, _)) => sigma > b * (1.0 + tol.max(1e-14)),
                };
                if !improved {
                    break;
                }
                best = Some((sigma, converged));
                restarts += 1;
                if restarts > 4 {
                    break;
                }
                start = v.iter().zip(&perturb).map(|(s, p)| s + 1e-2 * p).collect();
                normalize(&mut start);
            }
        }
    }
    let (value, converged) = best.unwrap_or((0.0, false));
    Ok(SpectralEstimate {
        value,
        iterations: total,
        tolerance: tol,
        converged,
    })
}

/// Full symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// the columns of the second value.
pub fn sym_eigen(m: &Mat) -> Result<(Vec<f64>, Mat)> {
    check_square(m, "sym_eigen")?;
    let scale = m.max_abs().max(1.0);
    if m.asymmetry() > 1e-10 * scale {
        return Err(Error::Input(format!(
            "sym_eigen: matrix is not symmetric (max asymmetry {:e})",
            m.asymmetry()
        )));
    }
    let n = m.rows();
    let mut a = m.clone();
    // symmetrize exactly so rotations act on a truly symmetric matrix
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a.get(i, j) + a.get(j, i));
            a.set(i, j, v);
            a.set(j, i, v);
        }
    }
    let mut v = Mat::identity(n);
    let total = m.frobenius_norm();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a.get(i, j) * a.get(i, j);
            }
        }
        if off.sqrt() <= 1e-16 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let evals = a.diag();
    order.sort_by(|&i, &j| evals[i].total_cmp(&evals[j]));
    let sorted: Vec<f64> = order.iter().map(|&i| evals[i]).collect();
    let vecs = Mat::from_fn(n, n, |r, c| v.get(r, order[c]));
    Ok((sorted, vecs))
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn sym_eig_extreme(m: &Mat) -> Result<(f64, f64)> {
    let (evals, _) = sym_eigen(m)?;
    match (evals.first(), evals.last()) {
        (Some(&lo), Some(&hi)) => Ok((lo, hi)),
        _ => Err(Error::Input("sym_eig_extreme of an empty matrix".into())),
    }
}

/// Lower-triangular Cholesky factor `a = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: Mat,
}

impl Cholesky {
    pub fn new(a: &Mat) -> Result<Self> {
        check_square(a, "cholesky")?;
        let scale = a.max_abs().max(1.0);
        if a.asymmetry() > 1e-10 * scale {
            return Err(Error::Input("cholesky: matrix is not symmetric".into()));
        }
        let n = a.rows();
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let mut s = a.get(j, j);
            for k in 0..j {
                s -= l.get(j, k) * l.get(j, k);
            }
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let d = s.sqrt();
            l.set(j, j, d);
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / d);
            }
        }
        Ok(Self { l })
    }

    pub fn factor(&self) -> &Mat {
        &self.l
    }

    /// `L⁻¹ b`.
    pub fn solve_lower(&self, b: &Mat) -> Result<Mat> {
        let n = self.l.rows();
        if b.rows() != n {
            return Err(shape_err("cholesky solve", format!("rhs has {} rows, expected {n}", b.rows())));
        }
        let mut x = b.clone();
        for c in 0..b.cols() {
            for i in 0..n {
                let mut s = x.get(i, c);
                for k in 0..i {
                    s -= self.l.get(i, k) * x.get(k, c);
                }
                x.set(i, c, s / self.l.get(i, i));
            }
        }
        Ok(x)
    }

    /// `L⁻ᵀ b`.
    pub fn solve_upper(&self, b: &Mat) -> Result<Mat> {
        let n = self.l.rows();
        if b.rows() != n {
            return Err(shape_err("cholesky solve", format!("rhs has {} rows, expected {n}", b.rows())));
        }
        let mut x = b.clone();
        for c in 0..b.cols() {
            for i in (0..n).rev() {
                let mut s = x.get(i, c);
                for k in (i + 1)..n {
                    s -= self.l.get(k, i) * x.get(k, c);
                }
                x.set(i, c, s / self.l.get(i, i));
            }
        }
        Ok(x)
    }

    /// `a⁻¹ b`.
    pub fn solve(&self, b: &Mat) -> Result<Mat> {
        self.solve_upper(&self.solve_lower(b)?)
    }
}

/// Solves `a x = b` for symmetric positive definite `a` via Cholesky.
pub fn solve_spd(a: &Mat, b: &Mat) -> Result<Mat> {
    Cholesky::new(a)?.solve(b)
}

/// LU factorization with partial pivoting for general square systems.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: Mat,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(a: &Mat) -> Result<Self> {
        check_square(a, "lu")?;
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let tiny = a.max_abs() * 1e-13;
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, lu.get(i, k).abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pv > tiny) {
                return Err(Error::Singular { pivot: k });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let t = lu.get(k, j);
                    lu.set(k, j, lu.get(p, j));
                    lu.set(p, j, t);
                }
            }
            let d = lu.get(k, k);
            for i in (k + 1)..n {
                let f = lu.get(i, k) / d;
                if f == 0.0 {
                    continue;
                }
                lu.set(i, k, f);
                for j in (k + 1)..n {
                    let v = lu.get(i, j) - f * lu.get(k, j);
                    lu.set(i, j, v);
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &Mat) -> Result<Mat> {
        let n = self.lu.rows();
        if b.rows() != n {
            return Err(shape_err("lu solve", format!("rhs has {} rows, expected {n}", b.rows())));
        }
        let mut x = b.select_rows(&self.perm);
        for c in 0..b.cols() {
            for i in 0..n {
                let mut s = x.get(i, c);
                for k in 0..i {
                    s -= self.lu.get(i, k) * x.get(k, c);
                }
                x.set(i, c, s);
            }
            for i in (0..n).rev() {
                let mut s = x.get(i, c);
                for k in (i + 1)..n {
                    s -= self.lu.get(i, k) * x.get(k, c);
                }
                x.set(i, c, s / self.lu.get(i, i));
            }
        }
        Ok(x)
    }
}

/// Symmetric square root inverse `a^{-1/2}` of a symmetric positive definite
/// matrix, via its eigendecomposition.
pub fn spd_inv_sqrt(a: &Mat) -> Result<Mat> {
    let (evals, vecs) = sym_eigen(a)?;
    if let Some(i) = evals.iter().position(|&l| !(l > 0.0)) {
        return Err(Error::NotPositiveDefinite { pivot: i });
    }
    let n = a.rows();
    let scaled = Mat::from_fn(n, n, |r, c| vecs.get(r, c) / evals[c].sqrt());
    scaled.matmul_t(&vecs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_mat(seed: u64, r: usize, c: usize) -> Mat {
        let mut g = rng::stream(seed, "test");
        Mat::from_fn(r, c, |_, _| StandardNormal.sample(&mut g))
    }

    /// One-sided Jacobi SVD: orthogonalize column pairs until convergence;
    /// singular values are the resulting column norms.
    fn jacobi_singular_values(m: &Mat) -> Vec<f64> {
        let mut a = m.clone();
        let n = a.cols();
        for _ in 0..60 {
            let mut rotated = false;
            for p in 0..n {
                for q in (p + 1)..n {
                    let (cp, cq) = (a.col(p), a.col(q));
                    let alpha = dot(&cp, &cp);
                    let beta = dot(&cq, &cq);
                    let gamma = dot(&cp, &cq);
                    if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let t = if zeta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for i in 0..a.rows() {
                        let x = cp[i];
                        let y = cq[i];
                        a.set(i, p, c * x - s * y);
                        a.set(i, q, s * x + c * y);
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut sv: Vec<f64> = (0..n).map(|j| norm2(&a.col(j))).collect();
        sv.sort_by(|x, y| y.total_cmp(x));
        sv
    }

    #[test]
    fn power_iteration_examples() {
        let e = max_singular_value(&Mat::identity(3), 1e-14, 1000).unwrap();
        assert!((e.value - 1.0).abs() < 1e-14 && e.converged);
        let e = max_singular_value(&Mat::from_diag(&[3.0, 1.0]), 1e-14, 1000).unwrap();
        assert!((e.value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn power_iteration_matches_jacobi_svd_oracle() {
        for seed in 0..10 {
            let m = rand_mat(seed, 5, 3);
            let oracle = jacobi_singular_values(&m)[0];
            let est = max_singular_value(&m, 1e-15, 100_000).unwrap();
            assert!((est.value - oracle).abs() <= 1e-8 * oracle, "{} vs {oracle}", est.value);
            assert!(est.value >= 0.0);
        }
    }

    #[test]
    fn start_vector_orthogonal_to_top_direction() {
        // all-ones start is orthogonal to the top right singular vector (1,-1)
        let m = Mat::from_rows(&[[2.0, -2.0], [0.5, 0.5]]);
        let est = max_singular_value(&m, 1e-14, 10_000).unwrap();
        assert!((est.value - 8f64.sqrt()).abs() < 1e-10, "{}", est.value);
        // start vector in the null space
        let m = Mat::from_rows(&[[1.0, -1.0], [1.0, -1.0]]);
        let est = max_singular_value(&m, 1e-14, 10_000).unwrap();
        assert!((est.value - 2.0).abs() < 1e-10, "{}", est.value);
    }

    #[test]
    fn zero_matrix_is_rejected() {
        assert!(max_singular_value(&Mat::zeros(2, 2), 1e-12, 10).is_err());
    }

    #[test]
    fn non_convergence_is_reported() {
        let m = Mat::from_diag(&[1.0, 0.999_999]);
        let m = m.add(&Mat::filled(2, 2, 1e-3)).unwrap();
        let est = max_singular_value(&m, 1e-16, 2).unwrap();
        assert!(!est.converged);
        assert!(est.value > 0.0);
    }

    #[test]
    fn eig_extreme_examples() {
        assert_eq!(sym_eig_extreme(&Mat::identity(4)).unwrap(), (1.0, 1.0));
        let (lo, hi) = sym_eig_extreme(&Mat::from_diag(&[-2.0, 5.0])).unwrap();
        assert_eq!((lo, hi), (-2.0, 5.0));
        assert!(sym_eig_extreme(&Mat::from_rows(&[[1.0, 2.0], [0.0, 1.0]])).is_err());
    }

    #[test]
    fn jacobi_eigenvalues_satisfy_trace_and_determinant_identities() {
        for seed in 0..5 {
            let g = rand_mat(100 + seed, 6, 6);
            let s = g.add(&g.transpose()).unwrap();
            let (evals, vecs) = sym_eigen(&s).unwrap();
            let trace: f64 = s.diag().iter().sum();
            assert!((evals.iter().sum::<f64>() - trace).abs() < 1e-10);
            let det_oracle = Lu::new(&s)
                .map(|lu| {
                    let mut d: f64 = lu.lu.diag().iter().product();
                    // sign of the permutation
                    let mut p = lu.perm.clone();
                    for i in 0..p.len() {
                        while p[i] != i {
                            let j = p[i];
                            p.swap(i, j);
                            d = -d;
                        }
                    }
                    d
                })
                .unwrap();
            let det: f64 = evals.iter().product();
            assert!((det - det_oracle).abs() <= 1e-8 * det_oracle.abs().max(1.0));
            // each pair satisfies s v = λ v and the characteristic polynomial vanishes
            for (k, &l) in evals.iter().enumerate() {
                let v = vecs.col(k);
                let sv = mat_vec(&s, &v);
                for i in 0..6 {
                    assert!((sv[i] - l * v[i]).abs() < 1e-9);
                }
                let shifted = s.sub(&Mat::identity(6).scale(l)).unwrap();
                assert!(Lu::new(&shifted).is_err() || {
                    let lu = Lu::new(&shifted).unwrap();
                    lu.lu.diag().iter().map(|d| d.abs()).fold(f64::INFINITY, f64::min) < 1e-8
                });
            }
        }
    }

    #[test]
    fn spd_solve_examples() {
        let b = Mat::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(solve_spd(&Mat::identity(2), &b).unwrap(), b);
        let x = solve_spd(&Mat::identity(2).scale(2.0), &Mat::from_rows(&[[4.0], [6.0]])).unwrap();
        assert!(x.sub(&Mat::from_rows(&[[2.0], [3.0]])).unwrap().max_abs() < 1e-14);
        for seed in 0..5 {
            let g = rand_mat(200 + seed, 5, 5);
            let a = g.t_matmul(&g).unwrap();
            let b = rand_mat(300 + seed, 5, 3);
            let x = solve_spd(&a, &b).unwrap();
            let r = a.matmul(&x).unwrap().sub(&b).unwrap();
            assert!(r.frobenius_norm() <= 1e-8 * b.frobenius_norm());
        }
    }

    #[test]
    fn non_spd_names_the_pivot() {
        let a = Mat::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]]);
        match solve_spd(&a, &Mat::identity(3)) {
            Err(Error::NotPositiveDefinite { pivot }) => assert_eq!(pivot, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lu_solves_indefinite_systems() {
        let a = Mat::from_rows(&[[0.0, 2.0], [1.0, 1.0]]);
        let x = Lu::new(&a).unwrap().solve(&Mat::from_rows(&[[2.0], [3.0]])).unwrap();
        assert!((x.get(0, 0) - 2.0).abs() < 1e-15 && (x.get(1, 0) - 1.0).abs() < 1e-15);
        assert!(matches!(Lu::new(&Mat::filled(2, 2, 1.0)), Err(Error::Singular { .. })));
    }

    #[test]
    fn inverse_square_root() {
        let g = rand_mat(9, 4, 4);
        let a = g.t_matmul(&g).unwrap().add(&Mat::identity(4)).unwrap();
        let r = spd_inv_sqrt(&a).unwrap();
        let prod = r.matmul(&a).unwrap().matmul(&r).unwrap();
        assert!(prod.sub(&Mat::identity(4)).unwrap().max_abs() < 1e-10);
    }
}
