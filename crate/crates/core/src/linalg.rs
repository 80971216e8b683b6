//! Krylov solvers for symmetric positive (semi)definite operators given as
//! closures on compact unknown vectors.
//!
//! Both solvers work in the weighted inner product `⟨x, y⟩_w = Σ w x y`, in
//! which the operators assembled by this crate are self-adjoint.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::grid::{dot, weighted_dot};

fn wdot(w: Option<&[f64]>, a: &[f64], b: &[f64]) -> f64 {
    match w {
        Some(w) => weighted_dot(w, a, b),
        None => dot(a, b),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOptions {
    /// Relative residual target `‖b - Ax‖_w ≤ tol ‖b‖_w`.
    pub tol: f64,
    pub max_iter: usize,
}

impl CgOptions {
    /// Default iteration budget `20 √n + 200`.
    pub fn with_default_budget(tol: f64, unknowns: usize) -> Self {
        Self {
            tol,
            max_iter: 20 * (unknowns as f64).sqrt().ceil() as usize + 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// In-place projection onto a subspace.
pub type Projection<'a> = &'a dyn Fn(&mut [f64]);

/// Preconditioned conjugate gradients for `A x = b`.
///
/// `diag` enables Jacobi scaling. `project` is applied to the right-hand
/// side and to every update, which restricts the iteration to a subspace
/// (for example mean-zero vectors when `A` annihilates constants).
pub fn conjugate_gradient(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    weights: Option<&[f64]>,
    diag: Option<&[f64]>,
    project: Option<Projection<'_>>,
    opts: &CgOptions,
) -> Result<CgOutcome> {
    let n = b.len();
    let mut r = b.to_vec();
    if let Some(p) = project {
        p(&mut r);
    }
    let b_norm = wdot(weights, &r, &r).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            residual: 0.0,
        });
    }
    let precondition = |r: &[f64], z: &mut [f64]| match diag {
        Some(d) => z.iter_mut().zip(r.iter().zip(d)).for_each(|(z, (r, d))| *z = r / d),
        None => z.copy_from_slice(r),
    };
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    if let Some(p) = project {
        p(&mut z);
    }
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = wdot(weights, &r, &z);
    let mut residual = 1.0;
    for it in 1..=opts.max_iter {
        apply(&p, &mut ap);
        let pap = wdot(weights, &p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "curvature {pap:.3e} along a search direction at iteration {it}"
            )));
        }
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.iter_mut().zip(&ap).for_each(|(r, ap)| *r -= alpha * ap);
        if let Some(pr) = project {
            pr(&mut r);
        }
        residual = wdot(weights, &r, &r).sqrt() / b_norm;
        if residual <= opts.tol {
            if let Some(pr) = project {
                pr(&mut x);
            }
            return Ok(CgOutcome {
                x,
                iterations: it,
                residual,
            });
        }
        precondition(&r, &mut z);
        if let Some(pr) = project {
            pr(&mut z);
        }
        let rz_new = wdot(weights, &r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenOptions {
    /// Stop when `‖A x - λ x‖_w ≤ tol` for the `w`-normalized iterate.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 2000,
            seed: 20_240_917,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenOutcome {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Positive pseudo-random start vector from a fixed seed.
pub fn start_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(0.5..1.5)).collect()
}

/// Smallest eigenpair by single-vector LOBPCG with Jacobi preconditioning.
///
/// Each step performs a Rayleigh–Ritz projection on `[x, P r, p]`. Images
/// under `A` of the basis are carried along the orthogonalization, so one
/// operator application per iteration suffices.
pub fn smallest_eigenpair(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    weights: Option<&[f64]>,
    diag: Option<&[f64]>,
    n: usize,
    opts: &EigenOptions,
) -> Result<EigenOutcome> {
    if n == 0 {
        return Err(Error::param("unknowns", "eigenproblem without unknowns"));
    }
    let mut x = start_vector(n, opts.seed);
    let nx = wdot(weights, &x, &x).sqrt();
    x.iter_mut().for_each(|v| *v /= nx);
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut dir: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut lambda = wdot(weights, &x, &ax);
    for it in 0..=opts.max_iter {
        let r: Vec<f64> = ax.iter().zip(&x).map(|(a, x)| a - lambda * x).collect();
        let residual = wdot(weights, &r, &r).sqrt();
        if residual <= opts.tol || it == opts.max_iter {
            return Ok(EigenOutcome {
                value: lambda,
                vector: x,
                residual,
                iterations: it,
                converged: residual <= opts.tol,
            });
        }
        let mut w: Vec<f64> = match diag {
            Some(d) => r.iter().zip(d).map(|(r, d)| r / d).collect(),
            None => r,
        };
        let mut aw = vec![0.0; n];
        apply(&w, &mut aw);

        // basis [x, w, p] with images, orthonormalized in the w-product
        let mut basis: Vec<(Vec<f64>, Vec<f64>)> = vec![(x.clone(), ax.clone())];
        let mut candidates = vec![(std::mem::take(&mut w), aw)];
        if let Some(d) = dir.take() {
            candidates.push(d);
        }
        for (mut v, mut av) in candidates {
            let norm0 = wdot(weights, &v, &v).sqrt();
            for _ in 0..2 {
                for (q, aq) in &basis {
                    let c = wdot(weights, q, &v);
                    v.iter_mut().zip(q).for_each(|(v, q)| *v -= c * q);
                    av.iter_mut().zip(aq).for_each(|(v, q)| *v -= c * q);
                }
            }
            let norm = wdot(weights, &v, &v).sqrt();
            if norm > 1e-10 * norm0 && norm > 0.0 {
                v.iter_mut().for_each(|v| *v /= norm);
                av.iter_mut().for_each(|v| *v /= norm);
                basis.push((v, av));
            }
        }
        let k = basis.len();
        let mut g = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let v = 0.5 * (wdot(weights, &basis[i].0, &basis[j].1) + wdot(weights, &basis[j].0, &basis[i].1));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(g);
        let (imin, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty basis");
        let c = eig.eigenvectors.column(imin);
        let mut new_x = vec![0.0; n];
        let mut new_ax = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut ap = vec![0.0; n];
        for (j, (q, aq)) in basis.iter().enumerate() {
            let cj = c[j];
            new_x.iter_mut().zip(q).for_each(|(v, q)| *v += cj * q);
            new_ax.iter_mut().zip(aq).for_each(|(v, q)| *v += cj * q);
            if j > 0 {
                p.iter_mut().zip(q).for_each(|(v, q)| *v += cj * q);
                ap.iter_mut().zip(aq).for_each(|(v, q)| *v += cj * q);
            }
        }
        let nx = wdot(weights, &new_x, &new_x).sqrt();
        new_x.iter_mut().for_each(|v| *v /= nx);
        new_ax.iter_mut().for_each(|v| *v /= nx);
        x = new_x;
        ax = new_ax;
        lambda = wdot(weights, &x, &ax);
        if k > 1 {
            dir = Some((p, ap));
        }
    }
    unreachable!("loop returns at max_iter")
}
