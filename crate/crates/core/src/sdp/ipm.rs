//! Infeasible-start primal-dual path-following method with the Nesterov-Todd
//! search direction and Mehrotra predictor-corrector steps.
//!
//! Works on the pair
//!
//! ```text
//! (D)  min c^T y   s.t.  Z = F_0 + sum_j y_j F_j >= 0
//! (P)  max -<F_0, X>  s.t.  <F_j, X> = c_j,  X >= 0
//! ```
//!
//! after scaling every block to unit Frobenius norm and every variable so that
//! its coefficient column has unit norm. If the iteration stalls, a phase-one
//! problem `min t s.t. F(y) + t I >= 0, t >= -1` decides between infeasibility
//! and numerical trouble.

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use super::{BlockSource, ConicBlock, ConicProblem, ConicSolution, SolveStatus, SolverSettings};
use crate::linalg::{identity, min_eig, symmetrize, Mat, Vector};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IpmInfo {
    pub iterations: usize,
    pub rel_gap: f64,
    /// Relative residual of `Z = F(y)`.
    pub primal_infeas: f64,
    /// Relative residual of `<F_j, X> = c_j`.
    pub dual_infeas: f64,
    /// Optimal `t` of the phase-one problem when it was run.
    pub phase_one: Option<f64>,
    /// Stalled before the tolerances were met; the best iterate was within
    /// `reduced_accuracy_factor` of them.
    pub reduced_accuracy: bool,
    pub message: String,
}

struct Block {
    n: usize,
    f0: Mat,
    terms: Vec<(usize, Mat)>,
}

struct Scaled {
    m: usize,
    c: Vec<f64>,
    blocks: Vec<Block>,
    /// Original index of every active variable.
    origin: Vec<usize>,
    /// `y_orig = var_scale * y_scaled`.
    var_scale: Vec<f64>,
}

fn dot(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn scale_problem(p: &ConicProblem) -> (Scaled, Vec<f64>) {
    let mut c_full = vec![0.0; p.nvars];
    for (j, v) in &p.objective {
        c_full[*j] += v;
    }
    // Block scaling.
    let block_scale: Vec<f64> = p
        .blocks
        .iter()
        .map(|b| {
            let s = b.coeffs.iter().map(|(_, m)| m.norm()).fold(b.constant.norm(), f64::max);
            if s > 0.0 {
                1.0 / s
            } else {
                1.0
            }
        })
        .collect();
    // Column norms after block scaling.
    let mut col = vec![0.0; p.nvars];
    for (b, s) in p.blocks.iter().zip(&block_scale) {
        for (j, m) in &b.coeffs {
            col[*j] += (m.norm() * s).powi(2);
        }
    }
    let mut origin = Vec::new();
    let mut index = vec![usize::MAX; p.nvars];
    let mut var_scale = Vec::new();
    for j in 0..p.nvars {
        if col[j] > 0.0 {
            index[j] = origin.len();
            origin.push(j);
            var_scale.push(1.0 / col[j].sqrt());
        }
    }
    let all: Vec<Block> = p
        .blocks
        .iter()
        .zip(&block_scale)
        .map(|(b, s)| {
            let mut terms: Vec<(usize, Mat)> = Vec::new();
            for (j, m) in &b.coeffs {
                let k = index[*j];
                let mm = m * (s * var_scale[k]);
                if let Some(t) = terms.iter_mut().find(|(kk, _)| *kk == k) {
                    t.1 += mm;
                } else {
                    terms.push((k, mm));
                }
            }
            Block {
                n: b.size(),
                f0: &b.constant * *s,
                terms,
            }
        })
        .collect();
    // Exact duplicates (for example vertices that differ only in data a block
    // does not use) add nothing but dual degeneracy.
    let mut blocks: Vec<Block> = Vec::with_capacity(all.len());
    for b in all {
        let dup = blocks.iter().any(|o| {
            o.n == b.n
                && o.f0 == b.f0
                && o.terms.len() == b.terms.len()
                && o.terms.iter().zip(&b.terms).all(|(x, y)| x.0 == y.0 && x.1 == y.1)
        });
        if !dup {
            blocks.push(b);
        }
    }
    let c: Vec<f64> = origin.iter().zip(&var_scale).map(|(j, d)| c_full[*j] * d).collect();
    (
        Scaled {
            m: origin.len(),
            c,
            blocks,
            origin,
            var_scale,
        },
        c_full,
    )
}

enum Outcome {
    Converged,
    /// Stalled, but the best iterate was within the reduced-accuracy band.
    Reduced(String),
    Infeasible,
    Stalled(String),
}

struct Iterate {
    y: Vec<f64>,
    x: Vec<Mat>,
    z: Vec<Mat>,
}

fn solve_linear(mat: &Mat, rhs: &Vector) -> Option<Vector> {
    if let Some(ch) = Cholesky::new(mat.clone()) {
        return Some(ch.solve(rhs));
    }
    let dmax = mat.diagonal().iter().copied().fold(0.0, f64::max).max(1e-300);
    for reg in [1e-14, 1e-12, 1e-10] {
        let mut m = mat.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += reg * dmax;
        }
        if let Some(ch) = Cholesky::new(m) {
            return Some(ch.solve(rhs));
        }
    }
    mat.clone().lu().solve(rhs)
}

fn run(s: &Scaled, settings: &SolverSettings, info: &mut IpmInfo) -> (Vec<f64>, Outcome) {
    let m = s.m;
    let nt: usize = s.blocks.iter().map(|b| b.n).sum();
    let f0_norm = s.blocks.iter().map(|b| b.f0.norm_squared()).sum::<f64>().sqrt();
    let c_norm = s.c.iter().map(|v| v * v).sum::<f64>().sqrt();

    // Starting point in the style of SDPT3.
    let mut xi: f64 = 10.0_f64.max((nt as f64).sqrt());
    let mut eta: f64 = 10.0_f64.max((nt as f64).sqrt());
    for b in &s.blocks {
        for (k, f) in &b.terms {
            xi = xi.max(b.n as f64 * (1.0 + s.c[*k].abs()) / (1.0 + f.norm()));
        }
        eta = eta.max(b.f0.norm());
    }
    let mut it = Iterate {
        y: vec![0.0; m],
        x: s.blocks.iter().map(|b| identity(b.n) * xi).collect(),
        z: s.blocks.iter().map(|b| identity(b.n) * eta).collect(),
    };

    // Gram matrix <F_i, F_j> of the constraint map; unlike the Schur
    // complement it does not degrade as mu -> 0.
    let mut gram = Mat::zeros(m, m);
    for b in &s.blocks {
        for (a, (ki, fi)) in b.terms.iter().enumerate() {
            for (kj, fj) in &b.terms[a..] {
                let v = dot(fi, fj);
                gram[(*ki, *kj)] += v;
                if ki != kj {
                    gram[(*kj, *ki)] += v;
                }
            }
        }
    }
    let gram_chol = Cholesky::new(gram.clone());

    let mut small_steps = 0;
    // (merit, y, gap, pinf, dinf) of the best iterate seen so far.
    let mut best: Option<(f64, Vec<f64>, f64, f64, f64)> = None;
    // (objective, y) of the best iterate with Z = F(y) up to feas_tol.
    let mut best_feasible: Option<(f64, Vec<f64>)> = None;
    let reason: String = 'solve: {
    for iter in 0..settings.max_iterations {
        info.iterations = iter;
        // Residuals.
        let mut ax = vec![0.0; m];
        for (b, x) in s.blocks.iter().zip(&it.x) {
            for (k, f) in &b.terms {
                ax[*k] += dot(f, x);
            }
        }
        let rp: Vec<f64> = (0..m).map(|k| s.c[k] - ax[k]).collect();
        let rd: Vec<Mat> = s
            .blocks
            .iter()
            .zip(&it.z)
            .map(|(b, z)| {
                let mut r = b.f0.clone() - z;
                for (k, f) in &b.terms {
                    r += f * it.y[*k];
                }
                r
            })
            .collect();
        let xz: f64 = it.x.iter().zip(&it.z).map(|(x, z)| dot(x, z)).sum();
        let mu = xz / nt as f64;
        let pobj: f64 = s.c.iter().zip(&it.y).map(|(c, y)| c * y).sum();
        let dobj: f64 = -s.blocks.iter().zip(&it.x).map(|(b, x)| dot(&b.f0, x)).sum::<f64>();
        let rel_gap = (pobj - dobj).abs().min(xz.abs()) / (1.0 + pobj.abs() + dobj.abs());
        let pinf = rd.iter().map(|r| r.norm_squared()).sum::<f64>().sqrt() / (1.0 + f0_norm);
        let dinf = rp.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + c_norm);
        info.rel_gap = rel_gap;
        info.primal_infeas = pinf;
        info.dual_infeas = dinf;
        log::trace!("ipm {iter:3} pobj {pobj:+.8e} dobj {dobj:+.8e} gap {rel_gap:.2e} pinf {pinf:.2e} dinf {dinf:.2e} mu {mu:.2e}");

        if !(pobj.is_finite() && dobj.is_finite() && mu.is_finite()) {
            break 'solve "non-finite iterate".into();
        }
        if rel_gap <= settings.gap_tol && pinf <= settings.feas_tol && dinf <= settings.feas_tol {
            return (it.y, Outcome::Converged);
        }
        let merit = (rel_gap / settings.gap_tol).max(pinf / settings.feas_tol).max(dinf / settings.feas_tol);
        if best.as_ref().is_none_or(|b| merit < b.0) {
            best = Some((merit, it.y.clone(), rel_gap, pinf, dinf));
        }
        if pinf <= settings.feas_tol && best_feasible.as_ref().is_none_or(|b| pobj < b.0) {
            best_feasible = Some((pobj, it.y.clone()));
        }
        // Certificate of infeasibility of (D): X >= 0, <F_j, X> ~ 0, <F_0, X> < 0.
        if dobj > 0.0 {
            let ax_norm = ax.iter().map(|v| v * v).sum::<f64>().sqrt();
            if ax_norm / dobj < settings.feas_tol {
                return (it.y, Outcome::Infeasible);
            }
        }

        // Nesterov-Todd scaling per block: W = G G^T with W Z W = X and
        // G^-1 X G^-T = G^T Z G = diag(d).
        let mut nts: Vec<(Mat, Mat, Vector, Mat)> = Vec::with_capacity(s.blocks.len());
        for (x, z) in it.x.iter().zip(&it.z) {
            let Some(cx) = Cholesky::new(symmetrize(x)) else {
                break 'solve "lost positive definiteness of X".into();
            };
            let lx = cx.l();
            let eig = symmetrize(&(lx.transpose() * z * &lx)).symmetric_eigen();
            if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
                break 'solve "lost positive definiteness of Z".into();
            }
            let quarter = Mat::from_diagonal(&eig.eigenvalues.map(|l| l.powf(-0.25)));
            let inv_quarter = Mat::from_diagonal(&eig.eigenvalues.map(|l| l.powf(0.25)));
            let Some(lx_inv) = lx.solve_lower_triangular(&identity(lx.nrows())) else {
                break 'solve "lost positive definiteness of X".into();
            };
            let g = &lx * &eig.eigenvectors * quarter;
            let g_inv = inv_quarter * eig.eigenvectors.transpose() * lx_inv;
            let w = &g * g.transpose();
            nts.push((g, w, eig.eigenvalues.map(f64::sqrt), g_inv));
        }

        // Schur complement M_ij = tr(F_i W F_j W) = <G^T F_i G, G^T F_j G>.
        let mut schur = Mat::zeros(m, m);
        for (b, (g, _, _, _)) in s.blocks.iter().zip(&nts) {
            let gf: Vec<(usize, Mat)> = b.terms.iter().map(|(k, f)| (*k, g.transpose() * f * g)).collect();
            for (a, (ki, gi)) in gf.iter().enumerate() {
                for (kj, gj) in &gf[a..] {
                    let v = dot(gi, gj);
                    schur[(*ki, *kj)] += v;
                    if ki != kj {
                        schur[(*kj, *ki)] += v;
                    }
                }
            }
        }
        let schur_chol = Cholesky::new(schur.clone());
        let weighted = |bi: usize, v: &Vector| -> Mat {
            let mut d = Mat::zeros(s.blocks[bi].n, s.blocks[bi].n);
            for (k, f) in &s.blocks[bi].terms {
                d += f * v[*k];
            }
            let w = &nts[bi].1;
            w * d * w
        };
        let apply_op = |v: &Vector| -> Vector {
            let mut out = Vector::zeros(m);
            for (bi, b) in s.blocks.iter().enumerate() {
                let t = weighted(bi, v);
                for (k, f) in &b.terms {
                    out[*k] += dot(f, &t);
                }
            }
            out
        };
        let solve_schur = |rhs: &Vector| -> Option<Vector> {
            let mut v = match &schur_chol {
                Some(c) => c.solve(rhs),
                None => solve_linear(&schur, rhs)?,
            };
            for _ in 0..2 {
                let res = rhs - apply_op(&v);
                if res.norm() <= 1e-15 * rhs.norm() {
                    break;
                }
                v += match &schur_chol {
                    Some(c) => c.solve(&res),
                    None => solve_linear(&schur, &res)?,
                };
            }
            v.iter().all(|x| x.is_finite()).then_some(v)
        };

        // Returns (dy, dX, dZ) together with the scaled steps G^-1 dX G^-T
        // and G^T dZ G.
        type Dir = (Vector, Vec<Mat>, Vec<Mat>, Vec<Mat>, Vec<Mat>);
        let direction = |target: f64, corr: Option<(&[Mat], &[Mat])>| -> Option<Dir> {
            let mut psis = Vec::with_capacity(s.blocks.len());
            let mut h = Vector::zeros(m);
            for (bi, b) in s.blocks.iter().enumerate() {
                let (g, w, d, _) = &nts[bi];
                let mut r = Mat::from_fn(b.n, b.n, |i, j| if i == j { target - d[i] * d[i] } else { 0.0 });
                if let Some((xa, za)) = corr {
                    r -= symmetrize(&(&xa[bi] * &za[bi]));
                }
                let psi = Mat::from_fn(b.n, b.n, |i, j| 2.0 * r[(i, j)] / (d[i] + d[j]));
                let t = g * &psi * g.transpose() - w * &rd[bi] * w;
                for (k, f) in &b.terms {
                    h[*k] += dot(f, &t);
                }
                psis.push(psi);
            }
            for k in 0..m {
                h[k] -= rp[k];
            }
            let dy = solve_schur(&h)?;
            let (mut dx, mut dz, mut xt, mut zt) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for (bi, b) in s.blocks.iter().enumerate() {
                let g = &nts[bi].0;
                let mut d = rd[bi].clone();
                for (k, f) in &b.terms {
                    d += f * dy[*k];
                }
                let zs = symmetrize(&(g.transpose() * &d * g));
                let xs = &psis[bi] - &zs;
                dx.push(symmetrize(&(g * &xs * g.transpose())));
                dz.push(d);
                xt.push(xs);
                zt.push(zs);
            }
            // One projection step restoring <F_j, dX> = rp_j in the W metric.
            let mut res = Vector::from_column_slice(&rp);
            for (b, d) in s.blocks.iter().zip(&dx) {
                for (k, f) in &b.terms {
                    res[*k] -= dot(f, d);
                }
            }
            if let Some(v) = solve_schur(&res) {
                for (bi, b) in s.blocks.iter().enumerate() {
                    let g = &nts[bi].0;
                    let mut a = Mat::zeros(b.n, b.n);
                    for (k, f) in &b.terms {
                        a += f * v[*k];
                    }
                    let a = symmetrize(&(g.transpose() * a * g));
                    dx[bi] += symmetrize(&(g * &a * g.transpose()));
                    xt[bi] += a;
                }
            }
            // What is left goes through the Euclidean projection.
            if let Some(gc) = &gram_chol {
                let mut res = Vector::from_column_slice(&rp);
                for (b, d) in s.blocks.iter().zip(&dx) {
                    for (k, f) in &b.terms {
                        res[*k] -= dot(f, d);
                    }
                }
                let v = gc.solve(&res);
                if v.iter().all(|x| x.is_finite()) {
                    for (bi, b) in s.blocks.iter().enumerate() {
                        let gi = &nts[bi].3;
                        let mut a = Mat::zeros(b.n, b.n);
                        for (k, f) in &b.terms {
                            a += f * v[*k];
                        }
                        xt[bi] += symmetrize(&(gi * &a * gi.transpose()));
                        dx[bi] += a;
                    }
                }
            }
            Some((dy, dx, dz, xt, zt))
        };

        // Largest a with diag(d) + a S >= 0.
        let scaled_step = |d: &Vector, sm: &Mat| -> f64 {
            let inv = d.map(|v| 1.0 / v.sqrt());
            let t = Mat::from_fn(sm.nrows(), sm.ncols(), |i, j| sm[(i, j)] * inv[i] * inv[j]);
            let lo = min_eig(&t);
            if lo >= 0.0 {
                f64::INFINITY
            } else {
                -1.0 / lo
            }
        };
        let steps = |xt: &[Mat], zt: &[Mat]| -> (f64, f64) {
            let ap = nts.iter().zip(xt).map(|(n, x)| scaled_step(&n.2, x)).fold(f64::INFINITY, f64::min);
            let ad = nts.iter().zip(zt).map(|(n, z)| scaled_step(&n.2, z)).fold(f64::INFINITY, f64::min);
            (ap, ad)
        };

        // Predictor.
        let Some((_, _, _, xa, za)) = direction(0.0, None) else {
            break 'solve "singular Schur complement".into();
        };
        let (ap, ad) = steps(&xa, &za);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let xz_aff: f64 = nts
            .iter()
            .zip(xa.iter().zip(&za))
            .map(|((_, _, d, _), (x, z))| {
                let v = Mat::from_diagonal(d);
                dot(&(&v + x * ap), &(&v + z * ad))
            })
            .sum();
        let mu_aff = xz_aff / nt as f64;
        let expon = 1.0_f64.max(3.0 * ap.min(ad).powi(2));
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powf(expon);

        // Corrector.
        let Some((dy, dx, dz, xt, zt)) = direction(sigma * mu, Some((&xa, &za))) else {
            break 'solve "singular Schur complement".into();
        };
        let (ap, ad) = steps(&xt, &zt);
        log::trace!("    ap {ap:.3e} ad {ad:.3e} sigma {sigma:.2e}");
        let tau = if rel_gap < 1e-6 { 0.98 } else { 0.95 };
        let ap = (tau * ap).min(1.0);
        let ad = (tau * ad).min(1.0);

        if ap.min(ad) < 1e-10 {
            small_steps += 1;
            if small_steps >= 3 {
                break 'solve format!("step lengths collapsed (ap {ap:.1e}, ad {ad:.1e})");
            }
        } else {
            small_steps = 0;
        }
        for (x, d) in it.x.iter_mut().zip(&dx) {
            *x = symmetrize(&(&*x + d * ap));
        }
        for (z, d) in it.z.iter_mut().zip(&dz) {
            *z = symmetrize(&(&*z + d * ad));
        }
        for (y, d) in it.y.iter_mut().zip(&dy) {
            *y += d * ad;
        }
    }
    info.iterations = settings.max_iterations;
    "iteration limit".into()
    };
    match best {
        Some((merit, y, gap, pinf, dinf)) if merit <= settings.reduced_accuracy_factor => {
            info.rel_gap = gap;
            info.primal_infeas = pinf;
            info.dual_infeas = dinf;
            (y, Outcome::Reduced(reason))
        }
        _ => {
            let y = best_feasible.map_or(it.y, |b| b.1);
            (y, Outcome::Stalled(reason))
        }
    }
}

fn unscale(s: &Scaled, y: &[f64], nvars: usize) -> Vec<f64> {
    let mut out = vec![0.0; nvars];
    for (k, (j, d)) in s.origin.iter().zip(&s.var_scale).enumerate() {
        out[*j] = y[k] * d;
    }
    out
}

fn phase_one(p: &ConicProblem) -> ConicProblem {
    let t = p.nvars;
    let mut blocks: Vec<ConicBlock> = p
        .blocks
        .iter()
        .map(|b| {
            let mut b = b.clone();
            b.coeffs.push((t, identity(b.size())));
            b
        })
        .collect();
    blocks.push(ConicBlock {
        name: "phase-one bound".into(),
        source: BlockSource::Internal,
        margin: 0.0,
        constant: Mat::from_element(1, 1, 1.0),
        coeffs: vec![(t, Mat::from_element(1, 1, 1.0))],
    });
    ConicProblem {
        nvars: t + 1,
        objective: vec![(t, 1.0)],
        blocks,
    }
}

fn solve_inner(p: &ConicProblem, settings: &SolverSettings, allow_phase_one: bool) -> ConicSolution {
    let mut info = IpmInfo::default();
    let (scaled, c_full) = scale_problem(p);
    if (0..p.nvars).any(|j| c_full[j] != 0.0 && !scaled.origin.contains(&j)) {
        info.message = "objective variable appears in no constraint (unbounded)".into();
        let y = vec![0.0; p.nvars];
        return ConicSolution {
            objective_value: p.objective_value(&y),
            block_min_eigs: p.block_min_eigs(&y),
            assignment: y,
            status: SolveStatus::NumericalTrouble,
            info,
        };
    }
    let (ys, outcome) = run(&scaled, settings, &mut info);
    let y = unscale(&scaled, &ys, p.nvars);
    let block_min_eigs = p.block_min_eigs(&y);
    let status = match outcome {
        Outcome::Converged => {
            if block_min_eigs.iter().all(|&e| e >= -settings.feas_tol) {
                info.message = "converged".into();
                SolveStatus::Optimal
            } else {
                info.message = "converged, but a block violates its sign condition".into();
                SolveStatus::NumericalTrouble
            }
        }
        Outcome::Reduced(why) => {
            info.reduced_accuracy = true;
            if block_min_eigs.iter().all(|&e| e >= -settings.feas_tol) {
                info.message = format!("reduced accuracy ({why})");
                SolveStatus::Optimal
            } else {
                info.message = format!("reduced accuracy, sign condition violated ({why})");
                SolveStatus::NumericalTrouble
            }
        }
        Outcome::Infeasible => {
            info.message = "infeasibility certificate".into();
            SolveStatus::Infeasible
        }
        Outcome::Stalled(why) => {
            info.message = why;
            if allow_phase_one {
                let p1 = phase_one(p);
                let s1 = solve_inner(&p1, settings, false);
                let t = s1.assignment[p.nvars];
                info.phase_one = Some(t);
                if s1.status == SolveStatus::Optimal && t > settings.feas_tol.sqrt() * 1e-2 {
                    info.message.push_str("; phase one proves infeasibility");
                    SolveStatus::Infeasible
                } else {
                    SolveStatus::NumericalTrouble
                }
            } else {
                SolveStatus::NumericalTrouble
            }
        }
    };
    ConicSolution {
        objective_value: p.objective_value(&y),
        assignment: y,
        status,
        block_min_eigs,
        info,
    }
}

pub(super) fn solve(p: &ConicProblem, settings: &SolverSettings) -> ConicSolution {
    solve_inner(p, settings, true)
}
