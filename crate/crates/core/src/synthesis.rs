//! Inner convex program at fixed `(alpha, rho)`, gain recovery, the
//! admissible disturbance bound and the outer search over `(alpha, rho)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{c_sigma, Certificates};
use crate::error::{Error, Result};
use crate::linalg::{rowmajor, spectral_norm, Mat, Vector};
use crate::lmi::{
    build_nonlinear_lmi, build_linear_perf_lmi, build_coupling_lmi, build_initial_lmis, build_gain_lmi, AffineMatrixExpr, SynthesisLayout,
};
use crate::model::{DesignConfig, PolytopicPlant};
use crate::sdp::{self, ExprCheck, SolveStatus, SolverSettings};
use crate::sim::Gains;

/// Worst verification margin tolerated on a returned result.
pub const VERIFY_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub status: SolveStatus,
    /// False when the solver stalled and the iterate was accepted only after
    /// independent verification.
    pub proven_optimal: bool,
    pub iterations: usize,
    pub rel_gap: f64,
    pub primal_infeas: f64,
    pub dual_infeas: f64,
    pub reduced_accuracy: bool,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub theta: f64,
    #[serde(rename = "Q", with = "rowmajor")]
    pub q: Mat,
    #[serde(rename = "X", with = "rowmajor")]
    pub x: Mat,
    #[serde(rename = "Y", with = "rowmajor")]
    pub y: Mat,
    #[serde(rename = "W", with = "rowmajor")]
    pub w: Mat,
    /// `(mu, beta, pi, kappa)`.
    pub zd: [f64; 4],
    #[serde(rename = "K0", with = "rowmajor")]
    pub k0: Mat,
    #[serde(rename = "K1", with = "rowmajor")]
    pub k1: Mat,
    #[serde(rename = "K2", with = "rowmajor")]
    pub k2: Mat,
    pub delta: f64,
    pub deltas: Vec<f64>,
    /// Condition number of `B_i K2` per vertex.
    pub bk2_condition: Vec<f64>,
    pub alpha: f64,
    pub rho: f64,
    pub gamma: f64,
    pub omega: f64,
    pub solver: SolverReport,
    pub margins: Vec<ExprCheck>,
    pub worst_margin: f64,
}

impl SynthesisResult {
    pub fn gains(&self) -> Gains {
        Gains {
            k0: self.k0.clone(),
            k1: self.k1.clone(),
            k2: self.k2.clone(),
        }
    }

    /// `S = Q^-1`, `P = X^-1` with the scalars used.
    pub fn certificates(&self) -> Result<Certificates> {
        Certificates::from_synthesis(&self.q, &self.x, self.zd, self.alpha, self.rho, self.gamma)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `R(sigma0) x0` with `x0 = [sigma0; eta0]`. The disturbance is assumed to
/// vanish at `t = 0`, so `z0 = eta0`.
pub fn scaled_initial_state(cfg: &DesignConfig) -> Vector {
    let n = cfg.sigma0.len();
    let c = c_sigma(&cfg.sigma0, cfg.alpha);
    let mut x = Vector::zeros(2 * n);
    for i in 0..n {
        x[i] = c * cfg.sigma0[i];
        x[n + i] = cfg.eta0[i];
    }
    x
}

/// All inequalities of the inner program, in the order
/// nonlinear per vertex, linear performance per vertex, coupling per vertex,
/// initial condition (two blocks), gain bound.
pub fn build_program(plant: &PolytopicPlant, cfg: &DesignConfig) -> Result<(SynthesisLayout, Vec<AffineMatrixExpr>)> {
    cfg.validate_for(plant)?;
    let vars = SynthesisLayout::for_plant(plant);
    let nv = plant.len();
    let mut exprs = Vec::with_capacity(3 * nv + 3);
    for i in 0..nv {
        exprs.push(build_nonlinear_lmi(plant, i, cfg.alpha, cfg.rho, cfg.gamma, &vars)?);
    }
    for i in 0..nv {
        exprs.push(build_linear_perf_lmi(plant, i, cfg.alpha, cfg.rho, &cfg.h, &cfg.j, &vars)?);
    }
    for i in 0..nv {
        exprs.push(build_coupling_lmi(plant, i, cfg.rho, cfg.alpha, &cfg.h, &cfg.j, &vars)?);
    }
    let (a, b) = build_initial_lmis(&cfg.zeta0, &scaled_initial_state(cfg), &vars);
    exprs.push(a);
    exprs.push(b);
    exprs.push(build_gain_lmi(cfg.omega, &vars)?);
    Ok((vars, exprs))
}

/// Minimizes `theta` at the `(alpha, rho)` of `cfg`.
pub fn solve_inner(plant: &PolytopicPlant, cfg: &DesignConfig, settings: &SolverSettings) -> Result<SynthesisResult> {
    let (vars, exprs) = build_program(plant, cfg)?;
    let problem = sdp::translate_with(
        &exprs,
        vars.theta.index(),
        &vars.layout,
        settings.margin_rel,
        settings.pd_floor,
    )?;
    let sol = sdp::solve(&problem, settings)?;
    let (alpha, rho) = (cfg.alpha, cfg.rho);
    if sol.status == SolveStatus::Infeasible {
        return Err(Error::Infeasible { alpha, rho });
    }
    let y = &sol.assignment;
    let margins = sdp::verify_solution(&exprs, y)?;
    let worst = margins.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
    let proven = sol.status == SolveStatus::Optimal;
    let accepted = if proven {
        worst >= -VERIFY_TOL
    } else {
        margins.iter().all(|c| c.pass)
    };
    if !accepted {
        let bad = margins.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect::<Vec<_>>();
        return Err(Error::Unresolved {
            alpha,
            rho,
            message: format!("{} (failing: {})", sol.info.message, bad.join(", ")),
        });
    }
    if !proven {
        log::warn!("alpha = {alpha}, rho = {rho}: solver stalled, iterate verified and kept");
    }

    let q = vars.q.value(y);
    let x = vars.x.value(y);
    let ym = vars.y.value(y);
    let w = vars.w.value(y);
    let (k0, k1, k2) = recover_gains(&q, &x, &ym, &w, plant.n())?;
    let (delta, deltas) = compute_delta(plant, &k2, cfg.gamma)?;
    let bk2_condition = plant
        .vertices()
        .iter()
        .map(|v| {
            let sv = (&v.b * &k2).singular_values();
            let hi = sv.iter().copied().fold(0.0, f64::max);
            let lo = sv.iter().copied().fold(f64::INFINITY, f64::min);
            hi / lo
        })
        .collect();
    Ok(SynthesisResult {
        theta: y[vars.theta.index()],
        zd: vars.zd(y),
        q,
        x,
        y: ym,
        w,
        k0,
        k1,
        k2,
        delta,
        deltas,
        bk2_condition,
        alpha,
        rho,
        gamma: cfg.gamma,
        omega: cfg.omega,
        solver: SolverReport {
            status: sol.status,
            proven_optimal: proven,
            iterations: sol.info.iterations,
            rel_gap: sol.info.rel_gap,
            primal_infeas: sol.info.primal_infeas,
            dual_infeas: sol.info.dual_infeas,
            reduced_accuracy: sol.info.reduced_accuracy,
            message: sol.info.message.clone(),
        },
        margins,
        worst_margin: worst,
    })
}

/// `K0 = W Q^-1` and `[K1 K2] = Y X^-1`.
pub fn recover_gains(q: &Mat, x: &Mat, y: &Mat, w: &Mat, n: usize) -> Result<(Mat, Mat, Mat)> {
    if x.nrows() != 2 * n || y.ncols() != 2 * n || w.ncols() != q.nrows() {
        return Err(Error::DimensionMismatch("recover_gains operands".into()));
    }
    // K Q = W  <=>  Q^T K^T = W^T
    let k0 = q
        .transpose()
        .lu()
        .solve(&w.transpose())
        .ok_or(Error::SingularMatrix("Q"))?
        .transpose();
    let k = x
        .transpose()
        .lu()
        .solve(&y.transpose())
        .ok_or(Error::SingularMatrix("X"))?
        .transpose();
    if k0.iter().chain(k.iter()).any(|v| !v.is_finite()) {
        return Err(Error::SingularMatrix("Q or X"));
    }
    let k1 = k.columns(0, n).into_owned();
    let k2 = k.columns(n, n).into_owned();
    Ok((k0, k1, k2))
}

/// `delta_i = 1 / (|(B_i K2)^-1| gamma)` per vertex and their minimum.
pub fn compute_delta(plant: &PolytopicPlant, k2: &Mat, gamma: f64) -> Result<(f64, Vec<f64>)> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidScalar { name: "gamma", value: gamma });
    }
    let mut out = Vec::with_capacity(plant.len());
    for (i, v) in plant.vertices().iter().enumerate() {
        let bk = &v.b * k2;
        let inv = bk.try_inverse().ok_or(Error::SingularBk2(i))?;
        let nrm = spectral_norm(&inv);
        if !nrm.is_finite() || nrm == 0.0 {
            return Err(Error::SingularBk2(i));
        }
        out.push(1.0 / (nrm * gamma));
    }
    let min = out.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((min, out))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub log: bool,
}

impl AxisRange {
    fn validate(&self, name: &str) -> Result<()> {
        let ok = self.min.is_finite()
            && self.max.is_finite()
            && self.min > 0.0
            && self.points >= 1
            && (self.min < self.max || (self.points == 1 && self.min <= self.max));
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid {name} range {self:?}")))
        }
    }

    fn to_coord(&self, v: f64) -> f64 {
        if self.log {
            v.ln()
        } else {
            v
        }
    }

    fn from_coord(&self, c: f64) -> f64 {
        if self.log {
            c.exp()
        } else {
            c
        }
    }

    /// Grid spacing in the axis coordinate; zero for a single point.
    fn step(&self) -> f64 {
        if self.points < 2 {
            0.0
        } else {
            (self.to_coord(self.max) - self.to_coord(self.min)) / (self.points - 1) as f64
        }
    }

    pub fn values(&self) -> Vec<f64> {
        let lo = self.to_coord(self.min);
        let h = self.step();
        (0..self.points).map(|k| self.from_coord(lo + h * k as f64)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub alpha_range: AxisRange,
    pub rho_range: AxisRange,
    /// Coordinate-descent passes after the grid.
    pub refinement: usize,
    /// Golden-section iterations per axis and pass.
    #[serde(default = "default_golden")]
    pub golden_iterations: usize,
}

fn default_golden() -> usize {
    8
}

impl Default for SearchGrid {
    fn default() -> Self {
        Self {
            alpha_range: AxisRange { min: 1.0, max: 100.0, points: 8, log: true },
            rho_range: AxisRange { min: 0.1, max: 10.0, points: 8, log: true },
            refinement: 3,
            golden_iterations: default_golden(),
        }
    }
}

impl SearchGrid {
    pub fn single(alpha: f64, rho: f64) -> Self {
        Self {
            alpha_range: AxisRange { min: alpha, max: alpha, points: 1, log: false },
            rho_range: AxisRange { min: rho, max: rho, points: 1, log: false },
            refinement: 0,
            golden_iterations: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.alpha_range.validate("alpha")?;
        self.rho_range.validate("rho")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Optimal,
    /// Solver stalled; the iterate passed independent verification.
    Verified,
    Infeasible,
    Unresolved,
    Failed,
}

impl PointStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Optimal => "optimal",
            Self::Verified => "verified",
            Self::Infeasible => "infeasible",
            Self::Unresolved => "unresolved",
            Self::Failed => "failed",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapePoint {
    pub alpha: f64,
    pub rho: f64,
    /// `+inf` when no certificate was obtained.
    pub theta: f64,
    pub status: PointStatus,
    pub refined: bool,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub best: SynthesisResult,
    pub landscape: Vec<LandscapePoint>,
}

impl SearchOutcome {
    /// Landscape as CSV `alpha,rho,theta,status,stage`.
    pub fn landscape_csv(&self) -> String {
        landscape_csv(&self.landscape)
    }
}

pub fn landscape_csv(points: &[LandscapePoint]) -> String {
    let mut s = String::from("alpha,rho,theta,status,stage\n");
    for p in points {
        s.push_str(&format!(
            "{:.10e},{:.10e},{:.10e},{},{}\n",
            p.alpha,
            p.rho,
            p.theta,
            p.status.as_str(),
            if p.refined { "refine" } else { "grid" }
        ));
    }
    s
}

fn evaluate(
    plant: &PolytopicPlant,
    cfg: &DesignConfig,
    settings: &SolverSettings,
    alpha: f64,
    rho: f64,
    refined: bool,
) -> (LandscapePoint, Option<SynthesisResult>) {
    let res = solve_inner(plant, &cfg.with_alpha_rho(alpha, rho), settings);
    let (theta, status, keep) = match res {
        Ok(r) => {
            let st = if r.solver.proven_optimal {
                PointStatus::Optimal
            } else {
                PointStatus::Verified
            };
            (r.theta, st, Some(r))
        }
        Err(Error::Infeasible { .. }) => (f64::INFINITY, PointStatus::Infeasible, None),
        Err(Error::Unresolved { .. }) => (f64::INFINITY, PointStatus::Unresolved, None),
        Err(e) => {
            log::warn!("alpha = {alpha}, rho = {rho}: {e}");
            (f64::INFINITY, PointStatus::Failed, None)
        }
    };
    log::debug!("alpha = {alpha:.6}, rho = {rho:.6}: theta = {theta:.6} ({})", status.as_str());
    (LandscapePoint { alpha, rho, theta, status, refined }, keep)
}

/// Golden-section minimization of `f` over `[a, b]`; returns the best
/// abscissa visited.
fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, iterations: usize) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for _ in 0..iterations {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
            if fc < best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
            if fd < best.1 {
                best = (d, fd);
            }
        }
    }
    best
}

/// Grid evaluation (parallel, in the current rayon pool) followed by
/// coordinate descent with golden-section line searches around the best
/// grid point.
pub fn outer_search(
    plant: &PolytopicPlant,
    cfg: &DesignConfig,
    grid: &SearchGrid,
    settings: &SolverSettings,
) -> Result<SearchOutcome> {
    grid.validate()?;
    cfg.validate_for(plant)?;
    let alphas = grid.alpha_range.values();
    let rhos = grid.rho_range.values();
    let pts: Vec<(f64, f64)> = alphas
        .iter()
        .flat_map(|&a| rhos.iter().map(move |&r| (a, r)))
        .collect();
    let evals: Vec<_> = pts
        .par_iter()
        .map(|&(a, r)| evaluate(plant, cfg, settings, a, r, false))
        .collect();

    let mut landscape = Vec::with_capacity(evals.len());
    let mut best: Option<SynthesisResult> = None;
    for (p, r) in evals {
        landscape.push(p);
        if let Some(r) = r {
            if best.as_ref().is_none_or(|b| r.theta < b.theta) {
                best = Some(r);
            }
        }
    }
    let mut best = best.ok_or(Error::AllInfeasible)?;

    let axes = [grid.alpha_range, grid.rho_range];
    for pass in 0..grid.refinement {
        for (ax, range) in axes.iter().enumerate() {
            let h = range.step() / 2f64.powi(pass as i32);
            if h <= 0.0 {
                continue;
            }
            let cur = if ax == 0 { best.alpha } else { best.rho };
            let c0 = range.to_coord(cur);
            let lo = (c0 - h).max(range.to_coord(range.min));
            let hi = (c0 + h).min(range.to_coord(range.max));
            let (other_a, other_r) = (best.alpha, best.rho);
            let mut found: Option<SynthesisResult> = None;
            golden_section(
                |c| {
                    let v = range.from_coord(c);
                    let (a, r) = if ax == 0 { (v, other_r) } else { (other_a, v) };
                    let (p, res) = evaluate(plant, cfg, settings, a, r, true);
                    let th = p.theta;
                    landscape.push(p);
                    if let Some(res) = res {
                        if found.as_ref().is_none_or(|f| res.theta < f.theta) {
                            found = Some(res);
                        }
                    }
                    th
                },
                lo,
                hi,
                grid.golden_iterations,
            );
            if let Some(f) = found {
                if f.theta < best.theta {
                    best = f;
                }
            }
        }
    }
    Ok(SearchOutcome { best, landscape })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_polytope, VertexMatrices};

    fn s(x: f64) -> Mat {
        Mat::from_element(1, 1, x)
    }

    fn scalar_plant() -> PolytopicPlant {
        make_polytope(vec![VertexMatrices::new(s(-1.0), s(0.0), s(0.0), s(0.0), s(1.0))]).unwrap()
    }

    fn scalar_cfg() -> DesignConfig {
        DesignConfig {
            gamma: 2.0,
            alpha: 1.0,
            rho: 0.5,
            omega: 100.0,
            h: s(1.0),
            j: s(0.0),
            zeta0: Vector::from_vec(vec![0.5]),
            sigma0: Vector::from_vec(vec![0.2]),
            eta0: Vector::from_vec(vec![0.0]),
        }
    }

    #[test]
    fn gains_from_identity_certificates() {
        let x = Mat::identity(2, 2) * 3.0;
        let (k0, k1, k2) = recover_gains(&s(1.0), &x, &Mat::from_row_slice(1, 2, &[3.0, 6.0]), &s(0.0), 1).unwrap();
        assert_eq!(k0, s(0.0));
        assert!((k1[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((k2[(0, 0)] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn y_equal_x_gives_identity_split() {
        let x = Mat::from_row_slice(4, 4, &[
            4.0, 1.0, 0.0, 0.5, 1.0, 3.0, 0.2, 0.0, 0.0, 0.2, 2.0, 0.1, 0.5, 0.0, 0.1, 5.0,
        ]);
        let (_, k1, k2) = recover_gains(&Mat::identity(2, 2), &x, &x, &Mat::zeros(4, 2), 2).unwrap();
        let k = crate::linalg::hstack(&[&k1, &k2]);
        assert!((k - Mat::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn w_twice_q() {
        let (k0, _, _) = recover_gains(&s(0.7), &Mat::identity(2, 2), &Mat::zeros(1, 2), &s(1.4), 1).unwrap();
        assert!((k0[(0, 0)] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn singular_q_is_reported() {
        let r = recover_gains(&s(0.0), &Mat::identity(2, 2), &Mat::zeros(1, 2), &s(1.0), 1);
        assert!(matches!(r, Err(Error::SingularMatrix(_))));
    }

    #[test]
    fn delta_trivial_cases() {
        let plant = make_polytope(vec![VertexMatrices::new(s(-1.0), s(0.0), s(0.0), s(0.0), s(1.0))]).unwrap();
        assert!((compute_delta(&plant, &s(1.0), 1.0).unwrap().0 - 1.0).abs() < 1e-14);
        let plant2 = make_polytope(vec![VertexMatrices::new(s(-1.0), s(0.0), s(0.0), s(0.0), s(2.0))]).unwrap();
        assert!((compute_delta(&plant2, &s(1.0), 0.5).unwrap().0 - 4.0).abs() < 1e-12);
        assert!(matches!(compute_delta(&plant, &s(0.0), 1.0), Err(Error::SingularBk2(0))));
    }

    #[test]
    fn scalar_plant_synthesis_verifies() {
        let plant = scalar_plant();
        let cfg = scalar_cfg();
        let r = solve_inner(&plant, &cfg, &SolverSettings::default()).unwrap();
        assert!(r.theta > 0.0 && r.delta > 0.0);
        assert!(r.worst_margin >= -VERIFY_TOL);
        // Schur complement of the initial-condition blocks
        let s0 = r.q.clone().try_inverse().unwrap();
        let p = r.x.clone().try_inverse().unwrap();
        let z0 = &cfg.zeta0;
        let x0 = scaled_initial_state(&cfg);
        assert!(r.theta >= (z0.transpose() * &s0 * z0)[(0, 0)] * (1.0 - 1e-6));
        assert!(r.theta >= (x0.transpose() * &p * &x0)[(0, 0)] * (1.0 - 1e-6));
        // K^T K < omega P
        let k = crate::linalg::hstack(&[&r.k1, &r.k2]);
        assert!(crate::linalg::max_eig(&(k.transpose() * &k - &p * cfg.omega)) < 1e-6);
        // residuals of the gain recovery
        assert!((&r.k0 * &r.q - &r.w).norm() <= 1e-8 * r.w.norm().max(1.0));
        let k = crate::linalg::hstack(&[&r.k1, &r.k2]);
        assert!((&k * &r.x - &r.y).norm() <= 1e-8 * r.y.norm().max(1.0));
    }

    #[test]
    fn tiny_omega_is_infeasible() {
        let plant = scalar_plant();
        let mut cfg = scalar_cfg();
        cfg.omega = 1e-9;
        let r = solve_inner(&plant, &cfg, &SolverSettings::default());
        assert!(matches!(r, Err(Error::Infeasible { .. })), "{r:?}");
    }

    #[test]
    fn single_point_grid_matches_inner() {
        let plant = scalar_plant();
        let cfg = scalar_cfg();
        let settings = SolverSettings::default();
        let one = solve_inner(&plant, &cfg, &settings).unwrap();
        let out = outer_search(&plant, &cfg, &SearchGrid::single(cfg.alpha, cfg.rho), &settings).unwrap();
        assert_eq!(out.landscape.len(), 1);
        assert_eq!(out.best.theta, one.theta);
    }

    #[test]
    fn search_best_is_argmin_of_landscape() {
        let plant = scalar_plant();
        let grid = SearchGrid {
            alpha_range: AxisRange { min: 0.5, max: 5.0, points: 3, log: true },
            rho_range: AxisRange { min: 0.1, max: 1.0, points: 3, log: true },
            refinement: 1,
            golden_iterations: 3,
        };
        let out = outer_search(&plant, &scalar_cfg(), &grid, &SolverSettings::default()).unwrap();
        assert_eq!(out.landscape.iter().filter(|p| !p.refined).count(), 9);
        for p in &out.landscape {
            assert!(out.best.theta <= p.theta);
        }
        let csv = out.landscape_csv();
        assert!(csv.starts_with("alpha,rho,theta,status"));
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, fx) = golden_section(|x| (x - 0.3) * (x - 0.3), -1.0, 2.0, 40);
        assert!((x - 0.3).abs() < 1e-6 && fx < 1e-12);
    }

    #[test]
    fn axis_values_are_log_spaced() {
        let a = AxisRange { min: 1.0, max: 100.0, points: 3, log: true };
        let v = a.values();
        assert!((v[1] - 10.0).abs() < 1e-12 && (v[2] - 100.0).abs() < 1e-9);
    }
}
