//! Standard-form semidefinite programs built from [`AffineMatrixExpr`]
//! constraints, a backend interface, and solver-independent verification.
//!
//! The standard form is
//!
//! ```text
//! minimize    c^T y
//! subject to  F_0^b + sum_j y_j F_j^b  >= 0    for every block b
//! ```
//!
//! Strict inequalities are tightened by a margin `eps = margin_rel * (1 + s)`,
//! where `s` is the largest Frobenius norm among the expression's matrices.

mod ipm;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::linalg::{identity, min_eig, sym_eigenvalues, Mat};
use crate::lmi::{AffineMatrixExpr, Sense, VariableLayout};
use crate::{Error, Result};

pub use ipm::IpmInfo;

/// Relative strictness margin applied by [`translate`].
pub const MARGIN_REL: f64 = 1e-7;
/// Floor for variables the layout marks as positive definite.
pub const PD_FLOOR: f64 = 1e-6;

/// Where a conic block came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockSource {
    /// Index into the expression list passed to [`translate`].
    Expr(usize),
    /// Positivity floor on a layout variable.
    Floor(String),
    /// Added by the backend itself (e.g. a phase-one bound).
    Internal,
}

#[derive(Clone, Debug)]
pub struct ConicBlock {
    pub name: String,
    pub source: BlockSource,
    /// Shift already folded into `constant`.
    pub margin: f64,
    pub constant: Mat,
    pub coeffs: Vec<(usize, Mat)>,
}

impl ConicBlock {
    pub fn size(&self) -> usize {
        self.constant.nrows()
    }

    pub fn eval(&self, y: &[f64]) -> Mat {
        let mut m = self.constant.clone();
        for (j, c) in &self.coeffs {
            if y[*j] != 0.0 {
                m += c * y[*j];
            }
        }
        m
    }
}

#[derive(Clone, Debug)]
pub struct ConicProblem {
    pub nvars: usize,
    /// Sparse objective `(index, coefficient)`.
    pub objective: Vec<(usize, f64)>,
    pub blocks: Vec<ConicBlock>,
}

impl ConicProblem {
    pub fn objective_value(&self, y: &[f64]) -> f64 {
        self.objective.iter().map(|(j, c)| c * y[*j]).sum()
    }

    pub fn block_min_eigs(&self, y: &[f64]) -> Vec<f64> {
        self.blocks.iter().map(|b| min_eig(&b.eval(y))).collect()
    }

    /// Sparse text dump in the SDPA sparse format: sizes, objective, then
    /// `matrix block row col value` triplets (upper triangle, 1-based).
    /// SDPA's form is `sum_j y_j F_j - F_0 >= 0`, so the constant is negated.
    pub fn to_sdpa(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "\"mgsta standard-form dump\"");
        let _ = writeln!(s, "{} = mDIM", self.nvars);
        let _ = writeln!(s, "{} = nBLOCK", self.blocks.len());
        let sizes: Vec<String> = self.blocks.iter().map(|b| b.size().to_string()).collect();
        let _ = writeln!(s, "{} = bLOCKsTRUCT", sizes.join(" "));
        let mut c = vec![0.0; self.nvars];
        for (j, v) in &self.objective {
            c[*j] += v;
        }
        let cs: Vec<String> = c.iter().map(|v| format!("{v:.17e}")).collect();
        let _ = writeln!(s, "{}", cs.join(" "));
        let mut emit = |mat_no: usize, blk: usize, m: &Mat, sign: f64| {
            for a in 0..m.nrows() {
                for b in a..m.ncols() {
                    let v = m[(a, b)];
                    if v != 0.0 {
                        let _ = writeln!(s, "{mat_no} {} {} {} {:.17e}", blk + 1, a + 1, b + 1, sign * v);
                    }
                }
            }
        };
        for (bi, blk) in self.blocks.iter().enumerate() {
            emit(0, bi, &blk.constant, -1.0);
        }
        for (bi, blk) in self.blocks.iter().enumerate() {
            for (j, m) in &blk.coeffs {
                emit(j + 1, bi, m, 1.0);
            }
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalTrouble,
}

#[derive(Clone, Debug)]
pub struct ConicSolution {
    pub assignment: Vec<f64>,
    pub objective_value: f64,
    pub status: SolveStatus,
    /// Minimum eigenvalue of each conic block (margins already included).
    pub block_min_eigs: Vec<f64>,
    pub info: IpmInfo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iterations: usize,
    /// A stalled solve is still reported optimal when its best iterate is
    /// within this factor of both tolerances.
    #[serde(default = "default_reduced")]
    pub reduced_accuracy_factor: f64,
    /// Relative strictness margin, see [`strict_margin`].
    #[serde(default = "default_margin")]
    pub margin_rel: f64,
    /// Floor for positive layout variables.
    #[serde(default = "default_floor")]
    pub pd_floor: f64,
}

fn default_reduced() -> f64 {
    100.0
}

fn default_margin() -> f64 {
    MARGIN_REL
}

fn default_floor() -> f64 {
    PD_FLOOR
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            max_iterations: 200,
            reduced_accuracy_factor: default_reduced(),
            margin_rel: MARGIN_REL,
            pd_floor: PD_FLOOR,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.feas_tol > 0.0 && self.gap_tol > 0.0 && self.margin_rel >= 0.0 && self.pd_floor >= 0.0) {
            return Err(Error::BackendFailure("solver tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Strictness margin used for an expression.
pub fn strict_margin(expr: &AffineMatrixExpr, margin_rel: f64) -> f64 {
    margin_rel * (1.0 + expr.scale())
}

/// Converts expressions into PSD blocks, adding floors for the layout's
/// positive variables, with `y[objective_index]` as the objective.
pub fn translate(
    exprs: &[AffineMatrixExpr],
    objective_index: usize,
    layout: &VariableLayout,
) -> Result<ConicProblem> {
    translate_with(exprs, objective_index, layout, MARGIN_REL, PD_FLOOR)
}

/// [`translate`] with explicit margin and floor.
pub fn translate_with(
    exprs: &[AffineMatrixExpr],
    objective_index: usize,
    layout: &VariableLayout,
    margin_rel: f64,
    pd_floor: f64,
) -> Result<ConicProblem> {
    let tag = layout.tag();
    for e in exprs {
        if e.layout_tag() != tag || e.layout_len() != layout.len() {
            return Err(Error::LayoutMismatch);
        }
    }
    let mut p = translate_margin(exprs, objective_index, margin_rel)?;
    for (name, var) in layout.positive_vars() {
        let n = var.rows;
        let mut coeffs = Vec::new();
        for (k, a, b) in var.entries() {
            let mut m = Mat::zeros(n, n);
            m[(a, b)] = 1.0;
            m[(b, a)] = 1.0;
            coeffs.push((k, m));
        }
        p.blocks.push(ConicBlock {
            name: format!("floor[{name}]"),
            source: BlockSource::Floor(name.to_string()),
            margin: pd_floor,
            constant: -identity(n) * pd_floor,
            coeffs,
        });
    }
    Ok(p)
}

/// [`translate`] without floors; expressions must still share one layout.
pub fn translate_plain(exprs: &[AffineMatrixExpr], objective_index: usize) -> Result<ConicProblem> {
    translate_margin(exprs, objective_index, MARGIN_REL)
}

fn translate_margin(exprs: &[AffineMatrixExpr], objective_index: usize, margin_rel: f64) -> Result<ConicProblem> {
    let first = exprs.first().ok_or_else(|| Error::BackendFailure("no constraints".into()))?;
    let (tag, nvars) = (first.layout_tag(), first.layout_len());
    if exprs.iter().any(|e| e.layout_tag() != tag || e.layout_len() != nvars) {
        return Err(Error::LayoutMismatch);
    }
    if objective_index >= nvars {
        return Err(Error::MissingVariable(objective_index));
    }
    let blocks = exprs
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let eps = strict_margin(e, margin_rel);
            let sign = match e.sense {
                Sense::PositiveDefinite => 1.0,
                Sense::NegativeDefinite => -1.0,
            };
            let n = e.size();
            ConicBlock {
                name: e.name.clone(),
                source: BlockSource::Expr(i),
                margin: eps,
                constant: e.constant() * sign - identity(n) * eps,
                coeffs: e.coefficients().map(|(k, m)| (k, m * sign)).collect(),
            }
        })
        .collect();
    Ok(ConicProblem {
        nvars,
        objective: vec![(objective_index, 1.0)],
        blocks,
    })
}

/// Solves with the backend selected by `MGSTA_SDP_BACKEND` (only `ipm`).
pub fn solve(problem: &ConicProblem, settings: &SolverSettings) -> Result<ConicSolution> {
    settings.validate()?;
    match std::env::var("MGSTA_SDP_BACKEND").as_deref() {
        Ok("ipm") | Ok("") | Err(_) => Ok(ipm::solve(problem, settings)),
        Ok(other) => Err(Error::BackendFailure(format!("unknown SDP backend '{other}'"))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExprCheck {
    pub name: String,
    pub sense: Sense,
    /// Minimum eigenvalue of `M` (positive definite) or of `-M` (negative
    /// definite); positive means strictly satisfied.
    pub margin: f64,
    /// `margin / max(1, |M|_2)`.
    pub relative_margin: f64,
    pub eigenvalues: Vec<f64>,
    pub pass: bool,
}

/// Evaluates every expression and checks its sign condition directly.
pub fn verify_solution(exprs: &[AffineMatrixExpr], assignment: &[f64]) -> Result<Vec<ExprCheck>> {
    exprs
        .iter()
        .map(|e| {
            let m = e.eval(assignment)?;
            let ev = sym_eigenvalues(&m);
            let ev: Vec<f64> = ev.iter().copied().collect();
            let lo = ev.first().copied().unwrap_or(0.0);
            let hi = ev.last().copied().unwrap_or(0.0);
            let margin = match e.sense {
                Sense::PositiveDefinite => lo,
                Sense::NegativeDefinite => -hi,
            };
            let norm = lo.abs().max(hi.abs()).max(1.0);
            Ok(ExprCheck {
                name: e.name.clone(),
                sense: e.sense,
                margin,
                relative_margin: margin / norm,
                eigenvalues: ev,
                pass: margin > 0.0,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::VariableLayout;

    fn one() -> Mat {
        Mat::from_element(1, 1, 1.0)
    }

    fn scalar_problem(lower: &[f64], upper: &[f64]) -> (VariableLayout, Vec<AffineMatrixExpr>) {
        let mut l = VariableLayout::new();
        let t = l.add_scalar("theta");
        let mut exprs = Vec::new();
        for &a in lower {
            let mut e = AffineMatrixExpr::new("lo", Sense::PositiveDefinite, &[1], &l);
            e.add_scalar(0, 0, t, &one()).add_const(0, 0, &(-one() * a));
            exprs.push(e);
        }
        for &b in upper {
            let mut e = AffineMatrixExpr::new("hi", Sense::PositiveDefinite, &[1], &l);
            e.add_scalar(0, 0, t, &(-one())).add_const(0, 0, &(one() * b));
            exprs.push(e);
        }
        (l, exprs)
    }

    #[test]
    fn scalar_lower_bound() {
        let (l, exprs) = scalar_problem(&[2.0], &[]);
        let p = translate(&exprs, 0, &l).unwrap();
        let s = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective_value - 2.0).abs() < 1e-6, "{}", s.objective_value);
        assert!(s.objective_value >= 2.0);
    }

    #[test]
    fn two_by_two_schur() {
        let mut l = VariableLayout::new();
        let t = l.add_scalar("theta");
        let mut e = AffineMatrixExpr::new("e", Sense::PositiveDefinite, &[1, 1], &l);
        e.add_scalar(0, 0, t, &one()).add_const(1, 0, &one()).add_const(1, 1, &one());
        let p = translate(&[e], 0, &l).unwrap();
        let s = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective_value - 1.0).abs() < 1e-5, "{}", s.objective_value);
    }

    #[test]
    fn infeasible_pair() {
        let (l, exprs) = scalar_problem(&[2.0], &[-1.0]);
        let p = translate(&exprs, 0, &l).unwrap();
        let s = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
    }

    #[test]
    fn layout_mismatch_detected() {
        let (l1, mut e1) = scalar_problem(&[1.0], &[]);
        let mut l2 = VariableLayout::new();
        l2.add_scalar("other");
        l2.add_scalar("theta");
        let mut e = AffineMatrixExpr::new("x", Sense::PositiveDefinite, &[1], &l2);
        e.add_const(0, 0, &one());
        e1.push(e);
        assert!(matches!(translate(&e1, 0, &l1), Err(Error::LayoutMismatch)));
    }

    #[test]
    fn sdpa_dump_header() {
        let (l, exprs) = scalar_problem(&[2.0], &[5.0]);
        let p = translate(&exprs, 0, &l).unwrap();
        let d = p.to_sdpa();
        let lines: Vec<&str> = d.lines().collect();
        assert_eq!(lines[1], "1 = mDIM");
        assert_eq!(lines[2], "2 = nBLOCK");
        assert_eq!(lines[3], "1 1 = bLOCKsTRUCT");
        assert!(lines.iter().any(|s| s.starts_with("1 1 1 1 ")));
    }
}
