//! Uncertain regular-form plant
//!
//! ```text
//! zeta' = A zeta + E sigma
//! sigma' = C zeta + D sigma + B u + f(t)
//! ```
//!
//! with `(A, E, C, D, B)` in the convex hull of a finite vertex list.

use serde::{Deserialize, Serialize};

use crate::linalg::{flat, identity, rowmajor, spectral_abscissa, Mat, Vector};
use crate::lmi::{AffineMatrixExpr, Sense, VariableLayout};
use crate::sdp::{self, SolveStatus, SolverSettings};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexMatrices {
    #[serde(rename = "A", with = "rowmajor")]
    pub a: Mat,
    #[serde(rename = "E", with = "rowmajor")]
    pub e: Mat,
    #[serde(rename = "C", with = "rowmajor")]
    pub c: Mat,
    #[serde(rename = "D", with = "rowmajor")]
    pub d: Mat,
    #[serde(rename = "B", with = "rowmajor")]
    pub b: Mat,
}

impl VertexMatrices {
    pub fn new(a: Mat, e: Mat, c: Mat, d: Mat, b: Mat) -> Self {
        Self { a, e, c, d, b }
    }

    /// `(r, n, m)` implied by the shapes of `A`, `D` and `B`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.a.nrows(), self.d.nrows(), self.b.ncols())
    }

    fn validate(&self, r: usize, n: usize, m: usize) -> Result<()> {
        let shapes = [
            ("A", &self.a, r, r),
            ("E", &self.e, r, n),
            ("C", &self.c, n, r),
            ("D", &self.d, n, n),
            ("B", &self.b, n, m),
        ];
        for (name, mat, rows, cols) in shapes {
            if mat.nrows() != rows || mat.ncols() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {rows}x{cols}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
            if let Some(x) = mat.iter().find(|x| !x.is_finite()) {
                return Err(Error::NonFinite(*x));
            }
        }
        Ok(())
    }

    fn scaled_add(&mut self, other: &Self, w: f64) {
        self.a += &other.a * w;
        self.e += &other.e * w;
        self.c += &other.c * w;
        self.d += &other.d * w;
        self.b += &other.b * w;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolytopicPlant {
    vertices: Vec<VertexMatrices>,
    r: usize,
    n: usize,
    m: usize,
}

impl<'de> Deserialize<'de> for PolytopicPlant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            vertices: Vec<VertexMatrices>,
        }
        let raw = Raw::deserialize(d)?;
        make_polytope(raw.vertices).map_err(serde::de::Error::custom)
    }
}

impl PolytopicPlant {
    pub fn vertices(&self) -> &[VertexMatrices] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Option<&VertexMatrices> {
        self.vertices.get(i)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Convex combination `sum_i lambda_i (A, E, C, D, B)_i`.
    pub fn combine(&self, lambda: &[f64]) -> Result<VertexMatrices> {
        combine(self, lambda)
    }
}

/// Validates a vertex list and infers `(r, n, m)` from the first vertex.
pub fn make_polytope(vertices: Vec<VertexMatrices>) -> Result<PolytopicPlant> {
    let first = vertices.first().ok_or(Error::EmptyVertexList)?;
    let (r, n, m) = first.dims();
    for (i, v) in vertices.iter().enumerate() {
        v.validate(r, n, m)
            .map_err(|e| match e {
                Error::DimensionMismatch(s) => Error::DimensionMismatch(format!("vertex {i}: {s}")),
                other => other,
            })?;
    }
    if n == 0 {
        return Err(Error::DimensionMismatch("sigma dimension n must be positive".into()));
    }
    if m < n {
        return Err(Error::DimensionMismatch(format!("input dimension m = {m} is smaller than n = {n}")));
    }
    Ok(PolytopicPlant { vertices, r, n, m })
}

pub fn combine(plant: &PolytopicPlant, lambda: &[f64]) -> Result<VertexMatrices> {
    if lambda.len() != plant.len() {
        return Err(Error::NotInSimplex(format!(
            "lambda has {} components, plant has {} vertices",
            lambda.len(),
            plant.len()
        )));
    }
    if lambda.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::NotInSimplex("negative or non-finite component".into()));
    }
    let s: f64 = lambda.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::NotInSimplex(format!("components sum to {s}")));
    }
    // Exact vertex reproduction for unit vectors.
    if let Some(i) = lambda.iter().position(|x| *x == 1.0) {
        return Ok(plant.vertices[i].clone());
    }
    let (r, n, m) = (plant.r, plant.n, plant.m);
    let mut out = VertexMatrices::new(
        Mat::zeros(r, r),
        Mat::zeros(r, n),
        Mat::zeros(n, r),
        Mat::zeros(n, n),
        Mat::zeros(n, m),
    );
    for (v, &w) in plant.vertices.iter().zip(lambda) {
        if w != 0.0 {
            out.scaled_add(v, w);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexReport {
    pub hurwitz: bool,
    pub spectral_abscissa: f64,
    pub rank_b: usize,
    pub full_row_rank: bool,
    pub min_singular_b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub vertices: Vec<VertexReport>,
    /// `Some(true)` when a common quadratic Lyapunov matrix was found,
    /// `Some(false)` when the search was proved infeasible, `None` when the
    /// solver could not decide.
    pub common_lyapunov: Option<bool>,
    pub pass: bool,
}

impl AssumptionReport {
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        for (i, v) in self.vertices.iter().enumerate() {
            if !v.hurwitz {
                w.push(format!("vertex {i}: A not Hurwitz (abscissa {:.4e})", v.spectral_abscissa));
            }
            if !v.full_row_rank {
                w.push(format!("vertex {i}: rank(B) = {} below n", v.rank_b));
            }
        }
        if self.pass && self.common_lyapunov != Some(true) {
            w.push("no common quadratic Lyapunov certificate for the A vertices".into());
        }
        w
    }
}

/// Rank relative to the largest singular value (threshold 1e-9).
fn numerical_rank(b: &Mat) -> (usize, f64) {
    let sv = b.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > 1e-9 * smax && s > 0.0).count();
    // Singular values beyond min(n, m) do not exist; the n-th one is what matters.
    let mut sorted: Vec<f64> = sv.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let n = b.nrows();
    let smin = if sorted.len() >= n { sorted[n - 1] } else { 0.0 };
    (rank, smin)
}

pub fn check_assumptions(plant: &PolytopicPlant) -> AssumptionReport {
    let vertices: Vec<VertexReport> = plant
        .vertices
        .iter()
        .map(|v| {
            let sa = spectral_abscissa(&v.a);
            let (rank_b, smin) = numerical_rank(&v.b);
            VertexReport {
                hurwitz: sa < 0.0,
                spectral_abscissa: sa,
                rank_b,
                full_row_rank: rank_b == plant.n,
                min_singular_b: smin,
            }
        })
        .collect();
    let pass = vertices.iter().all(|v| v.hurwitz && v.full_row_rank);
    let common_lyapunov = if vertices.iter().all(|v| v.hurwitz) {
        match common_lyapunov(plant) {
            Ok(LyapunovSearch::Found(_)) => Some(true),
            Ok(LyapunovSearch::Infeasible) => Some(false),
            Ok(LyapunovSearch::Undecided) | Err(_) => None,
        }
    } else {
        Some(false)
    };
    AssumptionReport {
        vertices,
        common_lyapunov,
        pass,
    }
}

#[derive(Clone, Debug)]
pub enum LyapunovSearch {
    Found(Mat),
    Infeasible,
    Undecided,
}

/// Searches `S0 > 0` with `A_i^T S0 + S0 A_i < 0` at every vertex, normalized
/// as `S0 >= I`, `A_i^T S0 + S0 A_i <= -I`, minimizing `t` with `S0 <= t I`.
///
pub fn common_lyapunov(plant: &PolytopicPlant) -> Result<LyapunovSearch> {
    let r = plant.r;
    if r == 0 {
        return Ok(LyapunovSearch::Found(Mat::zeros(0, 0)));
    }
    let mut layout = VariableLayout::new();
    let s = layout.add_symmetric("S", r);
    let t = layout.add_scalar("t");
    let ir = identity(r);
    let mut exprs = Vec::new();
    for (i, v) in plant.vertices.iter().enumerate() {
        let mut e = AffineMatrixExpr::new(&format!("lyap[{i}]"), Sense::NegativeDefinite, &[r], &layout);
        e.add_he(0, &v.a.transpose(), s, &ir).add_const(0, 0, &ir);
        exprs.push(e);
    }
    let mut lo = AffineMatrixExpr::new("S>=I", Sense::PositiveDefinite, &[r], &layout);
    lo.add_product(0, 0, &ir, s, &ir).add_const(0, 0, &(-&ir));
    exprs.push(lo);
    let mut hi = AffineMatrixExpr::new("S<=tI", Sense::PositiveDefinite, &[r], &layout);
    hi.add_scalar(0, 0, t, &ir).add_product(0, 0, &(-&ir), s, &ir);
    exprs.push(hi);
    let problem = sdp::translate_plain(&exprs, t.index())?;
    let sol = sdp::solve(&problem, &SolverSettings::default())?;
    Ok(match sol.status {
        SolveStatus::Optimal => LyapunovSearch::Found(s.value(&sol.assignment)),
        SolveStatus::Infeasible => LyapunovSearch::Infeasible,
        SolveStatus::NumericalTrouble => LyapunovSearch::Undecided,
    })
}

/// Design scalars, performance output and initial condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub rho: f64,
    pub omega: f64,
    #[serde(rename = "H", with = "rowmajor")]
    pub h: Mat,
    #[serde(rename = "J", with = "rowmajor")]
    pub j: Mat,
    #[serde(with = "flat")]
    pub zeta0: Vector,
    #[serde(with = "flat")]
    pub sigma0: Vector,
    #[serde(with = "flat")]
    pub eta0: Vector,
}

impl DesignConfig {
    pub fn q(&self) -> usize {
        self.h.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma", self.gamma),
            ("alpha", self.alpha),
            ("rho", self.rho),
            ("omega", self.omega),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidScalar { name, value: v });
            }
        }
        if self.h.nrows() != self.j.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "H has {} rows, J has {}",
                self.h.nrows(),
                self.j.nrows()
            )));
        }
        Ok(())
    }

    /// Validation against a plant's dimensions.
    pub fn validate_for(&self, plant: &PolytopicPlant) -> Result<()> {
        self.validate()?;
        let checks = [
            ("H columns", self.h.ncols(), plant.r),
            ("J columns", self.j.ncols(), plant.m),
            ("zeta0", self.zeta0.len(), plant.r),
            ("sigma0", self.sigma0.len(), plant.n),
            ("eta0", self.eta0.len(), plant.n),
        ];
        for (what, got, want) in checks {
            if got != want {
                return Err(Error::DimensionMismatch(format!("{what}: {got}, expected {want}")));
            }
        }
        Ok(())
    }

    pub fn with_alpha_rho(&self, alpha: f64, rho: f64) -> Self {
        Self {
            alpha,
            rho,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: f64) -> Mat {
        Mat::from_element(1, 1, x)
    }

    fn scalar_vertex(a: f64, b: f64) -> VertexMatrices {
        VertexMatrices::new(s(a), s(0.0), s(0.0), s(0.0), s(b))
    }

    #[test]
    fn single_scalar_vertex() {
        let p = make_polytope(vec![scalar_vertex(-1.0, 1.0)]).unwrap();
        assert_eq!((p.r(), p.n(), p.m(), p.len()), (1, 1, 1, 1));
    }

    #[test]
    fn mismatched_b_rejected() {
        let mut v2 = scalar_vertex(-1.0, 1.0);
        v2.b = Mat::zeros(1, 2);
        assert!(matches!(
            make_polytope(vec![scalar_vertex(-1.0, 1.0), v2]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(make_polytope(vec![]), Err(Error::EmptyVertexList)));
    }

    #[test]
    fn combine_two_vertex_scalar() {
        let p = make_polytope(vec![scalar_vertex(-1.0, 1.0), scalar_vertex(-2.0, 3.0)]).unwrap();
        let c = p.combine(&[0.3, 0.7]).unwrap();
        assert!((c.b[(0, 0)] - 2.4).abs() < 1e-15);
        assert_eq!(p.combine(&[0.0, 1.0]).unwrap(), p.vertices()[1]);
        assert!(matches!(p.combine(&[0.5, 0.6]), Err(Error::NotInSimplex(_))));
        assert!(matches!(p.combine(&[-0.5, 1.5]), Err(Error::NotInSimplex(_))));
    }

    #[test]
    fn assumption_flags() {
        let p = make_polytope(vec![scalar_vertex(1.0, 1.0)]).unwrap();
        let rep = check_assumptions(&p);
        assert!(!rep.vertices[0].hurwitz && !rep.pass);
        let p = make_polytope(vec![scalar_vertex(-1.0, 0.0)]).unwrap();
        let rep = check_assumptions(&p);
        assert!(!rep.vertices[0].full_row_rank && !rep.pass);
        let p = make_polytope(vec![scalar_vertex(-1.0, 1.0), scalar_vertex(-3.0, 2.0)]).unwrap();
        let rep = check_assumptions(&p);
        assert!(rep.pass);
        assert_eq!(rep.common_lyapunov, Some(true));
    }

    #[test]
    fn common_lyapunov_fails_for_switching_pair() {
        // Both Hurwitz, but no common quadratic Lyapunov function exists.
        let a1 = Mat::from_row_slice(2, 2, &[-0.1, 1.0, -10.0, -0.1]);
        let a2 = Mat::from_row_slice(2, 2, &[-0.1, 10.0, -1.0, -0.1]);
        let mk = |a: Mat| VertexMatrices::new(a, Mat::zeros(2, 1), Mat::zeros(1, 2), s(0.0), s(1.0));
        let p = make_polytope(vec![mk(a1), mk(a2)]).unwrap();
        let rep = check_assumptions(&p);
        assert!(rep.pass);
        assert_ne!(rep.common_lyapunov, Some(true));
        assert!(!rep.warnings().is_empty());
    }

    #[test]
    fn design_config_validation() {
        let cfg = DesignConfig {
            gamma: 1.0,
            alpha: 1.0,
            rho: 1.0,
            omega: 1.0,
            h: Mat::zeros(2, 1),
            j: Mat::zeros(1, 1),
            zeta0: Vector::zeros(1),
            sigma0: Vector::zeros(1),
            eta0: Vector::zeros(1),
        };
        assert!(matches!(cfg.validate(), Err(Error::DimensionMismatch(_))));
        let bad = DesignConfig { gamma: 0.0, ..cfg };
        assert!(matches!(bad.validate(), Err(Error::InvalidScalar { name: "gamma", .. })));
    }
}
