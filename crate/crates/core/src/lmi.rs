//! Affine symmetric-matrix expressions over a scalar decision-variable layout,
//! and the builders for the synthesis inequalities.
//!
//! Every inequality is stored as `M(y) = M_0 + sum_j y_j M_j` together with the
//! sign requirement ([`Sense`]). Matrix variables are flattened into scalars;
//! symmetric ones use their upper triangle, each off-diagonal scalar entering
//! both mirrored positions, so evaluation reproduces the symmetric matrix
//! exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::linalg::{identity, Mat, Vector};
use crate::model::{PolytopicPlant, VertexMatrices};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    NegativeDefinite,
    PositiveDefinite,
}

/// Handle to a matrix-valued decision variable inside a [`VariableLayout`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatVar {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub symmetric: bool,
}

impl MatVar {
    pub fn len(&self) -> usize {
        if self.symmetric {
            self.rows * (self.rows + 1) / 2
        } else {
            self.rows * self.cols
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(scalar index, row, col)` for every scalar of the variable. For
    /// symmetric variables only `row <= col` is listed.
    pub fn entries(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.len());
        let mut k = self.offset;
        if self.symmetric {
            for a in 0..self.rows {
                for b in a..self.rows {
                    out.push((k, a, b));
                    k += 1;
                }
            }
        } else {
            for a in 0..self.rows {
                for b in 0..self.cols {
                    out.push((k, a, b));
                    k += 1;
                }
            }
        }
        out
    }

    pub fn value(&self, assignment: &[f64]) -> Mat {
        let mut m = Mat::zeros(self.rows, self.cols);
        for (k, a, b) in self.entries() {
            m[(a, b)] = assignment[k];
            if self.symmetric {
                m[(b, a)] = assignment[k];
            }
        }
        m
    }

    /// Writes `m` into the assignment. Symmetric variables take the upper
    /// triangle of `m`.
    pub fn write(&self, m: &Mat, assignment: &mut [f64]) {
        for (k, a, b) in self.entries() {
            assignment[k] = m[(a, b)];
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScalarVar(pub usize);

impl ScalarVar {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
struct LayoutEntry {
    name: String,
    offset: usize,
    len: usize,
    shape: (usize, usize),
    symmetric: bool,
    positive: bool,
}

/// Ordered, contiguous map from named decision variables to scalar indices.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct VariableLayout {
    entries: Vec<LayoutEntry>,
    total: usize,
}

impl VariableLayout {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, name: &str, rows: usize, cols: usize, symmetric: bool, positive: bool) -> MatVar {
        let v = MatVar {
            offset: self.total,
            rows,
            cols,
            symmetric,
        };
        self.entries.push(LayoutEntry {
            name: name.to_string(),
            offset: self.total,
            len: v.len(),
            shape: (rows, cols),
            symmetric,
            positive,
        });
        self.total += v.len();
        v
    }

    pub fn add_symmetric(&mut self, name: &str, dim: usize) -> MatVar {
        self.push(name, dim, dim, true, false)
    }

    /// Symmetric variable that the translation keeps above a positive floor.
    pub fn add_symmetric_pd(&mut self, name: &str, dim: usize) -> MatVar {
        self.push(name, dim, dim, true, true)
    }

    pub fn add_full(&mut self, name: &str, rows: usize, cols: usize) -> MatVar {
        self.push(name, rows, cols, false, false)
    }

    pub fn add_scalar(&mut self, name: &str) -> ScalarVar {
        ScalarVar(self.push(name, 1, 1, false, false).offset)
    }

    /// Scalar that the translation keeps above a positive floor.
    pub fn add_scalar_pos(&mut self, name: &str) -> ScalarVar {
        ScalarVar(self.push(name, 1, 1, true, true).offset)
    }

    /// Variables marked positive, as symmetric handles.
    pub fn positive_vars(&self) -> Vec<(&str, MatVar)> {
        self.entries
            .iter()
            .filter(|e| e.positive)
            .map(|e| {
                (
                    e.name.as_str(),
                    MatVar {
                        offset: e.offset,
                        rows: e.shape.0,
                        cols: e.shape.1,
                        symmetric: true,
                    },
                )
            })
            .collect()
    }

    /// Number of scalar decision variables.
    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Name of the variable owning scalar index `k`.
    pub fn owner(&self, k: usize) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| k >= e.offset && k < e.offset + e.len)
            .map(|e| e.name.as_str())
    }

    /// Structural fingerprint used to detect expressions built on different
    /// layouts.
    pub fn tag(&self) -> u64 {
        // FNV-1a over names and shapes.
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |x: u64| {
            h ^= x;
            h = h.wrapping_mul(0x100000001b3);
        };
        for e in &self.entries {
            for b in e.name.bytes() {
                eat(b as u64);
            }
            eat(e.offset as u64);
            eat(e.shape.0 as u64);
            eat(e.shape.1 as u64);
            eat(e.symmetric as u64);
            eat(e.positive as u64);
        }
        eat(self.total as u64);
        h
    }

    pub fn describe(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{:<8} offset {:>4} len {:>4} shape {}x{}{}",
                e.name,
                e.offset,
                e.len,
                e.shape.0,
                e.shape.1,
                if e.symmetric { " sym" } else { "" }
            );
        }
        s
    }
}

/// Symmetric-matrix-valued affine function of the decision variables, with a
/// block partition used while assembling it.
#[derive(Clone, Debug)]
pub struct AffineMatrixExpr {
    pub name: String,
    pub sense: Sense,
    partition: Vec<usize>,
    constant: Mat,
    coeffs: BTreeMap<usize, Mat>,
    layout_tag: u64,
    layout_len: usize,
}

impl AffineMatrixExpr {
    pub fn new(name: &str, sense: Sense, partition: &[usize], layout: &VariableLayout) -> Self {
        let size = partition.iter().sum();
        Self {
            name: name.to_string(),
            sense,
            partition: partition.to_vec(),
            constant: Mat::zeros(size, size),
            coeffs: BTreeMap::new(),
            layout_tag: layout.tag(),
            layout_len: layout.len(),
        }
    }

    pub fn size(&self) -> usize {
        self.constant.nrows()
    }

    pub fn partition(&self) -> &[usize] {
        &self.partition
    }

    pub fn constant(&self) -> &Mat {
        &self.constant
    }

    pub fn coefficients(&self) -> impl Iterator<Item = (usize, &Mat)> {
        self.coeffs.iter().map(|(k, m)| (*k, m))
    }

    pub fn coefficient(&self, k: usize) -> Option<&Mat> {
        self.coeffs.get(&k)
    }

    pub fn layout_tag(&self) -> u64 {
        self.layout_tag
    }

    pub fn layout_len(&self) -> usize {
        self.layout_len
    }

    fn range(&self, i: usize) -> (usize, usize) {
        let start: usize = self.partition[..i].iter().sum();
        (start, self.partition[i])
    }

    fn coeff_mut(&mut self, k: usize) -> &mut Mat {
        let n = self.size();
        self.coeffs.entry(k).or_insert_with(|| Mat::zeros(n, n))
    }

    fn place(target: &mut Mat, r0: usize, c0: usize, block: &Mat, mirror: bool) {
        for a in 0..block.nrows() {
            for b in 0..block.ncols() {
                target[(r0 + a, c0 + b)] += block[(a, b)];
                if mirror {
                    target[(c0 + b, r0 + a)] += block[(a, b)];
                }
            }
        }
    }

    /// Adds a constant block at `(i, j)`; off-diagonal blocks are mirrored.
    pub fn add_const(&mut self, i: usize, j: usize, block: &Mat) -> &mut Self {
        let (r0, nr) = self.range(i);
        let (c0, nc) = self.range(j);
        assert_eq!((block.nrows(), block.ncols()), (nr, nc), "{}: const block ({i},{j})", self.name);
        Self::place(&mut self.constant, r0, c0, block, i != j);
        self
    }

    /// Adds `var * block` at `(i, j)`; off-diagonal blocks are mirrored.
    pub fn add_scalar(&mut self, i: usize, j: usize, var: ScalarVar, block: &Mat) -> &mut Self {
        let (r0, nr) = self.range(i);
        let (c0, nc) = self.range(j);
        assert_eq!((block.nrows(), block.ncols()), (nr, nc), "{}: scalar block ({i},{j})", self.name);
        let target = self.coeff_mut(var.index());
        Self::place(target, r0, c0, block, i != j);
        self
    }

    /// Adds `L V R` at `(i, j)`. Off-diagonal blocks are mirrored; on the
    /// diagonal `L V R` must itself be symmetric (e.g. `rho * X`).
    pub fn add_product(&mut self, i: usize, j: usize, l: &Mat, v: MatVar, r: &Mat) -> &mut Self {
        self.add_product_impl(i, j, l, v, r, false)
    }

    /// Adds `L V R + (L V R)^T` on diagonal block `i`.
    pub fn add_he(&mut self, i: usize, l: &Mat, v: MatVar, r: &Mat) -> &mut Self {
        self.add_product_impl(i, i, l, v, r, true)
    }

    fn add_product_impl(&mut self, i: usize, j: usize, l: &Mat, v: MatVar, r: &Mat, he: bool) -> &mut Self {
        let (r0, nr) = self.range(i);
        let (c0, nc) = self.range(j);
        assert_eq!(l.nrows(), nr, "{}: left factor rows at ({i},{j})", self.name);
        assert_eq!(r.ncols(), nc, "{}: right factor cols at ({i},{j})", self.name);
        assert_eq!(l.ncols(), v.rows, "{}: left factor vs variable", self.name);
        assert_eq!(r.nrows(), v.cols, "{}: right factor vs variable", self.name);
        for (k, a, b) in v.entries() {
            // L E R with E = e_a e_b^T (+ e_b e_a^T for symmetric off-diagonals)
            let mut blk = l.column(a) * r.row(b);
            if v.symmetric && a != b {
                blk += l.column(b) * r.row(a);
            }
            if blk.iter().all(|x| *x == 0.0) {
                continue;
            }
            let target = self.coeff_mut(k);
            if he {
                Self::place(target, r0, c0, &blk, false);
                Self::place(target, r0, c0, &blk.transpose(), false);
            } else {
                Self::place(target, r0, c0, &blk, i != j);
            }
        }
        self
    }

    /// Dense evaluation `M_0 + sum_j a_j M_j`.
    pub fn eval(&self, assignment: &[f64]) -> Result<Mat> {
        let mut m = self.constant.clone();
        for (&k, c) in &self.coeffs {
            let a = *assignment.get(k).ok_or(Error::MissingVariable(k))?;
            if a != 0.0 {
                m += c * a;
            }
        }
        Ok(m)
    }

    /// Largest Frobenius norm among the constant and coefficient matrices.
    pub fn scale(&self) -> f64 {
        self.coeffs
            .values()
            .map(|c| c.norm())
            .fold(self.constant.norm(), f64::max)
    }

    /// Largest relative asymmetry among the stored matrices.
    pub fn max_asymmetry(&self) -> f64 {
        self.coeffs
            .values()
            .map(crate::linalg::asymmetry)
            .fold(crate::linalg::asymmetry(&self.constant), f64::max)
    }

    /// Human-readable dump: sizes, partition and per-variable sparsity.
    pub fn dump(&self, layout: Option<&VariableLayout>) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "expr {} sense {:?} size {} partition {:?} const_nnz {} vars {}",
            self.name,
            self.sense,
            self.size(),
            self.partition,
            self.constant.iter().filter(|x| **x != 0.0).count(),
            self.coeffs.len()
        );
        for (k, c) in &self.coeffs {
            let owner = layout.and_then(|l| l.owner(*k)).unwrap_or("?");
            let _ = writeln!(s, "  var {k:>4} ({owner}) nnz {}", c.iter().filter(|x| **x != 0.0).count());
        }
        s
    }
}

/// Constant matrices of the nonlinear-subsystem realization.
#[derive(Clone, Debug)]
pub struct StructuralMatrices {
    pub n: usize,
    pub a0: Mat,
    pub e0: Mat,
    pub f0: Mat,
    pub g0: Mat,
}

impl StructuralMatrices {
    pub fn new(n: usize) -> Self {
        let mut a0 = Mat::zeros(2 * n, 2 * n);
        let mut e0 = Mat::zeros(2 * n, n);
        let mut f0 = Mat::zeros(2 * n, n);
        let mut g0 = Mat::zeros(n, 2 * n);
        for i in 0..n {
            a0[(n + i, i)] = 1.0;
            e0[(i, i)] = 0.5;
            f0[(n + i, i)] = 1.0;
            g0[(i, i)] = 1.0;
        }
        Self { n, a0, e0, f0, g0 }
    }

    /// `B_0 = [B; 0]`.
    pub fn b0(&self, b: &Mat) -> Mat {
        let mut out = Mat::zeros(2 * self.n, b.ncols());
        out.view_mut((0, 0), (self.n, b.ncols())).copy_from(b);
        out
    }

    /// `A_K = A_0 + B_0 K`.
    pub fn closed_loop(&self, b: &Mat, k: &Mat) -> Mat {
        &self.a0 + self.b0(b) * k
    }

    /// The stack `[E_0^T; F_0^T; G_0; G_0]` (4n x 2n).
    pub fn stack(&self) -> Mat {
        crate::linalg::vstack(&[&self.e0.transpose(), &self.f0.transpose(), &self.g0, &self.g0])
    }
}

/// Decision variables of the synthesis program.
#[derive(Clone, Debug)]
pub struct SynthesisLayout {
    pub layout: VariableLayout,
    pub r: usize,
    pub n: usize,
    pub m: usize,
    pub q: MatVar,
    pub x: MatVar,
    pub y: MatVar,
    pub w: MatVar,
    pub mu: ScalarVar,
    pub beta: ScalarVar,
    pub pi: ScalarVar,
    pub kappa: ScalarVar,
    pub theta: ScalarVar,
}

impl SynthesisLayout {
    pub fn new(r: usize, n: usize, m: usize) -> Self {
        let mut layout = VariableLayout::new();
        let q = layout.add_symmetric_pd("Q", r);
        let x = layout.add_symmetric_pd("X", 2 * n);
        let y = layout.add_full("Y", m, 2 * n);
        let w = layout.add_full("W", m, r);
        let mu = layout.add_scalar_pos("mu");
        let beta = layout.add_scalar_pos("beta");
        let pi = layout.add_scalar_pos("pi");
        let kappa = layout.add_scalar_pos("kappa");
        let theta = layout.add_scalar("theta");
        Self { layout, r, n, m, q, x, y, w, mu, beta, pi, kappa, theta }
    }

    pub fn for_plant(plant: &PolytopicPlant) -> Self {
        Self::new(plant.r(), plant.n(), plant.m())
    }

    pub fn len(&self) -> usize {
        self.layout.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layout.is_empty()
    }

    pub fn zd(&self, assignment: &[f64]) -> [f64; 4] {
        [
            assignment[self.mu.index()],
            assignment[self.beta.index()],
            assignment[self.pi.index()],
            assignment[self.kappa.index()],
        ]
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidScalar { name, value })
    }
}

fn vertex(plant: &PolytopicPlant, i: usize) -> Result<&VertexMatrices> {
    plant
        .vertices()
        .get(i)
        .ok_or_else(|| Error::DimensionMismatch(format!("vertex index {i} out of range")))
}

fn check_cost(plant: &PolytopicPlant, h: &Mat, j: &Mat) -> Result<usize> {
    if h.nrows() != j.nrows() || h.ncols() != plant.r() || j.ncols() != plant.m() {
        return Err(Error::DimensionMismatch(format!(
            "H is {}x{}, J is {}x{}; expected q x {} and q x {}",
            h.nrows(),
            h.ncols(),
            j.nrows(),
            j.ncols(),
            plant.r(),
            plant.m()
        )));
    }
    Ok(h.nrows())
}

/// Nonlinear-subsystem inequality at one vertex (negative definite, size 6n).
pub fn build_nonlinear_lmi(
    plant: &PolytopicPlant,
    vertex_i: usize,
    alpha: f64,
    rho: f64,
    gamma: f64,
    vars: &SynthesisLayout,
) -> Result<AffineMatrixExpr> {
    check_positive("alpha", alpha)?;
    check_positive("rho", rho)?;
    check_positive("gamma", gamma)?;
    let v = vertex(plant, vertex_i)?;
    build_nonlinear_lmi_for(v, alpha, rho, gamma, vars, &format!("nonlinear[{vertex_i}]"))
}

/// Same as [`build_nonlinear_lmi`] for an explicit matrix tuple (a vertex or a convex
/// combination).
pub fn build_nonlinear_lmi_for(
    v: &VertexMatrices,
    alpha: f64,
    rho: f64,
    gamma: f64,
    vars: &SynthesisLayout,
    name: &str,
) -> Result<AffineMatrixExpr> {
    let n = vars.n;
    let s = StructuralMatrices::new(n);
    let i2n = identity(2 * n);
    let i_n = identity(n);
    let mut e = AffineMatrixExpr::new(name, Sense::NegativeDefinite, &[2 * n, n, n, n, n], &vars.layout);
    e.add_he(0, &s.a0, vars.x, &i2n)
        .add_he(0, &s.b0(&v.b), vars.y, &i2n)
        .add_product(0, 0, &(identity(2 * n) * rho), vars.x, &i2n)
        .add_scalar(0, 0, vars.mu, &(&s.e0 * s.e0.transpose()))
        .add_scalar(0, 0, vars.beta, &(&s.f0 * s.f0.transpose()))
        .add_scalar(0, 0, vars.pi, &(s.g0.transpose() * &s.g0))
        .add_scalar(0, 0, vars.kappa, &(s.g0.transpose() * &s.g0))
        .add_product(1, 0, &v.b, vars.y, &i2n)
        .add_product(2, 0, &(&s.g0 / gamma), vars.x, &i2n)
        .add_product(3, 0, &(&v.d * &s.g0 / alpha), vars.x, &i2n)
        .add_scalar(1, 1, vars.mu, &(-&i_n))
        .add_scalar(2, 2, vars.beta, &(-&i_n))
        .add_scalar(3, 3, vars.pi, &(-&i_n))
        .add_scalar(4, 4, vars.kappa, &(-&i_n));
    Ok(e)
}

/// Linear-subsystem performance inequality at one vertex (negative definite,
/// size r + 2n + q).
pub fn build_linear_perf_lmi(
    plant: &PolytopicPlant,
    vertex_i: usize,
    alpha: f64,
    rho: f64,
    h: &Mat,
    j: &Mat,
    vars: &SynthesisLayout,
) -> Result<AffineMatrixExpr> {
    check_positive("alpha", alpha)?;
    check_positive("rho", rho)?;
    check_cost(plant, h, j)?;
    let v = vertex(plant, vertex_i)?;
    Ok(build_linear_perf_lmi_for(v, alpha, rho, h, j, vars, &format!("linear_perf[{vertex_i}]")))
}

pub fn build_linear_perf_lmi_for(
    v: &VertexMatrices,
    alpha: f64,
    rho: f64,
    h: &Mat,
    j: &Mat,
    vars: &SynthesisLayout,
    name: &str,
) -> AffineMatrixExpr {
    let (r, n, q) = (vars.r, vars.n, h.nrows());
    let s = StructuralMatrices::new(n);
    let ir = identity(r);
    let mut e = AffineMatrixExpr::new(name, Sense::NegativeDefinite, &[r, 2 * n, q], &vars.layout);
    e.add_he(0, &v.a, vars.q, &ir)
        .add_product(0, 0, &(identity(r) * rho), vars.q, &ir)
        .add_product(1, 0, &(identity(2 * n) / alpha), vars.x, &(s.g0.transpose() * v.e.transpose()))
        .add_product(1, 1, &(identity(2 * n) * -rho), vars.x, &identity(2 * n))
        .add_product(2, 0, h, vars.q, &ir)
        .add_product(2, 0, j, vars.w, &ir)
        .add_const(2, 2, &(-identity(q)));
    e
}

/// Output-coupling inequality at one vertex (positive definite, size r + n + q).
pub fn build_coupling_lmi(
    plant: &PolytopicPlant,
    vertex_i: usize,
    rho: f64,
    alpha: f64,
    h: &Mat,
    j: &Mat,
    vars: &SynthesisLayout,
) -> Result<AffineMatrixExpr> {
    check_positive("alpha", alpha)?;
    check_positive("rho", rho)?;
    check_cost(plant, h, j)?;
    let v = vertex(plant, vertex_i)?;
    Ok(build_coupling_lmi_for(v, rho, alpha, h, j, vars, &format!("coupling[{vertex_i}]")))
}

pub fn build_coupling_lmi_for(
    v: &VertexMatrices,
    rho: f64,
    alpha: f64,
    h: &Mat,
    j: &Mat,
    vars: &SynthesisLayout,
    name: &str,
) -> AffineMatrixExpr {
    let (r, n, q) = (vars.r, vars.n, h.nrows());
    let ir = identity(r);
    let mut e = AffineMatrixExpr::new(name, Sense::PositiveDefinite, &[r, n, q], &vars.layout);
    e.add_product(0, 0, &(identity(r) * rho), vars.q, &ir)
        .add_product(1, 0, &v.c, vars.q, &ir)
        .add_product(1, 0, &v.b, vars.w, &ir)
        .add_scalar(1, 1, vars.kappa, &identity(n))
        .add_product(2, 0, h, vars.q, &ir)
        .add_product(2, 0, j, vars.w, &ir)
        .add_const(2, 2, &(identity(q) * alpha));
    e
}

/// Initial-condition inequalities `[[theta, z0^T], [z0, Q]] > 0` and
/// `[[theta, x0s^T], [x0s, X]] > 0`, where `x0s = R(sigma0) x0`.
pub fn build_initial_lmis(zeta0: &Vector, x0_scaled: &Vector, vars: &SynthesisLayout) -> (AffineMatrixExpr, AffineMatrixExpr) {
    let (r, n) = (vars.r, vars.n);
    assert_eq!(zeta0.len(), r, "zeta0 length");
    assert_eq!(x0_scaled.len(), 2 * n, "x0 length");
    let one = Mat::from_element(1, 1, 1.0);
    let mut a = AffineMatrixExpr::new("initial[zeta]", Sense::PositiveDefinite, &[1, r], &vars.layout);
    a.add_scalar(0, 0, vars.theta, &one)
        .add_const(1, 0, &Mat::from_column_slice(r, 1, zeta0.as_slice()))
        .add_product(1, 1, &identity(r), vars.q, &identity(r));
    let mut b = AffineMatrixExpr::new("initial[x]", Sense::PositiveDefinite, &[1, 2 * n], &vars.layout);
    b.add_scalar(0, 0, vars.theta, &one)
        .add_const(1, 0, &Mat::from_column_slice(2 * n, 1, x0_scaled.as_slice()))
        .add_product(1, 1, &identity(2 * n), vars.x, &identity(2 * n));
    (a, b)
}

/// Gain-magnitude inequality `[[omega I, Y], [Y^T, X]] > 0`.
pub fn build_gain_lmi(omega: f64, vars: &SynthesisLayout) -> Result<AffineMatrixExpr> {
    check_positive("omega", omega)?;
    let (n, m) = (vars.n, vars.m);
    let mut e = AffineMatrixExpr::new("gain_bound", Sense::PositiveDefinite, &[m, 2 * n], &vars.layout);
    e.add_const(0, 0, &(identity(m) * omega))
        .add_product(0, 1, &identity(m), vars.y, &identity(2 * n))
        .add_product(1, 1, &identity(2 * n), vars.x, &identity(2 * n));
    Ok(e)
}

/// Evaluates an expression at an assignment.
pub fn eval_expr(expr: &AffineMatrixExpr, assignment: &[f64]) -> Result<Mat> {
    expr.eval(assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_eig, min_eig};
    use crate::model::make_polytope;

    fn scalar_vertex(a: f64, e: f64, c: f64, d: f64, b: f64) -> VertexMatrices {
        let s = |x: f64| Mat::from_element(1, 1, x);
        VertexMatrices::new(s(a), s(e), s(c), s(d), s(b))
    }

    #[test]
    fn layout_count_matches_formula() {
        for (r, n, m) in [(4, 2, 2), (1, 1, 1), (3, 2, 5)] {
            let l = SynthesisLayout::new(r, n, m);
            assert_eq!(l.len(), r * (r + 1) / 2 + n * (2 * n + 1) + 2 * n * m + m * r + 5);
        }
    }

    #[test]
    fn symmetric_variable_roundtrip() {
        let mut l = VariableLayout::new();
        let x = l.add_symmetric("X", 3);
        let m = Mat::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let mut a = vec![0.0; l.len()];
        x.write(&m, &mut a);
        assert_eq!(x.value(&a), m);
        assert_eq!(a, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn eval_single_coefficient() {
        let mut l = VariableLayout::new();
        let _ = l.add_scalar("a");
        let t = l.add_scalar("t");
        let mut e = AffineMatrixExpr::new("e", Sense::PositiveDefinite, &[2], &l);
        e.add_const(0, 0, &Mat::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]))
            .add_scalar(0, 0, t, &identity(2));
        let zero = e.eval(&[0.0, 0.0]).unwrap();
        assert_eq!(&zero, e.constant());
        let m = e.eval(&[0.0, 3.0]).unwrap();
        assert_eq!(m, e.constant() + identity(2) * 3.0);
        assert!(matches!(e.eval(&[0.0]), Err(Error::MissingVariable(1))));
    }

    #[test]
    fn nonlinear_lmi_is_homogeneous() {
        let plant = make_polytope(vec![scalar_vertex(-1.0, 0.0, 0.0, 0.0, 1.0)]).unwrap();
        let vars = SynthesisLayout::for_plant(&plant);
        let e = build_nonlinear_lmi(&plant, 0, 1.0, 1.0, 1.0, &vars).unwrap();
        assert_eq!(e.size(), 6);
        assert_eq!(e.eval(&vec![0.0; vars.len()]).unwrap(), Mat::zeros(6, 6));
    }

    #[test]
    fn nonlinear_lmi_scalar_against_hand_assembly() {
        // n = m = 1, B = 1, D = 0, X = I_2, Y = [-k, 0], Z_d = I_4, rho = gamma = alpha = 1
        let k = 2.5;
        let plant = make_polytope(vec![scalar_vertex(-1.0, 0.0, 0.0, 0.0, 1.0)]).unwrap();
        let vars = SynthesisLayout::for_plant(&plant);
        let e = build_nonlinear_lmi(&plant, 0, 1.0, 1.0, 1.0, &vars).unwrap();
        let mut a = vec![0.0; vars.len()];
        vars.x.write(&identity(2), &mut a);
        vars.y.write(&Mat::from_row_slice(1, 2, &[-k, 0.0]), &mut a);
        for s in [vars.mu, vars.beta, vars.pi, vars.kappa] {
            a[s.index()] = 1.0;
        }
        // A0 X + B0 Y + (.)^T + X + stack^T stack, hand expanded:
        // A0 = [[0,0],[1,0]], B0 Y = [[-k, 0],[0, 0]]
        // stack^T stack = E0 E0^T + F0 F0^T + 2 G0^T G0 = diag(0.25 + 2, 1)
        let tl = Mat::from_row_slice(2, 2, &[-2.0 * k + 1.0 + 2.25, 1.0, 1.0, 1.0 + 1.0]);
        #[rustfmt::skip]
        let expected = Mat::from_row_slice(6, 6, &[
            tl[(0, 0)], tl[(0, 1)], -k, 1.0, 0.0, 0.0,
            tl[(1, 0)], tl[(1, 1)], 0.0, 0.0, 0.0, 0.0,
            -k, 0.0, -1.0, 0.0, 0.0, 0.0,
            1.0, 0.0, 0.0, -1.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0, -1.0, 0.0,
            0.0, 0.0, 0.0, 0.0, 0.0, -1.0,
        ]);
        let got = e.eval(&a).unwrap();
        assert!((got - expected).norm() < 1e-14);
    }

    #[test]
    fn linear_perf_lmi_constant_is_minus_identity_corner() {
        let plant = make_polytope(vec![scalar_vertex(-1.0, 0.5, 0.0, 0.0, 1.0)]).unwrap();
        let vars = SynthesisLayout::for_plant(&plant);
        let h = Mat::zeros(2, 1);
        let j = Mat::zeros(2, 1);
        let e = build_linear_perf_lmi(&plant, 0, 2.0, 1.0, &h, &j, &vars).unwrap();
        assert_eq!(e.size(), 1 + 2 + 2);
        let mut expected = Mat::zeros(5, 5);
        expected[(3, 3)] = -1.0;
        expected[(4, 4)] = -1.0;
        assert_eq!(e.constant(), &expected);
        // H = J = 0: third block row carries nothing but -I_q for any W.
        let mut a = vec![0.3; vars.len()];
        vars.w.write(&Mat::from_element(1, 1, 7.0), &mut a);
        let m = e.eval(&a).unwrap();
        for r in 3..5 {
            for c in 0..3 {
                assert_eq!(m[(r, c)], 0.0);
            }
        }
    }

    #[test]
    fn coupling_lmi_block_structure() {
        let v = scalar_vertex(-1.0, 0.5, 3.0, 0.0, 1.0);
        let plant = make_polytope(vec![v]).unwrap();
        let vars = SynthesisLayout::for_plant(&plant);
        let h = Mat::from_element(1, 1, 1.0);
        let j = Mat::from_element(1, 1, 0.0);
        let e = build_coupling_lmi(&plant, 0, 1.0, 4.0, &h, &j, &vars).unwrap();
        let mut c = Mat::zeros(3, 3);
        c[(2, 2)] = 4.0;
        assert_eq!(e.constant(), &c);
        let mut a = vec![0.0; vars.len()];
        vars.q.write(&identity(1), &mut a);
        let m = e.eval(&a).unwrap();
        assert_eq!(m[(1, 0)], 3.0);
    }

    #[test]
    fn initial_lmi_scalar_schur_threshold() {
        let plant = make_polytope(vec![scalar_vertex(-1.0, 0.0, 0.0, 0.0, 1.0)]).unwrap();
        let vars = SynthesisLayout::for_plant(&plant);
        let (e, _) = build_initial_lmis(&Vector::from_element(1, 2.0), &Vector::zeros(2), &vars);
        let mut a = vec![0.0; vars.len()];
        vars.q.write(&identity(1), &mut a);
        for (theta, pd) in [(3.9, false), (4.1, true)] {
            a[vars.theta.index()] = theta;
            assert_eq!(min_eig(&e.eval(&a).unwrap()) > 0.0, pd, "theta {theta}");
        }
    }

    #[test]
    fn gain_lmi_scalar_schur() {
        let plant = make_polytope(vec![scalar_vertex(-1.0, 0.0, 0.0, 0.0, 1.0)]).unwrap();
        let vars = SynthesisLayout::for_plant(&plant);
        let e = build_gain_lmi(1.0, &vars).unwrap();
        let mut a = vec![0.0; vars.len()];
        vars.x.write(&identity(2), &mut a);
        for (y1, y2) in [(0.6, 0.7), (0.6, 0.8 + 1e-3), (0.1, -0.2), (-0.9, 0.5)] {
            vars.y.write(&Mat::from_row_slice(1, 2, &[y1, y2]), &mut a);
            let pd = min_eig(&e.eval(&a).unwrap()) > 0.0;
            assert_eq!(pd, 1.0 - y1 * y1 - y2 * y2 > 0.0);
        }
        assert!(matches!(build_gain_lmi(0.0, &vars), Err(Error::InvalidScalar { .. })));
    }

    #[test]
    fn invalid_scalars_rejected() {
        let plant = make_polytope(vec![scalar_vertex(-1.0, 0.0, 0.0, 0.0, 1.0)]).unwrap();
        let vars = SynthesisLayout::for_plant(&plant);
        assert!(build_nonlinear_lmi(&plant, 0, -1.0, 1.0, 1.0, &vars).is_err());
        assert!(build_nonlinear_lmi(&plant, 0, 1.0, 0.0, 1.0, &vars).is_err());
        assert!(build_nonlinear_lmi(&plant, 0, 1.0, 1.0, f64::NAN, &vars).is_err());
        let bad_h = Mat::zeros(2, 3);
        assert!(matches!(
            build_linear_perf_lmi(&plant, 0, 1.0, 1.0, &bad_h, &Mat::zeros(2, 1), &vars),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn max_eig_of_negated_identity_expression() {
        let mut l = VariableLayout::new();
        let t = l.add_scalar("t");
        let mut e = AffineMatrixExpr::new("e", Sense::NegativeDefinite, &[3], &l);
        e.add_scalar(0, 0, t, &identity(3));
        assert_eq!(max_eig(&e.eval(&[-2.0]).unwrap()), -2.0);
    }
}
