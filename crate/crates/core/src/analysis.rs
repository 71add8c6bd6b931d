//! Analysis-side matrix inequalities for fixed gains and certificates, the
//! max-type Lyapunov function and the finite-time constants derived from
//! the verification margins.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    identity, inv_spd, max_eig, min_eig, rowmajor, simplex_sample, spectral_norm, vstack, BlockMatrix, Mat, Vector,
};
use crate::lmi::StructuralMatrices;
use crate::model::{PolytopicPlant, VertexMatrices};
use crate::sim::Gains;

/// `c(sigma) = 1/sqrt(|sigma|) + alpha`. At `sigma = 0` this returns `alpha`,
/// i.e. `R(0) = diag(alpha I, I)`; only `c(sigma) sigma` is ever used there.
pub fn c_sigma(sigma: &Vector, alpha: f64) -> f64 {
    let s = sigma.norm();
    if s > 0.0 {
        1.0 / s.sqrt() + alpha
    } else {
        alpha
    }
}

/// `c(sigma)` with `|sigma|` floored at `reg`.
pub fn c_sigma_reg(sigma: &Vector, alpha: f64, reg: f64) -> f64 {
    1.0 / sigma.norm().max(reg).sqrt() + alpha
}

/// `rho_sigma = 1 / (c(sigma) sqrt(|sigma|))`, in `(0, 1)` for `sigma != 0`.
pub fn rho_sigma(sigma: &Vector, alpha: f64) -> f64 {
    1.0 / (c_sigma(sigma, alpha) * sigma.norm().sqrt())
}

/// Rank-one projector onto `sigma`.
pub fn pi_sigma(sigma: &Vector) -> Mat {
    let u = sigma / sigma.norm();
    &u * u.transpose()
}

/// `Gamma_sigma = G0^T - rho_sigma E0 Pi_sigma`.
pub fn gamma_sigma(sigma: &Vector, alpha: f64) -> Mat {
    let s = StructuralMatrices::new(sigma.len());
    s.g0.transpose() - &s.e0 * pi_sigma(sigma) * rho_sigma(sigma, alpha)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    #[serde(rename = "S", with = "rowmajor")]
    pub s: Mat,
    #[serde(rename = "P", with = "rowmajor")]
    pub p: Mat,
    pub zd: [f64; 4],
    pub alpha: f64,
    pub rho: f64,
    pub gamma: f64,
}

impl Certificates {
    pub fn from_synthesis(q: &Mat, x: &Mat, zd: [f64; 4], alpha: f64, rho: f64, gamma: f64) -> Result<Self> {
        let s = inv_spd(q).ok_or(Error::SingularMatrix("Q"))?;
        let p = inv_spd(x).ok_or(Error::SingularMatrix("X"))?;
        let c = Self { s, p, zd, alpha, rho, gamma };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.s.clone().cholesky().is_none() {
            return Err(Error::SingularMatrix("S"));
        }
        if self.p.clone().cholesky().is_none() {
            return Err(Error::SingularMatrix("P"));
        }
        for (name, v) in [("alpha", self.alpha), ("rho", self.rho), ("gamma", self.gamma)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidScalar { name, value: v });
            }
        }
        if self.zd.iter().any(|&z| !(z.is_finite() && z > 0.0)) {
            return Err(Error::SingularZd);
        }
        Ok(())
    }
}

fn dims_check(v: &VertexMatrices, s: &Mat, p: &Mat) -> Result<(usize, usize)> {
    let (r, n, _) = v.dims();
    if s.nrows() != r || s.ncols() != r || p.nrows() != 2 * n || p.ncols() != 2 * n {
        return Err(Error::DimensionMismatch(format!(
            "S is {}x{}, P is {}x{}; expected {r}x{r} and {}x{}",
            s.nrows(),
            s.ncols(),
            p.nrows(),
            p.ncols(),
            2 * n,
            2 * n
        )));
    }
    Ok((r, n))
}

/// `[[A^T S + S A + rho S, *], [alpha^-1 G0^T E^T S, -rho P]]`.
pub fn linear_decay_matrix(v: &VertexMatrices, s: &Mat, p: &Mat, alpha: f64, rho: f64) -> Result<Mat> {
    let (r, n) = dims_check(v, s, p)?;
    let g = StructuralMatrices::new(n).g0;
    let mut b = BlockMatrix::symmetric(&[r, 2 * n]);
    b.set(0, 0, &(v.a.transpose() * s + s * &v.a + s * rho))
        .set_sym(1, 0, &(g.transpose() * v.e.transpose() * s / alpha))
        .set(1, 1, &(p * -rho));
    Ok(b.build())
}

/// Largest eigenvalue of [`linear_decay_matrix`]; negative means satisfied.
pub fn verify_linear_decay(v: &VertexMatrices, s: &Mat, p: &Mat, alpha: f64, rho: f64) -> Result<f64> {
    Ok(max_eig(&linear_decay_matrix(v, s, p, alpha, rho)?))
}

/// The nonlinear-subsystem dissipation matrix (negative definite when
/// satisfied) and the output-coupling matrix `[[rho S, *], [C + B K0, kappa I]]`
/// (positive definite when satisfied).
#[allow(clippy::too_many_arguments)]
pub fn nonlinear_matrices(
    v: &VertexMatrices,
    k0: &Mat,
    k: &Mat,
    p: &Mat,
    s: &Mat,
    zd: [f64; 4],
    alpha: f64,
    rho: f64,
    gamma: f64,
) -> Result<(Mat, Mat)> {
    let (r, n) = dims_check(v, s, p)?;
    let m = v.b.ncols();
    if k.nrows() != m || k.ncols() != 2 * n || k0.nrows() != m || k0.ncols() != r {
        return Err(Error::DimensionMismatch("gain dimensions".into()));
    }
    if zd.iter().any(|&z| !(z.is_finite() && z > 0.0)) {
        return Err(Error::SingularZd);
    }
    let [mu, beta, pi, kappa] = zd;
    let sm = StructuralMatrices::new(n);
    let ak = sm.closed_loop(&v.b, k);
    let stack = sm.stack();
    let mut zdiag = Mat::zeros(4 * n, 4 * n);
    for (blk, z) in [mu, beta, pi, kappa].into_iter().enumerate() {
        for i in 0..n {
            zdiag[(blk * n + i, blk * n + i)] = z;
        }
    }
    let zinv = Mat::from_diagonal(&zdiag.diagonal().map(|z| 1.0 / z));
    let nmat = vstack(&[
        &(&v.b * k),
        &(&sm.g0 / gamma),
        &(&v.d * &sm.g0 / alpha),
        &Mat::zeros(n, 2 * n),
    ]);
    let m_diss = ak.transpose() * p
        + p * &ak
        + p * stack.transpose() * &zdiag * &stack * p
        + nmat.transpose() * zinv * &nmat
        + p * rho;

    let mut b = BlockMatrix::symmetric(&[r, n]);
    b.set(0, 0, &(s * rho))
        .set_sym(1, 0, &(&v.c + &v.b * k0))
        .set(1, 1, &(identity(n) * kappa));
    Ok((m_diss, b.build()))
}

/// `(max eig of the dissipation matrix, min eig of the coupling matrix)`.
#[allow(clippy::too_many_arguments)]
pub fn verify_nonlinear(
    v: &VertexMatrices,
    k0: &Mat,
    k: &Mat,
    p: &Mat,
    s: &Mat,
    zd: [f64; 4],
    alpha: f64,
    rho: f64,
    gamma: f64,
) -> Result<(f64, f64)> {
    let (a, b) = nonlinear_matrices(v, k0, k, p, s, zd, alpha, rho, gamma)?;
    Ok((max_eig(&a), min_eig(&b)))
}

/// Performance matrices: the linear-decay matrix bordered by `[H + J K0, 0, -I]`
/// (negative definite) and `[[rho S, *, *], [C0, kappa I, *], [H + J K0, 0, alpha I]]`
/// (positive definite).
pub fn performance_matrices(
    v: &VertexMatrices,
    cert: &Certificates,
    k0: &Mat,
    h: &Mat,
    j: &Mat,
) -> Result<(Mat, Mat)> {
    let (r, n) = dims_check(v, &cert.s, &cert.p)?;
    let q = h.nrows();
    if h.ncols() != r || j.nrows() != q || j.ncols() != k0.nrows() || k0.ncols() != r {
        return Err(Error::DimensionMismatch("H, J or K0".into()));
    }
    let out = h + j * k0;
    let l1 = linear_decay_matrix(v, &cert.s, &cert.p, cert.alpha, cert.rho)?;
    let mut a = BlockMatrix::symmetric(&[r + 2 * n, q]);
    let mut row = Mat::zeros(q, r + 2 * n);
    row.view_mut((0, 0), (q, r)).copy_from(&out);
    a.set(0, 0, &l1).set_sym(1, 0, &row).set(1, 1, &(-identity(q)));

    let mut b = BlockMatrix::symmetric(&[r, n, q]);
    b.set(0, 0, &(&cert.s * cert.rho))
        .set_sym(1, 0, &(&v.c + &v.b * k0))
        .set(1, 1, &(identity(n) * cert.zd[3]))
        .set_sym(2, 0, &out)
        .set(2, 2, &(identity(q) * cert.alpha));
    Ok((a.build(), b.build()))
}

/// `(max eig of the bordered dissipation matrix, min eig of the coupling matrix)`.
pub fn verify_performance(
    v: &VertexMatrices,
    cert: &Certificates,
    k0: &Mat,
    h: &Mat,
    j: &Mat,
) -> Result<(f64, f64)> {
    let (a, b) = performance_matrices(v, cert, k0, h, j)?;
    Ok((max_eig(&a), min_eig(&b)))
}

/// `v = zeta^T S zeta`, `V = (R x)^T P (R x)` with `x = [sigma; z]` and `c`
/// given explicitly, `nu = max(v, V)`.
pub fn lyapunov_nu_with_c(zeta: &Vector, sigma: &Vector, z: &Vector, s: &Mat, p: &Mat, c: f64) -> (f64, f64, f64) {
    let v = zeta.dot(&(s * zeta));
    let n = sigma.len();
    let mut rx = Vector::zeros(2 * n);
    for i in 0..n {
        rx[i] = c * sigma[i];
        rx[n + i] = z[i];
    }
    let big_v = rx.dot(&(p * &rx));
    (v, big_v, v.max(big_v))
}

pub fn lyapunov_nu(zeta: &Vector, sigma: &Vector, z: &Vector, s: &Mat, p: &Mat, alpha: f64) -> (f64, f64, f64) {
    lyapunov_nu_with_c(zeta, sigma, z, s, p, c_sigma(sigma, alpha))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationRow {
    /// `vertex i` or `sample j`.
    pub point: String,
    pub inequality: String,
    /// Positive when the sign condition holds.
    pub margin: f64,
    /// Margin after the diagonal congruence `D^-1/2 M D^-1/2`, `D = |diag M|`.
    pub scaled_margin: f64,
    /// `margin / max(1, |M|_2)`.
    pub relative_margin: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub rows: Vec<VerificationRow>,
    /// `delta_i` per vertex; `None` when some `B_i K2` is singular.
    pub deltas: Option<Vec<f64>>,
    pub delta_min: Option<f64>,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.pass)
    }

    pub fn worst_scaled_margin(&self) -> f64 {
        self.rows.iter().map(|r| r.scaled_margin).fold(f64::INFINITY, f64::min)
    }

    /// Worst margin of the named inequality over vertex rows only.
    pub fn vertex_margin(&self, inequality: &str) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.inequality == inequality && r.point.starts_with("vertex"))
            .map(|r| r.margin)
            .reduce(f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("point,inequality,margin,scaled_margin,relative_margin,pass\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{:.10e},{:.10e},{:.10e},{}\n",
                r.point, r.inequality, r.margin, r.scaled_margin, r.relative_margin, r.pass
            ));
        }
        if let (Some(d), Some(m)) = (&self.deltas, self.delta_min) {
            for (i, v) in d.iter().enumerate() {
                s.push_str(&format!("vertex {i},delta,{v:.10e},,,\n"));
            }
            s.push_str(&format!("all,delta_min,{m:.10e},,,\n"));
        }
        s
    }
}

fn row(point: &str, inequality: &str, m: &Mat, negative: bool) -> VerificationRow {
    let signed = if negative { -m } else { m.clone() };
    let margin = min_eig(&signed);
    // Congruence by a positive diagonal preserves the inertia of M.
    let d = signed.diagonal().map(|v| {
        let a = v.abs();
        if a > 0.0 { 1.0 / a.sqrt() } else { 1.0 }
    });
    let jacobi = Mat::from_fn(m.nrows(), m.ncols(), |i, j| signed[(i, j)] * d[i] * d[j]);
    VerificationRow {
        point: point.into(),
        inequality: inequality.into(),
        margin,
        scaled_margin: min_eig(&jacobi),
        relative_margin: margin / spectral_norm(m).max(1.0),
        pass: margin > 0.0,
    }
}

/// Inequality names used in reports.
pub const LINEAR_DECAY: &str = "linear_decay";
pub const DISSIPATION: &str = "dissipation";
pub const COUPLING: &str = "coupling";
pub const PERF_DISSIPATION: &str = "perf_dissipation";
pub const PERF_COUPLING: &str = "perf_coupling";

fn check_point(
    label: &str,
    v: &VertexMatrices,
    cert: &Certificates,
    gains: &Gains,
    h: &Mat,
    j: &Mat,
) -> Result<Vec<VerificationRow>> {
    let k = gains.k();
    let l1 = linear_decay_matrix(v, &cert.s, &cert.p, cert.alpha, cert.rho)?;
    let (m_diss, m_coup) = nonlinear_matrices(v, &gains.k0, &k, &cert.p, &cert.s, cert.zd, cert.alpha, cert.rho, cert.gamma)?;
    let (m_pdiss, m_pcoup) = performance_matrices(v, cert, &gains.k0, h, j)?;
    Ok(vec![
        row(label, LINEAR_DECAY, &l1, true),
        row(label, DISSIPATION, &m_diss, true),
        row(label, COUPLING, &m_coup, false),
        row(label, PERF_DISSIPATION, &m_pdiss, true),
        row(label, PERF_COUPLING, &m_pcoup, false),
    ])
}

/// Checks every analysis inequality at each vertex and at `samples` random
/// convex combinations drawn with `seed`.
pub fn verify_all(
    plant: &PolytopicPlant,
    cert: &Certificates,
    gains: &Gains,
    h: &Mat,
    j: &Mat,
    samples: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let mut rows = Vec::new();
    for (i, v) in plant.vertices().iter().enumerate() {
        rows.extend(check_point(&format!("vertex {i}"), v, cert, gains, h, j)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in 0..samples {
        let lambda = simplex_sample(&mut rng, plant.len());
        let v = plant.combine(&lambda)?;
        rows.extend(check_point(&format!("sample {s}"), &v, cert, gains, h, j)?);
    }
    let (deltas, delta_min) = match crate::synthesis::compute_delta(plant, &gains.k2, cert.gamma) {
        Ok((m, d)) => (Some(d), Some(m)),
        Err(_) => (None, None),
    };
    Ok(VerificationReport { rows, deltas, delta_min })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityConstants {
    pub eps_l: f64,
    pub eps_n: f64,
    pub theta_n: f64,
    /// Rate in `dV/dt <= -rate sqrt(V)`, equal to `eps_n / sqrt(theta_n)`.
    pub rate_n: f64,
    /// Residual level `(rate_n / eps_l)^2`.
    pub nu_star: f64,
}

impl StabilityConstants {
    /// Upper bound on the time to reach `{nu <= nu_star}` from `nu0`.
    pub fn reach_time(&self, nu0: f64) -> f64 {
        if nu0 <= self.nu_star {
            0.0
        } else {
            2.0 / self.rate_n * (nu0.sqrt() - self.nu_star.sqrt())
        }
    }
}

/// Rate constants from the worst vertex margins of `report`.
pub fn stability_constants(cert: &Certificates, report: &VerificationReport, plant: &PolytopicPlant, gains: &Gains, h: &Mat, j: &Mat) -> Result<StabilityConstants> {
    if !report.all_pass() {
        let bad: Vec<String> = report
            .rows
            .iter()
            .filter(|r| !r.pass)
            .map(|r| format!("{} {}", r.point, r.inequality))
            .collect();
        return Err(Error::NonstrictMargins(bad.join(", ")));
    }
    let q = h.nrows();
    let scale = max_eig(&cert.s).max(max_eig(&cert.p)).max(if q > 0 { 1.0 } else { 0.0 });
    let k = gains.k();
    let mut m_pdiss = f64::INFINITY;
    let mut m_diss = f64::INFINITY;
    for v in plant.vertices() {
        let (a, _) = performance_matrices(v, cert, &gains.k0, h, j)?;
        m_pdiss = m_pdiss.min(max_eig(&a).abs());
        let (b, _) = nonlinear_matrices(v, &gains.k0, &k, &cert.p, &cert.s, cert.zd, cert.alpha, cert.rho, cert.gamma)?;
        m_diss = m_diss.min(max_eig(&b).abs());
    }
    Ok(constants_from_margins(m_pdiss / scale, m_diss, max_eig(&cert.p)))
}

/// `eps_l`, `eps_n` and `theta_n` assembled into the residual-set constants.
pub fn constants_from_margins(eps_l: f64, eps_n: f64, theta_n: f64) -> StabilityConstants {
    let rate_n = eps_n / theta_n.sqrt();
    StabilityConstants {
        eps_l,
        eps_n,
        theta_n,
        rate_n,
        nu_star: (rate_n / eps_l).powi(2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(x: f64) -> Mat {
        Mat::from_element(1, 1, x)
    }

    fn scalar_vertex(a: f64) -> VertexMatrices {
        VertexMatrices::new(s(a), s(0.0), s(0.0), s(0.0), s(1.0))
    }

    #[test]
    fn linear_decay_scalar_hand_value() {
        let v = scalar_vertex(-1.0);
        let m = verify_linear_decay(&v, &s(1.0), &identity(2), 1.0, 1.0).unwrap();
        assert!((m + 1.0).abs() < 1e-14);
    }

    #[test]
    fn linear_decay_fails_without_hurwitz() {
        let v = scalar_vertex(0.0);
        assert!(verify_linear_decay(&v, &s(2.0), &identity(2), 1.0, 0.5).unwrap() > 0.0);
    }

    #[test]
    fn linear_decay_rejects_bad_dims() {
        let v = scalar_vertex(-1.0);
        assert!(matches!(
            verify_linear_decay(&v, &identity(2), &identity(2), 1.0, 1.0),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn coupling_with_zero_output() {
        let v = VertexMatrices::new(s(-1.0), s(0.0), s(0.0), s(0.0), s(0.0));
        let (_, lo) = verify_nonlinear(&v, &s(0.0), &Mat::zeros(1, 2), &identity(2), &s(1.0), [1.0, 1.0, 1.0, 0.3], 1.0, 0.5, 1.0).unwrap();
        assert!((lo - 0.3).abs() < 1e-14);
        let r = verify_nonlinear(&v, &s(0.0), &Mat::zeros(1, 2), &identity(2), &s(1.0), [1.0, 0.0, 1.0, 1.0], 1.0, 0.5, 1.0);
        assert!(matches!(r, Err(Error::SingularZd)));
    }

    #[test]
    fn dissipation_matrix_dense_oracle() {
        // K = 0, B = 0: A0^T P + P A0 + P stack^T Zd stack P + gamma^-2/beta G0^T G0 + ... + rho P
        let v = VertexMatrices::new(s(-1.0), s(0.3), s(0.2), s(-0.4), s(0.0));
        let p = Mat::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let (mu, beta, pi, kappa) = (0.7, 1.3, 0.9, 2.0);
        let (alpha, rho, gamma) = (2.0, 0.4, 3.0);
        let (m, _) = nonlinear_matrices(&v, &s(0.0), &Mat::zeros(1, 2), &p, &s(1.0), [mu, beta, pi, kappa], alpha, rho, gamma).unwrap();
        let a0 = Mat::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let e0 = Mat::from_row_slice(2, 1, &[0.5, 0.0]);
        let f0 = Mat::from_row_slice(2, 1, &[0.0, 1.0]);
        let g0 = Mat::from_row_slice(1, 2, &[1.0, 0.0]);
        let inner = &e0 * e0.transpose() * mu + &f0 * f0.transpose() * beta + g0.transpose() * &g0 * (pi + kappa);
        let d = -0.4;
        let expected = a0.transpose() * &p + &p * &a0 + &p * inner * &p
            + g0.transpose() * &g0 * (1.0 / (gamma * gamma * beta) + d * d / (alpha * alpha * pi))
            + &p * rho;
        assert!((m - expected).norm() < 1e-12);
    }

    #[test]
    fn performance_without_output_pads_linear_decay() {
        let v = VertexMatrices::new(s(-2.0), s(0.5), s(0.1), s(0.0), s(1.0));
        let cert = Certificates {
            s: s(1.5),
            p: Mat::from_row_slice(2, 2, &[1.0, 0.1, 0.1, 2.0]),
            zd: [1.0; 4],
            alpha: 3.0,
            rho: 0.5,
            gamma: 1.0,
        };
        let (m_pdiss, _) = performance_matrices(&v, &cert, &s(0.0), &s(0.0), &s(0.0)).unwrap();
        let l1 = linear_decay_matrix(&v, &cert.s, &cert.p, 3.0, 0.5).unwrap();
        assert!((m_pdiss.view((0, 0), (3, 3)) - &l1).norm() < 1e-15);
        assert_eq!(m_pdiss[(3, 3)], -1.0);
        let l1max = max_eig(&l1);
        let (m58max, _) = verify_performance(&v, &cert, &s(0.0), &s(0.0), &s(0.0)).unwrap();
        assert!((m58max - l1max.max(-1.0)).abs() < 1e-12);
    }

    #[test]
    fn lyapunov_examples() {
        let z2 = Vector::zeros(2);
        assert_eq!(lyapunov_nu(&Vector::zeros(1), &Vector::zeros(1), &Vector::zeros(1), &s(1.0), &identity(2), 1.0).2, 0.0);
        let (v, _, _) = lyapunov_nu(&Vector::from_vec(vec![3.0, 4.0]), &z2, &z2, &identity(2), &identity(4), 1.0);
        assert!((v - 25.0).abs() < 1e-12);
        let sig = Vector::from_vec(vec![0.6, 0.8]);
        let (_, big_v, nu) = lyapunov_nu(&Vector::zeros(1), &sig, &z2, &s(1.0), &identity(4), 11.0);
        assert!((big_v - 144.0).abs() < 1e-9 && nu == big_v);
    }

    #[test]
    fn stability_constant_examples() {
        let c = constants_from_margins(0.5, 0.5, 1.0);
        assert!((c.nu_star - 1.0).abs() < 1e-14);
        let c = constants_from_margins(2.0, 2.0, 1.0);
        assert!((c.nu_star - 1.0).abs() < 1e-14);
        assert!((c.reach_time(9.0) - 2.0).abs() < 1e-14);
        assert_eq!(c.reach_time(0.5), 0.0);
    }

    fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, n)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn projector_properties(v in vec_strategy(3)) {
            let sig = Vector::from_vec(v);
            prop_assume!(sig.norm() > 1e-6);
            let pi = pi_sigma(&sig);
            prop_assert!((&pi * &pi - &pi).norm() < 1e-12);
            prop_assert!(min_eig(&pi) > -1e-12);
            prop_assert!(max_eig(&pi) < 1.0 + 1e-12);
        }

        #[test]
        fn gamma_sigma_bound(v in vec_strategy(2), alpha in 0.0f64..50.0) {
            let sig = Vector::from_vec(v);
            prop_assume!(sig.norm() > 1e-6);
            let r = rho_sigma(&sig, alpha);
            prop_assert!(r > 0.0 && r <= 1.0);
            if alpha > 0.0 {
                prop_assert!(r < 1.0);
            }
            let g = gamma_sigma(&sig, alpha);
            let g0 = StructuralMatrices::new(2).g0;
            prop_assert!(max_eig(&(&g * g.transpose() - g0.transpose() * &g0)) < 1e-12);
            // rho_sigma^4 gamma^-2 <= gamma^-2
            prop_assert!(r.powi(4) <= 1.0);
            prop_assert!(c_sigma(&sig, alpha).powi(-2) * sig.norm().powi(-1) <= 1.0 + 1e-12);
        }

        #[test]
        fn nu_positive_and_max_structure(
            z in vec_strategy(2), sg in vec_strategy(2), zz in vec_strategy(2), alpha in 0.1f64..20.0
        ) {
            let zeta = Vector::from_vec(z);
            let sigma = Vector::from_vec(sg);
            let zv = Vector::from_vec(zz);
            prop_assume!(zeta.norm() + sigma.norm() + zv.norm() > 1e-6);
            let sm = Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
            let p = Mat::from_fn(4, 4, |i, j| if i == j { 1.0 + i as f64 } else { 0.1 });
            let (v, big_v, nu) = lyapunov_nu(&zeta, &sigma, &zv, &sm, &p, alpha);
            prop_assert!(nu > 0.0);
            prop_assert_eq!(nu, if v >= big_v { v } else { big_v });
        }
    }

    #[test]
    fn congruence_equivalence_on_random_points() {
        use crate::lmi::{build_nonlinear_lmi_for, SynthesisLayout};
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut agree = 0;
        for _ in 0..300 {
            let n = rng.random_range(1..=2usize);
            let r = 1;
            let rnd = |rng: &mut ChaCha8Rng, a, b| Mat::from_fn(a, b, |_, _| rng.random_range(-1.0..1.0));
            let v = VertexMatrices::new(
                -identity(r),
                rnd(&mut rng, r, n),
                rnd(&mut rng, n, r),
                rnd(&mut rng, n, n),
                rnd(&mut rng, n, n) + identity(n) * 2.0,
            );
            let vars = SynthesisLayout::new(r, n, n);
            let (alpha, rho, gamma) = (rng.random_range(1.0..20.0), rng.random_range(0.1..2.0), rng.random_range(1.0..5.0));
            let e = build_nonlinear_lmi_for(&v, alpha, rho, gamma, &vars, "t").unwrap();
            let l = rnd(&mut rng, 2 * n, 2 * n);
            let x = &l * l.transpose() + identity(2 * n) * 0.5;
            let k = rnd(&mut rng, n, 2 * n) * 5.0 - Mat::from_fn(n, 2 * n, |i, j| if j == i || j == n + i { 4.0 } else { 0.0 });
            let y = &k * &x;
            let zd = [rng.random_range(0.01..2.0), rng.random_range(0.01..2.0), rng.random_range(0.01..2.0), rng.random_range(0.01..2.0)];
            let mut asg = vec![0.0; vars.len()];
            vars.x.write(&x, &mut asg);
            vars.y.write(&y, &mut asg);
            vars.q.write(&identity(r), &mut asg);
            asg[vars.mu.index()] = zd[0];
            asg[vars.beta.index()] = zd[1];
            asg[vars.pi.index()] = zd[2];
            asg[vars.kappa.index()] = zd[3];
            let lmi = max_eig(&e.eval(&asg).unwrap());
            let p = x.clone().try_inverse().unwrap();
            let (m_diss, _) = nonlinear_matrices(&v, &Mat::zeros(n, r), &k, &p, &identity(r), zd, alpha, rho, gamma).unwrap();
            let ana = max_eig(&m_diss);
            if lmi.abs() < 1e-8 || ana.abs() < 1e-8 {
                continue;
            }
            assert_eq!(lmi < 0.0, ana < 0.0, "lmi {lmi} analysis {ana}");
            agree += 1;
        }
        assert!(agree > 200);
    }
}
