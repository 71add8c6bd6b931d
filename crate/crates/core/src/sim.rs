//! Fixed-step RK4 simulation of the closed loop
//!
//! ```text
//! zeta' = A zeta + E sigma
//! sigma' = C zeta + D sigma + B u + f(t)
//! eta'   = c(sigma)^2 sigma
//! u      = K0 zeta + c(sigma) K1 sigma + K2 eta
//! ```
//!
//! with `|sigma|` floored at `sigma_reg` inside `c`. Callers can append
//! auxiliary ODE states (reference models and the like) through
//! [`Disturbance`].

use serde::{Deserialize, Serialize};

use crate::analysis::{c_sigma_reg, lyapunov_nu_with_c, Certificates};
use crate::error::{Error, Result};
use crate::linalg::{flat, hstack, rowmajor, Mat, Vector};
use crate::model::VertexMatrices;

/// Growth factor per step above which integration is aborted.
pub const MAX_STEP_GROWTH: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    #[serde(rename = "K0", with = "rowmajor")]
    pub k0: Mat,
    #[serde(rename = "K1", with = "rowmajor")]
    pub k1: Mat,
    #[serde(rename = "K2", with = "rowmajor")]
    pub k2: Mat,
}

impl Gains {
    /// `K = [K1 K2]`.
    pub fn k(&self) -> Mat {
        hstack(&[&self.k1, &self.k2])
    }

    pub fn zeros(r: usize, n: usize, m: usize) -> Self {
        Self {
            k0: Mat::zeros(m, r),
            k1: Mat::zeros(m, n),
            k2: Mat::zeros(m, n),
        }
    }
}

/// Matched disturbance `f(t)` with optional auxiliary states integrated
/// alongside the plant.
pub trait Disturbance: Sync {
    fn aug_init(&self) -> Vec<f64> {
        Vec::new()
    }

    fn aug_rhs(&self, _t: f64, _aug: &[f64], _out: &mut [f64]) {}

    fn f(&self, t: f64, aug: &[f64]) -> Vector;

    fn fdot(&self, t: f64, aug: &[f64]) -> Vector;

    /// Declared bound on `|f'(t)|`.
    fn bound(&self) -> Option<f64> {
        None
    }
}

#[derive(Clone, Debug)]
pub struct ZeroDisturbance(pub usize);

impl Disturbance for ZeroDisturbance {
    fn f(&self, _t: f64, _aug: &[f64]) -> Vector {
        Vector::zeros(self.0)
    }

    fn fdot(&self, _t: f64, _aug: &[f64]) -> Vector {
        Vector::zeros(self.0)
    }

    fn bound(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// `f_i(t) = a_i sin(w t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineDisturbance {
    pub amplitude: Vec<f64>,
    pub omega: f64,
}

impl Disturbance for SineDisturbance {
    fn f(&self, t: f64, _aug: &[f64]) -> Vector {
        Vector::from_iterator(self.amplitude.len(), self.amplitude.iter().map(|a| a * (self.omega * t).sin()))
    }

    fn fdot(&self, t: f64, _aug: &[f64]) -> Vector {
        Vector::from_iterator(
            self.amplitude.len(),
            self.amplitude.iter().map(|a| a * self.omega * (self.omega * t).cos()),
        )
    }

    fn bound(&self) -> Option<f64> {
        Some(self.omega.abs() * self.amplitude.iter().map(|a| a * a).sum::<f64>().sqrt())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "default_reg")]
    pub sigma_reg: f64,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
}

fn default_reg() -> f64 {
    1e-12
}

fn default_stride() -> usize {
    100
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            horizon: 30.0,
            sigma_reg: default_reg(),
            record_stride: default_stride(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidScalar { name: "dt", value: self.dt });
        }
        if !(self.horizon > self.dt && self.horizon.is_finite()) {
            return Err(Error::InvalidScalar { name: "horizon", value: self.horizon });
        }
        if !(self.sigma_reg > 0.0) {
            return Err(Error::InvalidScalar { name: "sigma_reg", value: self.sigma_reg });
        }
        if self.record_stride == 0 {
            return Err(Error::Config("record_stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    #[serde(with = "flat")]
    pub zeta: Vector,
    #[serde(with = "flat")]
    pub sigma: Vector,
    #[serde(with = "flat")]
    pub eta: Vector,
}

/// A concrete plant with its controller and performance output.
#[derive(Clone, Debug)]
pub struct ClosedLoop {
    pub plant: VertexMatrices,
    pub gains: Gains,
    pub alpha: f64,
    pub h: Mat,
    pub j: Mat,
    c0: Mat,
    out: Mat,
    bk2_inv: Option<Mat>,
}

impl ClosedLoop {
    pub fn new(plant: VertexMatrices, gains: Gains, alpha: f64, h: Mat, j: Mat) -> Result<Self> {
        let (r, n, m) = plant.dims();
        let g = &gains;
        if g.k0.shape() != (m, r) || g.k1.shape() != (m, n) || g.k2.shape() != (m, n) {
            return Err(Error::DimensionMismatch(format!(
                "gains {:?} {:?} {:?} for r = {r}, n = {n}, m = {m}",
                g.k0.shape(),
                g.k1.shape(),
                g.k2.shape()
            )));
        }
        if h.ncols() != r || j.ncols() != m || h.nrows() != j.nrows() {
            return Err(Error::DimensionMismatch("H or J".into()));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidScalar { name: "alpha", value: alpha });
        }
        let c0 = &plant.c + &plant.b * &gains.k0;
        let out = &h + &j * &gains.k0;
        let bk2_inv = (&plant.b * &gains.k2).try_inverse();
        Ok(Self { plant, gains, alpha, h, j, c0, out, bk2_inv })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.plant.dims()
    }

    /// `u = K0 zeta + c(sigma) K1 sigma + K2 eta`.
    pub fn control(&self, zeta: &Vector, sigma: &Vector, eta: &Vector, sigma_reg: f64) -> Vector {
        control_law(zeta, sigma, eta, &self.gains, self.alpha, sigma_reg)
    }

    /// `xi = (H + J K0) zeta`.
    pub fn output(&self, zeta: &Vector) -> Vector {
        &self.out * zeta
    }
}

pub fn control_law(zeta: &Vector, sigma: &Vector, eta: &Vector, gains: &Gains, alpha: f64, sigma_reg: f64) -> Vector {
    let c = c_sigma_reg(sigma, alpha, sigma_reg);
    &gains.k0 * zeta + &gains.k1 * sigma * c + &gains.k2 * eta
}

fn split(state: &[f64], r: usize, n: usize) -> (Vector, Vector, Vector) {
    (
        Vector::from_column_slice(&state[..r]),
        Vector::from_column_slice(&state[r..r + n]),
        Vector::from_column_slice(&state[r + n..r + 2 * n]),
    )
}

/// Time derivative of `[zeta; sigma; eta; aug]`.
pub fn rhs(cl: &ClosedLoop, t: f64, state: &[f64], dist: &dyn Disturbance, sigma_reg: f64) -> Result<Vec<f64>> {
    let (r, n, _) = cl.dims();
    if state.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(t));
    }
    let (zeta, sigma, eta) = split(state, r, n);
    let aug = &state[r + 2 * n..];
    let c = c_sigma_reg(&sigma, cl.alpha, sigma_reg);
    let u = &cl.gains.k0 * &zeta + &cl.gains.k1 * &sigma * c + &cl.gains.k2 * &eta;
    let p = &cl.plant;
    let dz = &p.a * &zeta + &p.e * &sigma;
    let ds = &p.c * &zeta + &p.d * &sigma + &p.b * u + dist.f(t, aug);
    let mut out = Vec::with_capacity(state.len());
    out.extend_from_slice(dz.as_slice());
    out.extend_from_slice(ds.as_slice());
    out.extend(sigma.iter().map(|s| c * c * s));
    let mut da = vec![0.0; aug.len()];
    dist.aug_rhs(t, aug, &mut da);
    out.extend(da);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub zeta: Vec<f64>,
    pub sigma: Vec<f64>,
    pub eta: Vec<f64>,
    pub u: Vec<f64>,
    pub xi: Vec<f64>,
    /// `z = eta + (B K2)^-1 f`; empty when `B K2` is singular.
    pub z: Vec<f64>,
    /// `zbar = z + (B K2)^-1 C0 zeta`.
    pub zbar: Vec<f64>,
    /// Lyapunov traces; NaN without certificates.
    pub v: f64,
    pub big_v: f64,
    pub nu: f64,
    pub cost: f64,
    pub aug: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub dt: f64,
    pub sigma_reg: f64,
    pub samples: Vec<Sample>,
    /// Largest `|u_ST|^2` over every integration step.
    pub max_ust_sq: f64,
    /// Largest `|f'(t)|` over every integration step.
    pub max_fdot: f64,
    /// Declared bound on `|f'|`, if any.
    pub fdot_bound: Option<f64>,
    pub t_s: Option<f64>,
}

impl TrajectoryRecord {
    pub fn final_cost(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.cost)
    }

    /// True when the measured `|f'|` stayed within the declared bound.
    pub fn disturbance_compliant(&self) -> bool {
        self.fdot_bound.is_some_and(|b| self.max_fdot <= b * (1.0 + 1e-9))
    }

    pub fn to_csv(&self) -> String {
        let first = match self.samples.first() {
            Some(s) => s,
            None => return String::new(),
        };
        let mut head = vec!["t".to_string()];
        let cols = |name: &str, k: usize, head: &mut Vec<String>| {
            for i in 1..=k {
                head.push(format!("{name}_{i}"));
            }
        };
        cols("zeta", first.zeta.len(), &mut head);
        cols("sigma", first.sigma.len(), &mut head);
        cols("eta", first.eta.len(), &mut head);
        cols("u", first.u.len(), &mut head);
        cols("xi", first.xi.len(), &mut head);
        head.extend(["v", "V", "nu", "cost_integral"].map(String::from));
        cols("z", first.z.len(), &mut head);
        cols("zbar", first.zbar.len(), &mut head);
        let mut s = head.join(",");
        s.push('\n');
        for smp in &self.samples {
            let mut row: Vec<String> = vec![format!("{:.6}", smp.t)];
            for x in smp
                .zeta
                .iter()
                .chain(&smp.sigma)
                .chain(&smp.eta)
                .chain(&smp.u)
                .chain(&smp.xi)
                .chain([&smp.v, &smp.big_v, &smp.nu, &smp.cost])
                .chain(&smp.z)
                .chain(&smp.zbar)
            {
                row.push(format!("{x:.10e}"));
            }
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

struct Observer<'a> {
    cl: &'a ClosedLoop,
    dist: &'a dyn Disturbance,
    cert: Option<&'a Certificates>,
    reg: f64,
}

impl Observer<'_> {
    fn xi_sq(&self, state: &[f64]) -> f64 {
        let r = self.cl.dims().0;
        let zeta = Vector::from_column_slice(&state[..r]);
        self.cl.output(&zeta).norm_squared()
    }

    /// `|u_ST|^2` with `u_ST = c K1 sigma + K2 z`, and `|f'|`.
    fn step_extras(&self, t: f64, state: &[f64]) -> (f64, f64) {
        let (r, n, _) = self.cl.dims();
        let (_, sigma, eta) = split(state, r, n);
        let aug = &state[r + 2 * n..];
        let f = self.dist.f(t, aug);
        let fdot = self.dist.fdot(t, aug).norm();
        let ust = match &self.cl.bk2_inv {
            Some(inv) => {
                let z = eta + inv * f;
                let c = c_sigma_reg(&sigma, self.cl.alpha, self.reg);
                (&self.cl.gains.k1 * &sigma * c + &self.cl.gains.k2 * z).norm_squared()
            }
            None => f64::NAN,
        };
        (ust, fdot)
    }

    fn sample(&self, t: f64, state: &[f64], cost: f64) -> Sample {
        let (r, n, _) = self.cl.dims();
        let (zeta, sigma, eta) = split(state, r, n);
        let aug = &state[r + 2 * n..];
        let f = self.dist.f(t, aug);
        let u = self.cl.control(&zeta, &sigma, &eta, self.reg);
        let xi = self.cl.output(&zeta);
        let (z, zbar) = match &self.cl.bk2_inv {
            Some(inv) => {
                let z = &eta + inv * &f;
                let zbar = &z + inv * (&self.cl.c0 * &zeta);
                (z, zbar)
            }
            None => (Vector::zeros(0), Vector::zeros(0)),
        };
        let (v, big_v, nu) = match (self.cert, z.len() == n) {
            (Some(c), true) => {
                let cs = c_sigma_reg(&sigma, self.cl.alpha, self.reg);
                lyapunov_nu_with_c(&zeta, &sigma, &z, &c.s, &c.p, cs)
            }
            _ => (f64::NAN, f64::NAN, f64::NAN),
        };
        Sample {
            t,
            zeta: zeta.as_slice().to_vec(),
            sigma: sigma.as_slice().to_vec(),
            eta: eta.as_slice().to_vec(),
            u: u.as_slice().to_vec(),
            xi: xi.as_slice().to_vec(),
            z: z.as_slice().to_vec(),
            zbar: zbar.as_slice().to_vec(),
            v,
            big_v,
            nu,
            cost,
            aug: aug.to_vec(),
        }
    }
}

fn axpy(y: &[f64], a: f64, x: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(y, x)| y + a * x).collect()
}

/// One classical RK4 step.
pub fn rk4_step<F>(t: f64, y: &[f64], dt: f64, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let k1 = f(t, y)?;
    let k2 = f(t + dt / 2.0, &axpy(y, dt / 2.0, &k1))?;
    let k3 = f(t + dt / 2.0, &axpy(y, dt / 2.0, &k2))?;
    let k4 = f(t + dt, &axpy(y, dt, &k3))?;
    Ok((0..y.len())
        .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Integrates from `init` over `cfg.horizon`. Lyapunov traces are recorded
/// when `cert` is given.
pub fn simulate(
    cl: &ClosedLoop,
    init: &InitialState,
    dist: &dyn Disturbance,
    cfg: &SimConfig,
    cert: Option<&Certificates>,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let (r, n, _) = cl.dims();
    if init.zeta.len() != r || init.sigma.len() != n || init.eta.len() != n {
        return Err(Error::DimensionMismatch("initial state".into()));
    }
    let mut y: Vec<f64> = init
        .zeta
        .iter()
        .chain(init.sigma.iter())
        .chain(init.eta.iter())
        .copied()
        .chain(dist.aug_init())
        .collect();
    let obs = Observer { cl, dist, cert, reg: cfg.sigma_reg };
    let steps = cfg.steps();
    let mut samples = Vec::with_capacity(steps / cfg.record_stride + 2);
    let mut cost = 0.0;
    let mut xi_prev = obs.xi_sq(&y);
    let (mut max_ust, mut max_fdot) = obs.step_extras(0.0, &y);
    samples.push(obs.sample(0.0, &y, 0.0));
    for k in 0..steps {
        let t = k as f64 * cfg.dt;
        let next = rk4_step(t, &y, cfg.dt, |tt, s| rhs(cl, tt, s, dist, cfg.sigma_reg))?;
        let t1 = (k + 1) as f64 * cfg.dt;
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(t1));
        }
        if norm(&next) > MAX_STEP_GROWTH * norm(&y).max(1.0) {
            return Err(Error::StepTooLarge { t: t1, factor: MAX_STEP_GROWTH });
        }
        y = next;
        let xi_sq = obs.xi_sq(&y);
        cost += 0.5 * cfg.dt * (xi_prev + xi_sq);
        xi_prev = xi_sq;
        let (ust, fd) = obs.step_extras(t1, &y);
        max_ust = max_ust.max(ust);
        max_fdot = max_fdot.max(fd);
        if (k + 1) % cfg.record_stride == 0 || k + 1 == steps {
            samples.push(obs.sample(t1, &y, cost));
        }
    }
    Ok(TrajectoryRecord {
        dt: cfg.dt,
        sigma_reg: cfg.sigma_reg,
        samples,
        max_ust_sq: max_ust,
        max_fdot,
        fdot_bound: dist.bound(),
        t_s: None,
    })
}

/// Earliest recorded time after which `|sigma| <= tol_sigma` and
/// `|zbar| <= tol_zbar` hold through the end of the record.
pub fn detect_sliding(record: &TrajectoryRecord, tol_sigma: f64, tol_zbar: f64) -> Option<f64> {
    let inside = |s: &Sample| norm(&s.sigma) <= tol_sigma && norm(&s.zbar) <= tol_zbar;
    let mut t_s = None;
    for s in record.samples.iter().rev() {
        if inside(s) {
            t_s = Some(s.t);
        } else {
            break;
        }
    }
    t_s
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostCheck {
    pub integral: f64,
    pub theta: f64,
    pub ratio: f64,
    pub pass: bool,
    pub max_ust_sq: f64,
    pub ust_bound: f64,
    pub ust_pass: bool,
}

/// `int xi^T xi <= theta` and `max |u_ST|^2 <= omega theta`.
pub fn check_cost_bound(record: &TrajectoryRecord, theta: f64, omega: f64) -> CostCheck {
    let integral = record.final_cost();
    let ust_bound = omega * theta;
    CostCheck {
        integral,
        theta,
        ratio: integral / theta,
        pass: integral <= theta,
        max_ust_sq: record.max_ust_sq,
        ust_bound,
        ust_pass: record.max_ust_sq <= ust_bound,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuCheck {
    /// Largest increase of `nu` beyond its slack between consecutive samples.
    pub max_excess: f64,
    pub violations: usize,
    pub pass: bool,
}

/// Level, relative to `nu(0)`, below which `nu` is dominated by the
/// integrator's chattering around `sigma = 0` and increases are not counted.
pub const NU_FLOOR_REL: f64 = 1e-6;

/// Sampled nonincrease of `nu`. Each increase is compared with
/// `10 dt L`, where `L` is the local Lipschitz estimate of `nu` from the
/// neighboring sample differences. Samples with `|sigma| <= 10 sigma_reg`
/// and steps that stay below `NU_FLOOR_REL nu(0)` are skipped.
pub fn check_nu_monotone(record: &TrajectoryRecord) -> NuCheck {
    let s = &record.samples;
    let floor = s.first().map_or(0.0, |x| NU_FLOOR_REL * x.nu);
    let mut max_excess = f64::NEG_INFINITY;
    let mut violations = 0;
    for k in 0..s.len().saturating_sub(1) {
        if norm(&s[k].sigma) <= 10.0 * record.sigma_reg || s[k].nu.is_nan() {
            continue;
        }
        if s[k].nu.max(s[k + 1].nu) <= floor {
            continue;
        }
        let lip = (k.saturating_sub(1)..(k + 2).min(s.len() - 1))
            .map(|i| ((s[i + 1].nu - s[i].nu) / (s[i + 1].t - s[i].t)).abs())
            .fold(0.0, f64::max);
        let slack = 10.0 * record.dt * lip;
        let excess = (s[k + 1].nu - s[k].nu) - slack;
        max_excess = max_excess.max(excess);
        if excess > 0.0 {
            violations += 1;
        }
    }
    NuCheck { max_excess, violations, pass: violations == 0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::identity;

    fn s(x: f64) -> Mat {
        Mat::from_element(1, 1, x)
    }

    fn scalar_loop(k0: f64, k1: f64, k2: f64, alpha: f64) -> ClosedLoop {
        let v = VertexMatrices::new(s(-1.0), s(0.0), s(0.0), s(0.0), s(1.0));
        ClosedLoop::new(v, Gains { k0: s(k0), k1: s(k1), k2: s(k2) }, alpha, s(1.0), s(0.0)).unwrap()
    }

    fn vec1(x: f64) -> Vector {
        Vector::from_vec(vec![x])
    }

    #[test]
    fn control_at_zero_sigma() {
        let g = Gains { k0: s(3.0), k1: s(5.0), k2: s(7.0) };
        let u = control_law(&vec1(2.0), &vec1(0.0), &vec1(0.0), &g, 11.0, 1e-12);
        assert_eq!(u[0], 6.0);
    }

    #[test]
    fn control_scalar_value() {
        let g = Gains { k0: s(0.0), k1: s(1.0), k2: s(0.0) };
        let u = control_law(&vec1(0.0), &vec1(4.0), &vec1(0.0), &g, 0.0, 1e-12);
        assert!((u[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn equilibrium_has_zero_derivative() {
        let cl = scalar_loop(1.0, -2.0, -3.0, 1.0);
        let d = rhs(&cl, 0.0, &[0.0, 0.0, 0.0], &ZeroDisturbance(1), 1e-12).unwrap();
        assert_eq!(d, vec![0.0; 3]);
    }

    #[test]
    fn sigma_rate_matches_definition() {
        let v = VertexMatrices::new(s(-1.0), s(0.5), s(0.3), s(-0.2), s(2.0));
        let g = Gains { k0: s(0.4), k1: s(-1.0), k2: s(-2.0) };
        let cl = ClosedLoop::new(v, g.clone(), 3.0, s(1.0), s(0.0)).unwrap();
        let dist = SineDisturbance { amplitude: vec![0.5], omega: 1.0 };
        let st = [0.2, -0.3, 0.1];
        let t = 0.7;
        let d = rhs(&cl, t, &st, &dist, 1e-12).unwrap();
        let u = control_law(&vec1(0.2), &vec1(-0.3), &vec1(0.1), &g, 3.0, 1e-12)[0];
        let y = 0.3 * 0.2 - 0.2 * -0.3;
        assert!((d[1] - (y + 2.0 * u + 0.5 * t.sin())).abs() < 1e-14);
        let c = 1.0 / 0.3f64.sqrt() + 3.0;
        assert!((d[2] - c * c * -0.3).abs() < 1e-12);
    }

    #[test]
    fn zero_initial_state_stays_zero() {
        let cl = scalar_loop(0.5, -2.0, -3.0, 1.0);
        let init = InitialState { zeta: vec1(0.0), sigma: vec1(0.0), eta: vec1(0.0) };
        let cfg = SimConfig { dt: 1e-3, horizon: 1.0, sigma_reg: 1e-12, record_stride: 10 };
        let rec = simulate(&cl, &init, &ZeroDisturbance(1), &cfg, None).unwrap();
        assert!(rec.samples.iter().all(|s| s.zeta[0] == 0.0 && s.sigma[0] == 0.0 && s.eta[0] == 0.0));
        assert_eq!(detect_sliding(&rec, 1e-3, 1e-2), Some(0.0));
        assert_eq!(check_cost_bound(&rec, 1.0, 1.0).integral, 0.0);
    }

    #[test]
    fn linear_plant_matches_matrix_exponential() {
        // K1 = K2 = 0 leaves eta out of the loop: [zeta; sigma]' = M [zeta; sigma]
        let a = Mat::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
        let e = Mat::from_row_slice(2, 1, &[1.0, 0.0]);
        let c = Mat::from_row_slice(1, 2, &[0.3, -0.1]);
        let d = s(-1.5);
        let b = s(1.0);
        let k0 = Mat::from_row_slice(1, 2, &[-0.2, 0.1]);
        let v = VertexMatrices::new(a.clone(), e.clone(), c.clone(), d.clone(), b.clone());
        let g = Gains { k0: k0.clone(), k1: s(0.0), k2: s(0.0) };
        let cl = ClosedLoop::new(v, g, 2.0, identity(2), Mat::zeros(2, 1)).unwrap();
        let init = InitialState {
            zeta: Vector::from_vec(vec![1.0, -0.5]),
            sigma: vec1(0.3),
            eta: vec1(0.0),
        };
        let cfg = SimConfig { dt: 1e-3, horizon: 1.0, sigma_reg: 1e-12, record_stride: 1000 };
        let rec = simulate(&cl, &init, &ZeroDisturbance(1), &cfg, None).unwrap();
        let mut m = Mat::zeros(3, 3);
        m.view_mut((0, 0), (2, 2)).copy_from(&a);
        m.view_mut((0, 2), (2, 1)).copy_from(&e);
        m.view_mut((2, 0), (1, 2)).copy_from(&(c + &b * k0));
        m.view_mut((2, 2), (1, 1)).copy_from(&d);
        let x1 = m.exp() * Vector::from_vec(vec![1.0, -0.5, 0.3]);
        let last = rec.samples.last().unwrap();
        assert!((last.t - 1.0).abs() < 1e-12);
        let got = Vector::from_vec(vec![last.zeta[0], last.zeta[1], last.sigma[0]]);
        assert!((got - x1).norm() < 1e-6);
    }

    #[test]
    fn sliding_detection_cases() {
        let mk = |sig: f64, t: f64| Sample {
            t,
            zeta: vec![],
            sigma: vec![sig],
            eta: vec![],
            u: vec![],
            xi: vec![],
            z: vec![],
            zbar: vec![0.0],
            v: 0.0,
            big_v: 0.0,
            nu: 0.0,
            cost: 0.0,
            aug: vec![],
        };
        let rec = |sigs: &[f64]| TrajectoryRecord {
            dt: 0.1,
            sigma_reg: 1e-12,
            samples: sigs.iter().enumerate().map(|(i, &s)| mk(s, i as f64)).collect(),
            max_ust_sq: 0.0,
            max_fdot: 0.0,
            fdot_bound: None,
            t_s: None,
        };
        assert_eq!(detect_sliding(&rec(&[1.0, 1.0, 1.0]), 1e-3, 1e-2), None);
        assert_eq!(detect_sliding(&rec(&[1.0, 0.0, 1.0, 0.0, 0.0]), 1e-3, 1e-2), Some(3.0));
    }

    #[test]
    fn nu_monotonicity_floor() {
        let mk = |nu: f64, t: f64| Sample {
            t,
            zeta: vec![],
            sigma: vec![1.0],
            eta: vec![],
            u: vec![],
            xi: vec![],
            z: vec![],
            zbar: vec![],
            v: nu,
            big_v: 0.0,
            nu,
            cost: 0.0,
            aug: vec![],
        };
        let rec = |nus: &[f64]| TrajectoryRecord {
            dt: 1e-4,
            sigma_reg: 1e-12,
            samples: nus.iter().enumerate().map(|(i, &v)| mk(v, i as f64 * 0.01)).collect(),
            max_ust_sq: 0.0,
            max_fdot: 0.0,
            fdot_bound: None,
            t_s: None,
        };
        // chatter below 1e-6 nu(0) is ignored
        assert!(check_nu_monotone(&rec(&[100.0, 1.0, 1e-2, 5e-5, 8e-5, 4e-5, 9e-5])).pass);
        let bad = check_nu_monotone(&rec(&[100.0, 99.0, 98.5, 99.5, 99.0]));
        assert!(!bad.pass);
        assert_eq!(bad.violations, 1);
    }

    #[test]
    fn constant_integrand_quadrature() {
        // zeta' = 0 with xi = zeta = 1 gives a cost of exactly the horizon
        let v = VertexMatrices::new(s(0.0), s(0.0), s(0.0), s(0.0), s(1.0));
        let cl = ClosedLoop::new(v, Gains::zeros(1, 1, 1), 1.0, s(1.0), s(0.0)).unwrap();
        let init = InitialState { zeta: vec1(1.0), sigma: vec1(0.0), eta: vec1(0.0) };
        let cfg = SimConfig { dt: 1e-2, horizon: 10.0, sigma_reg: 1e-12, record_stride: 50 };
        let rec = simulate(&cl, &init, &ZeroDisturbance(1), &cfg, None).unwrap();
        assert!((rec.final_cost() - 10.0).abs() < 1e-9);
        let chk = check_cost_bound(&rec, 20.0, 1.0);
        assert!(chk.pass && (chk.ratio - 0.5).abs() < 1e-9);
    }

    #[test]
    fn quadrature_converges_at_second_order() {
        // xi = zeta with zeta' = -zeta: exact cost (1 - e^-2T)/2
        let v = VertexMatrices::new(s(-1.0), s(0.0), s(0.0), s(0.0), s(1.0));
        let cl = ClosedLoop::new(v, Gains::zeros(1, 1, 1), 1.0, s(1.0), s(0.0)).unwrap();
        let init = InitialState { zeta: vec1(1.0), sigma: vec1(0.0), eta: vec1(0.0) };
        let exact = (1.0 - (-4.0f64).exp()) / 2.0;
        let err = |dt: f64| {
            let cfg = SimConfig { dt, horizon: 2.0, sigma_reg: 1e-12, record_stride: 1000 };
            (simulate(&cl, &init, &ZeroDisturbance(1), &cfg, None).unwrap().final_cost() - exact).abs()
        };
        let (e1, e2) = (err(0.02), err(0.01));
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn blow_up_is_reported() {
        let v = VertexMatrices::new(s(1e4), s(0.0), s(0.0), s(0.0), s(1.0));
        let cl = ClosedLoop::new(v, Gains::zeros(1, 1, 1), 1.0, s(1.0), s(0.0)).unwrap();
        let init = InitialState { zeta: vec1(1.0), sigma: vec1(0.0), eta: vec1(0.0) };
        let cfg = SimConfig { dt: 1e-2, horizon: 50.0, sigma_reg: 1e-12, record_stride: 1 };
        let r = simulate(&cl, &init, &ZeroDisturbance(1), &cfg, None);
        assert!(matches!(r, Err(Error::NonFinite(_)) | Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig { dt: 0.0, ..SimConfig::default() }.validate().is_err());
        assert!(SimConfig { horizon: 1e-5, ..SimConfig::default() }.validate().is_err());
        assert!(SimConfig { sigma_reg: 0.0, ..SimConfig::default() }.validate().is_err());
        assert!(SimConfig::default().validate().is_ok());
    }
}
