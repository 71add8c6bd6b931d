//! Chain of three trailers (two actuated, one passive) with a redundant
//! actuator and mixer. Tracking-error model, reference model, passive
//! desired trajectory and scenario runs over the eight vertices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::model::{make_polytope, DesignConfig, PolytopicPlant, VertexMatrices};
use crate::sim::{self, ClosedLoop, Disturbance, Gains, InitialState, SimConfig, TrajectoryRecord};
use crate::analysis::Certificates;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrailerParams {
    pub m1: f64,
    pub m2_range: [f64; 2],
    pub m3_range: [f64; 2],
    pub k13: f64,
    pub k32: f64,
    pub b13: f64,
    pub b32: f64,
    #[serde(rename = "F1_range")]
    pub f1_range: [f64; 2],
    #[serde(rename = "F2")]
    pub f2: f64,
    #[serde(rename = "F3")]
    pub f3: f64,
    pub gamma_e1: f64,
    pub gamma_e2: f64,
}

impl Default for TrailerParams {
    fn default() -> Self {
        Self {
            m1: 1.0,
            m2_range: [2.0, 3.0],
            m3_range: [2.0, 3.0],
            k13: 30.0,
            k32: 45.0,
            b13: 15.0,
            b32: 30.0,
            f1_range: [0.0, 1.0],
            f2: 1.0,
            f3: 1.0,
            gamma_e1: 2.0,
            gamma_e2: 4.0,
        }
    }
}

impl TrailerParams {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("m1", self.m1),
            ("m2", self.m2_range[0]),
            ("m3", self.m3_range[0]),
            ("k13", self.k13),
            ("k32", self.k32),
            ("b13", self.b13),
            ("b32", self.b32),
            ("gamma_e1", self.gamma_e1),
            ("gamma_e2", self.gamma_e2),
        ];
        for (name, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} = {v} must be positive")));
            }
        }
        for (name, r) in [("m2_range", self.m2_range), ("m3_range", self.m3_range)] {
            if !(r[0] <= r[1] && r[1].is_finite()) {
                return Err(Error::InvalidParams(format!("{name} = {r:?}")));
            }
        }
        let faults = [self.f1_range[0], self.f1_range[1], self.f2, self.f3];
        if faults.iter().any(|f| !(0.0..=1.0).contains(f)) || self.f1_range[0] > self.f1_range[1] {
            return Err(Error::InvalidParams("fault indices must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// `G = diag(gamma_e1, gamma_e2)`, so that `sigma = G e_y + e_v`.
    pub fn surface_gain(&self) -> Mat {
        Mat::from_diagonal(&Vector::from_vec(vec![self.gamma_e1, self.gamma_e2]))
    }

    /// Vertex parameters `(F1, m2, m3)` in polytope order: `F1` outermost,
    /// then `m2`, then `m3`.
    pub fn vertex_parameters(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(8);
        for f1 in self.f1_range {
            for m2 in self.m2_range {
                for m3 in self.m3_range {
                    out.push((f1, m2, m3));
                }
            }
        }
        out
    }

    /// Input matrix after the mixer.
    pub fn input_matrix(&self, f1: f64, m2: f64) -> Mat {
        let (m1, f2, f3) = (self.m1, self.f2, self.f3);
        Mat::from_row_slice(2, 2, &[(f1 + f2) / m1, -f2 / m1, -f2 / m2, (f2 + f3) / m2])
    }

    /// `A21` of the physical model.
    pub fn a21(&self, m2: f64) -> Mat {
        let m1 = self.m1;
        Mat::from_row_slice(2, 4, &[
            -self.k13 / m1, 0.0, self.k13 / m1, self.b13 / m1,
            0.0, -self.k32 / m2, self.k32 / m2, self.b32 / m2,
        ])
    }

    /// `A22` of the physical model.
    pub fn a22(&self, m2: f64) -> Mat {
        Mat::from_row_slice(2, 2, &[-self.b13 / self.m1, 0.0, 0.0, -self.b32 / m2])
    }

    /// Tracking-error matrices at one parameter point.
    pub fn vertex_matrices(&self, f1: f64, m2: f64, m3: f64) -> VertexMatrices {
        let (g1, g2, m1) = (self.gamma_e1, self.gamma_e2, self.m1);
        let (k13, k32, b13, b32) = (self.k13, self.k32, self.b13, self.b32);
        let a = Mat::from_row_slice(4, 4, &[
            -g1, 0.0, 0.0, 0.0,
            0.0, -g2, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
            (k13 - g1 * b13) / m3, (k32 - g2 * b32) / m3, -(k13 + k32) / m3, -(b13 + b32) / m3,
        ]);
        let e = Mat::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, b13 / m3, b32 / m3]);
        let c = Mat::from_row_slice(2, 4, &[
            -g1 * g1 - k13 / m1 + g1 * b13 / m1, 0.0, k13 / m1, b13 / m1,
            0.0, -g2 * g2 - k32 / m2 + g2 * b32 / m2, k32 / m2, b32 / m2,
        ]);
        let d = Mat::from_row_slice(2, 2, &[g1 - b13 / m1, 0.0, 0.0, g2 - b32 / m2]);
        VertexMatrices::new(a, e, c, d, self.input_matrix(f1, m2))
    }
}

pub fn build_trailer_polytope(params: &TrailerParams) -> Result<PolytopicPlant> {
    params.validate()?;
    let vs = params
        .vertex_parameters()
        .into_iter()
        .map(|(f1, m2, m3)| params.vertex_matrices(f1, m2, m3))
        .collect();
    make_polytope(vs)
}

/// Fixed gains of the trailer benchmark.
pub fn benchmark_gains() -> Gains {
    Gains {
        k0: Mat::from_row_slice(2, 4, &[
            26.0754, -33.4036, -29.2428, -23.2136,
            35.1140, -50.1011, -13.8645, -19.8209,
        ]),
        k1: Mat::from_row_slice(2, 2, &[-49.5226, -52.2890, -5.8613, -49.4501]),
        k2: Mat::from_row_slice(2, 2, &[-109.3804, -72.3834, 14.8000, -115.8515]),
    }
}

/// Performance output `H = [I4; 0]`, `J = [0; I2]`.
pub fn cost_matrices() -> (Mat, Mat) {
    let mut h = Mat::zeros(6, 4);
    let mut j = Mat::zeros(6, 2);
    for i in 0..4 {
        h[(i, i)] = 1.0;
    }
    j[(4, 0)] = 1.0;
    j[(5, 1)] = 1.0;
    (h, j)
}

/// Design scalars of the benchmark and the error-coordinate initial state
/// from `scenario`.
pub fn default_design(params: &TrailerParams, scenario: &ScenarioConfig) -> DesignConfig {
    let (h, j) = cost_matrices();
    let init = initial_state(params, scenario);
    DesignConfig {
        gamma: 4.0,
        alpha: 11.0,
        rho: 2.1,
        omega: 50.0,
        h,
        j,
        zeta0: init.zeta,
        sigma0: init.sigma,
        eta0: init.eta,
    }
}

/// Reference model `125/(s+5)^3` per channel driven by
/// `r_d = [0.1 sin(0.5 t), 0.06 sin(t)]`.
pub mod reference {
    pub const POLE: f64 = 5.0;

    pub fn input(t: f64) -> [f64; 2] {
        [0.10 * (0.5 * t).sin(), 0.06 * t.sin()]
    }
}

/// Auxiliary states `[q_d(2), q_d'(2), q_d''(2), q_pd, q_pd']`.
pub const AUG_DIM: usize = 8;

/// Matched disturbance of the error model at one vertex.
#[derive(Clone, Debug)]
pub struct TrailerDisturbance {
    pub params: TrailerParams,
    pub m2: f64,
    pub m3: f64,
    /// Include the `A22 q_d'` term of the error derivation.
    pub include_a22: bool,
    /// Include `f_d = [cos t - 1, cos t - 1]`.
    pub external: bool,
    pub declared_bound: Option<f64>,
    a21: Mat,
    a22: Mat,
}

impl TrailerDisturbance {
    pub fn new(params: &TrailerParams, m2: f64, m3: f64) -> Result<Self> {
        let d = Self {
            params: params.clone(),
            m2,
            m3,
            include_a22: true,
            external: true,
            declared_bound: None,
            a21: params.a21(m2),
            a22: params.a22(m2),
        };
        let f0 = d.f(0.0, &[0.0; AUG_DIM]).norm();
        if f0 > 1e-14 {
            return Err(Error::NonzeroInitialDisturbance(f0));
        }
        Ok(d)
    }

    pub fn with_bound(mut self, bound: Option<f64>) -> Self {
        self.declared_bound = bound;
        self
    }

    pub fn with_a22(mut self, on: bool) -> Self {
        self.include_a22 = on;
        self
    }

    pub fn with_external(mut self, on: bool) -> Self {
        self.external = on;
        self
    }

    fn jerks(&self, t: f64, aug: &[f64]) -> [f64; 2] {
        let r = reference::input(t);
        [0, 1].map(|i| reference_jerk(aug[i], aug[2 + i], aug[4 + i], r[i]))
    }

    /// `q_pd''` from the passive-trailer ODE with this vertex's `m3`.
    fn passive_accel(&self, aug: &[f64]) -> f64 {
        passive_accel(&self.params, self.m3, aug[6], aug[7], [aug[0], aug[1]], [aug[2], aug[3]])
    }
}

/// `q''' = 125 r - 75 q' - 15 q'' - 125 q`.
pub fn reference_jerk(q: f64, dq: f64, ddq: f64, r: f64) -> f64 {
    let p = reference::POLE;
    p * p * p * (r - q) - 3.0 * p * p * dq - 3.0 * p * ddq
}

/// Passive trailer acceleration driven by the active positions/velocities.
pub fn passive_accel(params: &TrailerParams, m3: f64, qp: f64, dqp: f64, qa: [f64; 2], dqa: [f64; 2]) -> f64 {
    let (k13, k32, b13, b32) = (params.k13, params.k32, params.b13, params.b32);
    (-(k13 + k32) * qp + k13 * qa[0] + k32 * qa[1] - (b13 + b32) * dqp + b13 * dqa[0] + b32 * dqa[1]) / m3
}

impl Disturbance for TrailerDisturbance {
    fn aug_init(&self) -> Vec<f64> {
        vec![0.0; AUG_DIM]
    }

    fn aug_rhs(&self, t: f64, aug: &[f64], out: &mut [f64]) {
        let j = self.jerks(t, aug);
        out[0] = aug[2];
        out[1] = aug[3];
        out[2] = aug[4];
        out[3] = aug[5];
        out[4] = j[0];
        out[5] = j[1];
        out[6] = aug[7];
        out[7] = self.passive_accel(aug);
    }

    fn f(&self, t: f64, aug: &[f64]) -> Vector {
        let s = Vector::from_vec(vec![aug[0], aug[1], aug[6], aug[7]]);
        let mut f = &self.a21 * s - Vector::from_vec(vec![aug[4], aug[5]]);
        if self.include_a22 {
            f += &self.a22 * Vector::from_vec(vec![aug[2], aug[3]]);
        }
        if self.external {
            f.add_scalar_mut(t.cos() - 1.0);
        }
        f
    }

    fn fdot(&self, t: f64, aug: &[f64]) -> Vector {
        let j = self.jerks(t, aug);
        let s = Vector::from_vec(vec![aug[2], aug[3], aug[7], self.passive_accel(aug)]);
        let mut fd = &self.a21 * s - Vector::from_vec(vec![j[0], j[1]]);
        if self.include_a22 {
            fd += &self.a22 * Vector::from_vec(vec![aug[4], aug[5]]);
        }
        if self.external {
            fd.add_scalar_mut(-t.sin());
        }
        fd
    }

    fn bound(&self) -> Option<f64> {
        self.declared_bound
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub horizon: f64,
    pub dt: f64,
    pub record_stride: usize,
    pub sigma_reg: f64,
    pub tol_sigma: f64,
    pub tol_zbar: f64,
    pub qa0: [f64; 2],
    pub dqa0: [f64; 2],
    /// Subset of vertex indices to run; all when absent.
    #[serde(default)]
    pub vertices: Option<Vec<usize>>,
    #[serde(default = "yes")]
    pub include_a22: bool,
    #[serde(default = "yes")]
    pub external_disturbance: bool,
}

fn yes() -> bool {
    true
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            horizon: 30.0,
            dt: 1e-4,
            record_stride: 100,
            sigma_reg: 1e-12,
            tol_sigma: 1e-3,
            tol_zbar: 1e-2,
            qa0: [0.04, -0.06],
            dqa0: [-0.03, 0.04],
            vertices: None,
            include_a22: true,
            external_disturbance: true,
        }
    }
}

impl ScenarioConfig {
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            dt: self.dt,
            horizon: self.horizon,
            sigma_reg: self.sigma_reg,
            record_stride: self.record_stride,
        }
    }
}

/// `zeta0 = [e_y(0); e_p(0)]`, `sigma0 = G e_y(0) + e_v(0)`, `eta0 = 0`. The
/// reference and the passive desired trajectory start at rest.
pub fn initial_state(params: &TrailerParams, sc: &ScenarioConfig) -> InitialState {
    let ey = Vector::from_vec(sc.qa0.to_vec());
    let ev = Vector::from_vec(sc.dqa0.to_vec());
    let sigma = params.surface_gain() * &ey + ev;
    InitialState {
        zeta: Vector::from_vec(vec![ey[0], ey[1], 0.0, 0.0]),
        sigma,
        eta: Vector::zeros(2),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VertexRun {
    pub index: usize,
    pub f1: f64,
    pub m2: f64,
    pub m3: f64,
    pub record: Option<TrajectoryRecord>,
    pub error: Option<String>,
    pub t_s: Option<f64>,
    pub u0: Vec<f64>,
    pub max_u_inf: f64,
    pub max_u_2: f64,
    pub cost: f64,
    pub final_tracking_error: f64,
    pub max_fdot: f64,
    pub compliant: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchmarkOutcome {
    pub gains: Gains,
    pub alpha: f64,
    pub delta_min: Option<f64>,
    pub runs: Vec<VertexRun>,
}

impl BenchmarkOutcome {
    pub fn summary_csv(&self) -> String {
        let mut s = String::from(
            "vertex,F1,m2,m3,t_s,u0_inf,max_u_inf,max_u_2,cost_integral,final_tracking_error,max_fdot,compliant,error\n",
        );
        let fmt_opt = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x:.6}"));
        for r in &self.runs {
            let u0 = r.u0.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            s.push_str(&format!(
                "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6e},{:.6},{},{}\n",
                r.index,
                r.f1,
                r.m2,
                r.m3,
                fmt_opt(r.t_s),
                u0,
                r.max_u_inf,
                r.max_u_2,
                r.cost,
                r.final_tracking_error,
                r.max_fdot,
                r.compliant,
                r.error.as_deref().unwrap_or("")
            ));
        }
        s
    }
}

/// Physical and tracking-error columns reconstructed from a record.
pub fn physical_csv(params: &TrailerParams, record: &TrajectoryRecord) -> String {
    let (g1, g2) = (params.gamma_e1, params.gamma_e2);
    let mut s = String::from(
        "t,qa_1,qa_2,qd_1,qd_2,dqa_1,dqa_2,dqd_1,dqd_2,qp,qpd,ey_1,ey_2,ev_1,ev_2,ep_1,ep_2\n",
    );
    for smp in &record.samples {
        let (z, sg, a) = (&smp.zeta, &smp.sigma, &smp.aug);
        let ev = [sg[0] - g1 * z[0], sg[1] - g2 * z[1]];
        let vals = [
            z[0] + a[0],
            z[1] + a[1],
            a[0],
            a[1],
            ev[0] + a[2],
            ev[1] + a[3],
            a[2],
            a[3],
            z[2] + a[6],
            a[6],
            z[0],
            z[1],
            ev[0],
            ev[1],
            z[2],
            z[3],
        ];
        s.push_str(&format!("{:.6}", smp.t));
        for v in vals {
            s.push_str(&format!(",{v:.10e}"));
        }
        s.push('\n');
    }
    s
}

/// One vertex in error coordinates.
pub fn run_vertex(
    params: &TrailerParams,
    index: usize,
    gains: &Gains,
    alpha: f64,
    scenario: &ScenarioConfig,
    cert: Option<&Certificates>,
    declared_bound: Option<f64>,
) -> Result<VertexRun> {
    let vp = params.vertex_parameters();
    let &(f1, m2, m3) = vp
        .get(index)
        .ok_or_else(|| Error::InvalidParams(format!("vertex {index} out of range 0..{}", vp.len())))?;
    let (h, j) = cost_matrices();
    let cl = ClosedLoop::new(params.vertex_matrices(f1, m2, m3), gains.clone(), alpha, h, j)?;
    let dist = TrailerDisturbance::new(params, m2, m3)?
        .with_a22(scenario.include_a22)
        .with_external(scenario.external_disturbance)
        .with_bound(declared_bound);
    let init = initial_state(params, scenario);
    let u0 = cl.control(&init.zeta, &init.sigma, &init.eta, scenario.sigma_reg);
    let mut run = VertexRun {
        index,
        f1,
        m2,
        m3,
        record: None,
        error: None,
        t_s: None,
        u0: u0.as_slice().to_vec(),
        max_u_inf: f64::NAN,
        max_u_2: f64::NAN,
        cost: f64::NAN,
        final_tracking_error: f64::NAN,
        max_fdot: f64::NAN,
        compliant: false,
    };
    match sim::simulate(&cl, &init, &dist, &scenario.sim_config(), cert) {
        Ok(mut rec) => {
            rec.t_s = sim::detect_sliding(&rec, scenario.tol_sigma, scenario.tol_zbar);
            run.t_s = rec.t_s;
            run.max_u_inf = rec.samples.iter().flat_map(|s| s.u.iter()).fold(0.0, |a, b| a.max(b.abs()));
            run.max_u_2 = rec
                .samples
                .iter()
                .map(|s| s.u.iter().map(|x| x * x).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            run.cost = rec.final_cost();
            let last = rec.samples.last().expect("record has samples");
            let g = params.surface_gain();
            let ey = Vector::from_column_slice(&last.zeta[..2]);
            let ev = Vector::from_column_slice(&last.sigma) - &g * &ey;
            run.final_tracking_error = ey.norm().max(ev.norm()).max(last.zeta[2].abs()).max(last.zeta[3].abs());
            run.max_fdot = rec.max_fdot;
            run.compliant = rec.disturbance_compliant();
            run.record = Some(rec);
        }
        Err(e) => run.error = Some(e.to_string()),
    }
    Ok(run)
}

/// Runs the selected vertices in parallel. Integration failures are recorded
/// per vertex.
pub fn run_benchmark(
    params: &TrailerParams,
    gains: &Gains,
    alpha: f64,
    gamma: f64,
    scenario: &ScenarioConfig,
    cert: Option<&Certificates>,
) -> Result<BenchmarkOutcome> {
    let plant = build_trailer_polytope(params)?;
    let delta_min = crate::synthesis::compute_delta(&plant, &gains.k2, gamma).ok().map(|d| d.0);
    let idx: Vec<usize> = match &scenario.vertices {
        Some(v) => v.clone(),
        None => (0..plant.len()).collect(),
    };
    let runs = idx
        .par_iter()
        .map(|&i| run_vertex(params, i, gains, alpha, scenario, cert, delta_min))
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchmarkOutcome {
        gains: gains.clone(),
        alpha,
        delta_min,
        runs,
    })
}

/// Physical-coordinate samples `(t, zeta, sigma)` obtained by integrating the
/// trailer positions, the reference and the passive desired trajectory
/// directly and mapping to error coordinates afterwards.
pub fn simulate_physical(
    params: &TrailerParams,
    index: usize,
    gains: &Gains,
    alpha: f64,
    scenario: &ScenarioConfig,
) -> Result<Vec<(f64, Vector, Vector)>> {
    let vp = params.vertex_parameters();
    let &(f1, m2, m3) = vp
        .get(index)
        .ok_or_else(|| Error::InvalidParams(format!("vertex {index} out of range")))?;
    let b = params.input_matrix(f1, m2);
    let a21 = params.a21(m2);
    let a22 = params.a22(m2);
    let g = params.surface_gain();
    let cfg = scenario.sim_config();
    cfg.validate()?;
    // [qa(2), dqa(2), qp, dqp, qd(2), dqd(2), ddqd(2), qpd, dqpd, eta(2)]
    let errors = |y: &[f64]| {
        let ey = Vector::from_vec(vec![y[0] - y[6], y[1] - y[7]]);
        let ev = Vector::from_vec(vec![y[2] - y[8], y[3] - y[9]]);
        let zeta = Vector::from_vec(vec![ey[0], ey[1], y[4] - y[12], y[5] - y[13]]);
        let sigma = &g * &ey + ev;
        (zeta, sigma)
    };
    let f = |t: f64, y: &[f64]| -> Result<Vec<f64>> {
        let (zeta, sigma) = errors(y);
        let eta = Vector::from_vec(vec![y[14], y[15]]);
        let u = sim::control_law(&zeta, &sigma, &eta, gains, alpha, cfg.sigma_reg);
        let zt = Vector::from_vec(vec![y[0], y[1], y[4], y[5]]);
        let dqa = Vector::from_vec(vec![y[2], y[3]]);
        let mut acc = &a21 * zt + &a22 * &dqa + &b * u;
        if scenario.external_disturbance {
            acc.add_scalar_mut(t.cos() - 1.0);
        }
        let ddqp = passive_accel(params, m3, y[4], y[5], [y[0], y[1]], [y[2], y[3]]);
        let r = reference::input(t);
        let jerk = [0, 1].map(|i| reference_jerk(y[6 + i], y[8 + i], y[10 + i], r[i]));
        let ddqpd = passive_accel(params, m3, y[12], y[13], [y[6], y[7]], [y[8], y[9]]);
        let c = crate::analysis::c_sigma_reg(&sigma, alpha, cfg.sigma_reg);
        Ok(vec![
            y[2], y[3], acc[0], acc[1], y[5], ddqp,
            y[8], y[9], y[10], y[11], jerk[0], jerk[1],
            y[13], ddqpd,
            c * c * sigma[0], c * c * sigma[1],
        ])
    };
    let mut y = vec![0.0; 16];
    y[0] = scenario.qa0[0];
    y[1] = scenario.qa0[1];
    y[2] = scenario.dqa0[0];
    y[3] = scenario.dqa0[1];
    let steps = cfg.steps();
    let mut out = Vec::with_capacity(steps / cfg.record_stride + 2);
    let (z0, s0) = errors(&y);
    out.push((0.0, z0, s0));
    for k in 0..steps {
        y = sim::rk4_step(k as f64 * cfg.dt, &y, cfg.dt, f)?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite((k + 1) as f64 * cfg.dt));
        }
        if (k + 1) % cfg.record_stride == 0 || k + 1 == steps {
            let (z, s) = errors(&y);
            out.push(((k + 1) as f64 * cfg.dt, z, s));
        }
    }
    Ok(out)
}

/// Gnuplot script drawing sliding variables, controls and tracking errors
/// from the per-vertex CSV files written by the CLI.
pub fn gnuplot_script(vertices: &[usize]) -> String {
    let mut s = String::from(
        "set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 1200,900\n",
    );
    let list = vertices.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
    s.push_str(&format!("VERTICES = \"{list}\"\n"));
    s.push_str("set output 'sliding.png'\nset multiplot layout 3,1\n");
    for (title, cols) in [("sigma", "sigma_1 sigma_2"), ("zbar", "zbar_1 zbar_2"), ("u", "u_1 u_2")] {
        s.push_str(&format!("set title '{title}'\nplot for [v in VERTICES] for [c in \"{cols}\"] sprintf('vertex_%s.csv', v) using 't':c with lines notitle\n"));
    }
    s.push_str("unset multiplot\nset output 'tracking.png'\nset multiplot layout 3,2\n");
    for (title, cols) in [
        ("q_a and q_d", "qa_1 qa_2 qd_1 qd_2"),
        ("dq_a and dq_d", "dqa_1 dqa_2 dqd_1 dqd_2"),
        ("e_y", "ey_1 ey_2"),
        ("e_v", "ev_1 ev_2"),
        ("e_p", "ep_1 ep_2"),
    ] {
        s.push_str(&format!("set title '{title}'\nplot for [v in VERTICES] for [c in \"{cols}\"] sprintf('physical_%s.csv', v) using 't':c with lines notitle\n"));
    }
    s.push_str("unset multiplot\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_vertices_with_expected_structure() {
        let p = TrailerParams::default();
        let plant = build_trailer_polytope(&p).unwrap();
        assert_eq!(plant.len(), 8);
        assert_eq!((plant.r(), plant.n(), plant.m()), (4, 2, 2));
        for v in plant.vertices() {
            assert_eq!(v.e.view((0, 0), (2, 2)).into_owned(), Mat::identity(2, 2));
            assert_eq!(v.e.row(2).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0]);
        }
        // F1 = 1, m2 = 2
        let b = p.input_matrix(1.0, 2.0);
        assert_eq!(b, Mat::from_row_slice(2, 2, &[2.0, -1.0, -0.5, 1.0]));
        assert_eq!(plant.vertex(4).unwrap().b, b);
    }

    #[test]
    fn input_matrix_is_non_symmetric() {
        let p = TrailerParams::default();
        for (f1, m2, _) in p.vertex_parameters() {
            let b = p.input_matrix(f1, m2);
            assert!((&b - b.transpose()).norm() > 0.0);
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let p = TrailerParams { k13: -1.0, ..TrailerParams::default() };
        assert!(matches!(build_trailer_polytope(&p), Err(Error::InvalidParams(_))));
        let p = TrailerParams { f2: 1.5, ..TrailerParams::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn reference_chain_dc_gain() {
        // unit step: integrate the chain to steady state
        let (mut q, mut dq, mut ddq) = (0.0, 0.0, 0.0);
        let dt = 1e-3;
        for _ in 0..20000 {
            let j = reference_jerk(q, dq, ddq, 1.0);
            q += dt * dq;
            dq += dt * ddq;
            ddq += dt * j;
        }
        assert!((q - 1.0).abs() < 1e-6);
        assert_eq!(reference_jerk(0.0, 0.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn reference_sine_steady_amplitude() {
        // |125/(j w + 5)^3| at w = 0.5
        let w: f64 = 0.5;
        let mag = 125.0 / (25.0 + w * w).powf(1.5);
        let d = TrailerDisturbance::new(&TrailerParams::default(), 2.0, 2.0).unwrap();
        let mut aug = vec![0.0; AUG_DIM];
        let dt = 1e-3;
        let mut peak: f64 = 0.0;
        let steps = (60.0 / dt) as usize;
        for k in 0..steps {
            let t = k as f64 * dt;
            aug = sim::rk4_step(t, &aug, dt, |tt, a| {
                let mut o = vec![0.0; AUG_DIM];
                d.aug_rhs(tt, a, &mut o);
                Ok(o)
            })
            .unwrap();
            if t > 40.0 {
                peak = peak.max(aug[0].abs());
            }
        }
        assert!((peak - 0.10 * mag).abs() < 1e-4, "peak {peak} expected {}", 0.1 * mag);
    }

    #[test]
    fn disturbance_vanishes_at_zero_and_external_part() {
        let d = TrailerDisturbance::new(&TrailerParams::default(), 3.0, 2.0).unwrap();
        assert_eq!(d.f(0.0, &[0.0; AUG_DIM]).norm(), 0.0);
        let only_ext = d.f(std::f64::consts::PI, &[0.0; AUG_DIM]);
        assert!((only_ext[0] + 2.0).abs() < 1e-15 && (only_ext[1] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn fdot_matches_finite_difference() {
        let d = TrailerDisturbance::new(&TrailerParams::default(), 2.0, 3.0).unwrap();
        let aug = [0.01, -0.02, 0.03, 0.01, -0.05, 0.02, 0.004, -0.01];
        let t = 1.3;
        let h = 1e-6;
        let mut da = vec![0.0; AUG_DIM];
        d.aug_rhs(t, &aug, &mut da);
        let plus: Vec<f64> = aug.iter().zip(&da).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = aug.iter().zip(&da).map(|(a, b)| a - h * b).collect();
        let fd = (d.f(t + h, &plus) - d.f(t - h, &minus)) / (2.0 * h);
        assert!((fd - d.fdot(t, &aug)).norm() < 1e-7);
    }

    #[test]
    fn perfect_tracking_fixed_point() {
        // with e_y = e_v = 0 and q_p = q_pd the passive row of the physical
        // model (A11, A12 last rows) gives the desired acceleration
        let p = TrailerParams::default();
        let m3 = 2.5;
        let (qd, dqd, qpd, dqpd) = ([0.3, -0.2], [0.1, 0.05], 0.07, -0.02);
        let a11 = [p.k13 / m3, p.k32 / m3, -(p.k13 + p.k32) / m3, -(p.b13 + p.b32) / m3];
        let a12 = [p.b13 / m3, p.b32 / m3];
        let phys = a11[0] * qd[0] + a11[1] * qd[1] + a11[2] * qpd + a11[3] * dqpd + a12[0] * dqd[0] + a12[1] * dqd[1];
        let desired = passive_accel(&p, m3, qpd, dqpd, qd, dqd);
        assert!((phys - desired).abs() < 1e-13);
    }

    #[test]
    fn initial_state_matches_surface() {
        let init = initial_state(&TrailerParams::default(), &ScenarioConfig::default());
        assert!((init.sigma[0] - 0.05).abs() < 1e-15);
        assert!((init.sigma[1] + 0.20).abs() < 1e-15);
        assert_eq!(init.zeta.as_slice(), &[0.04, -0.06, 0.0, 0.0]);
    }

    #[test]
    fn error_and_physical_models_agree() {
        let p = TrailerParams::default();
        let sc = ScenarioConfig {
            horizon: 2.0,
            dt: 1e-4,
            record_stride: 500,
            ..ScenarioConfig::default()
        };
        let g = benchmark_gains();
        for idx in [0, 5] {
            let run = run_vertex(&p, idx, &g, 11.0, &sc, None, None).unwrap();
            let rec = run.record.unwrap();
            let phys = simulate_physical(&p, idx, &g, 11.0, &sc).unwrap();
            assert_eq!(rec.samples.len(), phys.len());
            for (s, (t, z, sg)) in rec.samples.iter().zip(&phys) {
                assert!((s.t - t).abs() < 1e-12);
                let dz = (Vector::from_column_slice(&s.zeta) - z).norm();
                let ds = (Vector::from_column_slice(&s.sigma) - sg).norm();
                assert!(dz < 1e-7 && ds < 1e-5, "vertex {idx} t {t}: {dz} {ds}");
            }
        }
    }

    #[test]
    fn zero_gains_do_not_crash() {
        let p = TrailerParams::default();
        let sc = ScenarioConfig {
            horizon: 1.0,
            dt: 1e-3,
            vertices: Some(vec![0, 7]),
            ..ScenarioConfig::default()
        };
        let out = run_benchmark(&p, &Gains::zeros(4, 2, 2), 11.0, 4.0, &sc, None).unwrap();
        assert_eq!(out.runs.len(), 2);
        assert!(out.delta_min.is_none());
        assert!(out.runs.iter().all(|r| r.t_s.is_none()));
        assert!(out.summary_csv().lines().count() == 3);
    }
}
