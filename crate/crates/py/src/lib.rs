//! Python bindings. The extension module is named `mgsta`.
//!
//! Matrices cross the boundary as lists of rows.

use std::collections::HashMap;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use mgsta::analysis::{self, VerificationReport};
use mgsta::config::{ProjectConfig, TRAILER_JSON};
use mgsta::linalg::Mat;
use mgsta::sim::{self, ClosedLoop, Gains, TrajectoryRecord};
use mgsta::synthesis::{self, SynthesisResult};
use mgsta::trailer::{self, BenchmarkOutcome};

create_exception!(mgsta, MgstaError, PyException);
create_exception!(mgsta, InfeasibleError, MgstaError);

fn err(e: mgsta::Error) -> PyErr {
    match e {
        mgsta::Error::Infeasible { .. } | mgsta::Error::AllInfeasible => InfeasibleError::new_err(e.to_string()),
        other => MgstaError::new_err(other.to_string()),
    }
}

pub fn rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn from_rows(r: &[Vec<f64>]) -> PyResult<Mat> {
    let ncols = r.first().map_or(0, Vec::len);
    if r.iter().any(|x| x.len() != ncols) {
        return Err(MgstaError::new_err("ragged matrix"));
    }
    Ok(Mat::from_fn(r.len(), ncols, |i, j| r[i][j]))
}

fn gains_dict(g: &Gains) -> HashMap<String, Vec<Vec<f64>>> {
    HashMap::from([("K0".into(), rows(&g.k0)), ("K1".into(), rows(&g.k1)), ("K2".into(), rows(&g.k2))])
}

/// A project configuration: plant, design parameters and run settings.
#[pyclass(name = "Project", module = "mgsta", skip_from_py_object)]
#[derive(Clone)]
pub struct PyProject {
    pub cfg: ProjectConfig,
}

#[pymethods]
impl PyProject {
    /// The built-in trailer benchmark, with optional `key=value` overrides.
    #[new]
    #[pyo3(signature = (overrides = Vec::new()))]
    fn new(overrides: Vec<String>) -> PyResult<Self> {
        ProjectConfig::from_json(TRAILER_JSON, &overrides).map(|cfg| Self { cfg }).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (text, overrides = Vec::new()))]
    fn from_json(text: &str, overrides: Vec<String>) -> PyResult<Self> {
        ProjectConfig::from_json(text, &overrides).map(|cfg| Self { cfg }).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.cfg).map_err(|e| MgstaError::new_err(e.to_string()))
    }

    #[getter]
    fn vertices(&self) -> PyResult<usize> {
        Ok(self.cfg.plant().map_err(err)?.len())
    }

    /// Solve the inner program at the configured `(alpha, rho)`.
    fn synthesize(&self, py: Python<'_>) -> PyResult<PySynthesis> {
        let cfg = self.cfg.clone();
        py.detach(move || {
            let plant = cfg.plant()?;
            synthesis::solve_inner(&plant, &cfg.design, &cfg.solver)
        })
        .map(|r| PySynthesis { r })
        .map_err(err)
    }

    /// Grid search plus refinement. Returns the best result and the landscape CSV.
    fn search(&self, py: Python<'_>) -> PyResult<(PySynthesis, String)> {
        let cfg = self.cfg.clone();
        py.detach(move || {
            let plant = cfg.plant()?;
            synthesis::outer_search(&plant, &cfg.design, &cfg.search, &cfg.solver)
        })
        .map(|o| (PySynthesis { r: o.best.clone() }, o.landscape_csv()))
        .map_err(err)
    }

    /// Check the analysis inequalities for `result` on this plant.
    fn verify(&self, py: Python<'_>, result: &PySynthesis) -> PyResult<PyReport> {
        let cfg = self.cfg.clone();
        let r = result.r.clone();
        py.detach(move || {
            let plant = cfg.plant()?;
            let cert = r.certificates()?;
            let gains = r.gains();
            let report = analysis::verify_all(
                &plant,
                &cert,
                &gains,
                &cfg.design.h,
                &cfg.design.j,
                cfg.verify.samples,
                cfg.verify.seed,
            )?;
            let constants = if report.all_pass() {
                analysis::stability_constants(&cert, &report, &plant, &gains, &cfg.design.h, &cfg.design.j).ok()
            } else {
                None
            };
            Ok::<_, mgsta::Error>(PyReport { report, constants })
        })
        .map_err(err)
    }

    /// Simulate one vertex with the gains of `result`, or the configured gains.
    #[pyo3(signature = (vertex = 0, result = None))]
    fn simulate(&self, py: Python<'_>, vertex: usize, result: Option<&PySynthesis>) -> PyResult<PyTrajectory> {
        let cfg = self.cfg.clone();
        let r = result.map(|x| x.r.clone());
        let gains = match &r {
            Some(r) => r.gains(),
            None => cfg
                .gains
                .clone()
                .ok_or_else(|| MgstaError::new_err("no gains: pass a result or configure `gains`"))?,
        };
        py.detach(move || {
            let plant = cfg.plant()?;
            let v = plant
                .vertex(vertex)
                .ok_or_else(|| mgsta::Error::Config(format!("vertex {vertex} out of range 0..{}", plant.len())))?
                .clone();
            let alpha = r.as_ref().map_or(cfg.design.alpha, |r| r.alpha);
            let cert = r.as_ref().map(|r| r.certificates()).transpose()?;
            let delta = synthesis::compute_delta(&plant, &gains.k2, cfg.design.gamma).ok().map(|d| d.0);
            let dist = cfg.disturbance(vertex, delta)?;
            let cl = ClosedLoop::new(v, gains, alpha, cfg.design.h.clone(), cfg.design.j.clone())?;
            let mut rec = sim::simulate(&cl, &cfg.initial_state(), dist.as_ref(), &cfg.sim, cert.as_ref())?;
            rec.t_s = sim::detect_sliding(&rec, cfg.scenario.tol_sigma, cfg.scenario.tol_zbar);
            Ok::<_, mgsta::Error>(PyTrajectory { rec })
        })
        .map_err(err)
    }

    /// Run the trailer benchmark on every vertex, or only on `vertex`.
    #[pyo3(signature = (result = None, vertex = None))]
    fn trailer(&self, py: Python<'_>, result: Option<&PySynthesis>, vertex: Option<usize>) -> PyResult<PyBenchmark> {
        let cfg = self.cfg.clone();
        let r = result.map(|x| x.r.clone());
        py.detach(move || {
            let params = cfg
                .trailer_params()
                .ok_or_else(|| mgsta::Error::Config("the trailer benchmark needs a trailer plant".into()))?;
            let (gains, alpha, gamma, cert) = match &r {
                Some(r) => (r.gains(), r.alpha, r.gamma, Some(r.certificates()?)),
                None => (
                    cfg.gains.clone().ok_or_else(|| mgsta::Error::Config("no gains configured".into()))?,
                    cfg.design.alpha,
                    cfg.design.gamma,
                    None,
                ),
            };
            let mut scenario = cfg.scenario.clone();
            if let Some(v) = vertex {
                scenario.vertices = Some(vec![v]);
            }
            trailer::run_benchmark(params, &gains, alpha, gamma, &scenario, cert.as_ref())
        })
        .map(|outcome| PyBenchmark { outcome })
        .map_err(err)
    }
}

/// Outcome of the inner program.
#[pyclass(name = "Synthesis", module = "mgsta", skip_from_py_object)]
#[derive(Clone)]
pub struct PySynthesis {
    pub r: SynthesisResult,
}

#[pymethods]
impl PySynthesis {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(|r| Self { r }).map_err(|e| MgstaError::new_err(e.to_string()))
    }

    fn to_json(&self) -> PyResult<String> {
        self.r.to_json().map_err(err)
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.r.theta
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.r.alpha
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.r.rho
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.r.gamma
    }

    #[getter]
    fn omega(&self) -> f64 {
        self.r.omega
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.r.delta
    }

    #[getter]
    fn deltas(&self) -> Vec<f64> {
        self.r.deltas.clone()
    }

    #[getter]
    fn status(&self) -> String {
        format!("{:?}", self.r.solver.status)
    }

    #[getter]
    fn worst_margin(&self) -> f64 {
        self.r.worst_margin
    }

    /// `{"K0": ..., "K1": ..., "K2": ...}`.
    #[getter]
    fn gains(&self) -> HashMap<String, Vec<Vec<f64>>> {
        gains_dict(&self.r.gains())
    }

    fn __repr__(&self) -> String {
        format!("Synthesis(theta={:.6}, alpha={}, rho={}, delta={:.6})", self.r.theta, self.r.alpha, self.r.rho, self.r.delta)
    }
}

#[pyclass(name = "Report", module = "mgsta")]
pub struct PyReport {
    report: VerificationReport,
    constants: Option<analysis::StabilityConstants>,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn all_pass(&self) -> bool {
        self.report.all_pass()
    }

    #[getter]
    fn worst_scaled_margin(&self) -> f64 {
        self.report.worst_scaled_margin()
    }

    #[getter]
    fn delta_min(&self) -> Option<f64> {
        self.report.delta_min
    }

    /// `(point, inequality, margin, scaled_margin, pass)` per check.
    #[getter]
    fn rows(&self) -> Vec<(String, String, f64, f64, bool)> {
        self.report
            .rows
            .iter()
            .map(|r| (r.point.clone(), r.inequality.to_string(), r.margin, r.scaled_margin, r.pass))
            .collect()
    }

    /// `eps_L`, `eps_N`, `theta_N`, `rate_N`, `nu_star`; `None` unless every check passes.
    #[getter]
    fn constants(&self) -> Option<HashMap<String, f64>> {
        self.constants.as_ref().map(|k| {
            HashMap::from([
                ("eps_L".into(), k.eps_l),
                ("eps_N".into(), k.eps_n),
                ("theta_N".into(), k.theta_n),
                ("rate_N".into(), k.rate_n),
                ("nu_star".into(), k.nu_star),
            ])
        })
    }

    fn to_csv(&self) -> String {
        self.report.to_csv()
    }
}

#[pyclass(name = "Trajectory", module = "mgsta")]
pub struct PyTrajectory {
    rec: TrajectoryRecord,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn t(&self) -> Vec<f64> {
        self.rec.samples.iter().map(|s| s.t).collect()
    }

    #[getter]
    fn sigma(&self) -> Vec<Vec<f64>> {
        self.rec.samples.iter().map(|s| s.sigma.clone()).collect()
    }

    #[getter]
    fn zeta(&self) -> Vec<Vec<f64>> {
        self.rec.samples.iter().map(|s| s.zeta.clone()).collect()
    }

    #[getter]
    fn u(&self) -> Vec<Vec<f64>> {
        self.rec.samples.iter().map(|s| s.u.clone()).collect()
    }

    /// Lyapunov function samples; NaN without certificates.
    #[getter]
    fn nu(&self) -> Vec<f64> {
        self.rec.samples.iter().map(|s| s.nu).collect()
    }

    #[getter]
    fn t_s(&self) -> Option<f64> {
        self.rec.t_s
    }

    #[getter]
    fn cost(&self) -> f64 {
        self.rec.final_cost()
    }

    /// Cost bound check against `theta` and `omega`: `(cost/theta, |u_ST|^2/(omega theta))`.
    fn cost_ratios(&self, theta: f64, omega: f64) -> (f64, f64) {
        let c = sim::check_cost_bound(&self.rec, theta, omega);
        (c.ratio, c.max_ust_sq / c.ust_bound)
    }

    fn to_csv(&self) -> String {
        self.rec.to_csv()
    }
}

#[pyclass(name = "Benchmark", module = "mgsta")]
pub struct PyBenchmark {
    outcome: BenchmarkOutcome,
}

#[pymethods]
impl PyBenchmark {
    #[getter]
    fn delta_min(&self) -> Option<f64> {
        self.outcome.delta_min
    }

    /// Vertex index to sliding time (`None` when the sliding set is not reached).
    #[getter]
    fn t_s(&self) -> Vec<(usize, Option<f64>)> {
        self.outcome.runs.iter().map(|r| (r.index, r.t_s)).collect()
    }

    #[getter]
    fn errors(&self) -> Vec<(usize, String)> {
        self.outcome.runs.iter().filter_map(|r| r.error.clone().map(|e| (r.index, e))).collect()
    }

    fn summary_csv(&self) -> String {
        self.outcome.summary_csv()
    }
}

/// Fixed benchmark gains as `{"K0", "K1", "K2"}`.
#[pyfunction]
fn benchmark_gains() -> HashMap<String, Vec<Vec<f64>>> {
    gains_dict(&trailer::benchmark_gains())
}

/// Admissible disturbance-rate bound for `k2`: `(minimum, per vertex)`.
#[pyfunction]
fn compute_delta(project: &PyProject, k2: Vec<Vec<f64>>, gamma: f64) -> PyResult<(f64, Vec<f64>)> {
    let plant = project.cfg.plant().map_err(err)?;
    synthesis::compute_delta(&plant, &from_rows(&k2)?, gamma).map_err(err)
}

#[pymodule]
#[pyo3(name = "mgsta")]
fn mgsta_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("MgstaError", m.py().get_type::<MgstaError>())?;
    m.add("InfeasibleError", m.py().get_type::<InfeasibleError>())?;
    m.add_class::<PyProject>()?;
    m.add_class::<PySynthesis>()?;
    m.add_class::<PyReport>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyBenchmark>()?;
    m.add_function(wrap_pyfunction!(benchmark_gains, m)?)?;
    m.add_function(wrap_pyfunction!(compute_delta, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip() {
        let m = Mat::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let r = rows(&m);
        assert_eq!(r, vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        assert_eq!(from_rows(&r).unwrap(), m);
    }
}
