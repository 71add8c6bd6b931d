use std::fmt;
use std::fs;
use std::path::Path;

use mgsta::analysis::{self, Certificates, VerificationReport};
use mgsta::config::{ProjectConfig, TRAILER_JSON};
use mgsta::sim::{self, ClosedLoop, Gains};
use mgsta::synthesis::{self, SynthesisResult};
use mgsta::trailer;
use mgsta::{Error, PolytopicPlant};

const HEADER: &str = concat!("# mgsta ", env!("CARGO_PKG_VERSION"), "\n");

#[derive(Debug)]
pub enum Failure {
    Infeasible(String),
    Verification(String),
    Error(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Self::Error(_) => 1,
            Self::Infeasible(_) => 2,
            Self::Verification(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Infeasible(m) => write!(f, "infeasible: {m}"),
            Self::Verification(m) => write!(f, "verification failed: {m}"),
            Self::Error(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Infeasible { .. } | Error::AllInfeasible => Self::Infeasible(e.to_string()),
            other => Self::Error(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Error(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn load(c: &crate::Common) -> Result<ProjectConfig, Failure> {
    let cfg = match &c.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Error(format!("{}: {e}", p.display())))?;
            ProjectConfig::from_json(&text, &c.overrides)
        }
        None => ProjectConfig::from_json(TRAILER_JSON, &c.overrides),
    };
    cfg.map_err(|e| Failure::Error(format!("config: {e}")))
}

fn out_dir(c: &crate::Common) -> Result<&Path, Failure> {
    fs::create_dir_all(&c.out).map_err(|e| Failure::Error(format!("{}: {e}", c.out.display())))?;
    Ok(&c.out)
}

fn write(dir: &Path, name: &str, body: &str) -> Outcome {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| Failure::Error(format!("{}: {e}", path.display())))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn write_csv(dir: &Path, name: &str, body: &str) -> Outcome {
    write(dir, name, &format!("{HEADER}{body}"))
}

fn read_result(path: &Path) -> Result<SynthesisResult, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Error(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Error(format!("{}: {e}", path.display())))
}

fn verify(cfg: &ProjectConfig, plant: &PolytopicPlant, r: &SynthesisResult) -> Result<VerificationReport, Failure> {
    let cert = r.certificates()?;
    Ok(analysis::verify_all(
        plant,
        &cert,
        &r.gains(),
        &cfg.design.h,
        &cfg.design.j,
        cfg.verify.samples,
        cfg.verify.seed,
    )?)
}

fn print_result(r: &SynthesisResult) {
    println!("alpha = {}, rho = {}", r.alpha, r.rho);
    println!("theta = {:.6}", r.theta);
    println!("solver: {:?} ({}), {} iterations", r.solver.status, r.solver.message, r.solver.iterations);
    println!("delta = {:.6}", r.delta);
    println!("worst LMI margin = {:.3e}", r.worst_margin);
}

fn print_report(report: &VerificationReport) {
    let failed = report.rows.iter().filter(|r| !r.pass).count();
    println!(
        "verification: {} checks, {failed} failed, worst scaled margin {:.3e}",
        report.rows.len(),
        report.worst_scaled_margin()
    );
    match (&report.deltas, report.delta_min) {
        (Some(d), Some(m)) => {
            let list: Vec<String> = d.iter().map(|v| format!("{v:.4}")).collect();
            println!("delta per vertex: {}", list.join(" "));
            println!("delta_min = {m:.6}");
        }
        _ => println!("delta: B_i K2 singular at some vertex"),
    }
}

/// `result.json` and `verification.csv` for a synthesized point.
fn emit_result(cfg: &ProjectConfig, plant: &PolytopicPlant, r: &SynthesisResult, dir: &Path) -> Outcome {
    write(dir, "result.json", &r.to_json()?)?;
    let report = verify(cfg, plant, r)?;
    write_csv(dir, "verification.csv", &report.to_csv())?;
    print_result(r);
    print_report(&report);
    if !report.all_pass() {
        log::warn!("synthesized certificates fail the analysis inequalities at some points");
    }
    Ok(())
}

pub fn synth(c: &crate::Common) -> Outcome {
    let cfg = load(c)?;
    let plant = cfg.plant()?;
    let dir = out_dir(c)?;
    let r = synthesis::solve_inner(&plant, &cfg.design, &cfg.solver)?;
    emit_result(&cfg, &plant, &r, dir)
}

pub fn search(c: &crate::Common) -> Outcome {
    let cfg = load(c)?;
    let plant = cfg.plant()?;
    let dir = out_dir(c)?;
    let out = synthesis::outer_search(&plant, &cfg.design, &cfg.search, &cfg.solver)?;
    write_csv(dir, "landscape.csv", &out.landscape_csv())?;
    emit_result(&cfg, &plant, &out.best, dir)
}

pub fn analyze(c: &crate::Common, result: &Path) -> Outcome {
    let cfg = load(c)?;
    let plant = cfg.plant()?;
    let dir = out_dir(c)?;
    let r = read_result(result)?;
    let report = verify(&cfg, &plant, &r)?;
    write_csv(dir, "verification.csv", &report.to_csv())?;
    print_report(&report);
    if !report.all_pass() {
        let bad: Vec<String> = report
            .rows
            .iter()
            .filter(|x| !x.pass)
            .map(|x| format!("{} {}", x.point, x.inequality))
            .collect();
        return Err(Failure::Verification(bad.join(", ")));
    }
    let cert = r.certificates()?;
    let k = analysis::stability_constants(&cert, &report, &plant, &r.gains(), &cfg.design.h, &cfg.design.j)?;
    println!(
        "eps_L = {:.4e}, eps_N = {:.4e}, theta_N = {:.4e}, nu* = {:.4e}",
        k.eps_l, k.eps_n, k.theta_n, k.nu_star
    );
    Ok(())
}

fn configured_gains(cfg: &ProjectConfig) -> Result<Gains, Failure> {
    cfg.gains
        .clone()
        .ok_or_else(|| Failure::Error("no gains: give --result or a `gains` entry in the config".into()))
}

pub fn simulate(c: &crate::Common, vertex: usize, result: Option<&Path>) -> Outcome {
    let cfg = load(c)?;
    let plant = cfg.plant()?;
    let dir = out_dir(c)?;
    let v = plant
        .vertex(vertex)
        .ok_or_else(|| Failure::Error(format!("vertex {vertex} out of range 0..{}", plant.len())))?
        .clone();
    let (gains, alpha, cert, theta) = match result {
        Some(p) => {
            let r = read_result(p)?;
            let cert = r.certificates()?;
            (r.gains(), r.alpha, Some(cert), Some((r.theta, r.omega)))
        }
        None => (configured_gains(&cfg)?, cfg.design.alpha, None::<Certificates>, None),
    };
    let delta = synthesis::compute_delta(&plant, &gains.k2, cfg.design.gamma).ok().map(|d| d.0);
    let dist = cfg.disturbance(vertex, delta)?;
    let cl = ClosedLoop::new(v, gains, alpha, cfg.design.h.clone(), cfg.design.j.clone())?;
    let init = cfg.initial_state();
    let mut rec = sim::simulate(&cl, &init, dist.as_ref(), &cfg.sim, cert.as_ref())?;
    rec.t_s = sim::detect_sliding(&rec, cfg.scenario.tol_sigma, cfg.scenario.tol_zbar);
    write_csv(dir, "trajectory.csv", &rec.to_csv())?;
    println!("t_s = {}", rec.t_s.map_or("none".into(), |t| format!("{t:.4}")));
    println!("cost integral = {:.6}", rec.final_cost());
    println!("max |f'| = {:.4}, declared bound {:?}", rec.max_fdot, rec.fdot_bound);
    if let Some((theta, omega)) = theta {
        let chk = sim::check_cost_bound(&rec, theta, omega);
        let nu = sim::check_nu_monotone(&rec);
        println!(
            "cost / theta = {:.4} ({}), |u_ST|^2 / (omega theta) = {:.4} ({}), nu violations {}",
            chk.ratio,
            if chk.pass { "ok" } else { "exceeded" },
            chk.max_ust_sq / chk.ust_bound,
            if chk.ust_pass { "ok" } else { "exceeded" },
            nu.violations
        );
        if !rec.disturbance_compliant() {
            println!("disturbance exceeds the admissible bound; guarantees do not apply");
        }
    }
    Ok(())
}

pub fn trailer(
    c: &crate::Common,
    vertex: Option<usize>,
    synthesize: bool,
    result: Option<&Path>,
    physical: bool,
) -> Outcome {
    let cfg = load(c)?;
    let params = cfg
        .trailer_params()
        .ok_or_else(|| Failure::Error("the trailer command needs a `trailer` plant".into()))?
        .clone();
    let plant = cfg.plant()?;
    let dir = out_dir(c)?;
    let synthesized = if synthesize {
        let out = synthesis::outer_search(&plant, &cfg.design, &cfg.search, &cfg.solver)?;
        write_csv(dir, "landscape.csv", &out.landscape_csv())?;
        emit_result(&cfg, &plant, &out.best, dir)?;
        Some(out.best)
    } else {
        result.map(read_result).transpose()?
    };
    let (gains, alpha, gamma, cert) = match &synthesized {
        Some(r) => (r.gains(), r.alpha, r.gamma, Some(r.certificates()?)),
        None => (configured_gains(&cfg)?, cfg.design.alpha, cfg.design.gamma, None),
    };
    let mut scenario = cfg.scenario.clone();
    if let Some(v) = vertex {
        if v >= plant.len() {
            return Err(Failure::Error(format!("vertex {v} out of range 0..{}", plant.len())));
        }
        scenario.vertices = Some(vec![v]);
    }
    let outcome = trailer::run_benchmark(&params, &gains, alpha, gamma, &scenario, cert.as_ref())?;
    let mut written = Vec::new();
    for run in &outcome.runs {
        if let Some(rec) = &run.record {
            write_csv(dir, &format!("vertex_{}.csv", run.index), &rec.to_csv())?;
            if physical {
                write_csv(dir, &format!("physical_{}.csv", run.index), &trailer::physical_csv(&params, rec))?;
            }
            written.push(run.index);
        }
        match (&run.error, run.t_s) {
            (Some(e), _) => log::warn!("vertex {}: {e}", run.index),
            (None, None) => log::warn!("vertex {}: no sliding mode within the horizon", run.index),
            (None, Some(t)) => log::info!("vertex {}: sliding from t = {t:.4}", run.index),
        }
    }
    write_csv(dir, "summary.csv", &outcome.summary_csv())?;
    let mut plot = trailer::gnuplot_script(&written);
    if !physical {
        if let Some(i) = plot.find("set output 'tracking.png'") {
            plot.truncate(i);
        }
    }
    write(dir, "plot.gp", &plot)?;
    let slid = outcome.runs.iter().filter(|r| r.t_s.is_some()).count();
    println!("{slid}/{} vertices reach the sliding set", outcome.runs.len());
    if let Some(d) = outcome.delta_min {
        println!("delta_min = {d:.6}");
    }
    let failed: Vec<String> = outcome
        .runs
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("vertex {}: {e}", r.index)))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Error(failed.join("; ")))
    }
}
