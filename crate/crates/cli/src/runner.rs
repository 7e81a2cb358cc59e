//! Run orchestration: scenario setup, backends, series and summary output.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use lcdflow_core::diagnostics::{
    gronwall_slope, ladyzhenskaya_fit, phi_sample, twin_divergence, velocity_l2, EnergyReport, PhiSample, SeriesRow,
};
use lcdflow_core::galerkin::{available_modes, ReferenceIntegrator};
use lcdflow_core::scenario::{initial_state, twin_pair};
use lcdflow_core::stepper::{self, InvariantBounds, DIVERGENCE_TOL};
use lcdflow_core::{Params, Scenario, SimState};
use serde::Serialize;
use thiserror::Error;

use crate::checkpoint::{load_checkpoint, save_checkpoint, CheckpointError, CheckpointParams};
use crate::config::{Backend, RunConfig};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Solver(#[from] lcdflow_core::Error),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("i/o on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot resume: {0}")]
    Resume(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

/// Norms of the final state.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FinalState {
    pub t: f64,
    pub e_kin: f64,
    pub e_dir: f64,
    pub e_pen: f64,
    pub dissipation: f64,
    pub total: f64,
    pub l2_u: f64,
    pub phi2: f64,
    pub phi_tilde2: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    pub max_div_u: f64,
    pub max_abs_d: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct LadyzhenskayaSummary {
    pub c: f64,
    pub growth: f64,
}

/// Pass/fail of the state invariants along the recorded series.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct InvariantSummary {
    pub divergence_free: bool,
    pub density_bounds: bool,
    pub director_bound: bool,
    pub energy_non_increasing: bool,
    pub mass_drift: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BackendSummary {
    pub backend: String,
    pub rows: usize,
    #[serde(rename = "final")]
    pub final_state: FinalState,
    pub ladyzhenskaya: Option<LadyzhenskayaSummary>,
    pub invariants: InvariantSummary,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Summary {
    pub scenario: String,
    pub backend: String,
    pub dim: usize,
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub runs: Vec<BackendSummary>,
    /// Largest relative difference of `‖u‖_{L²}` between the backends at
    /// common output times.
    pub backend_agreement: Option<f64>,
    pub gronwall_slope: Option<f64>,
    pub twin_final_divergence: Option<f64>,
}

/// What a single backend run records.
struct Trace {
    rows: Vec<SeriesRow>,
    phi: Vec<PhiSample>,
    l2_u: Vec<(f64, f64)>,
    states: Vec<SimState>,
    final_state: SimState,
}

/// Appends series rows as they are produced.
struct SeriesWriter {
    out: BufWriter<File>,
    path: PathBuf,
}

impl SeriesWriter {
    fn create(path: &Path, keep: &[String]) -> Result<Self, RunError> {
        let file = File::create(path).map_err(io_err(path))?;
        let mut out = BufWriter::new(file);
        if keep.is_empty() {
            writeln!(out, "{}", SeriesRow::HEADER.join(",")).map_err(io_err(path))?;
        }
        for line in keep {
            writeln!(out, "{line}").map_err(io_err(path))?;
        }
        Ok(Self { out, path: path.to_path_buf() })
    }

    fn write(&mut self, row: &SeriesRow) -> Result<(), RunError> {
        let line: Vec<String> = row.values().iter().map(|v| v.to_string()).collect();
        writeln!(self.out, "{}", line.join(",")).map_err(io_err(&self.path))?;
        self.out.flush().map_err(io_err(&self.path))
    }
}

/// Lines of an existing series (header included) up to time `t`.
fn series_prefix(path: &Path, t: f64) -> Result<Vec<String>, RunError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut keep = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if i == 0 {
            keep.push(line);
            continue;
        }
        let first = line.split(',').next().unwrap_or("");
        let row_t: f64 = first
            .parse()
            .map_err(|_| RunError::Resume(format!("unreadable time `{first}` on line {} of {}", i + 1, path.display())))?;
        if row_t <= t {
            keep.push(line);
        }
    }
    Ok(keep)
}

struct Recorder<'a> {
    eta: f64,
    writer: SeriesWriter,
    previous: Option<EnergyReport>,
    rows: Vec<SeriesRow>,
    phi: Vec<PhiSample>,
    l2_u: Vec<(f64, f64)>,
    states: Option<Vec<SimState>>,
    checkpoint: Option<(&'a Path, CheckpointParams, usize)>,
    skip_first: bool,
}

impl Recorder<'_> {
    fn record(&mut self, state: &SimState, step: usize) -> Result<(), RunError> {
        let (row, report) = SeriesRow::new(state, self.eta, self.previous.as_ref());
        self.previous = Some(report);
        self.phi.push(phi_sample(state));
        if std::mem::take(&mut self.skip_first) {
            return Ok(());
        }
        self.writer.write(&row)?;
        self.rows.push(row);
        self.l2_u.push((state.t, velocity_l2(&state.u)));
        if let Some(states) = &mut self.states {
            states.push(state.clone());
        }
        if let Some((dir, params, every)) = &self.checkpoint {
            if *every > 0 && step > 0 && step.is_multiple_of(*every) {
                save_checkpoint(state, params, &dir.join(format!("checkpoint_{step:08}.bin")))?;
            }
        }
        Ok(())
    }
}

fn run_backend(
    cfg: &RunConfig,
    backend: Backend,
    state0: SimState,
    series_path: &Path,
    keep: &[String],
    checkpoints: bool,
    keep_states: bool,
) -> Result<Trace, RunError> {
    let params = cfg.params;
    let mut rec = Recorder {
        eta: params.eta,
        writer: SeriesWriter::create(series_path, keep)?,
        previous: None,
        rows: Vec::new(),
        phi: Vec::new(),
        l2_u: Vec::new(),
        states: keep_states.then(Vec::new),
        checkpoint: checkpoints.then(|| (cfg.output_dir.as_path(), CheckpointParams::of(&params), cfg.checkpoint_interval)),
        skip_first: !keep.is_empty(),
    };
    let mut failure: Option<RunError> = None;
    let mut hook = |s: &SimState, k: usize| -> lcdflow_core::Result<()> {
        rec.record(s, k).map_err(|e| {
            let msg = e.to_string();
            failure = Some(e);
            lcdflow_core::Error::Degenerate(format!("output failed: {msg}"))
        })
    };
    let result = match backend {
        Backend::Galerkin => {
            let m = if cfg.galerkin_modes == 0 { available_modes(state0.grid()) } else { cfg.galerkin_modes };
            ReferenceIntegrator::new(*state0.grid(), m)?.run(&state0, &params, cfg.diag_interval, &mut hook)
        }
        _ => stepper::run(state0, &params, cfg.diag_interval, &mut hook),
    };
    if let Some(e) = failure {
        return Err(e);
    }
    let final_state = result?;
    if checkpoints {
        save_checkpoint(&final_state, &CheckpointParams::of(&params), &cfg.output_dir.join("checkpoint.bin"))?;
    }
    Ok(Trace { rows: rec.rows, phi: rec.phi, l2_u: rec.l2_u, states: rec.states.unwrap_or_default(), final_state })
}

fn summarize(cfg: &RunConfig, backend: Backend, trace: &Trace, d0: &SimState) -> BackendSummary {
    let s = &trace.final_state;
    let (row, _) = SeriesRow::new(s, cfg.params.eta, None);
    let final_state = FinalState {
        t: s.t,
        e_kin: row.e_kin,
        e_dir: row.e_dir,
        e_pen: row.e_pen,
        dissipation: row.dissipation,
        total: row.total,
        l2_u: velocity_l2(&s.u),
        phi2: row.phi2,
        phi_tilde2: row.phi_tilde2,
        min_rho: row.min_rho,
        max_rho: row.max_rho,
        max_div_u: row.max_div_u,
        max_abs_d: row.max_abs_d,
        mass: row.mass,
    };
    let ladyzhenskaya = ladyzhenskaya_fit(&trace.phi, cfg.dim)
        .ok()
        .map(|f| LadyzhenskayaSummary { c: f.c, growth: f.growth });
    let bounds = InvariantBounds::new(&cfg.params, &d0.d);
    let slack = 1e-12 * cfg.params.m2.max(1.0);
    let rows = &trace.rows;
    let mass0 = rows.first().map_or(row.mass, |r| r.mass);
    BackendSummary {
        backend: backend.name().into(),
        rows: rows.len(),
        final_state,
        ladyzhenskaya,
        invariants: InvariantSummary {
            divergence_free: rows.iter().all(|r| r.max_div_u <= DIVERGENCE_TOL),
            density_bounds: rows.iter().all(|r| r.min_rho >= cfg.params.m1 - slack && r.max_rho <= cfg.params.m2 + slack),
            director_bound: rows.iter().all(|r| r.max_abs_d <= bounds.director_max),
            energy_non_increasing: rows
                .windows(2)
                .all(|w| w[1].total - w[0].total <= w[1].energy_residual.abs() * (w[1].t - w[0].t) + 1e-12),
            mass_drift: rows.iter().map(|r| ((r.mass - mass0) / mass0).abs()).fold(0.0, f64::max),
        },
    }
}

fn agreement(a: &Trace, b: &Trace) -> Option<f64> {
    let mut worst: Option<f64> = None;
    for &(t, ua) in &a.l2_u {
        if let Some(&(_, ub)) = b.l2_u.iter().find(|r| r.0 == t) {
            let scale = ua.max(ub);
            let rel = if scale > 0.0 { (ua - ub).abs() / scale } else { 0.0 };
            worst = Some(worst.map_or(rel, |w: f64| w.max(rel)));
        }
    }
    worst
}

/// Run a configuration, optionally resuming from a checkpoint.
pub fn run_command(cfg: &RunConfig, resume: Option<&Path>) -> Result<Summary, RunError> {
    fs::create_dir_all(&cfg.output_dir).map_err(io_err(&cfg.output_dir))?;
    let grid = cfg.grid();
    let params: Params = cfg.params;
    let opts = cfg.scenario_options();
    let series_path = cfg.output_dir.join("series.csv");

    if cfg.scenario == Scenario::Twin {
        if resume.is_some() {
            return Err(RunError::Resume("twin runs cannot be resumed".into()));
        }
        return run_twin(cfg, &series_path);
    }

    let (state0, keep) = match resume {
        None => (initial_state(cfg.scenario, grid, &params, &opts)?, Vec::new()),
        Some(path) => {
            if cfg.backend != Backend::Spectral {
                return Err(RunError::Resume("only the spectral backend can be resumed".into()));
            }
            let (state, stored) = load_checkpoint(path)?;
            if *state.grid() != grid {
                return Err(RunError::Resume(format!(
                    "checkpoint grid {:?} differs from the configured {:?}",
                    state.grid(),
                    grid
                )));
            }
            if stored != CheckpointParams::of(&params) {
                return Err(RunError::Resume("checkpoint model constants differ from the configuration".into()));
            }
            let keep = series_prefix(&series_path, state.t)?;
            (state, keep)
        }
    };

    let mut runs = Vec::new();
    let mut backend_agreement = None;
    match cfg.backend {
        Backend::Spectral | Backend::Galerkin => {
            let trace = run_backend(cfg, cfg.backend, state0.clone(), &series_path, &keep, true, false)?;
            runs.push(summarize(cfg, cfg.backend, &trace, &state0));
        }
        Backend::Both => {
            let galerkin_path = cfg.output_dir.join("series_galerkin.csv");
            let (spectral, galerkin) = std::thread::scope(|scope| {
                let s = scope.spawn(|| run_backend(cfg, Backend::Spectral, state0.clone(), &series_path, &[], true, false));
                let g = scope.spawn(|| run_backend(cfg, Backend::Galerkin, state0.clone(), &galerkin_path, &[], false, false));
                (s.join().expect("spectral thread"), g.join().expect("galerkin thread"))
            });
            let (spectral, galerkin) = (spectral?, galerkin?);
            backend_agreement = agreement(&spectral, &galerkin);
            runs.push(summarize(cfg, Backend::Spectral, &spectral, &state0));
            runs.push(summarize(cfg, Backend::Galerkin, &galerkin, &state0));
        }
    }
    let summary = Summary {
        scenario: cfg.scenario.name().into(),
        backend: cfg.backend.name().into(),
        dim: cfg.dim,
        n: cfg.n,
        dt: params.dt,
        t_end: params.t_end,
        runs,
        backend_agreement,
        gronwall_slope: None,
        twin_final_divergence: None,
    };
    write_summary(cfg, &summary)?;
    Ok(summary)
}

fn write_summary(cfg: &RunConfig, summary: &Summary) -> Result<(), RunError> {
    let path = cfg.output_dir.join("summary.json");
    let text = serde_json::to_string_pretty(summary)?;
    fs::write(&path, text + "\n").map_err(io_err(&path))
}

fn run_twin(cfg: &RunConfig, series_path: &Path) -> Result<Summary, RunError> {
    let grid = cfg.grid();
    let params = cfg.params;
    let (a0, b0) = twin_pair(grid, &params, &cfg.scenario_options())?;
    let (ta, tb) = std::thread::scope(|scope| {
        let a = scope.spawn(|| run_backend(cfg, Backend::Spectral, a0.clone(), series_path, &[], true, true));
        let b = scope.spawn(|| {
            let mut states = Vec::new();
            stepper::run(b0.clone(), &params, cfg.diag_interval, |s, _| {
                states.push(s.clone());
                Ok(())
            })
            .map(|_| states)
        });
        (a.join().expect("twin thread"), b.join().expect("twin thread"))
    });
    let (ta, tb) = (ta?, tb?);
    let twin_path = cfg.output_dir.join("twin.csv");
    let mut writer = csv::Writer::from_path(&twin_path)?;
    writer.write_record(["t", "divergence"])?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (a, b) in ta.states.iter().zip(&tb) {
        let v = twin_divergence(b, a)?;
        writer.write_record([a.t.to_string(), v.to_string()])?;
        times.push(a.t);
        values.push(v);
    }
    writer.flush().map_err(io_err(&twin_path))?;
    let slope = gronwall_slope(&times, &values).ok();
    let summary = Summary {
        scenario: cfg.scenario.name().into(),
        backend: cfg.backend.name().into(),
        dim: cfg.dim,
        n: cfg.n,
        dt: params.dt,
        t_end: params.t_end,
        runs: vec![summarize(cfg, Backend::Spectral, &ta, &a0)],
        backend_agreement: None,
        gronwall_slope: slope,
        twin_final_divergence: values.last().copied(),
    };
    write_summary(cfg, &summary)?;
    Ok(summary)
}
