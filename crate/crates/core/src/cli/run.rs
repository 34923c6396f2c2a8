//! Executes a run configuration and writes its artifacts.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::config::{ConfigError, ProblemConfig, RunConfig};
use super::csv::export_csv;
use super::svg::{palette, Figure, Marker, Panel, Series, Shape, Stroke};
use crate::continuation::{
    run_continuation_with, solve_unconstrained, ContinuationOutcome, ContinuationReport,
};
use crate::orbit::build_orbit_problem;
use crate::problem::ProblemDefinition;
use crate::trajectory::TrajectorySolution;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Suppress per-level progress on stderr.
    pub quiet: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnconstrainedRecord {
    pub lam0: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    #[serde(rename = "max_S")]
    pub max_constraint: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub rho: Option<f64>,
    pub message: String,
}

/// Contents of `report.json`: the continuation report plus run metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub problem: String,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure: Option<FailureRecord>,
    pub unconstrained: Option<UnconstrainedRecord>,
    #[serde(flatten)]
    pub continuation: ContinuationReport,
    pub wall_time: f64,
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Io {
        path: PathBuf,
        source: io::Error,
    },
    /// The solve failed; converged levels and the report were still written.
    Solver {
        report: Box<RunReport>,
        message: String,
    },
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Io { .. } => 1,
            Self::Solver { .. } => 2,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(e) => write!(f, "configuration error: {e}"),
            Self::Io { path, source } => write!(f, "cannot write {}: {source}", path.display()),
            Self::Solver { message, .. } => write!(f, "solver failure: {message}"),
        }
    }
}

impl std::error::Error for RunError {}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// `trajectory_rho_<rho>.csv`, with the shortest exact decimal of `rho`.
pub fn level_file_name(rho: f64) -> String {
    format!("trajectory_rho_{rho}.csv")
}

pub const PLOT_FILES: [&str; 5] = [
    "trajectory.svg",
    "control.svg",
    "costate.svg",
    "multiplier.svg",
    "constraint.svg",
];

pub fn run(config: &RunConfig, options: &RunOptions) -> Result<RunReport, RunError> {
    config.validate().map_err(RunError::Config)?;
    let started = Instant::now();
    let out = &config.output.dir;
    fs::create_dir_all(out).map_err(io_err(out))?;

    let (problem, cost) = match &config.problem {
        ProblemConfig::Orbit2d(orbit) => build_orbit_problem(orbit.clone())
            .map_err(|e| RunError::Config(ConfigError(format!("problem: {e}"))))?,
    };
    let schedule = config
        .schedule()
        .map_err(|e| RunError::Config(ConfigError(format!("schedule: {e}"))))?;
    let settings = config.solver_settings();
    let mut report = RunReport {
        problem: config.problem.name().into(),
        converged: false,
        failure: None,
        unconstrained: None,
        continuation: ContinuationReport::default(),
        wall_time: 0.0,
    };

    let zero = DVector::zeros(problem.state_dim());
    let unconstrained = match solve_unconstrained(&problem, &cost, &zero, &settings) {
        Ok(u) => u,
        Err(e) => {
            report.failure = Some(FailureRecord {
                rho: None,
                message: format!("unconstrained warm start: {e}"),
            });
            return fail(config, report, &ContinuationOutcome::empty(), None, started);
        }
    };
    report.unconstrained = Some(UnconstrainedRecord {
        lam0: unconstrained.lam0.as_slice().to_vec(),
        cost: unconstrained.cost,
        iterations: unconstrained.shooting.iterations,
        max_constraint: unconstrained.trajectory.max_constraint(),
    });
    if !options.quiet {
        eprintln!(
            "unconstrained: cost {:.10}, max S {:.3e}",
            unconstrained.cost,
            unconstrained.trajectory.max_constraint()
        );
    }
    let reference = config
        .include_unconstrained
        .then_some(&unconstrained.trajectory);
    if let Some(traj) = reference.filter(|_| config.output.csv) {
        let path = out.join("unconstrained.csv");
        export_csv(traj, &path).map_err(io_err(&path))?;
    }

    let outcome = run_continuation_with(
        &problem,
        &cost,
        &schedule,
        &unconstrained.lam0,
        &settings,
        |level| {
            if !options.quiet {
                eprintln!(
                "rho = {}: residual {:.2e}, cost {:.10}, max S {:.3e}, {} iterations, {} refinements, {:.2} s",
                level.rho,
                level.residual_norm,
                level.cost,
                level.max_constraint,
                level.iterations,
                level.refinements.len(),
                level.wall_time
            );
            }
        },
    );
    match outcome {
        Ok(outcome) => {
            report.converged = true;
            report.continuation = outcome.report.clone();
            write_artifacts(config, &outcome, reference)?;
            report.wall_time = started.elapsed().as_secs_f64();
            write_report(config, &report)?;
            Ok(report)
        }
        Err(failure) => {
            report.failure = Some(FailureRecord {
                rho: Some(failure.rho),
                message: failure.source.to_string(),
            });
            report.continuation = failure.partial.report.clone();
            fail(config, report, &failure.partial, reference, started)
        }
    }
}

fn fail(
    config: &RunConfig,
    mut report: RunReport,
    partial: &ContinuationOutcome,
    reference: Option<&TrajectorySolution>,
    started: Instant,
) -> Result<RunReport, RunError> {
    write_artifacts(config, partial, reference)?;
    report.wall_time = started.elapsed().as_secs_f64();
    write_report(config, &report)?;
    let message = match &report.failure {
        Some(FailureRecord {
            rho: Some(rho),
            message,
        }) => format!("level rho = {rho}: {message}"),
        Some(FailureRecord { rho: None, message }) => message.clone(),
        None => "unknown failure".into(),
    };
    Err(RunError::Solver {
        report: Box::new(report),
        message,
    })
}

fn write_report(config: &RunConfig, report: &RunReport) -> Result<(), RunError> {
    let path = config.output.dir.join("report.json");
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    fs::write(&path, text + "\n").map_err(io_err(&path))
}

fn write_artifacts(
    config: &RunConfig,
    outcome: &ContinuationOutcome,
    reference: Option<&TrajectorySolution>,
) -> Result<(), RunError> {
    let out = &config.output.dir;
    if config.output.csv {
        for traj in &outcome.trajectories {
            let path = out.join(level_file_name(traj.rho.unwrap_or(f64::NAN)));
            export_csv(traj, &path).map_err(io_err(&path))?;
        }
    }
    if config.output.svg {
        for (name, figure) in PLOT_FILES
            .iter()
            .zip(figures(&outcome.trajectories, reference))
        {
            let path = out.join(name);
            fs::write(&path, figure.render()).map_err(io_err(&path))?;
        }
    }
    Ok(())
}

/// Styled trajectories: constrained levels in palette order, the
/// unconstrained reference dashed in grey.
fn styled<'a>(
    levels: &'a [TrajectorySolution],
    reference: Option<&'a TrajectorySolution>,
) -> Vec<(&'a TrajectorySolution, &'static str, Stroke, String)> {
    let mut out: Vec<_> = levels
        .iter()
        .enumerate()
        .map(|(i, t)| {
            (
                t,
                palette(i),
                Stroke::Solid,
                format!("ρ = {}", t.rho.unwrap_or(f64::NAN)),
            )
        })
        .collect();
    if let Some(r) = reference {
        out.push((r, "#555555", Stroke::Dashed, "unconstrained".into()));
    }
    out
}

fn time_panel<F>(
    styled: &[(&TrajectorySolution, &str, Stroke, String)],
    y_label: &str,
    value: F,
) -> Panel
where
    F: Fn(&crate::dynamics::TrajectoryPoint) -> f64,
{
    let mut panel = Panel::new("t", y_label);
    for (traj, color, stroke, _) in styled {
        let mut series = Series::new(color, traj.points.iter().map(|p| (p.t, value(p))).collect());
        series.stroke = *stroke;
        panel.series.push(series);
    }
    panel
}

/// The five figures, in [`PLOT_FILES`] order.
pub fn figures(
    levels: &[TrajectorySolution],
    reference: Option<&TrajectorySolution>,
) -> Vec<Figure> {
    let styled = styled(levels, reference);
    let legend: Vec<_> = styled
        .iter()
        .map(|(_, c, s, l)| (c.to_string(), *s, l.clone()))
        .collect();
    let figure = |title: &str, columns: usize, panels: Vec<Panel>| {
        // Only entries drawn in every panel.
        let shown = panels.iter().map(|p| p.series.len()).min().unwrap_or(0);
        Figure {
            title: title.into(),
            columns,
            panels,
            legend: legend[..shown.min(legend.len())].to_vec(),
        }
    };
    let (n, m) = levels
        .first()
        .or(reference)
        .map_or((0, 0), |t| (t.state_dim, t.control_dim));

    let mut plane = Panel::new("x1", "x2");
    plane.equal_aspect = true;
    for (traj, color, stroke, _) in &styled {
        let mut series = Series::new(
            color,
            traj.points.iter().map(|p| (p.x[0], p.x[1])).collect(),
        );
        series.stroke = *stroke;
        plane.series.push(series);
    }
    if let Some(traj) = levels.last().or(reference) {
        if let (Some(a), Some(b)) = (traj.points.first(), traj.points.last()) {
            plane.markers.push(Marker {
                x: a.x[0],
                y: a.x[1],
                shape: Shape::Circle,
            });
            plane.markers.push(Marker {
                x: b.x[0],
                y: b.x[1],
                shape: Shape::Triangle,
            });
        }
    }

    let control = (0..m)
        .map(|i| time_panel(&styled, &format!("u{}", i + 1), |p| p.u[i]))
        .collect();
    let costate = (0..n)
        .map(|i| time_panel(&styled, &format!("λ{}", i + 1), |p| p.lam[i]))
        .collect();
    let constrained = &styled[..levels.len()];
    let multiplier = vec![
        time_panel(constrained, "μ̃", |p| p.mu),
        time_panel(constrained, "2 h δ̃(S) S1", |p| p.jump_weight),
    ];
    let constraint = vec![
        time_panel(&styled, "S", |p| p.s),
        time_panel(&styled, "S1", |p| p.s1),
    ];

    vec![
        figure("Trajectory", 1, vec![plane]),
        figure("Control", 1, control),
        figure("Costate", 2, costate),
        figure("Smoothed multiplier and costate jump rate", 1, multiplier),
        figure("State constraint and its rate", 1, constraint),
    ]
}
