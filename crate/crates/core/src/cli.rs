//! The `symred` command line: scene pipelines and their reports.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 on any
//! input or validation error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::cotangent::{build_affine_symplectic_connection, canonical_symplectic_form, lift_connection};
use crate::error::{Error, Result};
use crate::geometry::ConnectionCoeffs;
use crate::presymplectic::{
    build_presymplectic_parts, build_report, curvature_condition_check, kernel_torsion_check,
    projectability_check, reduce_presymplectic, PresymplecticStructure,
};
use crate::reduction::{level_set_candidate, noncritical_check, reduce_connection, scene_moment_map};
use crate::report::{Bound, Check, CheckReport};
use crate::sampling::{Residual, DEFAULT_SAMPLE_COUNT};
use crate::scene::Scene;
use crate::symplectic::{nabla_omega, FormKind, TwoFormField, CLOSED_TOL};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

/// Tolerance of the connection checks unless a scene or flag overrides it.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// The report of a pipeline with the scenes it produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: CheckReport,
    pub scene: Option<Scene>,
    pub quotient: Option<Scene>,
}

impl Outcome {
    fn report_only(report: CheckReport) -> Self {
        Outcome {
            report,
            scene: None,
            quotient: None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.report.passed {
            EXIT_PASS
        } else {
            EXIT_CHECK_FAILED
        }
    }

    /// `{"report": …, "scene": …, "quotient": …}`.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            report: &'a CheckReport,
            #[serde(skip_serializing_if = "Option::is_none")]
            scene: Option<crate::scene::SceneFile>,
            #[serde(skip_serializing_if = "Option::is_none")]
            quotient: Option<crate::scene::SceneFile>,
        }
        let doc = Doc {
            report: &self.report,
            scene: self.scene.as_ref().map(Scene::to_file),
            quotient: self.quotient.as_ref().map(Scene::to_file),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Errors that mean "a check failed" rather than "bad input" become a
/// failing report line.
fn as_failed_check(name: &str, err: Error) -> Result<Check> {
    let (residual, point, detail) = match err {
        Error::Precondition { what, residual, point } => (residual, point, what),
        Error::CriticalValue { point, sigma_min } => (sigma_min, point, "critical value of the moment map".into()),
        Error::WellDefinedness { deviation, point } => (deviation, point, "varies along the orbits".into()),
        other => return Err(other),
    };
    Ok(Check {
        name: name.into(),
        max_residual: residual,
        tolerance: 0.0,
        witness: Some(point),
        passed: false,
        detail: Some(detail),
        bound: Bound::Fixed,
    })
}

fn tol_check(name: &str, r: Residual, tol: f64) -> Check {
    Check::from_residual(name, r, tol)
}

/// Constant-rank check: the residual is the largest rank deviation seen.
fn rank_check(omega: &TwoFormField, expected: usize, points: &[Vec<f64>]) -> Result<Check> {
    let mut r = Residual::new();
    for p in points {
        let found = match omega.rank_at(p)? {
            Some(k) => k as f64,
            None => f64::NAN,
        };
        r.observe(if found.is_nan() { 1.0 } else { found - expected as f64 }, p);
    }
    Ok(Check::from_residual("rank", r, 0.0)
        .with_detail(format!("expected rank {expected}"))
        .fixed())
}

fn form_checks(report: &mut CheckReport, omega: &TwoFormField, points: &[Vec<f64>]) -> Result<()> {
    report.push(tol_check("closed", omega.closedness_residual(points)?, CLOSED_TOL));
    match omega.kind() {
        FormKind::Symplectic => report.push(rank_check(omega, omega.dim(), points)?),
        FormKind::Presymplectic { rank } => report.push(rank_check(omega, rank, points)?),
        FormKind::General => {}
    }
    Ok(())
}

fn connection_checks(
    report: &mut CheckReport,
    conn: &ConnectionCoeffs,
    omega: Option<&TwoFormField>,
    points: &[Vec<f64>],
) -> Result<()> {
    let chart = conn.chart();
    match omega {
        Some(w) if matches!(w.kind(), FormKind::Presymplectic { .. }) => {}
        _ => report.push(tol_check("torsion", conn.symmetry_residual(points)?, RESIDUAL_TOL)),
    }
    if let Some(w) = omega {
        report.push(tol_check(
            "nabla_omega",
            nabla_omega(conn, w)?.max_abs(chart, points)?,
            RESIDUAL_TOL,
        ));
    }
    Ok(())
}

/// `check`: closedness and rank of the form, torsion and compatibility of
/// the connection, and for presymplectic scenes the curvature condition
/// and projectability.
pub fn check(scene: &Scene) -> Result<Outcome> {
    let mut report = CheckReport::new();
    if let Some(cs) = &scene.cotangent {
        let total = cs.cc.total();
        let points = scene.sample_points(total);
        let omega = canonical_symplectic_form(&cs.cc);
        let lifted = lift_connection(&cs.base_connection, &cs.cc)?;
        report.push(tol_check(
            "lift_nabla_omega",
            nabla_omega(&lifted, &omega)?.max_abs(total, &points)?,
            RESIDUAL_TOL,
        ));
        match build_affine_symplectic_connection(&cs.base_connection, &cs.cc) {
            Ok(conn) => connection_checks(&mut report, &conn, Some(&omega), &points)?,
            Err(e) => report.push(as_failed_check("base_torsion", e)?),
        }
    } else {
        let chart = &scene.chart;
        let points = scene.sample_points(chart);
        let reduction_form;
        let omega = match (&scene.two_form, &scene.reduction) {
            (Some(w), _) => Some(w),
            (None, Some(r)) => {
                reduction_form = canonical_symplectic_form(&r.cc);
                Some(&reduction_form)
            }
            (None, None) => None,
        };
        if let Some(w) = &scene.two_form {
            form_checks(&mut report, w, &points)?;
        }
        if let Some(conn) = &scene.connection {
            connection_checks(&mut report, conn, omega, &points)?;
            let structure = match (&scene.presymplectic, &scene.two_form) {
                (Some(ps), _) => Some(ps.structure.clone()),
                (None, Some(w)) => match w.kind() {
                    FormKind::Presymplectic { rank } => Some(PresymplecticStructure::new(w.clone(), chart.dim() - rank)?),
                    _ => None,
                },
                (None, None) => None,
            };
            if let Some(st) = &structure {
                report.push(kernel_torsion_check(conn, st, &points)?);
                report.push(curvature_condition_check(conn, st, &points)?);
                report.extend(projectability_check(conn, st, &points)?);
            }
        }
    }
    if let Some(r) = &scene.reduction {
        let c = level_set_candidate(r)?;
        let j = scene_moment_map(r)?;
        report.push(noncritical_check(&j, &r.xi, &c, &c.sample_points(scene.seed, DEFAULT_SAMPLE_COUNT))?);
    }
    Ok(Outcome::report_only(report))
}

/// `lift`: the cotangent lift of the base connection, optionally made
/// symmetric and corrected against the canonical form.
pub fn lift(scene: &Scene, symplectify: bool) -> Result<Outcome> {
    let cs = scene
        .cotangent
        .as_ref()
        .ok_or_else(|| Error::Scene("lift needs a cotangent block with a base connection".into()))?;
    let total = cs.cc.total();
    let omega = canonical_symplectic_form(&cs.cc);
    let conn = if symplectify {
        build_affine_symplectic_connection(&cs.base_connection, &cs.cc)?
    } else {
        lift_connection(&cs.base_connection, &cs.cc)?
    };
    let points = scene.sample_points(total);
    let mut report = CheckReport::new();
    report.push(tol_check(
        "nabla_omega",
        nabla_omega(&conn, &omega)?.max_abs(total, &points)?,
        RESIDUAL_TOL,
    ));
    if symplectify {
        report.push(tol_check("torsion", conn.symmetry_residual(&points)?, RESIDUAL_TOL));
    }
    Ok(Outcome {
        report,
        scene: Some(Scene::plain(total, Some(conn), Some(omega), scene.seed)),
        quotient: None,
    })
}

/// `reduce`: level set, noncriticality, and the reduced connection on
/// the quotient.
pub fn reduce(scene: &Scene) -> Result<Outcome> {
    let r = scene
        .reduction
        .as_ref()
        .ok_or_else(|| Error::Scene("reduce needs a reduction block".into()))?;
    if r.n() == r.h {
        return Err(Error::Degenerate(format!(
            "n = h = {}: the level set has dimension {} and the quotient is a point",
            r.h,
            2 * r.n() - r.h - 1
        )));
    }
    let conn = match &scene.cotangent {
        Some(cs) => build_affine_symplectic_connection(&cs.base_connection, &cs.cc)?,
        None => scene
            .connection
            .clone()
            .unwrap_or_else(|| ConnectionCoeffs::flat(r.total())),
    };
    let mut report = CheckReport::new();
    let c = level_set_candidate(r)?;
    let j = scene_moment_map(r)?;
    let nc = noncritical_check(&j, &r.xi, &c, &c.sample_points(scene.seed, DEFAULT_SAMPLE_COUNT))?;
    let critical = !nc.passed;
    report.push(nc);
    if critical {
        return Ok(Outcome::report_only(report));
    }
    if c.dim() == 0 {
        return Err(Error::Degenerate("the level set is a single point".into()));
    }
    match reduce_connection(&conn, r) {
        Ok(red) => {
            report.extend(red.report);
            let q = red.quotient;
            Ok(Outcome {
                report,
                scene: Some(Scene::plain(&q.chart, Some(red.connection), Some(q.omega), scene.seed)),
                quotient: None,
            })
        }
        Err(e) => {
            report.push(as_failed_check("reduction", e)?);
            Ok(Outcome::report_only(report))
        }
    }
}

/// `presymplectic`: build `∇ = D + Θ + A` from the auxiliary connection
/// and check it; with `reduce`, also the connection on the leaf space.
pub fn presymplectic(scene: &Scene, reduce: bool) -> Result<Outcome> {
    let ps = scene
        .presymplectic
        .as_ref()
        .ok_or_else(|| Error::Scene("presymplectic needs a presymplectic block".into()))?;
    let build = build_presymplectic_parts(&ps.structure, &ps.splitting, &ps.k)?;
    let points = scene.sample_points(&scene.chart);
    let mut report = build_report(&build, &ps.structure, &ps.splitting, &points)?;
    let mut out = scene.clone();
    out.connection = Some(build.connection.clone());
    out.tolerance = None;
    let mut quotient = None;
    if reduce {
        match reduce_presymplectic(&build.connection, &ps.structure) {
            Ok(red) => {
                for c in red.report.checks {
                    if c.name.starts_with("reduced_") {
                        report.push(c);
                    }
                }
                quotient = Some(Scene::plain(
                    red.connection.chart(),
                    Some(red.connection.clone()),
                    Some(red.omega),
                    scene.seed,
                ));
            }
            Err(e) => report.push(as_failed_check("reduction", e)?),
        }
    }
    Ok(Outcome {
        report,
        scene: Some(out),
        quotient,
    })
}

/// One of the scene pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    Check,
    Lift { symplectify: bool },
    Reduce,
    Presymplectic { reduce: bool },
}

/// Run `pipeline` on `scene` and judge the report against the scene's
/// tolerance override, if any.
pub fn run_pipeline(scene: &Scene, pipeline: Pipeline) -> Result<Outcome> {
    let mut outcome = match pipeline {
        Pipeline::Check => check(scene)?,
        Pipeline::Lift { symplectify } => lift(scene, symplectify)?,
        Pipeline::Reduce => reduce(scene)?,
        Pipeline::Presymplectic { reduce } => presymplectic(scene, reduce)?,
    };
    if let Some(t) = scene.tolerance {
        outcome.report.rejudge(t);
    }
    Ok(outcome)
}

#[derive(Debug, Parser)]
#[command(name = "symred", version, about = "Build and check symplectic and presymplectic connections")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scene file (JSON).
    pub scene: PathBuf,
    /// Write the result here: the report for `check`, the produced scene
    /// otherwise.
    #[arg(short = 'o', long = "out", value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Sampling seed, overriding the scene's.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Tolerance for every check, overriding the scene's.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the form and connection of a scene.
    Check(Common),
    /// Lift the base connection to the cotangent bundle.
    Lift {
        #[command(flatten)]
        common: Common,
        /// Symmetrize the lift and correct it against the canonical form.
        #[arg(long)]
        symplectify: bool,
    },
    /// Reduce the connection to the quotient of a moment-map level set.
    Reduce(Common),
    /// Build a presymplectic connection from the auxiliary connection K.
    Presymplectic {
        #[command(flatten)]
        common: Common,
        /// Also reduce to the leaf space.
        #[arg(long)]
        reduce: bool,
        /// Where to write the leaf-space scene; defaults to
        /// `<out>.quotient.json` next to `-o`.
        #[arg(long, value_name = "PATH", requires = "reduce")]
        quotient: Option<PathBuf>,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Check(c) | Command::Reduce(c) => c,
            Command::Lift { common, .. } | Command::Presymplectic { common, .. } => common,
        }
    }

    fn pipeline(&self) -> Pipeline {
        match self {
            Command::Check(_) => Pipeline::Check,
            Command::Lift { symplectify, .. } => Pipeline::Lift { symplectify: *symplectify },
            Command::Reduce(_) => Pipeline::Reduce,
            Command::Presymplectic { reduce, .. } => Pipeline::Presymplectic { reduce: *reduce },
        }
    }
}

fn load(common: &Common) -> Result<Scene> {
    let mut scene = Scene::read(&common.scene)?;
    if let Some(seed) = common.seed {
        scene.seed = seed;
    }
    if let Some(t) = common.tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Scene(format!("--tol must be positive, got {t}")));
        }
        scene.tolerance = Some(t);
    }
    Ok(scene)
}

fn quotient_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.quotient.json"))
}

fn execute(command: &Command, stdout: &mut dyn Write) -> Result<i32> {
    let common = command.common();
    let scene = load(common)?;
    let mut outcome = run_pipeline(&scene, command.pipeline())?;

    let is_check = matches!(command, Command::Check(_));
    if let Some(out) = &common.out {
        if is_check {
            std::fs::write(out, outcome.to_json())?;
            return Ok(outcome.exit_code());
        }
        if let Some(s) = outcome.scene.take() {
            std::fs::write(out, s.to_json())?;
        }
        if let Some(q) = outcome.quotient.take() {
            let path = match command {
                Command::Presymplectic { quotient: Some(p), .. } => p.clone(),
                _ => quotient_path(out),
            };
            std::fs::write(path, q.to_json())?;
        }
    } else if let (Command::Presymplectic { quotient: Some(p), .. }, Some(q)) = (command, outcome.quotient.take()) {
        std::fs::write(p, q.to_json())?;
    }

    match common.format {
        Format::Json => stdout.write_all(outcome.to_json().as_bytes())?,
        Format::Text => {
            stdout.write_all(outcome.report.to_text().as_bytes())?;
            if let Some(s) = &outcome.scene {
                stdout.write_all(b"scene:\n")?;
                stdout.write_all(s.to_json().as_bytes())?;
            }
            if let Some(q) = &outcome.quotient {
                stdout.write_all(b"quotient:\n")?;
                stdout.write_all(q.to_json().as_bytes())?;
            }
        }
    }
    Ok(outcome.exit_code())
}

/// Parse `args` (including the program name) and run; returns the exit
/// code. Errors go to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = stderr.write_all(text.as_bytes());
            } else {
                let _ = stdout.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match execute(&cli.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_INPUT
        }
    }
}
