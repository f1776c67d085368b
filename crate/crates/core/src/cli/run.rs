use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use thiserror::Error;

use super::config::render;
use super::output::{write_field_csv, write_summary_json, write_trace_csv, MarginRecord, PointRecord, Summary};
use super::{GridChoice, RunSpec, CALIBRATION_RANGE, CALIBRATION_TARGET};
use crate::discretization::{closed_loop_matrix, GridConfig, X0Mode};
use crate::error::CcdError;
use crate::lyapunov::max_real_eig;
use crate::model::{theorem1_margins, DesignPoint, FeasibilityReport, Var, Weights};
use crate::optimizer::{calibrate_grid, run_ccd, CcdObjective, CcdOutcome, GridCalibration, Objective};
use crate::pdesim::{cost_quadrature, simulate, verify_corollary2, DecayReport, FieldSolution};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{module}: {source}")]
    Module {
        module: &'static str,
        #[source]
        source: CcdError,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },

    #[error("{0}")]
    Invalid(String),
}

fn in_module(module: &'static str) -> impl FnOnce(CcdError) -> RunError {
    move |source| RunError::Module { module, source }
}

fn io_context(context: impl Into<String>) -> impl FnOnce(io::Error) -> RunError {
    let context = context.into();
    move |source| RunError::Io { context, source }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub dir: PathBuf,
    pub summary: Summary,
    pub outcome: CcdOutcome,
    pub calibration: Option<GridCalibration>,
    pub decay: DecayReport,
}

/// Grid size for the descent. Calibration always runs on the homogeneous
/// reference start with default weights, so every preset shares one grid.
pub fn resolve_grid(choice: GridChoice) -> Result<(GridConfig, Option<GridCalibration>), RunError> {
    match choice {
        GridChoice::Fixed(n) => Ok((GridConfig::new(n).map_err(in_module("discretization"))?, None)),
        GridChoice::Calibrated => {
            let reference = DesignPoint::new(10.0, 0.0, 7.0, -5.0);
            let cal = calibrate_grid(
                &reference,
                &Weights::default(),
                X0Mode::Identity,
                CALIBRATION_RANGE,
                CALIBRATION_TARGET,
            )
            .map_err(in_module("optimizer"))?;
            Ok((GridConfig { n: cal.n }, Some(cal)))
        }
    }
}

struct Evaluated {
    record: PointRecord,
    field: FieldSolution,
}

fn evaluate_point(spec: &RunSpec, p: &DesignPoint, jf: f64) -> Result<Evaluated, RunError> {
    let field = simulate(p, &spec.sim).map_err(in_module("pdesim"))?;
    let cost = cost_quadrature(&field, p, &spec.weights);
    Ok(Evaluated {
        record: PointRecord {
            a: p.a,
            b: p.b,
            k1: p.k1,
            k2: p.k2,
            jf,
            j: cost.j_total,
            j_u: cost.j_control,
            j_time_scaled: cost.j_total_time_scaled,
        },
        field,
    })
}

/// Descent, time-domain evaluation at the start and the optimum, stability
/// check, then all files written into `out/<name>` in one rename.
pub fn run_case(spec: &RunSpec) -> Result<RunReport, RunError> {
    let (grid, calibration) = resolve_grid(spec.grid)?;
    let (outcome, _) =
        run_ccd(&spec.p0, &spec.weights, &grid, spec.x0_mode, &spec.optimizer).map_err(in_module("optimizer"))?;
    let p_star = outcome.p_star;
    let initial = evaluate_point(spec, &spec.p0, outcome.trace.rows[0].jf)?;
    let optimal = evaluate_point(spec, &p_star, outcome.jf_star)?;
    let decay = verify_corollary2(&p_star, &spec.sim).map_err(in_module("pdesim"))?;

    let margins = theorem1_margins(&p_star);
    let max_re = max_real_eig(&closed_loop_matrix(&p_star, &grid)).map_err(in_module("lyapunov"))?;
    let summary = Summary {
        case_id: spec.case_id,
        homogeneous: spec.homogeneous,
        n: grid.n,
        initial: initial.record,
        optimal: optimal.record,
        margins: MarginRecord {
            m1: margins.m1,
            m2: margins.m2,
            m3: margins.m3,
            max_re_eig: max_re,
        },
        status: outcome.trace.status.to_string(),
        iterations: outcome.trace.iterations(),
        corollary2_ok: decay.ok,
    };

    let dir = publish(&spec.out_dir, &spec.name, |tmp| {
        write_file(&tmp.join("trace.csv"), |w| write_trace_csv(w, &outcome.trace))?;
        write_file(&tmp.join("summary.json"), |w| write_summary_json(w, &summary))?;
        write_file(&tmp.join("run.cfg"), |w| w.write_all(render(spec).as_bytes()))?;
        if spec.emit_field {
            write_file(&tmp.join("field.csv"), |w| write_field_csv(w, &optimal.field))?;
        }
        if spec.emit_field_initial {
            write_file(&tmp.join("field_initial.csv"), |w| write_field_csv(w, &initial.field))?;
        }
        Ok(())
    })?;

    Ok(RunReport {
        dir,
        summary,
        outcome,
        calibration,
        decay,
    })
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), RunError> {
    let ctx = || format!("writing {}", path.display());
    let file = File::create(path).map_err(io_context(ctx()))?;
    let mut w = BufWriter::new(file);
    body(&mut w).map_err(io_context(ctx()))?;
    w.into_inner()
        .map_err(|e| RunError::Io {
            context: ctx(),
            source: e.into_error(),
        })?
        .sync_all()
        .map_err(io_context(ctx()))
}

/// Fills a hidden staging directory inside `out`, then renames it to
/// `out/name`. A failure at any point leaves no partial output behind.
fn publish(
    out: &Path,
    name: &str,
    fill: impl FnOnce(&Path) -> Result<(), RunError>,
) -> Result<PathBuf, RunError> {
    fs::create_dir_all(out).map_err(io_context(format!("creating {}", out.display())))?;
    let staging = tempfile::Builder::new()
        .prefix(&format!(".{name}-"))
        .tempdir_in(out)
        .map_err(io_context(format!("creating a staging directory in {}", out.display())))?;
    fill(staging.path())?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(staging.path(), fs::Permissions::from_mode(0o755))
            .map_err(io_context(format!("setting permissions on {}", staging.path().display())))?;
    }

    let target = out.join(name);
    let displaced = if target.exists() {
        if !target.is_dir() {
            return Err(RunError::Invalid(format!("{} exists and is not a directory", target.display())));
        }
        let old = tempfile::Builder::new()
            .prefix(&format!(".{name}-old-"))
            .tempdir_in(out)
            .map_err(io_context(format!("creating a staging directory in {}", out.display())))?;
        let old_path = old.path().join("prev");
        fs::rename(&target, &old_path).map_err(io_context(format!("moving aside {}", target.display())))?;
        Some((old, old_path))
    } else {
        None
    };
    if let Err(e) = fs::rename(staging.path(), &target) {
        if let Some((_, old_path)) = &displaced {
            let _ = fs::rename(old_path, &target);
        }
        return Err(RunError::Io {
            context: format!("renaming output into {}", target.display()),
            source: e,
        });
    }
    let _ = staging.keep();
    Ok(target)
}

/// Runs independent specs on up to `jobs` threads; results keep input order.
pub fn run_many(specs: &[RunSpec], jobs: usize) -> Vec<Result<RunReport, RunError>> {
    let mut seen = std::collections::BTreeSet::new();
    for s in specs {
        if !seen.insert(s.out_dir.join(&s.name)) {
            let msg = format!("two runs share the output directory {}", s.out_dir.join(&s.name).display());
            return specs.iter().map(|_| Err(RunError::Invalid(msg.clone()))).collect();
        }
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunReport, RunError>>>> =
        Mutex::new((0..specs.len()).map(|_| None).collect());
    let workers = jobs.clamp(1, specs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(spec) = specs.get(i) else { break };
                let r = run_case(spec);
                results.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .unwrap_or_else(|e| e.into_inner())
        .into_iter()
        .map(|r| r.expect("every index is claimed by exactly one worker"))
        .collect()
}

/// Margins and closed-loop spectrum at the initial point.
pub fn check(spec: &RunSpec) -> Result<(GridConfig, FeasibilityReport, f64), RunError> {
    let (grid, _) = resolve_grid(spec.grid)?;
    let obj = CcdObjective::new(spec.weights, grid, spec.x0_mode);
    let (report, max_re) = obj.feasibility(&spec.p0).map_err(in_module("lyapunov"))?;
    Ok((grid, report, max_re))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckRow {
    pub var: Var,
    pub analytic: f64,
    pub finite_diff: f64,
    pub step: f64,
    pub ok: bool,
}

/// Relative and absolute floors for agreement with finite differences.
pub const GRADCHECK_REL: f64 = 1e-5;
pub const GRADCHECK_ABS: f64 = 1e-8;

/// Analytic gradient against central differences at the initial point,
/// one row per free variable.
pub fn gradcheck(spec: &RunSpec) -> Result<(GridConfig, Vec<GradCheckRow>), RunError> {
    let (grid, _) = resolve_grid(spec.grid)?;
    let mut obj = CcdObjective::new(spec.weights, grid, spec.x0_mode);
    let (report, _) = obj.feasibility(&spec.p0).map_err(in_module("lyapunov"))?;
    if !report.in_d {
        return Err(RunError::Module {
            module: "optimizer",
            source: CcdError::Infeasible(report.violations().join("; ")),
        });
    }
    let (_, g) = obj.cost_and_gradient(&spec.p0).map_err(in_module("sensitivity"))?;
    let mut rows = Vec::new();
    for var in Var::ALL {
        if !spec.p0.is_free(var) {
            continue;
        }
        let h = 1e-5 * spec.p0.get(var).abs().max(1.0);
        let shifted = |delta: f64| {
            let mut v = spec.p0.to_array();
            v[var as usize] += delta;
            spec.p0.from_array(v)
        };
        let mut cost = |delta: f64| -> Result<f64, RunError> {
            obj.trial_cost(&shifted(delta))
                .map_err(in_module("lyapunov"))?
                .ok_or_else(|| {
                    RunError::Invalid(format!("finite-difference probe for {} leaves the feasible set", var.name()))
                })
        };
        let fd = (cost(h)? - cost(-h)?) / (2.0 * h);
        let analytic = g.g[var as usize];
        let ok = (analytic - fd).abs() <= (GRADCHECK_REL * analytic.abs()).max(GRADCHECK_ABS);
        rows.push(GradCheckRow {
            var,
            analytic,
            finite_diff: fd,
            step: h,
            ok,
        });
    }
    Ok((grid, rows))
}
