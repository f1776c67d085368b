//! Batch front end: configuration files, built-in presets, the end-to-end
//! run (descent, time-domain check, output files) and the `ccd` commands.

mod app;
mod config;
mod output;
mod run;

use std::path::PathBuf;

use crate::discretization::{GridConfig, X0Mode};
use crate::model::{DesignObjective, DesignPoint, Weights};
use crate::optimizer::OptimizerConfig;
use crate::pdesim::SimConfig;

pub use app::{main_with_args, Cli, Command};
pub use config::{parse_config, parse_config_unchecked, render, ConfigError};
pub use output::{format_number, write_field_csv, write_summary_json, write_trace_csv, Summary};
pub use run::{check, gradcheck, resolve_grid, run_case, run_many, GradCheckRow, RunError, RunReport};

/// Reference grid search used when the grid size is `auto`.
pub const CALIBRATION_RANGE: std::ops::RangeInclusive<usize> = 20..=32;
/// Initial cost the calibrated grid should reproduce.
pub const CALIBRATION_TARGET: f64 = 276.6;

/// Grid used by the descent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridChoice {
    Fixed(usize),
    /// Sweep [`CALIBRATION_RANGE`] on the homogeneous reference start and
    /// keep the size whose initial cost is closest to [`CALIBRATION_TARGET`].
    Calibrated,
}

impl Default for GridChoice {
    fn default() -> Self {
        GridChoice::Fixed(GridConfig::default().n)
    }
}

/// Everything one run needs. The case fixes which variables move and the
/// design objective; see [`case_mask`] and [`case_objective`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    /// Output subdirectory name.
    pub name: String,
    pub case_id: u8,
    pub homogeneous: bool,
    pub p0: DesignPoint,
    pub weights: Weights,
    pub optimizer: OptimizerConfig,
    pub grid: GridChoice,
    pub sim: SimConfig,
    pub x0_mode: X0Mode,
    pub out_dir: PathBuf,
    pub emit_field: bool,
    pub emit_field_initial: bool,
}

/// Case 1 tunes only the gains; cases 2 and 3 also tune the diffusivity.
pub fn case_mask(case_id: u8) -> [bool; 4] {
    match case_id {
        1 => [false, false, true, true],
        _ => [true, false, true, true],
    }
}

pub fn case_objective(case_id: u8) -> DesignObjective {
    match case_id {
        3 => DesignObjective::SquareOfA,
        _ => DesignObjective::Zero,
    }
}

pub fn default_b(homogeneous: bool) -> f64 {
    if homogeneous {
        0.0
    } else {
        -1.0
    }
}

impl RunSpec {
    /// Defaults for a case with the grid fixed at the configuration default.
    pub fn for_case(case_id: u8, homogeneous: bool) -> Self {
        let p0 = DesignPoint::new(10.0, default_b(homogeneous), 7.0, -5.0).with_mask(case_mask(case_id));
        Self {
            name: default_name(case_id, homogeneous),
            case_id,
            homogeneous,
            p0,
            weights: Weights {
                fd: case_objective(case_id),
                ..Weights::default()
            },
            optimizer: OptimizerConfig::default(),
            grid: GridChoice::default(),
            sim: SimConfig::default(),
            x0_mode: X0Mode::default(),
            out_dir: PathBuf::from("out"),
            emit_field: false,
            emit_field_initial: false,
        }
    }
}

pub fn default_name(case_id: u8, homogeneous: bool) -> String {
    format!("case{}-{}", case_id, if homogeneous { "hom" } else { "nonhom" })
}

pub const PRESET_NAMES: [&str; 6] = [
    "case1-hom",
    "case1-nonhom",
    "case2-hom",
    "case2-nonhom",
    "case3-hom",
    "case3-nonhom",
];

/// Built-in scenario: case defaults on the calibrated grid.
pub fn preset(name: &str) -> Option<RunSpec> {
    let (case, kind) = name.strip_prefix("case")?.split_once('-')?;
    let case_id: u8 = case.parse().ok().filter(|c| (1..=3).contains(c))?;
    let homogeneous = match kind {
        "hom" => true,
        "nonhom" => false,
        _ => return None,
    };
    Some(RunSpec {
        grid: GridChoice::Calibrated,
        ..RunSpec::for_case(case_id, homogeneous)
    })
}
