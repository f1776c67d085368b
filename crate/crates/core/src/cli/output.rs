//! Run artifacts. Every float is printed with 17 significant digits so
//! identical runs produce identical bytes.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::value::RawValue;

use crate::optimizer::IterateTrace;
use crate::pdesim::FieldSolution;

/// Scientific notation with 17 significant digits; non-finite values print
/// as `NaN`, `inf` or `-inf`.
pub fn format_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn json_number(v: f64) -> Box<RawValue> {
    let text = if v.is_finite() { format_number(v) } else { "null".to_string() };
    RawValue::from_string(text).expect("formatted float is valid JSON")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointRecord {
    pub a: f64,
    pub b: f64,
    pub k1: f64,
    pub k2: f64,
    pub jf: f64,
    /// Double integral plus the design term.
    pub j: f64,
    /// Double integral only.
    pub j_u: f64,
    /// Double integral plus the design term integrated over the horizon.
    pub j_time_scaled: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginRecord {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub max_re_eig: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub case_id: u8,
    pub homogeneous: bool,
    pub n: usize,
    pub initial: PointRecord,
    pub optimal: PointRecord,
    pub margins: MarginRecord,
    pub status: String,
    pub iterations: usize,
    pub corollary2_ok: bool,
}

#[derive(Serialize)]
struct PointJson {
    a: Box<RawValue>,
    b: Box<RawValue>,
    k1: Box<RawValue>,
    k2: Box<RawValue>,
    #[serde(rename = "Jf")]
    jf: Box<RawValue>,
    #[serde(rename = "J")]
    j: Box<RawValue>,
    #[serde(rename = "J_u")]
    j_u: Box<RawValue>,
    #[serde(rename = "J_time_scaled")]
    j_time_scaled: Box<RawValue>,
}

impl From<&PointRecord> for PointJson {
    fn from(p: &PointRecord) -> Self {
        Self {
            a: json_number(p.a),
            b: json_number(p.b),
            k1: json_number(p.k1),
            k2: json_number(p.k2),
            jf: json_number(p.jf),
            j: json_number(p.j),
            j_u: json_number(p.j_u),
            j_time_scaled: json_number(p.j_time_scaled),
        }
    }
}

#[derive(Serialize)]
struct MarginJson {
    m1: Box<RawValue>,
    m2: Box<RawValue>,
    m3: Box<RawValue>,
    max_re_eig: Box<RawValue>,
}

#[derive(Serialize)]
struct SummaryJson<'a> {
    case: u8,
    homogeneous: bool,
    #[serde(rename = "N")]
    n: usize,
    initial: PointJson,
    optimal: PointJson,
    margins: MarginJson,
    status: &'a str,
    iterations: usize,
    corollary2_ok: bool,
}

pub fn write_summary_json<W: Write>(mut w: W, s: &Summary) -> io::Result<()> {
    let doc = SummaryJson {
        case: s.case_id,
        homogeneous: s.homogeneous,
        n: s.n,
        initial: (&s.initial).into(),
        optimal: (&s.optimal).into(),
        margins: MarginJson {
            m1: json_number(s.margins.m1),
            m2: json_number(s.margins.m2),
            m3: json_number(s.margins.m3),
            max_re_eig: json_number(s.margins.max_re_eig),
        },
        status: &s.status,
        iterations: s.iterations,
        corollary2_ok: s.corollary2_ok,
    };
    serde_json::to_writer_pretty(&mut w, &doc)?;
    w.write_all(b"\n")
}

pub fn write_trace_csv<W: Write>(mut w: W, trace: &IterateTrace) -> io::Result<()> {
    w.write_all(b"iter,a,b,k1,k2,Jf,grad_norm,step,backtracks\n")?;
    for r in &trace.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.iter,
            format_number(r.a),
            format_number(r.b),
            format_number(r.k1),
            format_number(r.k2),
            format_number(r.jf),
            format_number(r.grad_norm),
            format_number(r.step),
            r.backtracks
        )?;
    }
    Ok(())
}

/// Header `t,ξ_0,…,ξ_{N-1}`, then one row per time slice.
pub fn write_field_csv<W: Write>(mut w: W, sol: &FieldSolution) -> io::Result<()> {
    w.write_all(b"t")?;
    for xi in &sol.xi {
        write!(w, ",{}", format_number(*xi))?;
    }
    w.write_all(b"\n")?;
    for (j, t) in sol.times.iter().enumerate() {
        w.write_all(format_number(*t).as_bytes())?;
        for v in sol.field.column(j).iter() {
            write!(w, ",{}", format_number(*v))?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}
