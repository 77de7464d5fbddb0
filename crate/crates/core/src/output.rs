//! Result writers: CSV, JSON, gnuplot data and plain-text tables.

use std::fmt::Write as _;
use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::adaptivity::AdaptLevel;
use crate::analysis::StudyRow;
use crate::error::Result;

pub const STUDY_CSV_HEADER: &str = "level,h,rho,dofs_total,dofs_X,dofs_Y,error_L2,eoc,iterations,wall_time_s";
pub const ADAPT_CSV_HEADER: &str =
    "level,h,rho,dofs_total,dofs_X,dofs_Y,error_L2,eoc,iterations,wall_time_s,marked_count";

/// Where a result file came from.
#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub program: String,
    pub version: String,
    pub command: String,
    pub config: String,
    pub threads: usize,
    pub started_unix_s: u64,
}

impl Provenance {
    pub fn new(command: &str, config: String) -> Provenance {
        Provenance {
            program: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            threads: rayon::current_num_threads(),
            started_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:e}"))
}

pub fn write_study_csv(rows: &[StudyRow], w: &mut impl Write) -> Result<()> {
    writeln!(w, "{STUDY_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{:e},{:e},{},{},{},{:e},{},{},{:.3}",
            r.level,
            r.h,
            r.rho,
            r.dofs_total,
            r.dofs_x,
            r.dofs_y,
            r.error_l2,
            opt(r.eoc),
            r.iterations,
            r.wall_time_s
        )?;
    }
    Ok(())
}

/// Rate of an adaptive sequence measured against `N^(-1/d)`.
pub fn adapt_eoc(levels: &[AdaptLevel], dim: usize) -> Vec<Option<f64>> {
    let mut out = vec![None; levels.len()];
    for i in 1..levels.len() {
        let (a, b) = (&levels[i - 1], &levels[i]);
        let ratio = b.dofs_total as f64 / a.dofs_total as f64;
        if ratio > 1.0 && a.error_l2 > 0.0 && b.error_l2 > 0.0 {
            out[i] = Some(dim as f64 * (a.error_l2 / b.error_l2).ln() / ratio.ln());
        }
    }
    out
}

pub fn write_adapt_csv(levels: &[AdaptLevel], dim: usize, w: &mut impl Write) -> Result<()> {
    writeln!(w, "{ADAPT_CSV_HEADER}")?;
    for (l, eoc) in levels.iter().zip(adapt_eoc(levels, dim)) {
        writeln!(
            w,
            "{},{:e},{:e},{},{},{},{:e},{},{},{:.3},{}",
            l.level,
            l.h_min,
            l.rho,
            l.dofs_total,
            l.dofs_x,
            l.dofs_y,
            l.error_l2,
            opt(eoc),
            l.iterations,
            l.wall_time_s,
            l.marked_count
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct JsonDoc<'a, T: Serialize> {
    provenance: &'a Provenance,
    rows: &'a [T],
}

pub fn write_json<T: Serialize>(prov: &Provenance, rows: &[T], w: &mut impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, &JsonDoc { provenance: prov, rows })?;
    writeln!(w)?;
    Ok(())
}

/// Two columns `log10(h) log10(error)`.
pub fn write_study_gnuplot(rows: &[StudyRow], w: &mut impl Write) -> Result<()> {
    writeln!(w, "# log10(h) log10(error_L2)")?;
    for r in rows.iter().filter(|r| r.error_l2 > 0.0) {
        writeln!(w, "{:.12} {:.12}", r.h.log10(), r.error_l2.log10())?;
    }
    Ok(())
}

/// Two columns `log10(dofs) log10(error)`.
pub fn write_adapt_gnuplot(levels: &[AdaptLevel], w: &mut impl Write) -> Result<()> {
    writeln!(w, "# log10(dofs_total) log10(error_L2)")?;
    for l in levels.iter().filter(|l| l.error_l2 > 0.0) {
        writeln!(w, "{:.12} {:.12}", (l.dofs_total as f64).log10(), l.error_l2.log10())?;
    }
    Ok(())
}

/// Columns in the order `[delta] h rho error eoc`, then solver statistics.
pub fn study_table(rows: &[StudyRow]) -> String {
    let noise = rows.iter().any(|r| r.delta.is_some());
    let mut s = String::new();
    let _ = write!(s, "{:>5} ", "level");
    if noise {
        let _ = write!(s, "{:>10} ", "delta");
    }
    let _ = writeln!(
        s,
        "{:>10} {:>11} {:>12} {:>6} {:>10} {:>6} {:>9}",
        "h", "rho", "error_L2", "eoc", "dofs", "iter", "time[s]"
    );
    for r in rows {
        let eoc = r.eoc.map_or_else(|| "-".to_string(), |e| format!("{e:.2}"));
        let _ = write!(s, "{:>5} ", r.level);
        if noise {
            let _ = write!(s, "{:>10.4e} ", r.delta.unwrap_or(f64::NAN));
        }
        let _ = write!(
            s,
            "{:>10.4e} {:>11.4e} {:>12.4e} {:>6} {:>10} {:>6} {:>9.2}",
            r.h, r.rho, r.error_l2, eoc, r.dofs_total, r.iterations, r.wall_time_s
        );
        if let Some(f) = &r.failure {
            let _ = write!(s, "  FAILED: {f}");
        }
        let _ = writeln!(s);
    }
    s
}

pub fn adapt_table(levels: &[AdaptLevel], dim: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>5} {:>10} {:>10} {:>11} {:>12} {:>12} {:>6} {:>8} {:>6} {:>9}",
        "level", "simplices", "dofs", "h_min", "error_L2", "eta", "eoc", "marked", "iter", "time[s]"
    );
    for (l, eoc) in levels.iter().zip(adapt_eoc(levels, dim)) {
        let eoc = eoc.map_or_else(|| "-".to_string(), |e| format!("{e:.2}"));
        let _ = writeln!(
            s,
            "{:>5} {:>10} {:>10} {:>11.4e} {:>12.4e} {:>12.4e} {:>6} {:>8} {:>6} {:>9.2}",
            l.level,
            l.n_simplices,
            l.dofs_total,
            l.h_min,
            l.error_l2,
            l.indicator_total,
            eoc,
            l.marked_count,
            l.iterations,
            l.wall_time_s
        );
    }
    s
}
