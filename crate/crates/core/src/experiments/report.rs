//! Gates, named fits and the CSV/text artifacts of a study.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::fit::LineFit;
use super::pipeline::ErrorSeries;
use crate::error::Result;

/// One pass/fail check. Gates with `enforced == false` are reported only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub enforced: bool,
    pub detail: String,
}

impl Gate {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Gate {
            name: name.to_string(),
            passed,
            enforced: true,
            detail: detail.into(),
        }
    }

    pub fn informational(mut self) -> Self {
        self.enforced = false;
        self
    }

    pub fn failed(&self) -> bool {
        self.enforced && !self.passed
    }

    pub fn line(&self) -> String {
        let tag = match (self.passed, self.enforced) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "WARN",
        };
        format!("{tag} {}: {}", self.name, self.detail)
    }
}

pub fn all_passed(gates: &[Gate]) -> bool {
    gates.iter().all(|g| !g.failed())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedFit {
    pub quantity: String,
    pub fit: LineFit,
}

impl NamedFit {
    pub fn new(quantity: &str, fit: LineFit) -> Self {
        NamedFit {
            quantity: quantity.to_string(),
            fit,
        }
    }
}

/// Seventeen significant digits, enough to round-trip an `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub const SERIES_HEADER: &str =
    "t,w_l2,w_heps1,theta_l2,theta_heps1,theta_l4_scaled,g_heps1,minus_mass,mass_drift";

/// One row per snapshot; correction columns are empty when not computed.
pub fn write_series_csv<W: Write>(mut w: W, s: &ErrorSeries) -> Result<()> {
    writeln!(w, "# eps={} dt={} points={:?}", fmt_f64(s.eps), fmt_f64(s.dt), s.grid_points)?;
    writeln!(w, "{SERIES_HEADER}")?;
    let opt = |v: &[f64], k: usize| v.get(k).map(|x| fmt_f64(*x)).unwrap_or_default();
    for k in 0..s.t.len() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            fmt_f64(s.t[k]),
            fmt_f64(s.w_l2[k]),
            fmt_f64(s.w_heps1[k]),
            opt(&s.theta_l2, k),
            opt(&s.theta_heps1, k),
            opt(&s.theta_l4_scaled, k),
            opt(&s.g_heps1, k),
            fmt_f64(s.minus_mass[k]),
            fmt_f64(s.mass_drift[k]),
        )?;
    }
    Ok(())
}

pub const FITS_HEADER: &str = "quantity,slope,intercept,residual,r_squared,points";

pub fn write_fits_csv<W: Write>(mut w: W, fits: &[NamedFit]) -> Result<()> {
    writeln!(w, "{FITS_HEADER}")?;
    for f in fits {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            f.quantity,
            fmt_f64(f.fit.slope),
            fmt_f64(f.fit.intercept),
            fmt_f64(f.fit.residual),
            fmt_f64(f.fit.r_squared),
            f.fit.points
        )?;
    }
    Ok(())
}

/// Gate lines followed by free-form notes.
pub fn write_report<W: Write>(mut w: W, title: &str, gates: &[Gate], notes: &[String]) -> Result<()> {
    writeln!(w, "{title}")?;
    for g in gates {
        writeln!(w, "{}", g.line())?;
    }
    for n in notes {
        writeln!(w, "{n}")?;
    }
    writeln!(w, "{}", if all_passed(gates) { "RESULT PASS" } else { "RESULT FAIL" })?;
    Ok(())
}

/// Everything a study leaves on disk.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub title: String,
    pub series: Vec<ErrorSeries>,
    pub fits: Vec<NamedFit>,
    pub gates: Vec<Gate>,
    pub notes: Vec<String>,
    /// Extra CSV files as `(file name, contents)`.
    pub tables: Vec<(String, String)>,
}

impl Artifacts {
    pub fn passed(&self) -> bool {
        all_passed(&self.gates)
    }

    pub fn failures(&self) -> Vec<&Gate> {
        self.gates.iter().filter(|g| g.failed()).collect()
    }

    /// Writes `series_eps_<k>.csv` (k is the ladder index), `fits.csv`,
    /// `report.txt` and any extra tables into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (k, s) in self.series.iter().enumerate() {
            let f = BufWriter::new(File::create(dir.join(format!("series_eps_{k}.csv")))?);
            write_series_csv(f, s)?;
        }
        write_fits_csv(BufWriter::new(File::create(dir.join("fits.csv"))?), &self.fits)?;
        write_report(
            BufWriter::new(File::create(dir.join("report.txt"))?),
            &self.title,
            &self.gates,
            &self.notes,
        )?;
        for (name, body) in &self.tables {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}
