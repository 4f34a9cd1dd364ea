//! CSV and plain-text renderings of a run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::galerkin::RunReport;

pub const CSV_HEADER: &str = "iteration,width,eta,cond,err_l2,err_energy,l2_indicator,epochs";
pub const EPOCH_CSV_HEADER: &str = "iteration,epoch,eta,grad_inf,loss";

fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.10e}")
    }
}

/// One row per outer iteration.
pub fn iterations_csv(report: &RunReport) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.iteration,
            r.width,
            num(r.eta),
            num(r.cond),
            num(r.err_l2),
            num(r.err_energy),
            num(r.l2_indicator),
            r.epochs
        );
    }
    s
}

/// Training trace: one row per epoch of every outer iteration.
pub fn epochs_csv(report: &RunReport) -> String {
    let mut s = String::from(EPOCH_CSV_HEADER);
    s.push('\n');
    for e in &report.epochs {
        let _ = writeln!(s, "{},{},{},{},{}", e.iteration, e.epoch, num(e.eta), num(e.grad_inf), num(e.loss));
    }
    s
}

/// Condition-number table (iteration row over cond row) followed by the
/// final errors.
pub fn summary(report: &RunReport) -> String {
    let rows: Vec<_> = report.rows.iter().filter(|r| !r.cond.is_nan()).collect();
    let mut head = String::from("j           ");
    let mut cond = String::from("cond(K^(j)) ");
    for r in &rows {
        let _ = write!(head, "{:>7}", r.iteration);
        let _ = write!(cond, "{:>7.2}", r.cond);
    }
    let mut s = format!("problem: {}\nstatus: {}\n\n{head}\n{cond}\n\n", report.problem, report.status.as_str());
    let _ = writeln!(s, "final L2 error:            {:.3e}", report.final_err_l2);
    let _ = writeln!(s, "final relative L2 error:   {:.3e}", report.relative_l2());
    let _ = writeln!(s, "final energy error:        {:.3e}", report.final_err_energy);
    if let Some(last) = report.rows.last() {
        let _ = writeln!(s, "last eta:                  {:.3e}", last.eta);
    }
    s
}

/// Writes `<prefix>.csv`, `<prefix>_epochs.csv` and `<prefix>_summary.txt`.
pub fn write_outputs(report: &RunReport, prefix: &Path) -> Result<Vec<PathBuf>> {
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let with = |suffix: &str| {
        let mut p = prefix.as_os_str().to_owned();
        p.push(suffix);
        PathBuf::from(p)
    };
    let files = [
        (with(".csv"), iterations_csv(report)),
        (with("_epochs.csv"), epochs_csv(report)),
        (with("_summary.txt"), summary(report)),
    ];
    let mut out = Vec::new();
    for (path, body) in files {
        std::fs::write(&path, body)?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::{EpochRow, GalerkinState, IterationRow, RunStatus};

    fn report() -> RunReport {
        let row = |i: usize, cond: f64| IterationRow {
            iteration: i,
            width: 2 * i + 1,
            eta: 0.5 / i as f64,
            cond,
            err_l2: 0.1,
            err_energy: 1.0 / i as f64,
            l2_indicator: 0.05,
            epochs: 3,
        };
        RunReport {
            problem: "waveguide2d".into(),
            rows: vec![row(1, 1.0), row(2, 1.004), row(3, f64::NAN)],
            epochs: vec![EpochRow { iteration: 1, epoch: 0, eta: 0.5, grad_inf: 1e-3, loss: 2.0 }],
            status: RunStatus::Converged,
            final_err_l2: 1e-3,
            final_err_energy: 0.25,
            exact_l2: 0.5,
            exact_energy: 2.0,
            state: GalerkinState::new(),
        }
    }

    #[test]
    fn csv_layout() {
        let csv = iterations_csv(&report());
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("1,3,5.0000000000e-1,1.0000000000e0,"));
        assert!(lines[3].contains(",nan,"));
        assert_eq!(lines[2].split(',').count(), 8);
        let ep = epochs_csv(&report());
        assert_eq!(ep.lines().nth(1).unwrap(), "1,0,5.0000000000e-1,1.0000000000e-3,2.0000000000e0");
    }

    #[test]
    fn summary_has_iteration_and_cond_rows() {
        let s = summary(&report());
        let head = s.lines().find(|l| l.starts_with("j ")).unwrap();
        let cond = s.lines().find(|l| l.starts_with("cond(K^(j))")).unwrap();
        assert_eq!(head.split_whitespace().skip(1).collect::<Vec<_>>(), ["1", "2"]);
        assert_eq!(cond.split_whitespace().skip(1).collect::<Vec<_>>(), ["1.00", "1.00"]);
        assert!(s.contains("status: converged"));
    }

    #[test]
    fn outputs_written() {
        let dir = tempfile::tempdir().unwrap();
        let files = write_outputs(&report(), &dir.path().join("sub/run")).unwrap();
        assert_eq!(files.len(), 3);
        let csv = std::fs::read_to_string(&files[0]).unwrap();
        assert_eq!(csv, iterations_csv(&report()));
        assert!(files[2].ends_with("run_summary.txt"));
    }
}
