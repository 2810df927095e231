//! CSV serialization and atomic file writes.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiments::FigureTable;
use crate::market::ScenarioTree;
use crate::numeric::fmt_sci;
use crate::pricing::{mode_gamma, PricingSolution};
use crate::verify::VerificationReport;

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

fn to_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(&row).map_err(csv_error)?;
    }
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub const SOLUTION_COLUMNS: [&str; 13] = [
    "id",
    "parent",
    "time",
    "shocks",
    "regimes",
    "C",
    "S",
    "gamma",
    "D",
    "alpha",
    "beta",
    "Y",
    "kernel_from_parent",
];

/// One row per node. `Y` is evaluated under the risk aversion the mode uses
/// at that node; strategy columns are empty at maturity and the kernel
/// column is empty at roots.
pub fn solution_csv(tree: &ScenarioTree, solution: &PricingSolution) -> Result<Vec<u8>> {
    let lattice = tree.lattice();
    let opt = |v: Option<f64>| v.map(fmt_sci).unwrap_or_default();
    let rows = lattice.ids().map(|id| {
        let state = tree.state(id);
        let gamma = mode_gamma(tree, solution.mode(), id);
        vec![
            id.index().to_string(),
            lattice.parent(id).map(|p| p.index().to_string()).unwrap_or_default(),
            lattice.time(id).to_string(),
            tree.shock_string(id),
            tree.regime_string(id),
            fmt_sci(state.c),
            fmt_sci(state.s),
            fmt_sci(gamma),
            fmt_sci(solution.price(id)),
            opt(solution.alpha(id)),
            opt(solution.beta(id)),
            opt(solution.cert_equiv(id, gamma)),
            opt(solution.kernel(id)),
        ]
    });
    let header: Vec<String> = SOLUTION_COLUMNS.iter().map(|s| s.to_string()).collect();
    to_bytes(&header, rows)
}

pub fn figure_csv(table: &FigureTable) -> Result<Vec<u8>> {
    to_bytes(
        &table.columns,
        table.rows.iter().map(|r| r.iter().map(|v| fmt_sci(*v)).collect()),
    )
}

/// `key = value` lines recording every parameter behind a figure.
pub fn provenance_text(table: &FigureTable) -> String {
    let mut s = format!("figure = {}\n", table.name);
    for (k, v) in &table.provenance {
        s.push_str(&format!("{k} = {v}\n"));
    }
    s
}

pub fn report_csv(reports: &[VerificationReport]) -> Result<Vec<u8>> {
    let header: Vec<String> = VerificationReport::csv_header()
        .into_iter()
        .map(String::from)
        .collect();
    to_bytes(&header, reports.iter().map(|r| r.csv_row()))
}

/// Generic table with preformatted cells.
pub fn table_csv(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    to_bytes(&header, rows)
}
