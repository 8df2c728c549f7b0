//! Byte-count and operation-count tables, set against the published values.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::scenario::{FlowKind, FlowRecord};
use crate::channel::ByteTable;

/// Published bytes per flow, in [`crate::channel::BYTE_ROWS`] order.
pub const PUBLISHED_BYTES: [u64; 4] = [44, 84, 40, 84];

/// Published operation counts: (operation, login range, registration).
pub const PUBLISHED_OPERATIONS: [(&str, (u32, u32), u32); 5] = [
    ("Sealing", (0, 0), 2),
    ("Hashing", (1, 1), 1),
    ("Unsealing", (1, 2), 0),
    ("AIK Generation", (1, 1), 1),
    ("Extend PCR", (3, 3), 3),
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReportError {
    #[error("no scenario data recorded")]
    NoData,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellStatus {
    Match,
    Mismatch,
    NoData,
}

impl fmt::Display for CellStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellStatus::Match => "match",
            CellStatus::Mismatch => "MISMATCH",
            CellStatus::NoData => "no data",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub measured: String,
    pub published: String,
    pub status: CellStatus,
}

impl Cell {
    /// Observed values against an inclusive published range.
    fn compare(observed: &BTreeSet<u64>, range: (u64, u64)) -> Self {
        let published_text = range_text(range.0, range.1);
        let (Some(&lo), Some(&hi)) = (observed.first(), observed.last()) else {
            return Cell {
                measured: "-".into(),
                published: published_text,
                status: CellStatus::NoData,
            };
        };
        let status = if observed.iter().all(|v| (range.0..=range.1).contains(v)) {
            CellStatus::Match
        } else {
            CellStatus::Mismatch
        };
        Cell {
            measured: range_text(lo, hi),
            published: published_text,
            status,
        }
    }
}

fn range_text(lo: u64, hi: u64) -> String {
    if lo == hi {
        lo.to_string()
    } else {
        format!("{lo}-{hi}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ByteReportRow {
    pub flow: String,
    pub cell: Cell,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpReportRow {
    pub operation: String,
    pub login: Cell,
    pub registration: Cell,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tables {
    pub bytes: Vec<ByteReportRow>,
    pub operations: Vec<OpReportRow>,
}

impl Tables {
    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.bytes.iter().map(|r| &r.cell).chain(
            self.operations
                .iter()
                .flat_map(|r| [&r.login, &r.registration]),
        )
    }

    pub fn all_match(&self) -> bool {
        self.cells().all(|c| c.status == CellStatus::Match)
    }
}

pub fn report_tables(flows: &[FlowRecord], bytes: &ByteTable) -> Result<Tables, ReportError> {
    if flows.is_empty() && bytes.rows.iter().all(|r| r.flows == 0) {
        return Err(ReportError::NoData);
    }
    let byte_rows = bytes
        .rows
        .iter()
        .zip(PUBLISHED_BYTES)
        .map(|(row, published)| {
            let observed: BTreeSet<u64> = (row.flows > 0)
                .then(|| row.per_flow())
                .into_iter()
                .collect();
            ByteReportRow {
                flow: row.label.clone(),
                cell: Cell::compare(&observed, (published, published)),
            }
        })
        .collect();

    let column = |login: bool, i: usize| -> BTreeSet<u64> {
        flows
            .iter()
            .filter(|f| (f.kind == FlowKind::Registration) != login)
            .map(|f| {
                let t = f.counters.as_tuple();
                u64::from([t.0, t.1, t.2, t.3, t.4][i])
            })
            .collect()
    };
    let operations = PUBLISHED_OPERATIONS
        .iter()
        .enumerate()
        .map(|(i, (name, login, reg))| OpReportRow {
            operation: name.to_string(),
            login: Cell::compare(&column(true, i), (u64::from(login.0), u64::from(login.1))),
            registration: Cell::compare(&column(false, i), (u64::from(*reg), u64::from(*reg))),
        })
        .collect();
    Ok(Tables {
        bytes: byte_rows,
        operations,
    })
}

impl fmt::Display for Tables {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Bytes per flow")?;
        writeln!(
            f,
            "{:<22} {:>8} {:>9}  Status",
            "Flow", "Measured", "Published"
        )?;
        for r in &self.bytes {
            writeln!(
                f,
                "{:<22} {:>8} {:>9}  {}",
                r.flow, r.cell.measured, r.cell.published, r.cell.status
            )?;
        }
        writeln!(f)?;
        writeln!(f, "TPM operations per flow")?;
        writeln!(
            f,
            "{:<16} {:>6} {:>9}  {:<8}  {:>12} {:>9}  Status",
            "Operation", "Login", "Published", "Status", "Registration", "Published"
        )?;
        for r in &self.operations {
            writeln!(
                f,
                "{:<16} {:>6} {:>9}  {:<8}  {:>12} {:>9}  {}",
                r.operation,
                r.login.measured,
                r.login.published,
                r.login.status.to_string(),
                r.registration.measured,
                r.registration.published,
                r.registration.status
            )?;
        }
        Ok(())
    }
}
