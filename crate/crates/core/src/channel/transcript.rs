use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::codec::{WireKind, WireMessage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Sent,
    Received,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Sent => "sent",
            Direction::Received => "recv",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub direction: Direction,
    pub kind: WireKind,
    pub payload: Vec<u8>,
}

/// Client-side record of every message in a session.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    entries: Vec<TranscriptEntry>,
    totals: BTreeMap<WireKind, u64>,
    counts: BTreeMap<WireKind, u64>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, direction: Direction, msg: &WireMessage) {
        let payload = msg.payload();
        let kind = msg.kind();
        *self.totals.entry(kind).or_default() += payload.len() as u64;
        *self.counts.entry(kind).or_default() += 1;
        self.entries.push(TranscriptEntry {
            direction,
            kind,
            payload,
        });
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    /// Payload bytes recorded for `kind`, framing excluded.
    pub fn payload_total(&self, kind: WireKind) -> u64 {
        self.totals.get(&kind).copied().unwrap_or(0)
    }

    pub fn count(&self, kind: WireKind) -> u64 {
        self.counts.get(&kind).copied().unwrap_or(0)
    }

    pub fn payload_totals(&self) -> &BTreeMap<WireKind, u64> {
        &self.totals
    }

    pub fn append(&mut self, other: &Transcript) {
        for e in &other.entries {
            *self.totals.entry(e.kind).or_default() += e.payload.len() as u64;
            *self.counts.entry(e.kind).or_default() += 1;
            self.entries.push(e.clone());
        }
    }

    /// One line per message: direction, kind name, hex payload.
    pub fn to_log(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{} {} {}",
                e.direction.name(),
                e.kind,
                hex::encode(&e.payload)
            );
        }
        out
    }
}

/// Rows of the byte-count table, in report order.
pub const BYTE_ROWS: [(&str, WireKind); 4] = [
    ("Credential based", WireKind::CredentialLogin),
    ("Registration process", WireKind::RegistrationRequest),
    ("Login (1 Step)", WireKind::LoginRequest1),
    ("Login (2 Steps)", WireKind::LoginRequest2),
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ByteRow {
    pub label: String,
    pub total: u64,
    pub flows: u64,
}

impl ByteRow {
    /// Bytes per flow; zero when no flow ran.
    pub fn per_flow(&self) -> u64 {
        self.total.checked_div(self.flows).unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ByteTable {
    pub rows: Vec<ByteRow>,
}

impl ByteTable {
    pub fn row(&self, label: &str) -> Option<&ByteRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn per_flow(&self) -> [u64; 4] {
        std::array::from_fn(|i| self.rows[i].per_flow())
    }
}

impl fmt::Display for ByteTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<22} {:>8} {:>6} {:>9}",
            "Flow", "Bytes", "Flows", "Per flow"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<22} {:>8} {:>6} {:>9}",
                r.label,
                r.total,
                r.flows,
                r.per_flow()
            )?;
        }
        Ok(())
    }
}

/// Byte-count table over any number of transcripts. A flow is counted once
/// per request message sent.
pub fn report_bytes<'a>(transcripts: impl IntoIterator<Item = &'a Transcript>) -> ByteTable {
    let mut merged = Transcript::new();
    for t in transcripts {
        merged.append(t);
    }
    let rows = BYTE_ROWS
        .iter()
        .map(|(label, kind)| {
            let sent = merged
                .entries
                .iter()
                .filter(|e| e.direction == Direction::Sent && e.kind == *kind);
            let (total, flows) = sent.fold((0, 0), |(t, n), e| (t + e.payload.len() as u64, n + 1));
            ByteRow {
                label: label.to_string(),
                total,
                flows,
            }
        })
        .collect();
    ByteTable { rows }
}
