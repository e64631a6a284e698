//! Pay-per-use metering and invoices.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::auth::Principal;

#[derive(Debug, Error)]
pub enum BillingError {
    #[error("unknown operation kind {0:?}")]
    UnknownOpKind(String),
    #[error("ledger io: {0}")]
    Io(#[from] std::io::Error),
    #[error("ledger line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
}

/// Fee units per operation kind. Bulk verification is charged per record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeeSchedule(pub BTreeMap<String, u64>);

impl Default for FeeSchedule {
    fn default() -> Self {
        FeeSchedule(
            [("verify", 2), ("bulk_verify", 1), ("registration", 10), ("update", 5), ("owner_lookup", 0)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        )
    }
}

impl FeeSchedule {
    pub fn fee(&self, op_kind: &str) -> Result<u64, BillingError> {
        self.0.get(op_kind).copied().ok_or_else(|| BillingError::UnknownOpKind(op_kind.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    /// `Principal::key()` of the account, e.g. `corporate:acme`.
    pub account: String,
    pub op_kind: String,
    pub timestamp: u64,
    pub fee_units: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Invoice {
    pub account: String,
    pub from: u64,
    pub to: u64,
    pub total_units: u64,
    pub lines: u64,
}

/// Append-only usage ledger, optionally mirrored to a JSONL file.
#[derive(Debug, Default)]
pub struct UsageLedger {
    schedule: FeeSchedule,
    entries: Vec<LedgerEntry>,
    path: Option<PathBuf>,
}

impl UsageLedger {
    pub fn new(schedule: FeeSchedule) -> Self {
        UsageLedger { schedule, entries: Vec::new(), path: None }
    }

    /// Loads existing entries from `path` and appends new ones to it.
    pub fn open(path: impl AsRef<Path>, schedule: FeeSchedule) -> Result<Self, BillingError> {
        let path = path.as_ref().to_path_buf();
        let mut entries = Vec::new();
        if path.exists() {
            for (i, line) in BufReader::new(File::open(&path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry = serde_json::from_str(&line)
                    .map_err(|e| BillingError::Corrupt { line: i + 1, reason: e.to_string() })?;
                entries.push(entry);
            }
        }
        Ok(UsageLedger { schedule, entries, path: Some(path) })
    }

    pub fn schedule(&self) -> &FeeSchedule {
        &self.schedule
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    /// Meters one operation. Only corporate accounts are charged; other
    /// principals get a zero-fee line. `records` multiplies the fee (bulk
    /// verification).
    pub fn record_usage(
        &mut self,
        principal: &Principal,
        op_kind: &str,
        records: u64,
        timestamp: u64,
    ) -> Result<LedgerEntry, BillingError> {
        let fee = self.schedule.fee(op_kind)?;
        let fee_units = match principal {
            Principal::Corporate(_) => fee * records,
            _ => 0,
        };
        let entry = LedgerEntry { account: principal.key(), op_kind: op_kind.to_string(), timestamp, fee_units };
        self.push(entry.clone())?;
        Ok(entry)
    }

    /// Appends a pre-built entry (used for replay and tests).
    pub fn push(&mut self, entry: LedgerEntry) -> Result<(), BillingError> {
        if let Some(path) = &self.path {
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            let mut line = serde_json::to_string(&entry).expect("ledger entry serializes");
            line.push('\n');
            f.write_all(line.as_bytes())?;
        }
        self.entries.push(entry);
        Ok(())
    }

    /// Sum over entries of `account` with `from <= timestamp < to`.
    pub fn invoice(&self, account: &str, from: u64, to: u64) -> Invoice {
        let (total_units, lines) = self
            .entries
            .iter()
            .filter(|e| e.account == account && e.timestamp >= from && e.timestamp < to)
            .fold((0u64, 0u64), |(sum, n), e| (sum + e.fee_units, n + 1));
        Invoice { account: account.to_string(), from, to, total_units, lines }
    }
}
