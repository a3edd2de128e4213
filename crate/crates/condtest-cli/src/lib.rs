//! Output encodings for the `condtest` command.

use std::io::{Read, Write};

use condtest::harness::{SweepReport, TrialRecord};
use condtest::oracle::QueryLedger;
use condtest::Verdict;
use serde::{Deserialize, Serialize};

pub const CSV_HEADER: [&str; 10] = [
    "trial", "seed", "verdict", "estimate", "samp", "cond", "pcond", "icond", "total", "millis",
];

/// One CSV line. `verdict` is `accept`, `reject`, `error:<kind>`, or empty for estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub trial: u64,
    pub seed: u64,
    pub verdict: String,
    pub estimate: Option<f64>,
    pub samp: u64,
    pub cond: u64,
    pub pcond: u64,
    pub icond: u64,
    pub total: u64,
    pub millis: f64,
}

impl From<&TrialRecord> for CsvRow {
    fn from(r: &TrialRecord) -> Self {
        let verdict = match (&r.verdict, &r.error) {
            (_, Some(kind)) => format!("error:{kind}"),
            (Some(Verdict::Accept), None) => "accept".into(),
            (Some(Verdict::Reject), None) => "reject".into(),
            (None, None) => String::new(),
        };
        CsvRow {
            trial: r.trial,
            seed: r.seed,
            verdict,
            estimate: r.estimate,
            samp: r.ledger.samp,
            cond: r.ledger.cond,
            pcond: r.ledger.pcond,
            icond: r.ledger.icond,
            total: r.ledger.total,
            millis: r.millis,
        }
    }
}

impl TryFrom<CsvRow> for TrialRecord {
    type Error = String;

    fn try_from(row: CsvRow) -> Result<Self, String> {
        let (verdict, error) = match row.verdict.as_str() {
            "accept" => (Some(Verdict::Accept), None),
            "reject" => (Some(Verdict::Reject), None),
            "" => (None, None),
            other => match other.strip_prefix("error:") {
                Some(kind) => (None, Some(kind.to_string())),
                None => return Err(format!("unknown verdict {other:?}")),
            },
        };
        Ok(TrialRecord {
            trial: row.trial,
            seed: row.seed,
            verdict,
            estimate: row.estimate,
            error,
            ledger: QueryLedger {
                samp: row.samp,
                cond: row.cond,
                pcond: row.pcond,
                icond: row.icond,
                total: row.total,
            },
            millis: row.millis,
        })
    }
}

pub fn write_records_csv<W: Write>(out: W, records: &[TrialRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(CsvRow::from(r))?;
    }
    if records.is_empty() {
        w.write_record(CSV_HEADER)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<TrialRecord>, String> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(str::to_string)
        .collect();
    if header != CSV_HEADER {
        return Err(format!("unexpected header {header:?}"));
    }
    rdr.deserialize::<CsvRow>()
        .map(|row| {
            row.map_err(|e| e.to_string())
                .and_then(TrialRecord::try_from)
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(out: W, sweep: &SweepReport) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in &sweep.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
