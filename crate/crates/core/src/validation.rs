//! Model-versus-measurement comparison of cascaded path powers.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::Serialize;

use crate::cascade::{delta_p, power_cascade_db};
use crate::error::{Error, Result};
use crate::tables::{fmt_db, MeasuredTables};
use crate::units::Db;

pub const VALIDATION_COLUMNS: [&str; 8] = [
    "label",
    "p_n1_db",
    "p_n2_db",
    "f_ris_db",
    "p_conv_db",
    "p_measured_db",
    "p_no_ris_db",
    "delta_p_db",
];

/// RIS-Rx labels whose powers the published comparison table attributes to
/// each other's rows.
pub const PRINTED_SWAP: (&str, &str) = ("C", "D");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationRecord {
    pub label: String,
    pub p_n1: Db,
    pub p_n2: Db,
    pub f_ris: Db,
    pub p_conv: Db,
    pub p_measured: Db,
    pub p_no_ris: Option<Db>,
    pub delta_p: Db,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationOptions {
    /// Pair the C and D rows the way the published comparison does.
    pub table_iv_as_printed: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            table_iv_as_printed: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extreme {
    pub label: String,
    pub delta_p_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub records: Vec<ValidationRecord>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    /// Record with the largest |ΔP|; the first one wins ties.
    pub fn max_abs_delta(&self) -> Option<Extreme> {
        self.extreme(|a, b| a > b)
    }

    pub fn min_abs_delta(&self) -> Option<Extreme> {
        self.extreme(|a, b| a < b)
    }

    fn extreme(&self, better: impl Fn(f64, f64) -> bool) -> Option<Extreme> {
        let mut best: Option<&ValidationRecord> = None;
        for r in &self.records {
            if best.is_none_or(|b| better(r.delta_p.value().abs(), b.delta_p.value().abs())) {
                best = Some(r);
            }
        }
        best.map(|r| Extreme {
            label: r.label.clone(),
            delta_p_db: r.delta_p.value(),
        })
    }

    /// Fails with [`Error::Tolerance`] when any |ΔP| exceeds `tolerance_db`.
    pub fn check_tolerance(&self, tolerance_db: f64) -> Result<()> {
        if let Some(m) = self.max_abs_delta() {
            if m.delta_p_db.abs() > tolerance_db {
                return Err(Error::Tolerance {
                    max_abs_delta: m.delta_p_db.abs(),
                    tolerance: tolerance_db,
                });
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(VALIDATION_COLUMNS)?;
        for r in &self.records {
            wr.write_record([
                r.label.clone(),
                fmt_db(r.p_n1),
                fmt_db(r.p_n2),
                fmt_db(r.f_ris),
                fmt_db(r.p_conv),
                fmt_db(r.p_measured),
                r.p_no_ris.map(fmt_db).unwrap_or_default(),
                fmt_db(r.delta_p),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Text summary: warnings, then the extreme |ΔP| rows.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for w in &self.warnings {
            s.push_str(&format!("warning: {w}\n"));
        }
        if let (Some(max), Some(min)) = (self.max_abs_delta(), self.min_abs_delta()) {
            s.push_str(&format!(
                "max |dP| = {:.2} dB ({})\n",
                max.delta_p_db.abs(),
                max.label
            ));
            s.push_str(&format!(
                "min |dP| = {:.2} dB ({})\n",
                min.delta_p_db.abs(),
                min.label
            ));
        }
        s
    }
}

/// Reads a CSV produced by [`ValidationReport::write_csv`] back into records.
pub fn read_validation_csv<R: Read>(r: R, file: &str) -> Result<Vec<ValidationRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    let headers: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
    if headers != VALIDATION_COLUMNS {
        return Err(Error::Schema {
            file: file.into(),
            message: format!("expected header {}", VALIDATION_COLUMNS.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let num = |j: usize| -> Result<Db> {
            rec[j]
                .parse::<f64>()
                .ok()
                .and_then(|v| Db::try_new(v).ok())
                .ok_or_else(|| Error::Parse {
                    file: file.into(),
                    line: i + 2,
                    message: format!(
                        "`{}` is not a power in column `{}`",
                        &rec[j], VALIDATION_COLUMNS[j]
                    ),
                })
        };
        out.push(ValidationRecord {
            label: rec[0].to_owned(),
            p_n1: num(1)?,
            p_n2: num(2)?,
            f_ris: num(3)?,
            p_conv: num(4)?,
            p_measured: num(5)?,
            p_no_ris: if rec[6].is_empty() {
                None
            } else {
                Some(num(6)?)
            },
            delta_p: num(7)?,
        });
    }
    Ok(out)
}

/// Recomputes the cascaded power and ΔP of every (Tx-RIS, RIS-Rx) pair.
///
/// Pairs are ordered by RIS-Rx path, then Tx-RIS path, and labeled
/// `<n1>-<n2>`. Every pair needs an F_RIS value and a measured power; extra
/// labels in either file are rejected.
pub fn build_validation_table(
    tables: &MeasuredTables,
    opts: &ValidationOptions,
) -> Result<ValidationReport> {
    let n1_labels = tables.tx_ris.labels();
    let n2_labels = tables.ris_rx.labels();
    let mut warnings = Vec::new();

    // pair label suffix -> RIS-Rx row that supplies P_n2
    let mut source: HashMap<&str, usize> = n2_labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let (a, b) = PRINTED_SWAP;
    if let (Some(&ia), Some(&ib)) = (source.get(a), source.get(b)) {
        if opts.table_iv_as_printed {
            source.insert(a, ib);
            source.insert(b, ia);
            warnings.push(format!(
                "pairs ending in {a} use the P_n2 of RIS-Rx path {b} and vice versa, following the printed comparison table; \
                 pass --table-iv-as-printed=false to pair them by label"
            ));
        }
    }

    let f_ris: HashMap<&str, Db> = tables.f_ris.iter().map(|(l, v)| (l.as_str(), *v)).collect();
    let measured: HashMap<&str, &crate::tables::MeasuredPower> = tables
        .measured
        .iter()
        .map(|m| (m.label.as_str(), m))
        .collect();

    let mut records = Vec::new();
    for l2 in n2_labels {
        let p_n2 = tables.ris_rx.paths()[source[l2.as_str()]].power_db;
        for (i1, l1) in n1_labels.iter().enumerate() {
            let label = format!("{l1}-{l2}");
            let f = *f_ris
                .get(label.as_str())
                .ok_or_else(|| Error::MissingPair(format!("no F_RIS value for pair {label}")))?;
            let m = measured
                .get(label.as_str())
                .ok_or_else(|| Error::MissingPair(format!("no measured power for pair {label}")))?;
            let p_n1 = tables.tx_ris.paths()[i1].power_db;
            let p_conv = power_cascade_db(p_n1, p_n2, f);
            records.push(ValidationRecord {
                label,
                p_n1,
                p_n2,
                f_ris: f,
                p_conv,
                p_measured: m.power_db,
                p_no_ris: m.power_no_ris_db,
                delta_p: delta_p(p_conv, m.power_db),
            });
        }
    }
    let known: std::collections::HashSet<&str> = records.iter().map(|r| r.label.as_str()).collect();
    for l in tables
        .f_ris
        .iter()
        .map(|(l, _)| l)
        .chain(tables.measured.iter().map(|m| &m.label))
    {
        if !known.contains(l.as_str()) {
            return Err(Error::MissingPair(format!(
                "pair {l} does not match any Tx-RIS x RIS-Rx path combination"
            )));
        }
    }
    Ok(ValidationReport { records, warnings })
}
