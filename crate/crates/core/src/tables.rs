//! CSV ingestion and emission for measured path tables.
//!
//! | file          | columns                                             |
//! |---------------|-----------------------------------------------------|
//! | `table2.csv`  | `label,power_db,delay_ns,aoa_ris_deg`               |
//! | `table3.csv`  | `label,power_db,delay_ns,aod_ris_deg,aoa_rx_deg`    |
//! | `fris.csv`    | `pair_label,f_ris_db`                               |
//! | `measured.csv`| `pair_label,power_db,power_no_ris_db`               |
//! | PDP           | `delay_ns,power_db`                                 |
//!
//! Powers are written with 2 decimals, delays with 1 and angles with 2.
//! `power_no_ris_db` may be left empty.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use crate::cascade::Pdp;
use crate::error::{Error, Result};
use crate::path::{PathComponent, Side, SubChannel};
use crate::units::{Db, PlanarAngle};

pub const TABLE2_COLUMNS: [&str; 4] = ["label", "power_db", "delay_ns", "aoa_ris_deg"];
pub const TABLE3_COLUMNS: [&str; 5] =
    ["label", "power_db", "delay_ns", "aod_ris_deg", "aoa_rx_deg"];
pub const FRIS_COLUMNS: [&str; 2] = ["pair_label", "f_ris_db"];
pub const PDP_COLUMNS: [&str; 2] = ["delay_ns", "power_db"];
pub const MEASURED_COLUMNS: [&str; 3] = ["pair_label", "power_db", "power_no_ris_db"];

/// Measured cascaded power for one path pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredPower {
    pub label: String,
    pub power_db: Db,
    pub power_no_ris_db: Option<Db>,
}

/// Everything needed to rebuild a measured-versus-model comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredTables {
    pub tx_ris: SubChannel,
    pub ris_rx: SubChannel,
    pub f_ris: Vec<(String, Db)>,
    pub measured: Vec<MeasuredPower>,
}

/// Rows of a CSV file, each addressed by the expected column order.
struct Rows {
    file: String,
    rows: Vec<(usize, Vec<String>)>,
}

impl Rows {
    fn read<R: Read>(r: R, file: &str, columns: &[&str]) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(r);
        let headers: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
        let schema = |message: String| Error::Schema {
            file: file.into(),
            message,
        };
        for c in columns {
            if !headers.iter().any(|h| h == c) {
                return Err(schema(format!("missing column `{c}`")));
            }
        }
        if let Some(extra) = headers.iter().find(|h| !columns.contains(&h.as_str())) {
            return Err(schema(format!("unknown column `{extra}`")));
        }
        let index: Vec<usize> = columns
            .iter()
            .map(|c| headers.iter().position(|h| h == c).expect("checked"))
            .collect();
        let mut rows = Vec::new();
        let mut seen = HashSet::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let cells: Vec<String> = index
                .iter()
                .map(|&j| rec.get(j).unwrap_or("").to_owned())
                .collect();
            if !seen.insert(cells[0].clone()) {
                return Err(schema(format!(
                    "duplicate label `{}` on line {line}",
                    cells[0]
                )));
            }
            rows.push((line, cells));
        }
        if rows.is_empty() {
            return Err(schema("no data rows".into()));
        }
        Ok(Rows {
            file: file.into(),
            rows,
        })
    }

    fn number(&self, line: usize, cell: &str, column: &str) -> Result<f64> {
        cell.parse::<f64>()
            .ok()
            .filter(|v| !v.is_nan())
            .ok_or_else(|| Error::Parse {
                file: self.file.clone(),
                line,
                message: format!("`{cell}` is not a number in column `{column}`"),
            })
    }

    fn power(&self, line: usize, cell: &str, column: &str) -> Result<Db> {
        let v = self.number(line, cell, column)?;
        Db::try_new(v).map_err(|_| Error::Parse {
            file: self.file.clone(),
            line,
            message: format!("`{cell}` is not a valid power in column `{column}`"),
        })
    }
}

fn file_name(path: &Path) -> String {
    path.display().to_string()
}

fn open(path: &Path) -> Result<std::fs::File> {
    Ok(std::fs::File::open(path)?)
}

/// Reads a Tx-RIS table. The file carries no Tx-side angle, so each
/// departure is taken as the reverse of the RIS arrival, which is exact for
/// line-of-sight paths.
pub fn read_table2<R: Read>(r: R, file: &str) -> Result<SubChannel> {
    let rows = Rows::read(r, file, &TABLE2_COLUMNS)?;
    let mut paths = Vec::new();
    let mut labels = Vec::new();
    for (line, c) in &rows.rows {
        let power = rows.power(*line, &c[1], TABLE2_COLUMNS[1])?;
        let delay = rows.number(*line, &c[2], TABLE2_COLUMNS[2])?;
        let aoa = rows.number(*line, &c[3], TABLE2_COLUMNS[3])?;
        paths.push(PathComponent::new(
            power,
            delay,
            PlanarAngle::tx(aoa + 180.0),
            PlanarAngle::ris(aoa),
        ));
        labels.push(c[0].clone());
    }
    SubChannel::with_labels(Side::TxRis, paths, labels)
}

pub fn read_table3<R: Read>(r: R, file: &str) -> Result<SubChannel> {
    let rows = Rows::read(r, file, &TABLE3_COLUMNS)?;
    let mut paths = Vec::new();
    let mut labels = Vec::new();
    for (line, c) in &rows.rows {
        let power = rows.power(*line, &c[1], TABLE3_COLUMNS[1])?;
        let delay = rows.number(*line, &c[2], TABLE3_COLUMNS[2])?;
        let aod = rows.number(*line, &c[3], TABLE3_COLUMNS[3])?;
        let aoa = rows.number(*line, &c[4], TABLE3_COLUMNS[4])?;
        paths.push(PathComponent::new(
            power,
            delay,
            PlanarAngle::ris(aod),
            PlanarAngle::rx(aoa),
        ));
        labels.push(c[0].clone());
    }
    SubChannel::with_labels(Side::RisRx, paths, labels)
}

pub fn read_fris<R: Read>(r: R, file: &str) -> Result<Vec<(String, Db)>> {
    let rows = Rows::read(r, file, &FRIS_COLUMNS)?;
    rows.rows
        .iter()
        .map(|(line, c)| Ok((c[0].clone(), rows.power(*line, &c[1], FRIS_COLUMNS[1])?)))
        .collect()
}

pub fn read_measured<R: Read>(r: R, file: &str) -> Result<Vec<MeasuredPower>> {
    let rows = Rows::read(r, file, &MEASURED_COLUMNS)?;
    rows.rows
        .iter()
        .map(|(line, c)| {
            let no_ris = if c[2].is_empty() {
                None
            } else {
                Some(rows.power(*line, &c[2], MEASURED_COLUMNS[2])?)
            };
            Ok(MeasuredPower {
                label: c[0].clone(),
                power_db: rows.power(*line, &c[1], MEASURED_COLUMNS[1])?,
                power_no_ris_db: no_ris,
            })
        })
        .collect()
}

/// Loads `table2.csv`, `table3.csv`, `fris.csv` and `measured.csv` from `dir`.
pub fn load_measured_tables(dir: &Path) -> Result<MeasuredTables> {
    let at = |name: &str| dir.join(name);
    let p2 = at("table2.csv");
    let p3 = at("table3.csv");
    let pf = at("fris.csv");
    let pm = at("measured.csv");
    Ok(MeasuredTables {
        tx_ris: read_table2(open(&p2)?, &file_name(&p2))?,
        ris_rx: read_table3(open(&p3)?, &file_name(&p3))?,
        f_ris: read_fris(open(&pf)?, &file_name(&pf))?,
        measured: read_measured(open(&pm)?, &file_name(&pm))?,
    })
}

pub(crate) fn fmt_db(v: Db) -> String {
    format!("{:.2}", v.value())
}

pub(crate) fn fmt_ns(v: f64) -> String {
    format!("{v:.1}")
}

pub fn write_table2<W: Write>(sub: &SubChannel, w: W) -> Result<()> {
    if sub.side() != Side::TxRis {
        return Err(Error::domain("table2 holds Tx-RIS paths"));
    }
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(TABLE2_COLUMNS)?;
    for (p, l) in sub.paths().iter().zip(sub.labels()) {
        wr.write_record([
            l.clone(),
            fmt_db(p.power_db),
            fmt_ns(p.delay_ns),
            format!("{:.2}", p.aoa.degrees()),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_table3<W: Write>(sub: &SubChannel, w: W) -> Result<()> {
    if sub.side() != Side::RisRx {
        return Err(Error::domain("table3 holds RIS-Rx paths"));
    }
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(TABLE3_COLUMNS)?;
    for (p, l) in sub.paths().iter().zip(sub.labels()) {
        wr.write_record([
            l.clone(),
            fmt_db(p.power_db),
            fmt_ns(p.delay_ns),
            format!("{:.2}", p.aod.degrees()),
            format!("{:.2}", p.aoa.degrees()),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// `delay_ns,power_db` rows; empty bins print as `-inf`.
pub fn write_pdp<W: Write>(pdp: &Pdp, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(PDP_COLUMNS)?;
    for (b, p) in pdp.power_db.iter().enumerate() {
        wr.write_record([fmt_ns(pdp.grid.bin_center(b)), fmt_db(*p)])?;
    }
    wr.flush()?;
    Ok(())
}

/// Writes through a temporary file in the destination directory and renames
/// it into place.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf)?;
        buf.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const T2: &str = "label,power_db,delay_ns,aoa_ris_deg\n1,-74.64,17.5,80\n2,-70.21,10.0,60\n";
    const T3: &str = "label,power_db,delay_ns,aod_ris_deg,aoa_rx_deg\nA,-78.46,32.5,90,90\nB,-83.36,37.5,125,115\n";

    #[test]
    fn reads_table2_row() {
        let sub = read_table2(T2.as_bytes(), "table2.csv").unwrap();
        let p = sub.paths()[0];
        assert_eq!(p.power_db, Db::new(-74.64));
        assert_eq!(p.delay_ns, 17.5);
        assert_eq!(sub.ris_angle(0), PlanarAngle::ris(80.0));
        assert_eq!(sub.labels(), ["1", "2"]);
    }

    #[test]
    fn reads_table3_row() {
        let sub = read_table3(T3.as_bytes(), "table3.csv").unwrap();
        let p = sub.paths()[0];
        assert_eq!(p.power_db, Db::new(-78.46));
        assert_eq!(p.delay_ns, 32.5);
        assert_eq!(p.aod, PlanarAngle::ris(90.0));
        assert_eq!(p.aoa, PlanarAngle::rx(90.0));
    }

    #[test]
    fn columns_may_be_reordered() {
        let t = "aoa_ris_deg,label,delay_ns,power_db\n80,1,17.5,-74.64\n";
        let sub = read_table2(t.as_bytes(), "t").unwrap();
        assert_eq!(sub.paths()[0].power_db, Db::new(-74.64));
    }

    #[test]
    fn schema_errors() {
        let missing = "label,power_db,delay_ns\n1,-74.64,17.5\n";
        let e = read_table2(missing.as_bytes(), "t").unwrap_err();
        assert!(matches!(&e, Error::Schema { message, .. } if message.contains("aoa_ris_deg")));
        let extra = "label,power_db,delay_ns,aoa_ris_deg,x\n1,-74.64,17.5,80,0\n";
        assert!(matches!(
            read_table2(extra.as_bytes(), "t"),
            Err(Error::Schema { .. })
        ));
        let dup = "label,power_db,delay_ns,aoa_ris_deg\n1,-74.64,17.5,80\n1,-70.21,10.0,60\n";
        assert!(matches!(
            read_table2(dup.as_bytes(), "t"),
            Err(Error::Schema { .. })
        ));
        let bad = "label,power_db,delay_ns,aoa_ris_deg\n1,abc,17.5,80\n";
        assert!(matches!(
            read_table2(bad.as_bytes(), "t"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn measured_optional_column() {
        let m = "pair_label,power_db,power_no_ris_db\n1-A,-107.54,-135.38\n1-B,-112.18,\n";
        let rows = read_measured(m.as_bytes(), "m").unwrap();
        assert_eq!(rows[0].power_no_ris_db, Some(Db::new(-135.38)));
        assert_eq!(rows[1].power_no_ris_db, None);
    }

    #[test]
    fn csv_round_trip() {
        let sub = read_table3(T3.as_bytes(), "t").unwrap();
        let mut out = Vec::new();
        write_table3(&sub, &mut out).unwrap();
        let back = read_table3(out.as_slice(), "t").unwrap();
        assert_eq!(back, sub);
        let mut again = Vec::new();
        write_table3(&back, &mut again).unwrap();
        assert_eq!(out, again);

        let sub = read_table2(T2.as_bytes(), "t").unwrap();
        let mut out = Vec::new();
        write_table2(&sub, &mut out).unwrap();
        assert_eq!(read_table2(out.as_slice(), "t").unwrap(), sub);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        std::fs::write(&path, "old").unwrap();
        write_atomic(&path, |w| Ok(w.write_all(b"new")?)).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "new");
        let failed = write_atomic(&path, |_| Err(Error::domain("boom")));
        assert!(failed.is_err());
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "new");
    }
}
