//! Dataset CSV files.
//!
//! An optional first line `# carrier_hz=<Hz>` sets the carrier (28 GHz when
//! absent). The header is
//!
//! ```text
//! env_id,gnb_type,dx_m,dy_m,dz_m,loss_db_1,aoa_az_deg_1,aoa_el_deg_1,aod_az_deg_1,aod_el_deg_1,delay_ns_1,...,delay_ns_20,los
//! ```
//!
//! with one row per link. Absent paths are written as loss 200 and zeros;
//! `los` is 1 iff path 1 is the LOS path. Numbers are written in shortest
//! round-trip form, so delays (stored in ns) come back within an ulp.

use std::fs;
use std::io::Write;
use std::path::Path;

use uavchan_core::{
    validate_record, Dataset, GnbType, LinkCondition, LinkRecord, PathEntry, PathSet, DEFAULT_CARRIER_HZ, K_PATHS,
    MAX_LOSS_DB, SPEED_OF_LIGHT,
};

use crate::error::{io_err, Error, Result};

pub const CONDITION_COLUMNS: [&str; 5] = ["env_id", "gnb_type", "dx_m", "dy_m", "dz_m"];
pub const PATH_FIELDS: [&str; 6] = ["loss_db", "aoa_az_deg", "aoa_el_deg", "aod_az_deg", "aod_el_deg", "delay_ns"];
pub const N_COLUMNS: usize = 5 + 6 * K_PATHS + 1;

const CARRIER_KEY: &str = "# carrier_hz=";

/// The exact header row.
pub fn header() -> Vec<String> {
    let mut h: Vec<String> = CONDITION_COLUMNS.iter().map(|s| s.to_string()).collect();
    for k in 1..=K_PATHS {
        h.extend(PATH_FIELDS.iter().map(|f| format!("{f}_{k}")));
    }
    h.push("los".into());
    h
}

pub fn write_dataset<W: Write>(data: &Dataset, w: W) -> Result<()> {
    let mut w = w;
    writeln!(w, "{CARRIER_KEY}{}", data.carrier_hz).map_err(csv::Error::from)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header())?;
    let mut row = Vec::with_capacity(N_COLUMNS);
    for r in &data.records {
        row.clear();
        let c = &r.condition;
        row.push(r.env_id.clone());
        row.push(c.gnb_type.as_str().into());
        row.extend([c.dx_m, c.dy_m, c.dz_m].map(|v| v.to_string()));
        for p in &r.paths.entries {
            row.extend(
                [p.loss_db, p.aoa_az_deg, p.aoa_el_deg, p.aod_az_deg, p.aod_el_deg, p.delay_s * 1e9].map(|v| v.to_string()),
            );
        }
        row.push(if r.paths.entries[0].is_los { "1" } else { "0" }.into());
        out.write_record(&row)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_dataset_file(data: &Dataset, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_dataset(data, &mut buf)?;
    fs::write(path, buf).map_err(io_err(path))
}

/// Splits off the optional carrier line. Returns the carrier and how many lines
/// were consumed.
fn carrier_line(text: &str) -> Result<(f64, &str, u64)> {
    if !text.starts_with('#') {
        return Ok((DEFAULT_CARRIER_HZ, text, 0));
    }
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let first = first.trim_end_matches('\r');
    let bad = || Error::CarrierLine {
        line: 1,
        text: first.to_string(),
    };
    let v: f64 = first.strip_prefix(CARRIER_KEY).ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(bad());
    }
    Ok((v, rest, 1))
}

fn check_header(found: &csv::StringRecord) -> Result<()> {
    for (i, want) in header().iter().enumerate() {
        match found.get(i) {
            None => return Err(Error::MissingColumn(want.clone())),
            Some(f) if f.trim() != want => {
                return Err(Error::UnexpectedColumn {
                    index: i + 1,
                    expected: want.clone(),
                    found: f.to_string(),
                })
            }
            Some(_) => {}
        }
    }
    if found.len() > N_COLUMNS {
        return Err(Error::UnexpectedColumn {
            index: N_COLUMNS + 1,
            expected: "(end of header)".into(),
            found: found[N_COLUMNS].to_string(),
        });
    }
    Ok(())
}

fn cell<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: u64, names: &[String]) -> Result<T> {
    let v = rec[i].trim();
    v.parse().map_err(|_| Error::Cell {
        line,
        column: names[i].clone(),
        value: v.to_string(),
    })
}

fn reader(body: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().flexible(true).from_reader(body.as_bytes())
}

pub fn read_dataset(text: &str) -> Result<Dataset> {
    let (carrier_hz, body, offset) = carrier_line(text)?;
    let mut rd = reader(body);
    check_header(rd.headers()?)?;
    let names = header();
    let mut records = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line()) + offset;
        if rec.len() != N_COLUMNS {
            return Err(Error::ColumnCount {
                line,
                expected: N_COLUMNS,
                found: rec.len(),
            });
        }
        let gnb_type = GnbType::parse(rec[1].trim()).ok_or_else(|| Error::Cell {
            line,
            column: "gnb_type".into(),
            value: rec[1].to_string(),
        })?;
        let condition = LinkCondition::new(cell(&rec, 2, line, &names)?, cell(&rec, 3, line, &names)?, cell(&rec, 4, line, &names)?, gnb_type);
        let los: u8 = cell(&rec, N_COLUMNS - 1, line, &names)?;
        if los > 1 {
            return Err(Error::Cell {
                line,
                column: "los".into(),
                value: rec[N_COLUMNS - 1].to_string(),
            });
        }
        let mut paths = PathSet::empty();
        for k in 0..K_PATHS {
            let b = 5 + 6 * k;
            let mut v = [0.0; 6];
            for (j, x) in v.iter_mut().enumerate() {
                *x = cell(&rec, b + j, line, &names)?;
            }
            paths.entries[k] = PathEntry {
                loss_db: v[0],
                aoa_az_deg: v[1],
                aoa_el_deg: v[2],
                aod_az_deg: v[3],
                aod_el_deg: v[4],
                delay_s: v[5] / 1e9,
                is_los: k == 0 && los == 1,
            };
        }
        if los == 1 {
            check_los_fields(&paths.entries[0], &condition, line)?;
        }
        let record = LinkRecord {
            env_id: rec[0].to_string(),
            condition,
            paths,
        };
        let report = validate_record(&record);
        if !report.is_valid() {
            let msg: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::Record {
                line,
                message: msg.join("; "),
            });
        }
        records.push(record);
    }
    Ok(Dataset::new(records, carrier_hz)?)
}

/// A LOS flag must sit on a present path whose delay is the geometric one.
fn check_los_fields(p: &PathEntry, u: &LinkCondition, line: u64) -> Result<()> {
    let fail = |m: &str| {
        Err(Error::Record {
            line,
            message: format!("los flag set but {m}"),
        })
    };
    if !(p.loss_db < MAX_LOSS_DB) {
        return fail("path 1 is absent");
    }
    let tau = u.d3d() / SPEED_OF_LIGHT;
    if (p.delay_s - tau).abs() > 1e-6 * tau + 1e-12 {
        return fail("path 1 delay does not match the link distance");
    }
    Ok(())
}

pub fn read_dataset_file(path: &Path) -> Result<Dataset> {
    read_dataset(&fs::read_to_string(path).map_err(io_err(path))?)
}

/// Link conditions from any CSV with `gnb_type, dx_m, dy_m, dz_m` columns,
/// dataset files included.
pub fn read_conditions(text: &str) -> Result<Vec<LinkCondition>> {
    let (_, body, offset) = carrier_line(text)?;
    let mut rd = reader(body);
    let h = rd.headers()?.clone();
    let names: Vec<String> = h.iter().map(|s| s.trim().to_string()).collect();
    let idx = |n: &str| names.iter().position(|c| c == n).ok_or_else(|| Error::MissingColumn(n.into()));
    let cols = [idx("gnb_type")?, idx("dx_m")?, idx("dy_m")?, idx("dz_m")?];
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line()) + offset;
        if rec.len() != names.len() {
            return Err(Error::ColumnCount {
                line,
                expected: names.len(),
                found: rec.len(),
            });
        }
        let gnb = GnbType::parse(rec[cols[0]].trim()).ok_or_else(|| Error::Cell {
            line,
            column: "gnb_type".into(),
            value: rec[cols[0]].to_string(),
        })?;
        let u = LinkCondition::new(
            cell(&rec, cols[1], line, &names)?,
            cell(&rec, cols[2], line, &names)?,
            cell(&rec, cols[3], line, &names)?,
            gnb,
        );
        u.checked_d3d().map_err(|e| Error::Record {
            line,
            message: e.to_string(),
        })?;
        out.push(u);
    }
    if out.is_empty() {
        return Err(Error::Invalid("conditions file has no rows".into()));
    }
    Ok(out)
}

pub fn read_conditions_file(path: &Path) -> Result<Vec<LinkCondition>> {
    read_conditions(&fs::read_to_string(path).map_err(io_err(path))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use uavchan_core::citygen::{generate_city, OracleConfig};

    fn sample() -> Dataset {
        generate_city(&OracleConfig::default(), 100, 3).unwrap()
    }

    fn written(d: &Dataset) -> String {
        let mut b = Vec::new();
        write_dataset(d, &mut b).unwrap();
        String::from_utf8(b).unwrap()
    }

    #[test]
    fn header_shape() {
        let h = header();
        assert_eq!(h.len(), 126);
        assert_eq!(h[5], "loss_db_1");
        assert_eq!(h[124], "delay_ns_20");
        assert_eq!(h[125], "los");
    }

    #[test]
    fn round_trip() {
        let d = sample();
        let back = read_dataset(&written(&d)).unwrap();
        assert_eq!(back.carrier_hz, d.carrier_hz);
        assert_eq!(back.len(), d.len());
        for (a, b) in d.records.iter().zip(&back.records) {
            assert_eq!(a.env_id, b.env_id);
            assert_eq!(a.condition, b.condition);
            for (p, q) in a.paths.entries.iter().zip(&b.paths.entries) {
                assert_eq!(p.is_los, q.is_los);
                assert_eq!((p.loss_db, p.aoa_az_deg, p.aod_el_deg), (q.loss_db, q.aoa_az_deg, q.aod_el_deg));
                assert!((p.delay_s - q.delay_s).abs() <= 1e-6 * p.delay_s.abs());
            }
        }
        // a second pass is exact
        assert_eq!(written(&back), written(&read_dataset(&written(&back)).unwrap()));
    }

    #[test]
    fn missing_column_is_named() {
        let text = written(&sample());
        let cut = text.replacen(",los\n", "\n", 1);
        match read_dataset(&cut) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "los"),
            other => panic!("{other:?}"),
        }
        let renamed = text.replacen("aoa_el_deg_3", "aoa_elev_3", 1);
        assert!(matches!(read_dataset(&renamed), Err(Error::UnexpectedColumn { index: 20, .. })));
    }

    #[test]
    fn cell_errors_carry_position() {
        let text = written(&sample());
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[4] = lines[4].replacen(",standard,", ",tower,", 1).replacen(",dedicated,", ",tower,", 1);
        match read_dataset(&lines.join("\n")) {
            Err(Error::Cell { line, column, value }) => {
                assert_eq!((line, column.as_str(), value.as_str()), (5, "gnb_type", "tower"));
            }
            other => panic!("{other:?}"),
        }
        let mut short = text.lines().map(String::from).collect::<Vec<_>>();
        short[3] = short[3].rsplit_once(',').unwrap().0.to_string();
        assert!(matches!(read_dataset(&short.join("\n")), Err(Error::ColumnCount { line: 4, found: 125, .. })));
    }

    #[test]
    fn los_flag_cross_check() {
        let d = sample();
        let i = d.records.iter().position(|r| r.state() == uavchan_core::LinkState::Nlos).unwrap();
        let text = written(&d);
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let row = &mut lines[i + 2];
        row.replace_range(row.len() - 1.., "1");
        assert!(matches!(read_dataset(&lines.join("\n")), Err(Error::Record { .. })));
    }

    #[test]
    fn carrier_line_is_optional() {
        let d = sample();
        let text = written(&d);
        let body = text.split_once('\n').unwrap().1;
        assert_eq!(read_dataset(body).unwrap().carrier_hz, DEFAULT_CARRIER_HZ);
        assert!(matches!(read_dataset(&format!("# carrier=1\n{body}")), Err(Error::CarrierLine { .. })));
    }

    #[test]
    fn conditions_from_either_layout() {
        let d = sample();
        let from_data = read_conditions(&written(&d)).unwrap();
        assert_eq!(from_data.len(), 100);
        assert_eq!(from_data[7], d.records[7].condition);
        let c = read_conditions("dz_m,gnb_type,dx_m,dy_m\n60,dedicated,10,-5\n").unwrap();
        assert_eq!(c, vec![LinkCondition::new(10.0, -5.0, 60.0, GnbType::Dedicated)]);
        assert!(matches!(read_conditions("gnb_type,dx_m,dy_m\n"), Err(Error::MissingColumn(_))));
        assert!(read_conditions("gnb_type,dx_m,dy_m,dz_m\nstandard,0,0,0\n").is_err());
    }
}
