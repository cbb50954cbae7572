//! CSV formats shared by the analysis and the simulator.
//!
//! Writers print fixed six-decimal numbers so that files compare byte for
//! byte. Readers locate columns by header name and report the line of any
//! malformed record.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use csv::{ReaderBuilder, StringRecord, WriterBuilder};

use crate::error::{Error, Result};
use crate::phasematch::SweepRow;
use crate::stats::{ChshSettings, CorrelationCurve, CountRecord, CurvePoint, JointCounts};

pub const SWEEP_HEADER: [&str; 5] = [
    "lambda_nm",
    "theta_i_ext_deg",
    "theta_s_ext_deg",
    "dtheta_dlambda_deg_per_nm",
    "status",
];
pub const POWER_HEADER: [&str; 5] = ["power_mw", "singles_s", "singles_i", "coincidences", "duration_s"];
pub const CURVE_HEADER: [&str; 4] = ["phi1_deg", "phi2_deg", "rate_hz", "duration_s"];
pub const BELL_HEADER: [&str; 3] = ["alpha_deg", "beta_deg", "counts"];

pub fn fmt6(v: f64) -> String {
    let s = format!("{v:.6}");
    // Avoid "-0.000000" so that sign noise does not break golden files.
    if s.trim_start_matches('-').bytes().all(|b| b == b'0' || b == b'.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn opt6(v: Option<f64>) -> String {
    v.map(fmt6).unwrap_or_default()
}

pub fn write_sweep<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            fmt6(r.lambda_um * 1e3),
            opt6(r.theta_i_ext.map(f64::to_degrees)),
            opt6(r.theta_s_ext.map(f64::to_degrees)),
            opt6(r.dtheta_dlambda_deg_per_nm),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

struct Table {
    columns: BTreeMap<String, usize>,
    rows: Vec<(u64, StringRecord)>,
}

impl Table {
    fn read<R: Read>(input: R, required: &[&str]) -> Result<Self> {
        let mut rdr = ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(input);
        let headers = rdr.headers()?.clone();
        if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
            return Err(Error::Record {
                line: 1,
                message: "file is empty; expected a header line".into(),
            });
        }
        let columns: BTreeMap<String, usize> = headers.iter().enumerate().map(|(k, h)| (h.to_string(), k)).collect();
        let missing: Vec<&str> = required.iter().copied().filter(|c| !columns.contains_key(*c)).collect();
        if !missing.is_empty() {
            return Err(Error::Record {
                line: 1,
                message: format!("missing column(s): {}", missing.join(", ")),
            });
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Record {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec));
        }
        if rows.is_empty() {
            return Err(Error::Record {
                line: 2,
                message: "no data rows".into(),
            });
        }
        Ok(Self { columns, rows })
    }

    fn has(&self, col: &str) -> bool {
        self.columns.contains_key(col)
    }

    fn num(&self, row: usize, col: &str) -> Result<f64> {
        let (line, rec) = &self.rows[row];
        let raw = rec.get(self.columns[col]).unwrap_or("");
        let v: f64 = raw.parse().map_err(|_| Error::Record {
            line: *line,
            message: format!("column {col}: cannot parse {raw:?} as a number"),
        })?;
        if !v.is_finite() {
            return Err(Error::Record {
                line: *line,
                message: format!("column {col}: value {raw} is not finite"),
            });
        }
        Ok(v)
    }

    fn line(&self, row: usize) -> u64 {
        self.rows[row].0
    }
}

fn at_line<T>(line: u64, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Record {
        line,
        message: e.to_string(),
    })
}

/// Power-sweep rates. `duration_s` is optional; `default_duration_s` fills
/// it when absent. Every record gets the coincidence window `window_s`.
pub fn read_power_csv<R: Read>(input: R, window_s: f64, default_duration_s: f64) -> Result<Vec<CountRecord>> {
    let t = Table::read(input, &POWER_HEADER[..4])?;
    (0..t.rows.len())
        .map(|k| {
            let rec = CountRecord {
                pump_power_mw: t.num(k, "power_mw")?,
                singles_s: t.num(k, "singles_s")?,
                singles_i: t.num(k, "singles_i")?,
                coincidences: t.num(k, "coincidences")?,
                window_s,
                duration_s: if t.has("duration_s") {
                    t.num(k, "duration_s")?
                } else {
                    default_duration_s
                },
            };
            at_line(t.line(k), rec.validate())?;
            Ok(rec)
        })
        .collect()
}

pub fn write_power_csv<W: Write>(records: &[CountRecord], out: W) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(out);
    w.write_record(POWER_HEADER)?;
    for r in records {
        w.write_record([
            fmt6(r.pump_power_mw),
            fmt6(r.singles_s),
            fmt6(r.singles_i),
            fmt6(r.coincidences),
            fmt6(r.duration_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve_csv<R: Read>(input: R) -> Result<CorrelationCurve> {
    let t = Table::read(input, &CURVE_HEADER)?;
    let mut points = Vec::with_capacity(t.rows.len());
    for k in 0..t.rows.len() {
        let p = CurvePoint {
            phi1_deg: t.num(k, "phi1_deg")?,
            phi2_deg: t.num(k, "phi2_deg")?,
            rate_hz: t.num(k, "rate_hz")?,
            duration_s: t.num(k, "duration_s")?,
        };
        at_line(t.line(k), CorrelationCurve::new(vec![p]).validate())?;
        points.push(p);
    }
    Ok(CorrelationCurve::new(points))
}

pub fn write_curve_csv<W: Write>(curve: &CorrelationCurve, out: W) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(out);
    w.write_record(CURVE_HEADER)?;
    for p in &curve.points {
        w.write_record([fmt6(p.phi1_deg), fmt6(p.phi2_deg), fmt6(p.rate_hz), fmt6(p.duration_s)])?;
    }
    w.flush()?;
    Ok(())
}

fn angle_key(deg: f64) -> i64 {
    (deg.rem_euclid(180.0) * 1e6).round() as i64 % 180_000_000
}

/// The sixteen (α, β) rows a CHSH evaluation needs: each setting pair and
/// its 90°-rotated partners, in the order ++, +−, −+, −−.
pub fn bell_rows(settings: &ChshSettings) -> Vec<(f64, f64)> {
    settings
        .pairs()
        .iter()
        .flat_map(|&(a, b)| [(a, b), (a, b + 90.0), (a + 90.0, b), (a + 90.0, b + 90.0)])
        .collect()
}

/// Reads joint-outcome counts for the four setting pairs of `settings`.
/// Angles match modulo 180°. Missing rows are listed in the error.
pub fn read_bell_csv<R: Read>(input: R, settings: &ChshSettings) -> Result<[JointCounts; 4]> {
    let t = Table::read(input, &BELL_HEADER)?;
    let mut table: BTreeMap<(i64, i64), f64> = BTreeMap::new();
    for k in 0..t.rows.len() {
        let (a, b, n) = (t.num(k, "alpha_deg")?, t.num(k, "beta_deg")?, t.num(k, "counts")?);
        if n < 0.0 {
            return Err(Error::Record {
                line: t.line(k),
                message: format!("count {n} must be non-negative"),
            });
        }
        if table.insert((angle_key(a), angle_key(b)), n).is_some() {
            return Err(Error::Record {
                line: t.line(k),
                message: format!("duplicate setting ({a}°, {b}°)"),
            });
        }
    }
    let rows = bell_rows(settings);
    let missing: Vec<String> = rows
        .iter()
        .filter(|(a, b)| !table.contains_key(&(angle_key(*a), angle_key(*b))))
        .map(|(a, b)| format!("({}°, {}°)", fmt6(a.rem_euclid(180.0)), fmt6(b.rem_euclid(180.0))))
        .collect();
    if !missing.is_empty() {
        return Err(Error::invalid(format!("missing setting rows: {}", missing.join(", "))));
    }
    let get = |k: usize| table[&(angle_key(rows[k].0), angle_key(rows[k].1))];
    Ok(std::array::from_fn(|s| JointCounts {
        pp: get(4 * s),
        pm: get(4 * s + 1),
        mp: get(4 * s + 2),
        mm: get(4 * s + 3),
    }))
}

pub fn write_bell_csv<W: Write>(settings: &ChshSettings, counts: &[JointCounts; 4], out: W) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(out);
    w.write_record(BELL_HEADER)?;
    let rows = bell_rows(settings);
    for (s, c) in counts.iter().enumerate() {
        for (k, n) in [c.pp, c.pm, c.mp, c.mm].into_iter().enumerate() {
            let (a, b) = rows[4 * s + k];
            w.write_record([fmt6(a), fmt6(b), fmt6(n)])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_decimals() {
        assert_eq!(fmt6(1.0), "1.000000");
        assert_eq!(fmt6(-1e-9), "0.000000");
        assert_eq!(fmt6(-0.5), "-0.500000");
    }

    #[test]
    fn power_round_trip() {
        let recs = vec![CountRecord {
            singles_s: 1e5,
            singles_i: 1.1e5,
            coincidences: 2.5e4,
            window_s: 6.8e-9,
            pump_power_mw: 10.0,
            duration_s: 2.0,
        }];
        let mut buf = Vec::new();
        write_power_csv(&recs, &mut buf).unwrap();
        assert_eq!(read_power_csv(&buf[..], 6.8e-9, 1.0).unwrap(), recs);
    }

    #[test]
    fn power_optional_duration() {
        let text = "power_mw,singles_s,singles_i,coincidences\n10,100,100,20\n";
        let r = read_power_csv(text.as_bytes(), 1e-9, 3.0).unwrap();
        assert_eq!(r[0].duration_s, 3.0);
    }

    #[test]
    fn bad_rows_name_their_line() {
        let text = "power_mw,singles_s,singles_i,coincidences\n10,100,100,20\n20,abc,100,20\n";
        match read_power_csv(text.as_bytes(), 1e-9, 1.0) {
            Err(Error::Record { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("singles_s"));
            }
            other => panic!("{other:?}"),
        }
        let text = "power_mw,singles_s,singles_i,coincidences\n10,100,100,200\n";
        assert!(matches!(
            read_power_csv(text.as_bytes(), 1e-9, 1.0),
            Err(Error::Record { line: 2, .. })
        ));
        assert!(matches!(
            read_power_csv("".as_bytes(), 1e-9, 1.0),
            Err(Error::Record { .. })
        ));
        assert!(read_curve_csv("phi1_deg,phi2_deg\n0,0\n".as_bytes()).is_err());
    }

    #[test]
    fn bell_round_trip_and_missing() {
        let s = ChshSettings::default();
        let counts = std::array::from_fn(|k| JointCounts {
            pp: k as f64,
            pm: 10.0,
            mp: 20.0,
            mm: 30.0,
        });
        let mut buf = Vec::new();
        write_bell_csv(&s, &counts, &mut buf).unwrap();
        assert_eq!(read_bell_csv(&buf[..], &s).unwrap(), counts);

        let text = String::from_utf8(buf).unwrap();
        let cut: Vec<&str> = text.lines().filter(|l| !l.starts_with("45.000000,22.500000")).collect();
        let err = read_bell_csv(cut.join("\n").as_bytes(), &s).unwrap_err().to_string();
        assert!(err.contains("(45.000000°, 22.500000°)"), "{err}");
    }
}
