//! Metric tables and their CSV encodings.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::forgetting::ForgettingRecord;
use crate::data::ClassRole;
use crate::error::{Error, Result};

/// Global evaluation after one round's aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub global_acc: f64,
    pub class_acc: Vec<Option<f64>>,
    pub participants: Vec<usize>,
    /// `(client, mean local objective over the last local epoch)`.
    pub client_losses: Vec<(usize, f64)>,
}

/// Formats `v` with 10 significant digits in positional notation.
pub fn fmt_sig10(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { "0".into() } else { v.to_string() };
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (9 - magnitude).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // Rounding may carry into a new leading digit (9.99... -> 10.0...).
    let digits = s.chars().filter(char::is_ascii_digit).count();
    let leading_zeros = s
        .trim_start_matches('-')
        .chars()
        .take_while(|c| *c == '0' || *c == '.')
        .filter(|c| *c == '0')
        .count();
    if digits - leading_zeros > 10 && decimals > 0 {
        let decimals = decimals - 1;
        return format!("{v:.decimals$}");
    }
    s
}

pub fn write_rounds_csv<W: Write>(out: W, records: &[RoundRecord], class_count: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["round".to_string(), "global_acc".to_string()];
    header.extend((0..class_count).map(|k| format!("acc_class_{k}")));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.round.to_string(), fmt_sig10(r.global_acc)];
        row.extend(r.class_acc.iter().map(|a| a.map(fmt_sig10).unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `(round, global_acc)` pairs back from a rounds table.
pub fn read_accuracy_curve<R: Read>(input: R) -> Result<Vec<(usize, f64)>> {
    let mut r = csv::Reader::from_reader(input);
    let mut curve = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse_err = |field: &str| Error::Dataset(format!("rounds table: bad {field} in {rec:?}"));
        let round = rec
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err("round"))?;
        let acc = rec
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err("global_acc"))?;
        curve.push((round, acc));
    }
    Ok(curve)
}

pub fn write_forgetting_csv<W: Write>(out: W, records: &[ForgettingRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["round", "client", "class", "role", "acc_global", "acc_local", "tau"])?;
    for r in records {
        w.write_record([
            r.round.to_string(),
            r.client.to_string(),
            r.class.to_string(),
            r.role.to_string(),
            fmt_sig10(r.acc_global),
            fmt_sig10(r.acc_local),
            fmt_sig10(r.tau),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_forgetting_csv<R: Read>(input: R) -> Result<Vec<ForgettingRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in r.deserialize::<(usize, usize, usize, String, f64, f64, f64)>() {
        let (round, client, class, role, acc_global, acc_local, tau) = rec?;
        let role = ClassRole::parse(&role)
            .ok_or_else(|| Error::Dataset(format!("forgetting table: unknown role {role:?}")))?;
        out.push(ForgettingRecord {
            round,
            client,
            class,
            role,
            acc_global,
            acc_local,
            tau,
        });
    }
    Ok(out)
}

/// Writes `(round, client, loss)` rows.
pub fn write_client_losses_csv<W: Write>(out: W, rows: &[(usize, usize, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["round", "client", "loss"])?;
    for (round, client, loss) in rows {
        w.write_record([round.to_string(), client.to_string(), fmt_sig10(*loss)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::forgetting_degree;

    #[test]
    fn ten_significant_digits() {
        assert_eq!(fmt_sig10(0.75), "0.7500000000");
        assert_eq!(fmt_sig10(1.0), "1.000000000");
        assert_eq!(fmt_sig10(-4e7), "-40000000.00");
        assert_eq!(fmt_sig10(1.0 / 3.0), "0.3333333333");
        assert_eq!(fmt_sig10(0.0), "0");
        assert_eq!(fmt_sig10(9.9999999999), "10.00000000");
        assert_eq!(fmt_sig10(0.012345678912), "0.01234567891");
    }

    #[test]
    fn forgetting_table_round_trip() {
        let recs: Vec<ForgettingRecord> = [(0.8, 0.2), (0.0, 0.4), (1.0 / 3.0, 2.0 / 3.0)]
            .iter()
            .enumerate()
            .map(|(i, &(g, l))| ForgettingRecord {
                round: i + 1,
                client: i,
                class: 2 * i,
                role: ClassRole::Missing,
                acc_global: g,
                acc_local: l,
                tau: forgetting_degree(g, l, 1e-8),
            })
            .collect();
        let mut buf = Vec::new();
        write_forgetting_csv(&mut buf, &recs).unwrap();
        let back = read_forgetting_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), recs.len());
        for (a, b) in recs.iter().zip(&back) {
            assert_eq!(
                (a.round, a.client, a.class, a.role),
                (b.round, b.client, b.class, b.role)
            );
            for (x, y) in [(a.acc_global, b.acc_global), (a.acc_local, b.acc_local), (a.tau, b.tau)] {
                assert!((x - y).abs() <= 5e-10 * x.abs().max(1e-300), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn rounds_table_layout() {
        let recs = vec![RoundRecord {
            round: 1,
            global_acc: 0.5,
            class_acc: vec![Some(1.0), None],
            participants: vec![0],
            client_losses: vec![(0, 0.25)],
        }];
        let mut buf = Vec::new();
        write_rounds_csv(&mut buf, &recs, 2).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "round,global_acc,acc_class_0,acc_class_1\n1,0.5000000000,1.000000000,\n"
        );
        assert_eq!(read_accuracy_curve(buf.as_slice()).unwrap(), vec![(1, 0.5)]);
    }
}
