//! CSV readers and writers for series, kernels and activation estimates.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so every
//! file read back through these functions reproduces the same `f64` values.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::mci::ActivationEstimate;
use crate::signal::{HrfKernel, TimeSeries};

/// A `value` column and, if present, a `time` column.
#[derive(Debug, Clone, PartialEq)]
pub struct Columns {
    pub times: Option<Vec<f64>>,
    pub values: Vec<f64>,
}

/// Reads a CSV with a header naming a `value` column and optionally a `time`
/// column; other columns are ignored. Errors carry the 1-based file line.
pub fn read_columns<R: Read>(input: R) -> Result<Columns> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers().map_err(|e| Error::Parse { line: 1, reason: e.to_string() })?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Parse { line: 1, reason: "empty file".into() });
    }
    let find = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let value_col = find("value").ok_or_else(|| Error::Parse {
        line: 1,
        reason: format!("header must contain a 'value' column, got '{}'", header.iter().collect::<Vec<_>>().join(",")),
    })?;
    let time_col = find("time");

    let mut times = time_col.map(|_| Vec::new());
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |col: usize, what: &str| -> Result<f64> {
            let raw = rec.get(col).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| Error::Parse { line, reason: format!("{what} '{raw}' is not a number") })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, reason: format!("{what} '{raw}' is not finite") });
            }
            Ok(v)
        };
        values.push(field(value_col, "value")?);
        if let (Some(col), Some(ts)) = (time_col, times.as_mut()) {
            ts.push(field(col, "time")?);
        }
    }
    if values.is_empty() {
        return Err(Error::Parse { line: 2, reason: "no data rows".into() });
    }
    Ok(Columns { times, values })
}

/// Reads a series. `tr` overrides the spacing of a `time` column; without
/// either the sampling period is unknown and an error is returned.
pub fn read_series<R: Read>(input: R, tr: Option<f64>) -> Result<TimeSeries> {
    let cols = read_columns(input)?;
    let tr = match (tr, &cols.times) {
        (Some(tr), _) => tr,
        (None, Some(t)) if t.len() >= 2 => t[1] - t[0],
        _ => return Err(Error::InvalidParameter("sampling period unknown: give a time column or tr".into())),
    };
    TimeSeries::new(cols.values, tr)
}

pub fn write_series<W: Write>(series: &TimeSeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "value"])?;
    for (i, v) in series.values().iter().enumerate() {
        w.write_record([(i as f64 * series.tr()).to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `index,time,value` rows.
pub fn write_hrf<W: Write>(h: &HrfKernel, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "time", "value"])?;
    for (i, v) in h.coefficients().iter().enumerate() {
        w.write_record([i.to_string(), (i as f64 * h.tr()).to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads kernel coefficients from a `value` column; the kernel is used as is
/// (no renormalization, no onset shift).
pub fn read_hrf<R: Read>(input: R, tr: f64) -> Result<HrfKernel> {
    HrfKernel::new(read_columns(input)?.values, tr, 0)
}

pub fn write_activations<W: Write>(estimate: &ActivationEstimate, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "label", "amplitude"])?;
    for (i, (l, a)) in estimate.labels().iter().zip(estimate.amplitudes()).enumerate() {
        w.write_record([i.to_string(), l.to_string(), a.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_activations<R: Read>(input: R) -> Result<ActivationEstimate> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut labels = Vec::new();
    let mut amps = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |what: &str| Error::Parse { line, reason: format!("bad {what}") };
        let idx: usize = rec.get(0).unwrap_or("").parse().map_err(|_| bad("index"))?;
        if idx != i {
            return Err(bad("index order"));
        }
        labels.push(rec.get(1).unwrap_or("").parse::<u8>().map_err(|_| bad("label"))?);
        amps.push(rec.get(2).unwrap_or("").parse::<f64>().map_err(|_| bad("amplitude"))?);
    }
    let xi: Vec<f64> = amps.clone();
    let est = ActivationEstimate::from_labels(labels, &xi)?;
    if est.amplitudes() != amps.as_slice() {
        return Err(Error::Parse { line: 0, reason: "nonzero amplitude on a noise label".into() });
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::canonical_hrf;

    #[test]
    fn reads_both_layouts() {
        let s = read_series("value\n1.5\n-2\n0.25\n".as_bytes(), Some(2.0)).unwrap();
        assert_eq!(s.values(), &[1.5, -2.0, 0.25]);
        let s = read_series("time,value\n0,1\n2.5,2\n5,3\n".as_bytes(), None).unwrap();
        assert_eq!(s.tr(), 2.5);
        assert_eq!(s.values(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn parse_errors_name_the_line() {
        match read_series("value\n1\nabc\n3\n".as_bytes(), Some(1.0)) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        match read_series("value\n1\n2\nNaN\n".as_bytes(), Some(1.0)) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(read_series("".as_bytes(), Some(1.0)), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read_series("amplitude\n1\n".as_bytes(), Some(1.0)), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn round_trips() {
        let s = TimeSeries::new(vec![0.1, 1.0 / 3.0, -7e-300, 2.5e10], 2.5).unwrap();
        let mut buf = Vec::new();
        write_series(&s, &mut buf).unwrap();
        assert_eq!(read_series(buf.as_slice(), None).unwrap(), s);

        let h = canonical_hrf(2.5, 1, 32.0).unwrap();
        let mut buf = Vec::new();
        write_hrf(&h, &mut buf).unwrap();
        assert_eq!(read_hrf(buf.as_slice(), 2.5).unwrap().coefficients(), h.coefficients());

        let e = ActivationEstimate::from_labels(vec![2, 1, 2, 1], &[0.3, 1.0 / 7.0, 2.0, -1.25]).unwrap();
        let mut buf = Vec::new();
        write_activations(&e, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("index,label,amplitude\n0,2,0\n"));
        assert_eq!(read_activations(buf.as_slice()).unwrap(), e);
    }
}
