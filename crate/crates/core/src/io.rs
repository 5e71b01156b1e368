//! Path CSV files: header `t,value`, one row per grid node.

use std::io::{Read, Write};

use crate::error::{FgdError, Result};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_path_csv<W: Write>(out: W, times: &[f64], values: &[f64]) -> Result<()> {
    if times.len() != values.len() {
        return Err(FgdError::GridMismatch("times and values differ in length".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| FgdError::Io(e.to_string());
    w.write_record(["t", "value"]).map_err(io)?;
    for (t, v) in times.iter().zip(values) {
        w.write_record([fmt_f64(*t), fmt_f64(*v)]).map_err(io)?;
    }
    w.flush().map_err(|e| FgdError::Io(e.to_string()))
}

/// A path read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTable {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl PathTable {
    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0) - self.times.first().copied().unwrap_or(0.0)
    }
}

pub fn read_path_csv<R: Read>(input: R) -> Result<PathTable> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(|e| FgdError::Io(e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "value" {
        return Err(FgdError::Io(format!("expected header `t,value`, got {:?}", headers.iter().collect::<Vec<_>>())));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| FgdError::Io(e.to_string()))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| FgdError::Io(format!("row {}: {e}", line + 2)))
        };
        times.push(parse(&rec[0])?);
        values.push(parse(&rec[1])?);
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FgdError::Io("times must be strictly increasing".into()));
    }
    Ok(PathTable { times, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(values in prop::collection::vec(-1e300f64..1e300, 1..40)) {
            let times: Vec<f64> = (0..values.len()).map(|k| k as f64 / 7.0).collect();
            let mut buf = Vec::new();
            write_path_csv(&mut buf, &times, &values).unwrap();
            let back = read_path_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back.times, times);
            prop_assert_eq!(back.values, values);
        }
    }

    #[test]
    fn bad_header_rejected() {
        assert!(read_path_csv("x,y\n0,1\n".as_bytes()).is_err());
        assert!(read_path_csv("t,value\n0,1\n0,2\n".as_bytes()).is_err());
    }
}
