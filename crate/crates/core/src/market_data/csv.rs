use std::io::{BufRead, Write};

use super::{Bar, BarSeries};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "timestamp,open,high,low,close,volume";

/// Parses `timestamp,open,high,low,close,volume` rows. Line numbers in errors
/// are 1-based and count the header.
pub fn parse_bar_csv<R: BufRead>(reader: R) -> Result<BarSeries> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => return Err(Error::Parse { line: 1, msg: "missing header".into() }),
    };
    if header.trim_end_matches('\r') != CSV_HEADER {
        return Err(Error::Parse { line: 1, msg: format!("expected header `{CSV_HEADER}`") });
    }

    let mut bars: Vec<Bar> = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Parse { line: line_no, msg: format!("expected 6 columns, found {}", fields.len()) });
        }
        let timestamp: i64 = fields[0]
            .parse()
            .map_err(|_| Error::Parse { line: line_no, msg: format!("timestamp `{}` is not an integer", fields[0]) })?;
        let mut nums = [0.0f64; 5];
        for (slot, (name, raw)) in
            nums.iter_mut().zip(["open", "high", "low", "close", "volume"].iter().zip(&fields[1..]))
        {
            *slot = raw
                .parse()
                .map_err(|_| Error::Parse { line: line_no, msg: format!("{name} `{raw}` is not a number") })?;
        }
        let bar = Bar { timestamp, open: nums[0], high: nums[1], low: nums[2], close: nums[3], volume: nums[4] };
        bar.validate().map_err(|msg| Error::Parse { line: line_no, msg })?;
        if let Some(prev) = bars.last() {
            if timestamp <= prev.timestamp {
                return Err(Error::Ordering { line: line_no, timestamp });
            }
        }
        bars.push(bar);
    }
    BarSeries::new("", bars)
}

pub fn parse_bar_csv_str(text: &str) -> Result<BarSeries> {
    parse_bar_csv(text.as_bytes())
}

/// Writes the series with shortest round-trip float formatting.
pub fn write_bar_csv<W: Write>(series: &BarSeries, mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for b in series.bars() {
        writeln!(out, "{},{},{},{},{},{}", b.timestamp, b.open, b.high, b.low, b.close, b.volume)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row() {
        let s = parse_bar_csv_str("timestamp,open,high,low,close,volume\n1700000000000000,100,101,99,100.5,5000\n")
            .unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.bars()[0].close, 100.5);
        assert_eq!(s.bars()[0].timestamp, 1_700_000_000_000_000);
    }

    #[test]
    fn header_only_is_empty() {
        let s = parse_bar_csv_str("timestamp,open,high,low,close,volume\n").unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn equal_timestamps_name_line_three() {
        let err = parse_bar_csv_str("timestamp,open,high,low,close,volume\n1,100,101,99,100,1\n1,100,101,99,100,1\n")
            .unwrap_err();
        assert!(matches!(err, Error::Ordering { line: 3, .. }), "{err}");
    }

    #[test]
    fn crlf_accepted() {
        let s =
            parse_bar_csv_str("timestamp,open,high,low,close,volume\r\n1,100,101,99,100,1\r\n2,100,101,99,100,1\r\n")
                .unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn malformed_rows() {
        let err = parse_bar_csv_str("timestamp,open,high,low,close,volume\n1,100,101,99,100\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_bar_csv_str("timestamp,open,high,low,close,volume\n1,100,101,99,100,1\n2,1x0,101,99,100,1\n")
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = parse_bar_csv_str("open,high\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn inconsistent_ohlc_rejected() {
        let err = parse_bar_csv_str("timestamp,open,high,low,close,volume\n1,100,99,98,100,1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
