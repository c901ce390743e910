//! Read-only WFDB records, format 16 only.

use std::path::Path;

use crate::dsp::RawRecord;
use crate::error::{Error, Result};

/// Gain assumed when a signal line leaves it out or gives 0.
pub const DEFAULT_GAIN: f64 = 200.0;

#[derive(Debug, Clone, PartialEq)]
pub struct WfdbSignal {
    pub file: String,
    pub format: u32,
    /// Byte offset of the first sample in the signal file.
    pub byte_offset: usize,
    pub gain: f64,
    pub baseline: i32,
    pub units: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WfdbHeader {
    pub record: String,
    pub fs: f64,
    /// Samples per channel; `None` when the header omits it.
    pub samples: Option<usize>,
    pub signals: Vec<WfdbSignal>,
}

impl WfdbHeader {
    pub fn channels(&self) -> usize {
        self.signals.len()
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn leading_number(s: &str) -> &str {
    let end = s
        .find(|c: char| {
            !(c.is_ascii_digit() || c == '.' || c == '-' || c == '+' || c == 'e' || c == 'E')
        })
        .unwrap_or(s.len());
    &s[..end]
}

fn parse_signal_line(line_no: usize, line: &str) -> Result<WfdbSignal> {
    let mut tokens = line.split_whitespace();
    let file = tokens
        .next()
        .ok_or_else(|| parse_err(line_no, "missing signal file name"))?
        .to_string();
    let fmt_tok = tokens
        .next()
        .ok_or_else(|| parse_err(line_no, "missing storage format"))?;
    // format[xSPF][:skew][+offset]
    let digits: String = fmt_tok.chars().take_while(|c| c.is_ascii_digit()).collect();
    let format: u32 = digits
        .parse()
        .map_err(|_| parse_err(line_no, format!("bad storage format {fmt_tok:?}")))?;
    let byte_offset = match fmt_tok.split_once('+') {
        Some((_, off)) => off
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad byte offset in {fmt_tok:?}")))?,
        None => 0,
    };
    if fmt_tok[digits.len()..].contains('x') || fmt_tok[digits.len()..].contains(':') {
        return Err(parse_err(
            line_no,
            "multi-frequency and skewed signals are not supported",
        ));
    }
    if format != 16 {
        return Err(Error::UnsupportedFormat(format));
    }

    let rest: Vec<&str> = tokens.collect();
    let mut gain = DEFAULT_GAIN;
    let mut baseline = 0;
    let mut units = String::new();
    let mut pos = 0;
    if let Some(tok) = rest.first() {
        let num = leading_number(tok);
        if !num.is_empty() {
            let g: f64 = num
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad gain {tok:?}")))?;
            if g != 0.0 {
                gain = g;
            }
            let mut tail = &tok[num.len()..];
            if let Some(inner) = tail.strip_prefix('(') {
                let (b, after) = inner
                    .split_once(')')
                    .ok_or_else(|| parse_err(line_no, format!("unclosed baseline in {tok:?}")))?;
                baseline = b
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("bad baseline {b:?}")))?;
                tail = after;
            }
            if let Some(u) = tail.strip_prefix('/') {
                units = u.to_string();
            } else if !tail.is_empty() {
                return Err(parse_err(line_no, format!("bad gain field {tok:?}")));
            }
            pos = 1;
            // adc resolution, adc zero, initial value, checksum, block size
            while pos < rest.len() && pos <= 5 && rest[pos].parse::<i64>().is_ok() {
                pos += 1;
            }
        }
    }
    Ok(WfdbSignal {
        file,
        format,
        byte_offset,
        gain,
        baseline,
        units,
        label: rest[pos..].join(" "),
    })
}

/// Parses a `.hea` header. Comment lines (`#`) and blank lines are skipped.
pub fn parse_wfdb_header(text: &str) -> Result<WfdbHeader> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (line_no, record_line) = lines.next().ok_or_else(|| parse_err(1, "empty header"))?;
    let fields: Vec<&str> = record_line.split_whitespace().collect();
    if fields.len() < 2 {
        return Err(parse_err(
            line_no,
            "record line needs a name and a signal count",
        ));
    }
    if fields[0].contains('/') {
        return Err(parse_err(
            line_no,
            "multi-segment records are not supported",
        ));
    }
    let nsig: usize = fields[1]
        .parse()
        .map_err(|_| parse_err(line_no, format!("bad signal count {:?}", fields[1])))?;
    if nsig == 0 {
        return Err(parse_err(line_no, "record declares no signals"));
    }
    let fs = match fields.get(2) {
        Some(tok) => {
            let num = leading_number(tok);
            let fs: f64 = num
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad sampling frequency {tok:?}")))?;
            if !(fs > 0.0) {
                return Err(parse_err(line_no, "sampling frequency must be positive"));
            }
            fs
        }
        None => 250.0,
    };
    let samples = match fields.get(3) {
        Some(tok) => Some(
            tok.parse()
                .map_err(|_| parse_err(line_no, format!("bad sample count {tok:?}")))?,
        ),
        None => None,
    };
    let mut signals = Vec::with_capacity(nsig);
    for _ in 0..nsig {
        let (n, l) = lines.next().ok_or_else(|| {
            parse_err(
                line_no,
                format!("header declares {nsig} signals, fewer found"),
            )
        })?;
        signals.push(parse_signal_line(n, l)?);
    }
    if signals
        .iter()
        .any(|s| s.file != signals[0].file || s.byte_offset != signals[0].byte_offset)
    {
        return Err(parse_err(
            line_no,
            "signals split across files are not supported",
        ));
    }
    Ok(WfdbHeader {
        record: fields[0].to_string(),
        fs,
        samples,
        signals,
    })
}

/// Physical values of one channel from interleaved little-endian 16-bit
/// frames: `(raw - baseline) / gain`.
pub fn read_wfdb_signal(bytes: &[u8], hdr: &WfdbHeader, channel: usize) -> Result<Vec<f64>> {
    let sig = hdr.signals.get(channel).ok_or_else(|| {
        Error::InvalidArgument(format!("channel {channel} of {}", hdr.channels()))
    })?;
    let nsig = hdr.channels();
    let frame = 2 * nsig;
    let offset = sig.byte_offset;
    let payload = bytes.len().saturating_sub(offset);
    let frames = match hdr.samples {
        Some(n) => {
            let expected = offset + n * frame;
            if bytes.len() < expected {
                return Err(Error::Truncated {
                    expected,
                    found: bytes.len(),
                });
            }
            if bytes.len() > expected {
                return Err(Error::Corrupt(format!(
                    "{} bytes after the last declared frame",
                    bytes.len() - expected
                )));
            }
            n
        }
        None => {
            if bytes.len() < offset || payload % frame != 0 {
                return Err(Error::Truncated {
                    expected: offset + (payload / frame + 1) * frame,
                    found: bytes.len(),
                });
            }
            payload / frame
        }
    };
    let base = f64::from(sig.baseline);
    Ok((0..frames)
        .map(|f| {
            let at = offset + f * frame + 2 * channel;
            let raw = i16::from_le_bytes([bytes[at], bytes[at + 1]]);
            (f64::from(raw) - base) / sig.gain
        })
        .collect())
}

/// Interleaves channels into format-16 bytes.
pub fn write_format16(channels: &[Vec<i16>]) -> Vec<u8> {
    let n = channels.first().map_or(0, Vec::len);
    let mut out = Vec::with_capacity(n * channels.len() * 2);
    for f in 0..n {
        for c in channels {
            out.extend_from_slice(&c[f].to_le_bytes());
        }
    }
    out
}

/// Loads `<dir>/<record>.hea` and its signal file.
pub fn load_wfdb_record(dir: &Path, record: &str) -> Result<RawRecord> {
    let text = std::fs::read_to_string(dir.join(format!("{record}.hea")))?;
    let hdr = parse_wfdb_header(&text)?;
    let bytes = std::fs::read(dir.join(&hdr.signals[0].file))?;
    let channels = (0..hdr.channels())
        .map(|c| read_wfdb_signal(&bytes, &hdr, c))
        .collect::<Result<Vec<_>>>()?;
    let names = hdr.signals.iter().map(|s| s.label.clone()).collect();
    RawRecord::new(channels, hdr.fs, names)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_header() {
        let h = parse_wfdb_header("rec 1 100 1000\nrec.dat 16 1000(0)/mV ECG_I").unwrap();
        assert_eq!(h.channels(), 1);
        assert_eq!(h.fs, 100.0);
        assert_eq!(h.samples, Some(1000));
        let s = &h.signals[0];
        assert_eq!(
            (s.gain, s.baseline, s.label.as_str(), s.units.as_str()),
            (1000.0, 0, "ECG_I", "mV")
        );
    }

    #[test]
    fn full_signal_line_and_defaults() {
        let text = "# comment\n00001_lr 2 100 1000\n\
                    00001_lr.dat 16 1000.0(-5)/mV 16 0 -119 1508 0 I\n\
                    00001_lr.dat 16\n";
        let h = parse_wfdb_header(text).unwrap();
        assert_eq!(h.signals[0].baseline, -5);
        assert_eq!(h.signals[0].label, "I");
        assert_eq!(
            (h.signals[1].gain, h.signals[1].baseline),
            (DEFAULT_GAIN, 0)
        );
        assert_eq!(h.signals[1].label, "");
    }

    #[test]
    fn header_errors() {
        assert!(matches!(
            parse_wfdb_header("rec 0 100 10"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_wfdb_header("rec 1 100 10\nrec.dat 212 200 ECG"),
            Err(Error::UnsupportedFormat(212))
        ));
        assert!(matches!(
            parse_wfdb_header("rec x 100"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_wfdb_header("rec 2 100 10\nrec.dat 16"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn gain_and_interleave() {
        let h = parse_wfdb_header("r 1 100 3\nr.dat 16 1000(0)/mV a").unwrap();
        let bytes = write_format16(&[vec![0, 1000, -1000]]);
        assert_eq!(
            read_wfdb_signal(&bytes, &h, 0).unwrap(),
            vec![0.0, 1.0, -1.0]
        );

        let h2 =
            parse_wfdb_header("r 2 100 2\nr.dat 16 100(10)/mV a\nr.dat 16 200(0)/mV b").unwrap();
        let bytes = write_format16(&[vec![110, 60], vec![400, -200]]);
        assert_eq!(read_wfdb_signal(&bytes, &h2, 1).unwrap(), vec![2.0, -1.0]);
        assert_eq!(read_wfdb_signal(&bytes, &h2, 0).unwrap(), vec![1.0, 0.5]);
        assert!(matches!(
            read_wfdb_signal(&bytes[..bytes.len() - 4], &h2, 0),
            Err(Error::Truncated {
                expected: 8,
                found: 4
            })
        ));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(
            read_wfdb_signal(&long, &h2, 0),
            Err(Error::Corrupt(_))
        ));
    }
}
