use std::io::Write;

use super::{put_f32s, to_u32, Reader};
use crate::dsp::SignalWindow;
use crate::error::{invalid, Error, Result};
use crate::noise::{compute_snr, NoisyCleanPair};

const MAGIC: &[u8; 4] = b"ECGD";
const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetHeader {
    pub count: usize,
    pub window_len: usize,
    pub fs: f64,
}

/// Writes pairs as an ECGD file. Samples and SNRs are stored as f32.
pub fn write_dataset<W: Write>(out: &mut W, pairs: &[NoisyCleanPair]) -> Result<()> {
    let (len, fs) = pairs
        .first()
        .map_or((0, 0.0), |p| (p.clean.len(), p.clean.fs));
    for p in pairs {
        if p.clean.len() != len || p.noisy.len() != len || p.clean.fs != fs || p.noisy.fs != fs {
            return invalid("all pairs must share one window length and sampling rate");
        }
        if p.reference_peaks.iter().any(|&i| i >= len) {
            return invalid("reference peak outside its window");
        }
    }
    let mut buf = Vec::with_capacity(18 + pairs.len() * (12 + 8 * len));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&to_u32(pairs.len(), "pair count")?.to_le_bytes());
    buf.extend_from_slice(&to_u32(len, "window length")?.to_le_bytes());
    buf.extend_from_slice(&(fs as f32).to_le_bytes());
    for p in pairs {
        buf.extend_from_slice(&p.subject_id().to_le_bytes());
        buf.extend_from_slice(&(p.target_snr as f32).to_le_bytes());
        buf.extend_from_slice(&to_u32(p.reference_peaks.len(), "peak count")?.to_le_bytes());
        for &i in &p.reference_peaks {
            buf.extend_from_slice(&to_u32(i, "peak index")?.to_le_bytes());
        }
        put_f32s(&mut buf, p.clean.samples.iter().copied());
        put_f32s(&mut buf, p.noisy.samples.iter().copied());
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Parses an ECGD file. Achieved SNR is recomputed from the stored samples
/// (`+inf` when noisy equals clean).
pub fn read_dataset(bytes: &[u8]) -> Result<(DatasetHeader, Vec<NoisyCleanPair>)> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Corrupt(format!(
            "unsupported dataset version {version}"
        )));
    }
    let count = r.u32()? as usize;
    let len = r.u32()? as usize;
    let fs = f64::from(r.f32()?);
    if count > 0 && (len == 0 || !(fs > 0.0)) {
        return Err(Error::Corrupt(
            "non-empty dataset with empty windows or bad fs".into(),
        ));
    }
    let mut pairs = Vec::with_capacity(count.min(bytes.len() / 8 + 1));
    for _ in 0..count {
        let subject = r.u32()?;
        let target_snr = f64::from(r.f32()?);
        let npeaks = r.u32()? as usize;
        let mut peaks = Vec::with_capacity(npeaks.min(len));
        for _ in 0..npeaks {
            let i = r.u32()? as usize;
            if i >= len {
                return Err(Error::Corrupt(format!(
                    "peak index {i} beyond window of {len}"
                )));
            }
            peaks.push(i);
        }
        let widen = |v: Vec<f32>| v.into_iter().map(f64::from).collect::<Vec<f64>>();
        let clean = widen(r.f32s(len)?);
        let noisy = widen(r.f32s(len)?);
        if clean.iter().chain(&noisy).any(|v| !v.is_finite()) {
            return Err(Error::Corrupt("non-finite sample".into()));
        }
        let achieved_snr = match compute_snr(&clean, &noisy) {
            Ok(v) => v,
            Err(Error::InfiniteSnr) => f64::INFINITY,
            Err(_) => f64::NAN,
        };
        pairs.push(NoisyCleanPair {
            clean: SignalWindow {
                samples: clean,
                fs,
                subject_id: subject,
            },
            noisy: SignalWindow {
                samples: noisy,
                fs,
                subject_id: subject,
            },
            target_snr,
            achieved_snr,
            reference_peaks: peaks,
        });
    }
    r.finish()?;
    Ok((
        DatasetHeader {
            count,
            window_len: len,
            fs,
        },
        pairs,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(seed: u32) -> NoisyCleanPair {
        let clean: Vec<f64> = (0..50)
            .map(|i| ((i as f64) * 0.3 + seed as f64).sin())
            .collect();
        let noisy: Vec<f64> = clean
            .iter()
            .enumerate()
            .map(|(i, v)| v + 0.1 * (i as f64).cos())
            .collect();
        NoisyCleanPair {
            clean: SignalWindow::new(clean, 100.0, seed).unwrap(),
            noisy: SignalWindow::new(noisy, 100.0, seed).unwrap(),
            target_snr: -1.62 + seed as f64,
            achieved_snr: 0.0,
            reference_peaks: vec![3, 20 + seed as usize],
        }
    }

    #[test]
    fn empty_round_trip() {
        let mut buf = Vec::new();
        write_dataset(&mut buf, &[]).unwrap();
        assert_eq!(buf.len(), 18);
        let (h, p) = read_dataset(&buf).unwrap();
        assert_eq!(h.count, 0);
        assert!(p.is_empty());
    }

    #[test]
    fn round_trip_is_stable() {
        let pairs: Vec<_> = (0..3).map(pair).collect();
        let mut a = Vec::new();
        write_dataset(&mut a, &pairs).unwrap();
        let (_, back) = read_dataset(&a).unwrap();
        for (p, q) in pairs.iter().zip(&back) {
            assert_eq!(q.reference_peaks, p.reference_peaks);
            assert_eq!(q.subject_id(), p.subject_id());
            assert_eq!(q.target_snr, f64::from(p.target_snr as f32));
            for (x, y) in p.noisy.samples.iter().zip(&q.noisy.samples) {
                assert_eq!(*y, f64::from(*x as f32));
            }
        }
        let mut b = Vec::new();
        write_dataset(&mut b, &back).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn damaged_files() {
        let mut buf = Vec::new();
        write_dataset(&mut buf, &[pair(0), pair(1)]).unwrap();
        for cut in [3, 17, 40, buf.len() - 1] {
            assert!(
                matches!(read_dataset(&buf[..cut]), Err(Error::Corrupt(_))),
                "cut {cut}"
            );
        }
        let mut extra = buf.clone();
        extra.push(7);
        assert!(matches!(read_dataset(&extra), Err(Error::Corrupt(_))));
        let mut magic = buf.clone();
        magic[0] = b'X';
        assert!(matches!(read_dataset(&magic), Err(Error::Corrupt(_))));
        let mut ver = buf;
        ver[4] = 9;
        assert!(matches!(read_dataset(&ver), Err(Error::Corrupt(_))));
    }
}
