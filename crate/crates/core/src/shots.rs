//! Packed detector and observable bits for a batch of shots.

use std::io::{Read, Write};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"IDSB";
const VERSION: u32 = 1;

/// Row-major packed detector bits: shot `s` occupies `words_per_row` words starting at
/// `s * words_per_row`, detector `d` is bit `d % 64` of word `d / 64`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShotBatch {
    pub n_shots: usize,
    pub n_detectors: usize,
    pub seed: u64,
    words_per_row: usize,
    detector_bits: Vec<u64>,
    observable_bits: Vec<u64>,
}

impl ShotBatch {
    pub fn zeros(n_shots: usize, n_detectors: usize, seed: u64) -> Self {
        let words_per_row = n_detectors.div_ceil(64);
        ShotBatch {
            n_shots,
            n_detectors,
            seed,
            words_per_row,
            detector_bits: vec![0; n_shots * words_per_row],
            observable_bits: vec![0; n_shots.div_ceil(64)],
        }
    }

    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    pub fn detector_row(&self, shot: usize) -> &[u64] {
        let w = self.words_per_row;
        &self.detector_bits[shot * w..(shot + 1) * w]
    }

    pub fn detector(&self, shot: usize, det: usize) -> bool {
        (self.detector_row(shot)[det / 64] >> (det % 64)) & 1 == 1
    }

    pub fn set_detector(&mut self, shot: usize, det: usize, value: bool) {
        let word = &mut self.detector_bits[shot * self.words_per_row + det / 64];
        let mask = 1u64 << (det % 64);
        if value {
            *word |= mask;
        } else {
            *word &= !mask;
        }
    }

    pub fn observable(&self, shot: usize) -> bool {
        (self.observable_bits[shot / 64] >> (shot % 64)) & 1 == 1
    }

    pub fn set_observable(&mut self, shot: usize, value: bool) {
        let mask = 1u64 << (shot % 64);
        if value {
            self.observable_bits[shot / 64] |= mask;
        } else {
            self.observable_bits[shot / 64] &= !mask;
        }
    }

    /// Indices of flagged detectors in shot `shot`.
    pub fn flagged(&self, shot: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for (w, &word) in self.detector_row(shot).iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                out.push(w * 64 + bits.trailing_zeros() as usize);
                bits &= bits - 1;
            }
        }
        out
    }

    pub fn count_detection_events(&self) -> usize {
        self.detector_bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn count_observable_flips(&self) -> usize {
        self.observable_bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Per-detector firing counts.
    pub fn detector_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_detectors];
        for s in 0..self.n_shots {
            for d in self.flagged(s) {
                counts[d] += 1;
            }
        }
        counts
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.n_shots as u64).to_le_bytes())?;
        w.write_all(&(self.n_detectors as u64).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        let mut buf = Vec::with_capacity(8 * (self.detector_bits.len() + self.observable_bits.len()));
        for word in self.detector_bits.iter().chain(&self.observable_bits) {
            buf.extend_from_slice(&word.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a shot batch file".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != VERSION {
            return Err(Error::Format("unsupported shot batch version".into()));
        }
        let mut b8 = [0u8; 8];
        let mut next = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut b8)?;
            Ok(u64::from_le_bytes(b8))
        };
        let n_shots = next(&mut r)? as usize;
        let n_detectors = next(&mut r)? as usize;
        let seed = next(&mut r)?;
        let mut batch = ShotBatch::zeros(n_shots, n_detectors, seed);
        let total = batch.detector_bits.len() + batch.observable_bits.len();
        let mut bytes = vec![0u8; 8 * total];
        r.read_exact(&mut bytes)?;
        let mut words = bytes.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap()));
        for w in batch.detector_bits.iter_mut().chain(batch.observable_bits.iter_mut()) {
            *w = words.next().unwrap();
        }
        Ok(batch)
    }

    /// One line per shot: detector bits as `0`/`1`, a space, then the observable bit.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.n_shots * (self.n_detectors + 3));
        for s in 0..self.n_shots {
            for d in 0..self.n_detectors {
                out.push(if self.detector(s, d) { '1' } else { '0' });
            }
            out.push(' ');
            out.push(if self.observable(s) { '1' } else { '0' });
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str, seed: u64) -> Result<Self> {
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        let n_detectors = lines.first().map_or(0, |l| l.split_whitespace().next().unwrap_or("").len());
        let mut batch = ShotBatch::zeros(lines.len(), n_detectors, seed);
        for (s, line) in lines.iter().enumerate() {
            let mut parts = line.split_whitespace();
            let (dets, obs) = match (parts.next(), parts.next(), parts.next()) {
                (Some(d), Some(o), None) => (d, o),
                _ => return Err(Error::Format(format!("line {}: expected '<bits> <bit>'", s + 1))),
            };
            if dets.len() != n_detectors {
                return Err(Error::Format(format!("line {}: inconsistent row length", s + 1)));
            }
            for (d, c) in dets.chars().enumerate() {
                match c {
                    '0' => {}
                    '1' => batch.set_detector(s, d, true),
                    _ => return Err(Error::Format(format!("line {}: bad bit '{c}'", s + 1))),
                }
            }
            match obs {
                "0" => {}
                "1" => batch.set_observable(s, true),
                _ => return Err(Error::Format(format!("line {}: bad observable bit", s + 1))),
            }
        }
        Ok(batch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ShotBatch {
        let mut b = ShotBatch::zeros(70, 130, 42);
        b.set_detector(0, 0, true);
        b.set_detector(3, 129, true);
        b.set_detector(69, 64, true);
        b.set_observable(65, true);
        b
    }

    #[test]
    fn bit_access() {
        let b = sample();
        assert!(b.detector(3, 129));
        assert!(!b.detector(3, 128));
        assert_eq!(b.flagged(69), vec![64]);
        assert!(b.observable(65));
        assert_eq!(b.count_detection_events(), 3);
        assert_eq!(b.count_observable_flips(), 1);
    }

    #[test]
    fn binary_roundtrip() {
        let b = sample();
        let mut buf = Vec::new();
        b.write_binary(&mut buf).unwrap();
        assert_eq!(ShotBatch::read_binary(&buf[..]).unwrap(), b);
        assert!(ShotBatch::read_binary(&b"nope0000"[..]).is_err());
    }

    #[test]
    fn text_roundtrip() {
        let b = sample();
        let t = b.to_text();
        assert_eq!(t.lines().count(), 70);
        assert_eq!(ShotBatch::from_text(&t, 42).unwrap(), b);
    }
}
