use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which image layer a feature sequence was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Foreground,
    Background,
    Concatenated,
}

/// Ordered frames of equal dimension, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence<T> {
    data: Vec<T>,
    dim: usize,
    provenance: Provenance,
}

const MAGIC: &[u8; 4] = b"ZSFT";
const VERSION: u32 = 1;

impl<T: Scalar> FeatureSequence<T> {
    pub fn new(dim: usize, provenance: Provenance) -> Self {
        FeatureSequence { data: Vec::new(), dim, provenance }
    }

    pub fn from_frames(frames: &[Vec<T>], provenance: Provenance) -> Result<Self> {
        let dim = frames.first().map_or(0, Vec::len);
        let mut seq = FeatureSequence::new(dim, provenance);
        for f in frames {
            seq.push(f)?;
        }
        Ok(seq)
    }

    pub fn push(&mut self, frame: &[T]) -> Result<()> {
        if frame.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: frame.len() });
        }
        if frame.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("feature frames must be finite".into()));
        }
        self.data.extend_from_slice(frame);
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    #[inline]
    pub fn frame(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    /// Frames `[start, end)` as a new sequence.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        FeatureSequence {
            data: self.data[start * self.dim..end * self.dim].to_vec(),
            dim: self.dim,
            provenance: self.provenance,
        }
    }

    /// Frame-wise concatenation `[self | other]`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: other.len() });
        }
        let dim = self.dim + other.dim;
        let mut data = Vec::with_capacity(self.len() * dim);
        for (a, b) in self.frames().zip(other.frames()) {
            data.extend_from_slice(a);
            data.extend_from_slice(b);
        }
        Ok(FeatureSequence { data, dim, provenance: Provenance::Concatenated })
    }

    /// Little-endian `ZSFT` encoding: magic, version, frame count and
    /// dimension as u32, then frames as f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.data.len() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], provenance: Provenance) -> Result<Self> {
        let bad = |m: &str| Error::format("feature", m.to_string());
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(bad("missing ZSFT header"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
        if word(4) != VERSION as usize {
            return Err(bad("unsupported version"));
        }
        let (count, dim) = (word(8), word(12));
        if bytes.len() != 16 + count * dim * 8 {
            return Err(bad("payload length does not match header"));
        }
        let data = bytes[16..]
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().unwrap())))
            .collect();
        Ok(FeatureSequence { data, dim, provenance })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path, provenance: Provenance) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, provenance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let seq = FeatureSequence::from_frames(&[vec![1.0f64, 2.0], vec![3.0, 4.0]], Provenance::Foreground).unwrap();
        let b = seq.to_bytes();
        assert_eq!(&b[..4], b"ZSFT");
        assert_eq!(&b[4..16], &[1, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(f64::from_le_bytes(b[16..24].try_into().unwrap()), 1.0);
        assert!(FeatureSequence::<f64>::from_bytes(&b[..20], Provenance::Foreground).is_err());
    }

    #[test]
    fn rejects_ragged_and_non_finite_frames() {
        let mut seq = FeatureSequence::<f64>::new(2, Provenance::Foreground);
        assert!(seq.push(&[1.0]).is_err());
        assert!(seq.push(&[1.0, f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn bytes_round_trip(frames in proptest::collection::vec(proptest::collection::vec(-1e6f64..1e6, 3), 0..20)) {
            let seq = FeatureSequence::from_frames(&frames, Provenance::Background).unwrap();
            let bytes = seq.to_bytes();
            let back = FeatureSequence::<f64>::from_bytes(&bytes, Provenance::Background).unwrap();
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }
}
