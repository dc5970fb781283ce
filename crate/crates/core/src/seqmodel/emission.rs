use super::hmm::ModelSet;
use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::scalar::Scalar;

/// Per-frame log emission scores for every state of a model set.
#[derive(Debug, Clone)]
pub struct EmissionTable<T> {
    frames: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> EmissionTable<T> {
    /// Scores all states, or only those of `subset` (others read `-inf`).
    pub fn compute(models: &ModelSet<T>, seq: &FeatureSequence<T>, subset: Option<&[usize]>) -> Result<Self> {
        if seq.dim() != models.dim() {
            return Err(Error::DimensionMismatch { expected: models.dim(), got: seq.dim() });
        }
        let width = models.total_states();
        let frames = seq.len();
        let mut data = vec![T::neg_infinity(); frames * width];
        let mut wanted = vec![subset.is_none(); models.len()];
        for &m in subset.unwrap_or(&[]) {
            wanted[m] = true;
        }
        for t in 0..frames {
            let x = seq.frame(t);
            let row = &mut data[t * width..(t + 1) * width];
            for (m, model) in models.models().iter().enumerate() {
                if !wanted[m] {
                    continue;
                }
                for (j, s) in model.states.iter().enumerate() {
                    row[models.state_id(m, j)] = s.log_pdf_unchecked(x);
                }
            }
        }
        Ok(EmissionTable { frames, width, data })
    }

    /// Table from raw scores laid out frame-major.
    pub fn from_raw(frames: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != frames * width {
            return Err(Error::DimensionMismatch { expected: frames * width, got: data.len() });
        }
        Ok(EmissionTable { frames, width, data })
    }

    #[inline]
    pub fn frames(&self) -> usize {
        self.frames
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, t: usize, state: usize) -> T {
        self.data[t * self.width + state]
    }

    /// Adds `c` to every score.
    pub fn shift(&mut self, c: T) {
        for v in &mut self.data {
            *v += c;
        }
    }
}
