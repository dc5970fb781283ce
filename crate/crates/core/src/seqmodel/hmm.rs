use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::gmm::GmmState;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Label of the inter-word gap model.
pub const SPACE: &str = "<sp>";

/// Left-to-right HMM for one symbol. Each state either loops or moves to the
/// next state; the last state's forward move leaves the model.
#[derive(Debug, Clone, PartialEq)]
pub struct CharHmm<T> {
    pub label: String,
    pub states: Vec<GmmState<T>>,
    log_self: Vec<T>,
    log_next: Vec<T>,
}

impl<T: Scalar> CharHmm<T> {
    /// Model with `states` copies of `emission` and even self/forward odds.
    pub fn flat(label: impl Into<String>, states: usize, emission: GmmState<T>) -> Self {
        let half = T::lit(0.5).ln();
        CharHmm {
            label: label.into(),
            states: vec![emission; states],
            log_self: vec![half; states],
            log_next: vec![half; states],
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    #[inline]
    pub fn log_self(&self, j: usize) -> T {
        self.log_self[j]
    }

    #[inline]
    pub fn log_next(&self, j: usize) -> T {
        self.log_next[j]
    }

    /// Sets state `j` to loop with probability `p_self`.
    pub fn set_self_prob(&mut self, j: usize, p_self: T) {
        self.log_self[j] = p_self.ln();
        self.log_next[j] = (T::one() - p_self).ln();
    }
}

/// The models a network can reference, indexed by label.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSet<T> {
    dim: usize,
    models: Vec<CharHmm<T>>,
    index: HashMap<String, usize>,
    offsets: Vec<usize>,
}

impl<T: Scalar> ModelSet<T> {
    pub fn new(dim: usize, models: Vec<CharHmm<T>>) -> Result<Self> {
        let mut index = HashMap::new();
        let mut offsets = Vec::with_capacity(models.len() + 1);
        let mut total = 0;
        for (i, m) in models.iter().enumerate() {
            if m.is_empty() {
                return Err(Error::InvalidInput(format!("model {:?} has no states", m.label)));
            }
            if m.states.iter().any(|s| s.dim() != dim) {
                return Err(Error::DimensionMismatch { expected: dim, got: m.states[0].dim() });
            }
            if index.insert(m.label.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate model label {:?}", m.label)));
            }
            offsets.push(total);
            total += m.len();
        }
        offsets.push(total);
        Ok(ModelSet { dim, models, index, offsets })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn models(&self) -> &[CharHmm<T>] {
        &self.models
    }

    #[inline]
    pub fn model(&self, i: usize) -> &CharHmm<T> {
        &self.models[i]
    }

    pub(crate) fn model_mut(&mut self, i: usize) -> &mut CharHmm<T> {
        &mut self.models[i]
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.models.iter().map(|m| m.label.as_str())
    }

    pub fn get(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    /// Index of `label`, or `OutOfVocabulary`.
    pub fn require(&self, label: &str) -> Result<usize> {
        self.get(label).ok_or_else(|| Error::OutOfVocabulary(label.to_string()))
    }

    pub fn space(&self) -> Result<usize> {
        self.require(SPACE)
    }

    /// Global id of state `j` of model `m`, used by emission tables.
    #[inline]
    pub fn state_id(&self, m: usize, j: usize) -> usize {
        self.offsets[m] + j
    }

    pub fn total_states(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub(crate) fn state(&self, id: usize) -> &GmmState<T> {
        let m = self.offsets.partition_point(|&o| o <= id) - 1;
        &self.models[m].states[id - self.offsets[m]]
    }

    /// `ZSHM` encoding, little endian: magic, version, model count, dim;
    /// per model the label (u32 length + UTF-8), J, G, then per state the
    /// weights, means and variances (component-major) and the self-loop and
    /// forward log-probabilities, all as f64.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_u32(&mut out, self.models.len() as u32);
        put_u32(&mut out, self.dim as u32);
        for m in &self.models {
            put_u32(&mut out, m.label.len() as u32);
            out.extend_from_slice(m.label.as_bytes());
            let g = m.states[0].components();
            if m.states.iter().any(|s| s.components() != g) {
                return Err(Error::format("model", format!("{:?} mixes mixture sizes", m.label)));
            }
            put_u32(&mut out, m.len() as u32);
            put_u32(&mut out, g as u32);
            for (j, s) in m.states.iter().enumerate() {
                let params = s
                    .weights()
                    .iter()
                    .chain((0..g).flat_map(|k| s.mean(k)))
                    .chain((0..g).flat_map(|k| s.var(k)))
                    .chain([&m.log_self[j], &m.log_next[j]]);
                for v in params {
                    out.extend_from_slice(&v.as_f64().to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::format("model", "missing ZSHM header"));
        }
        if r.u32()? != VERSION {
            return Err(Error::format("model", "unsupported version"));
        }
        let count = r.u32()? as usize;
        let dim = r.u32()? as usize;
        let mut models = Vec::with_capacity(count);
        for _ in 0..count {
            let n = r.u32()? as usize;
            let label = String::from_utf8(r.take(n)?.to_vec()).map_err(|e| Error::format("model", e.to_string()))?;
            let (states, g) = (r.u32()? as usize, r.u32()? as usize);
            let mut hmm = CharHmm { label, states: Vec::new(), log_self: Vec::new(), log_next: Vec::new() };
            for _ in 0..states {
                let weights = r.reals(g)?;
                let means = r.reals(g * dim)?;
                let vars = r.reals(g * dim)?;
                hmm.states.push(GmmState::new(weights, means, vars)?);
                hmm.log_self.push(T::lit(r.f64()?));
                hmm.log_next.push(T::lit(r.f64()?));
            }
            models.push(hmm);
        }
        if r.pos != bytes.len() {
            return Err(Error::format("model", "trailing bytes"));
        }
        Self::new(dim, models)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

const MAGIC: &[u8; 4] = b"ZSHM";
const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::format("model", "truncated file"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn reals<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>> {
        (0..n).map(|_| self.f64().map(T::lit)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ModelSet<f64> {
        let e = GmmState::new(vec![0.25, 0.75], vec![0.0, 1.0, 2.0, -1.0], vec![1.0, 0.5, 2.0, 0.1]).unwrap();
        let mut a = CharHmm::flat("a", 3, e.clone());
        a.set_self_prob(1, 0.9);
        ModelSet::new(2, vec![a, CharHmm::flat(SPACE, 2, e)]).unwrap()
    }

    #[test]
    fn transitions_are_normalised() {
        let set = toy();
        for m in set.models() {
            for j in 0..m.len() {
                assert!((m.log_self(j).exp() + m.log_next(j).exp() - 1.0).abs() < 1e-9);
            }
        }
        assert_eq!(set.state_id(1, 1), 4);
        assert_eq!(set.total_states(), 5);
        assert!(matches!(set.require("zz"), Err(Error::OutOfVocabulary(_))));
        assert_eq!(set.space().unwrap(), 1);
    }

    #[test]
    fn save_load_save_is_identical() {
        let set = toy();
        let bytes = set.to_bytes().unwrap();
        let back = ModelSet::<f64>::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(back, set);
        assert!(ModelSet::<f64>::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }
}
