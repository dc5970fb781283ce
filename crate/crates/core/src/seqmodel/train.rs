use rayon::prelude::*;

use super::decode::{backward, forward, StateGraph};
use super::emission::EmissionTable;
use super::gmm::GmmState;
use super::hmm::{CharHmm, ModelSet};
use super::network::build_chain;
use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::scalar::Scalar;

/// Lines per accumulation chunk. Fixed so results do not depend on the
/// thread count.
const CHUNK: usize = 16;

/// Components with less expected occupancy keep their previous mean and
/// variance.
const MIN_COMPONENT_OCCUPANCY: f64 = 1e-3;

/// Training schedule and numerical guards.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// States per model.
    pub states: usize,
    /// Final mixture size; reached by repeated doubling from one.
    pub mixtures: usize,
    /// EM iterations at each mixture size.
    pub iterations_per_stage: usize,
    /// Variance floor as a fraction of the global per-dimension variance.
    pub var_floor_ratio: f64,
    /// Absolute lower bound on the floor.
    pub min_var: f64,
    /// Frame-state posteriors below this are left out of the Gaussian statistics.
    pub prune: f64,
    /// Mean offset of split components, in standard deviations.
    pub split_offset: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            states: 6,
            mixtures: 32,
            iterations_per_stage: 4,
            var_floor_ratio: 1e-4,
            min_var: 1e-6,
            prune: 1e-7,
            split_offset: 0.2,
        }
    }
}

/// A training sequence and the model indices it spells, in order.
#[derive(Debug, Clone)]
pub struct TrainLine<'a, T> {
    pub features: &'a FeatureSequence<T>,
    pub symbols: Vec<usize>,
}

/// Outcome of one EM iteration. The likelihood is that of the parameters
/// the iteration started from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationStats {
    pub iteration: usize,
    pub mixtures: usize,
    pub log_likelihood: f64,
    pub lines: usize,
    pub skipped: usize,
}

/// Per-iteration record of a training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub iterations: Vec<IterationStats>,
}

impl TrainingLog {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("iteration\tmixtures\tlog_likelihood\tlines\tskipped\n");
        for it in &self.iterations {
            s += &format!("{}\t{}\t{:.6}\t{}\t{}\n", it.iteration, it.mixtures, it.log_likelihood, it.lines, it.skipped);
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,mixtures,log_likelihood,lines,skipped\n");
        for it in &self.iterations {
            s += &format!("{},{},{:.6},{},{}\n", it.iteration, it.mixtures, it.log_likelihood, it.lines, it.skipped);
        }
        s
    }
}

/// Global per-dimension mean and floored variance of all training frames,
/// plus the floor itself.
pub fn global_statistics<T: Scalar>(lines: &[TrainLine<'_, T>], cfg: &TrainConfig) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let dim = lines.first().map(|l| l.features.dim()).ok_or(Error::EmptyTrainingSet)?;
    let mut n = 0usize;
    let mut sum = vec![0.0f64; dim];
    let mut sq = vec![0.0f64; dim];
    for l in lines {
        if l.features.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: l.features.dim() });
        }
        for f in l.features.frames() {
            n += 1;
            for i in 0..dim {
                let v = f[i].as_f64();
                sum[i] += v;
                sq[i] += v * v;
            }
        }
    }
    if n == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let mut mean = Vec::with_capacity(dim);
    let mut var = Vec::with_capacity(dim);
    let mut floor = Vec::with_capacity(dim);
    for i in 0..dim {
        let m = sum[i] / n as f64;
        let v = (sq[i] / n as f64 - m * m).max(0.0);
        let fl = (cfg.var_floor_ratio * v).max(cfg.min_var);
        mean.push(T::lit(m));
        var.push(T::lit(v.max(fl)));
        floor.push(T::lit(fl));
    }
    Ok((mean, var, floor))
}

/// Every state of every model set to the global mean and variance, with
/// even self/forward transitions and a single Gaussian.
pub fn flat_start<T: Scalar, S: AsRef<str>>(labels: &[S], lines: &[TrainLine<'_, T>], cfg: &TrainConfig) -> Result<ModelSet<T>> {
    if lines.iter().flat_map(|l| &l.symbols).any(|&s| s >= labels.len()) {
        return Err(Error::InvalidInput("transcription symbol outside the label set".into()));
    }
    let (mean, var, _) = global_statistics(lines, cfg)?;
    let dim = mean.len();
    let emission = GmmState::gaussian(mean, var)?;
    let models = labels.iter().map(|l| CharHmm::flat(l.as_ref(), cfg.states, emission.clone())).collect();
    ModelSet::new(dim, models)
}

/// Expected counts for one model state.
#[derive(Debug, Clone)]
struct StateStats {
    self_count: f64,
    next_count: f64,
    occ: Vec<f64>,
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl StateStats {
    fn new(components: usize, dim: usize) -> Self {
        StateStats {
            self_count: 0.0,
            next_count: 0.0,
            occ: vec![0.0; components],
            sum: vec![0.0; components * dim],
            sq: vec![0.0; components * dim],
        }
    }

    fn merge(&mut self, o: &StateStats) {
        self.self_count += o.self_count;
        self.next_count += o.next_count;
        add_into(&mut self.occ, &o.occ);
        add_into(&mut self.sum, &o.sum);
        add_into(&mut self.sq, &o.sq);
    }
}

fn add_into(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

/// Sufficient statistics of a batch of lines; merging is plain addition.
#[derive(Debug, Clone)]
struct Accumulator {
    states: Vec<Option<StateStats>>,
    log_likelihood: f64,
    lines: usize,
    skipped: usize,
}

impl Accumulator {
    fn new(total_states: usize) -> Self {
        Accumulator { states: vec![None; total_states], log_likelihood: 0.0, lines: 0, skipped: 0 }
    }

    fn slot<T: Scalar>(&mut self, id: usize, models: &ModelSet<T>, dim: usize) -> &mut StateStats {
        self.states[id].get_or_insert_with(|| StateStats::new(models.state(id).components(), dim))
    }

    fn merge(&mut self, o: Accumulator) {
        for (a, b) in self.states.iter_mut().zip(o.states) {
            match (a.as_mut(), b) {
                (Some(x), Some(y)) => x.merge(&y),
                (None, Some(y)) => *a = Some(y),
                _ => {}
            }
        }
        self.log_likelihood += o.log_likelihood;
        self.lines += o.lines;
        self.skipped += o.skipped;
    }
}

fn accumulate_line<T: Scalar>(models: &ModelSet<T>, line: &TrainLine<'_, T>, prune: f64, acc: &mut Accumulator) -> Result<()> {
    let graph = StateGraph::compile(&build_chain(&line.symbols), models)?;
    let frames = line.features.len();
    if frames < graph.min_frames {
        acc.skipped += 1;
        return Ok(());
    }
    let mut used = line.symbols.clone();
    used.sort_unstable();
    used.dedup();
    let em = EmissionTable::compute(models, line.features, Some(&used))?;
    let (alpha, ll) = forward(&graph, &em, 0, frames)?;
    if !ll.is_finite() {
        acc.skipped += 1;
        return Ok(());
    }
    let beta = backward(&graph, &em, 0, frames)?;
    let n = graph.len();
    let dim = models.dim();
    let llf = ll.as_f64();
    let mut comp = Vec::new();
    for t in 0..frames {
        let x = line.features.frame(t);
        for s in 0..n {
            let gamma = (alpha[t * n + s] + beta[t * n + s]).as_f64() - llf;
            let gamma = gamma.exp();
            if !(gamma > prune) {
                continue;
            }
            let id = graph.states[s].emission;
            let total = models.state(id).component_log_pdfs(x, &mut comp).as_f64();
            let st = acc.slot(id, models, dim);
            for (k, &lc) in comp.iter().enumerate() {
                let r = gamma * (lc.as_f64() - total).exp();
                if r == 0.0 {
                    continue;
                }
                st.occ[k] += r;
                let (sum, sq) = (&mut st.sum[k * dim..(k + 1) * dim], &mut st.sq[k * dim..(k + 1) * dim]);
                for i in 0..dim {
                    let v = x[i].as_f64();
                    sum[i] += r * v;
                    sq[i] += r * v * v;
                }
            }
        }
    }
    // transition posteriors
    for t in 0..frames {
        for s in 0..n {
            let id = graph.states[s].emission;
            if t + 1 == frames {
                let (h, b) = graph.exit[s];
                let p = ((alpha[t * n + s] + h + b).as_f64() - llf).exp();
                if p > 0.0 {
                    acc.slot(id, models, dim).next_count += p;
                }
                continue;
            }
            let w = (beta[(t + 1) * n + s] + em.get(t + 1, id)).as_f64() - llf;
            if w == f64::NEG_INFINITY {
                continue;
            }
            for tr in &graph.incoming[s] {
                let p = ((alpha[t * n + tr.from] + tr.log_prob()).as_f64() + w).exp();
                if p == 0.0 {
                    continue;
                }
                let st = acc.slot(graph.states[tr.from].emission, models, dim);
                if tr.is_self {
                    st.self_count += p;
                } else {
                    st.next_count += p;
                }
            }
        }
    }
    acc.log_likelihood += llf;
    acc.lines += 1;
    Ok(())
}

/// E-step over all lines followed by the M-step. Returns the likelihood of
/// the incoming parameters.
pub fn em_iteration<T: Scalar>(models: &mut ModelSet<T>, lines: &[TrainLine<'_, T>], floor: &[T], prune: f64) -> Result<IterationStats> {
    if lines.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if floor.len() != models.dim() {
        return Err(Error::DimensionMismatch { expected: models.dim(), got: floor.len() });
    }
    let total_states = models.total_states();
    let shared: &ModelSet<T> = models;
    let parts = lines
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = Accumulator::new(total_states);
            for line in chunk {
                accumulate_line(shared, line, prune, &mut acc)?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut acc = Accumulator::new(total_states);
    for p in parts {
        acc.merge(p);
    }
    update(models, &acc, floor);
    Ok(IterationStats {
        iteration: 0,
        mixtures: models.model(0).states[0].components(),
        log_likelihood: acc.log_likelihood,
        lines: acc.lines,
        skipped: acc.skipped,
    })
}

fn update<T: Scalar>(models: &mut ModelSet<T>, acc: &Accumulator, floor: &[T]) {
    let dim = models.dim();
    for m in 0..models.len() {
        for j in 0..models.model(m).len() {
            let id = models.state_id(m, j);
            let Some(st) = &acc.states[id] else { continue };
            let hmm = models.model_mut(m);
            let moves = st.self_count + st.next_count;
            if moves > 0.0 {
                hmm.set_self_prob(j, T::lit(st.self_count / moves));
            }
            let total: f64 = st.occ.iter().sum();
            if total <= 0.0 {
                continue;
            }
            let old = &hmm.states[j];
            let g = old.components();
            let weights = st.occ.iter().map(|&o| T::lit(o / total)).collect();
            let mut means = Vec::with_capacity(g * dim);
            let mut vars = Vec::with_capacity(g * dim);
            for k in 0..g {
                let occ = st.occ[k];
                if occ < MIN_COMPONENT_OCCUPANCY {
                    means.extend_from_slice(old.mean(k));
                    vars.extend_from_slice(old.var(k));
                    continue;
                }
                for i in 0..dim {
                    let mu = st.sum[k * dim + i] / occ;
                    let v = st.sq[k * dim + i] / occ - mu * mu;
                    means.push(T::lit(mu));
                    vars.push(T::lit(v).max(floor[i]));
                }
            }
            hmm.states[j].set_params(weights, means, vars);
        }
    }
}

/// Doubles every state's mixture (capped at `target`) by splitting the
/// heaviest component repeatedly.
pub fn mixup<T: Scalar>(models: &mut ModelSet<T>, target: usize, offset: f64) {
    for m in 0..models.len() {
        for s in &mut models.model_mut(m).states {
            let g = s.components();
            for _ in 0..g.min(target.saturating_sub(g)) {
                s.split_heaviest(T::lit(offset));
            }
        }
    }
}

/// Embedded Baum-Welch from the current models: `iterations_per_stage`
/// iterations at each mixture size, doubling until `cfg.mixtures`.
pub fn embedded_baum_welch<T: Scalar>(models: &mut ModelSet<T>, lines: &[TrainLine<'_, T>], cfg: &TrainConfig) -> Result<TrainingLog> {
    let (_, _, floor) = global_statistics(lines, cfg)?;
    let mut log = TrainingLog::default();
    loop {
        for _ in 0..cfg.iterations_per_stage {
            let mut it = em_iteration(models, lines, &floor, cfg.prune)?;
            it.iteration = log.iterations.len() + 1;
            if it.lines == 0 {
                return Err(Error::InvalidInput(format!(
                    "none of the {} training sequences can be aligned to its symbol chain",
                    it.skipped
                )));
            }
            log::debug!("em iteration {} G={} loglik={:.3} skipped={}", it.iteration, it.mixtures, it.log_likelihood, it.skipped);
            if it.skipped > 0 {
                log::warn!("{} training lines have zero likelihood and were skipped", it.skipped);
            }
            log.iterations.push(it);
        }
        let g = models.model(0).states[0].components();
        if g >= cfg.mixtures {
            break;
        }
        mixup(models, cfg.mixtures, cfg.split_offset);
    }
    Ok(log)
}

/// Flat start followed by embedded Baum-Welch.
pub fn train_models<T: Scalar, S: AsRef<str>>(
    labels: &[S],
    lines: &[TrainLine<'_, T>],
    cfg: &TrainConfig,
) -> Result<(ModelSet<T>, TrainingLog)> {
    let mut models = flat_start(labels, lines, cfg)?;
    let log = embedded_baum_welch(&mut models, lines, cfg)?;
    Ok((models, log))
}
