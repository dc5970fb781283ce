use super::emission::EmissionTable;
use super::hmm::ModelSet;
use super::network::SpottingNetwork;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One emitting state of a compiled network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphState {
    pub node: usize,
    pub model: usize,
    /// Index within the model.
    pub state: usize,
    /// Global id into an [`EmissionTable`].
    pub emission: usize,
    pub keyword: bool,
}

/// A transition into some state, with its HMM and network parts kept apart.
#[derive(Debug, Clone, Copy)]
pub struct Transition<T> {
    pub from: usize,
    /// Self-loop or forward probability of the source HMM state.
    pub hmm: T,
    /// Network link probability (zero inside a model).
    pub branch: T,
    pub is_self: bool,
    /// Leaves one node occurrence and enters another.
    pub crosses: bool,
}

impl<T: Scalar> Transition<T> {
    #[inline]
    pub fn log_prob(&self) -> T {
        self.hmm + self.branch
    }
}

/// Network expanded to HMM states, ready for dynamic programming.
#[derive(Debug, Clone)]
pub struct StateGraph<T> {
    pub states: Vec<GraphState>,
    /// Incoming transitions per state, ordered by source index.
    pub incoming: Vec<Vec<Transition<T>>>,
    /// Entry log-probability per state (`-inf` if not an entry).
    pub entry: Vec<T>,
    /// Exit `(hmm, branch)` parts per state (`-inf` if not an exit).
    pub exit: Vec<(T, T)>,
    pub min_frames: usize,
}

impl<T: Scalar> StateGraph<T> {
    pub fn compile(net: &SpottingNetwork, models: &ModelSet<T>) -> Result<Self> {
        net.validate()?;
        let mut states = Vec::new();
        let mut first = Vec::with_capacity(net.nodes.len());
        for (n, node) in net.nodes.iter().enumerate() {
            if node.model >= models.len() {
                return Err(Error::InvalidInput(format!("network references model {}", node.model)));
            }
            first.push(states.len());
            for j in 0..models.model(node.model).len() {
                states.push(GraphState {
                    node: n,
                    model: node.model,
                    state: j,
                    emission: models.state_id(node.model, j),
                    keyword: node.keyword,
                });
            }
        }
        let last = |n: usize| first[n] + models.model(net.nodes[n].model).len() - 1;
        let ninf = T::neg_infinity();
        let mut incoming: Vec<Vec<Transition<T>>> = vec![Vec::new(); states.len()];
        for (s, st) in states.iter().enumerate() {
            let hmm = models.model(st.model);
            incoming[s].push(Transition { from: s, hmm: hmm.log_self(st.state), branch: T::zero(), is_self: true, crosses: false });
            if st.state + 1 < hmm.len() {
                incoming[s + 1].push(Transition {
                    from: s,
                    hmm: hmm.log_next(st.state),
                    branch: T::zero(),
                    is_self: false,
                    crosses: false,
                });
            }
        }
        for (u, links) in net.edges.iter().enumerate() {
            let from = last(u);
            let hmm = models.model(net.nodes[u].model);
            for l in links {
                incoming[first[l.node]].push(Transition {
                    from,
                    hmm: hmm.log_next(hmm.len() - 1),
                    branch: T::lit(l.log_prob),
                    is_self: false,
                    crosses: true,
                });
            }
        }
        for list in &mut incoming {
            list.sort_by_key(|t| t.from);
        }
        let mut entry = vec![ninf; states.len()];
        for l in &net.entry {
            let s = first[l.node];
            entry[s] = T::log_add(entry[s], T::lit(l.log_prob));
        }
        let mut exit = vec![(ninf, ninf); states.len()];
        for l in &net.exit {
            let s = last(l.node);
            let hmm = models.model(net.nodes[l.node].model);
            let b = if exit[s].1 == ninf { T::lit(l.log_prob) } else { T::log_add(exit[s].1, T::lit(l.log_prob)) };
            exit[s] = (hmm.log_next(hmm.len() - 1), b);
        }
        Ok(StateGraph { states, incoming, entry, exit, min_frames: net.min_frames(models) })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    #[inline]
    fn exit_log_prob(&self, s: usize) -> T {
        self.exit[s].0 + self.exit[s].1
    }

    fn check(&self, em: &EmissionTable<T>, start: usize, end: usize) -> Result<()> {
        if end > em.frames() || start > end {
            return Err(Error::InvalidInput(format!("frame range {start}..{end} outside 0..{}", em.frames())));
        }
        if self.states.iter().any(|s| s.emission >= em.width()) {
            return Err(Error::DimensionMismatch { expected: em.width(), got: self.states.len() });
        }
        if end - start < self.min_frames {
            return Err(Error::TooShort { frames: end - start, min: self.min_frames });
        }
        Ok(())
    }
}

/// A contiguous run of frames spent in one node occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub node: usize,
    pub model: usize,
    pub keyword: bool,
    pub start: usize,
    /// Exclusive.
    pub end: usize,
}

/// Best state path through a network.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment<T> {
    /// Graph state per frame of the decoded range.
    pub path: Vec<usize>,
    /// `(node, state within model)` per frame.
    pub frame_labels: Vec<(usize, usize)>,
    /// Segments in order, partitioning the decoded range.
    pub segments: Vec<Segment>,
    pub log_likelihood: T,
    /// First decoded frame; segment bounds are absolute.
    pub offset: usize,
    // index into `incoming` of the transition entering each frame
    moves: Vec<u32>,
}

impl<T: Scalar> Alignment<T> {
    /// `[start, end)` frames of the tagged keyword nodes, if any.
    pub fn keyword_span(&self) -> Option<(usize, usize)> {
        let mut tagged = self.segments.iter().filter(|s| s.keyword);
        let first = tagged.next()?;
        let end = tagged.next_back().map_or(first.end, |s| s.end);
        Some((first.start, end))
    }
}

/// Viterbi decoding of all frames.
pub fn viterbi<T: Scalar>(graph: &StateGraph<T>, em: &EmissionTable<T>) -> Result<Alignment<T>> {
    viterbi_range(graph, em, 0, em.frames())
}

/// Viterbi decoding of frames `[start, end)`. Among equally good
/// predecessors the lower state index wins.
pub fn viterbi_range<T: Scalar>(graph: &StateGraph<T>, em: &EmissionTable<T>, start: usize, end: usize) -> Result<Alignment<T>> {
    graph.check(em, start, end)?;
    let n = graph.len();
    let frames = end - start;
    let ninf = T::neg_infinity();
    let mut prev: Vec<T> = (0..n).map(|s| graph.entry[s] + em.get(start, graph.states[s].emission)).collect();
    let mut cur = vec![ninf; n];
    let mut back = vec![u32::MAX; frames * n];
    for t in 1..frames {
        for s in 0..n {
            let mut best = ninf;
            let mut arg = u32::MAX;
            for (i, tr) in graph.incoming[s].iter().enumerate() {
                let v = prev[tr.from] + tr.log_prob();
                if v > best {
                    best = v;
                    arg = i as u32;
                }
            }
            back[t * n + s] = arg;
            cur[s] = if arg == u32::MAX { ninf } else { best + em.get(start + t, graph.states[s].emission) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let mut best = ninf;
    let mut last = usize::MAX;
    for s in 0..n {
        let v = prev[s] + graph.exit_log_prob(s);
        if v > best {
            best = v;
            last = s;
        }
    }
    if last == usize::MAX || !best.is_finite() {
        return Err(Error::TooShort { frames, min: graph.min_frames });
    }
    // backtrack, remembering which frames start a new node occurrence
    let mut path = vec![0; frames];
    let mut starts = vec![false; frames];
    let mut moves = vec![u32::MAX; frames];
    starts[0] = true;
    let mut s = last;
    for t in (0..frames).rev() {
        path[t] = s;
        if t > 0 {
            moves[t] = back[t * n + s];
            let tr = &graph.incoming[s][moves[t] as usize];
            starts[t] = tr.crosses;
            s = tr.from;
        }
    }
    let mut segments: Vec<Segment> = Vec::new();
    for t in 0..frames {
        let st = graph.states[path[t]];
        if starts[t] {
            segments.push(Segment { node: st.node, model: st.model, keyword: st.keyword, start: start + t, end: start + t + 1 });
        } else if let Some(seg) = segments.last_mut() {
            seg.end = start + t + 1;
        }
    }
    let frame_labels = path.iter().map(|&s| (graph.states[s].node, graph.states[s].state)).collect();
    Ok(Alignment { path, frame_labels, segments, log_likelihood: best, offset: start, moves })
}

/// Score of the tagged keyword span on a decoded path: its emissions and
/// internal transitions, the network part of the link into the span and the
/// HMM part of the move out of it.
pub fn span_log_likelihood<T: Scalar>(graph: &StateGraph<T>, em: &EmissionTable<T>, ali: &Alignment<T>) -> Option<(usize, usize, T)> {
    let (a, b) = ali.keyword_span()?;
    let rel = |t: usize| t - ali.offset;
    let transition = |t: usize| graph.incoming[ali.path[rel(t)]][ali.moves[rel(t)] as usize];
    let mut total = T::zero();
    for t in a..b {
        total += em.get(t, graph.states[ali.path[rel(t)]].emission);
        if t > a {
            total += transition(t).log_prob();
        }
    }
    total += if a == ali.offset { graph.entry[ali.path[0]] } else { transition(a).branch };
    total += if b - ali.offset == ali.path.len() { graph.exit[ali.path[rel(b) - 1]].0 } else { transition(b).hmm };
    Some((a, b, total))
}

/// Forward variables `alpha[t][s]` over `[start, end)` and the total
/// log-likelihood (log-sum over all paths).
pub fn forward<T: Scalar>(graph: &StateGraph<T>, em: &EmissionTable<T>, start: usize, end: usize) -> Result<(Vec<T>, T)> {
    graph.check(em, start, end)?;
    let n = graph.len();
    let frames = end - start;
    let mut alpha = vec![T::neg_infinity(); frames * n];
    for s in 0..n {
        alpha[s] = graph.entry[s] + em.get(start, graph.states[s].emission);
    }
    for t in 1..frames {
        let (done, rest) = alpha.split_at_mut(t * n);
        let prev = &done[(t - 1) * n..];
        for s in 0..n {
            let mut acc = T::neg_infinity();
            for tr in &graph.incoming[s] {
                acc = T::log_add(acc, prev[tr.from] + tr.log_prob());
            }
            rest[s] = acc + em.get(start + t, graph.states[s].emission);
        }
    }
    let mut total = T::neg_infinity();
    for s in 0..n {
        total = T::log_add(total, alpha[(frames - 1) * n + s] + graph.exit_log_prob(s));
    }
    Ok((alpha, total))
}

/// Backward variables `beta[t][s]` over `[start, end)`.
pub fn backward<T: Scalar>(graph: &StateGraph<T>, em: &EmissionTable<T>, start: usize, end: usize) -> Result<Vec<T>> {
    graph.check(em, start, end)?;
    let n = graph.len();
    let frames = end - start;
    let mut beta = vec![T::neg_infinity(); frames * n];
    for s in 0..n {
        beta[(frames - 1) * n + s] = graph.exit_log_prob(s);
    }
    for t in (0..frames - 1).rev() {
        let (head, tail) = beta.split_at_mut((t + 1) * n);
        let next = &tail[..n];
        let row = &mut head[t * n..];
        for (s, inc) in graph.incoming.iter().enumerate() {
            let w = next[s] + em.get(start + t + 1, graph.states[s].emission);
            if w == T::neg_infinity() {
                continue;
            }
            for tr in inc {
                row[tr.from] = T::log_add(row[tr.from], tr.log_prob() + w);
            }
        }
    }
    Ok(beta)
}

/// Total log-likelihood summed over all paths.
pub fn forward_log_likelihood<T: Scalar>(graph: &StateGraph<T>, em: &EmissionTable<T>, start: usize, end: usize) -> Result<T> {
    forward(graph, em, start, end).map(|(_, ll)| ll)
}
