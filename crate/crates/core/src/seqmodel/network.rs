use super::hmm::ModelSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// What a network stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkRole {
    Filler,
    Keyword,
    /// A fixed or optional-slot symbol sequence, as used for training and
    /// zone parsing.
    Sequence,
}

/// One occurrence of a model in a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetNode {
    pub model: usize,
    /// Marks the keyword span whose frames are scored.
    pub keyword: bool,
}

/// Weighted link between node occurrences (or the network boundary).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub node: usize,
    pub log_prob: f64,
}

/// Graph of model occurrences with non-emitting entry and exit.
#[derive(Debug, Clone, PartialEq)]
pub struct SpottingNetwork {
    pub role: NetworkRole,
    pub nodes: Vec<NetNode>,
    /// Nodes that may start the sequence.
    pub entry: Vec<Link>,
    /// Nodes that may end it.
    pub exit: Vec<Link>,
    /// `edges[u]` lists the nodes that may follow node `u`.
    pub edges: Vec<Vec<Link>>,
}

impl SpottingNetwork {
    fn empty(role: NetworkRole) -> Self {
        SpottingNetwork { role, nodes: Vec::new(), entry: Vec::new(), exit: Vec::new(), edges: Vec::new() }
    }

    fn add(&mut self, model: usize, keyword: bool) -> usize {
        self.nodes.push(NetNode { model, keyword });
        self.edges.push(Vec::new());
        self.nodes.len() - 1
    }

    fn link(&mut self, from: usize, to: usize, log_prob: f64) {
        self.edges[from].push(Link { node: to, log_prob });
    }

    /// Nodes reachable from the entry and nodes that reach the exit.
    fn reach(&self) -> (Vec<bool>, Vec<bool>) {
        let n = self.nodes.len();
        let mut fwd = vec![false; n];
        let mut stack: Vec<usize> = self.entry.iter().map(|l| l.node).collect();
        while let Some(u) = stack.pop() {
            if !std::mem::replace(&mut fwd[u], true) {
                stack.extend(self.edges[u].iter().map(|l| l.node));
            }
        }
        let mut preds = vec![Vec::new(); n];
        for (u, out) in self.edges.iter().enumerate() {
            for l in out {
                preds[l.node].push(u);
            }
        }
        let mut bwd = vec![false; n];
        let mut stack: Vec<usize> = self.exit.iter().map(|l| l.node).collect();
        while let Some(u) = stack.pop() {
            if !std::mem::replace(&mut bwd[u], true) {
                stack.extend(preds[u].iter().copied());
            }
        }
        (fwd, bwd)
    }

    /// Checks that links are in range and every node lies on an entry→exit path.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        let in_range = |l: &Link| l.node < n && !l.log_prob.is_nan();
        if n == 0 || self.edges.len() != n {
            return Err(Error::InvalidInput("network has no nodes".into()));
        }
        if !self.entry.iter().chain(&self.exit).chain(self.edges.iter().flatten()).all(in_range) {
            return Err(Error::InvalidInput("network link out of range".into()));
        }
        let (fwd, bwd) = self.reach();
        if let Some(u) = (0..n).find(|&u| !(fwd[u] && bwd[u])) {
            return Err(Error::InvalidInput(format!("network node {u} is not on an entry-exit path")));
        }
        Ok(())
    }

    /// Fewest frames any complete path needs: one per HMM state visited.
    pub fn min_frames<T: Scalar>(&self, models: &ModelSet<T>) -> usize {
        let cost: Vec<usize> = self.nodes.iter().map(|n| models.model(n.model).len()).collect();
        // Bellman-Ford style relaxation; costs are positive so |nodes| rounds suffice.
        let mut best = vec![usize::MAX; self.nodes.len()];
        for l in &self.entry {
            best[l.node] = best[l.node].min(cost[l.node]);
        }
        for _ in 0..self.nodes.len() {
            let mut changed = false;
            for u in 0..self.nodes.len() {
                if best[u] == usize::MAX {
                    continue;
                }
                for l in &self.edges[u] {
                    let c = best[u] + cost[l.node];
                    if c < best[l.node] {
                        best[l.node] = c;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        self.exit.iter().map(|l| best[l.node]).min().unwrap_or(usize::MAX)
    }

    /// Appends a filler loop over `members` and returns its node range.
    /// Each pass picks one model with probability `1/|members|`; after it the
    /// path either starts another pass or leaves through `exits`.
    fn add_filler(&mut self, members: &[usize]) -> std::ops::Range<usize> {
        let prior = -(members.len() as f64).ln();
        let start = self.nodes.len();
        for &m in members {
            self.add(m, false);
        }
        let range = start..self.nodes.len();
        for u in range.clone() {
            for v in range.clone() {
                self.link(u, v, prior);
            }
        }
        range
    }
}

/// Filler network: any one model of the set (Space included), repeated.
pub fn build_filler<T: Scalar>(models: &ModelSet<T>) -> SpottingNetwork {
    let members: Vec<usize> = (0..models.len()).collect();
    let mut net = SpottingNetwork::empty(NetworkRole::Filler);
    let prior = -(members.len() as f64).ln();
    let range = net.add_filler(&members);
    net.entry = range.clone().map(|u| Link { node: u, log_prob: prior }).collect();
    net.exit = range.map(|u| Link { node: u, log_prob: 0.0 }).collect();
    net
}

/// Keyword network: optional filler, Space, the keyword symbols (tagged),
/// Space, optional filler. Either filler may take zero frames.
pub fn build_keyword_network<T: Scalar, S: AsRef<str>>(keyword: &[S], models: &ModelSet<T>) -> Result<SpottingNetwork> {
    if keyword.is_empty() {
        return Err(Error::InvalidInput("keyword has no symbols".into()));
    }
    let chars = keyword.iter().map(|c| models.require(c.as_ref())).collect::<Result<Vec<_>>>()?;
    let space = models.space()?;
    let members: Vec<usize> = (0..models.len()).collect();
    let prior = -(members.len() as f64).ln();

    let mut net = SpottingNetwork::empty(NetworkRole::Keyword);
    let head = net.add_filler(&members);
    let lead = net.add(space, false);
    let mut prev = lead;
    for &c in &chars {
        let u = net.add(c, true);
        net.link(prev, u, 0.0);
        prev = u;
    }
    let trail = net.add(space, false);
    net.link(prev, trail, 0.0);
    let tail = net.add_filler(&members);

    net.entry = head.clone().map(|u| Link { node: u, log_prob: prior }).collect();
    net.entry.push(Link { node: lead, log_prob: 0.0 });
    for u in head {
        net.link(u, lead, 0.0);
    }
    for u in tail.clone() {
        net.link(trail, u, prior);
    }
    net.exit = tail.map(|u| Link { node: u, log_prob: 0.0 }).collect();
    net.exit.push(Link { node: trail, log_prob: 0.0 });
    Ok(net)
}

/// Linear network visiting `sequence` in order.
pub fn build_chain(sequence: &[usize]) -> SpottingNetwork {
    let slots: Vec<(usize, bool)> = sequence.iter().map(|&m| (m, false)).collect();
    build_optional_chain(&slots)
}

/// Chain of `(model, optional)` slots; optional slots may be skipped with
/// no penalty. At least one slot must be mandatory.
pub fn build_optional_chain(slots: &[(usize, bool)]) -> SpottingNetwork {
    let mut net = SpottingNetwork::empty(NetworkRole::Sequence);
    for &(m, _) in slots {
        net.add(m, false);
    }
    // from a slot (or the entry, as slot -1) to each later slot up to and
    // including the next mandatory one
    let reach = |from: isize| -> Vec<usize> {
        let mut out = Vec::new();
        for v in (from + 1) as usize..slots.len() {
            out.push(v);
            if !slots[v].1 {
                break;
            }
        }
        out
    };
    net.entry = reach(-1).into_iter().map(|v| Link { node: v, log_prob: 0.0 }).collect();
    for u in 0..slots.len() {
        for v in reach(u as isize) {
            net.link(u, v, 0.0);
        }
    }
    let last_required = slots.iter().rposition(|s| !s.1).unwrap_or(0);
    net.exit = (last_required..slots.len()).map(|u| Link { node: u, log_prob: 0.0 }).collect();
    net
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqmodel::{CharHmm, GmmState, SPACE};

    fn set(labels: &[&str]) -> ModelSet<f64> {
        let e = GmmState::gaussian(vec![0.0], vec![1.0]).unwrap();
        ModelSet::new(1, labels.iter().map(|l| CharHmm::flat(*l, 2, e.clone())).collect()).unwrap()
    }

    #[test]
    fn filler_over_single_model() {
        let s = set(&["a"]);
        let f = build_filler(&s);
        assert_eq!(f.nodes.len(), 1);
        assert_eq!(f.edges[0][0].node, 0);
        assert_eq!(f.entry[0].log_prob, 0.0);
        f.validate().unwrap();
    }

    #[test]
    fn filler_prior_is_uniform_over_chars_and_space() {
        let s = set(&["a", "b", "c", SPACE]);
        let f = build_filler(&s);
        f.validate().unwrap();
        assert!(f.entry.iter().all(|l| (l.log_prob + 4f64.ln()).abs() < 1e-12));
        let mut seen: Vec<usize> = f.entry.iter().map(|l| f.nodes[l.node].model).collect();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2, 3]);
        assert_eq!(f.min_frames(&s), 2);
    }

    #[test]
    fn keyword_network_shape() {
        let s = set(&["a", "b", SPACE]);
        let k = build_keyword_network(&["b"], &s).unwrap();
        k.validate().unwrap();
        let tagged: Vec<_> = k.nodes.iter().filter(|n| n.keyword).collect();
        assert_eq!(tagged.len(), 1);
        assert_eq!(tagged[0].model, 1);
        // Space, b, Space with zero-length fillers
        assert_eq!(k.min_frames(&s), 6);
        assert!(matches!(build_keyword_network(&["q"], &s), Err(Error::OutOfVocabulary(_))));
    }

    #[test]
    fn optional_chain_skips() {
        let s = set(&["u", "m", "l", SPACE]);
        let net = build_optional_chain(&[(3, true), (0, true), (1, false), (2, true), (3, true)]);
        net.validate().unwrap();
        assert_eq!(net.min_frames(&s), 2);
        let entry: Vec<usize> = net.entry.iter().map(|l| l.node).collect();
        assert_eq!(entry, vec![0, 1, 2]);
        let exit: Vec<usize> = net.exit.iter().map(|l| l.node).collect();
        assert_eq!(exit, vec![2, 3, 4]);
    }
}
