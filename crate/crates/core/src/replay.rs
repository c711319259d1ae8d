//! Bounded experience store and the empirical model it implicitly defines.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::{Read, Write};

use rand::Rng as _;

use crate::linalg::Matrix;
use crate::stability::LinearMrp;
use crate::{Error, Result, Rng, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvictionMode {
    /// Drop the single oldest transition on overflow.
    PerTransition,
    /// Drop the oldest complete episode on overflow.
    Episodic,
}

/// FIFO transition store with optional capacity.
///
/// Episodes are delimited by terminal transitions (zero discount) or by an
/// explicit [`ReplayBuffer::end_episode`] call for truncated episodes.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: Option<usize>,
    mode: EvictionMode,
    storage: VecDeque<Transition>,
    // lengths of the complete episodes currently stored, oldest first
    episode_lengths: VecDeque<usize>,
    open_len: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: Option<usize>, mode: EvictionMode) -> Self {
        ReplayBuffer {
            capacity,
            mode,
            storage: VecDeque::new(),
            episode_lengths: VecDeque::new(),
            open_len: 0,
        }
    }

    pub fn unbounded() -> Self {
        ReplayBuffer::new(None, EvictionMode::PerTransition)
    }

    pub fn with_capacity(capacity: usize) -> Self {
        ReplayBuffer::new(Some(capacity), EvictionMode::PerTransition)
    }

    pub fn episodic(capacity: Option<usize>) -> Self {
        ReplayBuffer::new(capacity, EvictionMode::Episodic)
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    pub fn mode(&self) -> EvictionMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.storage.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }

    pub fn append(&mut self, transition: Transition) {
        self.storage.push_back(transition);
        self.open_len += 1;
        if transition.is_terminal() {
            self.end_episode();
        }
        while self.capacity.is_some_and(|c| self.storage.len() > c) {
            match (self.mode, self.episode_lengths.front().copied()) {
                (EvictionMode::Episodic, Some(n)) => {
                    self.storage.drain(..n);
                    self.episode_lengths.pop_front();
                }
                _ => self.pop_oldest(),
            }
        }
    }

    /// Marks the end of a truncated episode.
    pub fn end_episode(&mut self) {
        if self.open_len > 0 {
            self.episode_lengths.push_back(self.open_len);
            self.open_len = 0;
        }
    }

    fn pop_oldest(&mut self) {
        if self.storage.pop_front().is_none() {
            return;
        }
        match self.episode_lengths.front_mut() {
            Some(n) => {
                *n -= 1;
                if *n == 0 {
                    self.episode_lengths.pop_front();
                }
            }
            None => self.open_len -= 1,
        }
    }

    /// Exclusive end indices of the complete episodes currently stored.
    pub fn episode_boundaries(&self) -> Vec<usize> {
        self.episode_lengths
            .iter()
            .scan(0, |acc, &n| {
                *acc += n;
                Some(*acc)
            })
            .collect()
    }

    pub fn sample_one(&self, rng: &mut Rng) -> Result<&Transition> {
        if self.storage.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        Ok(&self.storage[rng.random_range(0..self.storage.len())])
    }

    /// `batch_size` transitions drawn uniformly with replacement.
    pub fn sample_uniform(&self, rng: &mut Rng, batch_size: usize) -> Result<Vec<Transition>> {
        if self.storage.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        Ok((0..batch_size)
            .map(|_| self.storage[rng.random_range(0..self.storage.len())])
            .collect())
    }

    /// Writes `state,action,reward,discount,next_state` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["state", "action", "reward", "discount", "next_state"])?;
        for t in &self.storage {
            w.write_record([
                t.state.to_string(),
                t.action.to_string(),
                t.reward.to_string(),
                t.discount.to_string(),
                t.next_state.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads rows written by [`ReplayBuffer::write_csv`], appending them in order.
    pub fn read_csv<R: Read>(
        reader: R,
        capacity: Option<usize>,
        mode: EvictionMode,
    ) -> Result<ReplayBuffer> {
        let mut buffer = ReplayBuffer::new(capacity, mode);
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
        for (line, record) in r.records().enumerate() {
            let record = record?;
            if record.len() != 5 {
                return Err(Error::Parse(format!(
                    "transition row {} has {} fields",
                    line + 1,
                    record.len()
                )));
            }
            let field = |i: usize| record[i].trim().to_string();
            let bad = |i: usize| Error::Parse(format!("row {}: bad field {:?}", line + 1, &record[i]));
            buffer.append(Transition::new(
                field(0).parse().map_err(|_| bad(0))?,
                field(1).parse().map_err(|_| bad(1))?,
                field(2).parse().map_err(|_| bad(2))?,
                field(3).parse().map_err(|_| bad(3))?,
                field(4).parse().map_err(|_| bad(4))?,
            ));
        }
        Ok(buffer)
    }

    pub fn empirical_model(&self) -> Result<EmpiricalModel> {
        build_empirical_model(self)
    }
}

/// Where an observed transition went: a state, or termination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Successor {
    State(usize),
    Terminal,
}

/// Count-based model of the buffer contents: `n(s)`, `n(s, a)`, `n(i → j)`.
///
/// Terminal transitions lead to an absorbing sink rather than to their
/// recorded next state, so that the bootstrap they contribute is zero.
#[derive(Debug, Clone)]
pub struct EmpiricalModel {
    support: Vec<usize>,
    state_counts: BTreeMap<usize, usize>,
    pair_counts: BTreeMap<(usize, usize), usize>,
    transition_counts: BTreeMap<(usize, Successor), usize>,
    reward_sums: BTreeMap<usize, f64>,
    discounts: BTreeSet<u64>,
    total: usize,
}

pub fn build_empirical_model(buffer: &ReplayBuffer) -> Result<EmpiricalModel> {
    if buffer.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let mut m = EmpiricalModel {
        support: Vec::new(),
        state_counts: BTreeMap::new(),
        pair_counts: BTreeMap::new(),
        transition_counts: BTreeMap::new(),
        reward_sums: BTreeMap::new(),
        discounts: BTreeSet::new(),
        total: 0,
    };
    let mut support = BTreeSet::new();
    for t in buffer.iter() {
        support.insert(t.state);
        *m.state_counts.entry(t.state).or_default() += 1;
        *m.pair_counts.entry((t.state, t.action)).or_default() += 1;
        *m.reward_sums.entry(t.state).or_default() += t.reward;
        let succ = if t.is_terminal() {
            Successor::Terminal
        } else {
            support.insert(t.next_state);
            m.discounts.insert(t.discount.to_bits());
            Successor::State(t.next_state)
        };
        *m.transition_counts.entry((t.state, succ)).or_default() += 1;
        m.total += 1;
    }
    m.support = support.into_iter().collect();
    Ok(m)
}

impl EmpiricalModel {
    /// Buffer size `N`.
    pub fn total(&self) -> usize {
        self.total
    }

    /// States seen as either source or non-terminal successor, ascending.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn state_count(&self, s: usize) -> usize {
        self.state_counts.get(&s).copied().unwrap_or(0)
    }

    pub fn pair_count(&self, s: usize, a: usize) -> usize {
        self.pair_counts.get(&(s, a)).copied().unwrap_or(0)
    }

    pub fn transition_count(&self, from: usize, to: Successor) -> usize {
        self.transition_counts.get(&(from, to)).copied().unwrap_or(0)
    }

    /// `π̃(a|s) = n(s, a) / n(s)`; `None` for states never departed from.
    pub fn policy(&self, s: usize, a: usize) -> Option<f64> {
        let n = self.state_count(s);
        (n > 0).then(|| self.pair_count(s, a) as f64 / n as f64)
    }

    /// `D̃ᵢᵢ = n(i) / N` over the support.
    pub fn sampling_distribution(&self) -> Vec<f64> {
        self.support
            .iter()
            .map(|&s| self.state_count(s) as f64 / self.total as f64)
            .collect()
    }

    fn position(&self, s: usize) -> usize {
        self.support.binary_search(&s).expect("state in support")
    }

    /// Column-stochastic `P̃` over the support plus a trailing terminal sink:
    /// `[P̃]ᵢⱼ = n(j → i) / n(j)`. Columns of states never departed from, and
    /// the sink itself, are self-loops.
    pub fn dynamics(&self) -> Matrix {
        let m = self.support.len();
        let mut p = Matrix::zeros(m + 1, m + 1);
        for (j, &s) in self.support.iter().enumerate() {
            if self.state_count(s) == 0 {
                p[(j, j)] = 1.0;
            }
        }
        p[(m, m)] = 1.0;
        for (&(from, to), &n) in &self.transition_counts {
            let j = self.position(from);
            let i = match to {
                Successor::State(s) => self.position(s),
                Successor::Terminal => m,
            };
            p[(i, j)] += n as f64 / self.state_count(from) as f64;
        }
        p
    }

    /// Mean observed reward per support state (zero for the sink).
    pub fn expected_rewards(&self) -> Vec<f64> {
        let mut r: Vec<f64> = self
            .support
            .iter()
            .map(|&s| match self.state_count(s) {
                0 => 0.0,
                n => self.reward_sums[&s] / n as f64,
            })
            .collect();
        r.push(0.0);
        r
    }

    /// The common discount of non-terminal transitions (1.0 if every stored
    /// transition is terminal).
    pub fn discount(&self) -> Result<f64> {
        match self.discounts.len() {
            0 => Ok(1.0),
            1 => Ok(f64::from_bits(*self.discounts.iter().next().unwrap())),
            _ => Err(Error::InvalidArgument(
                "non-terminal transitions carry different discounts".into(),
            )),
        }
    }

    /// The linear MRP `(X, P̃, D̃, γ, r̄)` with features supplied per state.
    /// The sink row of `X` is zero.
    pub fn linear_mrp(&self, features: impl Fn(usize) -> Vec<f64>) -> Result<LinearMrp> {
        let rows: Vec<Vec<f64>> = self.support.iter().map(|&s| features(s)).collect();
        let k = rows.first().map_or(0, Vec::len);
        let mut rows = rows;
        rows.push(vec![0.0; k]);
        let x = Matrix::from_rows(&rows)?;
        let mut d = self.sampling_distribution();
        d.push(0.0);
        LinearMrp::new(x, self.dynamics(), d, self.discount()?, self.expected_rewards())
    }

    /// As [`EmpiricalModel::linear_mrp`] with one-hot features over the
    /// states that were departed from at least once.
    pub fn tabular_mrp(&self) -> Result<LinearMrp> {
        let visited: Vec<usize> = self.state_counts.keys().copied().collect();
        self.linear_mrp(|s| {
            visited
                .iter()
                .map(|&v| if v == s { 1.0 } else { 0.0 })
                .collect()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;

    fn t(s: usize, s2: usize) -> Transition {
        Transition::new(s, 0, 0.0, 0.9, s2)
    }

    fn terminal(s: usize) -> Transition {
        Transition::new(s, 0, 1.0, 0.0, 99)
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::with_capacity(2);
        for i in 0..3 {
            b.append(t(i, i + 1));
        }
        let states: Vec<usize> = b.iter().map(|t| t.state).collect();
        assert_eq!(states, vec![1, 2]);
    }

    #[test]
    fn episodic_eviction_drops_whole_episodes() {
        let mut b = ReplayBuffer::episodic(Some(5));
        for ep in 0..2 {
            let base = 10 * ep;
            b.append(t(base, base + 1));
            b.append(t(base + 1, base + 2));
            b.append(terminal(base + 2));
        }
        assert_eq!(b.len(), 3);
        assert!(b.iter().all(|t| t.state >= 10));
        assert_eq!(b.episode_boundaries(), vec![3]);
    }

    #[test]
    fn episodic_buffer_falls_back_to_transitions_for_one_long_episode() {
        let mut b = ReplayBuffer::episodic(Some(2));
        for i in 0..4 {
            b.append(t(i, i + 1));
        }
        assert_eq!(b.len(), 2);
        assert_eq!(b.get(0).unwrap().state, 2);
    }

    #[test]
    fn unbounded_growth() {
        let mut b = ReplayBuffer::unbounded();
        for i in 0..10_000 {
            b.append(t(i % 7, (i + 1) % 7));
        }
        assert_eq!(b.len(), 10_000);
    }

    #[test]
    fn per_transition_eviction_keeps_boundaries_consistent() {
        let mut b = ReplayBuffer::with_capacity(4);
        b.append(t(0, 1));
        b.append(terminal(1));
        b.append(t(2, 3));
        b.append(terminal(3));
        b.append(t(4, 5));
        assert_eq!(b.episode_boundaries(), vec![1, 3]);
        b.append(t(5, 6));
        assert_eq!(b.episode_boundaries(), vec![2]);
    }

    #[test]
    fn sampling_single_and_empty() {
        let mut rng = rng_from_seed(1);
        let mut b = ReplayBuffer::unbounded();
        assert!(matches!(b.sample_uniform(&mut rng, 3), Err(Error::EmptyBuffer)));
        b.append(t(4, 5));
        let batch = b.sample_uniform(&mut rng, 3).unwrap();
        assert!(batch.iter().all(|x| *x == t(4, 5)));
    }

    #[test]
    fn empirical_policy_ratio() {
        let mut b = ReplayBuffer::unbounded();
        b.append(Transition::new(1, 0, 0.0, 0.9, 2));
        b.append(Transition::new(1, 0, 0.0, 0.9, 2));
        b.append(Transition::new(1, 1, 0.0, 0.9, 3));
        let m = b.empirical_model().unwrap();
        assert_eq!(m.state_count(1), 3);
        assert!((m.policy(1, 0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.policy(2, 0), None);
    }

    #[test]
    fn single_transition_model() {
        let mut b = ReplayBuffer::unbounded();
        b.append(t(3, 5));
        let m = b.empirical_model().unwrap();
        assert_eq!(m.support(), &[3, 5]);
        let p = m.dynamics();
        // column of state 3 puts all mass on state 5
        assert_eq!(p[(1, 0)], 1.0);
        let d = m.sampling_distribution();
        assert_eq!(d, vec![1.0, 0.0]);
    }

    #[test]
    fn empty_buffer_has_no_model() {
        assert!(matches!(
            ReplayBuffer::unbounded().empirical_model(),
            Err(Error::EmptyBuffer)
        ));
    }

    #[test]
    fn csv_round_trip() {
        let mut b = ReplayBuffer::unbounded();
        b.append(Transition::new(0, 1, 0.25, 0.95, 2));
        b.append(Transition::new(2, 3, 1.0, 0.0, 7));
        let mut bytes = Vec::new();
        b.write_csv(&mut bytes).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("state,action,reward,discount,next_state\n"));
        let back = ReplayBuffer::read_csv(&bytes[..], None, EvictionMode::PerTransition).unwrap();
        assert_eq!(back.iter().copied().collect::<Vec<_>>(), b.iter().copied().collect::<Vec<_>>());
        assert_eq!(back.episode_boundaries(), vec![2]);
    }

    #[test]
    fn malformed_csv_is_rejected() {
        let text = "state,action,reward,discount,next_state\n0,x,0,0.9,1\n";
        assert!(ReplayBuffer::read_csv(text.as_bytes(), None, EvictionMode::PerTransition).is_err());
    }
}
