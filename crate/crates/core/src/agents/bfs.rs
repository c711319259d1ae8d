use std::collections::HashMap;

use super::tabular::TabularQ;
use crate::models::ExpectedModel;
use crate::{Error, Result};

/// Lookahead values of every action at the root.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanValues {
    pub values: Vec<f64>,
    /// Leaves of the full (unmemoised) search tree at which `Q` was used.
    pub leaf_evaluations: u64,
}

struct Search<'a, M: ExpectedModel + ?Sized> {
    q: &'a TabularQ,
    model: &'a M,
    memo: HashMap<(usize, usize), (f64, u64)>,
}

impl<M: ExpectedModel + ?Sized> Search<'_, M> {
    fn branch(&mut self, s: usize, a: usize, depth: usize) -> (f64, u64) {
        match self.model.expected_step(s, a) {
            None => (self.q.values(s)[a], 1),
            Some(e) if e.discount == 0.0 => (e.reward, 0),
            Some(e) => {
                let (v, leaves) = self.value(e.next_state, depth - 1);
                (e.reward + e.discount * v, leaves)
            }
        }
    }

    fn value(&mut self, s: usize, depth: usize) -> (f64, u64) {
        if depth == 0 {
            return (self.q.max_value(s), 1);
        }
        if let Some(&v) = self.memo.get(&(s, depth)) {
            return v;
        }
        let mut best = f64::NEG_INFINITY;
        let mut leaves = 0;
        for a in 0..self.q.num_actions() {
            let (v, l) = self.branch(s, a, depth);
            best = best.max(v);
            leaves += l;
        }
        self.memo.insert((s, depth), (best, leaves));
        (best, leaves)
    }
}

/// Breadth-first lookahead over all action sequences of length `depth`
/// using the model's expected transitions, bootstrapping from
/// `max_a Q(leaf, a)`. Keys the model has no information about fall back to
/// `Q(s, a)` directly; terminal branches stop expanding.
pub fn bfs_plan<M: ExpectedModel + ?Sized>(
    q: &TabularQ,
    model: &M,
    s: usize,
    depth: usize,
) -> Result<PlanValues> {
    if s >= q.num_states() {
        return Err(Error::InvalidState(s));
    }
    if model.num_actions() != q.num_actions() {
        return Err(Error::ComponentMismatch(format!(
            "model has {} actions, value table {}",
            model.num_actions(),
            q.num_actions()
        )));
    }
    if depth == 0 {
        return Ok(PlanValues {
            values: q.values(s).to_vec(),
            leaf_evaluations: q.num_actions() as u64,
        });
    }
    let mut search = Search {
        q,
        model,
        memo: HashMap::new(),
    };
    let mut values = Vec::with_capacity(q.num_actions());
    let mut leaf_evaluations = 0;
    for a in 0..q.num_actions() {
        let (v, l) = search.branch(s, a, depth);
        values.push(v);
        leaf_evaluations += l;
    }
    Ok(PlanValues {
        values,
        leaf_evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::GridWorld;

    #[test]
    fn depth_zero_is_q() {
        let w = GridWorld::four_rooms(0.0).unwrap();
        let mut q = TabularQ::new(w.num_states(), w.num_actions());
        for a in 0..5 {
            q.set(7, a, a as f64 * 0.3 - 0.2).unwrap();
        }
        let plan = bfs_plan(&q, &w, 7, 0).unwrap();
        assert_eq!(plan.values, q.values(7));
    }

    #[test]
    fn leaf_count_is_actions_to_the_depth() {
        // the start corner of four rooms is far from the goal: no branch terminates
        let w = GridWorld::four_rooms(0.0).unwrap();
        let q = TabularQ::new(w.num_states(), w.num_actions());
        for d in 1..=4 {
            assert_eq!(bfs_plan(&q, &w, 0, d).unwrap().leaf_evaluations, 5u64.pow(d as u32));
        }
    }

    #[test]
    fn rejects_bad_state() {
        let w = GridWorld::four_rooms(0.0).unwrap();
        let q = TabularQ::new(w.num_states(), w.num_actions());
        assert!(bfs_plan(&q, &w, 500, 1).is_err());
    }
}
