//! Tabular Q-learning.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::oracle::TabularMdp;

/// Action values per state; unseen states read as zero.
#[derive(Clone, Debug)]
pub struct QTable<K> {
    actions: usize,
    alpha: f64,
    gamma: f64,
    values: HashMap<K, Vec<f64>>,
}

impl<K: Hash + Eq + Clone> QTable<K> {
    pub fn new(actions: usize, alpha: f64, gamma: f64) -> Result<Self> {
        if actions == 0 {
            return Err(Error::Config("need at least one action".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Config(format!(
                "gamma must be in [0, 1), got {gamma}"
            )));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Config(format!(
                "alpha must be in (0, 1], got {alpha}"
            )));
        }
        Ok(Self {
            actions,
            alpha,
            gamma,
            values: HashMap::new(),
        })
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, state: &K, action: usize) -> f64 {
        self.values.get(state).map_or(0.0, |v| v[action])
    }

    pub fn max_value(&self, state: &K) -> f64 {
        self.values
            .get(state)
            .map_or(0.0, |v| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Highest-valued action, lowest index on ties.
    pub fn greedy(&self, state: &K) -> usize {
        let Some(v) = self.values.get(state) else {
            return 0;
        };
        let mut best = 0;
        for (a, &q) in v.iter().enumerate() {
            if q > v[best] {
                best = a;
            }
        }
        best
    }

    /// `Q(s,a) += alpha * (r + gamma * max Q(s', .) - Q(s,a))`; a terminal
    /// transition (`next == None`) does not bootstrap.
    pub fn update(
        &mut self,
        state: &K,
        action: usize,
        reward: f64,
        next: Option<&K>,
    ) -> Result<()> {
        if !reward.is_finite() {
            return Err(Error::Diverged(format!("non-finite reward {reward}")));
        }
        let future = next.map_or(0.0, |s| self.max_value(s));
        let actions = self.actions;
        let (alpha, gamma) = (self.alpha, self.gamma);
        let row = self
            .values
            .entry(state.clone())
            .or_insert_with(|| vec![0.0; actions]);
        row[action] += alpha * (reward + gamma * future - row[action]);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &[f64])> {
        self.values.iter().map(|(k, v)| (k, v.as_slice()))
    }
}

/// Q-learning on a known MDP by sweeping every `(state, action)` pair.
pub fn learn_mdp(mdp: &TabularMdp, alpha: f64, gamma: f64, sweeps: usize) -> Result<Vec<Vec<f64>>> {
    let mut table = QTable::new(mdp.actions(), alpha, gamma)?;
    for _ in 0..sweeps {
        for s in 0..mdp.states() {
            for a in 0..mdp.actions() {
                table.update(&s, a, mdp.reward[s][a], mdp.next[s][a].as_ref())?;
            }
        }
    }
    Ok((0..mdp.states())
        .map(|s| (0..mdp.actions()).map(|a| table.value(&s, a)).collect())
        .collect())
}
