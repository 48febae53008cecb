//! Tabular Q-learning with an epsilon-greedy policy.

use rand::Rng;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{EvsimError, Result};
use crate::rng::RunRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QLearnerConfig {
    /// Learning rate in [0,1].
    pub learning_rate: f64,
    /// Discount factor in [0,1].
    pub discount: f64,
    /// Exploration probability in (0,1].
    pub epsilon: f64,
    /// Starting value for unseen (state, action) pairs.
    pub initial_value: f64,
}

impl QLearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.learning_rate) {
            return Err(EvsimError::contract("learning_rate must be in [0,1]"));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(EvsimError::contract("discount must be in [0,1]"));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(EvsimError::contract("epsilon must be in (0,1]"));
        }
        if !self.initial_value.is_finite() {
            return Err(EvsimError::contract("initial_value must be finite"));
        }
        Ok(())
    }
}

/// Action-value table; unseen pairs read as `initial_value`. A BTreeMap
/// keeps iteration (and snapshots) deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    values: BTreeMap<(u32, u32), f64>,
    pub initial_value: f64,
    /// Actions defined for every state; the update's max runs over these.
    pub action_count: u32,
}

impl QTable {
    pub fn new(initial_value: f64, action_count: u32) -> Self {
        Self {
            values: BTreeMap::new(),
            initial_value,
            action_count,
        }
    }

    pub fn get(&self, state: u32, action: u32) -> f64 {
        *self.values.get(&(state, action)).unwrap_or(&self.initial_value)
    }

    pub fn set(&mut self, state: u32, action: u32, value: f64) {
        self.values.insert((state, action), value);
    }

    pub fn max_value(&self, state: u32) -> f64 {
        (0..self.action_count)
            .map(|a| self.get(state, a))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Versioned text snapshot: header, then one `state action value`
    /// line per stored entry in key order.
    pub fn to_snapshot(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "evsim-qtable v1 initial={} actions={}",
            self.initial_value, self.action_count
        )
        .unwrap();
        for ((s, a), v) in &self.values {
            writeln!(out, "{s} {a} {v}").unwrap();
        }
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| EvsimError::parse("empty snapshot"))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("evsim-qtable") || fields.next() != Some("v1") {
            return Err(EvsimError::parse("not an evsim-qtable v1 snapshot"));
        }
        let mut initial = None;
        let mut actions = None;
        for kv in fields {
            match kv.split_once('=') {
                Some(("initial", v)) => initial = v.parse::<f64>().ok(),
                Some(("actions", v)) => actions = v.parse::<u32>().ok(),
                _ => return Err(EvsimError::parse("malformed qtable header")),
            }
        }
        let (initial, actions) = match (initial, actions) {
            (Some(i), Some(a)) => (i, a),
            _ => return Err(EvsimError::parse("incomplete qtable header")),
        };
        let mut table = QTable::new(initial, actions);
        for line in lines {
            let mut parts = line.split_whitespace();
            let s = parts
                .next()
                .and_then(|p| p.parse::<u32>().ok())
                .ok_or_else(|| EvsimError::parse("bad qtable row"))?;
            let a = parts
                .next()
                .and_then(|p| p.parse::<u32>().ok())
                .ok_or_else(|| EvsimError::parse("bad qtable row"))?;
            let v = parts
                .next()
                .and_then(|p| p.parse::<f64>().ok())
                .ok_or_else(|| EvsimError::parse("bad qtable row"))?;
            table.set(s, a, v);
        }
        Ok(table)
    }
}

/// One Bellman backup:
/// `Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a))`.
pub fn q_update(
    table: &mut QTable,
    cfg: &QLearnerConfig,
    state: u32,
    action: u32,
    reward: f64,
    next_state: u32,
) -> Result<()> {
    if !reward.is_finite() {
        return Err(EvsimError::contract("reward must be finite"));
    }
    let current = table.get(state, action);
    let target = reward + cfg.discount * table.max_value(next_state);
    table.set(state, action, current + cfg.learning_rate * (target - current));
    Ok(())
}

/// Epsilon-greedy: greedy with probability 1-epsilon (ties uniform),
/// otherwise a uniform draw from the non-optimal valid actions. When all
/// valid actions are tied-optimal the draw is uniform over all of them.
pub fn epsilon_greedy_select(
    table: &QTable,
    cfg: &QLearnerConfig,
    state: u32,
    valid: &[u32],
    rng: &mut RunRng,
) -> Result<u32> {
    if valid.is_empty() {
        return Err(EvsimError::contract("valid action set is empty"));
    }
    let best = valid
        .iter()
        .map(|&a| table.get(state, a))
        .fold(f64::NEG_INFINITY, f64::max);
    let optimal: Vec<u32> = valid
        .iter()
        .copied()
        .filter(|&a| table.get(state, a) == best)
        .collect();
    let explore = rng.gen_range(0.0..1.0) < cfg.epsilon;
    if explore {
        let non_optimal: Vec<u32> = valid
            .iter()
            .copied()
            .filter(|a| !optimal.contains(a))
            .collect();
        if non_optimal.is_empty() {
            // all actions tied-optimal; the non-optimal set is empty
            Ok(optimal[rng.gen_range(0..optimal.len())])
        } else {
            Ok(non_optimal[rng.gen_range(0..non_optimal.len())])
        }
    } else {
        Ok(optimal[rng.gen_range(0..optimal.len())])
    }
}
