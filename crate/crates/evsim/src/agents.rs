//! Charging-station decision agents: action models, context construction,
//! delayed reward resolution and the strategy profiles.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bandits::{
    epsilon_greedy_select, q_update, ContextVector, LinUcb, LinUcbConfig, QLearnerConfig, QTable,
};
use crate::error::{EvsimError, Result};
use crate::grid::LoadWindow;
use crate::mobility::POWER_LEVELS;
use crate::rng::RunRng;

/// Context layout fed to LinUCB:
/// [station occupancy, own loading, 5 neighbor loadings, sin t, cos t, SoC].
pub const CONTEXT_DIM: usize = 10;
/// Shared (hybrid) part: [sin t, cos t, SoC].
pub const SHARED_DIM: usize = 3;
/// Neighbor loadings are clipped here and rescaled to [0,1].
pub const NEIGHBOR_CLIP: f64 = 1.5;

pub const VARIANT_A_ACTIONS: u32 = 3;
pub const VARIANT_B_ACTIONS: u32 = 5;
pub const ACTION_INCREASE: u32 = 0;
pub const ACTION_DECREASE: u32 = 1;
pub const ACTION_KEEP: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionVariant {
    /// Relative price stepping: increase / decrease / keep.
    A,
    /// Absolute level setting: 10/25/50/75/100%.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionTarget {
    Price,
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionModel {
    pub variant: ActionVariant,
    pub target: ActionTarget,
    pub price_min: f64,
    pub price_max: f64,
    /// Step width of variant A.
    pub price_step: f64,
}

impl Default for ActionModel {
    fn default() -> Self {
        Self {
            variant: ActionVariant::B,
            target: ActionTarget::Power,
            price_min: 0.05,
            price_max: 0.50,
            price_step: 0.05,
        }
    }
}

impl ActionModel {
    pub fn validate(&self) -> Result<()> {
        if self.variant == ActionVariant::A && self.target != ActionTarget::Price {
            return Err(EvsimError::scenario(
                "action variant A is only compatible with the price target",
            ));
        }
        if !(self.price_min > 0.0 && self.price_max > self.price_min && self.price_step > 0.0) {
            return Err(EvsimError::scenario("price bounds/step must be positive and ordered"));
        }
        Ok(())
    }

    pub fn action_count(&self) -> u32 {
        match self.variant {
            ActionVariant::A => VARIANT_A_ACTIONS,
            ActionVariant::B => VARIANT_B_ACTIONS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UtilityVariant {
    Price,
    Income,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityParams {
    pub variant: UtilityVariant,
    /// Balancing factor; distinct from the Q-learning discount.
    pub gamma: f64,
}

/// Reward of one resolved decision window.
pub fn compute_reward(window: &LoadWindow, params: &UtilityParams) -> f64 {
    let load_part = -window.mean_load - window.max_load;
    match params.variant {
        UtilityVariant::Price => load_part - params.gamma * window.mean_price,
        UtilityVariant::Income => load_part + params.gamma * window.income,
    }
}

/// Tracks which variant-A directions were already taken in the current
/// time step, so increase-after-decrease is blocked within one step.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepActionMemo {
    pub step: u64,
    pub increased: bool,
    pub decreased: bool,
}

impl StepActionMemo {
    pub fn roll_to(&mut self, step: u64) {
        if self.step != step {
            self.step = step;
            self.increased = false;
            self.decreased = false;
        }
    }
}

/// Valid action ids for the current state. Variant B is always the full
/// set; variant A blocks direction reversals within a step and respects
/// the price bounds.
pub fn valid_actions(model: &ActionModel, current_price: f64, memo: &StepActionMemo) -> Vec<u32> {
    match model.variant {
        ActionVariant::B => (0..VARIANT_B_ACTIONS).collect(),
        ActionVariant::A => {
            let eps = 1e-9;
            let mut v = Vec::with_capacity(3);
            if current_price + model.price_step <= model.price_max + eps && !memo.decreased {
                v.push(ACTION_INCREASE);
            }
            if current_price - model.price_step >= model.price_min - eps && !memo.increased {
                v.push(ACTION_DECREASE);
            }
            v.push(ACTION_KEEP);
            v
        }
    }
}

/// Effect of an action on the station's offer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionEffect {
    SetPrice(f64),
    SetPowerFraction(f64),
    Keep,
}

pub fn apply_action(model: &ActionModel, action: u32, current_price: f64) -> ActionEffect {
    match model.variant {
        ActionVariant::A => match action {
            ACTION_INCREASE => ActionEffect::SetPrice(
                (current_price + model.price_step).min(model.price_max),
            ),
            ACTION_DECREASE => ActionEffect::SetPrice(
                (current_price - model.price_step).max(model.price_min),
            ),
            _ => ActionEffect::Keep,
        },
        ActionVariant::B => {
            let level = POWER_LEVELS[action as usize];
            match model.target {
                ActionTarget::Power => ActionEffect::SetPowerFraction(level),
                ActionTarget::Price => ActionEffect::SetPrice(level * model.price_max),
            }
        }
    }
}

/// Everything the context builder needs from the synced world snapshot.
#[derive(Debug, Clone)]
pub struct Perception {
    /// Occupied spaces / total spaces.
    pub station_occupancy: f64,
    /// Published loading of the station's own substation.
    pub own_loading: f64,
    /// Published loadings of up to 5 neighbors, in neighbor order.
    pub neighbor_loadings: Vec<f64>,
    /// Seconds of day.
    pub time_of_day: u64,
    /// Arriving vehicle's state of charge.
    pub vehicle_soc: f64,
}

/// Builds the disjoint and shared context vectors.
pub fn build_context(p: &Perception) -> (ContextVector, ContextVector) {
    let phase = 2.0 * std::f64::consts::PI * p.time_of_day as f64 / 86_400.0;
    let (sin_t, cos_t) = (phase.sin(), phase.cos());
    let mut x = Vec::with_capacity(CONTEXT_DIM);
    x.push(p.station_occupancy);
    x.push(p.own_loading);
    for i in 0..5 {
        let l = p.neighbor_loadings.get(i).copied().unwrap_or(0.0);
        x.push(l.min(NEIGHBOR_CLIP) / NEIGHBOR_CLIP);
    }
    x.push(sin_t);
    x.push(cos_t);
    x.push(p.vehicle_soc);
    let z = vec![sin_t, cos_t, p.vehicle_soc];
    (
        ContextVector::new(x).expect("context entries are finite by construction"),
        ContextVector::new(z).expect("shared context entries are finite by construction"),
    )
}

/// Q-learning state id: own loading in 5 bins over [0, 1.25+], hour of
/// day in 6 four-hour bins, SoC in 4 bins -> 120 states.
pub fn discretize_state(own_loading: f64, time_of_day: u64, vehicle_soc: f64) -> u32 {
    let load_bin = ((own_loading / 0.25) as u32).min(4);
    let hour_bin = ((time_of_day / 3600) / 4).min(5) as u32;
    let soc_bin = ((vehicle_soc * 4.0) as u32).min(3);
    load_bin * 24 + hour_bin * 4 + soc_bin
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    ConstantLoading,
    WorkloadProportional,
    Random,
    LinUcbDisjunct,
    LinUcbHybrid,
    QLearning,
}

/// A not-yet-rewarded decision; resolved exactly once.
#[derive(Debug, Clone)]
pub struct PendingDecision {
    pub action: u32,
    pub decision_time: u64,
    pub context: Option<(ContextVector, ContextVector)>,
    pub q_state: Option<u32>,
}

enum Learner {
    None,
    LinUcb(LinUcb),
    Q(QTable, QLearnerConfig),
}

/// One charging-station agent: profile, learner state and the pending
/// decision awaiting its delayed reward.
pub struct StationAgent {
    pub station_id: u32,
    pub profile: Profile,
    pub action_model: ActionModel,
    pub utility: UtilityParams,
    learner: Learner,
    pub pending: Option<PendingDecision>,
    pub memo: StepActionMemo,
    pub decisions: u64,
    pub resolutions: u64,
}

impl StationAgent {
    pub fn new(
        station_id: u32,
        profile: Profile,
        action_model: ActionModel,
        utility: UtilityParams,
        linucb_alpha: f64,
        q_config: QLearnerConfig,
    ) -> Result<Self> {
        action_model.validate()?;
        let actions = action_model.action_count() as usize;
        let learner = match profile {
            Profile::LinUcbDisjunct => Learner::LinUcb(LinUcb::new(LinUcbConfig {
                alpha: linucb_alpha,
                dimension: CONTEXT_DIM,
                shared_dimension: 0,
                arm_count: actions,
            })?),
            Profile::LinUcbHybrid => Learner::LinUcb(LinUcb::new(LinUcbConfig {
                alpha: linucb_alpha,
                dimension: CONTEXT_DIM,
                shared_dimension: SHARED_DIM,
                arm_count: actions,
            })?),
            Profile::QLearning => {
                q_config.validate()?;
                Learner::Q(QTable::new(q_config.initial_value, actions as u32), q_config)
            }
            _ => Learner::None,
        };
        Ok(Self {
            station_id,
            profile,
            action_model,
            utility,
            learner,
            pending: None,
            memo: StepActionMemo::default(),
            decisions: 0,
            resolutions: 0,
        })
    }

    /// Chooses an action for the arriving vehicle. Every profile records
    /// a pending decision (rewards are tracked for heuristics too); the
    /// pending decision must be resolved before the next one is made.
    pub fn decide(
        &mut self,
        perception: &Perception,
        current_price: f64,
        t: u64,
        tie_rng: &mut RunRng,
        explore_rng: &mut RunRng,
    ) -> Result<u32> {
        if self.pending.is_some() {
            return Err(EvsimError::contract(
                "pending decision must be resolved before deciding again",
            ));
        }
        self.memo.roll_to(t);
        let valid = valid_actions(&self.action_model, current_price, &self.memo);
        debug_assert!(!valid.is_empty());
        let mut context = None;
        let mut q_state = None;
        let action = match self.profile {
            Profile::ConstantLoading => match self.action_model.variant {
                ActionVariant::B => VARIANT_B_ACTIONS - 1, // 100%
                ActionVariant::A => ACTION_KEEP,
            },
            Profile::Random => valid[explore_rng.gen_range(0..valid.len())],
            Profile::WorkloadProportional => {
                self.workload_proportional(perception.own_loading, current_price, &valid)
            }
            Profile::LinUcbDisjunct | Profile::LinUcbHybrid => {
                let (x, z) = build_context(perception);
                let learner = match &self.learner {
                    Learner::LinUcb(l) => l,
                    _ => unreachable!(),
                };
                let contexts: Vec<ContextVector> =
                    (0..learner.config.arm_count).map(|_| x.clone()).collect();
                let shared_contexts: Option<Vec<ContextVector>> = if learner.config.is_hybrid() {
                    Some((0..learner.config.arm_count).map(|_| z.clone()).collect())
                } else {
                    None
                };
                let valid_usize: Vec<usize> = valid.iter().map(|&a| a as usize).collect();
                let chosen = learner.select(
                    &contexts,
                    shared_contexts.as_deref(),
                    &valid_usize,
                    tie_rng,
                )? as u32;
                context = Some((x, z));
                chosen
            }
            Profile::QLearning => {
                let state =
                    discretize_state(perception.own_loading, perception.time_of_day, perception.vehicle_soc);
                let (table, cfg) = match &self.learner {
                    Learner::Q(t, c) => (t, c),
                    _ => unreachable!(),
                };
                let chosen = epsilon_greedy_select(table, cfg, state, &valid, explore_rng)?;
                q_state = Some(state);
                chosen
            }
        };
        self.pending = Some(PendingDecision { action, decision_time: t, context, q_state });
        match apply_action(&self.action_model, action, current_price) {
            ActionEffect::SetPrice(p) if p > current_price => self.memo.increased = true,
            ActionEffect::SetPrice(p) if p < current_price => self.memo.decreased = true,
            _ => {}
        }
        self.decisions += 1;
        Ok(action)
    }

    fn workload_proportional(&self, loading: f64, current_price: f64, valid: &[u32]) -> u32 {
        match (self.action_model.variant, self.action_model.target) {
            (ActionVariant::B, ActionTarget::Power) => {
                let target = (1.0 - loading).clamp(POWER_LEVELS[0], POWER_LEVELS[4]);
                nearest_level(target)
            }
            (ActionVariant::B, ActionTarget::Price) => {
                let target_price = self.action_model.price_min
                    + (self.action_model.price_max - self.action_model.price_min)
                        * loading.clamp(0.0, 1.0);
                // level sets price = level * price_max
                nearest_by(|lvl| (lvl * self.action_model.price_max - target_price).abs())
            }
            (ActionVariant::A, _) => {
                let target_price = self.action_model.price_min
                    + (self.action_model.price_max - self.action_model.price_min)
                        * loading.clamp(0.0, 1.0);
                let diff = target_price - current_price;
                if diff > self.action_model.price_step / 2.0 && valid.contains(&ACTION_INCREASE) {
                    ACTION_INCREASE
                } else if diff < -self.action_model.price_step / 2.0 && valid.contains(&ACTION_DECREASE) {
                    ACTION_DECREASE
                } else {
                    ACTION_KEEP
                }
            }
        }
    }

    /// Feeds the delayed reward of the pending decision back into the
    /// learner. `next_state_loading/_time/_soc` describe the state at
    /// resolution time for the Q-learner's bootstrap target.
    pub fn resolve_pending(
        &mut self,
        window: &LoadWindow,
        next_state: Option<(f64, u64, f64)>,
    ) -> Result<Option<f64>> {
        let pending = match self.pending.take() {
            Some(p) => p,
            None => return Ok(None),
        };
        let reward = compute_reward(window, &self.utility);
        match &mut self.learner {
            Learner::LinUcb(l) => {
                let (x, z) = pending.context.as_ref().expect("LinUCB pending carries its context");
                let z_ref = if l.config.is_hybrid() { Some(z) } else { None };
                l.update(pending.action as usize, x, z_ref, reward)?;
            }
            Learner::Q(table, cfg) => {
                let state = pending.q_state.expect("Q pending carries its state");
                let (loading, tod, soc) = next_state.unwrap_or((0.0, 0, 1.0));
                let next = discretize_state(loading, tod, soc);
                let cfg = *cfg;
                q_update(table, &cfg, state, pending.action, reward, next)?;
            }
            Learner::None => {}
        }
        self.resolutions += 1;
        Ok(Some(reward))
    }

    pub fn has_pending(&self) -> bool {
        self.pending.is_some()
    }

    pub fn learner_snapshot(&self) -> Option<String> {
        match &self.learner {
            Learner::LinUcb(l) => Some(l.to_snapshot()),
            Learner::Q(t, _) => Some(t.to_snapshot()),
            Learner::None => None,
        }
    }
}

fn nearest_level(target: f64) -> u32 {
    nearest_by(|lvl| (lvl - target).abs())
}

fn nearest_by(cost: impl Fn(f64) -> f64) -> u32 {
    let mut best = 0u32;
    let mut best_cost = f64::INFINITY;
    for (i, &lvl) in POWER_LEVELS.iter().enumerate() {
        let c = cost(lvl);
        if c < best_cost {
            best_cost = c;
            best = i as u32;
        }
    }
    best
}
