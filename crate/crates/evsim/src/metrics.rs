//! Run metrics: per-substation 5-minute load windows, per-agent reward
//! series keyed by day, per-vehicle energy ledgers and the action log.

use serde::{Deserialize, Serialize};

use crate::grid::SECONDS_PER_DAY;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowStat {
    /// Window start, simulation seconds.
    pub start: u64,
    pub mean_loading: f64,
    pub max_loading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstationSeries {
    pub substation_id: u32,
    pub windows: Vec<WindowStat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardEntry {
    pub station_id: u32,
    /// Simulated day the reward was received on (0-based).
    pub day: u64,
    pub decision_time: u64,
    pub resolve_time: u64,
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleLedger {
    pub vehicle_id: u32,
    pub initial_kwh: f64,
    pub charged_kwh: f64,
    pub consumed_kwh: f64,
    pub final_kwh: f64,
    pub stranded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionEntry {
    pub time: u64,
    pub station_id: u32,
    pub action: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentCounts {
    pub station_id: u32,
    pub decisions: u64,
    pub resolutions: u64,
    /// Vehicle arrivals at this station while it had free capacity.
    pub arrivals_with_capacity: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub schema_version: u32,
    pub profile: String,
    pub seed: u64,
    pub duration_steps: u64,
    pub substations: Vec<SubstationSeries>,
    pub rewards: Vec<RewardEntry>,
    pub vehicles: Vec<VehicleLedger>,
    pub actions: Vec<ActionEntry>,
    pub agent_counts: Vec<AgentCounts>,
}

impl MetricsRecord {
    /// Maximum 5-minute max loading over all substations and windows.
    pub fn global_max_loading(&self) -> f64 {
        self.substations
            .iter()
            .flat_map(|s| s.windows.iter())
            .map(|w| w.max_loading)
            .fold(0.0, f64::max)
    }

    /// Per-substation per-day (max, mean) of window statistics.
    pub fn daily_by_substation(&self) -> Vec<(u32, Vec<(u64, f64, f64)>)> {
        self.substations
            .iter()
            .map(|s| {
                let mut days: Vec<(u64, f64, f64, u64)> = Vec::new();
                for w in &s.windows {
                    let day = w.start / SECONDS_PER_DAY;
                    match days.last_mut() {
                        Some(d) if d.0 == day => {
                            d.1 = d.1.max(w.max_loading);
                            d.2 += w.mean_loading;
                            d.3 += 1;
                        }
                        _ => days.push((day, w.max_loading, w.mean_loading, 1)),
                    }
                }
                (
                    s.substation_id,
                    days.into_iter()
                        .map(|(day, max, sum, n)| (day, max, sum / n as f64))
                        .collect(),
                )
            })
            .collect()
    }

    /// Mean of all per-substation daily mean loadings.
    pub fn mean_of_daily_means(&self) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (_, days) in self.daily_by_substation() {
            for (_, _, mean) in days {
                sum += mean;
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// Mean received reward per day, over all agents.
    pub fn mean_reward_by_day(&self) -> Vec<(u64, f64)> {
        let mut acc: std::collections::BTreeMap<u64, (f64, u64)> = std::collections::BTreeMap::new();
        for r in &self.rewards {
            let e = acc.entry(r.day).or_insert((0.0, 0));
            e.0 += r.reward;
            e.1 += 1;
        }
        acc.into_iter().map(|(d, (s, n))| (d, s / n as f64)).collect()
    }

    /// Change of the mean received reward between the first and last day.
    pub fn reward_delta_first_to_last(&self) -> Option<(f64, f64, f64)> {
        let by_day = self.mean_reward_by_day();
        let first = by_day.first()?;
        let last = by_day.last()?;
        Some((first.1, last.1, last.1 - first.1))
    }

    /// Number of overloaded 5-minute windows (max loading > 1.0) per
    /// substation.
    pub fn overload_counts(&self) -> Vec<(u32, u64)> {
        self.substations
            .iter()
            .map(|s| {
                (
                    s.substation_id,
                    s.windows.iter().filter(|w| w.max_loading > 1.0).count() as u64,
                )
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }

    pub fn from_json(text: &str) -> crate::Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::EvsimError::parse(format!("metrics: {e}")))
    }
}
