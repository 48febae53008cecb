//! Surrogate distribution-grid model.
//!
//! Transformer loading is (base load + charging load) / rated power, with
//! unity power factor and no line or voltage modeling. Loadings are
//! published to the agents only every 300 simulated seconds, computed from
//! the stations' 5-minute-averaged charging powers.

use serde::{Deserialize, Serialize};

use crate::error::{EvsimError, Result};

pub const SYNC_INTERVAL_S: u64 = 300;
pub const SECONDS_PER_DAY: u64 = 86_400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridType {
    Residential,
    Commercial,
    Industrial,
}

/// Piecewise-linear 24h base-load profile, as (seconds-of-day, kW) nodes.
/// Evaluation wraps around midnight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseProfile {
    pub nodes: Vec<(u64, f64)>,
}

impl BaseProfile {
    /// Synthetic standard profile per grid type, scaled so the daily peak
    /// equals `peak_kw`. Residential: morning shoulder plus dominant
    /// evening peak. Commercial: business-hours plateau. Industrial: flat
    /// high daytime.
    pub fn standard(grid_type: GridType, peak_kw: f64) -> Self {
        let h = |hours: u64| hours * 3600;
        // shapes are relative to 1.0 at the daily peak
        let shape: Vec<(u64, f64)> = match grid_type {
            GridType::Residential => vec![
                (h(0), 0.35),
                (h(4), 0.25),
                (h(7), 0.65),
                (h(9), 0.50),
                (h(16), 0.55),
                (h(19), 1.00),
                (h(22), 0.60),
                (h(24) - 1, 0.36),
            ],
            GridType::Commercial => vec![
                (h(0), 0.20),
                (h(7), 0.30),
                (h(9), 1.00),
                (h(17), 1.00),
                (h(20), 0.35),
                (h(24) - 1, 0.20),
            ],
            GridType::Industrial => vec![
                (h(0), 0.55),
                (h(6), 0.90),
                (h(8), 1.00),
                (h(18), 1.00),
                (h(21), 0.65),
                (h(24) - 1, 0.55),
            ],
        };
        Self {
            nodes: shape.into_iter().map(|(t, v)| (t, v * peak_kw)).collect(),
        }
    }

    /// Base load in kW at second-of-day `t % 86400`.
    pub fn eval(&self, t: u64) -> f64 {
        if self.nodes.is_empty() {
            return 0.0;
        }
        let tod = t % SECONDS_PER_DAY;
        let n = self.nodes.len();
        // find surrounding nodes, wrapping across midnight
        let mut prev = self.nodes[n - 1];
        let mut next = self.nodes[0];
        let mut wrapped = true;
        for w in self.nodes.windows(2) {
            if tod >= w[0].0 && tod < w[1].0 {
                prev = w[0];
                next = w[1];
                wrapped = false;
                break;
            }
        }
        if tod >= self.nodes[n - 1].0 || tod < self.nodes[0].0 {
            prev = self.nodes[n - 1];
            next = self.nodes[0];
            wrapped = true;
        }
        let span = if wrapped {
            (SECONDS_PER_DAY - prev.0) + next.0
        } else {
            next.0 - prev.0
        };
        if span == 0 {
            return prev.1;
        }
        let elapsed = if wrapped {
            if tod >= prev.0 { tod - prev.0 } else { SECONDS_PER_DAY - prev.0 + tod }
        } else {
            tod - prev.0
        };
        let frac = elapsed as f64 / span as f64;
        prev.1 + (next.1 - prev.1) * frac
    }

    /// Daily maximum of the profile (attained at a node).
    pub fn peak(&self) -> f64 {
        self.nodes.iter().map(|&(_, v)| v).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Substation {
    pub id: u32,
    pub rated_power_kw: f64,
    pub grid_type: GridType,
    pub base_profile: BaseProfile,
    /// Up to 5 neighboring substations, ordered.
    pub neighbors: Vec<u32>,
}

impl Substation {
    pub fn validate(&self) -> Result<()> {
        if self.rated_power_kw <= 0.0 {
            return Err(EvsimError::scenario(format!(
                "substation {} rated power must be > 0",
                self.id
            )));
        }
        if self.neighbors.len() > 5 {
            return Err(EvsimError::scenario(format!(
                "substation {} has more than 5 neighbors",
                self.id
            )));
        }
        if self.neighbors.contains(&self.id) {
            return Err(EvsimError::scenario(format!(
                "substation {} lists itself as neighbor",
                self.id
            )));
        }
        Ok(())
    }
}

/// One per-second loading observation; loading > 1.0 is a legal state and
/// flags an overload.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadSample {
    pub time: u64,
    pub loading: f64,
}

/// Aggregate over one decision interval, the input to the reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadWindow {
    pub mean_load: f64,
    pub max_load: f64,
    /// Mean of transacted prices in the window; 0 when none.
    pub mean_price: f64,
    /// Operator income: sum of price * energy delivered, in currency.
    pub income: f64,
    pub window_start: u64,
    pub window_end: u64,
}

/// Price/energy pair for one transaction inside a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transaction {
    pub price_per_kwh: f64,
    pub energy_kwh: f64,
}

/// Instantaneous transformer loading.
pub fn instantaneous_loading(sub: &Substation, t: u64, charging_kw: f64) -> Result<f64> {
    if charging_kw < 0.0 {
        return Err(EvsimError::contract("charging power must be >= 0"));
    }
    Ok((sub.base_profile.eval(t) + charging_kw) / sub.rated_power_kw)
}

/// Aggregates per-second samples and transactions into a LoadWindow.
pub fn aggregate_window(samples: &[LoadSample], transactions: &[Transaction]) -> Result<LoadWindow> {
    if samples.is_empty() {
        return Err(EvsimError::contract("cannot aggregate an empty sample list"));
    }
    let mean = samples.iter().map(|s| s.loading).sum::<f64>() / samples.len() as f64;
    let max = samples.iter().map(|s| s.loading).fold(0.0, f64::max);
    let income: f64 = transactions.iter().map(|t| t.price_per_kwh * t.energy_kwh).sum();
    let mean_price = if transactions.is_empty() {
        0.0
    } else {
        transactions.iter().map(|t| t.price_per_kwh).sum::<f64>() / transactions.len() as f64
    };
    Ok(LoadWindow {
        mean_load: mean,
        max_load: max,
        mean_price,
        income,
        window_start: samples[0].time,
        window_end: samples[samples.len() - 1].time + 1,
    })
}

/// The grid's mutable per-run state: accumulators for the current 5-minute
/// window plus the loadings last published to agents.
#[derive(Debug, Clone)]
pub struct GridState {
    pub substations: Vec<Substation>,
    /// kW-seconds of charging accumulated since the last sync, per substation.
    charging_accum_kws: Vec<f64>,
    accum_seconds: u64,
    /// Loadings visible to agents; refreshed at sync ticks only.
    published: Vec<f64>,
    /// Average charging power of the window closed by the last sync.
    last_window_avg_kw: Vec<f64>,
    last_sync_t: Option<u64>,
    index_of: std::collections::HashMap<u32, usize>,
}

impl GridState {
    pub fn new(substations: Vec<Substation>) -> Result<Self> {
        for s in &substations {
            s.validate()?;
        }
        let n = substations.len();
        let index_of = substations
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id, i))
            .collect();
        let mut state = Self {
            substations,
            charging_accum_kws: vec![0.0; n],
            accum_seconds: 0,
            published: vec![0.0; n],
            last_window_avg_kw: vec![0.0; n],
            last_sync_t: None,
            index_of,
        };
        // agents observe base loadings before the first sync
        for i in 0..n {
            state.published[i] =
                state.substations[i].base_profile.eval(0) / state.substations[i].rated_power_kw;
        }
        Ok(state)
    }

    pub fn index(&self, id: u32) -> Option<usize> {
        self.index_of.get(&id).copied()
    }

    /// Records one second of charging power drawn on a substation.
    pub fn accumulate_charging(&mut self, sub_index: usize, kw: f64) {
        self.charging_accum_kws[sub_index] += kw;
    }

    pub fn step_second(&mut self) {
        self.accum_seconds += 1;
    }

    /// Publishes fresh loadings from the 5-minute-averaged charging
    /// powers. Idempotent at a fixed `t`: the window is closed once, and
    /// repeated ticks at the same time republish the same values.
    pub fn sync_tick(&mut self, t: u64) {
        if self.last_sync_t != Some(t) {
            let secs = if self.accum_seconds == 0 { 1 } else { self.accum_seconds };
            for i in 0..self.substations.len() {
                self.last_window_avg_kw[i] = self.charging_accum_kws[i] / secs as f64;
                self.charging_accum_kws[i] = 0.0;
            }
            self.accum_seconds = 0;
            self.last_sync_t = Some(t);
        }
        for i in 0..self.substations.len() {
            let sub = &self.substations[i];
            self.published[i] =
                (sub.base_profile.eval(t) + self.last_window_avg_kw[i]) / sub.rated_power_kw;
        }
    }

    /// Loading last published to agents for a substation index.
    pub fn published_loading(&self, sub_index: usize) -> f64 {
        self.published[sub_index]
    }

    pub fn published_loading_by_id(&self, id: u32) -> Option<f64> {
        self.index(id).map(|i| self.published[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sub(rated: f64, base_peak: f64) -> Substation {
        Substation {
            id: 0,
            rated_power_kw: rated,
            grid_type: GridType::Residential,
            base_profile: BaseProfile {
                nodes: vec![(0, base_peak), (SECONDS_PER_DAY - 1, base_peak)],
            },
            neighbors: vec![],
        }
    }

    #[test]
    fn loading_arithmetic() {
        let s = sub(400.0, 200.0);
        // 10 vehicles at 11 kW
        let l = instantaneous_loading(&s, 0, 110.0).unwrap();
        assert!((l - 0.775).abs() < 1e-12);
        assert_eq!(instantaneous_loading(&sub(400.0, 0.0), 0, 0.0).unwrap(), 0.0);
        assert_eq!(instantaneous_loading(&sub(400.0, 400.0), 0, 0.0).unwrap(), 1.0);
        assert!(instantaneous_loading(&s, 0, -1.0).is_err());
    }

    #[test]
    fn loading_is_linear_in_charging_power() {
        let s = sub(250.0, 120.0);
        let l1 = instantaneous_loading(&s, 3600, 40.0).unwrap();
        let l2 = instantaneous_loading(&s, 3600, 40.0 + 30.0).unwrap();
        assert!((l2 - (l1 + 30.0 / 250.0)).abs() < 1e-12);
    }

    #[test]
    fn window_aggregation() {
        let samples = vec![
            LoadSample { time: 0, loading: 0.2 },
            LoadSample { time: 1, loading: 0.8 },
        ];
        let w = aggregate_window(&samples, &[]).unwrap();
        assert!((w.mean_load - 0.5).abs() < 1e-12);
        assert!((w.max_load - 0.8).abs() < 1e-12);
        assert_eq!(w.mean_price, 0.0);
        assert_eq!(w.income, 0.0);

        let constant = vec![LoadSample { time: 0, loading: 0.5 }; 10];
        let w = aggregate_window(&constant, &[]).unwrap();
        assert_eq!(w.mean_load, 0.5);
        assert_eq!(w.max_load, 0.5);

        let w = aggregate_window(
            &samples,
            &[Transaction { price_per_kwh: 0.25, energy_kwh: 2.0 }],
        )
        .unwrap();
        assert!((w.income - 0.50).abs() < 1e-12);
        assert!((w.mean_price - 0.25).abs() < 1e-12);

        assert!(aggregate_window(&[], &[]).is_err());
    }

    #[test]
    fn standard_profile_peaks_where_expected() {
        let p = BaseProfile::standard(GridType::Residential, 55.0);
        assert!((p.peak() - 55.0).abs() < 1e-12);
        assert!((p.eval(19 * 3600) - 55.0).abs() < 1e-9);
        // evening peak dominates the morning shoulder
        assert!(p.eval(7 * 3600) < 55.0 * 0.7);
        let c = BaseProfile::standard(GridType::Commercial, 80.0);
        assert!((c.eval(12 * 3600) - 80.0).abs() < 1e-9);
        assert!(c.eval(2 * 3600) < 25.0);
    }

    #[test]
    fn profile_wraps_across_midnight_continuously() {
        let p = BaseProfile::standard(GridType::Residential, 55.0);
        let just_before = p.eval(SECONDS_PER_DAY - 1);
        let at_midnight = p.eval(0);
        // adjacent nodes (0.36 vs 0.35 of peak): at most 1% of peak apart
        assert!((just_before - at_midnight).abs() <= 0.011 * 55.0);
    }

    #[test]
    fn sync_publishes_five_minute_average() {
        let mut s = sub(100.0, 0.0);
        s.rated_power_kw = 100.0;
        let mut g = GridState::new(vec![s]).unwrap();
        for _ in 0..SYNC_INTERVAL_S {
            g.accumulate_charging(0, 11.0);
            g.step_second();
        }
        g.sync_tick(SYNC_INTERVAL_S);
        assert!((g.published_loading(0) - 0.11).abs() < 1e-12);
        // idempotence: a second tick at the same t changes nothing
        g.sync_tick(SYNC_INTERVAL_S);
        assert!((g.published_loading(0) - 0.11).abs() < 1e-12);
    }

    #[test]
    fn no_vehicles_published_equals_base_over_rated() {
        let mut s = sub(200.0, 90.0);
        s.rated_power_kw = 200.0;
        let mut g = GridState::new(vec![s]).unwrap();
        for _ in 0..SYNC_INTERVAL_S {
            g.step_second();
        }
        g.sync_tick(SYNC_INTERVAL_S);
        assert!((g.published_loading(0) - 0.45).abs() < 1e-12);
    }

    #[test]
    fn substation_validation() {
        let mut s = sub(100.0, 10.0);
        s.neighbors = vec![0];
        assert!(s.validate().is_err());
        let mut s = sub(100.0, 10.0);
        s.neighbors = vec![1, 2, 3, 4, 5, 6];
        assert!(s.validate().is_err());
        let mut s = sub(100.0, 10.0);
        s.rated_power_kw = 0.0;
        assert!(s.validate().is_err());
    }
}
