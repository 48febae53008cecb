//! The deterministic 1-second run loop.
//!
//! Per step: vehicles advance in id order, arrival events are collected,
//! the arriving stations' agents fire in rng-shuffled order (resolve the
//! pending decision, perceive, decide, apply the action), the vehicle
//! decides whether to charge, charging energy flows, and every 300 steps
//! the grid publishes fresh loadings. All randomness flows through the
//! seeded per-subsystem streams, so identical configs give identical
//! output.

use std::collections::BTreeMap;

use crate::agents::{ActionEffect, apply_action, Perception, StationAgent};
use crate::error::{EvsimError, Result};
use crate::grid::{GridState, LoadWindow, SECONDS_PER_DAY, SYNC_INTERVAL_S};
use crate::metrics::{
    ActionEntry, AgentCounts, MetricsRecord, RewardEntry, SubstationSeries, VehicleLedger,
    WindowStat,
};
use crate::mobility::{
    consider_diversion, should_charge, ChargingStation, StationOffer, Tour, Vehicle, VehicleEvent,
    VehicleState,
};
use crate::rng::{RngStreams, Stream};
use crate::scenario::ScenarioConfig;

/// A charging session; the offer is latched when the session starts and
/// never changes until the vehicle leaves.
#[derive(Debug, Clone, Copy)]
struct Session {
    station: usize,
    price: f64,
    fraction: f64,
}

/// Reward-window accumulator for one agent, running from its last
/// decision to the next one.
#[derive(Debug, Clone, Copy, Default)]
struct AgentWindow {
    sum_load: f64,
    max_load: f64,
    samples: u64,
    income: f64,
    price_sum: f64,
    price_count: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct SubWindow {
    sum: f64,
    max: f64,
    count: u64,
}

/// Loads the tours for a scenario: inline tours win, otherwise the
/// tours file referenced by the config is read.
pub fn resolve_tours(config: &ScenarioConfig) -> Result<Vec<Tour>> {
    if !config.tours.is_empty() {
        return Ok(config.tours.iter().map(|t| t.to_tour()).collect());
    }
    match &config.vehicles.tours_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            crate::tours::parse_tours_file(&text)
        }
        None => Ok(Vec::new()),
    }
}

pub fn run(config: &ScenarioConfig) -> Result<MetricsRecord> {
    config.validate()?;
    let tours = resolve_tours(config)?;
    run_with_tours(config, tours)
}

pub fn run_with_tours(config: &ScenarioConfig, tours: Vec<Tour>) -> Result<MetricsRecord> {
    let grid = GridState::new(config.substations.iter().map(|s| s.build()).collect())?;
    let mut engine = Engine::new(config, tours, grid)?;
    engine.run()
}

struct Engine<'c> {
    config: &'c ScenarioConfig,
    grid: GridState,
    stations: Vec<ChargingStation>,
    /// Substation index (into grid) per station.
    station_sub: Vec<usize>,
    agents: Vec<StationAgent>,
    vehicles: Vec<Vehicle>,
    sessions: Vec<Option<Session>>,
    /// Target station index chosen at departure, per vehicle.
    targets: Vec<Option<usize>>,
    /// Station indices per area id, ascending.
    area_stations: BTreeMap<u32, Vec<usize>>,
    /// Walking-range areas per area id.
    walking: BTreeMap<u32, Vec<u32>>,
    agent_windows: Vec<AgentWindow>,
    sub_windows: Vec<SubWindow>,
    window_series: Vec<Vec<WindowStat>>,
    charging_kw: Vec<f64>,
    rewards: Vec<RewardEntry>,
    actions: Vec<ActionEntry>,
    arrivals_with_capacity: Vec<u64>,
    order_rng: crate::rng::RunRng,
    tie_rng: crate::rng::RunRng,
    explore_rng: crate::rng::RunRng,
}

impl<'c> Engine<'c> {
    fn new(config: &'c ScenarioConfig, tours: Vec<Tour>, grid: GridState) -> Result<Self> {
        let mut stations = Vec::new();
        let mut station_sub = Vec::new();
        let mut agents = Vec::new();
        let q_config = crate::bandits::QLearnerConfig {
            learning_rate: config.agents.q_learning_rate,
            discount: config.agents.q_discount,
            epsilon: config.agents.epsilon,
            initial_value: config.agents.q_initial_value,
        };
        let mut defs: Vec<_> = config.stations.clone();
        defs.sort_by_key(|s| s.id);
        for def in &defs {
            let sub_index = grid
                .index(def.substation)
                .ok_or_else(|| EvsimError::scenario("station references unknown substation"))?;
            stations.push(ChargingStation {
                id: def.id,
                area_id: def.area,
                substation_id: def.substation,
                spaces: def.spaces,
                offered_price: config.initial_price,
                offered_power_fraction: 1.0,
                occupied: Default::default(),
            });
            station_sub.push(sub_index);
            agents.push(StationAgent::new(
                def.id,
                config.agents.profile,
                config.agents.action_model(),
                crate::agents::UtilityParams {
                    variant: config.agents.utility,
                    gamma: config.agents.utility_gamma,
                },
                config.agents.linucb_alpha,
                q_config,
            )?);
        }
        let mut area_stations: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, st) in stations.iter().enumerate() {
            area_stations.entry(st.area_id).or_default().push(i);
        }
        let walking: BTreeMap<u32, Vec<u32>> = config
            .areas
            .iter()
            .map(|a| (a.id, a.walking.clone()))
            .collect();

        let mut sorted_tours = tours;
        sorted_tours.sort_by_key(|t| t.vehicle_id);
        let mut vehicles = Vec::with_capacity(sorted_tours.len());
        for tour in sorted_tours {
            let mut v = Vehicle::new(tour)?;
            v.battery_capacity_kwh = config.vehicles.battery_capacity_kwh;
            v.energy_kwh = v.battery_capacity_kwh; // 100% at start
            v.initial_energy_kwh = v.energy_kwh;
            v.consumption_kwh_per_km = config.vehicles.consumption_kwh_per_km;
            vehicles.push(v);
        }
        let n_vehicles = vehicles.len();
        let n_subs = grid.substations.len();
        let n_stations = stations.len();
        let streams = RngStreams::new(config.seed);
        Ok(Self {
            config,
            grid,
            stations,
            station_sub,
            agents,
            vehicles,
            sessions: vec![None; n_vehicles],
            targets: vec![None; n_vehicles],
            area_stations,
            walking,
            agent_windows: vec![AgentWindow::default(); n_stations],
            sub_windows: vec![SubWindow::default(); n_subs],
            window_series: vec![Vec::new(); n_subs],
            charging_kw: vec![0.0; n_subs],
            rewards: Vec::new(),
            actions: Vec::new(),
            arrivals_with_capacity: vec![0; n_stations],
            order_rng: streams.stream(Stream::AgentOrder),
            tie_rng: streams.stream(Stream::TieBreak),
            explore_rng: streams.stream(Stream::EpsilonGreedy),
        })
    }

    fn run(&mut self) -> Result<MetricsRecord> {
        let duration = self.config.duration_steps;
        for t in 0..duration {
            self.step(t)?;
        }
        self.flush(duration)?;
        Ok(self.collect())
    }

    fn step(&mut self, t: u64) -> Result<()> {
        self.charging_kw.iter_mut().for_each(|v| *v = 0.0);

        // 1. vehicles advance in id order
        let mut arrivals: Vec<(usize, u32)> = Vec::new();
        for vi in 0..self.vehicles.len() {
            if let Some(event) = self.vehicles[vi].advance(t) {
                match event {
                    VehicleEvent::Departed { trip_index, .. } => {
                        if let Some(session) = self.sessions[vi].take() {
                            self.stations[session.station].release(self.vehicles[vi].id);
                        }
                        let destination = self.vehicles[vi].tour.trips[trip_index].destination;
                        self.targets[vi] = self.choose_target(destination);
                    }
                    VehicleEvent::Arrived { area, .. } => arrivals.push((vi, area)),
                }
            }
        }

        // 2. decision triggers: arrivals at stations with free capacity
        let mut triggers: Vec<(usize, usize)> = Vec::new();
        for &(vi, area) in &arrivals {
            let station = match self.targets[vi] {
                Some(si) => Some(si),
                None => self.area_stations.get(&area).and_then(|v| v.first().copied()),
            };
            if let Some(si) = station {
                if self.stations[si].has_free_space() {
                    self.arrivals_with_capacity[si] += 1;
                    triggers.push((si, vi));
                }
            }
        }

        // 3. the firing order within a step is random
        fisher_yates(&mut triggers, &mut self.order_rng);

        // 4. agents fire
        for (si, vi) in triggers {
            self.fire_agent(si, vi, t)?;
        }

        // 5. charging energy flows at the latched session offers
        for vi in 0..self.vehicles.len() {
            if let Some(session) = self.sessions[vi] {
                if self.vehicles[vi].state == VehicleState::Charging {
                    let energy = self.vehicles[vi].charge_second(session.fraction);
                    let kw = energy * 3600.0;
                    let sub = self.station_sub[session.station];
                    self.charging_kw[sub] += kw;
                    self.grid.accumulate_charging(sub, kw);
                    self.agent_windows[session.station].income += session.price * energy;
                }
            }
        }

        // 6. sample instantaneous loadings
        for sub in 0..self.grid.substations.len() {
            let loading = crate::grid::instantaneous_loading(
                &self.grid.substations[sub],
                t,
                self.charging_kw[sub],
            )?;
            let w = &mut self.sub_windows[sub];
            w.sum += loading;
            w.max = w.max.max(loading);
            w.count += 1;
        }
        for si in 0..self.agents.len() {
            if self.agents[si].has_pending() {
                let loading = {
                    let sub = self.station_sub[si];
                    (self.grid.substations[sub].base_profile.eval(t) + self.charging_kw[sub])
                        / self.grid.substations[sub].rated_power_kw
                };
                let w = &mut self.agent_windows[si];
                w.sum_load += loading;
                w.max_load = w.max_load.max(loading);
                w.samples += 1;
            }
        }
        self.grid.step_second();

        // 7. grid synchronization every 300 steps
        if (t + 1) % SYNC_INTERVAL_S == 0 {
            self.grid.sync_tick(t + 1);
            self.close_sub_windows(t + 1 - SYNC_INTERVAL_S);
        }
        Ok(())
    }

    /// Diversion at departure: the vehicle sees the offers of stations at
    /// the destination and in walking range and picks per behavior.
    fn choose_target(&self, destination: u32) -> Option<usize> {
        let mut offers: Vec<StationOffer> = Vec::new();
        let push_area = |area: u32, original: bool, offers: &mut Vec<StationOffer>| {
            if let Some(list) = self.area_stations.get(&area) {
                for &si in list {
                    let st = &self.stations[si];
                    offers.push(StationOffer {
                        station_id: st.id,
                        area_id: st.area_id,
                        price_per_kwh: st.offered_price,
                        power_fraction: st.offered_power_fraction,
                        is_original_target: original,
                    });
                }
            }
        };
        push_area(destination, true, &mut offers);
        if let Some(walk) = self.walking.get(&destination) {
            for &area in walk {
                push_area(area, false, &mut offers);
            }
        }
        let chosen = consider_diversion(&offers, self.config.vehicles.diversion_behavior)?;
        self.stations.iter().position(|s| s.id == chosen.station_id)
    }

    fn fire_agent(&mut self, si: usize, vi: usize, t: u64) -> Result<()> {
        // resolve the previous decision against its accumulated window
        if self.agents[si].has_pending() {
            self.resolve_agent(si, t, Some(vi))?;
        }
        let sub = self.station_sub[si];
        let own_loading = self.grid.published_loading(sub);
        let neighbor_loadings: Vec<f64> = self.grid.substations[sub]
            .neighbors
            .iter()
            .filter_map(|&id| self.grid.published_loading_by_id(id))
            .collect();
        let station = &self.stations[si];
        let perception = Perception {
            station_occupancy: station.occupied.len() as f64 / station.spaces as f64,
            own_loading,
            neighbor_loadings,
            time_of_day: t % SECONDS_PER_DAY,
            vehicle_soc: self.vehicles[vi].soc(),
        };
        let current_price = station.offered_price;
        let action = self.agents[si].decide(
            &perception,
            current_price,
            t,
            &mut self.tie_rng,
            &mut self.explore_rng,
        )?;
        self.agent_windows[si] = AgentWindow::default();
        match apply_action(&self.agents[si].action_model, action, current_price) {
            ActionEffect::SetPrice(p) => self.stations[si].offered_price = p,
            ActionEffect::SetPowerFraction(f) => self.stations[si].offered_power_fraction = f,
            ActionEffect::Keep => {}
        }
        self.actions.push(ActionEntry { time: t, station_id: self.stations[si].id, action });

        // the vehicle observes the (possibly updated) offer and decides
        let price = self.stations[si].offered_price;
        self.vehicles[vi].record_seen_price(price);
        if should_charge(&self.vehicles[vi], price, self.config.vehicles.charging_behavior)
            && self.stations[si].has_free_space()
        {
            let vehicle_id = self.vehicles[vi].id;
            self.stations[si].occupy(vehicle_id)?;
            self.sessions[vi] = Some(Session {
                station: si,
                price,
                fraction: self.stations[si].offered_power_fraction,
            });
            self.vehicles[vi].state = VehicleState::Charging;
            let w = &mut self.agent_windows[si];
            w.price_sum += price;
            w.price_count += 1;
        }
        Ok(())
    }

    fn resolve_agent(&mut self, si: usize, t: u64, vehicle_hint: Option<usize>) -> Result<()> {
        let pending_time = self.agents[si].pending.as_ref().map(|p| p.decision_time).unwrap_or(t);
        let acc = self.agent_windows[si];
        let sub = self.station_sub[si];
        let (mean, max) = if acc.samples > 0 {
            (acc.sum_load / acc.samples as f64, acc.max_load)
        } else {
            let l = self.grid.published_loading(sub);
            (l, l)
        };
        let window = LoadWindow {
            mean_load: mean,
            max_load: max,
            mean_price: if acc.price_count > 0 { acc.price_sum / acc.price_count as f64 } else { 0.0 },
            income: acc.income,
            window_start: pending_time,
            window_end: t.max(pending_time + 1),
        };
        let soc = vehicle_hint.map(|vi| self.vehicles[vi].soc()).unwrap_or(1.0);
        let next_state = Some((self.grid.published_loading(sub), t % SECONDS_PER_DAY, soc));
        if let Some(reward) = self.agents[si].resolve_pending(&window, next_state)? {
            self.rewards.push(RewardEntry {
                station_id: self.stations[si].id,
                day: t.min(self.config.duration_steps.saturating_sub(1)) / SECONDS_PER_DAY,
                decision_time: pending_time,
                resolve_time: t,
                reward,
            });
        }
        self.agent_windows[si] = AgentWindow::default();
        Ok(())
    }

    fn close_sub_windows(&mut self, window_start: u64) {
        for sub in 0..self.sub_windows.len() {
            let w = self.sub_windows[sub];
            if w.count == 0 {
                continue;
            }
            self.window_series[sub].push(WindowStat {
                start: window_start,
                mean_loading: w.sum / w.count as f64,
                max_loading: w.max,
            });
            self.sub_windows[sub] = SubWindow::default();
        }
    }

    /// End of run: close the partial 5-minute window and resolve every
    /// still-pending decision against its final partial window.
    fn flush(&mut self, duration: u64) -> Result<()> {
        let partial = duration % SYNC_INTERVAL_S;
        if partial != 0 {
            self.close_sub_windows(duration - partial);
        }
        for si in 0..self.agents.len() {
            if self.agents[si].has_pending() {
                self.resolve_agent(si, duration, None)?;
            }
        }
        Ok(())
    }

    fn collect(&mut self) -> MetricsRecord {
        MetricsRecord {
            schema_version: 1,
            profile: format!("{:?}", self.config.agents.profile),
            seed: self.config.seed,
            duration_steps: self.config.duration_steps,
            substations: self
                .grid
                .substations
                .iter()
                .zip(self.window_series.drain(..))
                .map(|(s, windows)| SubstationSeries { substation_id: s.id, windows })
                .collect(),
            rewards: std::mem::take(&mut self.rewards),
            vehicles: self
                .vehicles
                .iter()
                .map(|v| VehicleLedger {
                    vehicle_id: v.id,
                    initial_kwh: v.initial_energy_kwh,
                    charged_kwh: v.charged_kwh,
                    consumed_kwh: v.consumed_kwh,
                    final_kwh: v.energy_kwh,
                    stranded: v.stranded,
                })
                .collect(),
            actions: std::mem::take(&mut self.actions),
            agent_counts: self
                .agents
                .iter()
                .enumerate()
                .map(|(i, a)| AgentCounts {
                    station_id: a.station_id,
                    decisions: a.decisions,
                    resolutions: a.resolutions,
                    arrivals_with_capacity: self.arrivals_with_capacity[i],
                })
                .collect(),
        }
    }
}

fn fisher_yates<T>(items: &mut [T], rng: &mut crate::rng::RunRng) {
    use rand::Rng;
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}
