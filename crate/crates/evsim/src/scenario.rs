//! Scenario configuration: a versioned, human-readable TOML schema with
//! strict validation (unknown keys are errors), plus a generator for the
//! built-in "desk" scenario used by the experiment harness.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{ActionModel, ActionTarget, ActionVariant, Profile, UtilityVariant};
use crate::grid::{BaseProfile, GridType, Substation};
use crate::mobility::{
    ChargingBehavior, DiversionBehavior, Tour, Trip, DEFAULT_BATTERY_KWH,
    DEFAULT_CONSUMPTION_KWH_PER_KM,
};
use crate::rng::{RngStreams, Stream};
use crate::error::{EvsimError, Result};

pub const SCHEMA_VERSION: u32 = 1;
/// Ten simulated days at one-second steps.
pub const DEFAULT_DURATION_STEPS: u64 = 864_000;
pub const DEFAULT_INITIAL_PRICE: f64 = 0.25;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default = "default_duration")]
    pub duration_steps: u64,
    pub seed: u64,
    #[serde(default = "default_initial_price")]
    pub initial_price: f64,
    pub agents: AgentConfig,
    pub vehicles: VehicleConfig,
    #[serde(rename = "substation")]
    pub substations: Vec<SubstationDef>,
    #[serde(rename = "station")]
    pub stations: Vec<StationDef>,
    #[serde(rename = "area", default)]
    pub areas: Vec<AreaDef>,
    /// Inline tours; alternatively `vehicles.tours_file` points at a
    /// tours file produced by `simctl tours-extract`.
    #[serde(rename = "tour", default)]
    pub tours: Vec<TourDef>,
}

fn default_duration() -> u64 {
    DEFAULT_DURATION_STEPS
}

fn default_initial_price() -> f64 {
    DEFAULT_INITIAL_PRICE
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub profile: Profile,
    #[serde(default = "default_alpha")]
    pub linucb_alpha: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_q_learning_rate")]
    pub q_learning_rate: f64,
    #[serde(default = "default_q_discount")]
    pub q_discount: f64,
    #[serde(default)]
    pub q_initial_value: f64,
    pub utility: UtilityVariant,
    pub utility_gamma: f64,
    pub action_variant: ActionVariant,
    pub action_target: ActionTarget,
    #[serde(default = "default_price_min")]
    pub price_min: f64,
    #[serde(default = "default_price_max")]
    pub price_max: f64,
    #[serde(default = "default_price_step")]
    pub price_step: f64,
}

fn default_alpha() -> f64 {
    1.0
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_q_learning_rate() -> f64 {
    0.1
}
fn default_q_discount() -> f64 {
    0.9
}
fn default_price_min() -> f64 {
    0.05
}
fn default_price_max() -> f64 {
    0.50
}
fn default_price_step() -> f64 {
    0.05
}

impl AgentConfig {
    pub fn action_model(&self) -> ActionModel {
        ActionModel {
            variant: self.action_variant,
            target: self.action_target,
            price_min: self.price_min,
            price_max: self.price_max,
            price_step: self.price_step,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleConfig {
    pub charging_behavior: ChargingBehavior,
    pub diversion_behavior: DiversionBehavior,
    #[serde(default = "default_battery")]
    pub battery_capacity_kwh: f64,
    #[serde(default = "default_consumption")]
    pub consumption_kwh_per_km: f64,
    #[serde(default)]
    pub tours_file: Option<String>,
}

fn default_battery() -> f64 {
    DEFAULT_BATTERY_KWH
}
fn default_consumption() -> f64 {
    DEFAULT_CONSUMPTION_KWH_PER_KM
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubstationDef {
    pub id: u32,
    pub rated_power_kw: f64,
    pub grid_type: GridType,
    /// No-EV daily peak loading; the base profile is scaled to hit it.
    #[serde(default = "default_base_peak")]
    pub base_peak_fraction: f64,
    #[serde(default)]
    pub neighbors: Vec<u32>,
}

fn default_base_peak() -> f64 {
    0.55
}

impl SubstationDef {
    pub fn build(&self) -> Substation {
        Substation {
            id: self.id,
            rated_power_kw: self.rated_power_kw,
            grid_type: self.grid_type,
            base_profile: BaseProfile::standard(
                self.grid_type,
                self.base_peak_fraction * self.rated_power_kw,
            ),
            neighbors: self.neighbors.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationDef {
    pub id: u32,
    pub area: u32,
    pub substation: u32,
    pub spaces: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaDef {
    pub id: u32,
    /// Alternative areas within walking range.
    #[serde(default)]
    pub walking: Vec<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TourDef {
    pub vehicle: u32,
    pub trips: Vec<TripDef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripDef {
    pub origin: u32,
    pub destination: u32,
    pub depart: u64,
    pub distance_km: f64,
    pub duration_s: u64,
}

impl TourDef {
    pub fn to_tour(&self) -> Tour {
        Tour {
            vehicle_id: self.vehicle,
            trips: self
                .trips
                .iter()
                .map(|t| Trip {
                    origin: t.origin,
                    destination: t.destination,
                    depart: t.depart,
                    distance_km: t.distance_km,
                    duration_s: t.duration_s,
                })
                .collect(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| EvsimError::Scenario(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(EvsimError::scenario(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.duration_steps < 1 {
            return Err(EvsimError::scenario("duration_steps must be >= 1"));
        }
        if self.initial_price <= 0.0 {
            return Err(EvsimError::scenario("initial_price must be > 0"));
        }
        self.agents.action_model().validate()?;
        let sub_ids: std::collections::BTreeSet<u32> =
            self.substations.iter().map(|s| s.id).collect();
        if sub_ids.len() != self.substations.len() {
            return Err(EvsimError::scenario("duplicate substation ids"));
        }
        for s in &self.substations {
            s.build().validate()?;
            for n in &s.neighbors {
                if !sub_ids.contains(n) {
                    return Err(EvsimError::scenario(format!(
                        "substation {} references unknown neighbor {n}",
                        s.id
                    )));
                }
            }
        }
        let mut area_ids: std::collections::BTreeSet<u32> =
            self.areas.iter().map(|a| a.id).collect();
        // areas may be implicit: any area referenced by a station exists
        for st in &self.stations {
            area_ids.insert(st.area);
        }
        let station_ids: std::collections::BTreeSet<u32> =
            self.stations.iter().map(|s| s.id).collect();
        if station_ids.len() != self.stations.len() {
            return Err(EvsimError::scenario("duplicate station ids"));
        }
        for st in &self.stations {
            if !sub_ids.contains(&st.substation) {
                return Err(EvsimError::scenario(format!(
                    "station {} references unknown substation {}",
                    st.id, st.substation
                )));
            }
            if st.spaces == 0 {
                return Err(EvsimError::scenario(format!("station {} has no spaces", st.id)));
            }
        }
        for a in &self.areas {
            for w in &a.walking {
                if !area_ids.contains(w) {
                    return Err(EvsimError::scenario(format!(
                        "area {} references unknown walking-range area {w}",
                        a.id
                    )));
                }
            }
        }
        if self.tours.is_empty() && self.vehicles.tours_file.is_none() && self.duration_steps > 1 {
            // legal: a run without vehicles is the base case
        }
        let mut vehicle_ids = std::collections::BTreeSet::new();
        for t in &self.tours {
            if !vehicle_ids.insert(t.vehicle) {
                return Err(EvsimError::scenario(format!("duplicate vehicle id {}", t.vehicle)));
            }
            let tour = t.to_tour();
            tour.validate()?;
            for trip in &tour.trips {
                if !area_ids.contains(&trip.origin) || !area_ids.contains(&trip.destination) {
                    return Err(EvsimError::scenario(format!(
                        "tour of vehicle {} references an unknown area",
                        t.vehicle
                    )));
                }
            }
        }
        if self.vehicles.battery_capacity_kwh <= 0.0 || self.vehicles.consumption_kwh_per_km <= 0.0 {
            return Err(EvsimError::scenario("battery capacity and consumption must be > 0"));
        }
        Ok(())
    }
}

/// Parameters of the generated desk scenario.
#[derive(Debug, Clone)]
pub struct DeskParams {
    pub substation_count: u32,
    pub station_count: u32,
    pub vehicle_count: u32,
    pub days: u64,
    /// Share of stations and vehicle homes pulled onto substation 0,
    /// producing the heavy-tailed "outlier net".
    pub skew: f64,
    pub spaces_per_station: u32,
}

impl Default for DeskParams {
    fn default() -> Self {
        Self {
            substation_count: 8,
            station_count: 20,
            vehicle_count: 200,
            days: 10,
            skew: 0.4,
            spaces_per_station: 6,
        }
    }
}

/// Generates the calibrated desk scenario: 5 residential, 2 commercial
/// and 1 industrial substation in a ring, stations skewed toward
/// substation 0, and commuter tours (home on a residential net, work on
/// a commercial/industrial one) with a tight evening return.
pub fn generate_desk(seed: u64, agents: AgentConfig, vehicles: VehicleConfig, params: &DeskParams) -> ScenarioConfig {
    let mut rng = RngStreams::new(seed).stream(Stream::ScenarioGen);
    let n_subs = params.substation_count;
    let mut substations = Vec::new();
    for id in 0..n_subs {
        let grid_type = match id {
            0..=4 => GridType::Residential,
            5 | 6 => GridType::Commercial,
            _ => GridType::Industrial,
        };
        let rated = match grid_type {
            GridType::Residential => 150.0,
            GridType::Commercial => 250.0,
            GridType::Industrial => 400.0,
        };
        // ring topology with a skipping chord, at most 4 neighbors
        let mut neighbors = vec![(id + 1) % n_subs, (id + n_subs - 1) % n_subs];
        neighbors.push((id + 2) % n_subs);
        neighbors.dedup();
        neighbors.retain(|&n| n != id);
        substations.push(SubstationDef {
            id,
            rated_power_kw: rated,
            grid_type,
            base_peak_fraction: 0.55,
            neighbors,
        });
    }

    // station placement: `skew` of all stations on substation 0, the rest
    // round-robin over the other substations
    let mut stations = Vec::new();
    let skewed = ((params.station_count as f64) * params.skew).round() as u32;
    for id in 0..params.station_count {
        let substation = if id < skewed { 0 } else { (id - skewed) % (n_subs - 1) + 1 };
        stations.push(StationDef {
            id,
            area: id, // one area per station
            substation,
            spaces: params.spaces_per_station,
        });
    }
    // guarantee at least one work-side (commercial/industrial) station
    if !stations.iter().any(|s| s.substation >= 5) {
        if let Some(last) = stations.last_mut() {
            last.substation = 5;
        }
    }

    // walking adjacency: station areas on the same substation
    let mut areas = Vec::new();
    for st in &stations {
        let walking: Vec<u32> = stations
            .iter()
            .filter(|o| o.substation == st.substation && o.id != st.id)
            .map(|o| o.area)
            .collect();
        areas.push(AreaDef { id: st.area, walking });
    }

    let residential_areas: Vec<u32> = stations
        .iter()
        .filter(|s| s.substation <= 4)
        .map(|s| s.area)
        .collect();
    let hot_areas: Vec<u32> = stations
        .iter()
        .filter(|s| s.substation == 0)
        .map(|s| s.area)
        .collect();
    let work_areas: Vec<u32> = stations
        .iter()
        .filter(|s| s.substation >= 5)
        .map(|s| s.area)
        .collect();

    let home_pool = if residential_areas.is_empty() { &hot_areas } else { &residential_areas };
    let mut tours = Vec::new();
    for vehicle in 0..params.vehicle_count {
        // homes follow the same skew as the stations
        let home = if !hot_areas.is_empty() && rng.gen_range(0.0..1.0) < params.skew {
            hot_areas[rng.gen_range(0..hot_areas.len())]
        } else {
            home_pool[rng.gen_range(0..home_pool.len())]
        };
        let work = work_areas[rng.gen_range(0..work_areas.len())];
        let depart_morning = 6 * 3600 + rng.gen_range(0..7200); // 06:00-08:00
        let depart_evening = 17 * 3600 + rng.gen_range(0..5400); // 17:00-18:30
        let distance = rng.gen_range(8.0..16.0);
        let duration = (distance / 30.0 * 3600.0) as u64; // 30 km/h average
        tours.push(TourDef {
            vehicle,
            trips: vec![
                TripDef {
                    origin: home,
                    destination: work,
                    depart: depart_morning,
                    distance_km: distance,
                    duration_s: duration,
                },
                TripDef {
                    origin: work,
                    destination: home,
                    depart: depart_evening,
                    distance_km: distance,
                    duration_s: duration,
                },
            ],
        });
    }

    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        duration_steps: params.days * 86_400,
        seed,
        initial_price: DEFAULT_INITIAL_PRICE,
        agents,
        vehicles,
        substations,
        stations,
        areas,
        tours,
    }
}

/// Convenience agent configuration used by the desk experiments.
pub fn desk_agents(profile: Profile) -> AgentConfig {
    AgentConfig {
        profile,
        linucb_alpha: 1.0,
        epsilon: 0.1,
        q_learning_rate: 0.1,
        q_discount: 0.9,
        q_initial_value: 0.0,
        utility: UtilityVariant::Income,
        utility_gamma: 0.05,
        action_variant: ActionVariant::B,
        action_target: ActionTarget::Power,
        price_min: 0.05,
        price_max: 0.50,
        price_step: 0.05,
    }
}

pub fn desk_vehicles(charging: ChargingBehavior, diversion: DiversionBehavior) -> VehicleConfig {
    VehicleConfig {
        charging_behavior: charging,
        diversion_behavior: diversion,
        battery_capacity_kwh: DEFAULT_BATTERY_KWH,
        consumption_kwh_per_km: DEFAULT_CONSUMPTION_KWH_PER_KM,
        tours_file: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk() -> ScenarioConfig {
        generate_desk(
            1,
            desk_agents(Profile::ConstantLoading),
            desk_vehicles(ChargingBehavior::AlwaysLoad, DiversionBehavior::DoNotDivert),
            &DeskParams::default(),
        )
    }

    #[test]
    fn desk_scenario_validates_and_round_trips() {
        let cfg = desk();
        cfg.validate().unwrap();
        let text = cfg.to_toml();
        let back = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(back.stations.len(), cfg.stations.len());
        assert_eq!(back.tours.len(), cfg.tours.len());
    }

    #[test]
    fn desk_generation_is_deterministic() {
        let a = desk().to_toml();
        let b = desk().to_toml();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let mut text = desk().to_toml();
        text.push_str("\nbogus_key = 1\n");
        assert!(ScenarioConfig::from_toml(&text).is_err());
    }

    #[test]
    fn cross_reference_validation() {
        let mut cfg = desk();
        cfg.stations[0].substation = 99;
        assert!(cfg.validate().is_err());
        let mut cfg = desk();
        cfg.tours[0].trips[0].origin = 999;
        assert!(cfg.validate().is_err());
        let mut cfg = desk();
        cfg.schema_version = 2;
        assert!(cfg.validate().is_err());
        let mut cfg = desk();
        cfg.duration_steps = 0;
        assert!(cfg.validate().is_err());
    }
}
