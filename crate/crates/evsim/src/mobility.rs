//! Schedule-driven vehicle model: vehicles follow daily tours of trips,
//! consume battery energy by distance, park at areas with charging
//! stations and charge at the latched session offer.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, VecDeque};

use crate::error::{EvsimError, Result};
use crate::grid::SECONDS_PER_DAY;

pub const MAX_POWER_PER_SPACE_KW: f64 = 11.0;
pub const DEFAULT_BATTERY_KWH: f64 = 22.0;
/// Verified winter range of the reference vehicle, km.
pub const VERIFIED_RANGE_KM: f64 = 104.0;
/// Constant consumption derived from capacity over verified range.
pub const DEFAULT_CONSUMPTION_KWH_PER_KM: f64 = DEFAULT_BATTERY_KWH / VERIFIED_RANGE_KM;
/// Below this state of charge the vehicle always charges.
pub const EMERGENCY_SOC: f64 = 0.20;
pub const PRICE_HISTORY_CAP: usize = 20;
/// Offered power levels of action variant B.
pub const POWER_LEVELS: [f64; 5] = [0.10, 0.25, 0.50, 0.75, 1.00];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub origin: u32,
    pub destination: u32,
    /// Departure, seconds of day.
    pub depart: u64,
    pub distance_km: f64,
    pub duration_s: u64,
}

/// A daily cycle of 2-4 trips; each trip starts where the previous one
/// ended and the cycle closes back on the first origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tour {
    pub vehicle_id: u32,
    pub trips: Vec<Trip>,
}

impl Tour {
    pub fn validate(&self) -> Result<()> {
        if !(2..=4).contains(&self.trips.len()) {
            return Err(EvsimError::scenario(format!(
                "tour of vehicle {} must have 2-4 trips",
                self.vehicle_id
            )));
        }
        for w in self.trips.windows(2) {
            if w[0].destination != w[1].origin {
                return Err(EvsimError::scenario(format!(
                    "tour of vehicle {} is not a chain",
                    self.vehicle_id
                )));
            }
            if w[1].depart <= w[0].depart {
                return Err(EvsimError::scenario(format!(
                    "tour of vehicle {} departures must strictly increase",
                    self.vehicle_id
                )));
            }
        }
        let first = &self.trips[0];
        let last = &self.trips[self.trips.len() - 1];
        if last.destination != first.origin {
            return Err(EvsimError::scenario(format!(
                "tour of vehicle {} does not close its cycle",
                self.vehicle_id
            )));
        }
        for t in &self.trips {
            if t.distance_km <= 0.0 || t.duration_s == 0 {
                return Err(EvsimError::scenario(format!(
                    "tour of vehicle {} has a trip with non-positive distance or duration",
                    self.vehicle_id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChargingBehavior {
    AlwaysLoad,
    PriceAware,
    /// AlwaysLoad rule, but only at the first station of the day.
    AlwaysLoadHomeOnly,
    PriceAwareHomeOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiversionBehavior {
    DoNotDivert,
    DivertToCheapest,
    DivertToHighestPower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VehicleState {
    Parked,
    Driving,
    Charging,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VehicleEvent {
    /// Vehicle left its parking area to begin a trip.
    Departed { vehicle_id: u32, from_area: u32, trip_index: usize },
    /// Vehicle finished a trip and parked at the destination area.
    Arrived { vehicle_id: u32, area: u32 },
}

#[derive(Debug, Clone)]
pub struct Vehicle {
    pub id: u32,
    pub battery_capacity_kwh: f64,
    /// Stored energy, kWh. SoC = energy / capacity.
    pub energy_kwh: f64,
    pub consumption_kwh_per_km: f64,
    pub tour: Tour,
    pub price_history: VecDeque<f64>,
    pub state: VehicleState,
    pub current_area: u32,
    /// Index into the tour of the next trip to start.
    next_trip: usize,
    /// Day offset applied to the next departure.
    day: u64,
    /// Seconds driven on the current trip.
    trip_elapsed: u64,
    /// Arrivals seen today; resets when a new day's first trip departs.
    pub arrivals_today: u32,
    pub stranded: bool,
    // energy ledger for the conservation audit
    pub initial_energy_kwh: f64,
    pub charged_kwh: f64,
    pub consumed_kwh: f64,
}

impl Vehicle {
    pub fn new(tour: Tour) -> Result<Self> {
        tour.validate()?;
        let id = tour.vehicle_id;
        let start_area = tour.trips[0].origin;
        Ok(Self {
            id,
            battery_capacity_kwh: DEFAULT_BATTERY_KWH,
            energy_kwh: DEFAULT_BATTERY_KWH,
            consumption_kwh_per_km: DEFAULT_CONSUMPTION_KWH_PER_KM,
            tour,
            price_history: VecDeque::with_capacity(PRICE_HISTORY_CAP),
            state: VehicleState::Parked,
            current_area: start_area,
            next_trip: 0,
            day: 0,
            trip_elapsed: 0,
            arrivals_today: 0,
            stranded: false,
            initial_energy_kwh: DEFAULT_BATTERY_KWH,
            charged_kwh: 0.0,
            consumed_kwh: 0.0,
        })
    }

    pub fn soc(&self) -> f64 {
        self.energy_kwh / self.battery_capacity_kwh
    }

    /// Absolute simulation second of the next departure.
    pub fn next_depart_time(&self) -> u64 {
        self.day * SECONDS_PER_DAY + self.tour.trips[self.next_trip].depart
    }

    pub fn next_trip(&self) -> &Trip {
        &self.tour.trips[self.next_trip]
    }

    pub fn is_first_station_of_day(&self) -> bool {
        self.arrivals_today <= 1
    }

    pub fn record_seen_price(&mut self, price: f64) {
        if self.price_history.len() == PRICE_HISTORY_CAP {
            self.price_history.pop_front();
        }
        self.price_history.push_back(price);
    }

    /// Advances the state machine by one second. Charging energy is
    /// accrued separately by the engine (the offer is latched per
    /// session), so departure from the Charging state is legal here.
    pub fn advance(&mut self, t: u64) -> Option<VehicleEvent> {
        match self.state {
            VehicleState::Parked | VehicleState::Charging => {
                if t >= self.next_depart_time() {
                    let trip_index = self.next_trip;
                    let from_area = self.current_area;
                    if trip_index == 0 {
                        self.arrivals_today = 0;
                    }
                    self.state = VehicleState::Driving;
                    self.trip_elapsed = 0;
                    Some(VehicleEvent::Departed { vehicle_id: self.id, from_area, trip_index })
                } else {
                    None
                }
            }
            VehicleState::Driving => {
                let trip = &self.tour.trips[self.next_trip];
                // pro-rated consumption; SoC clamps at zero and the
                // vehicle is flagged stranded instead of aborting
                let per_second = trip.distance_km * self.consumption_kwh_per_km / trip.duration_s as f64;
                let drawn = per_second.min(self.energy_kwh);
                if drawn < per_second {
                    self.stranded = true;
                }
                self.energy_kwh -= drawn;
                self.consumed_kwh += drawn;
                self.trip_elapsed += 1;
                if self.trip_elapsed >= trip.duration_s {
                    self.current_area = trip.destination;
                    self.state = VehicleState::Parked;
                    self.arrivals_today += 1;
                    self.next_trip += 1;
                    if self.next_trip == self.tour.trips.len() {
                        self.next_trip = 0;
                        self.day += 1;
                    }
                    Some(VehicleEvent::Arrived { vehicle_id: self.id, area: self.current_area })
                } else {
                    None
                }
            }
        }
    }

    /// One second of charging at the given power fraction; returns the
    /// energy actually stored (capped at capacity).
    pub fn charge_second(&mut self, power_fraction: f64) -> f64 {
        let offered = power_fraction * MAX_POWER_PER_SPACE_KW / 3600.0;
        let added = offered.min(self.battery_capacity_kwh - self.energy_kwh).max(0.0);
        self.energy_kwh += added;
        self.charged_kwh += added;
        added
    }
}

/// Charge decision at arrival. The emergency rule (SoC below 20%) always
/// forces charging; home-only variants otherwise only charge at the first
/// station of the day.
pub fn should_charge(vehicle: &Vehicle, offered_price: f64, behavior: ChargingBehavior) -> bool {
    if vehicle.soc() < EMERGENCY_SOC {
        return true;
    }
    let (base, home_only) = match behavior {
        ChargingBehavior::AlwaysLoad => (true, false),
        ChargingBehavior::AlwaysLoadHomeOnly => (true, true),
        ChargingBehavior::PriceAware => (false, false),
        ChargingBehavior::PriceAwareHomeOnly => (false, true),
    };
    if home_only && !vehicle.is_first_station_of_day() {
        return false;
    }
    if base {
        return true;
    }
    // price-aware: charge iff SoC <= rank of the current price in the
    // remembered history; an empty history charges optimistically
    if vehicle.price_history.is_empty() {
        return true;
    }
    let cheaper = vehicle
        .price_history
        .iter()
        .filter(|&&c| c <= offered_price)
        .count();
    vehicle.soc() <= cheaper as f64 / vehicle.price_history.len() as f64
}

/// A station's observable offer, as shown to departing vehicles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationOffer {
    pub station_id: u32,
    pub area_id: u32,
    pub price_per_kwh: f64,
    pub power_fraction: f64,
    pub is_original_target: bool,
}

/// Picks the target station among the original target's station and the
/// alternatives in walking range. Ties prefer the original target, then
/// the lowest station id. Returns `None` when no offers exist.
pub fn consider_diversion(offers: &[StationOffer], behavior: DiversionBehavior) -> Option<StationOffer> {
    if offers.is_empty() {
        return None;
    }
    let original = offers.iter().find(|o| o.is_original_target);
    match behavior {
        DiversionBehavior::DoNotDivert => original.copied().or(Some(offers[0])),
        DiversionBehavior::DivertToCheapest => {
            pick_best(offers, |o| -o.price_per_kwh)
        }
        DiversionBehavior::DivertToHighestPower => {
            pick_best(offers, |o| o.power_fraction)
        }
    }
}

fn pick_best(offers: &[StationOffer], score: impl Fn(&StationOffer) -> f64) -> Option<StationOffer> {
    let best = offers.iter().map(&score).fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<&StationOffer> = offers.iter().filter(|o| score(o) == best).collect();
    if let Some(orig) = tied.iter().find(|o| o.is_original_target) {
        return Some(**orig);
    }
    tied.into_iter().min_by_key(|o| o.station_id).copied()
}

#[derive(Debug, Clone)]
pub struct ChargingStation {
    pub id: u32,
    pub area_id: u32,
    pub substation_id: u32,
    pub spaces: u32,
    pub offered_price: f64,
    pub offered_power_fraction: f64,
    pub occupied: BTreeSet<u32>,
}

impl ChargingStation {
    pub fn has_free_space(&self) -> bool {
        (self.occupied.len() as u32) < self.spaces
    }

    pub fn occupy(&mut self, vehicle_id: u32) -> Result<()> {
        if !self.has_free_space() {
            return Err(EvsimError::contract(format!("station {} is full", self.id)));
        }
        self.occupied.insert(vehicle_id);
        Ok(())
    }

    pub fn release(&mut self, vehicle_id: u32) {
        self.occupied.remove(&vehicle_id);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_trip_tour(vehicle_id: u32) -> Tour {
        Tour {
            vehicle_id,
            trips: vec![
                Trip { origin: 0, destination: 1, depart: 8 * 3600, distance_km: 10.4, duration_s: 1200 },
                Trip { origin: 1, destination: 0, depart: 17 * 3600, distance_km: 10.4, duration_s: 1200 },
            ],
        }
    }

    #[test]
    fn tour_validation_catches_breaks() {
        let mut t = two_trip_tour(0);
        t.trips[1].origin = 2;
        assert!(t.validate().is_err());
        let mut t = two_trip_tour(0);
        t.trips[1].destination = 3;
        assert!(t.validate().is_err());
        let mut t = two_trip_tour(0);
        t.trips[1].depart = t.trips[0].depart;
        assert!(t.validate().is_err());
        let mut t = two_trip_tour(0);
        t.trips.truncate(1);
        assert!(t.validate().is_err());
        assert!(two_trip_tour(0).validate().is_ok());
    }

    #[test]
    fn parked_vehicle_waits_for_departure() {
        let mut v = Vehicle::new(two_trip_tour(0)).unwrap();
        for t in 0..100 {
            assert_eq!(v.advance(t), None);
            assert_eq!(v.state, VehicleState::Parked);
        }
    }

    #[test]
    fn trip_consumption_matches_range_derivation() {
        let mut v = Vehicle::new(two_trip_tour(0)).unwrap();
        let depart = 8 * 3600;
        assert!(matches!(v.advance(depart), Some(VehicleEvent::Departed { .. })));
        let mut arrived = false;
        for t in depart + 1..depart + 2000 {
            if let Some(VehicleEvent::Arrived { area, .. }) = v.advance(t) {
                assert_eq!(area, 1);
                arrived = true;
                break;
            }
        }
        assert!(arrived);
        // 10.4 km * (22/104) kWh/km = 2.2 kWh -> SoC drop 0.1
        let drop = 1.0 - v.soc();
        assert!((drop - 0.09998).abs() < 2e-4, "drop {drop}");
        assert!((v.consumed_kwh - 10.4 * DEFAULT_CONSUMPTION_KWH_PER_KM).abs() < 1e-9);
    }

    #[test]
    fn charging_accrues_and_caps() {
        let mut v = Vehicle::new(two_trip_tour(0)).unwrap();
        v.energy_kwh = 5.0;
        let mut total = 0.0;
        for _ in 0..3600 {
            total += v.charge_second(1.0);
        }
        assert!((total - 11.0).abs() < 1e-9);
        assert!((v.energy_kwh - 16.0).abs() < 1e-9);
        // cap at capacity
        v.energy_kwh = v.battery_capacity_kwh - 0.001;
        let added = v.charge_second(1.0);
        assert!(added <= 0.001 + 1e-12);
        assert!(v.energy_kwh <= v.battery_capacity_kwh);
    }

    #[test]
    fn emergency_soc_forces_charging() {
        let mut v = Vehicle::new(two_trip_tour(0)).unwrap();
        v.energy_kwh = 0.10 * v.battery_capacity_kwh;
        for b in [
            ChargingBehavior::AlwaysLoad,
            ChargingBehavior::PriceAware,
            ChargingBehavior::AlwaysLoadHomeOnly,
            ChargingBehavior::PriceAwareHomeOnly,
        ] {
            assert!(should_charge(&v, 99.0, b));
        }
    }

    #[test]
    fn price_aware_rank_rule() {
        let mut v = Vehicle::new(two_trip_tour(0)).unwrap();
        v.energy_kwh = 0.60 * v.battery_capacity_kwh;
        for p in [0.2, 0.3, 0.4] {
            v.record_seen_price(p);
        }
        // rank(0.3) = 2/3 >= 0.6 -> charge
        assert!(should_charge(&v, 0.3, ChargingBehavior::PriceAware));
        // rank(0.15) = 0 < 0.6 -> no
        assert!(!should_charge(&v, 0.15, ChargingBehavior::PriceAware));
    }

    #[test]
    fn empty_price_history_charges() {
        let mut v = Vehicle::new(two_trip_tour(0)).unwrap();
        v.energy_kwh = 0.9 * v.battery_capacity_kwh;
        assert!(should_charge(&v, 10.0, ChargingBehavior::PriceAware));
    }

    #[test]
    fn price_history_is_bounded_fifo() {
        let mut v = Vehicle::new(two_trip_tour(0)).unwrap();
        for i in 0..30 {
            v.record_seen_price(i as f64);
        }
        assert_eq!(v.price_history.len(), PRICE_HISTORY_CAP);
        assert_eq!(*v.price_history.front().unwrap(), 10.0);
    }

    #[test]
    fn home_only_blocks_later_stations() {
        let mut v = Vehicle::new(two_trip_tour(0)).unwrap();
        v.arrivals_today = 2;
        assert!(!should_charge(&v, 0.25, ChargingBehavior::AlwaysLoadHomeOnly));
        v.arrivals_today = 1;
        assert!(should_charge(&v, 0.25, ChargingBehavior::AlwaysLoadHomeOnly));
    }

    fn offer(id: u32, price: f64, power: f64, original: bool) -> StationOffer {
        StationOffer {
            station_id: id,
            area_id: id,
            price_per_kwh: price,
            power_fraction: power,
            is_original_target: original,
        }
    }

    #[test]
    fn diversion_rules() {
        let offers = vec![offer(0, 0.30, 1.0, true), offer(1, 0.20, 0.5, false)];
        let keep = consider_diversion(&offers, DiversionBehavior::DoNotDivert).unwrap();
        assert_eq!(keep.station_id, 0);
        let cheap = consider_diversion(&offers, DiversionBehavior::DivertToCheapest).unwrap();
        assert_eq!(cheap.station_id, 1);
        let power = consider_diversion(&offers, DiversionBehavior::DivertToHighestPower).unwrap();
        assert_eq!(power.station_id, 0);
        // all equal -> original target wins
        let tied = vec![offer(5, 0.25, 1.0, false), offer(2, 0.25, 1.0, true)];
        let t = consider_diversion(&tied, DiversionBehavior::DivertToCheapest).unwrap();
        assert_eq!(t.station_id, 2);
        assert!(consider_diversion(&[], DiversionBehavior::DivertToCheapest).is_none());
    }

    #[test]
    fn occupancy_bounds() {
        let mut st = ChargingStation {
            id: 0,
            area_id: 0,
            substation_id: 0,
            spaces: 2,
            offered_price: 0.25,
            offered_power_fraction: 1.0,
            occupied: BTreeSet::new(),
        };
        st.occupy(1).unwrap();
        st.occupy(2).unwrap();
        assert!(st.occupy(3).is_err());
        st.release(1);
        assert!(st.occupy(3).is_ok());
    }
}
