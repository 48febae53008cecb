//! Trip-record ingestion and tour extraction.
//!
//! Trips become nodes of a digraph with an edge (f -> g) whenever g
//! starts on the edge f ended on and departs later. Vertex-disjoint
//! cycles of length 2-4 are extracted by a greedy depth-first search in
//! ascending (depart, id) order, accepting the shortest cycle first at
//! each root, so every trip belongs to at most one vehicle and the
//! output is deterministic.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{EvsimError, Result};
use crate::mobility::{Tour, Trip};

pub const TRIPS_HEADER: &str = "id,from_edge,to_edge,depart";
pub const TOURS_FILE_VERSION: &str = "evsim-tours v1";

#[derive(Debug, Clone, PartialEq)]
pub struct TripRecord {
    pub id: String,
    pub from_edge: String,
    pub to_edge: String,
    /// Seconds of day, in [0, 86400).
    pub depart: u64,
    /// Optional measured trip distance; defaults are applied downstream.
    pub distance_km: Option<f64>,
    pub duration_s: Option<u64>,
}

#[derive(Debug)]
pub struct TripGraph {
    /// Nodes sorted by (depart, id).
    pub nodes: Vec<TripRecord>,
    /// Adjacency by node index, successors sorted by (depart, id).
    pub edges: Vec<Vec<usize>>,
}

/// Builds the trip-compatibility digraph. Duplicate ids are rejected.
pub fn build_graph(mut trips: Vec<TripRecord>) -> Result<TripGraph> {
    trips.sort_by(|a, b| (a.depart, &a.id).cmp(&(b.depart, &b.id)));
    {
        let mut seen = HashMap::new();
        for t in &trips {
            if seen.insert(t.id.clone(), ()).is_some() {
                return Err(EvsimError::contract(format!("duplicate trip id {}", t.id)));
            }
            if t.depart >= 86_400 {
                return Err(EvsimError::contract(format!(
                    "trip {} departs outside [0, 86400)",
                    t.id
                )));
            }
        }
    }
    // group successors by starting edge
    let mut by_from: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, t) in trips.iter().enumerate() {
        by_from.entry(t.from_edge.as_str()).or_default().push(i);
    }
    let mut edges = vec![Vec::new(); trips.len()];
    for (i, t) in trips.iter().enumerate() {
        if let Some(successors) = by_from.get(t.to_edge.as_str()) {
            for &j in successors {
                if trips[j].depart > t.depart {
                    edges[i].push(j); // already in (depart, id) order
                }
            }
        }
    }
    Ok(TripGraph { nodes: trips, edges })
}

/// Extracts vertex-disjoint trip cycles of length `min_len..=max_len`.
pub fn extract_tours(graph: &TripGraph, min_len: usize, max_len: usize) -> Vec<Vec<usize>> {
    let n = graph.nodes.len();
    let mut used = vec![false; n];
    let mut cycles = Vec::new();
    for root in 0..n {
        if used[root] {
            continue;
        }
        // shortest cycle accepted first at each root
        let mut found = None;
        for target_len in min_len..=max_len {
            let mut path = vec![root];
            if dfs_exact(graph, &used, root, target_len, &mut path) {
                found = Some(path);
                break;
            }
        }
        if let Some(cycle) = found {
            for &i in &cycle {
                used[i] = true;
            }
            cycles.push(cycle);
        }
    }
    cycles
}

fn dfs_exact(
    graph: &TripGraph,
    used: &[bool],
    root: usize,
    target_len: usize,
    path: &mut Vec<usize>,
) -> bool {
    let current = *path.last().unwrap();
    if path.len() == target_len {
        // close the cycle back onto the root's starting edge
        return graph.nodes[current].to_edge == graph.nodes[root].from_edge;
    }
    for &next in &graph.edges[current] {
        if used[next] || path.contains(&next) {
            continue;
        }
        path.push(next);
        if dfs_exact(graph, used, root, target_len, path) {
            return true;
        }
        path.pop();
    }
    false
}

/// Turns extracted index cycles into mobility tours. Edge names become
/// area ids in order of first appearance; missing distances and
/// durations fall back to the given defaults.
pub fn cycles_to_tours(
    graph: &TripGraph,
    cycles: &[Vec<usize>],
    default_distance_km: f64,
    default_duration_s: u64,
) -> Vec<Tour> {
    fn area_of(edge: &str, ids: &mut HashMap<String, u32>) -> u32 {
        if let Some(&id) = ids.get(edge) {
            id
        } else {
            let id = ids.len() as u32;
            ids.insert(edge.to_string(), id);
            id
        }
    }
    let mut ids: HashMap<String, u32> = HashMap::new();
    cycles
        .iter()
        .enumerate()
        .map(|(vehicle_id, cycle)| Tour {
            vehicle_id: vehicle_id as u32,
            trips: cycle
                .iter()
                .map(|&i| {
                    let rec = &graph.nodes[i];
                    Trip {
                        origin: area_of(&rec.from_edge, &mut ids),
                        destination: area_of(&rec.to_edge, &mut ids),
                        depart: rec.depart,
                        distance_km: rec.distance_km.unwrap_or(default_distance_km),
                        duration_s: rec.duration_s.unwrap_or(default_duration_s),
                    }
                })
                .collect(),
        })
        .collect()
}

/// Parses the delimited trips file: required header
/// `id,from_edge,to_edge,depart` with optional `distance_km,duration_s`
/// columns appended.
pub fn parse_trips(text: &str) -> Result<Vec<TripRecord>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| EvsimError::parse("trips file is empty"))?
        .trim();
    let extended = header == format!("{TRIPS_HEADER},distance_km,duration_s");
    if header != TRIPS_HEADER && !extended {
        return Err(EvsimError::parse(format!(
            "trips file must start with header '{TRIPS_HEADER}' (optionally with distance_km,duration_s)"
        )));
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let want = if extended { 6 } else { 4 };
        if fields.len() != want {
            return Err(EvsimError::parse(format!(
                "trips line {}: expected {} fields, got {}",
                lineno + 2,
                want,
                fields.len()
            )));
        }
        let depart = fields[3]
            .trim()
            .parse::<u64>()
            .map_err(|e| EvsimError::parse(format!("trips line {}: bad depart: {e}", lineno + 2)))?;
        let (distance_km, duration_s) = if extended {
            (
                Some(fields[4].trim().parse::<f64>().map_err(|e| {
                    EvsimError::parse(format!("trips line {}: bad distance: {e}", lineno + 2))
                })?),
                Some(fields[5].trim().parse::<u64>().map_err(|e| {
                    EvsimError::parse(format!("trips line {}: bad duration: {e}", lineno + 2))
                })?),
            )
        } else {
            (None, None)
        };
        out.push(TripRecord {
            id: fields[0].trim().to_string(),
            from_edge: fields[1].trim().to_string(),
            to_edge: fields[2].trim().to_string(),
            depart,
            distance_km,
            duration_s,
        });
    }
    Ok(out)
}

/// Serializes tours to the versioned tours file consumed by the
/// scenario loader.
pub fn write_tours_file(tours: &[Tour]) -> String {
    let mut out = String::new();
    writeln!(out, "{TOURS_FILE_VERSION}").unwrap();
    writeln!(out, "vehicle_id,trip_index,origin,destination,depart,distance_km,duration_s").unwrap();
    for tour in tours {
        for (i, trip) in tour.trips.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                tour.vehicle_id, i, trip.origin, trip.destination, trip.depart, trip.distance_km,
                trip.duration_s
            )
            .unwrap();
        }
    }
    out
}

pub fn parse_tours_file(text: &str) -> Result<Vec<Tour>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(TOURS_FILE_VERSION) {
        return Err(EvsimError::parse(format!(
            "tours file must start with '{TOURS_FILE_VERSION}'"
        )));
    }
    let _header = lines.next();
    let mut tours: Vec<Tour> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(EvsimError::parse(format!("tours line {}: expected 7 fields", lineno + 3)));
        }
        let parse_err = |what: &str| EvsimError::parse(format!("tours line {}: bad {what}", lineno + 3));
        let vehicle_id = f[0].trim().parse::<u32>().map_err(|_| parse_err("vehicle_id"))?;
        let trip = Trip {
            origin: f[2].trim().parse().map_err(|_| parse_err("origin"))?,
            destination: f[3].trim().parse().map_err(|_| parse_err("destination"))?,
            depart: f[4].trim().parse().map_err(|_| parse_err("depart"))?,
            distance_km: f[5].trim().parse().map_err(|_| parse_err("distance_km"))?,
            duration_s: f[6].trim().parse().map_err(|_| parse_err("duration_s"))?,
        };
        match tours.last_mut() {
            Some(t) if t.vehicle_id == vehicle_id => t.trips.push(trip),
            _ => tours.push(Tour { vehicle_id, trips: vec![trip] }),
        }
    }
    for t in &tours {
        t.validate()?;
    }
    Ok(tours)
}
