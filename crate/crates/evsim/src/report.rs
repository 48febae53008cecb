//! CSV report emitters over a finished run's metrics.
//!
//! All files use ',' as delimiter, '.' as decimal separator and LF line
//! endings; an empty metric still produces the header line.

use std::fmt::Write as _;

use crate::metrics::MetricsRecord;

/// Per-substation, per-day maximum and mean 5-minute loading.
pub fn daily_loadings_csv(m: &MetricsRecord) -> String {
    let mut out = String::from("substation_id,day,max_loading,mean_loading\n");
    for (sub, days) in m.daily_by_substation() {
        for (day, max, mean) in days {
            writeln!(out, "{sub},{day},{max},{mean}").unwrap();
        }
    }
    out
}

/// Per-day maximum and mean of the 5-minute window maxima over all
/// substations.
pub fn daily_global_csv(m: &MetricsRecord) -> String {
    let mut acc: std::collections::BTreeMap<u64, (f64, f64, u64)> = Default::default();
    for s in &m.substations {
        for w in &s.windows {
            let e = acc.entry(w.start / crate::grid::SECONDS_PER_DAY).or_insert((0.0, 0.0, 0));
            e.0 = e.0.max(w.max_loading);
            e.1 += w.max_loading;
            e.2 += 1;
        }
    }
    let mut out = String::from("day,max_loading,mean_of_window_maxima\n");
    for (day, (max, sum, n)) in acc {
        writeln!(out, "{day},{max},{}", sum / n as f64).unwrap();
    }
    out
}

/// Mean received reward per day.
pub fn rewards_csv(m: &MetricsRecord) -> String {
    let mut out = String::from("day,mean_reward,reward_count\n");
    let mut counts: std::collections::BTreeMap<u64, u64> = Default::default();
    for r in &m.rewards {
        *counts.entry(r.day).or_default() += 1;
    }
    for (day, mean) in m.mean_reward_by_day() {
        writeln!(out, "{day},{mean},{}", counts[&day]).unwrap();
    }
    out
}

/// First-day vs last-day mean reward, one row.
pub fn reward_delta_csv(m: &MetricsRecord) -> String {
    let mut out = String::from("first_day_mean,last_day_mean,delta\n");
    if let Some((first, last, delta)) = m.reward_delta_first_to_last() {
        writeln!(out, "{first},{last},{delta}").unwrap();
    }
    out
}

/// Overloaded 5-minute windows (max loading > 1.0) per substation.
pub fn overloads_csv(m: &MetricsRecord) -> String {
    let mut out = String::from("substation_id,overloaded_windows\n");
    for (sub, count) in m.overload_counts() {
        writeln!(out, "{sub},{count}").unwrap();
    }
    out
}

/// Per-vehicle energy ledger.
pub fn vehicles_csv(m: &MetricsRecord) -> String {
    let mut out =
        String::from("vehicle_id,initial_kwh,charged_kwh,consumed_kwh,final_kwh,stranded\n");
    for v in &m.vehicles {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            v.vehicle_id, v.initial_kwh, v.charged_kwh, v.consumed_kwh, v.final_kwh, v.stranded
        )
        .unwrap();
    }
    out
}

/// Writes every report for a run into `dir`, prefixed by the profile name.
pub fn write_reports(m: &MetricsRecord, dir: &std::path::Path) -> std::io::Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let files: [(&str, String); 6] = [
        ("daily_loadings.csv", daily_loadings_csv(m)),
        ("daily_global.csv", daily_global_csv(m)),
        ("rewards.csv", rewards_csv(m)),
        ("reward_delta.csv", reward_delta_csv(m)),
        ("overloads.csv", overloads_csv(m)),
        ("vehicles.csv", vehicles_csv(m)),
    ];
    let mut written = Vec::new();
    for (name, content) in files {
        let path = dir.join(format!("{}_{name}", m.profile));
        std::fs::write(&path, content)?;
        written.push(path);
    }
    Ok(written)
}
