//! CSV tables for the studies and the simulator.

use std::io::Write;

use bnps_core::analysis::{CampusReport, CrossoverReport};
use bnps_core::sim::{DeviceRole, SimReport};
use bnps_core::{average_power, energy, PowerProfile};

use crate::trace::format_timestamp;

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// `load_bps,mode,watts,fit_watts`; `fit_watts` is empty when the mode has no fit.
pub fn write_crossover<W: Write>(out: W, r: &CrossoverReport) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["load_bps", "mode", "watts", "fit_watts"])?;
    for p in &r.points {
        let fit = r.fit(p.mode).map(|f| f.at(p.offered_bps));
        w.write_record([p.offered_bps.to_string(), p.mode.to_string(), p.avg_watts.to_string(), opt(fit)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_per_window<W: Write>(out: W, r: &CampusReport) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["ap_id", "t_start", "traffic_bps", "static_w", "sdps_w", "savings_pct"])?;
    for x in &r.windows {
        w.write_record([
            x.ap_id.clone(),
            format_timestamp(x.t_start),
            x.traffic_bps.to_string(),
            x.static_watts.to_string(),
            x.sdps_watts.to_string(),
            x.savings_pct.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per hour of day across all APs; `mean_savings_pct` compares the summed powers.
pub fn write_daily<W: Write>(out: W, r: &CampusReport) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["hour", "mean_traffic", "mean_static_w", "mean_sdps_w", "mean_savings_pct"])?;
    for h in &r.hourly {
        w.write_record([
            h.hour.to_string(),
            h.mean_traffic_bps.to_string(),
            h.mean_static_watts.to_string(),
            h.mean_sdps_watts.to_string(),
            h.savings_pct.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn role(r: DeviceRole) -> &'static str {
    match r {
        DeviceRole::Ap => "ap",
        DeviceRole::Sta => "sta",
        DeviceRole::LegacySta => "legacy_sta",
        DeviceRole::Obss => "obss",
    }
}

pub fn write_timelines<W: Write>(out: W, r: &SimReport) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["device", "role", "start_ns", "duration_ns", "state", "mode", "activity"])?;
    for d in &r.devices {
        let mut t = 0u64;
        for s in &d.segments {
            w.write_record([
                d.id.to_string(),
                role(d.role).to_string(),
                t.to_string(),
                s.duration_ns.to_string(),
                s.state.as_str().to_string(),
                s.mode.to_string(),
                s.activity.as_str().to_string(),
            ])?;
            t += s.duration_ns;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_flows<W: Write>(out: W, r: &SimReport) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "src",
        "dst",
        "offered_packets",
        "delivered_packets",
        "dropped_packets",
        "offered_bps",
        "throughput_bps",
        "latency_p50_us",
        "latency_p95_us",
        "latency_p99_us",
    ])?;
    for f in &r.flows {
        w.write_record([
            f.src.to_string(),
            f.dst.map_or_else(String::new, |d| d.to_string()),
            f.offered_packets.to_string(),
            f.delivered_packets.to_string(),
            f.dropped_packets.to_string(),
            f.offered_bps.to_string(),
            f.throughput_bps.to_string(),
            f.latency_p50_us.to_string(),
            f.latency_p95_us.to_string(),
            f.latency_p99_us.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Headline numbers of a run as `key,value` rows.
pub fn summary_rows(r: &SimReport, profile: &PowerProfile) -> Vec<(String, String)> {
    let mut rows = vec![
        ("duration_s".to_string(), (r.duration_ns as f64 * 1e-9).to_string()),
        ("events".to_string(), r.events.total().to_string()),
        ("collisions".to_string(), r.collisions.len().to_string()),
        ("colliding_frames".to_string(), r.collisions.iter().map(|c| u64::from(c.frames)).sum::<u64>().to_string()),
        ("beacons".to_string(), r.beacons.len().to_string()),
        ("schedule_conflicts".to_string(), r.schedule_conflicts.len().to_string()),
        ("icrs".to_string(), r.icrs.len().to_string()),
        ("deferrals".to_string(), r.deferrals.len().to_string()),
        ("triggers".to_string(), r.triggers.len().to_string()),
        ("throughput_bps".to_string(), r.flows.iter().map(|f| f.throughput_bps).sum::<f64>().to_string()),
    ];
    for d in &r.devices {
        let t = d.timeline();
        let e = energy(&t, profile).map_or_else(|e| e.to_string(), |v| v.to_string());
        let p = average_power(&t, profile).map_or_else(|e| e.to_string(), |v| v.to_string());
        rows.push((format!("device_{}_energy_j", d.id), e));
        rows.push((format!("device_{}_avg_w", d.id), p));
    }
    rows
}

pub fn write_summary<W: Write>(out: W, r: &SimReport, profile: &PowerProfile) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["key", "value"])?;
    for (k, v) in summary_rows(r, profile) {
        w.write_record([k, v])?;
    }
    w.flush()?;
    Ok(())
}
