//! Acceptance criteria, one line each. Runs without the libtest harness so
//! every line is printed whether it passes or fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use fieldnet_core::analysis::{average_current, battery_life, fit_calibration, SeriesPoint};
use fieldnet_core::cloudcore::{CloudCore, CloudRecord, LOG_FILE};
use fieldnet_core::deployment::{run_scenario, Deployment, RunOutcome};
use fieldnet_core::environment::{step_soil, SoilParams, SoilState};
use fieldnet_core::faults::FaultKind;
use fieldnet_core::fieldnode::power::{DutyCycle, PowerProfile};
use fieldnet_core::fieldnode::sensors::{ChannelKind, SensorComplement};
use fieldnet_core::packet::{Command, NodeId, NodeKind, PacketKey};
use fieldnet_core::radiolink::LinkId;
use fieldnet_core::report::{RunReport, GATEWAY_LOG, RELAY_LOG};
use fieldnet_core::scenario::{
    CommandSpec, EnvironmentSpec, FaultSpec, LinksSpec, NodeSpec, OutageSpec, Scenario, WeatherPreset,
};
use fieldnet_core::simkernel::SimTime;
use fieldnet_core::storeforward::gateway::GatewayRecord;
use fieldnet_core::storeforward::log::DurableLog;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const DAY: u64 = 86_400;
const PERIOD: u64 = 305;

type Outcome = Result<String, String>;

/// Reports collected from every simulated scenario, for the closure check.
#[derive(Default)]
struct Ledger {
    reports: Vec<(String, RunReport)>,
}

impl Ledger {
    fn run(&mut self, name: &str, s: &Scenario, store: Option<&Path>) -> Result<RunOutcome, String> {
        let out = run_scenario(s, store).map_err(|e| format!("{name}: {e}"))?;
        self.reports.push((name.to_string(), out.report.clone()));
        Ok(out)
    }
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn lifetime_formula() -> Outcome {
    let h = battery_life(7800.0, 46.0, 0.7).map_err(|e| e.to_string())?;
    check((117.5..=119.5).contains(&h), format!("{h:.3} h outside [117.5, 119.5]"))?;
    Ok(format!("battery_life(7800, 46, 0.7) = {h:.2} h"))
}

fn average_current_paper() -> Outcome {
    let p = PowerProfile::soil_default();
    let avg = average_current(
        &p,
        &DutyCycle {
            sleep_s: 300,
            awake_s: 5,
        },
    );
    let oracle = (5.0 * 130.0 + 300.0 * 45.0) / 305.0;
    check(
        (avg - oracle).abs() < 1e-12,
        format!("{avg} differs from weighted-average oracle {oracle}"),
    )?;
    check(
        (avg - 46.39).abs() <= 0.01,
        format!("{avg:.4} mA not within 0.01 of 46.39"),
    )?;
    check((avg - 46.0).abs() <= 1.0, format!("{avg:.4} mA not within 1 mA of 46"))?;
    Ok(format!("average_current = {avg:.4} mA"))
}

/// Four soil nodes waking 250 times each: exactly 1000 packets.
fn thousand_packets(loss: f64, seed: u64) -> Scenario {
    Scenario {
        seed,
        duration_s: 250 * PERIOD,
        drain_s: 60 * DAY,
        nodes: vec![NodeSpec {
            count: Some(4),
            ..NodeSpec::new("soil", NodeKind::Soil)
        }],
        environment: EnvironmentSpec {
            weather: WeatherPreset::Calm,
            ..Default::default()
        },
        links: LinksSpec {
            long_loss: loss,
            uplink_loss: loss,
            ..Default::default()
        },
        ..Scenario::default_deployment()
    }
}

type KeyCounts = BTreeMap<PacketKey, usize>;

fn log_counts(dir: &Path) -> Result<(KeyCounts, KeyCounts), String> {
    let mut cloud = BTreeMap::new();
    for r in DurableLog::<CloudRecord>::read(dir.join(LOG_FILE)).map_err(|e| e.to_string())? {
        if let CloudRecord::Ingested { packet, .. } | CloudRecord::Quarantined { packet, .. } = r {
            *cloud.entry(packet.key()).or_insert(0) += 1;
        }
    }
    let mut gateway = BTreeMap::new();
    for r in DurableLog::<GatewayRecord>::read(dir.join(GATEWAY_LOG)).map_err(|e| e.to_string())? {
        if let GatewayRecord::Stored { packet, .. } = r {
            *gateway.entry(packet.key()).or_insert(0) += 1;
        }
    }
    Ok((cloud, gateway))
}

fn exactly_once(ledger: &mut Ledger) -> Outcome {
    let mut lines = Vec::new();
    for loss in [0.0, 0.3, 0.9] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let s = thousand_packets(loss, 11);
        let start = Instant::now();
        let out = ledger.run(&format!("exactly-once loss {loss}"), &s, Some(dir.path()))?;
        let elapsed = start.elapsed();
        let t = &out.report.totals;
        check(
            t.emitted == 1000,
            format!("loss {loss}: emitted {} packets, expected 1000", t.emitted),
        )?;
        check(
            out.report.queues.relay_data_loss == 0,
            format!("loss {loss}: relay evicted unacked data"),
        )?;
        let (cloud, gateway) = log_counts(dir.path())?;
        let expected: Vec<PacketKey> = (1..=4)
            .flat_map(|i| (0..250).map(move |seq| PacketKey::new(format!("soil-{i}"), seq)))
            .collect();
        for k in &expected {
            check(
                cloud.get(k) == Some(&1),
                format!("loss {loss}: cloud holds {k} {:?} times", cloud.get(k)),
            )?;
            check(
                gateway.get(k) == Some(&1),
                format!("loss {loss}: gateway holds {k} {:?} times", gateway.get(k)),
            )?;
        }
        check(
            cloud.len() == 1000,
            format!("loss {loss}: cloud holds {} keys", cloud.len()),
        )?;
        check(
            elapsed < Duration::from_secs(5),
            format!("loss {loss}: took {elapsed:?}"),
        )?;
        let long = &out.report.links[&LinkId::long()];
        lines.push(format!(
            "loss {loss}: 1000/1000 once, {} long-hop frames, {:.2?}",
            long.frames, elapsed
        ));
    }
    Ok(lines.join("; "))
}

fn outage_recovery(ledger: &mut Ledger) -> Outcome {
    let mut s = Scenario::default_deployment();
    // Aligned with a wake of soil-1 so one packet waits out the whole outage.
    let start = (7 * DAY).div_ceil(PERIOD) * PERIOD;
    s.links.outages.push(OutageSpec {
        link: "uplink".into(),
        start_s: start as f64,
        end_s: (start + 6 * 3600) as f64,
    });
    let out = ledger.run("uplink outage", &s, None)?;
    let r = &out.report;
    check(r.totals.yield_ == 1.0, format!("yield {}", r.totals.yield_))?;
    for (id, n) in &r.nodes {
        check(n.seq_ordered, format!("{id}: cloud records out of seq order"))?;
    }
    check(
        r.queues.relay_unacked == 0,
        format!("relay still holds {} unacked", r.queues.relay_unacked),
    )?;
    check(
        r.queues.gateway_queued == 0,
        format!("gateway still holds {}", r.queues.gateway_queued),
    )?;
    check(
        r.latency.max_s >= 6 * 3600,
        format!("max latency {} s below 6 h", r.latency.max_s),
    )?;
    Ok(format!(
        "yield {:.3} over {} packets, max latency {:.2} h, queues empty",
        r.totals.yield_,
        r.totals.emitted,
        r.latency.max_s as f64 / 3600.0
    ))
}

fn durability(ledger: &mut Ledger) -> Outcome {
    let mut base = Scenario::default_deployment();
    base.duration_s = 3 * DAY;
    base.seed = 5;
    base.links.long_loss = 0.2;
    base.links.uplink_loss = 0.2;
    base.links.short_loss = 0.05;

    let clean_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    ledger.run("durability clean", &base, Some(clean_dir.path()))?;

    let mut killed = base.clone();
    for (at, target) in [
        (DAY / 2, "relay"),
        (DAY, "gateway"),
        (2 * DAY + 17, "relay"),
        (2 * DAY + 17, "gateway"),
    ] {
        killed.faults.push(FaultSpec {
            at_s: at,
            target: target.into(),
            fault: FaultKind::Restart { downtime_s: 0 },
        });
    }
    let killed_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    ledger.run("durability restarts", &killed, Some(killed_dir.path()))?;
    let a = std::fs::read(clean_dir.path().join(LOG_FILE)).map_err(|e| e.to_string())?;
    let b = std::fs::read(killed_dir.path().join(LOG_FILE)).map_err(|e| e.to_string())?;
    check(
        !a.is_empty() && a == b,
        "cloud store after restarts differs from the uninterrupted run",
    )?;

    // A gateway that stays down for two hours: the relay retransmits, so the
    // stored observations match even though arrival times differ.
    let mut down = base.clone();
    down.faults.push(FaultSpec {
        at_s: DAY + 600,
        target: "gateway".into(),
        fault: FaultKind::Restart { downtime_s: 7200 },
    });
    let down_out = ledger.run("durability gateway down", &down, None)?;
    let clean = CloudCore::from_records(
        base.cloud_config(),
        &DurableLog::<CloudRecord>::read(clean_dir.path().join(LOG_FILE)).map_err(|e| e.to_string())?,
    );
    let lhs: Vec<_> = clean.packets().map(|p| p.packet.clone()).collect();
    let rhs: Vec<_> = down_out.cloud.read().packets().map(|p| p.packet.clone()).collect();
    check(
        lhs == rhs,
        format!(
            "gateway downtime changed stored observations ({} vs {})",
            lhs.len(),
            rhs.len()
        ),
    )?;
    Ok(format!(
        "{} records byte-identical after 4 kills; 2 h gateway outage loses nothing",
        clean.packets().count()
    ))
}

fn heard(cloud: &CloudCore, id: &str) -> Vec<(u64, u64)> {
    let id = NodeId::new(id);
    let mut v: Vec<(u64, u64)> = cloud
        .packets()
        .filter(|p| p.packet.node_id == id)
        .map(|p| (p.packet.t, p.packet.seq))
        .collect();
    v.sort_unstable();
    v
}

fn group_scoping(ledger: &mut Ledger) -> Outcome {
    let mut s = Scenario::default_deployment();
    s.duration_s = 3 * DAY;
    let issue = DAY + 1234;
    s.commands.push(CommandSpec {
        at_s: issue,
        group: Some("soil".into()),
        node: None,
        command: Command::SetPeriod { period_s: 600 },
    });
    let out = ledger.run("group rate", &s, None)?;
    let cloud = out.cloud.read();
    let mut changed = Vec::new();
    for e in cloud.nodes() {
        let id = e.descriptor.node_id.as_str().to_string();
        let h = heard(&cloud, &id);
        let gaps: Vec<(u64, u64)> = h.windows(2).map(|w| (w[0].0, w[1].0 - w[0].0)).collect();
        let switch = gaps.iter().find(|(_, g)| *g == 600).map(|(t, _)| *t);
        let final_period = out.manifest.nodes[&e.descriptor.node_id].period_s;
        match e.descriptor.kind {
            NodeKind::Soil => {
                let t = switch.ok_or_else(|| format!("{id}: period never changed"))?;
                check(t >= issue, format!("{id}: changed before the command was issued"))?;
                check(
                    t <= issue + 2 * PERIOD,
                    format!("{id}: changed {} s after issue, beyond two cycles", t - issue),
                )?;
                check(
                    gaps.iter().filter(|(g, _)| *g >= t).all(|(_, g)| *g == 600),
                    format!("{id}: irregular period after the change"),
                )?;
                check(final_period == 600, format!("{id}: final period {final_period}"))?;
                changed.push(t - issue);
            }
            NodeKind::Livestock => {
                check(
                    switch.is_none() && final_period == PERIOD,
                    format!("{id}: livestock node affected"),
                )?;
                check(
                    cloud.node_commands(&e.descriptor.node_id).is_empty(),
                    format!("{id}: was commanded"),
                )?;
            }
        }
    }
    check(
        changed.len() == 4,
        format!("{} soil nodes changed, expected 4", changed.len()),
    )?;
    Ok(format!(
        "4 soil nodes switched {changed:?} s after issue; 5 livestock unchanged"
    ))
}

fn silent_node(ledger: &mut Ledger) -> Outcome {
    let mut s = Scenario::default_deployment();
    s.duration_s = 2 * DAY;
    let hang_at = DAY + 100;
    let target = NodeId::new("soil-2");
    s.faults.push(FaultSpec {
        at_s: hang_at,
        target: target.to_string(),
        fault: FaultKind::RadioHang,
    });
    let mut d = Deployment::new(s.clone(), None).map_err(|e| e.to_string())?;
    d.run_until(SimTime::from_secs(hang_at + 2 * PERIOD))
        .map_err(|e| e.to_string())?;
    let (last_t, last_seq) = *heard(&d.cloud().read(), "soil-2")
        .last()
        .ok_or("no packets before the hang")?;
    check(
        last_t <= hang_at && last_t + PERIOD > hang_at,
        "last packet not the one just before the hang",
    )?;
    let silent_at = last_t + 3 * PERIOD;
    d.run_until(SimTime::from_secs(silent_at)).map_err(|e| e.to_string())?;
    let h = d
        .cloud()
        .read()
        .node_health(&target, silent_at)
        .map_err(|e| e.to_string())?;
    check(!h.silent, "silent before three periods had passed")?;
    d.run_until(SimTime::from_secs(silent_at + 1))
        .map_err(|e| e.to_string())?;
    let h = d
        .cloud()
        .read()
        .node_health(&target, silent_at + 1)
        .map_err(|e| e.to_string())?;
    check(h.silent, "not silent after three missed periods")?;
    let others_silent = d.cloud().read().silent_nodes(silent_at + 1).len();
    check(
        others_silent == 1,
        format!("{others_silent} nodes silent, expected only soil-2"),
    )?;

    let issued = silent_at + 600;
    d.run_until(SimTime::from_secs(issued)).map_err(|e| e.to_string())?;
    d.cloud()
        .write()
        .command_node(&target, Command::PowerCycle, issued)
        .map_err(|e| e.to_string())?;
    d.run_until(SimTime::from_secs(issued + 2 * PERIOD + 120))
        .map_err(|e| e.to_string())?;
    let now = d.now().as_secs();
    let cloud = d.cloud().read();
    let after: Vec<_> = heard(&cloud, "soil-2")
        .into_iter()
        .filter(|(t, _)| *t > issued)
        .collect();
    let &(resumed_t, resumed_seq) = after.first().ok_or("no packets after power_cycle")?;
    check(
        resumed_seq == last_seq + 1,
        format!("seq jumped from {last_seq} to {resumed_seq}"),
    )?;
    let h = cloud.node_health(&target, now).map_err(|e| e.to_string())?;
    check(!h.silent, "still silent after reporting resumed")?;
    drop(cloud);
    let out = d.finish().map_err(|e| e.to_string())?;
    ledger.reports.push(("silent node".into(), out.report));
    Ok(format!(
        "silent at last+{} s, power_cycle at {} resumed at {} (seq {} -> {})",
        3 * PERIOD + 1,
        issued,
        resumed_t,
        last_seq,
        resumed_seq
    ))
}

fn battery_depletion(ledger: &mut Ledger) -> Outcome {
    let mut s = Scenario::default_deployment();
    s.duration_s = 9 * DAY;
    s.drain_s = 3600;
    s.environment.weather = WeatherPreset::Calm;
    s.nodes = vec![NodeSpec {
        packs: Some(1),
        pack_capacity_mah: Some(7800.0),
        solar_trickle_ma: Some(0.0),
        ..NodeSpec::new("soil-1", NodeKind::Soil)
    }];
    let out = ledger.run("depletion", &s, None)?;
    let hours = out.report.nodes[&NodeId::new("soil-1")]
        .depletion_h
        .ok_or("node never depleted")?;
    let avg_ma = (5.0 * 130.0 + 300.0 * 45.0) / 305.0;
    let oracle = 7800.0 / avg_ma;
    check(
        (hours - 168.0).abs() <= 5.0,
        format!("depleted at {hours:.1} h, outside 168 ± 5"),
    )?;
    check(
        (hours - oracle).abs() <= PERIOD as f64 / 3600.0,
        format!("{hours:.2} h vs oracle {oracle:.2} h"),
    )?;

    // Compound faults on the default three-pack bank: silence and depletion
    // long before the fault-free physics would run out.
    let mut stack = Scenario::default_deployment();
    stack.duration_s = 14 * DAY;
    stack.nodes = vec![NodeSpec::new("soil-1", NodeKind::Soil)];
    stack.faults = vec![
        FaultSpec {
            at_s: DAY,
            target: "soil-1".into(),
            fault: FaultKind::ExtraLoad { ma: 150.0 },
        },
        FaultSpec {
            at_s: 2 * DAY,
            target: "soil-1".into(),
            fault: FaultKind::RadioHang,
        },
        FaultSpec {
            at_s: 3 * DAY,
            target: "soil-1".into(),
            fault: FaultKind::PowerCycle,
        },
        FaultSpec {
            at_s: 4 * DAY,
            target: "soil-1".into(),
            fault: FaultKind::ProtectionTrip,
        },
    ];
    let stacked = ledger.run("fault stack", &stack, None)?;
    let n = &stacked.report.nodes[&NodeId::new("soil-1")];
    let fault_free_h = 23_400.0 / avg_ma;
    let stacked_h = n.depletion_h.ok_or("fault stack did not stop the node")?;
    check(
        stacked_h < fault_free_h / 2.0,
        format!("fault stack lasted {stacked_h:.1} h"),
    )?;
    check(!n.silent_episodes.is_empty(), "fault stack produced no silent episode")?;
    Ok(format!(
        "single pack depleted at {hours:.1} h (oracle {oracle:.1} h); fault stack dead at {stacked_h:.1} h vs {fault_free_h:.0} h fault-free"
    ))
}

fn calibration() -> Outcome {
    let complement = SensorComplement::soil_default(true);
    let cheap_spec = complement
        .channels()
        .into_iter()
        .find(|c| c.kind == ChannelKind::SoilMoistureCheap)
        .ok_or("no cheap moisture channel")?;
    let params = SoilParams::default();
    let mut soil = SoilState::new(&params, 0.44, 8.0);
    let mut truth = Vec::new();
    for i in 0..(5 * 1440u64) {
        truth.push((i * 60, soil.theta * 100.0));
        soil = step_soil(&soil, &params, 0.0, 8.0, 60.0);
    }
    let (lo, hi) = truth
        .iter()
        .fold((f64::MAX, f64::MIN), |(l, h), (_, v)| (l.min(*v), h.max(*v)));
    let noise = Normal::new(0.0, 0.02 * (hi - lo)).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cheap: Vec<SeriesPoint> = truth
        .iter()
        .map(|&(t, v)| SeriesPoint {
            t,
            value: cheap_spec.gain * v + cheap_spec.offset,
        })
        .collect();
    let reference: Vec<SeriesPoint> = truth
        .iter()
        .map(|&(t, v)| SeriesPoint {
            t,
            value: v + noise.sample(&mut rng),
        })
        .collect();
    let fit = fit_calibration(&cheap, &reference, None).map_err(|e| e.to_string())?;

    // Normal-equation oracle on the raw sums.
    let n = cheap.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (c, r) in cheap.iter().zip(&reference) {
        sx += c.value;
        sy += r.value;
        sxx += c.value * c.value;
        sxy += c.value * r.value;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    check(
        (fit.slope - slope).abs() <= 1e-6 * slope.abs(),
        format!("slope {} vs oracle {slope}", fit.slope),
    )?;
    check(
        (fit.intercept - intercept).abs() <= 1e-6 * intercept.abs().max(1.0),
        format!("intercept {} vs oracle {intercept}", fit.intercept),
    )?;
    check(
        (fit.slope - 0.8).abs() <= 0.02 * 0.8,
        format!("slope {:.4} not within 2% of 0.8", fit.slope),
    )?;
    check(
        (fit.intercept - 3.0).abs() <= 0.02 * 3.0,
        format!("intercept {:.4} not within 2% of 3", fit.intercept),
    )?;
    check(fit.r_squared > 0.98, format!("R² {:.4}", fit.r_squared))?;
    Ok(format!(
        "slope {:.4} intercept {:.4} R² {:.4} over {} points",
        fit.slope, fit.intercept, fit.r_squared, fit.n_points
    ))
}

fn determinism(ledger: &mut Ledger) -> Outcome {
    let mut s = Scenario::default_deployment();
    s.duration_s = 4 * DAY;
    s.seed = 99;
    s.links.short_loss = 0.1;
    s.links.long_loss = 0.3;
    s.links.uplink_loss = 0.3;
    s.faults.push(FaultSpec {
        at_s: DAY,
        target: "sheep-3".into(),
        fault: FaultKind::RadioHang,
    });
    s.faults.push(FaultSpec {
        at_s: 2 * DAY,
        target: "relay".into(),
        fault: FaultKind::Restart { downtime_s: 900 },
    });
    s.commands.push(CommandSpec {
        at_s: DAY / 2,
        group: Some("livestock".into()),
        node: None,
        command: Command::SetPeriod { period_s: 900 },
    });
    let dirs = [
        tempfile::tempdir().map_err(|e| e.to_string())?,
        tempfile::tempdir().map_err(|e| e.to_string())?,
    ];
    let mut reports = Vec::new();
    for (i, dir) in dirs.iter().enumerate() {
        let out = ledger.run(&format!("determinism {i}"), &s, Some(dir.path()))?;
        reports.push(out.report.to_json());
    }
    check(reports[0] == reports[1], "run reports differ")?;
    for f in [LOG_FILE, RELAY_LOG, GATEWAY_LOG] {
        let a = std::fs::read(dirs[0].path().join(f)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dirs[1].path().join(f)).map_err(|e| e.to_string())?;
        check(a == b, format!("{f} differs between runs"))?;
    }
    let post_hoc = RunReport::from_store(dirs[0].path())
        .map_err(|e| e.to_string())?
        .to_json();
    check(
        post_hoc == reports[0],
        "report recomputed from the store differs from the in-run report",
    )?;
    Ok(format!(
        "report ({} bytes) and store logs byte-identical across two runs",
        reports[0].len()
    ))
}

fn accounting_closure(ledger: &mut Ledger) -> Outcome {
    // Add the cases that exercise the remaining buckets: short-link loss,
    // capacity eviction, and packets still queued at the end.
    let mut lossy = Scenario::default_deployment();
    lossy.duration_s = 2 * DAY;
    lossy.links.short_loss = 0.25;
    ledger.run("closure short loss", &lossy, None)?;

    let mut evicting = lossy.clone();
    evicting.queue.relay_capacity = 50;
    evicting.links.outages.push(OutageSpec {
        link: "long".into(),
        start_s: 36_000.0,
        end_s: 72_000.0,
    });
    let ev = ledger.run("closure eviction", &evicting, None)?;
    check(ev.report.totals.evicted > 0, "eviction scenario evicted nothing")?;

    let mut cut = lossy.clone();
    cut.drain_s = 0;
    cut.links.outages.push(OutageSpec {
        link: "uplink".into(),
        start_s: 150_000.0,
        end_s: 200_000.0,
    });
    let cut_out = ledger.run("closure cut short", &cut, None)?;
    let q = &cut_out.report.totals;
    check(q.in_gateway + q.in_relay > 0, "cut-short scenario left nothing queued")?;

    let mut detail = Vec::new();
    for (name, r) in &ledger.reports {
        for (id, n) in &r.nodes {
            let a = &n.accounting;
            let rhs = a.delivered + a.link_lost + a.evicted + a.in_relay + a.in_gateway + a.in_flight;
            check(
                a.emitted == rhs && a.unaccounted == 0,
                format!("{name}/{id}: emitted {} != {rhs}", a.emitted),
            )?;
        }
        check(r.closure_holds(), format!("{name}: totals do not close"))?;
        detail.push(r.totals.emitted);
    }
    Ok(format!(
        "{} scenarios, {} packets, books close per node",
        ledger.reports.len(),
        detail.iter().sum::<u64>()
    ))
}

fn main() {
    let mut ledger = Ledger::default();
    let mut failed = 0;
    let mut report = |name: &str, outcome: Outcome| match outcome {
        Ok(detail) => println!("PASS  {name}: {detail}"),
        Err(why) => {
            failed += 1;
            println!("FAIL  {name}: {why}");
        }
    };
    report("lifetime formula", lifetime_formula());
    report("average current", average_current_paper());
    report("exactly-once delivery", exactly_once(&mut ledger));
    report("outage recovery", outage_recovery(&mut ledger));
    report("durability", durability(&mut ledger));
    report("group command scoping", group_scoping(&mut ledger));
    report("silent-node detection", silent_node(&mut ledger));
    report("battery depletion", battery_depletion(&mut ledger));
    report("calibration", calibration());
    report("determinism", determinism(&mut ledger));
    report("accounting closure", accounting_closure(&mut ledger));
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
