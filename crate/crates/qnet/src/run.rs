//! Report generation behind the CLI verbs. Reports are deterministic: no
//! wall-clock values, stable ordering, so golden-file comparison works.

use std::collections::BTreeSet;

use crate::graphstate::{GraphState, OutcomeSource, QubitId};
use crate::netstate::{build_network_state, cost_report, symmetrize, Layout, NetworkSpec, Status};
use crate::scenario::{LayoutKind, Scenario};
use crate::stack::{
    provision_dynamic, replay_check, verify_state, EnsembleCopy, RequestOutcome, Verdict,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verb {
    Costs,
    Route,
    Drill,
    E2e,
    Verify,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Records,
}

/// One report line: a record kind plus pre-formatted `key=value` fields.
pub struct Record {
    pub kind: &'static str,
    pub body: String,
}

pub struct Report {
    pub title: &'static str,
    pub records: Vec<Record>,
    pub ok: bool,
}

impl Report {
    fn new(title: &'static str) -> Self {
        Report { title, records: Vec::new(), ok: true }
    }
    fn push(&mut self, kind: &'static str, body: String) {
        self.records.push(Record { kind, body });
    }
    pub fn render(&self, format: Format) -> String {
        let mut out = String::new();
        let status = if self.ok { "PASS" } else { "FAIL" };
        match format {
            Format::Records => {
                for r in &self.records {
                    out.push_str(r.kind);
                    out.push(' ');
                    out.push_str(&r.body);
                    out.push('\n');
                }
                out.push_str(&format!("result status={status}\n"));
            }
            Format::Text => {
                out.push_str(&format!("# {}\n", self.title));
                for r in &self.records {
                    out.push_str(&r.body);
                    out.push('\n');
                }
                out.push_str(&format!("result={status}\n"));
            }
        }
        out
    }
}

pub fn run(verb: Verb, scenario: Option<&Scenario>) -> Result<Report, String> {
    match verb {
        Verb::Costs => Ok(costs()),
        Verb::Route => route(need(scenario)?),
        Verb::Drill => drill(need(scenario)?),
        Verb::E2e => e2e(need(scenario)?),
        Verb::Verify => verify(need(scenario)?),
    }
}

fn need(scenario: Option<&Scenario>) -> Result<&Scenario, String> {
    scenario.ok_or_else(|| "this verb needs --scenario".to_string())
}

// ---------------------------------------------------------------------------

/// Storage-cost table over the standard (c, m) grid.
fn costs() -> Report {
    let mut rep = Report::new("storage costs");
    for c in [3u32, 5, 7] {
        for m in [5usize, 10, 15] {
            let spec = NetworkSpec::uniform(c, m).expect("valid spec");
            let r = cost_report(&spec);
            rep.push("costs", format!("c={c} m={m} MB={} MS={} MM={}", r.m_b, r.m_s, r.m_m));
        }
    }
    rep
}

// ---------------------------------------------------------------------------

fn route(scenario: &Scenario) -> Result<Report, String> {
    let mut rep = Report::new("region routing");
    let mut sim = provision_dynamic(scenario).map_err(|e| e.to_string())?;
    let targets: BTreeSet<String> = scenario
        .networks
        .iter()
        .filter(|n| !n.switch_clients.is_empty())
        .map(|n| n.router())
        .collect();
    if targets.len() < 2 {
        return Err("route needs at least two client-bearing networks".into());
    }
    let pre = sim.backing().clone();
    let routed = sim.run_routing(&targets).map_err(|e| e.to_string())?;
    for line in &routed.trace {
        rep.push("route", line.clone());
    }
    let mut roots: BTreeSet<String> = BTreeSet::new();
    let mut want = targets.len();
    for inst in &routed.instances {
        let star = sim.backing().star_centre(&inst.root) == Some(inst.root.clone());
        let leaves: Vec<String> = inst.leaves.iter().map(|q| q.to_string()).collect();
        rep.push(
            "instance",
            format!(
                "size={} root={} leaves=[{}] star={}",
                inst.size(),
                inst.root,
                leaves.join(","),
                star
            ),
        );
        rep.ok &= star && inst.size() == want && roots.insert(inst.root.device.clone());
        want -= 1;
    }
    rep.ok &= want == 1;
    for (i, (lo, hi)) in routed.op_ranges.iter().enumerate() {
        let inst = &routed.instances[i];
        let mut extra = vec![inst.root.clone()];
        extra.extend(inst.leaves.iter().cloned());
        let ops = &sim.backing().op_log[*lo..*hi];
        let verdict = match replay_check(&pre, ops, sim.backing(), &extra) {
            Ok(Some(true)) => "PASS",
            Ok(Some(false)) => {
                rep.ok = false;
                "FAIL"
            }
            Ok(None) => "SKIPPED",
            Err(e) => return Err(e.to_string()),
        };
        rep.push("replay", format!("step={} oracle={verdict}", i + 1));
    }
    Ok(rep)
}

// ---------------------------------------------------------------------------

fn drill(scenario: &Scenario) -> Result<Report, String> {
    let mut rep = Report::new("failure drills");
    for net in &scenario.networks {
        if net.switch_clients.is_empty() {
            continue;
        }
        match &net.layout {
            LayoutKind::Plain => {
                rep.push("drill", format!("network={} layout=plain note=nothing-to-drill", net.id));
            }
            LayoutKind::Symmetrized(n) => {
                let spec =
                    NetworkSpec::new(net.switch_clients.clone()).map_err(|e| e.to_string())?;
                let m = spec.m();
                let st = symmetrize(&spec, *n).map_err(|e| e.to_string())?;
                for slot in 1..=m {
                    let d = format!("d{slot}");
                    let mut src = OutcomeSource::seeded(scenario.seed * 100 + slot as u64);
                    let st2 = st.device_fail(&d, &mut src).map_err(|e| e.to_string())?;
                    let icc = st2.intact_full_copies();
                    let floor = n / m;
                    let ok = icc >= floor;
                    rep.ok &= ok;
                    rep.push(
                        "drill",
                        format!(
                            "network={} layout=symmetrized device={d} intact_full_copies={icc} floor={floor} ok={ok}",
                            net.id
                        ),
                    );
                }
            }
            LayoutKind::Shielded => {
                let spec =
                    NetworkSpec::new(net.switch_clients.clone()).map_err(|e| e.to_string())?;
                let m = spec.m();
                let st =
                    build_network_state(&spec, Layout::Shielded).map_err(|e| e.to_string())?;
                for slot in 1..=m {
                    let d = format!("d{slot}");
                    let mut src = OutcomeSource::seeded(scenario.seed * 100 + slot as u64);
                    let failed = st.device_fail(&d, &mut src).map_err(|e| e.to_string())?;
                    let rec = failed.recover_shielded(&d, &mut src).map_err(|e| e.to_string())?;
                    let mut sizes: Vec<usize> = rec
                        .instances
                        .iter()
                        .filter(|i| i.status == Status::Intact)
                        .map(|i| i.size())
                        .collect();
                    sizes.sort_unstable();
                    let want: Vec<usize> = (2..m).collect();
                    let ok = sizes == want;
                    rep.ok &= ok;
                    let sizes_s: Vec<String> = sizes.iter().map(usize::to_string).collect();
                    rep.push(
                        "drill",
                        format!(
                            "network={} layout=shielded device={d} recovered_sizes=[{}] ok={ok}",
                            net.id,
                            sizes_s.join(",")
                        ),
                    );
                }
            }
        }
    }
    if rep.records.is_empty() {
        return Err("drill needs at least one client-bearing network".into());
    }
    Ok(rep)
}

// ---------------------------------------------------------------------------

/// Contiguous (snapshot, op range, label) segments of a request's phases;
/// routing steps share one pre-routing snapshot and fold into one segment.
fn segments(out: &RequestOutcome) -> Vec<(GraphState, usize, usize, String)> {
    let mut segs: Vec<(GraphState, usize, usize, String)> = Vec::new();
    for ph in &out.phases {
        if ph.label.starts_with("routing step=") && ph.label != "routing step=1" {
            let last = segs.last_mut().expect("routing steps follow step 1");
            last.2 = ph.op_hi;
            last.3 = "routing".into();
            continue;
        }
        let label = if ph.label == "routing step=1" { "routing".to_string() } else { ph.label.clone() };
        segs.push((ph.snapshot.clone(), ph.op_lo, ph.op_hi, label));
    }
    segs
}

fn e2e(scenario: &Scenario) -> Result<Report, String> {
    let mut rep = Report::new("end-to-end requests");
    let mut sim = provision_dynamic(scenario).map_err(|e| e.to_string())?;
    let mut failures = scenario.failures.clone();
    failures.sort_by_key(|f| (f.time, f.id.clone()));
    for f in &failures {
        sim.fail_device(&f.device).map_err(|e| e.to_string())?;
        rep.push("failure", format!("time={} device={}", f.time, f.device));
    }
    if scenario.requests.is_empty() {
        return Err("e2e needs at least one request".into());
    }
    for req in &scenario.requests {
        for copy in 0..req.copies {
            let out = sim.fulfill_request(req).map_err(|e| e.to_string())?;
            for line in &out.trace {
                rep.push("trace", format!("request={} copy={copy} {line}", req.id));
            }
            for (a, b) in &out.edges {
                rep.push("edge", format!("request={} copy={copy} a={a} b={b}", req.id));
            }
            for (c, q) in &out.client_qubits {
                let vop = sim.backing().byproduct(q).map_err(|e| e.to_string())?;
                rep.push("byproduct", format!("client={c} qubit={q} vop={}", vop.0));
            }
            let regions: Vec<String> =
                out.consumed_region.iter().map(usize::to_string).collect();
            let instances: Vec<String> =
                out.consumed_net.iter().map(usize::to_string).collect();
            rep.push(
                "consumed",
                format!(
                    "request={} copy={copy} regions=[{}] instances=[{}]",
                    req.id,
                    regions.join(","),
                    instances.join(",")
                ),
            );
            let segs = segments(&out);
            let mut oracle = "PASS";
            for (i, (start, lo, hi, label)) in segs.iter().enumerate() {
                let expected = if i + 1 < segs.len() {
                    segs[i + 1].0.clone()
                } else {
                    sim.backing().clone()
                };
                let ops = &sim.backing().op_log[*lo..*hi];
                let verdict = match replay_check(start, ops, &expected, &[]) {
                    Ok(Some(true)) => "PASS",
                    Ok(Some(false)) => {
                        rep.ok = false;
                        oracle = "FAIL";
                        "FAIL"
                    }
                    Ok(None) => {
                        if oracle == "PASS" {
                            oracle = "PARTIAL";
                        }
                        "SKIPPED"
                    }
                    Err(e) => return Err(e.to_string()),
                };
                rep.push("phase", format!("label={} oracle={verdict}", label.replace(' ', "-")));
            }
            rep.push("e2e", format!("oracle={oracle} target={}", req.id));
        }
    }
    let ledger = sim.adaptive_ledger();
    let locc_ok = ledger.inter_device_cz == 0;
    rep.ok &= locc_ok;
    rep.push(
        "ledger",
        format!(
            "fresh={} local={} intra_device_cz={} inter_device_cz={} measurements={} relabels={} ok={locc_ok}",
            ledger.fresh,
            ledger.local,
            ledger.intra_device_cz,
            ledger.inter_device_cz,
            ledger.measurements,
            ledger.relabels
        ),
    );
    for ev in &sim.events {
        rep.push("event", format!("t={} kind={} {}", ev.timestamp, ev.kind.label(), ev.payload));
    }
    Ok(rep)
}

// ---------------------------------------------------------------------------

fn verify(scenario: &Scenario) -> Result<Report, String> {
    let mut rep = Report::new("state verification");
    let failed: BTreeSet<String> =
        scenario.failures.iter().map(|f| f.device.clone()).collect();
    let mut any = false;
    for (idx, net) in scenario.networks.iter().enumerate() {
        if net.switch_clients.is_empty() {
            continue;
        }
        any = true;
        let mut devices = vec![net.router()];
        devices.extend(net.switches());
        let labels: Vec<QubitId> = devices.iter().map(|d| QubitId::new(d.clone(), 0)).collect();
        let state = GraphState::ghz_star(&labels).map_err(|e| e.to_string())?;
        let lost: BTreeSet<QubitId> =
            labels.iter().filter(|q| failed.contains(&q.device)).cloned().collect();
        let mut copies =
            vec![EnsembleCopy { state: state.clone(), lost: lost.clone() }; 5];
        let verdict = verify_state(&mut copies, 4, scenario.seed + idx as u64)
            .map_err(|e| e.to_string())?;
        let expected = if lost.is_empty() { Verdict::Verified } else { Verdict::Failed };
        let ok = verdict == expected;
        rep.ok &= ok;
        let name = |v: Verdict| match v {
            Verdict::Verified => "verified",
            Verdict::Failed => "failed",
            Verdict::Inconclusive => "inconclusive",
        };
        let lost_s: Vec<String> = lost.iter().map(|q| q.device.clone()).collect();
        rep.push(
            "verify",
            format!(
                "network={} lost=[{}] budget=4 verdict={} expected={} ok={ok}",
                net.id,
                lost_s.join(","),
                name(verdict),
                name(expected)
            ),
        );
    }
    if !any {
        return Err("verify needs at least one client-bearing network".into());
    }
    Ok(rep)
}
