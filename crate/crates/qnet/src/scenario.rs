//! Declarative scenario files: networks, regions, requests, and failure
//! events, in a diff-friendly line format.
//!
//! ```text
//! # comment
//! scenario.seed = 7
//! network.blue.clients = 1,2      # per-switch client counts
//! network.blue.layout = plain     # plain | shielded | symmetrized:<n>
//! network.blue.copies = 2
//! region.core.members = blue-r,red-r
//! region.core.copies = 3
//! request.pair.edges = blue-c1~red-c1
//! request.pair.copies = 1
//! failure.f1.time = 3
//! failure.f1.device = red-r
//! hierarchy.m_max = 3
//! ```
//!
//! Device names are derived from the network id: the router is `<id>-r`,
//! switches `<id>-s1..`, clients `<id>-c1..` numbered across switches in
//! order. A network without a `clients` line is a transit network holding
//! only its router.

use std::collections::BTreeSet;
use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LayoutKind {
    Plain,
    Shielded,
    Symmetrized(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkDef {
    pub id: String,
    /// Client count per switch; empty means a transit network (router only).
    pub switch_clients: Vec<u32>,
    pub layout: LayoutKind,
    pub copies: u32,
}

impl NetworkDef {
    pub fn router(&self) -> String {
        format!("{}-r", self.id)
    }
    pub fn switches(&self) -> Vec<String> {
        (1..=self.switch_clients.len()).map(|i| format!("{}-s{i}", self.id)).collect()
    }
    /// (client id, switch device) pairs, numbered across switches.
    pub fn clients(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut n = 0;
        for (i, &k) in self.switch_clients.iter().enumerate() {
            for _ in 0..k {
                n += 1;
                out.push((format!("{}-c{n}", self.id), format!("{}-s{}", self.id, i + 1)));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionDef {
    pub id: String,
    /// Member routers in holding order; the first holds each resource root.
    pub members: Vec<String>,
    pub copies: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RequestDef {
    pub id: String,
    pub edges: Vec<(String, String)>,
    pub copies: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FailureDef {
    pub id: String,
    pub time: u64,
    pub device: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Scenario {
    pub seed: u64,
    pub networks: Vec<NetworkDef>,
    pub regions: Vec<RegionDef>,
    pub requests: Vec<RequestDef>,
    pub failures: Vec<FailureDef>,
    pub m_max: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseIssue {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for ParseIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl Scenario {
    pub fn network(&self, id: &str) -> Option<&NetworkDef> {
        self.networks.iter().find(|n| n.id == id)
    }

    /// All device names the scenario declares, routers first per network.
    pub fn devices(&self) -> Vec<String> {
        let mut out = Vec::new();
        for n in &self.networks {
            out.push(n.router());
            out.extend(n.switches());
            out.extend(n.clients().into_iter().map(|(c, _)| c));
        }
        out
    }

    pub fn client_switch(&self, client: &str) -> Option<(String, String)> {
        for n in &self.networks {
            for (c, s) in n.clients() {
                if c == client {
                    return Some((n.id.clone(), s));
                }
            }
        }
        None
    }
}

fn get_or_insert_network<'a>(s: &'a mut Scenario, id: &str) -> &'a mut NetworkDef {
    if !s.networks.iter().any(|n| n.id == id) {
        s.networks.push(NetworkDef {
            id: id.to_string(),
            switch_clients: Vec::new(),
            layout: LayoutKind::Plain,
            copies: 1,
        });
    }
    s.networks.iter_mut().find(|n| n.id == id).unwrap()
}

fn get_or_insert_region<'a>(s: &'a mut Scenario, id: &str) -> &'a mut RegionDef {
    if !s.regions.iter().any(|r| r.id == id) {
        s.regions.push(RegionDef { id: id.to_string(), members: Vec::new(), copies: 1 });
    }
    s.regions.iter_mut().find(|r| r.id == id).unwrap()
}

fn get_or_insert_request<'a>(s: &'a mut Scenario, id: &str) -> &'a mut RequestDef {
    if !s.requests.iter().any(|r| r.id == id) {
        s.requests.push(RequestDef { id: id.to_string(), edges: Vec::new(), copies: 1 });
    }
    s.requests.iter_mut().find(|r| r.id == id).unwrap()
}

fn get_or_insert_failure<'a>(s: &'a mut Scenario, id: &str) -> &'a mut FailureDef {
    if !s.failures.iter().any(|f| f.id == id) {
        s.failures.push(FailureDef { id: id.to_string(), time: 0, device: String::new() });
    }
    s.failures.iter_mut().find(|f| f.id == id).unwrap()
}

pub fn parse_scenario(text: &str) -> Result<Scenario, Vec<ParseIssue>> {
    let mut s = Scenario::default();
    let mut issues = Vec::new();
    let mut seen_keys: BTreeSet<String> = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            issues.push(ParseIssue { line: lineno, message: format!("expected `key = value`, got `{line}`") });
            continue;
        };
        let key = key.trim();
        let value = value.trim();
        if !seen_keys.insert(key.to_string()) {
            issues.push(ParseIssue { line: lineno, message: format!("duplicate key `{key}`") });
            continue;
        }
        let parts: Vec<&str> = key.split('.').collect();
        let mut err = |msg: String| issues.push(ParseIssue { line: lineno, message: msg });
        match parts.as_slice() {
            ["scenario", "seed"] => match value.parse::<u64>() {
                Ok(v) => s.seed = v,
                Err(_) => err(format!("seed must be an integer, got `{value}`")),
            },
            ["hierarchy", "m_max"] => match value.parse::<usize>() {
                Ok(v) if v >= 2 => s.m_max = Some(v),
                _ => err(format!("m_max must be an integer >= 2, got `{value}`")),
            },
            ["network", id, field] => {
                let net = get_or_insert_network(&mut s, id);
                match *field {
                    "clients" => {
                        let mut counts = Vec::new();
                        let mut ok = true;
                        for tok in value.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                            match tok.parse::<u32>() {
                                Ok(v) => counts.push(v),
                                Err(_) => {
                                    ok = false;
                                    err(format!("client count must be an integer, got `{tok}`"));
                                }
                            }
                        }
                        if ok {
                            net.switch_clients = counts;
                        }
                    }
                    "layout" => match value {
                        "plain" => net.layout = LayoutKind::Plain,
                        "shielded" => net.layout = LayoutKind::Shielded,
                        other => match other.strip_prefix("symmetrized:").map(str::parse::<usize>) {
                            Some(Ok(n)) if n >= 1 => net.layout = LayoutKind::Symmetrized(n),
                            _ => err(format!("unknown layout `{value}`")),
                        },
                    },
                    "copies" => match value.parse::<u32>() {
                        Ok(v) if v >= 1 => net.copies = v,
                        _ => err(format!("copies must be a positive integer, got `{value}`")),
                    },
                    other => err(format!("unknown network field `{other}`")),
                }
            }
            ["region", id, field] => {
                let reg = get_or_insert_region(&mut s, id);
                match *field {
                    "members" => {
                        reg.members = value
                            .split(',')
                            .map(str::trim)
                            .filter(|t| !t.is_empty())
                            .map(str::to_string)
                            .collect();
                        if reg.members.len() < 2 {
                            err(format!("region `{id}` needs at least 2 members"));
                        }
                    }
                    "copies" => match value.parse::<u32>() {
                        Ok(v) if v >= 1 => reg.copies = v,
                        _ => err(format!("copies must be a positive integer, got `{value}`")),
                    },
                    other => err(format!("unknown region field `{other}`")),
                }
            }
            ["request", id, field] => {
                let req = get_or_insert_request(&mut s, id);
                match *field {
                    "edges" => {
                        for tok in value.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                            match tok.split_once('~') {
                                Some((a, b)) if !a.trim().is_empty() && !b.trim().is_empty() => {
                                    req.edges.push((a.trim().to_string(), b.trim().to_string()));
                                }
                                _ => err(format!("edge must look like `a~b`, got `{tok}`")),
                            }
                        }
                    }
                    "copies" => match value.parse::<u32>() {
                        Ok(v) if v >= 1 => req.copies = v,
                        _ => err(format!("copies must be a positive integer, got `{value}`")),
                    },
                    other => err(format!("unknown request field `{other}`")),
                }
            }
            ["failure", id, field] => {
                let f = get_or_insert_failure(&mut s, id);
                match *field {
                    "time" => match value.parse::<u64>() {
                        Ok(v) => f.time = v,
                        Err(_) => err(format!("time must be an integer, got `{value}`")),
                    },
                    "device" => f.device = value.to_string(),
                    other => err(format!("unknown failure field `{other}`")),
                }
            }
            _ => err(format!("unknown key `{key}`")),
        }
    }
    validate(&s, &mut issues);
    if issues.is_empty() {
        Ok(s)
    } else {
        Err(issues)
    }
}

fn validate(s: &Scenario, issues: &mut Vec<ParseIssue>) {
    let routers: BTreeSet<String> = s.networks.iter().map(|n| n.router()).collect();
    let devices: BTreeSet<String> = s.devices().into_iter().collect();
    let clients: BTreeSet<String> =
        s.networks.iter().flat_map(|n| n.clients().into_iter().map(|(c, _)| c)).collect();
    for r in &s.regions {
        for m in &r.members {
            if !routers.contains(m) {
                issues.push(ParseIssue {
                    line: 0,
                    message: format!("region `{}` references unknown router `{m}`", r.id),
                });
            }
        }
    }
    for req in &s.requests {
        for (a, b) in &req.edges {
            for c in [a, b] {
                if !clients.contains(c) {
                    issues.push(ParseIssue {
                        line: 0,
                        message: format!("request `{}` references unknown client `{c}`", req.id),
                    });
                }
            }
            if a == b {
                issues.push(ParseIssue {
                    line: 0,
                    message: format!("request `{}` has a self-edge on `{a}`", req.id),
                });
            }
        }
        if req.edges.is_empty() {
            issues.push(ParseIssue {
                line: 0,
                message: format!("request `{}` has no edges", req.id),
            });
        }
    }
    for f in &s.failures {
        if !devices.contains(&f.device) {
            issues.push(ParseIssue {
                line: 0,
                message: format!("failure `{}` references unknown device `{}`", f.id, f.device),
            });
        }
    }
}

pub fn serialize_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario.seed = {}", s.seed);
    if let Some(m) = s.m_max {
        let _ = writeln!(out, "hierarchy.m_max = {m}");
    }
    for n in &s.networks {
        if !n.switch_clients.is_empty() {
            let counts: Vec<String> = n.switch_clients.iter().map(u32::to_string).collect();
            let _ = writeln!(out, "network.{}.clients = {}", n.id, counts.join(","));
        } else {
            // A transit network still needs one line to exist at all.
            let _ = writeln!(out, "network.{}.copies = {}", n.id, n.copies);
        }
        match &n.layout {
            LayoutKind::Plain => {}
            LayoutKind::Shielded => {
                let _ = writeln!(out, "network.{}.layout = shielded", n.id);
            }
            LayoutKind::Symmetrized(k) => {
                let _ = writeln!(out, "network.{}.layout = symmetrized:{k}", n.id);
            }
        }
        if !n.switch_clients.is_empty() && n.copies != 1 {
            let _ = writeln!(out, "network.{}.copies = {}", n.id, n.copies);
        }
    }
    for r in &s.regions {
        let _ = writeln!(out, "region.{}.members = {}", r.id, r.members.join(","));
        if r.copies != 1 {
            let _ = writeln!(out, "region.{}.copies = {}", r.id, r.copies);
        }
    }
    for req in &s.requests {
        let edges: Vec<String> =
            req.edges.iter().map(|(a, b)| format!("{a}~{b}")).collect();
        let _ = writeln!(out, "request.{}.edges = {}", req.id, edges.join(","));
        if req.copies != 1 {
            let _ = writeln!(out, "request.{}.copies = {}", req.id, req.copies);
        }
    }
    for f in &s.failures {
        let _ = writeln!(out, "failure.{}.time = {}", f.id, f.time);
        let _ = writeln!(out, "failure.{}.device = {}", f.id, f.device);
    }
    out
}
