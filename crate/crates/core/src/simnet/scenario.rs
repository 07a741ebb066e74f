//! Line-oriented scenario scripts.
//!
//! ```text
//! # comment
//! node hub super
//! node cam
//! link hub cam latency=5 loss=0.01 bw=125000 seed=42
//! at 0 publish cam video/stream file=clip.y8
//! at 500 query viewer video/stream
//! ```
//!
//! Latencies are milliseconds, either a single value or a `lo..hi` range.
//! Nodes receive addresses `10.0.x.y` in declaration order.

use std::collections::BTreeMap;
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use super::{Latency, Result, SimError, SimLink};
use crate::net::SimTime;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioNode {
    pub name: String,
    pub super_node: bool,
    pub ip: Ipv4Addr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioLink {
    pub a: String,
    pub b: String,
    pub link: SimLink,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Publish {
        node: String,
        service: String,
        file: Option<PathBuf>,
    },
    Withdraw {
        node: String,
        service: String,
    },
    Query {
        node: String,
        service: String,
    },
    Down(String),
    Up(String),
    Partition(String, String),
    Heal(String, String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledAction {
    pub at: SimTime,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scenario {
    pub nodes: Vec<ScenarioNode>,
    pub links: Vec<ScenarioLink>,
    /// Stable-sorted by time.
    pub actions: Vec<ScheduledAction>,
}

fn node_ip(index: usize) -> Ipv4Addr {
    let n = index as u32 + 1;
    Ipv4Addr::new(10, 0, (n >> 8) as u8, (n & 0xff) as u8)
}

fn parse_ms(s: &str) -> Option<SimTime> {
    let v: f64 = s.parse().ok()?;
    (v.is_finite() && v >= 0.0).then(|| SimTime((v * 1_000.0).round() as u64))
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_in(text, None)
    }

    /// Reads a scenario file; relative `file=` paths resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        Self::parse_in(&text, path.parent())
    }

    fn parse_in(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut sc = Scenario::default();
        let mut names: BTreeMap<String, usize> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| SimError::Scenario {
                line: line_no,
                message,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let words: Vec<&str> = line.split_whitespace().collect();
            let known = |n: &str| -> Result<String> {
                if names.contains_key(n) {
                    Ok(n.to_string())
                } else {
                    Err(err(format!("unknown node {n:?}")))
                }
            };
            match words[0] {
                "node" => {
                    let (name, super_node) = match words[1..] {
                        [name] => (name, false),
                        [name, "super"] => (name, true),
                        _ => return Err(err("expected `node <id> [super]`".into())),
                    };
                    if names.contains_key(name) {
                        return Err(err(format!("duplicate node id {name:?}")));
                    }
                    names.insert(name.to_string(), sc.nodes.len());
                    sc.nodes.push(ScenarioNode {
                        name: name.to_string(),
                        super_node,
                        ip: node_ip(sc.nodes.len()),
                    });
                }
                "link" => {
                    if words.len() < 3 {
                        return Err(err("expected `link <a> <b> [key=value...]`".into()));
                    }
                    let (a, b) = (known(words[1])?, known(words[2])?);
                    if a == b {
                        return Err(err(format!("self-link on {a:?}")));
                    }
                    if sc.links.iter().any(|l| (l.a == a && l.b == b) || (l.a == b && l.b == a)) {
                        return Err(err(format!("duplicate link {a} {b}")));
                    }
                    let mut link = SimLink::default();
                    for kv in &words[3..] {
                        let (k, v) = kv
                            .split_once('=')
                            .ok_or_else(|| err(format!("expected key=value, got {kv:?}")))?;
                        let bad = || err(format!("bad value for {k}: {v:?}"));
                        match k {
                            "latency" => {
                                link.latency = match v.split_once("..") {
                                    Some((lo, hi)) => Latency::Uniform(
                                        parse_ms(lo).ok_or_else(bad)?,
                                        parse_ms(hi).ok_or_else(bad)?,
                                    ),
                                    None => Latency::Fixed(parse_ms(v).ok_or_else(bad)?),
                                }
                            }
                            "loss" => link.loss_probability = v.parse().map_err(|_| bad())?,
                            "bw" => link.bandwidth_cap = v.parse().map_err(|_| bad())?,
                            "seed" => link.seed = v.parse().map_err(|_| bad())?,
                            _ => return Err(err(format!("unknown link attribute {k:?}"))),
                        }
                    }
                    link.validate().map_err(|e| err(e.to_string()))?;
                    sc.links.push(ScenarioLink { a, b, link });
                }
                "at" => {
                    if words.len() < 3 {
                        return Err(err("expected `at <ms> <action> ...`".into()));
                    }
                    let at = parse_ms(words[1]).ok_or_else(|| err(format!("bad time {:?}", words[1])))?;
                    let action = match words[2..] {
                        ["publish", n, s] => Action::Publish {
                            node: known(n)?,
                            service: s.to_string(),
                            file: None,
                        },
                        ["publish", n, s, f] => {
                            let path = f
                                .strip_prefix("file=")
                                .ok_or_else(|| err(format!("expected file=<path>, got {f:?}")))?;
                            let path = match base {
                                Some(dir) if Path::new(path).is_relative() => dir.join(path),
                                _ => PathBuf::from(path),
                            };
                            Action::Publish {
                                node: known(n)?,
                                service: s.to_string(),
                                file: Some(path),
                            }
                        }
                        ["withdraw", n, s] => Action::Withdraw {
                            node: known(n)?,
                            service: s.to_string(),
                        },
                        ["query", n, s] => Action::Query {
                            node: known(n)?,
                            service: s.to_string(),
                        },
                        ["down", n] => Action::Down(known(n)?),
                        ["up", n] => Action::Up(known(n)?),
                        ["partition", a, b] => Action::Partition(known(a)?, known(b)?),
                        ["heal", a, b] => Action::Heal(known(a)?, known(b)?),
                        _ => return Err(err(format!("unknown action {:?}", words[2..].join(" ")))),
                    };
                    sc.actions.push(ScheduledAction { at, action });
                }
                other => return Err(err(format!("unknown directive {other:?}"))),
            }
        }
        sc.actions.sort_by_key(|a| a.at);
        Ok(sc)
    }

    pub fn node(&self, name: &str) -> Option<&ScenarioNode> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn ip_of(&self, name: &str) -> Option<Ipv4Addr> {
        self.node(name).map(|n| n.ip)
    }
}
