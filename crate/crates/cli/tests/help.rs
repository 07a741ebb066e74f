//! Every flag appears in `--help` with the library's default value.

use std::process::Command;

use mmgp_core::codec::{DEFAULT_GOP_SIZE, DEFAULT_LEVELS};
use mmgp_core::net::SimTime;
use mmgp_core::overlay::OverlayConfig;
use mmgp_core::transfer::TransferConfig;

fn help(path: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_mmgp"))
        .args(path)
        .arg("--help")
        .env_clear()
        .output()
        .unwrap();
    assert!(out.status.success(), "{path:?}");
    String::from_utf8(out.stdout).unwrap()
}

fn ms(t: SimTime) -> String {
    (t.as_micros() / 1000).to_string()
}

fn codec_flags() -> Vec<(&'static str, Option<String>)> {
    vec![
        ("--gop", Some(DEFAULT_GOP_SIZE.to_string())),
        ("--levels", Some(DEFAULT_LEVELS.to_string())),
        ("--qstep", Some("lossless".into())),
    ]
}

fn transfer_flags() -> Vec<(&'static str, Option<String>)> {
    let t = TransferConfig::default();
    vec![
        ("--mss", Some(t.mss.to_string())),
        ("--ack-interval-ms", Some(ms(t.ack_interval))),
        ("--initial-rate", Some(t.initial_rate.to_string())),
        ("--rate-floor", Some(t.rate_floor.to_string())),
        ("--rate-ceiling", Some(t.rate_ceiling.to_string())),
        ("--rate-increase", Some(t.increase_factor.to_string())),
        ("--rate-decrease", Some(t.decrease_factor.to_string())),
        ("--window", Some(t.window.to_string())),
        ("--handshake-timeout-ms", Some(ms(t.handshake_timeout))),
        ("--handshake-retries", Some(t.handshake_retries.to_string())),
        ("--dead-timeout-ms", Some(ms(t.dead_timeout))),
        ("--key", Some("mmgp-grid".into())),
    ]
}

fn overlay_flags() -> Vec<(&'static str, Option<String>)> {
    let o = OverlayConfig::default();
    vec![
        ("--ping-period-ms", Some(ms(o.ping_period))),
        ("--ping-timeout-ms", Some(ms(o.ping_timeout))),
        ("--ping-subset", Some(o.ping_subset.to_string())),
        ("--purge-threshold", Some(o.purge_threshold.to_string())),
        ("--ad-ttl-s", Some((o.ad_ttl.as_micros() / 1_000_000).to_string())),
        ("--max-hops", Some(o.max_hops.to_string())),
        ("--query-timeout-ms", Some(ms(o.query_timeout))),
        ("--publish-timeout-ms", Some(ms(o.publish_timeout))),
        ("--publish-retries", Some(o.publish_retries.to_string())),
    ]
}

fn check(path: &[&str], flags: Vec<(&'static str, Option<String>)>) {
    let text = help(path);
    for (flag, default) in flags {
        let line = text
            .lines()
            .find(|l| l.split_whitespace().any(|w| w == flag || w.trim_end_matches(',') == flag))
            .unwrap_or_else(|| panic!("{path:?} --help lacks {flag}:\n{text}"));
        if let Some(d) = default {
            let full: String = text
                .split(line)
                .nth(1)
                .map(|rest| rest.lines().take_while(|l| !l.trim_start().starts_with('-')).collect())
                .unwrap_or_default();
            let shown = format!("{line}{full}");
            assert!(shown.contains(&format!("[default: {d}]")), "{path:?} {flag} should default to {d}: {shown}");
        }
    }
}

fn plus(mut a: Vec<(&'static str, Option<String>)>, b: Vec<(&'static str, Option<String>)>) -> Vec<(&'static str, Option<String>)> {
    a.extend(b);
    a
}

#[test]
fn dwave_help_lists_codec_defaults() {
    let mut flags = codec_flags();
    flags.extend([("--input", None), ("--output", None), ("--width", None), ("--height", None), ("--report", None)]);
    flags.push(("--report-format", Some("csv".into())));
    check(&["dwave", "encode"], flags);
    check(&["dwave", "decode"], vec![("--input", None), ("--output", None), ("--pgm", None)]);
}

#[test]
fn copy_help_lists_every_ledger_default() {
    let mut flags = plus(plus(codec_flags(), transfer_flags()), overlay_flags());
    flags.extend([
        ("--from", None),
        ("--to", None),
        ("--udt", None),
        ("--compress", None),
        ("--source", None),
        ("--scenario", None),
        ("--peer", None),
        ("--latency-ms", Some("5".into())),
        ("--loss", Some("0".into())),
        ("--seed", Some("1".into())),
        ("--bw", Some("0".into())),
    ]);
    check(&["copy"], flags);
}

#[test]
fn node_help_lists_overlay_defaults() {
    let mut serve = plus(plus(overlay_flags(), transfer_flags()), codec_flags());
    serve.extend([("--name", None), ("--bind", Some("127.0.0.1".into())), ("--super", None), ("--publish", None)]);
    check(&["node", "serve"], serve);
    let mut query = overlay_flags();
    query.extend([("--scenario", None), ("--as", Some("mmgp-query".into())), ("--settle-ms", Some("5000".into()))]);
    check(&["node", "query"], query);
}

#[test]
fn bench_and_sim_help() {
    check(
        &["bench", "compression"],
        vec![
            ("--corpus", None),
            ("--out", None),
            ("--qsteps", Some("1,2,4,8,16".into())),
            ("--gop", Some(DEFAULT_GOP_SIZE.to_string())),
            ("--levels", Some(DEFAULT_LEVELS.to_string())),
        ],
    );
    check(
        &["bench", "transfer"],
        plus(
            vec![
                ("--corpus", None),
                ("--losses", Some("0,0.05,0.1,0.2,0.3".into())),
                ("--seeds", Some("1,2,3".into())),
            ],
            transfer_flags(),
        ),
    );
    check(
        &["sim", "run"],
        plus(
            plus(vec![("--scenario", None), ("--trace", None), ("--settle-ms", Some("5000".into()))], overlay_flags()),
            transfer_flags(),
        ),
    );
}
