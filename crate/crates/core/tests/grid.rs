use std::net::SocketAddrV4;

use mmgp_core::codec::{self, EncoderConfig};
use mmgp_core::corpus;
use mmgp_core::grid::{CopyOption, CopyRequest, Dims, Grid, GridConfig, GridError};
use mmgp_core::net::SimTime;
use mmgp_core::overlay::OverlayError;
use mmgp_core::simnet::{Scenario, SimLink};
use mmgp_core::transfer::TransferError;

fn triangle(loss: f64) -> Grid {
    let mut g = Grid::new(GridConfig::default()).unwrap();
    g.add_host("hub", true, &[]).unwrap();
    g.add_host("cam", false, &["hub"]).unwrap();
    g.add_host("viewer", false, &["hub"]).unwrap();
    g.add_link("hub", "cam", SimLink::fixed_ms(2)).unwrap();
    g.add_link("hub", "viewer", SimLink::fixed_ms(2)).unwrap();
    g.add_link("cam", "viewer", SimLink::fixed_ms(5).with_loss(loss).with_seed(7)).unwrap();
    g.start_supers();
    g
}

fn copy(service: &str, option: CopyOption, dims: Option<Dims>) -> CopyRequest {
    CopyRequest {
        requester: "viewer".into(),
        peer: None,
        service: service.into(),
        option,
        dims,
    }
}

#[test]
fn publish_then_query_resolves_the_pipe() {
    let mut g = triangle(0.0);
    let ep = g.serve("cam", "video/stream", vec![1, 2, 3]).unwrap();
    g.publish("cam", "video/stream").unwrap();
    let ad = g.query("viewer", "video/stream").unwrap();
    assert_eq!(ad.endpoints, vec![ep]);
    assert_eq!(ep.port(), 9000);
}

#[test]
fn unknown_service_is_not_found() {
    let mut g = triangle(0.0);
    let err = g.query("viewer", "nothing").unwrap_err();
    assert!(matches!(err, GridError::Overlay(OverlayError::NotFound(_))), "{err}");
}

#[test]
fn raw_copy_is_byte_identical_and_releases_sessions() {
    let mut g = triangle(0.05);
    let data: Vec<u8> = (0..50_000u32).map(|i| (i * 31 % 251) as u8).collect();
    g.serve("cam", "blob", data.clone()).unwrap();
    g.publish("cam", "blob").unwrap();
    let report = g.mmgp_copy(&copy("blob", CopyOption::Udt, None)).unwrap();
    assert_eq!(report.output, data);
    assert_eq!(report.stream_bytes, data.len() as u64);
    assert!(report.wire_data_bytes > report.stream_bytes);
    assert!(report.quality.is_none());
    assert_eq!(g.host("cam").unwrap().transfer.session_count(), 0);
    assert_eq!(g.host("viewer").unwrap().transfer.session_count(), 0);
}

#[test]
fn lossless_compressed_copy_survives_loss() {
    let mut g = triangle(0.1);
    let video = corpus::noise_texture(6, 64, 48, 11);
    let planes = video.to_planes();
    g.serve("cam", "clip", planes.clone()).unwrap();
    g.publish("cam", "clip").unwrap();
    let dims = Dims { width: 64, height: 48 };
    let req = copy("clip", CopyOption::Compress(EncoderConfig::lossless(2, 3)), Some(dims));
    let report = g.mmgp_copy(&req).unwrap();
    assert_eq!(report.output, planes);
    let q = report.quality.unwrap();
    assert_eq!(q.identical_frames, 6);
    assert_eq!(q.average_psnr, Some(f64::INFINITY));
    assert!(report.retransmits > 0);
}

#[test]
fn compressed_copy_of_pgm_returns_pgm() {
    let mut g = triangle(0.0);
    let video = corpus::noise_texture(4, 16, 16, 3);
    let pgm = codec::io::to_pgm_sequence(&video);
    g.serve("cam", "clip", pgm.clone()).unwrap();
    g.publish("cam", "clip").unwrap();
    let req = copy("clip", CopyOption::Compress(EncoderConfig::lossy(2, 2, 4.0).unwrap()), None);
    let report = g.mmgp_copy(&req).unwrap();
    assert!(report.output.starts_with(b"P5"));
    let back = codec::io::from_pgm_sequence(&report.output).unwrap();
    assert_eq!(back.len(), 4);
    let psnr = report.quality.unwrap().average_psnr.unwrap();
    assert!(psnr.is_finite() && psnr > 20.0, "{psnr}");
}

#[test]
fn raw_compress_without_dims_is_rejected() {
    let mut g = triangle(0.0);
    g.serve("cam", "clip", vec![0; 64]).unwrap();
    g.publish("cam", "clip").unwrap();
    let req = copy("clip", CopyOption::Compress(EncoderConfig::lossless(2, 1)), None);
    let err = g.mmgp_copy(&req).unwrap_err();
    assert!(matches!(err, GridError::Codec(_)), "{err}");
    assert_eq!(g.host("viewer").unwrap().transfer.session_count(), 0);
}

#[test]
fn connection_falls_back_to_the_next_endpoint() {
    let mut g = triangle(0.0);
    let ep = g.serve("cam", "clip", vec![9; 10]).unwrap();
    g.publish("cam", "clip").unwrap();
    let mut ad = g.query("viewer", "clip").unwrap();
    let dead = SocketAddrV4::new(*ep.ip(), 9555);
    ad.endpoints.insert(0, dead);
    let conn = g.establish_connection("viewer", &ad).unwrap();
    assert_eq!(conn.endpoint, ep);
    assert_eq!(conn.attempts.len(), 2);
    assert_eq!(conn.attempts[0].0, dead);
}

#[test]
fn all_endpoints_dead_is_connect_failed() {
    let mut g = triangle(0.0);
    let ep = g.serve("cam", "clip", vec![9; 10]).unwrap();
    g.publish("cam", "clip").unwrap();
    let mut ad = g.query("viewer", "clip").unwrap();
    ad.endpoints = vec![SocketAddrV4::new(*ep.ip(), 9555), SocketAddrV4::new(*ep.ip(), 9556)];
    match g.establish_connection("viewer", &ad).unwrap_err() {
        GridError::Overlay(OverlayError::ConnectFailed { attempts }) => assert_eq!(attempts.len(), 2),
        other => panic!("{other}"),
    }
}

#[test]
fn mismatched_keys_fail_authentication() {
    let mut g = triangle(0.0);
    g.serve("cam", "clip", vec![1; 100]).unwrap();
    g.publish("cam", "clip").unwrap();
    g.set_key("viewer", b"other").unwrap();
    let err = g.mmgp_copy(&copy("clip", CopyOption::Udt, None)).unwrap_err();
    assert!(matches!(err, GridError::Transfer(TransferError::AuthFailed(_))), "{err}");
    assert_eq!(g.sim().stats().kind("DATA").injected, 0);
}

#[test]
fn peer_filter_rejects_other_advertisers() {
    let mut g = triangle(0.0);
    g.serve("cam", "clip", vec![1; 10]).unwrap();
    g.publish("cam", "clip").unwrap();
    let mut req = copy("clip", CopyOption::Udt, None);
    req.peer = Some("someone-else".into());
    assert!(matches!(
        g.mmgp_copy(&req).unwrap_err(),
        GridError::Overlay(OverlayError::NotFound(_))
    ));
    req.peer = Some("cam".into());
    assert_eq!(g.mmgp_copy(&req).unwrap().output, vec![1; 10]);
}

#[test]
fn scenario_run_reports_each_action() {
    let text = "\
node hub super
node cam
node viewer
link hub cam latency=2
link hub viewer latency=2
link cam viewer latency=3
at 0 publish cam video/stream
at 100 query viewer video/stream
at 200 withdraw cam video/stream
at 300 query viewer missing
at 400 down hub
at 500 query viewer video/stream
";
    let sc = Scenario::parse(text).unwrap();
    let mut g = Grid::from_scenario(&sc, GridConfig::default()).unwrap();
    let lines = g.run_scenario(&sc, SimTime::from_secs(5)).unwrap();
    assert_eq!(
        lines,
        vec![
            "0.000 publish cam video/stream -> published",
            "100.000 query viewer video/stream -> found 10.0.0.2:9000",
            "200.000 withdraw cam video/stream -> withdrawn",
            "300.000 query viewer missing -> not-found",
            "400.000 down hub -> ok",
            "500.000 query viewer video/stream -> timeout",
        ]
    );
}
