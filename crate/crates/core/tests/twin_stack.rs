// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::TcpStream;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use npptwin::bridge::{BridgeClient, Reply};
use npptwin::mirror::{serve_mirror, BackendError, ClockMode, MirrorBackend, MirrorServer, PlantService};
use npptwin::plant::{registry, Plant, VariableDescriptor};
use npptwin::render::{DEFAULT_HEIGHT, DEFAULT_WIDTH};
use npptwin::twin::{TwinConfig, TwinServer};
use npptwin::world::default_map;
use serde_json::Value;

fn plant(mode: ClockMode) -> (Arc<PlantService>, MirrorServer) {
    let svc = PlantService::new(Plant::nominal(50).unwrap(), mode);
    let server = serve_mirror(svc.clone(), "127.0.0.1:0").unwrap();
    (svc, server)
}

fn twin(mode: ClockMode, plant: Option<&MirrorServer>) -> TwinServer {
    let mut cfg = TwinConfig::loopback(Arc::new(default_map()), plant.map(|p| p.local_addr().to_string()));
    cfg.mode = mode;
    TwinServer::start(cfg).unwrap()
}

fn text(c: &mut BridgeClient, cmd: &str) -> String {
    match c.request(cmd).unwrap() {
        Reply::Text(t) => t,
        other => panic!("{cmd}: {other:?}"),
    }
}

fn code(c: &mut BridgeClient, cmd: &str) -> u16 {
    match c.request(cmd).unwrap() {
        Reply::Error { code, .. } => code,
        other => panic!("{cmd}: expected error, got {other:?}"),
    }
}

fn plant_value(c: &mut BridgeClient, var: &str) -> f64 {
    text(c, &format!("vget /plant/{var}")).split(' ').next().unwrap().parse().unwrap()
}

#[test]
fn bridge_basics_and_control_discipline() {
    let t = twin(ClockMode::Lockstep, None);
    let mut a = BridgeClient::connect(t.bridge_addr()).unwrap();
    let mut b = BridgeClient::connect(t.bridge_addr()).unwrap();
    assert_eq!(text(&mut a, "vget /sim/time"), "0");
    assert_eq!(text(&mut a, "vget /target/location"), "40.5 36.5 0.5");
    assert!(text(&mut a, "vget /interactions").contains(" sg1_feed_valve"));
    assert_eq!(text(&mut a, "vget /robot/r1/location"), "30.5 30.5 0");
    assert_eq!(code(&mut a, "vset /robot/r1/move forward"), 403);
    assert_eq!(code(&mut a, "vteleport /x"), 400);
    assert_eq!(code(&mut a, "vget /robot/nobody/location"), 404);
    assert_eq!(text(&mut a, "vset /session/possess r1"), "r1");
    assert_eq!(code(&mut b, "vset /session/possess r1"), 409);
    assert_eq!(text(&mut a, "vset /robot/r1/move forward"), "31.5 30.5 0 0");
    assert_eq!(text(&mut a, "vset /robot/r1/rotate left"), "15");
    assert_eq!(text(&mut a, "vget /robot/r1/rotation"), "15");
    assert_eq!(code(&mut a, "vset /robot/r1/altitude up"), 400);
    assert_eq!(code(&mut a, "vset /sim/advance 0"), 400);
    // lockstep: commands never move the clock
    assert_eq!(text(&mut a, "vget /sim/time"), "0");

    let raw = a.request_raw("vget /topdown lit").unwrap();
    assert!(raw.starts_with(b"ok P6\n320 200\n255\n"));
    match a.request("vget /camera/r1/thermal 64 36").unwrap() {
        Reply::Image { image, .. } => assert_eq!(image.pixels.len(), 3 * 64 * 36),
        other => panic!("{other:?}"),
    }
    assert_eq!(code(&mut a, "vget /plant/core_power_mw"), 503);
    assert_eq!(code(&mut a, "vget /plant/bogus"), 404);
    assert_eq!(code(&mut a, "vset /plant/core_power_mw 1"), 403);
}

#[test]
fn disconnect_releases_possession() {
    let t = twin(ClockMode::Lockstep, None);
    {
        let mut a = BridgeClient::connect(t.bridge_addr()).unwrap();
        text(&mut a, "vset /session/possess atlas");
    }
    let mut b = BridgeClient::connect(t.bridge_addr()).unwrap();
    let deadline = Instant::now() + Duration::from_secs(5);
    loop {
        match b.request("vset /session/possess atlas").unwrap() {
            Reply::Text(id) => {
                assert_eq!(id, "atlas");
                break;
            }
            _ if Instant::now() < deadline => std::thread::sleep(Duration::from_millis(10)),
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn flood_drill_through_the_bridge() {
    let (_svc, p) = plant(ClockMode::Lockstep);
    let t = twin(ClockMode::Lockstep, Some(&p));
    let mut c = BridgeClient::connect(t.bridge_addr()).unwrap();
    assert_eq!(text(&mut c, "vset /plant/sg1_feed_valve 1.0"), "1.0");
    text(&mut c, "vset /sim/advance 1000");
    assert_eq!(plant_value(&mut c, "sg1_feed_valve"), 1.0);
    let l0 = plant_value(&mut c, "sg1_level_m");
    text(&mut c, "vset /sim/advance 10000");
    let l1 = plant_value(&mut c, "sg1_level_m");
    let rate = (l1 - l0) / 10.0;
    assert!((rate - 0.01689).abs() <= 0.0005, "rate {rate}");

    text(&mut c, "vset /plant/sg1_feed_valve 0.4");
    let before = plant_value(&mut c, "sg1_level_m");
    text(&mut c, "vset /sim/advance 50");
    let after = plant_value(&mut c, "sg1_level_m");
    assert!(after < before, "{before} -> {after}");
}

#[test]
fn env_episode_over_the_bridge() {
    let (_svc, p) = plant(ClockMode::Lockstep);
    let t = twin(ClockMode::Lockstep, Some(&p));
    let mut c = BridgeClient::connect(t.bridge_addr()).unwrap();
    assert_eq!(code(&mut c, "vset /env/reset"), 403);
    text(&mut c, "vset /session/possess r1");
    assert_eq!(code(&mut c, "vrun /env/step 0"), 409);
    let first = match c.request("vset /env/reset").unwrap() {
        Reply::Image { head, image } => {
            assert!(head.is_empty());
            assert_eq!((image.width, image.height), (DEFAULT_WIDTH, DEFAULT_HEIGHT));
            image
        }
        other => panic!("{other:?}"),
    };
    let d0 = (10f64).hypot(6.0);
    match c.request("vrun /env/step 0").unwrap() {
        Reply::Image { head, .. } => {
            let f: Vec<&str> = head.split(' ').collect();
            let d1: f64 = f[2].parse().unwrap();
            assert_eq!(d1, (9f64).hypot(6.0));
            let reward: f64 = f[0].parse().unwrap();
            assert_eq!(reward, (d0 - d1) - 0.01);
            assert_eq!(f[1], "0");
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(text(&mut c, "vget /sim/time"), "50");
    assert_eq!(code(&mut c, "vrun /env/step 4"), 400);
    match c.request("vset /env/reset").unwrap() {
        Reply::Image { image, .. } => assert_eq!(image, first),
        other => panic!("{other:?}"),
    }
    assert_eq!(text(&mut c, "vget /robot/r1/location"), "30.5 30.5 0");
}

#[test]
fn rt_twin_polls_the_plant() {
    let (_svc, p) = plant(ClockMode::Rt);
    let t = twin(ClockMode::Rt, Some(&p));
    let mut c = BridgeClient::connect(t.bridge_addr()).unwrap();
    let deadline = Instant::now() + Duration::from_secs(5);
    let power = loop {
        match c.request("vget /plant/core_power_mw").unwrap() {
            Reply::Text(t) => break t,
            _ if Instant::now() < deadline => std::thread::sleep(Duration::from_millis(20)),
            other => panic!("{other:?}"),
        }
    };
    let fields: Vec<&str> = power.split(' ').collect();
    assert_eq!(fields.len(), 2);
    assert!((fields[0].parse::<f64>().unwrap() - 3000.0).abs() < 1.0);
    let t0: u64 = text(&mut c, "vget /sim/time").parse().unwrap();
    std::thread::sleep(Duration::from_millis(300));
    let t1: u64 = text(&mut c, "vget /sim/time").parse().unwrap();
    assert!(t1 > t0);
    assert_eq!(code(&mut c, "vset /sim/advance 100"), 409);
}

fn ws_request(ws: &mut tungstenite::WebSocket<tungstenite::stream::MaybeTlsStream<TcpStream>>, msg: &str) -> Value {
    ws.send(tungstenite::Message::Text(msg.to_string())).unwrap();
    loop {
        let m = ws.read().unwrap();
        let v: Value = serde_json::from_str(m.to_text().unwrap()).unwrap();
        if v.get("event").is_none() {
            return v;
        }
    }
}

#[test]
fn browser_gateway() {
    let t = twin(ClockMode::Rt, None);
    let url = format!("ws://{}/ws", t.http_addr().unwrap());
    let (mut ws, _) = tungstenite::connect(url).unwrap();
    let v = ws_request(&mut ws, r#"{"id":1,"cmd":"vget /target/location"}"#);
    assert_eq!(v, serde_json::json!({"id": 1, "status": "ok", "body": "40.5 36.5 0.5"}));
    let v = ws_request(&mut ws, "not json");
    assert_eq!(v, serde_json::json!({"id": null, "status": "error", "body": "400"}));
    let v = ws_request(&mut ws, r#"{"id":2,"cmd":"vteleport /x"}"#);
    assert_eq!(v["status"], "error");
    assert!(v["body"].as_str().unwrap().starts_with("400 "));
    let v = ws_request(&mut ws, r#"{"id":3,"cmd":"vget /camera/r1/lit 32 18"}"#);
    use base64::Engine;
    let px = base64::engine::general_purpose::STANDARD.decode(v["image"]["b64"].as_str().unwrap()).unwrap();
    assert_eq!(px.len(), 3 * 32 * 18);
    assert_eq!((v["image"]["w"].as_u64(), v["image"]["h"].as_u64()), (Some(32), Some(18)));

    // same snapshot over both transports, give or take a tick
    let mut c = BridgeClient::connect(t.bridge_addr()).unwrap();
    let tcp: u64 = text(&mut c, "vget /sim/time").parse().unwrap();
    let v = ws_request(&mut ws, r#"{"id":4,"cmd":"vget /sim/time"}"#);
    let ws_t: u64 = v["body"].as_str().unwrap().parse().unwrap();
    assert!(ws_t >= tcp && ws_t - tcp <= 2 * t.config().tick_ms, "{tcp} vs {ws_t}");

    let v = ws_request(&mut ws, r#"{"id":5,"cmd":"vset /session/events on"}"#);
    assert_eq!(v["body"], "on");
    let mut last = None;
    let mut seen = 0;
    while seen < 5 {
        let m = ws.read().unwrap();
        let v: Value = serde_json::from_str(m.to_text().unwrap()).unwrap();
        if v["event"] == "tick" {
            let t_ms = v["t_ms"].as_u64().unwrap();
            assert!(last.map_or(true, |l| t_ms > l));
            last = Some(t_ms);
            assert_eq!(v["robots"].as_array().unwrap().len(), 4);
            seen += 1;
        }
    }
}

fn http_get(addr: std::net::SocketAddr, path: &str) -> (String, String) {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(s, "GET {path} HTTP/1.1\r\nHost: x\r\n\r\n").unwrap();
    let mut out = String::new();
    s.read_to_string(&mut out).unwrap();
    let (head, body) = out.split_once("\r\n\r\n").unwrap();
    (head.lines().next().unwrap().to_string(), body.to_string())
}

#[test]
fn trace_csv_download_matches_bridge() {
    let t = twin(ClockMode::Lockstep, None);
    let mut c = BridgeClient::connect(t.bridge_addr()).unwrap();
    text(&mut c, "vset /session/possess r1");
    text(&mut c, "vset /robot/r1/trace on");
    c.request("vset /env/reset").unwrap();
    for a in [0, 0, 2, 0] {
        c.request(&format!("vrun /env/step {a}")).unwrap();
    }
    let csv = text(&mut c, "vget /robot/r1/trace");
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("t_ms,robot_id,x_m,y_m,z_m,yaw_deg\n50,r1,31.500,30.500,0.000,0.000\n"));
    let (status, body) = http_get(t.http_addr().unwrap(), "/trace/r1.csv");
    assert_eq!(status, "HTTP/1.1 200 OK");
    assert_eq!(body, csv);
    let (status, _) = http_get(t.http_addr().unwrap(), "/trace/ghost.csv");
    assert_eq!(status, "HTTP/1.1 404 Not Found");
}

#[test]
fn concurrent_sessions_move_independently() {
    let t = twin(ClockMode::Rt, None);
    let mut c = BridgeClient::connect(t.bridge_addr()).unwrap();
    let ids = text(&mut c, "vset /swarm/spawn 4 turbine_hall");
    let ids: Vec<String> = ids.split(' ').map(str::to_string).collect();
    let addr = t.bridge_addr();
    let handles: Vec<_> = ids
        .iter()
        .cloned()
        .map(|id| {
            std::thread::spawn(move || {
                let mut c = BridgeClient::connect(addr).unwrap();
                text(&mut c, &format!("vset /session/possess {id}"));
                for _ in 0..10 {
                    text(&mut c, &format!("vset /robot/{id}/rotate left"));
                }
                (id.clone(), text(&mut c, &format!("vget /robot/{id}/rotation")))
            })
        })
        .collect();
    for h in handles {
        let (_, yaw) = h.join().unwrap();
        assert_eq!(yaw, "150");
    }
}

/// A scripted plant that exposes two variables and records writes.
struct Scripted {
    values: Mutex<HashMap<String, f64>>,
}

impl MirrorBackend for Scripted {
    fn list(&self) -> Vec<VariableDescriptor> {
        registry().iter().filter(|d| d.name == "cond_cw_out_c" || d.name == "rod_position").cloned().collect()
    }

    fn get(&self, names: &[String]) -> Result<Vec<f64>, BackendError> {
        let v = self.values.lock().unwrap();
        names.iter().map(|n| v.get(n).copied().ok_or_else(|| BackendError::NotFound(n.clone()))).collect()
    }

    fn set(&self, pairs: &[(String, f64)]) -> Result<Vec<f64>, BackendError> {
        let mut v = self.values.lock().unwrap();
        for (n, x) in pairs {
            v.insert(n.clone(), *x);
        }
        Ok(pairs.iter().map(|p| p.1).collect())
    }

    fn sim_time_ms(&self) -> u64 {
        0
    }

    fn set_mode(&self, _: ClockMode) -> u64 {
        0
    }

    fn advance(&self, _: u64) -> Result<u64, BackendError> {
        Ok(0)
    }
}

#[test]
fn twin_runs_against_any_mirror_backend() {
    let fake = Arc::new(Scripted {
        values: Mutex::new([("cond_cw_out_c".to_string(), 31.25), ("rod_position".to_string(), 0.5)].into()),
    });
    let server = serve_mirror(fake.clone(), "127.0.0.1:0").unwrap();
    let t = twin(ClockMode::Lockstep, Some(&server));
    let mut c = BridgeClient::connect(t.bridge_addr()).unwrap();
    assert_eq!(plant_value(&mut c, "cond_cw_out_c"), 31.25);
    assert_eq!(text(&mut c, "vset /plant/rod_position 0.25"), "0.25");
    assert_eq!(code(&mut c, "vset /plant/turbine_throttle 0.25"), 404);
    text(&mut c, "vset /sim/advance 50");
    assert_eq!(plant_value(&mut c, "rod_position"), 0.25);
    assert_eq!(fake.values.lock().unwrap()["rod_position"], 0.25);
}


#[test]
fn throttle_write_reaches_generator_output() {
    let (_svc, p) = plant(ClockMode::Lockstep);
    let t = twin(ClockMode::Lockstep, Some(&p));
    let mut c = BridgeClient::connect(t.bridge_addr()).unwrap();
    assert!((plant_value(&mut c, "gen_power_mwe") - 1000.0).abs() < 5.0);
    text(&mut c, "vset /plant/turbine_throttle 0.5");
    text(&mut c, "vset /sim/advance 50");
    // steam flow follows the throttle at once: k_t * 0.5 * 6.9 MPa * 0.5 MJ/kg
    let g = plant_value(&mut c, "gen_power_mwe");
    assert!((g - 500.0).abs() < 5.0, "gen power {g}");
    // then SG pressure climbs and restores part of the flow
    text(&mut c, "vset /sim/advance 120000");
    let later = plant_value(&mut c, "gen_power_mwe");
    assert!(later > g && later < 1000.0, "gen power {later}");
}
