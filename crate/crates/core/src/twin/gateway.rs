// SPDX-License-Identifier: Apache-2.0

//! HTTP port: the browser socket at `/ws`, trace CSV downloads at
//! `/trace/<robot>.csv` and a `/healthz` probe.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use std::net::TcpStream;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use base64::Engine;
use serde_json::{json, Value};
use tungstenite::{Error as WsError, Message};

use super::{Shared, Snapshot, EVENT_PERIOD};
use crate::bridge::{is_robot_id, Reply};

const HEAD_LIMIT: usize = 8192;
const READ_SLICE: Duration = Duration::from_millis(20);

/// Waits until the request line is buffered and returns its path without
/// consuming anything.
fn peek_path(stream: &TcpStream) -> Option<String> {
    let deadline = Instant::now() + Duration::from_secs(2);
    let mut buf = vec![0u8; HEAD_LIMIT];
    stream.set_read_timeout(Some(Duration::from_millis(200))).ok()?;
    loop {
        let n = match stream.peek(&mut buf) {
            Ok(0) => return None,
            Ok(n) => n,
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => 0,
            Err(_) => return None,
        };
        if let Some(end) = buf[..n].windows(2).position(|w| w == b"\r\n") {
            let line = std::str::from_utf8(&buf[..end]).ok()?;
            let mut parts = line.split(' ');
            let (method, path) = (parts.next()?, parts.next()?);
            return (method == "GET").then(|| path.to_string());
        }
        if n == HEAD_LIMIT || Instant::now() > deadline {
            return None;
        }
        thread::sleep(Duration::from_millis(2));
    }
}

fn respond(mut stream: TcpStream, status: &str, content_type: &str, body: &[u8]) {
    // drain the request head so closing does not reset the connection
    let mut head = Vec::new();
    let mut byte = [0u8; 1];
    while !head.ends_with(b"\r\n\r\n") && head.len() < HEAD_LIMIT {
        match stream.read(&mut byte) {
            Ok(1) => head.push(byte[0]),
            _ => break,
        }
    }
    let header = format!(
        "HTTP/1.1 {status}\r\nContent-Type: {content_type}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    );
    let _ = stream.write_all(header.as_bytes()).and_then(|_| stream.write_all(body));
    let _ = stream.flush();
}

pub(super) fn serve_http(shared: Arc<Shared>, stream: TcpStream) {
    let Some(path) = peek_path(&stream) else {
        respond(stream, "400 Bad Request", "text/plain", b"bad request\n");
        return;
    };
    let route = path.split('?').next().unwrap_or_default().to_string();
    if route == "/ws" {
        let _ = stream.set_read_timeout(None);
        ws_session(shared, stream);
    } else if route == "/healthz" {
        respond(stream, "200 OK", "text/plain", b"ok\n");
    } else if let Some(id) = route.strip_prefix("/trace/").and_then(|r| r.strip_suffix(".csv")) {
        let snap = shared.snapshot();
        if is_robot_id(id) && snap.world.robots.contains_key(id) {
            let csv = shared.traces.lock().unwrap().csv(id);
            respond(stream, "200 OK", "text/csv", csv.as_bytes());
        } else {
            respond(stream, "404 Not Found", "text/plain", b"unknown robot\n");
        }
    } else {
        respond(stream, "404 Not Found", "text/plain", b"not found\n");
    }
}

/// JSON for one reply to request `id`.
pub fn reply_json(id: u64, reply: &Reply) -> Value {
    match reply {
        Reply::Text(t) => json!({"id": id, "status": "ok", "body": t}),
        Reply::Image { head, image } => {
            let b64 = base64::engine::general_purpose::STANDARD.encode(&image.pixels);
            let mut v = json!({"id": id, "status": "ok", "image": {"w": image.width, "h": image.height, "b64": b64}});
            if !head.is_empty() {
                v["body"] = Value::String(head.clone());
            }
            v
        }
        Reply::Error { code, message } => json!({"id": id, "status": "error", "body": format!("{code} {message}")}),
    }
}

pub fn malformed_json() -> Value {
    json!({"id": null, "status": "error", "body": "400"})
}

pub fn tick_event(snap: &Snapshot) -> Value {
    let robots: Vec<Value> = snap
        .world
        .robots
        .values()
        .map(|r| {
            json!({"id": r.id, "kind": r.kind.as_str(), "x": r.pose.x_m, "y": r.pose.y_m, "z": r.pose.z_m, "yaw": r.pose.yaw_deg})
        })
        .collect();
    let plant: BTreeMap<&str, f64> = snap.plant.values.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    json!({"event": "tick", "t_ms": snap.t_ms, "robots": robots, "plant": plant})
}

fn handle_message(shared: &Shared, session: u64, events: &mut bool, text: &str) -> Value {
    let Ok(Value::Object(req)) = serde_json::from_str::<Value>(text) else {
        return malformed_json();
    };
    let (Some(id), Some(cmd)) = (req.get("id").and_then(Value::as_u64), req.get("cmd").and_then(Value::as_str)) else {
        return malformed_json();
    };
    reply_json(id, &shared.handle_text(session, cmd, events))
}

fn ws_session(shared: Arc<Shared>, stream: TcpStream) {
    let mut ws = match tungstenite::accept(stream) {
        Ok(ws) => ws,
        Err(e) => {
            log::debug!("gateway handshake failed: {e}");
            return;
        }
    };
    if ws.get_ref().set_read_timeout(Some(READ_SLICE)).is_err() {
        return;
    }
    let session = shared.open_session();
    let mut events = false;
    let mut last_pushed: Option<u64> = None;
    let mut next_push = Instant::now();
    loop {
        let out = match ws.read() {
            Ok(Message::Text(t)) => Some(handle_message(&shared, session, &mut events, &t)),
            Ok(Message::Binary(_)) => Some(malformed_json()),
            Ok(_) => None,
            Err(WsError::Io(e)) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => None,
            Err(_) => break,
        };
        if let Some(v) = out {
            if ws.send(Message::Text(v.to_string())).is_err() {
                break;
            }
        }
        if events && Instant::now() >= next_push {
            next_push = (next_push + EVENT_PERIOD).max(Instant::now());
            let snap = shared.snapshot();
            if last_pushed.map_or(true, |t| snap.t_ms > t) {
                last_pushed = Some(snap.t_ms);
                if ws.send(Message::Text(tick_event(&snap).to_string())).is_err() {
                    break;
                }
            }
        }
    }
    shared.close_session(session);
}
