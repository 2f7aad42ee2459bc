//! A local stand-in for a chat-completions endpoint.
//!
//! Replies are a pure function of the request, so recording against it is
//! reproducible. Generalists favour option A and soften a little each time
//! the history mentions a misconception; skeptics favour B and forecast that
//! the others will pick A.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::{json, Value};

pub const MOCK_MODEL: &str = "mock-model";

pub struct MockServer {
    pub url: String,
    /// Authorization headers seen, in arrival order.
    pub auth_headers: Arc<Mutex<Vec<String>>>,
}

pub fn spawn_mock() -> MockServer {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock server");
    let url = format!("http://{}", listener.local_addr().unwrap());
    let auth_headers = Arc::new(Mutex::new(Vec::new()));
    let seen = Arc::clone(&auth_headers);
    thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            let seen = Arc::clone(&seen);
            thread::spawn(move || handle(stream, &seen));
        }
    });
    MockServer { url, auth_headers }
}

fn handle(stream: TcpStream, seen: &Mutex<Vec<String>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    let mut length = 0usize;
    loop {
        let mut header = String::new();
        reader.read_line(&mut header).unwrap();
        let header = header.trim_end();
        if header.is_empty() {
            break;
        }
        let (name, value) = header.split_once(':').unwrap_or((header, ""));
        match name.to_ascii_lowercase().as_str() {
            "content-length" => length = value.trim().parse().unwrap(),
            "authorization" => seen.lock().unwrap().push(value.trim().to_string()),
            _ => {}
        }
    }
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body).unwrap();
    let request: Value = serde_json::from_slice(&body).unwrap();
    let reply = json!({
        "id": "mock",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": answer(&request)}, "finish_reason": "stop"}]
    })
    .to_string();
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        reply.len(),
        reply
    )
    .unwrap();
}

fn answer(request: &Value) -> String {
    let system = request["messages"][0]["content"].as_str().unwrap_or("");
    let user = request["messages"][1]["content"].as_str().unwrap_or("");
    let skeptic = system.contains("skeptic");
    let doubts = user.matches("misconception").count() as f64;
    if user.contains("Output JSON") {
        if skeptic {
            return "Reasoning aside, here is my commitment:\n```json\n\
                    {\"self_prob\": {\"A\": 0.15, \"B\": 0.8, \"C\": 0.05}, \
                    \"peer_prediction\": {\"A\": 0.7, \"B\": 0.25, \"C\": 0.05}}\n```"
                .to_string();
        }
        let a = (0.8 - 0.05 * doubts).max(0.3);
        let b = 0.9 - a;
        return format!(
            "{{\"self_prob\": {{\"A\": {a:.2}, \"B\": {b:.2}, \"C\": 0.1}}, \
             \"peer_prediction\": {{\"A\": {a:.2}, \"B\": {b:.2}, \"C\": 0.1}}}}"
        );
    }
    if skeptic {
        "This is a classic misconception. A kilogram is a kilogram whatever it is made of, so B.".into()
    } else if doubts > 0.0 {
        "Steel feels heavier, though the point about equal mass is worth weighing. Still A.".into()
    } else {
        "Everyone knows steel is heavier than feathers. A.".into()
    }
}
