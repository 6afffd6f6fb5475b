//! HTTP oracle wire-protocol test against a local one-shot server.

mod common;

use edg_typer::frontend::EntityId;
use edg_typer::inference::{
    HttpOracle, HttpOracleConfig, InferenceContext, InferenceError, Oracle, OracleRequest,
    OracleResponse, OracleTask,
};
use std::io::{Read, Write};
use std::net::TcpListener;

fn request_context() -> InferenceContext {
    InferenceContext {
        cluster_id: "m.f".to_string(),
        member_definitions: vec![(
            EntityId("m.f".to_string()),
            "def f(x):\n    return x\n".to_string(),
        )],
        dependency_summaries: vec![],
        feedback: vec!["prior diagnostic".to_string()],
        token_budget: 10_000,
    }
}

/// Serve exactly one request, assert on its JSON body, reply with `body`.
fn one_shot_server(expected_task: &'static str, body: &'static str) -> (String, std::thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = std::thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        let mut buf = vec![0u8; 65536];
        let mut total = 0;
        let request = loop {
            let n = stream.read(&mut buf[total..]).unwrap();
            total += n;
            let text = String::from_utf8_lossy(&buf[..total]).into_owned();
            if let Some(header_end) = text.find("\r\n\r\n") {
                let content_length = text
                    .lines()
                    .find(|l| l.to_ascii_lowercase().starts_with("content-length:"))
                    .and_then(|l| l.split(':').nth(1))
                    .and_then(|v| v.trim().parse::<usize>().ok())
                    .unwrap_or(0);
                if text.len() >= header_end + 4 + content_length {
                    break text;
                }
            }
        };
        let json_start = request.find("\r\n\r\n").unwrap() + 4;
        let payload: serde_json::Value = serde_json::from_str(&request[json_start..]).unwrap();
        assert_eq!(payload["task"], expected_task);
        assert_eq!(payload["cluster"][0]["id"], "m.f");
        assert_eq!(payload["feedback"][0], "prior diagnostic");
        let response = format!(
            "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
            body.len(),
            body
        );
        stream.write_all(response.as_bytes()).unwrap();
    });
    (format!("http://{addr}/oracle"), handle)
}

#[test]
fn infer_types_round_trip_over_http() {
    let (url, handle) = one_shot_server(
        "InferTypes",
        r#"{"annotations":[{"slot":"m.f#param(x)","type":"int"},{"slot":"m.f#return","type":"int"}]}"#,
    );
    let oracle = HttpOracle::new(HttpOracleConfig {
        url,
        model: Some("test-model".to_string()),
        token: Some("secret".to_string()),
    });
    let response = oracle
        .respond(&OracleRequest {
            task: OracleTask::InferTypes,
            context: request_context(),
        })
        .unwrap();
    handle.join().unwrap();
    match response {
        OracleResponse::Annotations(anns) => {
            assert_eq!(anns.len(), 2);
            assert_eq!(anns[0].slot, "m.f#param(x)");
        }
        _ => panic!("expected annotations"),
    }
}

#[test]
fn find_missing_round_trip_over_http() {
    let (url, handle) = one_shot_server(
        "FindMissing",
        r#"{"missing":[{"from":"m.f","ref":"Widget.parts","reason":"attribute access"}]}"#,
    );
    let oracle = HttpOracle::new(HttpOracleConfig {
        url,
        model: None,
        token: None,
    });
    let response = oracle
        .respond(&OracleRequest {
            task: OracleTask::FindMissing,
            context: request_context(),
        })
        .unwrap();
    handle.join().unwrap();
    match response {
        OracleResponse::Missing(m) => {
            assert_eq!(m[0].from_entity, "m.f");
            assert_eq!(m[0].target_ref, "Widget.parts");
        }
        _ => panic!("expected missing refs"),
    }
}

#[test]
fn unreachable_endpoint_is_oracle_unavailable() {
    let oracle = HttpOracle::new(HttpOracleConfig {
        url: "http://127.0.0.1:9/oracle".to_string(),
        model: None,
        token: None,
    });
    let err = oracle
        .respond(&OracleRequest {
            task: OracleTask::InferTypes,
            context: request_context(),
        })
        .unwrap_err();
    assert!(matches!(err, InferenceError::OracleUnavailable(_)));
}
