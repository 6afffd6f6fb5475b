use super::context::InferenceContext;
use super::InferenceError;
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleTask {
    FindMissing,
    InferTypes,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleRequest {
    pub task: OracleTask,
    pub context: InferenceContext,
}

/// A dependency the oracle believes is missing from the context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingRef {
    pub from_entity: String,
    /// Qualified name, resolved against the entity index by the probe.
    pub target_ref: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotAnnotation {
    pub slot: String,
    pub type_expr: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum OracleResponse {
    Missing(Vec<MissingRef>),
    Annotations(Vec<SlotAnnotation>),
}

/// The inference engine. Implementations must be deterministic functions
/// of the request for reproducible runs; the HTTP client's determinism is
/// whatever the remote model provides.
pub trait Oracle {
    fn respond(&self, request: &OracleRequest) -> Result<OracleResponse, InferenceError>;
    fn name(&self) -> &str;
}

/// Remote oracle speaking the JSON-over-POST protocol.
///
/// Request: `{"task": "FindMissing"|"InferTypes", "cluster": [{"id","code"}],
/// "deps": [{"slot","type"}], "feedback": ["..."]}`.
/// Response: `{"missing": [{"from","ref"}]}` or
/// `{"annotations": [{"slot","type"}]}`.
#[derive(Debug, Clone)]
pub struct HttpOracle {
    pub config: HttpOracleConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct HttpOracleConfig {
    pub url: String,
    pub model: Option<String>,
    pub token: Option<String>,
}

impl HttpOracle {
    pub fn new(config: HttpOracleConfig) -> Self {
        HttpOracle { config }
    }

    fn request_body(&self, request: &OracleRequest) -> serde_json::Value {
        let cluster: Vec<_> = request
            .context
            .member_definitions
            .iter()
            .map(|(id, code)| json!({"id": id.as_str(), "code": code}))
            .collect();
        let deps: Vec<_> = request
            .context
            .dependency_summaries
            .iter()
            .map(|s| json!({"slot": s.slot.text(), "type": s.annotation}))
            .collect();
        let mut body = json!({
            "task": match request.task {
                OracleTask::FindMissing => "FindMissing",
                OracleTask::InferTypes => "InferTypes",
            },
            "cluster": cluster,
            "deps": deps,
            "feedback": request.context.feedback,
        });
        if let Some(model) = &self.config.model {
            body["model"] = json!(model);
        }
        body
    }

    fn parse_response(
        &self,
        task: OracleTask,
        body: &str,
    ) -> Result<OracleResponse, InferenceError> {
        let v: serde_json::Value = serde_json::from_str(body)
            .map_err(|e| InferenceError::MalformedResponse(e.to_string()))?;
        match task {
            OracleTask::FindMissing => {
                let missing = v
                    .get("missing")
                    .and_then(|m| m.as_array())
                    .ok_or_else(|| {
                        InferenceError::MalformedResponse("missing `missing` array".to_string())
                    })?;
                let refs = missing
                    .iter()
                    .map(|m| {
                        Some(MissingRef {
                            from_entity: m.get("from")?.as_str()?.to_string(),
                            target_ref: m.get("ref")?.as_str()?.to_string(),
                            reason: m
                                .get("reason")
                                .and_then(|r| r.as_str())
                                .unwrap_or("")
                                .to_string(),
                        })
                    })
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| {
                        InferenceError::MalformedResponse("bad missing entry".to_string())
                    })?;
                Ok(OracleResponse::Missing(refs))
            }
            OracleTask::InferTypes => {
                let annotations = v
                    .get("annotations")
                    .and_then(|a| a.as_array())
                    .ok_or_else(|| {
                        InferenceError::MalformedResponse("missing `annotations` array".to_string())
                    })?;
                let anns = annotations
                    .iter()
                    .map(|a| {
                        Some(SlotAnnotation {
                            slot: a.get("slot")?.as_str()?.to_string(),
                            type_expr: a.get("type")?.as_str()?.to_string(),
                        })
                    })
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| {
                        InferenceError::MalformedResponse("bad annotation entry".to_string())
                    })?;
                Ok(OracleResponse::Annotations(anns))
            }
        }
    }
}

impl Oracle for HttpOracle {
    fn respond(&self, request: &OracleRequest) -> Result<OracleResponse, InferenceError> {
        let body = self.request_body(request).to_string();
        let mut req = ureq::post(&self.config.url).header("content-type", "application/json");
        if let Some(token) = &self.config.token {
            req = req.header("authorization", &format!("Bearer {token}"));
        }
        let mut response = req
            .send(&body)
            .map_err(|e| InferenceError::OracleUnavailable(e.to_string()))?;
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| InferenceError::OracleUnavailable(e.to_string()))?;
        self.parse_response(request.task, &text)
    }

    fn name(&self) -> &str {
        "http"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::EntityId;

    fn dummy_context() -> InferenceContext {
        InferenceContext {
            cluster_id: "m.f".to_string(),
            member_definitions: vec![(EntityId("m.f".into()), "def f():\n    return 1".into())],
            dependency_summaries: vec![],
            feedback: vec![],
            token_budget: 1000,
        }
    }

    #[test]
    fn wire_format_matches_protocol() {
        let oracle = HttpOracle::new(HttpOracleConfig {
            url: "http://localhost/infer".into(),
            model: None,
            token: None,
        });
        let req = OracleRequest {
            task: OracleTask::InferTypes,
            context: dummy_context(),
        };
        let body = oracle.request_body(&req);
        assert_eq!(body["task"], "InferTypes");
        assert_eq!(body["cluster"][0]["id"], "m.f");
        assert!(body["deps"].as_array().unwrap().is_empty());
    }

    #[test]
    fn responses_parse() {
        let oracle = HttpOracle::new(HttpOracleConfig::default());
        let r = oracle
            .parse_response(OracleTask::InferTypes, r#"{"annotations":[{"slot":"m.f#return","type":"int"}]}"#)
            .unwrap();
        match r {
            OracleResponse::Annotations(a) => {
                assert_eq!(a[0].slot, "m.f#return");
                assert_eq!(a[0].type_expr, "int");
            }
            _ => panic!("wrong variant"),
        }
        let r = oracle
            .parse_response(OracleTask::FindMissing, r#"{"missing":[{"from":"m.f","ref":"C.attr"}]}"#)
            .unwrap();
        match r {
            OracleResponse::Missing(m) => assert_eq!(m[0].target_ref, "C.attr"),
            _ => panic!("wrong variant"),
        }
    }

    #[test]
    fn malformed_response_is_an_error() {
        let oracle = HttpOracle::new(HttpOracleConfig::default());
        assert!(matches!(
            oracle.parse_response(OracleTask::InferTypes, "not json"),
            Err(InferenceError::MalformedResponse(_))
        ));
        assert!(matches!(
            oracle.parse_response(OracleTask::InferTypes, r#"{"wrong": []}"#),
            Err(InferenceError::MalformedResponse(_))
        ));
    }
}
