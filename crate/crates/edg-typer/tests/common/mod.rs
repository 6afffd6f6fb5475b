//! Shared helpers for the integration suites.
#![allow(dead_code)]

use edg_typer::config::RunConfig;
use edg_typer::inference::{
    InferenceError, Oracle, OracleRequest, OracleResponse, OracleTask, RuleOracle, SlotAnnotation,
};
use edg_typer::validation::CheckerConfig;
use std::cell::RefCell;
use std::collections::BTreeMap;
use std::path::PathBuf;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

/// The bundled checker, reached through the compiled CLI binary.
pub fn bundled_checker() -> CheckerConfig {
    CheckerConfig::bundled_at(env!("CARGO_BIN_EXE_edg-typer"))
}

pub fn test_config() -> RunConfig {
    RunConfig {
        checker: bundled_checker(),
        ..Default::default()
    }
}

/// Wraps the rule oracle, overriding chosen slots with poisoned types for
/// their first `limit` inference attempts (`u8::MAX` poisons forever).
pub struct PoisonOracle {
    inner: RuleOracle,
    poison: BTreeMap<String, (String, u8)>,
    seen: RefCell<BTreeMap<String, u8>>,
}

impl PoisonOracle {
    pub fn new(poison: &[(&str, &str, u8)]) -> Self {
        PoisonOracle {
            inner: RuleOracle,
            poison: poison
                .iter()
                .map(|(slot, ty, limit)| (slot.to_string(), (ty.to_string(), *limit)))
                .collect(),
            seen: RefCell::new(BTreeMap::new()),
        }
    }
}

impl Oracle for PoisonOracle {
    fn respond(&self, request: &OracleRequest) -> Result<OracleResponse, InferenceError> {
        let response = self.inner.respond(request)?;
        let OracleResponse::Annotations(mut anns) = response else {
            return Ok(response);
        };
        if request.task == OracleTask::InferTypes {
            let mut seen = self.seen.borrow_mut();
            for (slot, (ty, limit)) in &self.poison {
                let count = seen.entry(slot.clone()).or_insert(0);
                let applies = anns.iter().any(|a| &a.slot == slot);
                if applies && *count < *limit {
                    *count += 1;
                    for a in &mut anns {
                        if &a.slot == slot {
                            a.type_expr = ty.clone();
                        }
                    }
                }
            }
            let _ = &mut anns;
            return Ok(OracleResponse::Annotations(anns));
        }
        Ok(OracleResponse::Annotations(anns))
    }

    fn name(&self) -> &str {
        "poison"
    }
}

/// An oracle that always answers with an unparseable type expression.
pub struct GarbageOracle;

impl Oracle for GarbageOracle {
    fn respond(&self, request: &OracleRequest) -> Result<OracleResponse, InferenceError> {
        match request.task {
            OracleTask::FindMissing => Ok(OracleResponse::Missing(vec![])),
            OracleTask::InferTypes => {
                let rule = RuleOracle.respond(request)?;
                let OracleResponse::Annotations(anns) = rule else {
                    unreachable!()
                };
                Ok(OracleResponse::Annotations(
                    anns.into_iter()
                        .map(|a| SlotAnnotation {
                            slot: a.slot,
                            type_expr: "not a ( valid type".to_string(),
                        })
                        .collect(),
                ))
            }
        }
    }

    fn name(&self) -> &str {
        "garbage"
    }
}

/// Deterministic xorshift for seeded corpora.
pub struct XorShift(pub u64);

impl XorShift {
    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}
