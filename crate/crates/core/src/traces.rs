//! Execution-trace ingestion.
//!
//! The tracing extension serializes high-entropy API call events as a JSON
//! array. Events from invalid sources (browser-internal pages, extensions,
//! local files, DevTools itself) are filtered out, and surviving events are
//! grouped per function identity for heuristic labeling.

use serde::{Deserialize, Serialize};
use url::Url;

use crate::bytelog::FunctionKey;

/// One high-entropy API call observed during execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceEvent {
    /// Dotted API identifier, e.g. `CanvasRenderingContext2D.fillText`.
    pub api: String,
    /// Stringified call arguments; may be empty.
    #[serde(default)]
    pub args: Vec<String>,
    pub script_url: String,
    pub script_id: u64,
    pub function_name: String,
    #[serde(default)]
    pub line: u64,
    #[serde(default)]
    pub column: u64,
    #[serde(default)]
    pub page_url: String,
}

impl TraceEvent {
    pub fn key(&self) -> FunctionKey {
        FunctionKey {
            script_url: self.script_url.clone(),
            script_id: self.script_id,
            function_name: self.function_name.clone(),
        }
    }
}

/// All events attributed to one function identity, in ingestion order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FunctionTrace {
    pub key: FunctionKey,
    pub events: Vec<TraceEvent>,
}

/// A trace object that failed schema validation: its array index and the
/// field that was missing or mistyped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaError {
    pub index: usize,
    pub field: String,
}

#[derive(Debug, Default, Clone)]
pub struct TraceDiagnostics {
    pub schema_errors: Vec<SchemaError>,
}

impl TraceDiagnostics {
    pub fn error_count(&self) -> usize {
        self.schema_errors.len()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace file is not a JSON array: {0}")]
    NotAnArray(String),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

fn get_str(obj: &serde_json::Map<String, serde_json::Value>, field: &str) -> Option<String> {
    obj.get(field).and_then(|v| v.as_str()).map(str::to_string)
}

fn get_u64(obj: &serde_json::Map<String, serde_json::Value>, field: &str) -> Option<u64> {
    obj.get(field).and_then(|v| v.as_u64())
}

/// Parse a trace file into events.
///
/// Required fields are `api`, `scriptUrl`, `scriptId`, and `functionName`;
/// `args`, `line`, `column`, `pageUrl` default to empty/zero. Objects with
/// missing or mistyped required fields are skipped and counted; unknown
/// extra fields are ignored.
pub fn parse_traces(raw_json: &str) -> Result<(Vec<TraceEvent>, TraceDiagnostics), TraceError> {
    let value: serde_json::Value = serde_json::from_str(raw_json)?;
    let arr = value
        .as_array()
        .ok_or_else(|| TraceError::NotAnArray(value_kind(&value)))?;

    let mut events = Vec::with_capacity(arr.len());
    let mut diags = TraceDiagnostics::default();
    'objects: for (index, item) in arr.iter().enumerate() {
        let Some(obj) = item.as_object() else {
            diags.schema_errors.push(SchemaError {
                index,
                field: "<object>".into(),
            });
            continue;
        };
        macro_rules! required {
            ($getter:ident, $field:literal) => {
                match $getter(obj, $field) {
                    Some(v) => v,
                    None => {
                        diags.schema_errors.push(SchemaError {
                            index,
                            field: $field.into(),
                        });
                        continue 'objects;
                    }
                }
            };
        }
        let api = required!(get_str, "api");
        if !api.contains('.') || api.is_empty() {
            diags.schema_errors.push(SchemaError {
                index,
                field: "api".into(),
            });
            continue;
        }
        let script_url = required!(get_str, "scriptUrl");
        let script_id = required!(get_u64, "scriptId");
        let function_name = required!(get_str, "functionName");

        let args = match obj.get("args") {
            None | Some(serde_json::Value::Null) => Vec::new(),
            Some(serde_json::Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                let mut ok = true;
                for it in items {
                    match it.as_str() {
                        Some(s) => out.push(s.to_string()),
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
                if !ok {
                    diags.schema_errors.push(SchemaError {
                        index,
                        field: "args".into(),
                    });
                    continue;
                }
                out
            }
            Some(_) => {
                diags.schema_errors.push(SchemaError {
                    index,
                    field: "args".into(),
                });
                continue;
            }
        };

        events.push(TraceEvent {
            api,
            args,
            script_url,
            script_id,
            function_name,
            line: get_u64(obj, "line").unwrap_or(0),
            column: get_u64(obj, "column").unwrap_or(0),
            page_url: get_str(obj, "pageUrl").unwrap_or_default(),
        });
    }
    Ok((events, diags))
}

fn value_kind(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::Null => "null",
        serde_json::Value::Bool(_) => "bool",
        serde_json::Value::Number(_) => "number",
        serde_json::Value::String(_) => "string",
        serde_json::Value::Array(_) => "array",
        serde_json::Value::Object(_) => "object",
    }
    .to_string()
}

const INVALID_PREFIXES: &[&str] = &["chrome:", "chrome-extension", "file:", "v8/", "devtools:"];

/// True when a script URL is a plausible web source: non-empty, not a
/// browser-internal scheme, and an absolute http(s) URL.
pub fn is_valid_script_url(script_url: &str) -> bool {
    if script_url.is_empty() {
        return false;
    }
    if INVALID_PREFIXES.iter().any(|p| script_url.starts_with(p)) {
        return false;
    }
    match Url::parse(script_url) {
        Ok(u) => matches!(u.scheme(), "http" | "https"),
        Err(_) => false,
    }
}

/// Drop events from invalid sources, preserving order. Idempotent.
pub fn filter_events(events: Vec<TraceEvent>) -> Vec<TraceEvent> {
    events
        .into_iter()
        .filter(|e| is_valid_script_url(&e.script_url))
        .collect()
}

/// Group events per function identity.
///
/// Within-group event order is preserved; groups appear in first-occurrence
/// order, so the result is deterministic for a fixed input.
pub fn group_by_function(events: Vec<TraceEvent>) -> Vec<FunctionTrace> {
    let mut groups: indexmap::IndexMap<FunctionKey, Vec<TraceEvent>> = indexmap::IndexMap::new();
    for event in events {
        groups.entry(event.key()).or_default().push(event);
    }
    groups
        .into_iter()
        .map(|(key, events)| FunctionTrace { key, events })
        .collect()
}

#[cfg(test)]
pub(crate) fn test_event(api: &str, args: &[&str]) -> TraceEvent {
    TraceEvent {
        api: api.to_string(),
        args: args.iter().map(|s| s.to_string()).collect(),
        script_url: "https://example.com/fpjs.js".into(),
        script_id: 3,
        function_name: "gatherFingerprint".into(),
        line: 1,
        column: 1,
        page_url: "https://example.com/".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_array_parses_empty() {
        let (events, diags) = parse_traces("[]").unwrap();
        assert!(events.is_empty());
        assert_eq!(diags.error_count(), 0);
    }

    #[test]
    fn parses_single_event() {
        let json = r#"[{
            "api": "CanvasRenderingContext2D.toDataURL",
            "args": [],
            "scriptUrl": "https://example.com/fpjs.js",
            "scriptId": 3,
            "functionName": "gatherFingerprint",
            "line": 10,
            "column": 4,
            "pageUrl": "https://example.com/",
            "extraField": true
        }]"#;
        let (events, diags) = parse_traces(json).unwrap();
        assert_eq!(diags.error_count(), 0);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].api, "CanvasRenderingContext2D.toDataURL");
        assert_eq!(events[0].script_id, 3);
        assert_eq!(events[0].line, 10);
    }

    #[test]
    fn missing_api_is_skipped_and_counted() {
        let json = r#"[
            {"scriptUrl": "https://a.example/x.js", "scriptId": 1, "functionName": "f"},
            {"api": "AudioBuffer.getChannelData", "scriptUrl": "https://a.example/x.js",
             "scriptId": 1, "functionName": "f"}
        ]"#;
        let (events, diags) = parse_traces(json).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(diags.error_count(), 1);
        assert_eq!(diags.schema_errors[0].index, 0);
        assert_eq!(diags.schema_errors[0].field, "api");
    }

    #[test]
    fn dotless_api_is_a_schema_error() {
        let json = r#"[{"api": "toDataURL", "scriptUrl": "https://a.example/x.js",
                        "scriptId": 1, "functionName": "f"}]"#;
        let (events, diags) = parse_traces(json).unwrap();
        assert!(events.is_empty());
        assert_eq!(diags.error_count(), 1);
    }

    #[test]
    fn optional_fields_default() {
        let json = r#"[{"api": "Navigator.userAgent.get", "scriptUrl": "https://a.example/x.js",
                        "scriptId": 7, "functionName": "f"}]"#;
        let (events, _) = parse_traces(json).unwrap();
        assert_eq!(events[0].args, Vec::<String>::new());
        assert_eq!(events[0].line, 0);
        assert_eq!(events[0].page_url, "");
    }

    #[test]
    fn non_array_input_errors() {
        assert!(matches!(parse_traces("{}"), Err(TraceError::NotAnArray(_))));
        assert!(matches!(parse_traces("not json"), Err(TraceError::Json(_))));
    }

    fn event_at(url: &str) -> TraceEvent {
        let mut e = test_event("Navigator.userAgent.get", &[]);
        e.script_url = url.to_string();
        e
    }

    #[test]
    fn filter_drops_invalid_sources() {
        let kept = [
            "https://example.com/fpjs.js",
            "http://cdn.example.net/a/b.js?v=2",
        ];
        let dropped = [
            "",
            "chrome://settings/x.js",
            "chrome-extension://abc/bg.js",
            "chrome-extensions::abc",
            "file:///tmp/x.js",
            "v8/internal",
            "devtools://devtools/inspector.js",
            "ftp://example.com/x.js",
            "not a url",
        ];
        for url in kept {
            assert_eq!(filter_events(vec![event_at(url)]).len(), 1, "{url}");
        }
        for url in dropped {
            assert_eq!(filter_events(vec![event_at(url)]).len(), 0, "{url}");
        }
    }

    #[test]
    fn filter_is_idempotent_and_order_preserving() {
        let events = vec![
            event_at("https://a.example/1.js"),
            event_at("chrome://x"),
            event_at("https://a.example/2.js"),
        ];
        let once = filter_events(events);
        let urls: Vec<_> = once.iter().map(|e| e.script_url.clone()).collect();
        assert_eq!(urls, ["https://a.example/1.js", "https://a.example/2.js"]);
        assert_eq!(filter_events(once.clone()), once);
    }

    #[test]
    fn grouping_preserves_counts_and_order() {
        let mut a = test_event("CanvasRenderingContext2D.fillText", &["hello"]);
        a.function_name = "f".into();
        let mut b = test_event("HTMLCanvasElement.toDataURL", &[]);
        b.function_name = "f".into();
        let mut c = test_event("AudioNode.connect", &[]);
        c.function_name = "g".into();
        let mut d = test_event("AudioNode.connect", &[]);
        d.function_name = "f".into();
        d.script_id = 99;

        let groups = group_by_function(vec![a.clone(), c.clone(), b.clone(), d.clone()]);
        assert_eq!(groups.len(), 3);
        assert_eq!(groups[0].events, vec![a, b]);
        assert_eq!(groups[1].events, vec![c]);
        // Same url/name with a different script id is a distinct key.
        assert_eq!(groups[2].events, vec![d]);
        let total: usize = groups.iter().map(|g| g.events.len()).sum();
        assert_eq!(total, 4);
    }

    #[test]
    fn grouping_empty_is_empty() {
        assert!(group_by_function(Vec::new()).is_empty());
    }
}
