//! Message encoding shared by the HTTP bodies and the pet stream.
//!
//! Every message is one JSON object carrying `"v"` (the encoding version,
//! currently 1) and `"type"`, followed by the type's own fields:
//!
//! | type              | sent by | fields                                               |
//! |-------------------|---------|------------------------------------------------------|
//! | `pet_state`       | server  | `pet`, `tick`, `time`, `emotion`, `probabilities`, `stimuli`, `personality`, `traces`, `comfort?` |
//! | `tick`            | server  | `pet`, `tick`, `emotion`, `probabilities`, `stimuli`, `transition?` |
//! | `hello`           | server  | `pet`, `tick`                                        |
//! | `feed_ack`        | server  | `pet`, `prop_id`, `s3`, `s4`, `tick`                 |
//! | `environment_ack` | server  | `pet`, `comfort`, `s1`, `s2`, `tick`                 |
//! | `lagged`          | server  | `pet`, `skipped`                                     |
//! | `error`           | server  | `status`, `message`                                  |
//! | `feed`            | client  | `prop_id`, `user?`, `request_id?`                    |
//! | `environment`     | client  | `readings`, `weights`, `threshold`, `request_id?`    |
//!
//! `tick` in an acknowledgement is the last tick before the input was
//! applied, so its effect shows from tick `tick + 1` on. Client messages may
//! omit `v` and `type` on the HTTP endpoints; a `v` other than 1 is refused.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const WIRE_VERSION: u32 = 1;

/// Wraps a serializable body as `{"v": 1, "type": kind, ...body}`.
pub fn envelope<T: Serialize>(kind: &str, body: &T) -> Value {
    let mut map = Map::new();
    map.insert("v".into(), WIRE_VERSION.into());
    map.insert("type".into(), kind.into());
    match serde_json::to_value(body) {
        Ok(Value::Object(fields)) => map.extend(fields),
        Ok(other) => {
            map.insert("body".into(), other);
        }
        Err(e) => {
            map.insert("type".into(), "error".into());
            map.insert("status".into(), 500.into());
            map.insert("message".into(), e.to_string().into());
        }
    }
    Value::Object(map)
}

/// Checks the `v` field of an incoming message, if present.
pub fn check_version(v: Option<u32>) -> Result<(), String> {
    match v {
        None | Some(WIRE_VERSION) => Ok(()),
        Some(other) => Err(format!(
            "unsupported message version {other}, expected {WIRE_VERSION}"
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedRequest {
    #[serde(default)]
    pub v: Option<u32>,
    pub prop_id: String,
    /// Owner whose inventory pays for the prop. Without it the feed is free.
    #[serde(default)]
    pub user: Option<String>,
    /// Repeating a request id returns the first answer instead of feeding again.
    #[serde(default)]
    pub request_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentRequest {
    #[serde(default)]
    pub v: Option<u32>,
    pub readings: Vec<f64>,
    pub weights: Vec<f64>,
    pub threshold: f64,
    #[serde(default)]
    pub request_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueTaskRequest {
    #[serde(default)]
    pub v: Option<u32>,
    pub id: String,
    pub a: String,
    pub b: String,
    #[serde(default)]
    pub deadline: Option<u64>,
    #[serde(default)]
    pub prop: Option<String>,
}

/// Messages a console may send up the stream.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Feed(FeedRequest),
    Environment(EnvironmentRequest),
}
