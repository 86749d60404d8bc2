//! Transport-independent handler for the gateway's HTTP surface.
//!
//! ```text
//! PUT    /{bucket}/{key}        body = payload
//! GET    /{bucket}/{key}
//! DELETE /{bucket}/{key}
//! GET    /{bucket}?prefix=&max-keys=&continuation=
//! ```
//!
//! The customer key travels in `x-sse-key`. Errors map to 403, 404, 413 or
//! 400 with a JSON body `{"error": <name>, "message": <text>}`.

use percent_encoding::percent_decode_str;
use serde_json::json;

use crate::cloud::{Cloud, CloudError, Ctx};

pub const SSE_KEY_HEADER: &str = "x-sse-key";
pub const ACTOR_HEADER: &str = "x-actor";
pub const DEFAULT_MAX_KEYS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpRequest {
    pub method: String,
    /// Raw path, still percent-encoded.
    pub path: String,
    /// Raw query string without the leading `?`.
    pub query: String,
    pub sse_key: Option<Vec<u8>>,
    pub body: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub content_type: &'static str,
    pub body: Vec<u8>,
}

impl HttpResponse {
    fn json(status: u16, value: serde_json::Value) -> Self {
        Self {
            status,
            content_type: "application/json",
            body: serde_json::to_vec(&value).expect("json value serializes"),
        }
    }

    fn error(status: u16, name: &str, message: &str) -> Self {
        Self::json(status, json!({ "error": name, "message": message }))
    }

    /// Error name from an error response body.
    pub fn error_name(&self) -> Option<String> {
        let v: serde_json::Value = serde_json::from_slice(&self.body).ok()?;
        v.get("error")?.as_str().map(str::to_string)
    }
}

/// HTTP status for a domain error.
pub fn status_for(err: &CloudError) -> u16 {
    match err.name() {
        "TierForbidden" | "KeyRequired" | "KeyMismatch" => 403,
        "NoSuchBucket" | "NoSuchKey" | "ObjectNotFound" => 404,
        "BucketQuotaExceeded" | "PoolQuotaExceeded" => 413,
        _ => 400,
    }
}

fn from_error(err: CloudError) -> HttpResponse {
    HttpResponse::error(status_for(&err), err.name(), &err.to_string())
}

fn decode(s: &str) -> Option<String> {
    percent_decode_str(s).decode_utf8().ok().map(|c| c.into_owned())
}

pub fn handle(cloud: &mut Cloud, ctx: Ctx<'_>, req: &HttpRequest) -> HttpResponse {
    let path = req.path.trim_start_matches('/');
    let (bucket, key) = match path.split_once('/') {
        Some((b, k)) if !k.is_empty() => (b, Some(k)),
        Some((b, _)) => (b, None),
        None => (path, None),
    };
    let (Some(bucket), key) = (decode(bucket), key.map(decode)) else {
        return HttpResponse::error(400, "BadRequest", "undecodable path");
    };
    if bucket.is_empty() {
        return HttpResponse::error(400, "BadRequest", "missing bucket");
    }
    let key = match key {
        Some(Some(k)) => Some(k),
        Some(None) => return HttpResponse::error(400, "BadRequest", "undecodable key"),
        None => None,
    };
    let sse = req.sse_key.as_deref();
    match (req.method.as_str(), key) {
        ("PUT", Some(key)) => match cloud.put_object(ctx, &bucket, &key, &req.body, sse) {
            Ok(meta) => HttpResponse::json(200, serde_json::to_value(meta).unwrap()),
            Err(e) => from_error(e),
        },
        ("GET", Some(key)) => match cloud.get_object(ctx, &bucket, &key, sse) {
            Ok(body) => HttpResponse {
                status: 200,
                content_type: "application/octet-stream",
                body,
            },
            Err(e) => from_error(e),
        },
        ("DELETE", Some(key)) => match cloud.delete_object(ctx, &bucket, &key) {
            Ok(freed) => HttpResponse::json(200, json!({ "freed": freed })),
            Err(e) => from_error(e),
        },
        ("GET", None) => {
            let mut prefix = String::new();
            let mut max_keys = DEFAULT_MAX_KEYS;
            let mut continuation = None;
            for (k, v) in form_urlencoded::parse(req.query.as_bytes()) {
                match k.as_ref() {
                    "prefix" => prefix = v.into_owned(),
                    "max-keys" => match v.parse() {
                        Ok(n) => max_keys = n,
                        Err(_) => return HttpResponse::error(400, "BadRequest", "max-keys"),
                    },
                    "continuation" if !v.is_empty() => continuation = Some(v.into_owned()),
                    _ => {}
                }
            }
            match cloud.list_objects(&bucket, &prefix, max_keys, continuation.as_deref()) {
                Ok(page) => HttpResponse::json(200, serde_json::to_value(page).unwrap()),
                Err(e) => from_error(e),
            }
        }
        _ => HttpResponse::error(405, "MethodNotAllowed", &req.method),
    }
}
