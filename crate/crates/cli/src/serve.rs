//! HTTP front end for the object gateway.
//!
//! Requests are serialized through one mutex around the loaded state, and
//! the state is saved after every request that appended to the audit log.

use std::io::Write;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderMap, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::Router;

use wg_core::gateway::http::{self as gw, HttpRequest};
use wg_core::Ctx;

use crate::exec::{Failure, Session};
use crate::state::Store;

struct Server {
    store: Store,
    session: Session,
    default_actor: String,
}

type Shared = Arc<Mutex<Server>>;

/// Binds, announces the bound address on `out`, then serves until killed.
pub fn serve(store: Store, session: Session, actor: &str, bind: &str, port: u16, out: &mut dyn Write) -> Result<(), Failure> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    let shared: Shared = Arc::new(Mutex::new(Server {
        store,
        session,
        default_actor: actor.to_string(),
    }));
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((bind, port)).await?;
        writeln!(out, "listening on http://{}", listener.local_addr()?)?;
        out.flush()?;
        let app = Router::new().fallback(handle).with_state(shared);
        axum::serve(listener, app).await?;
        Ok(())
    })
}

fn wall_clock() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

async fn handle(
    State(shared): State<Shared>,
    method: Method,
    uri: Uri,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    let req = HttpRequest {
        method: method.as_str().to_string(),
        path: uri.path().to_string(),
        query: uri.query().unwrap_or("").to_string(),
        sse_key: headers.get(gw::SSE_KEY_HEADER).map(|v| v.as_bytes().to_vec()),
        body: body.to_vec(),
    };
    let mut guard = shared.lock().unwrap_or_else(|e| e.into_inner());
    let server = &mut *guard;
    let actor = headers
        .get(gw::ACTOR_HEADER)
        .and_then(|v| v.to_str().ok())
        .unwrap_or(&server.default_actor)
        .to_string();
    let now = wall_clock().max(server.session.now(None));
    let Ok(cloud) = server.session.cloud() else {
        return (StatusCode::SERVICE_UNAVAILABLE, "no state loaded\n").into_response();
    };
    let resp = gw::handle(cloud, Ctx::new(&actor, now), &req);
    let appended = cloud.audit().len();
    if server.session.persisted != Some(appended) {
        let state = server.session.state.as_ref().expect("state present");
        match server.store.save(state, server.session.persisted) {
            Ok(n) => server.session.persisted = Some(n),
            Err(e) => {
                let body = format!("{{\"error\":\"{}\",\"message\":\"state not saved\"}}", e.name());
                return (StatusCode::INTERNAL_SERVER_ERROR, body).into_response();
            }
        }
    }
    let status = StatusCode::from_u16(resp.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, [(header::CONTENT_TYPE, resp.content_type)], resp.body).into_response()
}
