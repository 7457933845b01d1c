//! Outbound HTTP: the transport used for RESTView fetches and remote
//! commits, with a real client and an in-process router for tests.

use std::collections::HashMap;
use std::sync::Arc;

use parking_lot::Mutex;

use super::service::{Request, Response, Service};

/// An outbound request to an absolute URL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteRequest {
    pub method: String,
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Option<String>,
}

impl RemoteRequest {
    pub fn new(method: &str, url: impl Into<String>) -> RemoteRequest {
        RemoteRequest { method: method.to_string(), url: url.into(), headers: vec![], body: None }
    }

    pub fn header(mut self, name: &str, value: impl Into<String>) -> RemoteRequest {
        self.headers.push((name.to_string(), value.into()));
        self
    }

    pub fn body(mut self, body: impl Into<String>) -> RemoteRequest {
        self.body = Some(body.into());
        self
    }

    pub fn basic_auth(self, user: &str, password: &str) -> RemoteRequest {
        use base64::Engine as _;
        let token = base64::engine::general_purpose::STANDARD.encode(format!("{user}:{password}"));
        self.header("Authorization", format!("Basic {token}"))
    }

    pub fn header_value(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }
}

/// A transport failure: no HTTP response was received.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{url}: {message}")]
pub struct TransportError {
    pub url: String,
    pub message: String,
}

pub trait RemoteClient: Send + Sync {
    fn send(&self, req: &RemoteRequest) -> Result<Response, TransportError>;
}

/// Blocking HTTP/1.1 client.
pub struct HttpClient {
    agent: ureq::Agent,
}

impl Default for HttpClient {
    fn default() -> Self {
        HttpClient { agent: ureq::AgentBuilder::new().timeout(std::time::Duration::from_secs(30)).build() }
    }
}

impl RemoteClient for HttpClient {
    fn send(&self, req: &RemoteRequest) -> Result<Response, TransportError> {
        let mut r = self.agent.request(&req.method, &req.url);
        for (k, v) in &req.headers {
            r = r.set(k, v);
        }
        let result = match &req.body {
            Some(b) => r.set("Content-Type", "application/json").send_string(b),
            None => r.call(),
        };
        let resp = match result {
            Ok(resp) | Err(ureq::Error::Status(_, resp)) => resp,
            Err(e) => return Err(TransportError { url: req.url.clone(), message: e.to_string() }),
        };
        let status = resp.status();
        let headers = resp
            .headers_names()
            .into_iter()
            .filter_map(|n| resp.header(&n).map(|v| (n.clone(), v.to_string())))
            .collect();
        let body = resp
            .into_string()
            .map_err(|e| TransportError { url: req.url.clone(), message: e.to_string() })?;
        Ok(Response { status, headers, body })
    }
}

/// In-process client: requests whose URL starts with a registered origin
/// are answered by that origin's [`Service`] without any socket. Every
/// request is logged; origins can be taken offline.
#[derive(Default, Clone)]
pub struct Router {
    routes: Arc<Mutex<HashMap<String, Route>>>,
    log: Arc<Mutex<Vec<RemoteRequest>>>,
}

#[derive(Clone)]
struct Route {
    service: Arc<Service>,
    online: bool,
}

impl Router {
    pub fn new() -> Router {
        Router::default()
    }

    /// Serve URLs beginning with `origin` (e.g. `http://host:8188`).
    pub fn mount(&self, origin: &str, service: Arc<Service>) {
        self.routes.lock().insert(origin.trim_end_matches('/').to_string(), Route { service, online: true });
    }

    pub fn set_online(&self, origin: &str, online: bool) {
        if let Some(r) = self.routes.lock().get_mut(origin.trim_end_matches('/')) {
            r.online = online;
        }
    }

    /// Requests sent so far, in order.
    pub fn requests(&self) -> Vec<RemoteRequest> {
        self.log.lock().clone()
    }

    /// Requests whose URL starts with `prefix`.
    pub fn requests_to(&self, prefix: &str) -> Vec<RemoteRequest> {
        self.log.lock().iter().filter(|r| r.url.starts_with(prefix)).cloned().collect()
    }

    pub fn clear_log(&self) {
        self.log.lock().clear();
    }
}

impl RemoteClient for Router {
    fn send(&self, req: &RemoteRequest) -> Result<Response, TransportError> {
        self.log.lock().push(req.clone());
        let offline = |m: &str| TransportError { url: req.url.clone(), message: m.to_string() };
        let route = {
            let routes = self.routes.lock();
            routes
                .iter()
                .filter(|(o, _)| req.url.starts_with(o.as_str()))
                .max_by_key(|(o, _)| o.len())
                .map(|(o, r)| (o.clone(), r.clone()))
        };
        let Some((origin, route)) = route else { return Err(offline("connection refused")) };
        if !route.online {
            return Err(offline("connection refused"));
        }
        let target = &req.url[origin.len()..];
        let target = if target.is_empty() { "/" } else { target };
        let r = Request {
            method: req.method.clone(),
            target: target.to_string(),
            headers: req.headers.clone(),
            body: req.body.clone().unwrap_or_default(),
        };
        Ok(route.service.handle(&r))
    }
}
