//! A blocking HTTP/1.1 listener in front of a [`Service`].

use std::sync::Arc;

use super::service::{Request, Service};
use crate::error::{Error, Result};

pub struct Server {
    http: Arc<tiny_http::Server>,
    service: Arc<Service>,
}

impl Server {
    /// Bind `addr` (e.g. `127.0.0.1:8180`; port 0 picks a free port).
    pub fn bind(addr: &str, service: Arc<Service>) -> Result<Server> {
        let http = tiny_http::Server::http(addr).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(Server { http: Arc::new(http), service })
    }

    pub fn port(&self) -> u16 {
        self.http.server_addr().to_ip().map(|a| a.port()).unwrap_or(0)
    }

    /// Serve requests on `threads` worker threads until [`Server::stop`].
    pub fn run(&self, threads: usize) {
        let workers: Vec<_> = (0..threads.max(1))
            .map(|_| {
                let http = self.http.clone();
                let service = self.service.clone();
                std::thread::spawn(move || {
                    for req in http.incoming_requests() {
                        serve_one(&service, req);
                    }
                })
            })
            .collect();
        for w in workers {
            let _ = w.join();
        }
    }

    /// Serve in the background; the returned handle stops the server.
    pub fn spawn(self, threads: usize) -> RunningServer {
        let http = self.http.clone();
        let port = self.port();
        let join = std::thread::spawn(move || self.run(threads));
        RunningServer { http, port, threads: threads.max(1), join: Some(join) }
    }
}

pub struct RunningServer {
    http: Arc<tiny_http::Server>,
    pub port: u16,
    threads: usize,
    join: Option<std::thread::JoinHandle<()>>,
}

impl RunningServer {
    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        // each unblock releases one waiting worker
        for _ in 0..self.threads {
            self.http.unblock();
        }
        if let Some(j) = self.join.take() {
            let _ = j.join();
        }
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn serve_one(service: &Service, mut req: tiny_http::Request) {
    let mut body = String::new();
    if req.as_reader().read_to_string(&mut body).is_err() {
        let _ = req.respond(tiny_http::Response::from_string("body is not UTF-8").with_status_code(400));
        return;
    }
    let r = Request {
        method: req.method().as_str().to_ascii_uppercase(),
        target: req.url().to_string(),
        headers: req.headers().iter().map(|h| (h.field.as_str().to_string(), h.value.as_str().to_string())).collect(),
        body,
    };
    let resp = service.handle(&r);
    let mut out = tiny_http::Response::from_string(resp.body).with_status_code(resp.status);
    for (k, v) in resp.headers {
        if let Ok(h) = tiny_http::Header::from_bytes(k.as_bytes(), v.as_bytes()) {
            out.add_header(h);
        }
    }
    let _ = req.respond(out);
}
