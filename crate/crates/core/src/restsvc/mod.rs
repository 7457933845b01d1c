//! HTTP resource service, RESTView federation and the remote half of
//! commit.

mod client;
pub mod fetch;
pub mod json;
mod server;
mod service;

pub use client::{HttpClient, RemoteClient, RemoteRequest, Router, TransportError};
pub use fetch::{fetch, FetchError, Fetched, RemoteSelect};
pub use server::{RunningServer, Server};
pub use service::{row_etag, rowset_etag, Request, Response, Service, DB_EXTENSION};

use crate::engine::{ConflictReason, ConflictReport, RemoteWrite};
use crate::error::{Error, Result};
use crate::physlog::Uid;

/// Step (c) of commit: send the transaction's single remote write. A 412
/// from the contributor is a transaction conflict; no retry is attempted.
pub fn perform_remote_write(client: &dyn RemoteClient, w: &RemoteWrite) -> Result<()> {
    let resp = client
        .send(&w.request)
        .map_err(|e| Error::ContributorOffline { offline: vec![e.url], available: vec![] })?;
    match resp.status {
        200..=299 => Ok(()),
        412 => Err(Error::Conflict(ConflictReport::conflict(Uid::NONE, ConflictReason::RemotePrecondition, Uid::NONE))),
        s => Err(Error::Remote(format!("{} answered {s}: {}", w.contributor, resp.body.trim()))),
    }
}
