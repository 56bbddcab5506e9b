//! HTTP protocol for perception tools served out of process.

mod client;
mod fixture;
mod protocol;

pub use client::{into_tool_output, RemoteClient, RemoteError, MAX_RESPONSE_BYTES};
pub use fixture::{fixture_router, sha256_hex, spawn_router, FixtureError, FixtureService, SceneLabel, FIXTURE_TOOLS};
pub use protocol::{
    ErrorBody, ErrorCode, ErrorResponse, InvokeRequest, InvokeResponse, WireFile, WireOutputFile, PALETTE_SUFFIX,
};
