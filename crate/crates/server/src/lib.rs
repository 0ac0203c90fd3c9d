//! HTTP service over the cloud core, optionally driving a live simulated
//! deployment that feeds it.
//!
//! Every response body is newline-delimited JSON (one record per line),
//! except the semantic export, which is one triple per line.

mod api;
mod live;
mod ndjson;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use fieldnet_core::cloudcore::{CloudConfig, CloudCore, SharedCloud};
use fieldnet_core::deployment::Deployment;
use fieldnet_core::error::{CloudError, RunError};
use fieldnet_core::scenario::Scenario;
use thiserror::Error;
use tokio::net::TcpListener;

pub use api::router;
pub use live::SimHandle;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("server: {0}")]
    Io(#[from] std::io::Error),
}

/// What `serve` needs to start.
#[derive(Clone, Debug, Default)]
pub struct ServerConfig {
    /// Store directory; created if missing. In-memory when `None`.
    pub store: Option<PathBuf>,
    pub cloud: CloudConfig,
    /// Live deployment to run against the cloud. Its cloud settings replace
    /// `cloud`.
    pub scenario: Option<Scenario>,
    /// Static console assets served under `/`.
    pub assets: Option<PathBuf>,
}

/// Source of "now" for the API, in scenario seconds.
#[derive(Clone, Debug)]
pub enum Clock {
    /// Wall-clock seconds since the server started, on top of `base_s`.
    Wall { started: Instant, base_s: u64 },
    /// Simulated time published by the live deployment.
    Sim(Arc<AtomicU64>),
}

impl Clock {
    pub fn now(&self) -> u64 {
        match self {
            Clock::Wall { started, base_s } => base_s + started.elapsed().as_secs(),
            Clock::Sim(t) => t.load(Ordering::Acquire),
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub cloud: SharedCloud,
    pub clock: Clock,
    pub sim: Option<SimHandle>,
}

impl AppState {
    /// Opens the store and, when a scenario is given, builds the deployment
    /// without starting it.
    pub fn open(config: &ServerConfig) -> Result<Self, ServeError> {
        if let Some(scenario) = &config.scenario {
            let deployment = Deployment::new(scenario.clone(), config.store.as_deref())?;
            let cloud = deployment.cloud().clone();
            let sim = SimHandle::new(deployment);
            return Ok(Self {
                cloud,
                clock: Clock::Sim(sim.clock()),
                sim: Some(sim),
            });
        }
        let cloud = match &config.store {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                CloudCore::open(dir, config.cloud.clone())?
            }
            None => CloudCore::in_memory(config.cloud.clone()),
        };
        let base_s = latest_timestamp(&cloud);
        Ok(Self {
            cloud: cloud.into_shared(),
            clock: Clock::Wall {
                started: Instant::now(),
                base_s,
            },
            sim: None,
        })
    }
}

/// Resumes the wall clock after the newest time already in the store.
fn latest_timestamp(cloud: &CloudCore) -> u64 {
    let ingested = cloud.packets().chain(cloud.quarantined()).map(|p| p.ingested_t);
    let registered = cloud.nodes().map(|e| e.descriptor.registered_t);
    ingested.chain(registered).max().unwrap_or(0)
}

/// A bound, not yet running server.
pub struct Server {
    listener: TcpListener,
    state: AppState,
    assets: Option<PathBuf>,
}

impl Server {
    pub async fn bind(addr: SocketAddr, config: &ServerConfig) -> Result<Self, ServeError> {
        // Bind first so a busy port fails before the store is touched.
        let listener = TcpListener::bind(addr)
            .await
            .map_err(|source| ServeError::Bind { addr, source })?;
        let state = AppState::open(config)?;
        Ok(Self {
            listener,
            state,
            assets: config.assets.clone(),
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn state(&self) -> &AppState {
        &self.state
    }

    /// Serves until `shutdown` resolves, then stops the simulation and
    /// flushes the store.
    pub async fn run(self, shutdown: impl std::future::Future<Output = ()> + Send + 'static) -> Result<(), ServeError> {
        let state = self.state.clone();
        let runner = state.sim.as_ref().map(|s| s.start());
        let app = router(state.clone(), self.assets.as_deref());
        tracing::info!(addr = %self.listener.local_addr()?, "serving");
        let result = axum::serve(self.listener, app).with_graceful_shutdown(shutdown).await;
        if let Some(sim) = &state.sim {
            sim.stop();
        }
        if let Some(runner) = runner {
            let _ = tokio::task::spawn_blocking(move || runner.join()).await;
        }
        state.cloud.write().flush()?;
        result.map_err(ServeError::Io)
    }
}
