use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use fieldnet_core::deployment::{Deployment, SimStatus};
use fieldnet_core::error::RunError;
use fieldnet_core::faults::FaultKind;
use fieldnet_core::simkernel::SimTime;
use parking_lot::Mutex;

/// Longest stretch of simulated time run under one lock hold, so API calls
/// touching the deployment are not starved at high compression.
const SLICE_S: u64 = 600;
const TICK: Duration = Duration::from_millis(50);

/// A deployment advanced in wall-clock time scaled by the scenario's
/// `time_compression`.
#[derive(Clone)]
pub struct SimHandle {
    deployment: Arc<Mutex<Deployment>>,
    now: Arc<AtomicU64>,
    stop: Arc<AtomicBool>,
    error: Arc<Mutex<Option<String>>>,
}

impl SimHandle {
    pub fn new(deployment: Deployment) -> Self {
        let now = Arc::new(AtomicU64::new(deployment.now().as_secs()));
        Self {
            deployment: Arc::new(Mutex::new(deployment)),
            now,
            stop: Arc::new(AtomicBool::new(false)),
            error: Arc::new(Mutex::new(None)),
        }
    }

    pub fn clock(&self) -> Arc<AtomicU64> {
        self.now.clone()
    }

    pub fn status(&self) -> SimStatus {
        self.deployment.lock().status()
    }

    /// The error that halted the simulation, if any.
    pub fn error(&self) -> Option<String> {
        self.error.lock().clone()
    }

    pub fn inject(&self, at_s: Option<u64>, target: &str, fault: FaultKind) -> Result<u64, RunError> {
        self.deployment.lock().inject(at_s, target, fault)
    }

    /// Runs the simulation up to `t` right away, ignoring the wall clock.
    pub fn advance_to(&self, t: u64) -> Result<(), RunError> {
        let mut d = self.deployment.lock();
        let t = SimTime::from_secs(t).min(d.end_time());
        if t > d.now() {
            d.run_until(t)?;
        }
        self.now.store(d.now().as_secs(), Ordering::Release);
        Ok(())
    }

    pub fn stop(&self) {
        self.stop.store(true, Ordering::Release);
    }

    /// Starts the pacing thread.
    pub fn start(&self) -> JoinHandle<()> {
        let this = self.clone();
        std::thread::Builder::new()
            .name("fieldnet-sim".into())
            .spawn(move || this.pace())
            .expect("spawn simulation thread")
    }

    fn pace(&self) {
        let (compression, start_s, end) = {
            let d = self.deployment.lock();
            (d.scenario().time_compression, d.now().as_secs_f64(), d.end_time())
        };
        let started = Instant::now();
        while !self.stop.load(Ordering::Acquire) {
            let target = start_s + started.elapsed().as_secs_f64() * compression;
            let target = SimTime::from_secs_f64(target).min(end);
            loop {
                let mut d = self.deployment.lock();
                if d.now() >= target {
                    break;
                }
                let step = d.now().plus_secs(SLICE_S).min(target);
                if let Err(e) = d.run_until(step) {
                    tracing::error!(error = %e, "simulation halted");
                    *self.error.lock() = Some(e.to_string());
                    return;
                }
                self.now.store(d.now().as_secs(), Ordering::Release);
                if self.stop.load(Ordering::Acquire) {
                    return;
                }
            }
            if target >= end {
                tracing::info!("simulation reached its end time");
                return;
            }
            std::thread::sleep(TICK);
        }
    }
}
