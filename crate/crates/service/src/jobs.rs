//! In-memory job store.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use salmanip_core::{ManipulationConfig, Mode, RunReport, Termination, TraceEntry};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Converged,
    ThresholdStall,
    IterationCap,
    Failed,
}

impl JobStatus {
    pub fn from_termination(t: Termination) -> Self {
        match t {
            Termination::Converged => JobStatus::Converged,
            Termination::ThresholdStall => JobStatus::ThresholdStall,
            Termination::IterationCap => JobStatus::IterationCap,
        }
    }

    pub fn is_terminal(self) -> bool {
        !matches!(self, JobStatus::Queued | JobStatus::Running)
    }

    pub fn is_success(self) -> bool {
        self.is_terminal() && self != JobStatus::Failed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub iter: usize,
    pub psi: f64,
    pub tau_plus: f64,
    pub tau_minus: f64,
    pub e_sal: f64,
}

impl From<&TraceEntry> for TracePoint {
    fn from(t: &TraceEntry) -> Self {
        Self { iter: t.iteration, psi: t.psi, tau_plus: t.tau_plus, tau_minus: t.tau_minus, e_sal: t.e_sal }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArtifactKind {
    Result,
    SaliencyIn,
    SaliencyOut,
}

impl ArtifactKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "result" => Some(ArtifactKind::Result),
            "saliency_in" => Some(ArtifactKind::SaliencyIn),
            "saliency_out" => Some(ArtifactKind::SaliencyOut),
            _ => None,
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            ArtifactKind::Result => "result.png",
            ArtifactKind::SaliencyIn => "saliency_in.png",
            ArtifactKind::SaliencyOut => "saliency_out.png",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub result: Vec<u8>,
    pub saliency_in: Vec<u8>,
    pub saliency_out: Vec<u8>,
}

impl Artifacts {
    pub fn get(&self, kind: ArtifactKind) -> &[u8] {
        match kind {
            ArtifactKind::Result => &self.result,
            ArtifactKind::SaliencyIn => &self.saliency_in,
            ArtifactKind::SaliencyOut => &self.saliency_out,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Job {
    pub id: String,
    pub status: JobStatus,
    pub mode: Mode,
    pub config: ManipulationConfig,
    pub trace: Vec<TracePoint>,
    pub report: Option<RunReport>,
    pub error: Option<String>,
    pub artifacts: Option<Artifacts>,
}

/// Job summary as returned by the status endpoint.
#[derive(Debug, Serialize)]
pub struct JobView<'a> {
    pub job_id: &'a str,
    pub status: JobStatus,
    pub mode: &'static str,
    pub delta_s: f64,
    pub trace: &'a [TracePoint],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_psi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_psi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<&'a RunReport>,
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Enhance => "enhance",
        Mode::Attenuate => "attenuate",
        Mode::Declutter => "declutter",
    }
}

impl Job {
    pub fn view(&self) -> JobView<'_> {
        JobView {
            job_id: &self.id,
            status: self.status,
            mode: mode_name(self.mode),
            delta_s: self.config.delta_s,
            trace: &self.trace,
            initial_psi: self.report.as_ref().map(|r| r.initial_psi),
            final_psi: self.report.as_ref().map(|r| r.final_psi),
            error: self.error.as_deref(),
            report: self.report.as_ref(),
        }
    }
}

/// Shared, lock-serialized job table with optional on-disk artifact copies.
#[derive(Debug, Clone, Default)]
pub struct JobStore {
    jobs: Arc<Mutex<HashMap<String, Job>>>,
    persist_dir: Option<PathBuf>,
}

impl JobStore {
    pub fn new(persist_dir: Option<PathBuf>) -> Self {
        Self { jobs: Arc::default(), persist_dir }
    }

    pub fn insert(&self, mode: Mode, config: ManipulationConfig) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let job = Job {
            id: id.clone(),
            status: JobStatus::Queued,
            mode,
            config,
            trace: Vec::new(),
            report: None,
            error: None,
            artifacts: None,
        };
        self.jobs.lock().unwrap().insert(id.clone(), job);
        id
    }

    pub fn with<R>(&self, id: &str, f: impl FnOnce(&Job) -> R) -> Option<R> {
        self.jobs.lock().unwrap().get(id).map(f)
    }

    fn update(&self, id: &str, f: impl FnOnce(&mut Job)) {
        if let Some(job) = self.jobs.lock().unwrap().get_mut(id) {
            f(job);
        }
    }

    pub fn set_running(&self, id: &str) {
        self.update(id, |j| j.status = JobStatus::Running);
    }

    pub fn push_trace(&self, id: &str, entry: &TraceEntry) {
        self.update(id, |j| j.trace.push(entry.into()));
    }

    pub fn fail(&self, id: &str, message: String) {
        log::warn!("job {id} failed: {message}");
        self.update(id, |j| {
            j.status = JobStatus::Failed;
            j.error = Some(message);
        });
    }

    pub fn finish(&self, id: &str, report: RunReport, artifacts: Artifacts) {
        if let Some(dir) = &self.persist_dir {
            let dir = dir.join(id);
            let written = std::fs::create_dir_all(&dir).and_then(|_| {
                for kind in [ArtifactKind::Result, ArtifactKind::SaliencyIn, ArtifactKind::SaliencyOut] {
                    std::fs::write(dir.join(kind.file_name()), artifacts.get(kind))?;
                }
                let json = serde_json::to_vec_pretty(&report).map_err(std::io::Error::other)?;
                std::fs::write(dir.join("report.json"), json)
            });
            if let Err(e) = written {
                log::warn!("could not persist job {id}: {e}");
            }
        }
        self.update(id, |j| {
            j.status = JobStatus::from_termination(report.termination);
            j.report = Some(report);
            j.artifacts = Some(artifacts);
        });
    }
}
