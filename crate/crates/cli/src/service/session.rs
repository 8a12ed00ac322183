//! In-memory sessions and the per-session deformation worker.

use super::messages::{flatten, triples, Frame, Outbound, SessionSummary};
use rigforge::deform::{deform_with_baseline, DeformOptions};
use rigforge::distortion::DistortionBaseline;
use rigforge::formats::{HandleEntry, ReportFile};
use rigforge::mesh::{parse_obj, validate_topology, Mesh};
use rigforge::mls::{ControlHandles, MlsError};
use rigforge::rig::{build_rig, Rig, RigConfig, RigError};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use thiserror::Error;
use tokio::sync::watch;

pub const DEFAULT_MAX_VERTICES: usize = 200_000;
pub const DEFAULT_MAX_BODY_BYTES: usize = 256 << 20;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub max_vertices: usize,
    pub max_body_bytes: usize,
    pub rig: RigConfig,
    pub deform: DeformOptions,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            max_vertices: DEFAULT_MAX_VERTICES,
            max_body_bytes: DEFAULT_MAX_BODY_BYTES,
            rig: RigConfig::default(),
            deform: DeformOptions::default(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("malformed mesh: {0}")]
    Malformed(String),
    #[error("mesh has {count} vertices, the limit is {limit}")]
    TooLarge { count: usize, limit: usize },
    #[error("{0}")]
    Unrigged(RigError),
    #[error("no session {0}")]
    NotFound(String),
    #[error(transparent)]
    Handles(MlsError),
    #[error("deformation failed: {0}")]
    Deform(String),
}

impl SessionError {
    pub fn status(&self) -> u16 {
        match self {
            SessionError::Malformed(_) => 400,
            SessionError::TooLarge { .. } => 413,
            SessionError::Unrigged(_) => 422,
            SessionError::NotFound(_) => 404,
            SessionError::Handles(MlsError::InvalidJoint { .. }) => 422,
            SessionError::Handles(_) => 400,
            SessionError::Deform(_) => 500,
        }
    }

    pub fn slug(&self) -> &'static str {
        match self {
            SessionError::Malformed(_) => "malformed-mesh",
            SessionError::TooLarge { .. } => "too-large",
            SessionError::Unrigged(RigError::OpenMesh { .. }) => "open-mesh",
            SessionError::Unrigged(_) => "rig-failure",
            SessionError::NotFound(_) => "not-found",
            SessionError::Handles(MlsError::InvalidJoint { .. }) => "invalid-joint",
            SessionError::Handles(_) => "invalid-handles",
            SessionError::Deform(_) => "deform-failure",
        }
    }
}

/// Outcome of the latest computed handle set.
#[derive(Debug, Clone, PartialEq)]
pub enum Published {
    Frame(Frame),
    Failed { revision: u64, message: String },
}

impl Published {
    pub fn revision(&self) -> u64 {
        match self {
            Published::Frame(f) => f.revision,
            Published::Failed { revision, .. } => *revision,
        }
    }

    pub fn to_message(&self) -> Outbound {
        match self {
            Published::Frame(f) => Outbound::Frame(f.clone()),
            Published::Failed { message, .. } => Outbound::Error {
                status: 500,
                message: message.clone(),
                client_revision: None,
            },
        }
    }
}

#[derive(Debug, Clone)]
struct Update {
    revision: u64,
    client_revision: Option<u64>,
    handles: ControlHandles,
}

/// A mesh, its rig and the stream of frames computed for it.
#[derive(Debug)]
pub struct Session {
    pub id: String,
    pub mesh: Mesh,
    pub rig: Rig,
    baseline: DistortionBaseline,
    options: DeformOptions,
    revision: Mutex<u64>,
    updates: watch::Sender<Option<Update>>,
    frames: watch::Sender<Option<Arc<Published>>>,
    closed: watch::Sender<bool>,
}

impl Session {
    pub fn summary(&self) -> SessionSummary {
        let s = &self.rig.skeleton;
        SessionSummary {
            id: self.id.clone(),
            revision: self.revision(),
            vertex_count: self.mesh.vertex_count(),
            face_count: self.mesh.face_count(),
            joint_count: s.joint_count(),
            bone_count: s.bones.len(),
            chain_count: self.rig.chain_count,
            joints: triples(&s.joints),
            bones: s.bones.clone(),
            handle_candidates: (0..s.joint_count()).collect(),
        }
    }

    pub fn topology(&self) -> Outbound {
        Outbound::Topology {
            revision: self.revision(),
            faces: self.mesh.faces.clone(),
            vertices: flatten(&self.mesh.vertices),
            joints: triples(&self.rig.skeleton.joints),
            bones: self.rig.skeleton.bones.clone(),
        }
    }

    pub fn revision(&self) -> u64 {
        *self.revision.lock().expect("revision lock")
    }

    /// Validates `entries` and queues them, replacing any update not yet
    /// picked up. Returns the new revision.
    pub fn submit(&self, entries: &[HandleEntry], client_revision: Option<u64>) -> Result<u64, SessionError> {
        let handles = ControlHandles::new(
            entries.iter().map(|h| h.to_handle()).collect(),
            self.rig.skeleton.joint_count(),
        )
        .map_err(SessionError::Handles)?;
        let mut revision = self.revision.lock().expect("revision lock");
        *revision += 1;
        self.updates.send_replace(Some(Update {
            revision: *revision,
            client_revision,
            handles,
        }));
        Ok(*revision)
    }

    pub fn frames(&self) -> watch::Receiver<Option<Arc<Published>>> {
        self.frames.subscribe()
    }

    /// Resolves once the session is closed.
    pub fn until_closed(&self) -> impl std::future::Future<Output = ()> + Send + 'static {
        let mut closed = self.closed.subscribe();
        async move {
            let _ = closed.wait_for(|c| *c).await;
        }
    }

    /// Waits for the first result at or after `revision`. `None` if the
    /// session closes first.
    pub async fn result_for(&self, revision: u64) -> Option<Arc<Published>> {
        let mut frames = self.frames();
        tokio::select! {
            found = frames.wait_for(|p| p.as_ref().is_some_and(|p| p.revision() >= revision)) => {
                found.ok().and_then(|p| p.clone())
            }
            _ = self.until_closed() => None,
        }
    }

    fn compute(&self, update: &Update) -> Published {
        let rig = &self.rig;
        match deform_with_baseline(
            &self.mesh,
            &rig.skeleton,
            &rig.binding,
            &update.handles,
            &self.options,
            &self.baseline,
        ) {
            Ok(result) => Published::Frame(Frame {
                revision: update.revision,
                client_revision: update.client_revision,
                vertices: flatten(&result.mesh.vertices),
                report: ReportFile::new(&result.report, validate_topology(&result.mesh)),
            }),
            Err(e) => Published::Failed {
                revision: update.revision,
                message: e.to_string(),
            },
        }
    }
}

/// Deforms the latest queued handle set until the session closes.
/// Updates that arrive mid-computation overwrite each other, so only the
/// newest is computed next.
async fn run_worker(session: Arc<Session>, mut updates: watch::Receiver<Option<Update>>) {
    let closed = session.until_closed();
    tokio::pin!(closed);
    loop {
        tokio::select! {
            changed = updates.changed() => if changed.is_err() { break },
            _ = &mut closed => break,
        }
        let Some(update) = updates.borrow_and_update().clone() else {
            continue;
        };
        let worker = session.clone();
        match tokio::task::spawn_blocking(move || worker.compute(&update)).await {
            Ok(published) => {
                if let Published::Failed { message, .. } = &published {
                    log::warn!("session {}: {message}", session.id);
                }
                session.frames.send_replace(Some(Arc::new(published)));
            }
            Err(e) => {
                log::error!("session {}: worker panicked: {e}", session.id);
                break;
            }
        }
    }
}

/// Parses, checks and rigs an uploaded OBJ body.
pub fn prepare(body: &[u8], config: &ServiceConfig) -> Result<(Mesh, Rig), SessionError> {
    let text = std::str::from_utf8(body).map_err(|e| SessionError::Malformed(e.to_string()))?;
    let mesh = parse_obj(text).map_err(|e| SessionError::Malformed(e.to_string()))?;
    if mesh.vertex_count() > config.max_vertices {
        return Err(SessionError::TooLarge {
            count: mesh.vertex_count(),
            limit: config.max_vertices,
        });
    }
    let rig = build_rig(&mesh, &config.rig).map_err(SessionError::Unrigged)?;
    Ok((mesh, rig))
}

/// All live sessions. Cheap to clone.
#[derive(Debug, Clone)]
pub struct SessionStore {
    sessions: Arc<Mutex<HashMap<String, Arc<Session>>>>,
    config: Arc<ServiceConfig>,
}

impl Default for SessionStore {
    fn default() -> Self {
        SessionStore::new(ServiceConfig::default())
    }
}

impl SessionStore {
    pub fn new(config: ServiceConfig) -> Self {
        SessionStore {
            sessions: Arc::default(),
            config: Arc::new(config),
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    /// Stores a rigged mesh as a new session and starts its worker. Must
    /// be called inside a Tokio runtime.
    pub fn insert(&self, mesh: Mesh, rig: Rig) -> Result<Arc<Session>, SessionError> {
        let baseline = DistortionBaseline::new(&mesh, &rig.binding, rig.skeleton.bones.len())
            .map_err(|e| SessionError::Deform(e.to_string()))?;
        let (updates, receiver) = watch::channel(None);
        let session = Arc::new(Session {
            id: uuid::Uuid::new_v4().simple().to_string(),
            mesh,
            rig,
            baseline,
            options: self.config.deform,
            revision: Mutex::new(0),
            updates,
            frames: watch::Sender::new(None),
            closed: watch::Sender::new(false),
        });
        self.sessions
            .lock()
            .expect("session map lock")
            .insert(session.id.clone(), session.clone());
        tokio::spawn(run_worker(session.clone(), receiver));
        log::info!("session {} opened", session.id);
        Ok(session)
    }

    pub fn get(&self, id: &str) -> Result<Arc<Session>, SessionError> {
        self.sessions
            .lock()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::NotFound(id.to_string()))
    }

    /// Removes a session and stops its worker and streams.
    pub fn close(&self, id: &str) -> Result<(), SessionError> {
        let session = self
            .sessions
            .lock()
            .expect("session map lock")
            .remove(id)
            .ok_or_else(|| SessionError::NotFound(id.to_string()))?;
        session.closed.send_replace(true);
        log::info!("session {id} closed");
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().expect("session map lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
