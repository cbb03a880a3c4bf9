use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex};

use tokio::sync::Semaphore;

use kpa_core::pipeline::{run_analysis, AnalysisResult, Scorers, UnitResult};
use kpa_core::scoring::CachedScorer;
use kpa_core::selection::{assign_final, Item, KeyPoint, KeyPointResult};
use kpa_core::{Dataset, MatchScorer};

use crate::error::ApiError;
use crate::store::{JobStatus, JobStore, Revision, StoreError};

/// Per-job state kept in memory: the mutual exclusion lock for analysis,
/// revision and re-match, and the job's scorers with their score cache.
#[derive(Default)]
pub struct JobRuntime {
    pub lock: tokio::sync::Mutex<()>,
    scorers: Mutex<Option<Scorers>>,
}

pub struct AppState {
    pub store: JobStore,
    workers: Arc<Semaphore>,
    runtimes: Mutex<HashMap<String, Arc<JobRuntime>>>,
}

impl AppState {
    /// Opens the store. Jobs interrupted while running are marked failed;
    /// call [`AppState::resume`] from inside a runtime to re-queue pending
    /// jobs.
    pub fn open(store: JobStore, workers: usize) -> Result<Arc<Self>, StoreError> {
        for record in store.list()? {
            if record.status == JobStatus::Running {
                store.set_status(&record.id, JobStatus::Failed, Some("interrupted by restart".into()))?;
            }
        }
        Ok(Arc::new(AppState {
            store,
            workers: Arc::new(Semaphore::new(workers.max(1))),
            runtimes: Mutex::new(HashMap::new()),
        }))
    }

    pub fn resume(self: &Arc<Self>) -> Result<usize, StoreError> {
        let pending: Vec<String> = self
            .store
            .list()?
            .into_iter()
            .filter(|r| r.status == JobStatus::Pending)
            .map(|r| r.id)
            .collect();
        for id in &pending {
            self.schedule(id.clone());
        }
        Ok(pending.len())
    }

    pub fn runtime(&self, id: &str) -> Arc<JobRuntime> {
        self.runtimes
            .lock()
            .expect("runtime map poisoned")
            .entry(id.to_string())
            .or_default()
            .clone()
    }

    fn scorers(&self, id: &str) -> Result<Scorers, ApiError> {
        let runtime = self.runtime(id);
        let mut slot = runtime.scorers.lock().expect("scorer slot poisoned");
        if let Some(s) = slot.as_ref() {
            return Ok(s.clone());
        }
        let config = self.store.config(id)?;
        let built = config.scorer.build().map_err(ApiError::from_core)?;
        let matcher: Arc<dyn MatchScorer> = Arc::new(CachedScorer::new(built.matcher));
        let scorers = Scorers::new(matcher, built.quality);
        *slot = Some(scorers.clone());
        Ok(scorers)
    }

    /// Queues the automatic analysis of a pending job on the worker pool.
    pub fn schedule(self: &Arc<Self>, id: String) {
        let state = self.clone();
        tokio::spawn(async move {
            let _permit = state.workers.clone().acquire_owned().await.expect("worker pool closed");
            let runtime = state.runtime(&id);
            let _guard = runtime.lock.lock().await;
            let worker = state.clone();
            let job = id.clone();
            let outcome = tokio::task::spawn_blocking(move || worker.run_job(&job)).await;
            if let Err(e) = outcome {
                let _ = state
                    .store
                    .set_status(&id, JobStatus::Failed, Some(format!("worker panicked: {e}")));
            }
        });
    }

    fn run_job(&self, id: &str) {
        if self.store.set_status(id, JobStatus::Running, None).is_err() {
            return;
        }
        let outcome = (|| -> Result<(), ApiError> {
            let dataset = self.store.dataset(id)?;
            let config = self.store.config(id)?;
            let scorers = self.scorers(id)?;
            let result = run_analysis(&dataset, &config, scorers.matcher.as_ref(), scorers.quality.as_ref())
                .map_err(ApiError::from_core)?;
            self.store.write_version(id, &result)?;
            Ok(())
        })();
        let _ = match outcome {
            Ok(()) => self.store.set_status(id, JobStatus::Done, None),
            Err(e) => self.store.set_status(id, JobStatus::Failed, Some(e.message)),
        };
    }

    /// Applies the pending revisions to the latest version, re-matches every
    /// analysed comment and persists the result as a new version. Must be
    /// called with the job lock held.
    pub fn rematch_blocking(&self, id: &str) -> Result<usize, ApiError> {
        let record = self.store.get(id)?;
        let revisions = self.store.pending(id)?;
        if revisions.is_empty() {
            return Err(ApiError::conflict("no_pending_revisions", "no pending revisions to re-match"));
        }
        let latest = self
            .store
            .version(id, record.versions - 1)?
            .ok_or_else(|| ApiError::internal("latest version missing"))?;
        let dataset = self.store.dataset(id)?;
        let scorers = self.scorers(id)?;
        let revised = revise(&latest, &dataset, &revisions, scorers.matcher.as_ref())?;
        let version = self.store.write_version(id, &revised)?;
        self.store.set_pending(id, &[])?;
        Ok(version)
    }
}

/// Key point ids of the latest version with the pending revisions applied.
pub fn draft_key_points(latest: &AnalysisResult, revisions: &[Revision]) -> HashSet<String> {
    let mut ids: HashSet<String> = latest
        .units
        .iter()
        .flat_map(|u| u.key_points.iter().map(|k| k.key_point.id.clone()))
        .collect();
    for r in revisions {
        match r {
            Revision::Rename { .. } => {}
            Revision::Delete { key_point_id } => {
                ids.remove(key_point_id);
            }
            Revision::Add { key_point_id, .. } => {
                ids.insert(key_point_id.clone());
            }
        }
    }
    ids
}

fn unit_comments(unit: &UnitResult, dataset: &Dataset, per_stance: bool) -> Vec<Item> {
    let filtered: HashSet<&str> = unit.filtered_out.iter().map(String::as_str).collect();
    dataset
        .comments
        .iter()
        .filter(|c| c.topic_id == unit.topic)
        .filter(|c| !per_stance || c.stance == unit.stance)
        .filter(|c| !filtered.contains(c.id.as_str()))
        .map(Item::from)
        .collect()
}

fn revise(
    latest: &AnalysisResult,
    dataset: &Dataset,
    revisions: &[Revision],
    matcher: &dyn MatchScorer,
) -> Result<AnalysisResult, ApiError> {
    let per_stance = latest.config.per_stance;
    let mut result = latest.clone();
    for r in revisions {
        match r {
            Revision::Rename { key_point_id, text } => {
                if let Some(kp) = result
                    .units
                    .iter_mut()
                    .flat_map(|u| u.key_points.iter_mut())
                    .find(|k| &k.key_point.id == key_point_id)
                {
                    kp.key_point.text = text.clone();
                }
            }
            Revision::Delete { key_point_id } => {
                for unit in &mut result.units {
                    unit.key_points.retain(|k| &k.key_point.id != key_point_id);
                }
            }
            Revision::Add {
                key_point_id,
                text,
                topic,
                stance,
            } => {
                let stance = if per_stance { *stance } else { None };
                let unit = result
                    .units
                    .iter_mut()
                    .find(|u| &u.topic == topic && u.stance == stance)
                    .ok_or_else(|| ApiError::bad_request(format!("no analysis unit for topic {topic:?}")))?;
                unit.key_points.push(KeyPointResult {
                    key_point: KeyPoint::new(key_point_id.clone(), text.clone()),
                    matched: Vec::new(),
                    selection_count: 0,
                    prevalence: 0.0,
                });
            }
        }
    }
    let policy = latest.config.final_policy;
    for unit in &mut result.units {
        let items = unit_comments(unit, dataset, per_stance);
        let key_points = std::mem::take(&mut unit.key_points);
        if key_points.is_empty() || items.is_empty() {
            unit.key_points = key_points;
            for kp in &mut unit.key_points {
                kp.matched.clear();
                kp.prevalence = 0.0;
            }
            unit.unmatched = items.iter().map(|i| i.id.clone()).collect();
        } else {
            let outcome =
                assign_final(key_points, &items, &policy, &unit.topic, matcher).map_err(|e| ApiError::from_core(e.into()))?;
            unit.key_points = outcome.key_points;
            unit.unmatched = outcome.unmatched;
        }
        let n = items.len();
        unit.coverage = if n == 0 {
            0.0
        } else {
            (n - unit.unmatched.len()) as f64 / n as f64
        };
    }
    Ok(result)
}
