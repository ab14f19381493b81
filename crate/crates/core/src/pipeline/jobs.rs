//! A FIFO queue of long-running stage operations served by one worker
//! thread. Jobs run in submission order; progress is monotone per job.

use std::collections::HashMap;
use std::sync::mpsc::{channel, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobStatus {
    pub id: u64,
    pub project_id: String,
    pub kind: String,
    pub state: JobState,
    /// Fraction completed in `[0, 1]`.
    pub progress: f32,
    pub error: Option<String>,
    pub result: Option<serde_json::Value>,
}

/// Passed to a running job to report progress.
#[derive(Clone)]
pub struct Progress {
    id: u64,
    table: Arc<Mutex<HashMap<u64, JobStatus>>>,
}

impl Progress {
    /// Records `done / total`; values below the current progress are ignored.
    pub fn report(&self, done: usize, total: usize) {
        let f = if total == 0 { 1.0 } else { (done as f32 / total as f32).clamp(0.0, 1.0) };
        if let Some(s) = self.table.lock().expect("job table").get_mut(&self.id) {
            s.progress = s.progress.max(f);
        }
    }
}

type Work = Box<dyn FnOnce(&Progress) -> Result<serde_json::Value, String> + Send>;

pub struct JobQueue {
    table: Arc<Mutex<HashMap<u64, JobStatus>>>,
    next: Mutex<u64>,
    tx: Mutex<Option<Sender<(u64, Work)>>>,
    worker: Mutex<Option<JoinHandle<()>>>,
}

impl Default for JobQueue {
    fn default() -> Self {
        Self::new()
    }
}

impl JobQueue {
    pub fn new() -> Self {
        let table: Arc<Mutex<HashMap<u64, JobStatus>>> = Arc::default();
        let (tx, rx) = channel::<(u64, Work)>();
        let t = Arc::clone(&table);
        let worker = std::thread::spawn(move || {
            for (id, work) in rx {
                let set = |f: &dyn Fn(&mut JobStatus)| {
                    if let Some(s) = t.lock().expect("job table").get_mut(&id) {
                        f(s);
                    }
                };
                set(&|s| s.state = JobState::Running);
                let progress = Progress { id, table: Arc::clone(&t) };
                let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| work(&progress)))
                    .unwrap_or_else(|_| Err("job panicked".into()));
                match outcome {
                    Ok(v) => set(&|s| {
                        s.state = JobState::Done;
                        s.progress = 1.0;
                        s.result = Some(v.clone());
                    }),
                    Err(e) => set(&|s| {
                        s.state = JobState::Failed;
                        s.error = Some(e.clone());
                    }),
                }
            }
        });
        Self { table, next: Mutex::new(1), tx: Mutex::new(Some(tx)), worker: Mutex::new(Some(worker)) }
    }

    /// Enqueues `work` and returns its job id.
    pub fn submit(
        &self,
        project_id: &str,
        kind: &str,
        work: impl FnOnce(&Progress) -> Result<serde_json::Value, String> + Send + 'static,
    ) -> u64 {
        let id = {
            let mut n = self.next.lock().expect("job counter");
            let id = *n;
            *n += 1;
            id
        };
        self.table.lock().expect("job table").insert(
            id,
            JobStatus {
                id,
                project_id: project_id.into(),
                kind: kind.into(),
                state: JobState::Queued,
                progress: 0.0,
                error: None,
                result: None,
            },
        );
        let tx = self.tx.lock().expect("job sender");
        tx.as_ref().expect("queue open").send((id, Box::new(work))).expect("worker alive");
        id
    }

    pub fn status(&self, id: u64) -> Option<JobStatus> {
        self.table.lock().expect("job table").get(&id).cloned()
    }

    /// Blocks until the job leaves the queued and running states.
    pub fn wait(&self, id: u64) -> Option<JobStatus> {
        loop {
            let s = self.status(id)?;
            if matches!(s.state, JobState::Done | JobState::Failed) {
                return Some(s);
            }
            std::thread::sleep(std::time::Duration::from_millis(5));
        }
    }
}

impl Drop for JobQueue {
    fn drop(&mut self) {
        self.tx.lock().expect("job sender").take();
        if let Some(w) = self.worker.lock().expect("worker").take() {
            let _ = w.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn runs_in_submission_order() {
        let q = JobQueue::new();
        let log = Arc::new(Mutex::new(Vec::new()));
        let ids: Vec<u64> = (0..5)
            .map(|i| {
                let log = Arc::clone(&log);
                q.submit("p", "t", move |_| {
                    log.lock().unwrap().push(i);
                    Ok(serde_json::json!(i))
                })
            })
            .collect();
        for (i, id) in ids.iter().enumerate() {
            let s = q.wait(*id).unwrap();
            assert_eq!(s.state, JobState::Done);
            assert_eq!(s.result, Some(serde_json::json!(i)));
        }
        assert_eq!(*log.lock().unwrap(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn progress_is_monotone_and_failures_recorded() {
        let q = JobQueue::new();
        let id = q.submit("p", "t", |p| {
            p.report(3, 4);
            p.report(1, 4);
            Err("boom".into())
        });
        let s = q.wait(id).unwrap();
        assert_eq!(s.state, JobState::Failed);
        assert_eq!(s.error.as_deref(), Some("boom"));
        assert_eq!(s.progress, 0.75);
        assert!(q.status(999).is_none());
    }

    #[test]
    fn panic_fails_the_job_only() {
        let q = JobQueue::new();
        let a = q.submit("p", "t", |_| panic!("bad"));
        let b = q.submit("p", "t", |_| Ok(serde_json::Value::Null));
        assert_eq!(q.wait(a).unwrap().state, JobState::Failed);
        assert_eq!(q.wait(b).unwrap().state, JobState::Done);
    }
}
