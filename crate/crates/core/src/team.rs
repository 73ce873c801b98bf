//! Persistent worker threads executing fork-join jobs.
//!
//! `run(n, job)` executes `job(tid)` for `tid in 0..n`, with `tid == 0` on the
//! calling thread, and returns once every invocation has finished. Workers
//! persist between calls so that iteration-heavy adjoint loops do not pay the
//! thread spawn cost on every evaluation.

use std::panic::{self, AssertUnwindSafe};
use std::sync::Arc;
use std::thread::JoinHandle;

use parking_lot::{Condvar, Mutex};

type Job = dyn Fn(usize) + Sync;

struct State {
    generation: u64,
    job: Option<*const Job>,
    participants: usize,
    remaining: usize,
    panic: Option<Box<dyn std::any::Any + Send>>,
    shutdown: bool,
}

// SAFETY: the raw job pointer is only dereferenced while `run` blocks the
// owning stack frame, and the pointee is `Sync`.
unsafe impl Send for State {}

struct Inner {
    state: Mutex<State>,
    start: Condvar,
    done: Condvar,
}

pub struct ThreadTeam {
    inner: Arc<Inner>,
    workers: Mutex<Vec<JoinHandle<()>>>,
    run_lock: Mutex<()>,
}

impl Default for ThreadTeam {
    fn default() -> Self {
        Self::new()
    }
}

impl std::fmt::Debug for ThreadTeam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ThreadTeam")
            .field("workers", &self.workers.lock().len())
            .finish()
    }
}

impl ThreadTeam {
    pub fn new() -> Self {
        Self {
            inner: Arc::new(Inner {
                state: Mutex::new(State {
                    generation: 0,
                    job: None,
                    participants: 0,
                    remaining: 0,
                    panic: None,
                    shutdown: false,
                }),
                start: Condvar::new(),
                done: Condvar::new(),
            }),
            workers: Mutex::new(Vec::new()),
            run_lock: Mutex::new(()),
        }
    }

    /// Number of persistent worker threads (excluding the caller).
    pub fn spawned(&self) -> usize {
        self.workers.lock().len()
    }

    fn ensure_workers(&self, n: usize) {
        let mut workers = self.workers.lock();
        while workers.len() + 1 < n {
            let tid = workers.len() + 1;
            let inner = Arc::clone(&self.inner);
            let handle = std::thread::Builder::new()
                .name(format!("partape-worker-{tid}"))
                .spawn(move || worker_loop(inner, tid))
                .expect("failed to spawn worker thread");
            workers.push(handle);
        }
    }

    /// Runs `job` on `n` threads and waits for all of them.
    pub fn run<'a>(&self, n: usize, job: &'a (dyn Fn(usize) + Sync + 'a)) {
        assert!(n >= 1, "team size must be positive");
        if n == 1 {
            job(0);
            return;
        }
        let _serial = self.run_lock.lock();
        self.ensure_workers(n);
        // SAFETY: erase the lifetime; we do not return before all workers are done.
        let ptr: *const Job = unsafe {
            std::mem::transmute::<*const (dyn Fn(usize) + Sync + 'a), *const Job>(job)
        };
        {
            let mut st = self.inner.state.lock();
            st.job = Some(ptr);
            st.participants = n;
            st.remaining = n - 1;
            st.generation += 1;
            self.inner.start.notify_all();
        }
        let own = panic::catch_unwind(AssertUnwindSafe(|| job(0)));
        let mut st = self.inner.state.lock();
        while st.remaining > 0 {
            self.inner.done.wait(&mut st);
        }
        st.job = None;
        let worker_panic = st.panic.take();
        drop(st);
        if let Err(p) = own {
            panic::resume_unwind(p);
        }
        if let Some(p) = worker_panic {
            panic::resume_unwind(p);
        }
    }
}

fn worker_loop(inner: Arc<Inner>, tid: usize) {
    let mut seen = 0u64;
    loop {
        let job = {
            let mut st = inner.state.lock();
            loop {
                if st.shutdown {
                    return;
                }
                if st.generation != seen {
                    seen = st.generation;
                    if tid < st.participants {
                        break st.job;
                    }
                }
                inner.start.wait(&mut st);
            }
        };
        let Some(job) = job else { continue };
        // SAFETY: `run` keeps the job alive until `remaining` drops to zero.
        let result = panic::catch_unwind(AssertUnwindSafe(|| unsafe { (*job)(tid) }));
        let mut st = inner.state.lock();
        if let Err(p) = result {
            st.panic.get_or_insert(p);
        }
        st.remaining -= 1;
        if st.remaining == 0 {
            inner.done.notify_all();
        }
    }
}

impl Drop for ThreadTeam {
    fn drop(&mut self) {
        {
            let mut st = self.inner.state.lock();
            st.shutdown = true;
            self.inner.start.notify_all();
        }
        for h in self.workers.lock().drain(..) {
            let _ = h.join();
        }
    }
}

/// Static contiguous chunk of `[0, n)` owned by thread `tid` of `threads`.
pub fn static_chunk(n: usize, tid: usize, threads: usize) -> std::ops::Range<usize> {
    (tid * n / threads)..((tid + 1) * n / threads)
}
