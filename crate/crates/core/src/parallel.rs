//! Parallel regions, worksharing loops, barriers and access-mode marks.
//!
//! Each thread of a region records onto its own tape. The master logs the
//! region boundaries on its tape; the per-thread segments are stored in a
//! [`RegionRecord`] so reverse evaluation can replay them with the same
//! thread count, split at the recorded barriers.

use std::ops::Range;
use std::sync::{Arc, Barrier};

use std::sync::LazyLock;
use parking_lot::Mutex;

use crate::context::{install, uninstall, with_binding, Binding, Parked, RegionRecord, Shared};
use crate::error::AdError;
use crate::tape::{AccessMode, EventKind, TapePos};
use crate::team::{static_chunk, ThreadTeam};

static FALLBACK_TEAM: LazyLock<ThreadTeam> = LazyLock::new(ThreadTeam::new);

/// Per-thread view of a running parallel region.
pub struct RegionCtx<'a> {
    tid: usize,
    threads: usize,
    barrier: &'a Barrier,
}

fn log(kind: EventKind) {
    with_binding(|b| b.log(kind));
}

impl RegionCtx<'_> {
    pub fn thread_num(&self) -> usize {
        self.tid
    }

    pub fn num_threads(&self) -> usize {
        self.threads
    }

    pub fn is_master(&self) -> bool {
        self.tid == 0
    }

    /// Team-wide barrier; reverse evaluation synchronizes here as well.
    pub fn barrier(&self) {
        log(EventKind::Barrier);
        self.barrier.wait();
    }

    /// Static chunk of `[0, n)` owned by this thread.
    pub fn chunk(&self, n: usize) -> Range<usize> {
        static_chunk(n, self.tid, self.threads)
    }

    /// Worksharing loop with static contiguous chunks and an implicit barrier.
    pub fn for_static(&self, n: usize, body: impl FnMut(usize)) {
        self.for_static_nowait(n, body);
        self.barrier();
    }

    pub fn for_static_nowait(&self, n: usize, mut body: impl FnMut(usize)) {
        log(EventKind::ChunkBegin);
        for i in self.chunk(n) {
            body(i);
        }
        log(EventKind::ChunkEnd);
    }

    /// Barrier-master-barrier section: `f` runs on thread 0 only and its
    /// statements are evaluated serially without atomics.
    pub fn master(&self, f: impl FnOnce()) {
        self.barrier();
        if self.tid == 0 {
            with_binding(|b| {
                b.log(EventKind::MasterBegin);
                b.master_section = true;
            });
            f();
            with_binding(|b| {
                b.master_section = false;
                b.log(EventKind::MasterEnd);
            });
        }
        self.barrier();
    }

    /// Collective switch of the access mode for subsequently recorded
    /// statements. Non-atomic marks are only honored when the shared-reading
    /// optimization is enabled in the configuration.
    pub fn set_no_shared_reading(&self, enabled: bool) {
        with_binding(|b| {
            let non_atomic = enabled && b.shared.config.shared_read_opt;
            b.atomic_mode = !non_atomic;
            let mode = if non_atomic {
                AccessMode::NonAtomic
            } else {
                AccessMode::Atomic
            };
            b.log(EventKind::ModeSwitch(mode));
        });
    }
}

struct Opened {
    shared: Arc<Shared>,
    recording: bool,
    region: Option<usize>,
    seg_start: TapePos,
    pause: usize,
}

/// Runs `body` on `threads` team members. When the calling thread is bound,
/// workers are bound to the same context with their own tapes and recording
/// follows the caller. Nesting is not supported.
pub fn parallel_region<F>(threads: usize, body: F) -> Result<(), AdError>
where
    F: Fn(&RegionCtx<'_>) + Sync,
{
    if threads == 0 {
        return Err(AdError::contract("parallel region needs at least one thread"));
    }
    let opened = with_binding(|b| -> Result<Opened, AdError> {
        if b.in_region {
            return Err(AdError::Unsupported("nested parallel regions"));
        }
        if b.preacc_open {
            return Err(AdError::contract("parallel region inside a preaccumulation session"));
        }
        let region = if b.recording {
            let mut regions = b.shared.regions.lock();
            let r = regions.len();
            b.tape.push_event(EventKind::RegionBegin(r), 0);
            regions.push(RegionRecord {
                threads,
                segments: Vec::new(),
                begin_event: b.tape.events.len() - 1,
            });
            Some(r)
        } else {
            None
        };
        b.in_region = true;
        b.region_serial += 1;
        b.atomic_mode = true;
        b.master_section = false;
        Ok(Opened {
            shared: Arc::clone(&b.shared),
            recording: b.recording,
            region,
            seg_start: b.tape.position(),
            pause: b.preacc_pause,
        })
    });

    let barrier = Barrier::new(threads);
    let Some(opened) = opened.transpose()? else {
        FALLBACK_TEAM.run(threads, &|tid| {
            body(&RegionCtx {
                tid,
                threads,
                barrier: &barrier,
            })
        });
        return Ok(());
    };

    let shared = &opened.shared;
    let slots: Vec<Mutex<Option<Parked>>> = {
        let mut parked = shared.parked.lock();
        if parked.len() < threads {
            parked.resize_with(threads, Parked::default);
        }
        (0..threads)
            .map(|t| Mutex::new((t > 0).then(|| std::mem::take(&mut parked[t]))))
            .collect()
    };
    let segments: Vec<Mutex<(TapePos, TapePos)>> =
        (0..threads).map(|_| Mutex::new(Default::default())).collect();
    let errors: Mutex<Vec<AdError>> = Mutex::new(Vec::new());

    shared.team.run(threads, &|tid| {
        let ctx = RegionCtx {
            tid,
            threads,
            barrier: &barrier,
        };
        if tid == 0 {
            body(&ctx);
            return;
        }
        let parked = slots[tid].lock().take().unwrap_or_default();
        let mut binding = Binding::new(Arc::clone(shared), tid, parked);
        binding.recording = opened.recording;
        binding.in_region = true;
        binding.preacc_pause = opened.pause;
        let start = binding.tape.position();
        install(binding);
        body(&ctx);
        let b = uninstall().expect("worker binding vanished");
        let mut errs = errors.lock();
        if b.preacc_pause != opened.pause {
            errs.push(AdError::contract(format!(
                "thread {tid}: unbalanced pause/resume of preaccumulation in parallel region"
            )));
        }
        if b.use_depth != 0 {
            errs.push(AdError::contract(format!("thread {tid}: use bracket left open")));
        }
        if b.preacc_open {
            errs.push(AdError::contract(format!(
                "thread {tid}: preaccumulation session left open"
            )));
        }
        if let Some(e) = b.error.clone() {
            errs.push(e);
        }
        drop(errs);
        *segments[tid].lock() = (start, b.tape.position());
        *slots[tid].lock() = Some(b.into_parked());
    });

    let master_result = with_binding(|b| -> Result<(), AdError> {
        let end = b.tape.position();
        if let Some(r) = opened.region {
            b.tape.push_event(EventKind::RegionEnd(r), 0);
            let mut segs: Vec<(TapePos, TapePos)> = segments.iter().map(|s| *s.lock()).collect();
            segs[0] = (opened.seg_start, end);
            b.shared.regions.lock()[r].segments = segs;
        }
        b.in_region = false;
        b.atomic_mode = true;
        b.master_section = false;
        if b.preacc_pause != opened.pause {
            return Err(AdError::contract(
                "thread 0: unbalanced pause/resume of preaccumulation in parallel region",
            ));
        }
        if b.preacc_open {
            return Err(AdError::contract("thread 0: preaccumulation session left open"));
        }
        Ok(())
    })
    .expect("master binding vanished");

    {
        let mut parked = shared.parked.lock();
        for (t, slot) in slots.into_iter().enumerate().skip(1) {
            if let Some(p) = slot.into_inner() {
                parked[t] = p;
            }
        }
    }
    master_result?;
    if let Some(e) = errors.into_inner().into_iter().next() {
        return Err(e);
    }
    Ok(())
}
