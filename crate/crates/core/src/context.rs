//! AD context, thread bindings and the master-thread handle.
//!
//! An [`AdContext`] owns everything shared between threads: the identifier
//! manager, the adjoint vector, parked per-thread tapes, parallel-region
//! records and external-function nodes. A thread takes part in recording by
//! being *bound* to a context; the binding lives in thread-local storage so
//! that overloaded operators find their tape without an explicit handle.

use std::cell::{Cell, RefCell};
use std::marker::PhantomData;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::Mutex;

use crate::adjoint::{AdjointSlice, AdjointVector, UseGuard};
use crate::error::AdError;
use crate::eval;
use crate::ids::{AuditSummary, Identifier, IdentifierManager, Scheme, ThreadIds};
use crate::parallel::{self, RegionCtx};
use crate::preacc::PreaccMode;
use crate::scalar::ActiveScalar;
use crate::tape::{AccessMode, EventKind, Tape, TapePos, TapeStats};
use crate::team::ThreadTeam;

/// Environment variable enabling identifier liveness auditing.
pub const DEBUG_IDS_ENV: &str = "PARTAPE_DEBUG_IDS";
/// Environment variable setting the default team size.
pub const THREADS_ENV: &str = "PARTAPE_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct AdConfig {
    pub scheme: Scheme,
    pub preacc: PreaccMode,
    /// Honor no-shared-reading marks (non-atomic increments in marked sections).
    pub shared_read_opt: bool,
    /// Explicit adjoint management: one resize and one shared lock per batch of
    /// accesses. When off, every access locks and resizes implicitly.
    pub adjoint_vector_opt: bool,
    pub debug_ids: bool,
    pub threads: usize,
}

impl Default for AdConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Linear,
            preacc: PreaccMode::On,
            shared_read_opt: true,
            adjoint_vector_opt: true,
            debug_ids: std::env::var(DEBUG_IDS_ENV).is_ok_and(|v| v == "1"),
            threads: default_threads(),
        }
    }
}

/// Team size from `PARTAPE_THREADS`, or 1.
pub fn default_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n: &usize| n >= 1)
        .unwrap_or(1)
}

/// Reverse-mode hook attached to the tape in place of recorded statements.
pub trait ExternalFunction: Send + Sync {
    fn reverse(&self, adj: &AdjointSlice<'_>, team: &ThreadTeam) -> Result<(), AdError>;

    /// Iterations spent by the most recent reverse call, for iterative nodes.
    fn reverse_iterations(&self) -> Option<usize> {
        None
    }
}

#[derive(Debug, Default)]
pub(crate) struct Parked {
    pub(crate) tape: Tape,
    pub(crate) ids: ThreadIds,
}

/// Where one parallel region lives in the per-thread tapes.
#[derive(Debug, Clone)]
pub struct RegionRecord {
    pub threads: usize,
    /// `[start, end)` of each thread's statements inside the region.
    pub segments: Vec<(TapePos, TapePos)>,
    pub(crate) begin_event: usize,
}

pub(crate) struct Shared {
    pub(crate) config: AdConfig,
    pub(crate) ids: IdentifierManager,
    pub(crate) adjoints: AdjointVector,
    pub(crate) parked: Mutex<Vec<Parked>>,
    pub(crate) regions: Mutex<Vec<RegionRecord>>,
    pub(crate) externals: Mutex<Vec<Arc<dyn ExternalFunction>>>,
    pub(crate) team: ThreadTeam,
    master_bound: AtomicBool,
    pub(crate) generation: AtomicU64,
}

pub(crate) struct Binding {
    pub(crate) shared: Arc<Shared>,
    pub(crate) thread: usize,
    pub(crate) tape: Tape,
    pub(crate) ids: ThreadIds,
    pub(crate) recording: bool,
    pub(crate) in_region: bool,
    pub(crate) region_serial: u64,
    pub(crate) atomic_mode: bool,
    pub(crate) master_section: bool,
    pub(crate) preacc_pause: usize,
    pub(crate) preacc_open: bool,
    pub(crate) use_depth: usize,
    pub(crate) use_guard: Option<UseGuard>,
    pub(crate) error: Option<AdError>,
}

thread_local! {
    static BINDING: RefCell<Option<Binding>> = const { RefCell::new(None) };
    static REUSE_BOUND: Cell<bool> = const { Cell::new(false) };
}

pub(crate) fn with_binding<R>(f: impl FnOnce(&mut Binding) -> R) -> Option<R> {
    BINDING.with(|cell| cell.borrow_mut().as_mut().map(f))
}

/// Like [`with_binding`], but silently skips on re-entrancy or teardown.
pub(crate) fn try_with_binding<R>(f: impl FnOnce(&mut Binding) -> R) -> Option<R> {
    BINDING
        .try_with(|cell| cell.try_borrow_mut().ok().and_then(|mut g| g.as_mut().map(f)))
        .ok()
        .flatten()
}

/// Releases `id` on the current thread. Silently leaks when the thread is not
/// bound or is being torn down.
pub(crate) fn release_on_drop(id: Identifier) {
    if !REUSE_BOUND.try_with(Cell::get).unwrap_or(false) {
        return;
    }
    let _ = BINDING.try_with(|cell| {
        if let Ok(mut guard) = cell.try_borrow_mut() {
            if let Some(b) = guard.as_mut() {
                if let Err(e) = b.shared.ids.release(&mut b.ids, id) {
                    b.error.get_or_insert(e);
                }
            }
        }
    });
}

pub(crate) fn install(binding: Binding) {
    let reuse = binding.shared.ids.scheme() == Scheme::Reuse;
    BINDING.with(|cell| *cell.borrow_mut() = Some(binding));
    REUSE_BOUND.with(|c| c.set(reuse));
}

pub(crate) fn uninstall() -> Option<Binding> {
    REUSE_BOUND.with(|c| c.set(false));
    BINDING.with(|cell| cell.borrow_mut().take())
}

impl Binding {
    pub(crate) fn new(shared: Arc<Shared>, thread: usize, parked: Parked) -> Self {
        Self {
            shared,
            thread,
            tape: parked.tape,
            ids: parked.ids,
            recording: false,
            in_region: false,
            region_serial: 0,
            atomic_mode: true,
            master_section: false,
            preacc_pause: 0,
            preacc_open: false,
            use_depth: 0,
            use_guard: None,
            error: None,
        }
    }

    pub(crate) fn into_parked(self) -> Parked {
        Parked {
            tape: self.tape,
            ids: self.ids,
        }
    }

    #[inline]
    pub(crate) fn statement_atomic(&self) -> bool {
        self.in_region && !self.master_section && self.atomic_mode
    }

    #[inline]
    pub(crate) fn acquire(&mut self) -> Identifier {
        self.shared.ids.acquire(&mut self.ids)
    }

    #[inline]
    pub(crate) fn release(&mut self, id: Identifier) {
        if let Err(e) = self.shared.ids.release(&mut self.ids, id) {
            self.error.get_or_insert(e);
        }
    }

    /// Appends a statement for a freshly computed value; passive arguments are
    /// dropped from the stored argument list.
    pub(crate) fn record(&mut self, args: &[(f64, Identifier)]) -> Result<Identifier, AdError> {
        let mut active = 0usize;
        for (k, &(p, id)) in args.iter().enumerate() {
            if id != 0 {
                if !p.is_finite() {
                    return Err(AdError::NonFinitePartial { partial: p, arg: k });
                }
                active += 1;
            }
        }
        if active > u8::MAX as usize {
            return Err(AdError::TooManyArguments(active));
        }
        let lhs = self.acquire();
        let atomic = self.statement_atomic();
        self.tape.push(lhs, args, atomic);
        Ok(lhs)
    }

    pub(crate) fn log(&mut self, kind: EventKind) {
        if self.recording {
            let thread = self.thread;
            self.tape.push_event(kind, thread);
        }
    }
}

/// Records `value` as the result of an elementary operation with the given
/// `(partial, argument identifier)` pairs.
#[inline]
pub(crate) fn record_op(value: f64, args: &[(f64, Identifier)]) -> ActiveScalar {
    if args.iter().all(|&(_, id)| id == 0) {
        return ActiveScalar::new(value);
    }
    let id = with_binding(|b| {
        if !b.recording {
            return 0;
        }
        match b.record(args) {
            Ok(id) => id,
            Err(e) => {
                b.error.get_or_insert(e);
                0
            }
        }
    })
    .unwrap_or(0);
    ActiveScalar::from_parts(value, id)
}

/// Copy semantics of the identifier scheme: linear copies share the
/// identifier, reuse copies record a one-argument statement.
pub(crate) fn record_copy(src: &ActiveScalar) -> ActiveScalar {
    if src.identifier() == 0 {
        return ActiveScalar::new(src.value());
    }
    let id = with_binding(|b| {
        if !b.recording {
            return 0;
        }
        match b.shared.ids.scheme() {
            Scheme::Linear => src.identifier(),
            Scheme::Reuse => b.record(&[(1.0, src.identifier())]).unwrap_or(0),
        }
    })
    .unwrap_or(0);
    ActiveScalar::from_parts(src.value(), id)
}

/// Access mode that statements recorded now on the calling thread receive;
/// `None` when the thread is not bound.
pub fn current_access_mode() -> Option<AccessMode> {
    with_binding(|b| {
        if b.statement_atomic() {
            AccessMode::Atomic
        } else {
            AccessMode::NonAtomic
        }
    })
}

/// Shared handle to an AD context.
#[derive(Clone)]
pub struct AdContext {
    pub(crate) shared: Arc<Shared>,
}

impl std::fmt::Debug for AdContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AdContext")
            .field("config", &self.shared.config)
            .finish()
    }
}

impl AdContext {
    pub fn new(config: AdConfig) -> Self {
        let ids = IdentifierManager::new(config.scheme, config.debug_ids);
        Self {
            shared: Arc::new(Shared {
                config,
                ids,
                adjoints: AdjointVector::new(),
                parked: Mutex::new(Vec::new()),
                regions: Mutex::new(Vec::new()),
                externals: Mutex::new(Vec::new()),
                team: ThreadTeam::new(),
                master_bound: AtomicBool::new(false),
                generation: AtomicU64::new(0),
            }),
        }
    }

    pub fn config(&self) -> &AdConfig {
        &self.shared.config
    }

    pub fn adjoints(&self) -> &AdjointVector {
        &self.shared.adjoints
    }

    /// Adjoint capacity covering every identifier issued so far.
    pub fn required_capacity(&self) -> usize {
        self.shared.ids.next_fresh() as usize
    }

    pub fn team(&self) -> &ThreadTeam {
        &self.shared.team
    }

    /// Binds the calling thread as master (thread 0) of this context.
    pub fn bind(&self) -> Result<Ad, AdError> {
        if with_binding(|_| ()).is_some() {
            return Err(AdError::AlreadyBound);
        }
        if self
            .shared
            .master_bound
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .is_err()
        {
            return Err(AdError::contract("context is already bound on another thread"));
        }
        let parked = {
            let mut parked = self.shared.parked.lock();
            if parked.is_empty() {
                parked.push(Parked::default());
            }
            std::mem::take(&mut parked[0])
        };
        install(Binding::new(Arc::clone(&self.shared), 0, parked));
        Ok(Ad {
            shared: Arc::clone(&self.shared),
            _not_send: PhantomData,
        })
    }
}

/// Opaque tape position of the whole recording (master tape plus parallel state).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Position {
    pub(crate) master: TapePos,
    pub(crate) regions: usize,
    pub(crate) externals: usize,
    pub(crate) generation: u64,
}

/// Per-thread and total tape statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordingStats {
    pub per_thread: Vec<TapeStats>,
    pub total: TapeStats,
}

/// Master-thread handle of a bound context. Unbinds on drop.
pub struct Ad {
    shared: Arc<Shared>,
    _not_send: PhantomData<*const ()>,
}

impl std::fmt::Debug for Ad {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Ad").finish_non_exhaustive()
    }
}

impl Drop for Ad {
    fn drop(&mut self) {
        if let Some(b) = uninstall() {
            let parked = b.into_parked();
            self.shared.parked.lock()[0] = parked;
        }
        self.shared.master_bound.store(false, Ordering::Release);
    }
}

impl Ad {
    fn bound<R>(&self, f: impl FnOnce(&mut Binding) -> R) -> R {
        with_binding(f).expect("AD handle used on a thread without its binding")
    }

    fn serial<R>(&self, f: impl FnOnce(&mut Binding) -> Result<R, AdError>) -> Result<R, AdError> {
        self.bound(|b| {
            if b.in_region {
                return Err(AdError::contract("operation not allowed inside a parallel region"));
            }
            f(b)
        })
    }

    pub fn context(&self) -> AdContext {
        AdContext {
            shared: Arc::clone(&self.shared),
        }
    }

    pub fn config(&self) -> &AdConfig {
        &self.shared.config
    }

    pub fn scheme(&self) -> Scheme {
        self.shared.config.scheme
    }

    pub fn start_recording(&self) {
        self.bound(|b| b.recording = true);
    }

    /// Stops recording and reports the first recording error since the last call.
    pub fn stop_recording(&self) -> Result<(), AdError> {
        self.bound(|b| {
            b.recording = false;
            b.error.take().map_or(Ok(()), Err)
        })
    }

    pub fn is_recording(&self) -> bool {
        self.bound(|b| b.recording)
    }

    /// Takes the first sticky error raised by operators or drops.
    pub fn take_error(&self) -> Option<AdError> {
        self.bound(|b| b.error.take())
    }

    /// Gives `x` a fresh identifier without recording a statement.
    pub fn register_input(&self, x: &mut ActiveScalar) -> Result<Identifier, AdError> {
        self.bound(|b| {
            if !b.recording {
                return Err(AdError::NotRecording);
            }
            let old = x.identifier();
            let id = b.acquire();
            x.set_identifier_raw(id);
            if old != 0 {
                b.release(old);
            }
            Ok(id)
        })
    }

    /// Marks `x` as an output. Under reuse a copy is recorded so that the
    /// output owns its identifier; under linear the identifier is kept, so an
    /// output that is a plain copy of an input shares the input's adjoint.
    /// Passive outputs stay passive.
    pub fn register_output(&self, x: &mut ActiveScalar) -> Result<Identifier, AdError> {
        let old = x.identifier();
        if old == 0 {
            return Ok(0);
        }
        let id = self.bound(|b| {
            if !b.recording {
                return Err(AdError::NotRecording);
            }
            match b.shared.ids.scheme() {
                Scheme::Linear => Ok(old),
                Scheme::Reuse => b.record(&[(1.0, old)]),
            }
        })?;
        if id == old {
            return Ok(id);
        }
        // the old identifier is released by the drop of the replaced value
        *x = ActiveScalar::from_parts(x.value(), id);
        Ok(id)
    }

    /// Records `value` as a statement with explicit partials.
    pub fn record_statement(
        &self,
        value: f64,
        partials: &[f64],
        args: &[Identifier],
    ) -> Result<ActiveScalar, AdError> {
        if partials.len() != args.len() {
            return Err(AdError::LengthMismatch {
                partials: partials.len(),
                ids: args.len(),
            });
        }
        let pairs: Vec<(f64, Identifier)> = partials.iter().copied().zip(args.iter().copied()).collect();
        let id = self.bound(|b| {
            if !b.recording {
                return Err(AdError::NotRecording);
            }
            if pairs.iter().all(|&(_, id)| id == 0) {
                return Ok(0);
            }
            b.record(&pairs)
        })?;
        Ok(ActiveScalar::from_parts(value, id))
    }

    pub fn acquire_identifier(&self) -> Identifier {
        self.bound(|b| b.acquire())
    }

    pub fn release_identifier(&self, id: Identifier) -> Result<(), AdError> {
        self.bound(|b| b.shared.ids.release(&mut b.ids, id))
    }

    pub fn position(&self) -> Result<Position, AdError> {
        self.serial(|b| {
            Ok(Position {
                master: b.tape.position(),
                regions: b.shared.regions.lock().len(),
                externals: b.shared.externals.lock().len(),
                generation: b.shared.generation.load(Ordering::Acquire),
            })
        })
    }

    /// Position of an empty recording.
    pub fn start_position(&self) -> Position {
        Position {
            master: TapePos::default(),
            regions: 0,
            externals: 0,
            generation: self.shared.generation.load(Ordering::Acquire),
        }
    }

    /// Empties every tape. Under the linear scheme identifier numbering
    /// restarts; under reuse, identifiers stay with the variables that own them.
    pub fn reset_tape(&self) -> Result<(), AdError> {
        self.serial(|b| {
            b.tape.clear();
            for p in b.shared.parked.lock().iter_mut() {
                p.tape.clear();
            }
            b.shared.regions.lock().clear();
            b.shared.externals.lock().clear();
            b.shared.ids.reset_linear();
            b.shared.generation.fetch_add(1, Ordering::AcqRel);
            Ok(())
        })
    }

    /// Rewinds the recording to `pos`, including parallel state.
    pub fn reset_to(&self, pos: Position) -> Result<(), AdError> {
        self.serial(|b| {
            if pos.generation != b.shared.generation.load(Ordering::Acquire) {
                return Err(AdError::contract("position belongs to a reset recording"));
            }
            let mut regions = b.shared.regions.lock();
            let mut parked = b.shared.parked.lock();
            if pos.regions < regions.len() {
                let first = &regions[pos.regions];
                for (t, (start, _)) in first.segments.iter().enumerate().skip(1) {
                    if let Some(p) = parked.get_mut(t) {
                        p.tape.truncate(*start);
                    }
                }
            }
            regions.truncate(pos.regions);
            b.shared.externals.lock().truncate(pos.externals);
            b.tape.truncate(pos.master);
            Ok(())
        })
    }

    /// Evaluates the recording between `from` (later) and `to` (earlier),
    /// replaying parallel regions with their recorded thread counts.
    pub fn evaluate(&self, from: Position, to: Position) -> Result<(), AdError> {
        self.evaluate_with_workers(from, to, None)
    }

    /// Evaluates the whole current recording.
    pub fn evaluate_all(&self) -> Result<(), AdError> {
        let end = self.position()?;
        self.evaluate(end, self.start_position())
    }

    /// Like [`Ad::evaluate`], but maps every region onto `workers` threads.
    /// `Some(1)` gives a serial evaluation honoring barrier order.
    pub fn evaluate_with_workers(
        &self,
        from: Position,
        to: Position,
        workers: Option<usize>,
    ) -> Result<(), AdError> {
        self.serial(|b| {
            let generation = b.shared.generation.load(Ordering::Acquire);
            if from.generation != generation || to.generation != generation {
                return Err(AdError::contract("position belongs to a reset recording"));
            }
            if from.master.stmts < to.master.stmts || from.master.events < to.master.events {
                return Err(AdError::contract("evaluation range is reversed"));
            }
            let shared = Arc::clone(&b.shared);
            let required = shared.ids.next_fresh() as usize;
            let capacity = shared.adjoints.capacity();
            if capacity < required {
                return Err(AdError::CapacityTooSmall {
                    capacity,
                    required: required - 1,
                });
            }
            let guard = shared.adjoints.acquire_shared();
            let adj = AdjointSlice::new(&guard);
            let parked = shared.parked.lock();
            let regions = shared.regions.lock();
            let externals: Vec<_> = shared.externals.lock().clone();
            eval::evaluate_master(
                &eval::TapeSet {
                    master: &b.tape,
                    parked: &parked,
                    regions: &regions,
                    externals: &externals,
                },
                from.master,
                to.master,
                &adj,
                workers,
                &shared.team,
            )
        })
    }

    /// Opens a shared-use bracket on the adjoint vector (reference counted per thread).
    pub fn begin_use_adjoints(&self) {
        self.bound(|b| {
            if b.use_depth == 0 {
                b.use_guard = Some(b.shared.adjoints.acquire_shared());
            }
            b.use_depth += 1;
        })
    }

    pub fn end_use_adjoints(&self) -> Result<(), AdError> {
        self.bound(|b| {
            if b.use_depth == 0 {
                return Err(AdError::contract("end_use_adjoints without matching begin"));
            }
            b.use_depth -= 1;
            if b.use_depth == 0 {
                b.use_guard = None;
            }
            Ok(())
        })
    }

    /// Ensures capacity for `n` adjoint entries. Excluded while this thread
    /// holds a use bracket; blocks while other threads hold one.
    pub fn resize_adjoints(&self, n: usize) -> Result<(), AdError> {
        self.bound(|b| {
            if b.use_depth > 0 {
                return Err(AdError::contract("resize_adjoints inside an open use bracket"));
            }
            b.shared.adjoints.resize(n);
            Ok(())
        })
    }

    /// Resizes to cover every identifier issued so far.
    pub fn ensure_adjoints(&self) -> Result<(), AdError> {
        self.resize_adjoints(self.shared.ids.next_fresh() as usize)
    }

    /// Writes an adjoint. Inside a use bracket this is an unchecked raw access;
    /// outside it locks and resizes implicitly.
    pub fn set_derivative(&self, id: Identifier, v: f64) {
        if id == 0 {
            return;
        }
        self.bound(|b| match &b.use_guard {
            Some(g) => {
                debug_assert!((id as usize) < g.len(), "adjoint access out of bounds");
                AdjointSlice::new(g).set(id, v)
            }
            None => b.shared.adjoints.set_locked(id, v),
        })
    }

    pub fn get_derivative(&self, id: Identifier) -> f64 {
        if id == 0 {
            return 0.0;
        }
        self.bound(|b| match &b.use_guard {
            Some(g) => {
                debug_assert!((id as usize) < g.len(), "adjoint access out of bounds");
                AdjointSlice::new(g).get(id)
            }
            None => b.shared.adjoints.get_locked(id),
        })
    }

    /// Runs `f` on an unchecked view of the adjoint vector. The view is
    /// `Sync`, so `f` may hand it to a team for parallel seeding or extraction.
    pub fn with_adjoints<R>(&self, f: impl FnOnce(AdjointSlice<'_>) -> R) -> R {
        let guard = self.shared.adjoints.acquire_shared();
        f(AdjointSlice::new(&guard))
    }

    /// The persistent worker team of this context.
    pub fn team(&self) -> &ThreadTeam {
        &self.shared.team
    }

    pub fn reset_adjoints(&self) {
        self.shared.adjoints.reset();
    }

    pub fn adjoint_capacity(&self) -> usize {
        self.shared.adjoints.capacity()
    }

    pub fn stats(&self) -> RecordingStats {
        self.bound(|b| {
            let scheme = b.shared.ids.scheme();
            let mut per_thread = vec![b.tape.stats(scheme)];
            for p in b.shared.parked.lock().iter().skip(1) {
                per_thread.push(p.tape.stats(scheme));
            }
            let total = per_thread.iter().fold(TapeStats::default(), |a, &s| a + s);
            RecordingStats { per_thread, total }
        })
    }

    /// Statement and event access for inspection: `f` sees the tape of `thread`.
    pub fn with_tape<R>(&self, thread: usize, f: impl FnOnce(&Tape) -> R) -> Option<R> {
        self.bound(|b| {
            if thread == 0 {
                Some(f(&b.tape))
            } else {
                b.shared.parked.lock().get(thread).map(|p| f(&p.tape))
            }
        })
    }

    /// External functions recorded so far, in tape order.
    pub fn externals(&self) -> Vec<Arc<dyn ExternalFunction>> {
        self.shared.externals.lock().clone()
    }

    pub fn regions(&self) -> Vec<RegionRecord> {
        self.shared.regions.lock().clone()
    }

    /// True when identifier liveness accounting is enabled.
    pub fn identifier_auditing(&self) -> bool {
        self.shared.ids.auditing()
    }

    /// Liveness audit of the reuse scheme (requires debug accounting).
    pub fn audit_identifiers(&self) -> Result<AuditSummary, AdError> {
        self.serial(|b| {
            let parked = b.shared.parked.lock();
            let pools = std::iter::once(b.ids.pool.as_slice())
                .chain(parked.iter().skip(1).map(|p| p.ids.pool.as_slice()));
            b.shared.ids.audit(pools)
        })
    }

    /// Runs `body` on a team of `threads`, recording each thread onto its own tape.
    pub fn parallel_region<F>(&self, threads: usize, body: F) -> Result<(), AdError>
    where
        F: Fn(&RegionCtx<'_>) + Sync,
    {
        parallel::parallel_region(threads, body)
    }

    /// Access mode new statements get at this point of the recording.
    pub fn current_access_mode(&self) -> AccessMode {
        current_access_mode().expect("AD handle used on a thread without its binding")
    }
}
