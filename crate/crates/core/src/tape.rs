//! Thread-local statement stream and parallel-event log.

use crate::adjoint::{AdjointSlice, AdjointVector};
use crate::ids::{Identifier, Scheme};

/// Modeled size of the argument-count field of a statement.
pub const ARG_COUNT_BYTES: usize = 1;
/// Modeled size of one argument entry: 8 byte partial plus 4 byte identifier.
pub const ARG_ENTRY_BYTES: usize = 12;
/// Modeled size of the explicit left-hand-side identifier stored under reuse.
pub const LHS_BYTES: usize = 4;

/// Access mode for adjoint increments of a statement during reverse evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessMode {
    Atomic,
    NonAtomic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    RegionBegin(usize),
    RegionEnd(usize),
    ChunkBegin,
    ChunkEnd,
    Barrier,
    ModeSwitch(AccessMode),
    MasterBegin,
    MasterEnd,
    PreaccPause,
    PreaccResume,
    External(usize),
}

/// A parallel event together with the tape position it was logged at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParallelEvent {
    pub kind: EventKind,
    pub thread: usize,
    pub stmt: usize,
    pub arg: usize,
}

/// Position in one thread's tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TapePos {
    pub stmts: usize,
    pub args: usize,
    pub events: usize,
}

/// Statement counts and modeled memory of a recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TapeStats {
    pub statements: usize,
    pub arg_entries: usize,
    pub bytes: usize,
}

impl TapeStats {
    pub fn modeled(scheme: Scheme, statements: usize, arg_entries: usize) -> Self {
        let per_stmt = match scheme {
            Scheme::Linear => ARG_COUNT_BYTES,
            Scheme::Reuse => ARG_COUNT_BYTES + LHS_BYTES,
        };
        Self {
            statements,
            arg_entries,
            bytes: statements * per_stmt + arg_entries * ARG_ENTRY_BYTES,
        }
    }
}

impl std::ops::Add for TapeStats {
    type Output = TapeStats;

    fn add(self, o: TapeStats) -> TapeStats {
        TapeStats {
            statements: self.statements + o.statements,
            arg_entries: self.arg_entries + o.arg_entries,
            bytes: self.bytes + o.bytes,
        }
    }
}

/// Append-only recording of one thread.
///
/// The left-hand-side identifier is stored for both schemes; the byte model in
/// [`TapeStats`] only charges it under reuse, where it cannot be implied.
#[derive(Debug, Default)]
pub struct Tape {
    pub(crate) lhs: Vec<Identifier>,
    pub(crate) arg_count: Vec<u8>,
    pub(crate) atomic: Vec<bool>,
    pub(crate) partials: Vec<f64>,
    pub(crate) arg_ids: Vec<Identifier>,
    pub(crate) events: Vec<ParallelEvent>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.lhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lhs.is_empty()
    }

    pub fn position(&self) -> TapePos {
        TapePos {
            stmts: self.lhs.len(),
            args: self.partials.len(),
            events: self.events.len(),
        }
    }

    pub fn events(&self) -> &[ParallelEvent] {
        &self.events
    }

    /// Raw view of statement `s`: left-hand side and its arguments.
    pub fn statement(&self, s: usize) -> (Identifier, Vec<(f64, Identifier)>) {
        let start: usize = self.arg_count[..s].iter().map(|&c| c as usize).sum();
        let n = self.arg_count[s] as usize;
        let args = (start..start + n)
            .map(|k| (self.partials[k], self.arg_ids[k]))
            .collect();
        (self.lhs[s], args)
    }

    pub fn is_atomic(&self, s: usize) -> bool {
        self.atomic[s]
    }

    /// Appends a statement; passive (identifier 0) arguments are not stored.
    #[inline]
    pub(crate) fn push(&mut self, lhs: Identifier, args: &[(f64, Identifier)], atomic: bool) {
        let mut n = 0usize;
        for &(p, id) in args {
            if id != 0 {
                self.partials.push(p);
                self.arg_ids.push(id);
                n += 1;
            }
        }
        debug_assert!(n <= u8::MAX as usize);
        self.lhs.push(lhs);
        self.arg_count.push(n as u8);
        self.atomic.push(atomic);
    }

    pub(crate) fn push_event(&mut self, kind: EventKind, thread: usize) {
        self.events.push(ParallelEvent {
            kind,
            thread,
            stmt: self.lhs.len(),
            arg: self.partials.len(),
        });
    }

    pub(crate) fn truncate(&mut self, pos: TapePos) {
        self.lhs.truncate(pos.stmts);
        self.arg_count.truncate(pos.stmts);
        self.atomic.truncate(pos.stmts);
        self.partials.truncate(pos.args);
        self.arg_ids.truncate(pos.args);
        self.events.truncate(pos.events);
    }

    pub(crate) fn clear(&mut self) {
        self.truncate(TapePos::default());
    }

    pub fn stats(&self, scheme: Scheme) -> TapeStats {
        TapeStats::modeled(scheme, self.lhs.len(), self.partials.len())
    }

    /// Reverse sweep over statements `[start.stmts, end.stmts)`.
    ///
    /// `force` overrides the per-statement access mark; serial segments and
    /// preaccumulations always evaluate non-atomically.
    pub(crate) fn reverse(
        &self,
        adj: &AdjointSlice<'_>,
        start: TapePos,
        end: TapePos,
        force: Option<AccessMode>,
    ) {
        let mut a = end.args;
        for s in (start.stmts..end.stmts).rev() {
            let n = self.arg_count[s] as usize;
            a -= n;
            let lhs = self.lhs[s];
            let w = adj.get(lhs);
            adj.set(lhs, 0.0);
            if w == 0.0 {
                continue;
            }
            let atomic = match force {
                Some(mode) => mode == AccessMode::Atomic,
                None => self.atomic[s],
            };
            let partials = &self.partials[a..a + n];
            let ids = &self.arg_ids[a..a + n];
            if atomic {
                for (&p, &id) in partials.iter().zip(ids) {
                    adj.add_atomic(id, p * w);
                }
            } else {
                for (&p, &id) in partials.iter().zip(ids) {
                    adj.add(id, p * w);
                }
            }
        }
        debug_assert_eq!(a, start.args);
    }

    /// Reverse sweep with a lock and implicit resize on every adjoint access.
    pub(crate) fn reverse_locked(&self, adj: &AdjointVector, start: TapePos, end: TapePos) {
        let mut a = end.args;
        for s in (start.stmts..end.stmts).rev() {
            let n = self.arg_count[s] as usize;
            a -= n;
            let lhs = self.lhs[s];
            let w = adj.get_locked(lhs);
            adj.set_locked(lhs, 0.0);
            if w == 0.0 {
                continue;
            }
            for k in a..a + n {
                adj.add_locked(self.arg_ids[k], self.partials[k] * w);
            }
        }
    }
}
