//! Identifier management.
//!
//! Two schemes share one interface. `Linear` hands out every identifier at
//! most once per recording and lets copies share identifiers. `Reuse` keeps a
//! LIFO pool per thread: identifiers of destroyed or overwritten variables go
//! back to the pool of the releasing thread and are handed out again before any
//! fresh identifier is drawn.
//!
//! Fresh identifiers come from a global atomic counter in blocks of
//! [`BLOCK_SIZE`], so threads only touch shared state once per block.

use std::sync::atomic::{AtomicI32, AtomicU64, Ordering};

use parking_lot::Mutex;

use crate::error::AdError;

/// Identifier of an active variable. `0` marks a passive value.
pub type Identifier = i32;

/// Number of fresh identifiers a thread reserves at once.
pub const BLOCK_SIZE: i32 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Linear,
    Reuse,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Linear => "linear",
            Scheme::Reuse => "reuse",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(Scheme::Linear),
            "reuse" => Ok(Scheme::Reuse),
            other => Err(format!("unknown identifier scheme '{other}'")),
        }
    }
}

/// Per-thread identifier state: the thread's pool and its reserved block.
#[derive(Debug, Default)]
pub(crate) struct ThreadIds {
    pub(crate) pool: Vec<Identifier>,
    next: Identifier,
    end: Identifier,
    epoch: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
enum Slot {
    NeverIssued = 0,
    Live = 1,
    Pooled = 2,
}

/// Liveness bookkeeping for the reuse scheme, enabled in debug accounting mode.
#[derive(Debug, Default)]
struct Audit {
    slots: Vec<Slot>,
    violations: Vec<String>,
}

impl Audit {
    fn slot_mut(&mut self, id: Identifier) -> &mut Slot {
        let i = id as usize;
        if i >= self.slots.len() {
            self.slots.resize(i + 1, Slot::NeverIssued);
        }
        &mut self.slots[i]
    }
}

/// Counts of identifiers in each liveness class, covering `[1, next_fresh)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AuditSummary {
    pub live: usize,
    pub pooled: usize,
    pub never_issued: usize,
    pub next_fresh: Identifier,
}

#[derive(Debug)]
pub(crate) struct IdentifierManager {
    scheme: Scheme,
    next_fresh: AtomicI32,
    epoch: AtomicU64,
    audit: Option<Mutex<Audit>>,
}

impl IdentifierManager {
    pub(crate) fn new(scheme: Scheme, debug: bool) -> Self {
        let audit = (debug && scheme == Scheme::Reuse).then(|| Mutex::new(Audit::default()));
        Self {
            scheme,
            next_fresh: AtomicI32::new(1),
            epoch: AtomicU64::new(0),
            audit,
        }
    }

    pub(crate) fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub(crate) fn auditing(&self) -> bool {
        self.audit.is_some()
    }

    /// Upper bound (exclusive) of every identifier issued so far.
    pub(crate) fn next_fresh(&self) -> Identifier {
        self.next_fresh.load(Ordering::Acquire)
    }

    pub(crate) fn acquire(&self, st: &mut ThreadIds) -> Identifier {
        match self.scheme {
            Scheme::Reuse => {
                if let Some(id) = st.pool.pop() {
                    if let Some(audit) = &self.audit {
                        let mut audit = audit.lock();
                        let slot = audit.slot_mut(id);
                        if *slot != Slot::Pooled {
                            let state = *slot;
                            audit
                                .violations
                                .push(format!("identifier {id} drawn from pool while {state:?}"));
                        }
                        *audit.slot_mut(id) = Slot::Live;
                    }
                    return id;
                }
            }
            Scheme::Linear => {
                let epoch = self.epoch.load(Ordering::Acquire);
                if st.epoch != epoch {
                    st.epoch = epoch;
                    st.next = 0;
                    st.end = 0;
                }
            }
        }
        if st.next == st.end {
            let start = self.next_fresh.fetch_add(BLOCK_SIZE, Ordering::AcqRel);
            st.next = start;
            st.end = start + BLOCK_SIZE;
        }
        let id = st.next;
        st.next += 1;
        if let Some(audit) = &self.audit {
            *audit.lock().slot_mut(id) = Slot::Live;
        }
        id
    }

    /// Returns `id` to the releasing thread's pool (reuse) or does nothing (linear).
    pub(crate) fn release(&self, st: &mut ThreadIds, id: Identifier) -> Result<(), AdError> {
        if self.scheme == Scheme::Linear || id == 0 {
            return Ok(());
        }
        if let Some(audit) = &self.audit {
            let mut audit = audit.lock();
            let slot = audit.slot_mut(id);
            if *slot != Slot::Live {
                let msg = format!("release of identifier {id} which is {:?}", *slot);
                audit.violations.push(msg.clone());
                return Err(AdError::IdentifierPool(msg));
            }
            *slot = Slot::Pooled;
        }
        st.pool.push(id);
        Ok(())
    }

    /// Restarts identifier numbering. Only meaningful for the linear scheme,
    /// where identifiers are positional within one recording.
    pub(crate) fn reset_linear(&self) {
        if self.scheme == Scheme::Linear {
            self.next_fresh.store(1, Ordering::Release);
            self.epoch.fetch_add(1, Ordering::AcqRel);
        }
    }

    /// Cross-checks the audit table against the actual pools.
    pub(crate) fn audit<'a>(
        &self,
        pools: impl Iterator<Item = &'a [Identifier]>,
    ) -> Result<AuditSummary, AdError> {
        let Some(audit) = &self.audit else {
            return Err(AdError::Unsupported(
                "identifier audit requires the reuse scheme with debug accounting",
            ));
        };
        let audit = audit.lock();
        if let Some(v) = audit.violations.first() {
            return Err(AdError::IdentifierPool(v.clone()));
        }
        let next_fresh = self.next_fresh();
        let mut seen = vec![false; next_fresh.max(1) as usize];
        let mut pooled_actual = 0usize;
        for pool in pools {
            for &id in pool {
                if id <= 0 || id >= next_fresh {
                    return Err(AdError::IdentifierPool(format!("pool holds out-of-range id {id}")));
                }
                if std::mem::replace(&mut seen[id as usize], true) {
                    return Err(AdError::IdentifierPool(format!("identifier {id} pooled twice")));
                }
                let slot = audit.slots.get(id as usize).copied().unwrap_or(Slot::NeverIssued);
                if slot != Slot::Pooled {
                    return Err(AdError::IdentifierPool(format!(
                        "identifier {id} is pooled but recorded as {slot:?}"
                    )));
                }
                pooled_actual += 1;
            }
        }
        let mut summary = AuditSummary {
            next_fresh,
            ..Default::default()
        };
        for id in 1..next_fresh as usize {
            match audit.slots.get(id).copied().unwrap_or(Slot::NeverIssued) {
                Slot::NeverIssued => summary.never_issued += 1,
                Slot::Live => summary.live += 1,
                Slot::Pooled => summary.pooled += 1,
            }
        }
        if summary.pooled != pooled_actual {
            return Err(AdError::IdentifierPool(format!(
                "{} identifiers marked pooled but pools hold {pooled_actual}",
                summary.pooled
            )));
        }
        Ok(summary)
    }
}
