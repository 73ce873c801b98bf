//! Local preaccumulation: a recorded subgraph is replaced by its dense Jacobian.

use std::collections::HashSet;
use std::marker::PhantomData;

use crate::adjoint::AdjointSlice;
use crate::context::{with_binding, Binding};
use crate::error::AdError;
use crate::ids::Identifier;
use crate::scalar::ActiveScalar;
use crate::tape::{AccessMode, EventKind, TapePos};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PreaccMode {
    On,
    Off,
    /// Sessions marked [`SessionKind::ParallelIncompatible`] are skipped.
    Hybrid,
}

impl PreaccMode {
    pub fn name(self) -> &'static str {
        match self {
            PreaccMode::On => "on",
            PreaccMode::Off => "off",
            PreaccMode::Hybrid => "hybrid",
        }
    }
}

impl std::str::FromStr for PreaccMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "on" => Ok(PreaccMode::On),
            "off" => Ok(PreaccMode::Off),
            "hybrid" => Ok(PreaccMode::Hybrid),
            other => Err(format!("unknown preaccumulation mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SessionKind {
    #[default]
    Regular,
    /// Cannot guarantee disjoint identifier footprints under parallel recording.
    ParallelIncompatible,
}

/// Synchronization points inside [`PreaccSession::finish_with_hook`].
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinishPhase {
    /// Output `k` has been reverse-evaluated; input adjoints not yet read.
    BeforeExtract(usize),
    /// Input adjoints of output `k` read; not yet zeroed.
    AfterExtract(usize),
}

#[derive(Debug)]
struct Active {
    inputs: Vec<Identifier>,
    start: TapePos,
    region_serial: u64,
}

/// An open preaccumulation session. Inert sessions do nothing on finish.
#[derive(Debug)]
pub struct PreaccSession {
    state: Option<Active>,
    _thread_bound: PhantomData<*const ()>,
}

/// Opens a regular session over `inputs`.
pub fn preacc_start(inputs: &[&ActiveScalar]) -> Result<PreaccSession, AdError> {
    preacc_start_kind(inputs, SessionKind::Regular)
}

pub fn preacc_start_kind(inputs: &[&ActiveScalar], kind: SessionKind) -> Result<PreaccSession, AdError> {
    let state = with_binding(|b| -> Result<Option<Active>, AdError> {
        if !b.recording || b.preacc_pause > 0 {
            return Ok(None);
        }
        match (b.shared.config.preacc, kind) {
            (PreaccMode::Off, _) | (PreaccMode::Hybrid, SessionKind::ParallelIncompatible) => {
                return Ok(None)
            }
            _ => {}
        }
        if b.preacc_open {
            return Err(AdError::contract("nested preaccumulation session on one thread"));
        }
        if let Some(index) = inputs.iter().position(|x| x.identifier() == 0) {
            return Err(AdError::PassivePreaccInput { index });
        }
        b.preacc_open = true;
        Ok(Some(Active {
            inputs: inputs.iter().map(|x| x.identifier()).collect(),
            start: b.tape.position(),
            region_serial: b.region_serial,
        }))
    })
    .transpose()?
    .flatten();
    Ok(PreaccSession {
        state,
        _thread_bound: PhantomData,
    })
}

impl PreaccSession {
    pub fn is_active(&self) -> bool {
        self.state.is_some()
    }

    pub fn input_count(&self) -> usize {
        self.state.as_ref().map_or(0, |s| s.inputs.len())
    }

    /// Contracts the statements recorded since the start into one dense
    /// statement per output.
    pub fn finish(self, outputs: &[&ActiveScalar]) -> Result<(), AdError> {
        self.finish_with_hook(outputs, |_| {})
    }

    #[doc(hidden)]
    pub fn finish_with_hook(
        mut self,
        outputs: &[&ActiveScalar],
        mut hook: impl FnMut(FinishPhase),
    ) -> Result<(), AdError> {
        let Some(st) = self.state.take() else {
            return Ok(());
        };
        let outs: Vec<Identifier> = outputs.iter().map(|x| x.identifier()).collect();
        let jac = with_binding(|b| {
            b.preacc_open = false;
            local_jacobian(b, &st, &outs, &mut hook)
        })
        .ok_or(AdError::Unbound)??;
        with_binding(|b| {
            b.tape.truncate(st.start);
            let atomic = b.statement_atomic();
            let n_in = st.inputs.len();
            let mut args = Vec::with_capacity(n_in);
            for (k, &out) in outs.iter().enumerate() {
                args.clear();
                args.extend(
                    st.inputs
                        .iter()
                        .enumerate()
                        .map(|(j, &id)| (jac[k * n_in + j], id)),
                );
                b.tape.push(out, &args, atomic);
            }
        });
        Ok(())
    }
}

impl Drop for PreaccSession {
    fn drop(&mut self) {
        if self.state.is_some() {
            // abandoned session: statements stay on the tape unchanged
            let _ = crate::context::try_with_binding(|b| b.preacc_open = false);
        }
    }
}

fn local_jacobian(
    b: &mut Binding,
    st: &Active,
    outs: &[Identifier],
    hook: &mut impl FnMut(FinishPhase),
) -> Result<Vec<f64>, AdError> {
    if st.region_serial != b.region_serial {
        return Err(AdError::Structure("preaccumulation session spans a parallel region boundary".into()));
    }
    if b.tape.events.len() != st.start.events {
        let kind = b.tape.events[st.start.events].kind;
        if !matches!(kind, EventKind::PreaccPause | EventKind::PreaccResume) {
            return Err(AdError::Structure(format!(
                "parallel construct {kind:?} inside a preaccumulation session"
            )));
        }
        return Err(AdError::contract("pause state changed inside a preaccumulation session"));
    }
    let end = b.tape.position();
    let lhs: HashSet<Identifier> = b.tape.lhs[st.start.stmts..end.stmts].iter().copied().collect();
    for (k, &out) in outs.iter().enumerate() {
        if out == 0 || (!lhs.contains(&out) && !st.inputs.contains(&out)) {
            return Err(AdError::Structure(format!(
                "preaccumulation output {k} was not recorded inside the session"
            )));
        }
    }
    let n_in = st.inputs.len();
    let mut jac = vec![0.0; outs.len() * n_in];
    let shared = &b.shared;
    if shared.config.adjoint_vector_opt {
        if b.use_depth > 0 {
            if b.use_guard.as_ref().is_none_or(|g| g.len() < shared.ids.next_fresh() as usize) {
                return Err(AdError::contract("adjoint capacity too small inside open use bracket"));
            }
        } else {
            shared.adjoints.resize(shared.ids.next_fresh() as usize);
        }
        let guard = shared.adjoints.acquire_shared();
        let adj = AdjointSlice::new(&guard);
        for (k, &out) in outs.iter().enumerate() {
            adj.set(out, 1.0);
            b.tape.reverse(&adj, st.start, end, Some(AccessMode::NonAtomic));
            hook(FinishPhase::BeforeExtract(k));
            for (j, &id) in st.inputs.iter().enumerate() {
                jac[k * n_in + j] = adj.get(id);
            }
            hook(FinishPhase::AfterExtract(k));
            for &id in &st.inputs {
                adj.set(id, 0.0);
            }
        }
    } else {
        let adj = &shared.adjoints;
        for (k, &out) in outs.iter().enumerate() {
            adj.set_locked(out, 1.0);
            b.tape.reverse_locked(adj, st.start, end);
            hook(FinishPhase::BeforeExtract(k));
            for (j, &id) in st.inputs.iter().enumerate() {
                jac[k * n_in + j] = adj.get_locked(id);
            }
            hook(FinishPhase::AfterExtract(k));
            for &id in &st.inputs {
                adj.set_locked(id, 0.0);
            }
        }
    }
    if let Some(p) = jac.iter().find(|p| !p.is_finite()) {
        return Err(AdError::NonFinitePartial { partial: *p, arg: 0 });
    }
    Ok(jac)
}

/// Makes subsequent sessions on this thread inert. Counted; must be balanced
/// by [`resume_preaccumulation`] within the same region.
pub fn pause_preaccumulation() {
    with_binding(|b| {
        b.preacc_pause += 1;
        b.log(EventKind::PreaccPause);
    });
}

pub fn resume_preaccumulation() -> Result<(), AdError> {
    with_binding(|b| {
        if b.preacc_pause == 0 {
            return Err(AdError::contract("resume_preaccumulation without matching pause"));
        }
        b.preacc_pause -= 1;
        b.log(EventKind::PreaccResume);
        Ok(())
    })
    .unwrap_or(Ok(()))
}

/// Current pause depth of the calling thread.
pub fn preaccumulation_pause_depth() -> usize {
    with_binding(|b| b.preacc_pause).unwrap_or(0)
}
