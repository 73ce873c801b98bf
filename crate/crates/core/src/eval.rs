//! Reverse evaluation across the master tape and parallel-region segments.

use std::sync::{Arc, Barrier};

use crate::adjoint::AdjointSlice;
use crate::context::{ExternalFunction, Parked, RegionRecord};
use crate::error::AdError;
use crate::tape::{AccessMode, EventKind, Tape, TapePos};
use crate::team::ThreadTeam;

pub(crate) struct TapeSet<'a> {
    pub(crate) master: &'a Tape,
    pub(crate) parked: &'a [Parked],
    pub(crate) regions: &'a [RegionRecord],
    pub(crate) externals: &'a [Arc<dyn ExternalFunction>],
}

impl TapeSet<'_> {
    fn tape(&self, thread: usize) -> Result<&Tape, AdError> {
        if thread == 0 {
            Ok(self.master)
        } else {
            self.parked
                .get(thread)
                .map(|p| &p.tape)
                .ok_or_else(|| AdError::Structure(format!("missing tape of thread {thread}")))
        }
    }
}

/// Walks the master tape from `from` back to `to`. Serial statements are
/// evaluated non-atomically; regions are replayed on the team.
pub(crate) fn evaluate_master(
    set: &TapeSet<'_>,
    from: TapePos,
    to: TapePos,
    adj: &AdjointSlice<'_>,
    workers: Option<usize>,
    team: &ThreadTeam,
) -> Result<(), AdError> {
    let master = set.master;
    if from.stmts > master.len() || from.events > master.events.len() {
        return Err(AdError::Structure("evaluation start lies beyond the recording".into()));
    }
    let mut pos = from;
    loop {
        while pos.events > to.events {
            let ev = master.events[pos.events - 1];
            if ev.stmt != pos.stmts {
                break;
            }
            match ev.kind {
                EventKind::RegionEnd(r) => {
                    let rec = set.regions.get(r).ok_or_else(|| {
                        AdError::Structure(format!("region {r} not found; position and state out of sync"))
                    })?;
                    if rec.begin_event < to.events {
                        return Err(AdError::Structure(
                            "evaluation range ends inside a parallel region".into(),
                        ));
                    }
                    evaluate_region(set, rec, adj, workers, team)?;
                    let begin = master.events[rec.begin_event];
                    pos = TapePos {
                        stmts: begin.stmt,
                        args: begin.arg,
                        events: rec.begin_event,
                    };
                    continue;
                }
                EventKind::RegionBegin(_) => {
                    return Err(AdError::Structure("region begin without matching end".into()));
                }
                EventKind::External(k) => {
                    let ext = set.externals.get(k).ok_or_else(|| {
                        AdError::Structure(format!("external function {k} not found"))
                    })?;
                    ext.reverse(adj, team)?;
                }
                _ => {}
            }
            pos.events -= 1;
        }
        if pos.stmts <= to.stmts {
            break;
        }
        let stop = if pos.events > to.events {
            let ev = master.events[pos.events - 1];
            if ev.stmt < to.stmts {
                (to.stmts, to.args)
            } else {
                (ev.stmt, ev.arg)
            }
        } else {
            (to.stmts, to.args)
        };
        let start = TapePos {
            stmts: stop.0,
            args: stop.1,
            events: 0,
        };
        master.reverse(adj, start, pos, Some(AccessMode::NonAtomic));
        pos.stmts = stop.0;
        pos.args = stop.1;
    }
    Ok(())
}

/// Phase boundaries of one thread's segment, split at barriers.
fn phases(tape: &Tape, seg: &(TapePos, TapePos)) -> Result<Vec<TapePos>, AdError> {
    let (start, end) = *seg;
    let mut cuts = vec![start];
    for ev in &tape.events[start.events..end.events] {
        match ev.kind {
            EventKind::Barrier => cuts.push(TapePos {
                stmts: ev.stmt,
                args: ev.arg,
                events: 0,
            }),
            EventKind::External(_) | EventKind::RegionBegin(_) | EventKind::RegionEnd(_) => {
                return Err(AdError::Structure(
                    "unsupported event inside a parallel region segment".into(),
                ))
            }
            _ => {}
        }
    }
    cuts.push(end);
    Ok(cuts)
}

pub(crate) fn evaluate_region(
    set: &TapeSet<'_>,
    rec: &RegionRecord,
    adj: &AdjointSlice<'_>,
    workers: Option<usize>,
    team: &ThreadTeam,
) -> Result<(), AdError> {
    let threads = rec.threads;
    let mut tapes = Vec::with_capacity(threads);
    let mut cuts = Vec::with_capacity(threads);
    for t in 0..threads {
        let tape = set.tape(t)?;
        let c = phases(tape, &rec.segments[t])?;
        if let Some(first) = cuts.first() {
            let first: &Vec<TapePos> = first;
            if first.len() != c.len() {
                return Err(AdError::Structure(format!(
                    "thread {t} logged {} barriers, thread 0 logged {}",
                    c.len() - 2,
                    first.len() - 2
                )));
            }
        }
        tapes.push(tape);
        cuts.push(c);
    }
    let nphase = cuts[0].len() - 1;
    let w = workers.unwrap_or(threads).clamp(1, threads);
    let barrier = Barrier::new(w);
    team.run(w, &|wid| {
        for ph in (0..nphase).rev() {
            let mut t = wid;
            while t < threads {
                let c = &cuts[t];
                tapes[t].reverse(adj, c[ph], c[ph + 1], None);
                t += w;
            }
            if w > 1 {
                barrier.wait();
            }
        }
    });
    Ok(())
}
