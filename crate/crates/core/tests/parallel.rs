use std::sync::Mutex;

use partape::{AccessMode, ActiveScalar, AdConfig, AdContext, AdError, EventKind, Scheme};

fn ctx(scheme: Scheme) -> AdContext {
    AdContext::new(AdConfig {
        scheme,
        threads: 2,
        ..AdConfig::default()
    })
}

fn inputs(ad: &partape::Ad, vals: &[f64]) -> Vec<ActiveScalar> {
    vals.iter()
        .map(|&v| {
            let mut x = ActiveScalar::new(v);
            ad.register_input(&mut x).unwrap();
            x
        })
        .collect()
}

#[test]
fn one_statement_per_thread() {
    let c = ctx(Scheme::Linear);
    let ad = c.bind().unwrap();
    ad.start_recording();
    let x = inputs(&ad, &[1.0, 2.0]);
    let out = Mutex::new(Vec::new());
    ad.parallel_region(2, |r| {
        let y = x[r.thread_num()].sin();
        out.lock().unwrap().push(y);
    })
    .unwrap();
    ad.stop_recording().unwrap();
    let s = ad.stats();
    assert_eq!(s.per_thread.len(), 2);
    assert!(s.per_thread.iter().all(|t| t.statements == 1));
}

#[test]
fn inactive_region_records_nothing() {
    let c = ctx(Scheme::Linear);
    let ad = c.bind().unwrap();
    ad.start_recording();
    let x = inputs(&ad, &[1.0, 2.0]);
    ad.stop_recording().unwrap();
    ad.parallel_region(2, |r| {
        let y = x[r.thread_num()].sin();
        assert!(!y.is_active());
        r.barrier();
    })
    .unwrap();
    assert_eq!(ad.stats().total.statements, 0);
    assert!(ad.regions().is_empty());
    assert!(ad.with_tape(0, |t| t.events().is_empty()).unwrap());
}

#[test]
fn chunks_and_nowait() {
    let c = ctx(Scheme::Linear);
    let ad = c.bind().unwrap();
    ad.start_recording();
    let seen = Mutex::new(vec![Vec::new(); 4]);
    ad.parallel_region(4, |r| {
        r.for_static(3, |i| seen.lock().unwrap()[r.thread_num()].push(i));
        r.for_static_nowait(8, |_| {});
    })
    .unwrap();
    let seen = seen.into_inner().unwrap();
    assert_eq!(seen.iter().filter(|c| c.is_empty()).count(), 1);
    for t in 0..4 {
        let kinds: Vec<EventKind> = ad
            .with_tape(t, |tape| tape.events().iter().map(|e| e.kind).collect())
            .unwrap();
        let kinds: Vec<_> = kinds
            .into_iter()
            .filter(|k| !matches!(k, EventKind::RegionBegin(_) | EventKind::RegionEnd(_)))
            .collect();
        assert_eq!(
            kinds,
            vec![
                EventKind::ChunkBegin,
                EventKind::ChunkEnd,
                EventKind::Barrier,
                EventKind::ChunkBegin,
                EventKind::ChunkEnd
            ]
        );
    }
}

#[test]
fn nested_region_is_unsupported() {
    let c = ctx(Scheme::Linear);
    let ad = c.bind().unwrap();
    let inner = Mutex::new(None);
    ad.parallel_region(2, |r| {
        if r.is_master() {
            *inner.lock().unwrap() = Some(partape::parallel_region(2, |_| {}));
        }
    })
    .unwrap();
    assert_eq!(inner.into_inner().unwrap(), Some(Err(AdError::Unsupported("nested parallel regions"))));
}

fn square_sum(workers: Option<usize>, threads: usize) -> Vec<f64> {
    let c = ctx(Scheme::Reuse);
    let ad = c.bind().unwrap();
    ad.start_recording();
    let vals: Vec<f64> = (0..8).map(|i| 0.5 + i as f64).collect();
    let x = inputs(&ad, &vals);
    let parts: Vec<Mutex<ActiveScalar>> = (0..threads).map(|_| Mutex::new(ActiveScalar::new(0.0))).collect();
    ad.parallel_region(threads, |r| {
        let mut acc = ActiveScalar::new(0.0);
        r.for_static(8, |i| acc += &x[i] * &x[i]);
        *parts[r.thread_num()].lock().unwrap() = acc;
    })
    .unwrap();
    let mut f = ActiveScalar::new(0.0);
    for p in &parts {
        f += &*p.lock().unwrap();
    }
    ad.stop_recording().unwrap();
    ad.ensure_adjoints().unwrap();
    ad.set_derivative(f.identifier(), 1.0);
    let end = ad.position().unwrap();
    ad.evaluate_with_workers(end, ad.start_position(), workers).unwrap();
    x.iter().map(|v| ad.get_derivative(v.identifier())).collect()
}

#[test]
fn disjoint_square_sum() {
    let g = square_sum(None, 2);
    for (i, gi) in g.iter().enumerate() {
        assert_eq!(*gi, 2.0 * (0.5 + i as f64));
    }
    assert_eq!(square_sum(Some(1), 2), g);
    assert_eq!(square_sum(None, 4), g);
}

#[test]
fn shared_read_with_atomics() {
    let c = ctx(Scheme::Linear);
    let ad = c.bind().unwrap();
    ad.start_recording();
    let vals: Vec<f64> = (0..16).map(|i| 1.0 + 0.25 * i as f64).collect();
    let x = inputs(&ad, &vals);
    let terms = Mutex::new(Vec::new());
    ad.parallel_region(4, |r| {
        r.for_static(16, |i| {
            let t = &x[0] * &x[i];
            terms.lock().unwrap().push(t);
        });
    })
    .unwrap();
    let f: ActiveScalar = terms.lock().unwrap().iter().sum();
    ad.stop_recording().unwrap();
    ad.ensure_adjoints().unwrap();
    ad.set_derivative(f.identifier(), 1.0);
    ad.evaluate_all().unwrap();
    let expected: f64 = vals.iter().sum::<f64>() + vals[0];
    assert!((ad.get_derivative(x[0].identifier()) - expected).abs() < 1e-12 * expected);
}

#[test]
fn barrier_orders_reverse_sweep() {
    // thread t computes a_t = x_t * 2 before the barrier and b_t = a_{1-t} * 3 after;
    // reversing across the barrier must finish all b before any a.
    for workers in [None, Some(1)] {
        let c = ctx(Scheme::Linear);
        let ad = c.bind().unwrap();
        ad.start_recording();
        let x = inputs(&ad, &[1.0, 2.0]);
        let a: Vec<Mutex<ActiveScalar>> = (0..2).map(|_| Mutex::new(ActiveScalar::new(0.0))).collect();
        let b: Vec<Mutex<ActiveScalar>> = (0..2).map(|_| Mutex::new(ActiveScalar::new(0.0))).collect();
        ad.parallel_region(2, |r| {
            let t = r.thread_num();
            *a[t].lock().unwrap() = &x[t] * 2.0;
            r.barrier();
            let v = &*a[1 - t].lock().unwrap() * 3.0;
            *b[t].lock().unwrap() = v;
        })
        .unwrap();
        let f = &*b[0].lock().unwrap() + &*b[1].lock().unwrap() * 10.0;
        ad.stop_recording().unwrap();
        ad.ensure_adjoints().unwrap();
        ad.set_derivative(f.identifier(), 1.0);
        let end = ad.position().unwrap();
        ad.evaluate_with_workers(end, ad.start_position(), workers).unwrap();
        assert_eq!(ad.get_derivative(x[0].identifier()), 60.0);
        assert_eq!(ad.get_derivative(x[1].identifier()), 6.0);
    }
}

#[test]
fn master_section_is_non_atomic() {
    let c = ctx(Scheme::Linear);
    let ad = c.bind().unwrap();
    ad.start_recording();
    let x = inputs(&ad, &[1.5]);
    let out = Mutex::new(ActiveScalar::new(0.0));
    let modes = Mutex::new(Vec::new());
    ad.parallel_region(2, |r| {
        let _t = x[0].sin();
        r.master(|| {
            *out.lock().unwrap() = x[0].exp();
            modes.lock().unwrap().push(partape::current_access_mode().unwrap());
        });
    })
    .unwrap();
    ad.stop_recording().unwrap();
    assert_eq!(modes.into_inner().unwrap(), vec![AccessMode::NonAtomic]);
    let atomic: Vec<bool> = ad.with_tape(0, |t| (0..t.len()).map(|s| t.is_atomic(s)).collect()).unwrap();
    assert_eq!(atomic, vec![true, false]);
    let f = out.into_inner().unwrap();
    ad.ensure_adjoints().unwrap();
    ad.set_derivative(f.identifier(), 1.0);
    ad.evaluate_all().unwrap();
    assert!((ad.get_derivative(x[0].identifier()) - 1.5f64.exp()).abs() < 1e-14);
}

#[test]
fn no_shared_reading_marks_statements() {
    for (opt, expect_atomic) in [(true, false), (false, true)] {
        let c = AdContext::new(AdConfig {
            shared_read_opt: opt,
            threads: 2,
            ..AdConfig::default()
        });
        let ad = c.bind().unwrap();
        ad.start_recording();
        let x = inputs(&ad, &[1.0, 2.0]);
        ad.parallel_region(2, |r| {
            let _a = x[r.thread_num()].sin();
            r.set_no_shared_reading(true);
            let _b = x[r.thread_num()].cos();
            r.set_no_shared_reading(false);
            let _c = x[r.thread_num()].exp();
        })
        .unwrap();
        let serial = x[0].tanh();
        ad.stop_recording().unwrap();
        for t in 0..2 {
            let marks: Vec<bool> = ad
                .with_tape(t, |tape| (0..tape.len()).map(|s| tape.is_atomic(s)).collect())
                .unwrap();
            let region: Vec<bool> = if t == 0 { marks[..3].to_vec() } else { marks.clone() };
            assert_eq!(region, vec![true, expect_atomic, true]);
        }
        assert!(serial.is_active());
        let last = ad.with_tape(0, |t| t.is_atomic(t.len() - 1)).unwrap();
        assert!(!last);
    }
}

#[test]
fn rewinding_past_a_region_keeps_earlier_segment() {
    let c = ctx(Scheme::Linear);
    let ad = c.bind().unwrap();
    ad.start_recording();
    let x = inputs(&ad, &[0.3, 0.6]);
    let y = &x[0] * &x[1];
    let mark = ad.position().unwrap();
    ad.parallel_region(2, |r| {
        let _z = x[r.thread_num()].sin();
        r.barrier();
    })
    .unwrap();
    ad.reset_to(mark).unwrap();
    assert!(ad.regions().is_empty());
    assert_eq!(ad.stats().total.statements, 1);
    ad.stop_recording().unwrap();
    ad.ensure_adjoints().unwrap();
    ad.set_derivative(y.identifier(), 1.0);
    ad.evaluate(mark, ad.start_position()).unwrap();
    assert_eq!(ad.get_derivative(x[0].identifier()), 0.6);
}

#[test]
fn unbalanced_pause_is_reported_at_region_end() {
    let c = ctx(Scheme::Linear);
    let ad = c.bind().unwrap();
    ad.start_recording();
    let r = ad.parallel_region(2, |r| {
        if r.thread_num() == 1 {
            partape::pause_preaccumulation();
        }
    });
    assert!(matches!(r, Err(AdError::Contract(_))));
}
