use std::sync::{Barrier, Mutex};

use partape::preacc::FinishPhase;
use partape::{
    pause_preaccumulation, preacc_start, preacc_start_kind, resume_preaccumulation, ActiveScalar, AdConfig,
    AdContext, AdError, PreaccMode, Scheme, SessionKind,
};

fn ctx(preacc: PreaccMode) -> AdContext {
    AdContext::new(AdConfig {
        scheme: Scheme::Linear,
        preacc,
        threads: 2,
        ..AdConfig::default()
    })
}

fn input(ad: &partape::Ad, v: f64) -> ActiveScalar {
    let mut x = ActiveScalar::new(v);
    ad.register_input(&mut x).unwrap();
    x
}

#[test]
fn two_by_two_jacobian() {
    let c = ctx(PreaccMode::On);
    let ad = c.bind().unwrap();
    ad.start_recording();
    let x = input(&ad, 2.0);
    let y = input(&ad, 3.0);
    let s = preacc_start(&[&x, &y]).unwrap();
    assert_eq!(s.input_count(), 2);
    let w1 = &x + &y;
    let w2 = &x * &y;
    s.finish(&[&w1, &w2]).unwrap();
    ad.stop_recording().unwrap();
    let (l1, a1) = ad.with_tape(0, |t| t.statement(0)).unwrap();
    let (l2, a2) = ad.with_tape(0, |t| t.statement(1)).unwrap();
    assert_eq!((l1, l2), (w1.identifier(), w2.identifier()));
    assert_eq!(a1, vec![(1.0, x.identifier()), (1.0, y.identifier())]);
    assert_eq!(a2, vec![(3.0, x.identifier()), (2.0, y.identifier())]);
    let st = ad.stats().total;
    assert_eq!((st.statements, st.arg_entries), (2, 4));
}

#[test]
fn unary_chain_collapses() {
    let c = ctx(PreaccMode::On);
    let ad = c.bind().unwrap();
    ad.start_recording();
    let x = input(&ad, 0.4);
    let s = preacc_start(&[&x]).unwrap();
    let mut v = x.clone();
    for _ in 0..100 {
        v = v.sin();
    }
    assert_eq!(ad.stats().total.statements, 100);
    s.finish(&[&v]).unwrap();
    let st = ad.stats().total;
    assert_eq!((st.statements, st.arg_entries), (1, 1));
    ad.stop_recording().unwrap();

    let mut d = 1.0;
    let mut p = 0.4f64;
    for _ in 0..100 {
        d *= p.cos();
        p = p.sin();
    }
    ad.ensure_adjoints().unwrap();
    ad.set_derivative(v.identifier(), 1.0);
    ad.evaluate_all().unwrap();
    assert!((ad.get_derivative(x.identifier()) - d).abs() <= 1e-14 * d.abs());
}

#[test]
fn passive_input_is_rejected() {
    let c = ctx(PreaccMode::On);
    let ad = c.bind().unwrap();
    ad.start_recording();
    let x = input(&ad, 1.0);
    let p = ActiveScalar::new(2.0);
    assert_eq!(
        preacc_start(&[&x, &p]).unwrap_err(),
        AdError::PassivePreaccInput { index: 1 }
    );
}

#[test]
fn nested_session_is_rejected() {
    let c = ctx(PreaccMode::On);
    let ad = c.bind().unwrap();
    ad.start_recording();
    let x = input(&ad, 1.0);
    let _outer = preacc_start(&[&x]).unwrap();
    assert!(matches!(preacc_start(&[&x]), Err(AdError::Contract(_))));
}

#[test]
fn output_must_come_from_session() {
    let c = ctx(PreaccMode::On);
    let ad = c.bind().unwrap();
    ad.start_recording();
    let x = input(&ad, 1.0);
    let before = x.exp();
    let s = preacc_start(&[&x]).unwrap();
    let _w = x.sin();
    assert!(matches!(s.finish(&[&before]), Err(AdError::Structure(_))));
}

#[test]
fn paused_sessions_are_inert() {
    let c = ctx(PreaccMode::On);
    let ad = c.bind().unwrap();
    ad.start_recording();
    let x = input(&ad, 1.0);
    let y = input(&ad, 2.0);
    pause_preaccumulation();
    pause_preaccumulation();
    let s = preacc_start(&[&x, &y]).unwrap();
    assert!(!s.is_active());
    let w = (&x * &y).sin();
    s.finish(&[&w]).unwrap();
    resume_preaccumulation().unwrap();
    assert!(!preacc_start(&[&x]).unwrap().is_active());
    resume_preaccumulation().unwrap();
    assert!(matches!(resume_preaccumulation(), Err(AdError::Contract(_))));
    assert_eq!(ad.stats().total.statements, 2);
    assert!(preacc_start(&[&x]).unwrap().is_active());
}

#[test]
fn modes_off_and_hybrid() {
    for (mode, regular, incompatible) in [
        (PreaccMode::On, true, true),
        (PreaccMode::Off, false, false),
        (PreaccMode::Hybrid, true, false),
    ] {
        let c = ctx(mode);
        let ad = c.bind().unwrap();
        ad.start_recording();
        let x = input(&ad, 1.0);
        assert_eq!(preacc_start(&[&x]).unwrap().is_active(), regular);
        assert_eq!(
            preacc_start_kind(&[&x], SessionKind::ParallelIncompatible).unwrap().is_active(),
            incompatible
        );
    }
}

#[test]
fn unoptimized_adjoint_path_gives_same_jacobian() {
    let mut rows = Vec::new();
    for opt in [true, false] {
        let c = AdContext::new(AdConfig {
            adjoint_vector_opt: opt,
            threads: 1,
            ..AdConfig::default()
        });
        let ad = c.bind().unwrap();
        ad.start_recording();
        let x = input(&ad, 0.7);
        let y = input(&ad, -1.2);
        let s = preacc_start(&[&x, &y]).unwrap();
        let w = (&x * &y).exp() + x.cos() / &y;
        s.finish(&[&w]).unwrap();
        rows.push(ad.with_tape(0, |t| t.statement(0)).unwrap().1);
    }
    assert_eq!(rows[0], rows[1]);
}

#[test]
fn shared_input_sums_columns() {
    // Two threads contract x*2 and x*3 at the same time. Both read the input
    // adjoint after both reverse sweeps, so each stores 2 + 3.
    let c = ctx(PreaccMode::On);
    let ad = c.bind().unwrap();
    ad.start_recording();
    let x = input(&ad, 1.0);
    ad.resize_adjoints(1 << 16).unwrap();
    let sync = Barrier::new(2);
    let outs: Vec<Mutex<ActiveScalar>> = (0..2).map(|_| Mutex::new(ActiveScalar::new(0.0))).collect();
    ad.parallel_region(2, |r| {
        let t = r.thread_num();
        let s = preacc_start(&[&x]).unwrap();
        let w = &x * (2.0 + t as f64);
        s.finish_with_hook(&[&w], |phase| {
            if matches!(phase, FinishPhase::BeforeExtract(_) | FinishPhase::AfterExtract(_)) {
                sync.wait();
            }
        })
        .unwrap();
        *outs[t].lock().unwrap() = w;
    })
    .unwrap();
    ad.stop_recording().unwrap();
    for t in 0..2 {
        let (_, args) = ad.with_tape(t, |tape| tape.statement(tape.len() - 1)).unwrap();
        assert_eq!(args, vec![(5.0, x.identifier())]);
    }
}

#[test]
fn disjoint_parallel_sessions_are_exact() {
    let c = ctx(PreaccMode::On);
    let ad = c.bind().unwrap();
    ad.start_recording();
    let xs: Vec<ActiveScalar> = (0..2).map(|i| input(&ad, 1.0 + i as f64)).collect();
    ad.resize_adjoints(1 << 16).unwrap();
    ad.parallel_region(2, |r| {
        let t = r.thread_num();
        let s = preacc_start(&[&xs[t]]).unwrap();
        let w = (&xs[t] * (2.0 + t as f64)).sin();
        s.finish(&[&w]).unwrap();
    })
    .unwrap();
    ad.stop_recording().unwrap();
    for t in 0..2 {
        let x = 1.0 + t as f64;
        let c = 2.0 + t as f64;
        let (_, args) = ad.with_tape(t, |tape| tape.statement(tape.len() - 1)).unwrap();
        assert_eq!(args.len(), 1);
        assert_eq!(args[0].1, xs[t].identifier());
        assert!((args[0].0 - c * (c * x).cos()).abs() < 1e-15);
    }
}
