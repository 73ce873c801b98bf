//! Random expression DAGs with a central finite-difference oracle.

#![allow(dead_code)]

use partape::ActiveScalar;
use rand::Rng;

#[derive(Debug, Clone, Copy)]
pub enum Op {
    Add(usize, usize),
    Sub(usize, usize),
    /// tanh(a) * b
    TanhMul(usize, usize),
    /// a / (1 + b^2)
    DivSq(usize, usize),
    Sin(usize),
    Cos(usize),
    /// exp(0.5 tanh(a))
    ExpTanh(usize),
    /// sqrt(1 + a^2)
    SqrtSq(usize),
    Scale(usize, f64),
    /// Plain copy of a node.
    Copy(usize),
}

#[derive(Debug, Clone)]
pub struct Dag {
    pub inputs: usize,
    pub ops: Vec<Op>,
    /// Weights of the nodes summed into the output.
    pub out: Vec<(usize, f64)>,
}

impl Dag {
    /// At most `max_nodes` nodes in total, including inputs.
    pub fn random<R: Rng>(rng: &mut R, max_nodes: usize) -> Self {
        let inputs = rng.gen_range(1..=6usize.min(max_nodes - 1));
        let total = rng.gen_range(inputs + 1..=max_nodes);
        let mut ops = Vec::new();
        for node in inputs..total {
            let a = rng.gen_range(0..node);
            let b = rng.gen_range(0..node);
            let op = match rng.gen_range(0..10) {
                0 => Op::Add(a, b),
                1 => Op::Sub(a, b),
                2 => Op::TanhMul(a, b),
                3 => Op::DivSq(a, b),
                4 => Op::Sin(a),
                5 => Op::Cos(a),
                6 => Op::ExpTanh(a),
                7 => Op::SqrtSq(a),
                8 => Op::Scale(a, rng.gen_range(-2.0..2.0)),
                _ => Op::Copy(a),
            };
            ops.push(op);
        }
        let n = inputs + ops.len();
        let k = rng.gen_range(1..=3.min(n));
        let out = (0..k)
            .map(|i| (n - 1 - i, rng.gen_range(0.5..1.5)))
            .collect();
        Dag { inputs, ops, out }
    }

    pub fn nodes(&self) -> usize {
        self.inputs + self.ops.len()
    }

    pub fn eval(&self, x: &[ActiveScalar]) -> ActiveScalar {
        let mut v: Vec<ActiveScalar> = x.to_vec();
        for op in &self.ops {
            let r = match *op {
                Op::Add(a, b) => &v[a] + &v[b],
                Op::Sub(a, b) => &v[a] - &v[b],
                Op::TanhMul(a, b) => v[a].tanh() * &v[b],
                Op::DivSq(a, b) => &v[a] / (1.0 + &v[b] * &v[b]),
                Op::Sin(a) => v[a].sin(),
                Op::Cos(a) => v[a].cos(),
                Op::ExpTanh(a) => (v[a].tanh() * 0.5).exp(),
                Op::SqrtSq(a) => (1.0 + &v[a] * &v[a]).sqrt(),
                Op::Scale(a, c) => &v[a] * c,
                Op::Copy(a) => v[a].clone(),
            };
            v.push(r);
        }
        let mut y = ActiveScalar::new(0.0);
        for &(i, w) in &self.out {
            y += &v[i] * w;
        }
        y
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        let xs: Vec<ActiveScalar> = x.iter().map(|&v| ActiveScalar::new(v)).collect();
        self.eval(&xs).value()
    }

    /// Central differences with step `h`.
    pub fn fd_gradient(&self, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut p = x.to_vec();
                let mut m = x.to_vec();
                p[i] += h;
                m[i] -= h;
                (self.eval_f64(&p) - self.eval_f64(&m)) / (2.0 * h)
            })
            .collect()
    }
}

/// Max-norm relative difference `|a - b|_inf / max(|b|_inf, floor)`.
pub fn rel_inf(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let d = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let s = b.iter().map(|y| y.abs()).fold(floor, f64::max);
    d / s
}

/// Reverse-mode gradient of `dag` at `x` under `config`.
pub fn ad_gradient(config: partape::AdConfig, dag: &Dag, x: &[f64]) -> Vec<f64> {
    let ctx = partape::AdContext::new(config);
    let ad = ctx.bind().expect("bind");
    ad.start_recording();
    let mut xs: Vec<ActiveScalar> = x.iter().map(|&v| ActiveScalar::new(v)).collect();
    for xi in xs.iter_mut() {
        ad.register_input(xi).unwrap();
    }
    let mut y = dag.eval(&xs);
    ad.register_output(&mut y).unwrap();
    ad.stop_recording().unwrap();
    ad.ensure_adjoints().unwrap();
    ad.set_derivative(y.identifier(), 1.0);
    ad.evaluate_all().unwrap();
    xs.iter().map(|xi| ad.get_derivative(xi.identifier())).collect()
}
