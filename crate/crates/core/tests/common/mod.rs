//! Independent oracles shared by the integration suites.
//!
//! Nothing here calls the lattice code: likelihoods are recomputed by
//! enumerating every state path with a separately written Gaussian density.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use suprahmm::features::FeatureSequence;
use suprahmm::hmm::{Gmm, GmmEmission, Hmm2Model, Order, Shape, Topology, Transitions};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_simplex(rng: &mut ChaCha8Rng, support: &[usize], n: usize) -> Vec<f64> {
    let mut row = vec![0.0; n];
    for &k in support {
        row[k] = rng.random_range(0.05..1.0);
    }
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= s);
    row
}

/// Random, non-uniform parameters that respect the topology's zero pattern.
pub fn random_model(topo: Topology, dim: usize, m: usize, seed: u64) -> Hmm2Model {
    let mut r = rng(seed);
    let n = topo.n_states;
    let all: Vec<usize> = (0..n).collect();
    let initial = random_simplex(&mut r, &all, n);
    let matrix: Vec<f64> = (0..n).flat_map(|i| random_simplex(&mut r, &topo.adjacency(i), n)).collect();
    let tensor = match topo.order {
        Order::First => None,
        Order::Second => Some(
            (0..n * n)
                .flat_map(|ij| random_simplex(&mut r, &topo.adjacency(ij % n), n))
                .collect(),
        ),
    };
    let emissions = random_emissions(&mut r, n, dim, m);
    Hmm2Model::new(topo, initial, Transitions { n_states: n, matrix, tensor }, emissions).unwrap()
}

pub fn random_emissions(r: &mut ChaCha8Rng, n: usize, dim: usize, m: usize) -> GmmEmission {
    let all: Vec<usize> = (0..m).collect();
    GmmEmission {
        dim,
        states: (0..n)
            .map(|_| Gmm {
                weights: random_simplex(r, &all, m),
                means: (0..m).map(|_| (0..dim).map(|_| r.random_range(-2.0..2.0)).collect()).collect(),
                variances: (0..m).map(|_| (0..dim).map(|_| r.random_range(0.3..2.0)).collect()).collect(),
            })
            .collect(),
    }
}

pub fn random_sequence(t: usize, dim: usize, seed: u64) -> FeatureSequence {
    let mut r = rng(seed);
    FeatureSequence::new("rand", dim, (0..t * dim).map(|_| r.random_range(-2.5..2.5)).collect()).unwrap()
}

/// Mixture density written out directly in probability space.
pub fn density(g: &Gmm, x: &[f64]) -> f64 {
    g.weights
        .iter()
        .zip(g.means.iter().zip(&g.variances))
        .map(|(w, (mu, var))| {
            let mut p = *w;
            for d in 0..x.len() {
                p *= (-(x[d] - mu[d]).powi(2) / (2.0 * var[d])).exp()
                    / (2.0 * std::f64::consts::PI * var[d]).sqrt();
            }
            p
        })
        .sum()
}

/// Joint probability of one explicit state path and the observations.
pub fn path_probability(model: &Hmm2Model, obs: &FeatureSequence, path: &[usize]) -> f64 {
    let n = model.n_states();
    let tr = &model.transitions;
    let mut p = model.initial[path[0]];
    for t in 1..path.len() {
        p *= match &tr.tensor {
            Some(tensor) if t >= 2 => tensor[(path[t - 2] * n + path[t - 1]) * n + path[t]],
            _ => tr.matrix[path[t - 1] * n + path[t]],
        };
    }
    for (t, &s) in path.iter().enumerate() {
        p *= density(&model.emissions.states[s], obs.frame(t));
    }
    p
}

/// Calls `f` on every length-`t` path over `n` states.
pub fn for_each_path(n: usize, t: usize, mut f: impl FnMut(&[usize])) {
    let mut path = vec![0usize; t];
    loop {
        f(&path);
        let mut pos = t;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            path[pos] += 1;
            if path[pos] < n {
                break;
            }
            path[pos] = 0;
        }
    }
}

pub fn brute_force_log_likelihood(model: &Hmm2Model, obs: &FeatureSequence) -> f64 {
    let mut total = 0.0;
    for_each_path(model.n_states(), obs.len(), |p| total += path_probability(model, obs, p));
    total.ln()
}

pub fn brute_force_best_path(model: &Hmm2Model, obs: &FeatureSequence) -> (Vec<usize>, f64) {
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for_each_path(model.n_states(), obs.len(), |p| {
        let v = path_probability(model, obs, p).ln();
        if v > best.1 {
            best = (p.to_vec(), v);
        }
    });
    best
}

/// An order-2 model whose tensor ignores the oldest state, paired with the
/// order-1 model it reduces to.
pub fn collapsible_pair(n: usize, shape: Shape, dim: usize, seed: u64) -> (Hmm2Model, Hmm2Model) {
    let first_topo = Topology::new(Order::First, shape, n).unwrap();
    let first = random_model(first_topo, dim, 2, seed);
    let tensor: Vec<f64> = (0..n * n)
        .flat_map(|ij| first.transitions.matrix[(ij % n) * n..(ij % n + 1) * n].to_vec())
        .collect();
    let second_topo = Topology::new(Order::Second, shape, n).unwrap();
    let second = Hmm2Model::new(
        second_topo,
        first.initial.clone(),
        Transitions { n_states: n, matrix: first.transitions.matrix.clone(), tensor: Some(tensor) },
        first.emissions.clone(),
    )
    .unwrap();
    (second, first)
}

pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Ground truth for the recovery test: three well separated states and a
/// strongly non-uniform tensor.
pub fn recovery_truth() -> Hmm2Model {
    let topo = Topology::new(Order::Second, Shape::Circular, 3).unwrap();
    let centers = [[0.0, 0.0], [6.0, 0.0], [0.0, 6.0]];
    let emissions = GmmEmission {
        dim: 2,
        states: centers
            .iter()
            .map(|c| Gmm { weights: vec![1.0], means: vec![c.to_vec()], variances: vec![vec![1.0, 1.0]] })
            .collect(),
    };
    let mut tensor = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            // favor continuing in the direction of travel
            let fwd = (2 * j + 3 - i) % 3;
            let mut row = [0.15; 3];
            row[fwd] = 0.7;
            tensor.extend_from_slice(&row);
        }
    }
    let matrix = vec![0.6, 0.2, 0.2, 0.2, 0.6, 0.2, 0.2, 0.2, 0.6];
    Hmm2Model::new(
        topo,
        vec![0.5, 0.3, 0.2],
        Transitions { n_states: 3, matrix, tensor: Some(tensor) },
        emissions,
    )
    .unwrap()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}
