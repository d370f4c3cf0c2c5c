#![allow(dead_code)]

use kea::tensor::{Activation, Matrix, Mlp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every network shape the library builds: agent networks for both
/// environments, distillation networks, and the tanh option.
pub fn architectures() -> Vec<(&'static str, Vec<usize>, Activation)> {
    vec![
        ("gridnav agent", vec![2, 256, 256, 4], Activation::Relu),
        ("gridnav agent tanh", vec![2, 256, 256, 4], Activation::Tanh),
        ("deepsea10 agent", vec![100, 64, 64, 2], Activation::Relu),
        ("deepsea14 agent", vec![196, 64, 64, 2], Activation::Relu),
        ("gridnav rnd", vec![2, 16, 32, 16], Activation::Relu),
        ("deepsea10 rnd", vec![100, 16, 32, 16], Activation::Relu),
        ("small tanh", vec![3, 8, 8, 2], Activation::Tanh),
    ]
}

/// One-hot rows for wide inputs (as DeepSea produces), dense uniform rows otherwise.
pub fn inputs(dim: usize, rows: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut x = Matrix::zeros(rows, dim);
    for r in 0..rows {
        if dim >= 64 {
            let hot = rng.random_range(0..dim);
            x.set(r, hot, 1.0);
        } else {
            for c in 0..dim {
                x.set(r, c, rng.random_range(0.0..1.0));
            }
        }
    }
    x
}

/// `L = Σ c ⊙ f(x)` for a fixed random weighting `c`.
pub fn weighted_loss(net: &Mlp, x: &Matrix, c: &Matrix) -> f64 {
    let y = net.forward_batch(x).unwrap();
    y.as_slice().iter().zip(c.as_slice()).map(|(a, b)| a * b).sum()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// One parameter of a network.
#[derive(Clone, Copy, Debug)]
pub enum Coord {
    Weight { layer: usize, o: usize, i: usize },
    Bias { layer: usize, o: usize },
}

fn get(net: &Mlp, c: Coord) -> f64 {
    match c {
        Coord::Weight { layer, o, i } => net.layers()[layer].weight(o, i),
        Coord::Bias { layer, o } => net.layers()[layer].bias()[o],
    }
}

fn set(net: &mut Mlp, c: Coord, v: f64) {
    match c {
        Coord::Weight { layer, o, i } => net.layers_mut()[layer].set_weight(o, i, v),
        Coord::Bias { layer, o } => net.layers_mut()[layer].bias_mut()[o] = v,
    }
}

/// Every coordinate of small networks; a random subset of `budget` (plus all
/// output biases) for large ones.
pub fn coords(net: &Mlp, budget: usize, rng: &mut ChaCha8Rng) -> Vec<Coord> {
    let mut all = Vec::new();
    if net.num_params() <= budget {
        for (l, layer) in net.layers().iter().enumerate() {
            for o in 0..layer.fan_out() {
                for i in 0..layer.fan_in() {
                    all.push(Coord::Weight { layer: l, o, i });
                }
                all.push(Coord::Bias { layer: l, o });
            }
        }
        return all;
    }
    let last = net.layers().len() - 1;
    for o in 0..net.output_dim() {
        all.push(Coord::Bias { layer: last, o });
    }
    while all.len() < budget {
        let l = rng.random_range(0..net.layers().len());
        let layer = &net.layers()[l];
        let o = rng.random_range(0..layer.fan_out());
        if rng.random_bool(0.1) {
            all.push(Coord::Bias { layer: l, o });
        } else {
            all.push(Coord::Weight {
                layer: l,
                o,
                i: rng.random_range(0..layer.fan_in()),
            });
        }
    }
    all
}

/// Worst relative error between the analytic parameter and input gradients
/// and central differences with step `1e-5`.
pub fn max_gradient_error(net: &Mlp, x: &Matrix, c: &Matrix, coords: &[Coord]) -> f64 {
    const H: f64 = 1e-5;
    let tape = net.forward_tape(x.clone()).unwrap();
    let (grads, dx) = net.backward_tape(&tape, c, true).unwrap();
    let dx = dx.unwrap();
    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    for &k in coords {
        let base = get(net, k);
        set(&mut probe, k, base + H);
        let up = weighted_loss(&probe, x, c);
        set(&mut probe, k, base - H);
        let down = weighted_loss(&probe, x, c);
        set(&mut probe, k, base);
        worst = worst.max(rel_err(get(&grads, k), (up - down) / (2.0 * H)));
    }
    for r in 0..x.rows() {
        for col in 0..x.cols() {
            let mut xp = x.clone();
            xp.set(r, col, x.get(r, col) + H);
            let up = weighted_loss(net, &xp, c);
            xp.set(r, col, x.get(r, col) - H);
            let down = weighted_loss(net, &xp, c);
            worst = worst.max(rel_err(dx.get(r, col), (up - down) / (2.0 * H)));
        }
    }
    worst
}

/// Smallest `|z|` over all hidden pre-activations for the batch `x`.
pub fn min_preactivation(net: &Mlp, x: &Matrix) -> f64 {
    let mut h = x.clone();
    let mut min = f64::INFINITY;
    let hidden = net.layers().len() - 1;
    for layer in &net.layers()[..hidden] {
        let mut z = Matrix::zeros(h.rows(), layer.fan_out());
        for b in 0..h.rows() {
            for o in 0..layer.fan_out() {
                let s = (0..layer.fan_in()).map(|i| h.get(b, i) * layer.weight(o, i)).sum::<f64>() + layer.bias()[o];
                min = min.min(s.abs());
                z.set(b, o, s.max(0.0));
            }
        }
        h = z;
    }
    min
}

/// Runs the check over `nets` random networks of one architecture.
pub fn check_architecture(sizes: &[usize], act: Activation, nets: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..nets {
        let net = Mlp::new(sizes, act, &mut r).unwrap();
        let mut x = inputs(sizes[0], 3, &mut r);
        // a step across a ReLU kink measures neither one-sided slope
        while act == Activation::Relu && min_preactivation(&net, &x) < 1e-4 {
            x = inputs(sizes[0], 3, &mut r);
        }
        let out = *sizes.last().unwrap();
        let mut c = Matrix::zeros(3, out);
        for v in c.as_mut_slice() {
            *v = r.random_range(-1.0..1.0);
        }
        let ks = coords(&net, 400, &mut r);
        worst = worst.max(max_gradient_error(&net, &x, &c, &ks));
    }
    worst
}
