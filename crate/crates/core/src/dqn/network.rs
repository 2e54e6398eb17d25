//! Two-layer value network: `q = sigmoid(W2 · selu(W1 s + b1) + b2)`,
//! with hand-written backpropagation for the squared TD error.

use rand::Rng as _;

use super::DqnError;
use crate::env::Transition;
use crate::seed::Rng;

pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_2;
pub const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;

pub fn selu(z: f64) -> f64 {
    if z > 0.0 {
        SELU_LAMBDA * z
    } else {
        SELU_LAMBDA * SELU_ALPHA * (z.exp() - 1.0)
    }
}

fn selu_grad(z: f64) -> f64 {
    if z > 0.0 {
        SELU_LAMBDA
    } else {
        SELU_LAMBDA * SELU_ALPHA * z.exp()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Layer sizes `(inputs, hidden, outputs)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub n_in: usize,
    pub n_hidden: usize,
    pub n_out: usize,
}

impl Shape {
    pub const fn new(n_in: usize, n_hidden: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_hidden,
            n_out,
        }
    }

    pub fn n_params(&self) -> usize {
        self.n_hidden * self.n_in + self.n_hidden + self.n_out * self.n_hidden + self.n_out
    }
}

/// Weights and biases. `w1` is `n_hidden × n_in` and `w2` is
/// `n_out × n_hidden`, both row-major. Also used to hold gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    shape: Shape,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

struct Activations {
    z1: Vec<f64>,
    h: Vec<f64>,
    q: Vec<f64>,
}

impl NetworkParams {
    pub fn zeros(shape: Shape) -> Self {
        Self {
            shape,
            w1: vec![0.0; shape.n_hidden * shape.n_in],
            b1: vec![0.0; shape.n_hidden],
            w2: vec![0.0; shape.n_out * shape.n_hidden],
            b2: vec![0.0; shape.n_out],
        }
    }

    /// Uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot(shape: Shape, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(shape);
        let a1 = (6.0 / (shape.n_in + shape.n_hidden) as f64).sqrt();
        let a2 = (6.0 / (shape.n_hidden + shape.n_out) as f64).sqrt();
        p.w1.iter_mut().for_each(|w| *w = rng.random_range(-a1..a1));
        p.w2.iter_mut().for_each(|w| *w = rng.random_range(-a2..a2));
        p
    }

    /// Assembles parameters from a flat `[w1, b1, w2, b2]` vector.
    pub fn from_flat(shape: Shape, flat: &[f64]) -> Result<Self, DqnError> {
        if flat.len() != shape.n_params() {
            return Err(DqnError::ParamCount {
                expected: shape.n_params(),
                got: flat.len(),
            });
        }
        let mut p = Self::zeros(shape);
        let mut it = flat.iter().copied();
        for slot in p.params_mut() {
            *slot = it.next().expect("length checked");
        }
        Ok(p)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.params().copied().collect()
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|v| v.is_finite())
    }

    fn activations(&self, s: &[f64]) -> Activations {
        let Shape { n_in, n_hidden, n_out } = self.shape;
        let z1: Vec<f64> = (0..n_hidden)
            .map(|j| {
                let row = &self.w1[j * n_in..(j + 1) * n_in];
                self.b1[j] + row.iter().zip(s).map(|(w, x)| w * x).sum::<f64>()
            })
            .collect();
        let h: Vec<f64> = z1.iter().map(|&z| selu(z)).collect();
        let q = (0..n_out)
            .map(|a| {
                let row = &self.w2[a * n_hidden..(a + 1) * n_hidden];
                sigmoid(self.b2[a] + row.iter().zip(&h).map(|(w, x)| w * x).sum::<f64>())
            })
            .collect();
        Activations { z1, h, q }
    }

    /// Action values; every entry lies in (0, 1).
    pub fn forward(&self, s: &[f64]) -> Result<Vec<f64>, DqnError> {
        if s.len() != self.shape.n_in {
            return Err(DqnError::InputLength {
                expected: self.shape.n_in,
                got: s.len(),
            });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(DqnError::NonFiniteInput);
        }
        Ok(self.activations(s).q)
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// Uniform random action with probability `explore_rate`, else greedy.
pub fn act_eps_greedy(q: &[f64], explore_rate: f64, rng: &mut Rng) -> usize {
    if explore_rate > 0.0 && rng.random::<f64>() < explore_rate {
        rng.random_range(0..q.len())
    } else {
        argmax(q)
    }
}

/// Double-DQN target: the online network picks the next action and the
/// target network values it. Terminal transitions do not bootstrap.
pub fn td_target(
    tr: &Transition,
    online: &NetworkParams,
    target: &NetworkParams,
    discount: f64,
) -> Result<f64, DqnError> {
    if tr.terminal || discount == 0.0 {
        return Ok(tr.r);
    }
    let next = online.forward(tr.s_next.as_slice())?;
    let a = argmax(&next);
    let value = target.forward(tr.s_next.as_slice())?[a];
    Ok(tr.r + discount * value)
}

/// A regression sample: input, taken action, fixed target.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub input: &'a [f64],
    pub action: usize,
    pub target: f64,
}

/// Mean squared error between fixed targets and the taken-action
/// outputs, with its gradient over every parameter.
pub fn loss_and_grad_samples(
    samples: &[Sample<'_>],
    theta: &NetworkParams,
) -> Result<(f64, NetworkParams), DqnError> {
    if samples.is_empty() {
        return Err(DqnError::EmptyBatch);
    }
    let Shape { n_in, n_hidden, .. } = theta.shape;
    let scale = 1.0 / samples.len() as f64;
    let mut grad = NetworkParams::zeros(theta.shape);
    let mut loss = 0.0;
    let mut dz1 = vec![0.0; n_hidden];
    for sample in samples {
        if sample.input.len() != n_in {
            return Err(DqnError::InputLength {
                expected: n_in,
                got: sample.input.len(),
            });
        }
        let act = theta.activations(sample.input);
        let a = sample.action;
        let q = act.q[a];
        let err = sample.target - q;
        loss += err * err * scale;

        let dz2 = -2.0 * err * scale * q * (1.0 - q);
        grad.b2[a] += dz2;
        let w2_row = &theta.w2[a * n_hidden..(a + 1) * n_hidden];
        let g2_row = &mut grad.w2[a * n_hidden..(a + 1) * n_hidden];
        for j in 0..n_hidden {
            g2_row[j] += dz2 * act.h[j];
            dz1[j] = dz2 * w2_row[j] * selu_grad(act.z1[j]);
        }
        for (j, &d) in dz1.iter().enumerate() {
            grad.b1[j] += d;
            let g1_row = &mut grad.w1[j * n_in..(j + 1) * n_in];
            for (g, x) in g1_row.iter_mut().zip(sample.input) {
                *g += d * x;
            }
        }
    }
    Ok((loss, grad))
}

/// TD loss over a batch of transitions; targets are held constant.
pub fn loss_and_grad(
    batch: &[&Transition],
    online: &NetworkParams,
    target: &NetworkParams,
    discount: f64,
) -> Result<(f64, NetworkParams), DqnError> {
    let ys = batch
        .iter()
        .map(|tr| td_target(tr, online, target, discount))
        .collect::<Result<Vec<_>, _>>()?;
    let samples: Vec<Sample<'_>> = batch
        .iter()
        .zip(&ys)
        .map(|(tr, &y)| Sample {
            input: tr.s.as_slice(),
            action: tr.a,
            target: y,
        })
        .collect();
    loss_and_grad_samples(&samples, online)
}

/// `θ ← θ - η ∇θ`.
pub fn sgd_step(theta: &mut NetworkParams, grad: &NetworkParams, lr: f64) {
    debug_assert_eq!(theta.shape, grad.shape);
    for (p, g) in theta.params_mut().zip(grad.params()) {
        *p -= lr * g;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::StateVector;
    use crate::seed;

    const SHAPE: Shape = Shape::new(10, 64, 11);

    #[test]
    fn zero_network_outputs_half() {
        let q = NetworkParams::zeros(SHAPE).forward(&[0.3; 10]).unwrap();
        assert_eq!(q, vec![0.5; 11]);
    }

    #[test]
    fn outputs_strictly_inside_unit_interval() {
        let mut rng = seed::rng(0);
        for _ in 0..20 {
            let theta = NetworkParams::glorot(SHAPE, &mut rng);
            let s: Vec<f64> = (0..10).map(|_| rng.random_range(-5.0..5.0)).collect();
            for q in theta.forward(&s).unwrap() {
                assert!(q > 0.0 && q < 1.0);
            }
        }
    }

    #[test]
    fn toy_forward_and_loss() {
        let shape = Shape::new(1, 1, 1);
        let theta = NetworkParams::from_flat(shape, &[1.0, 0.0, 1.0, 0.0]).unwrap();
        let q = theta.forward(&[1.0]).unwrap()[0];
        assert!((q - 0.7409).abs() < 1e-4, "{q}");
        assert!((q - sigmoid(SELU_LAMBDA)).abs() < 1e-15);
        let input = [1.0];
        let (loss, _) = loss_and_grad_samples(
            &[Sample {
                input: &input,
                action: 0,
                target: 1.0,
            }],
            &theta,
        )
        .unwrap();
        assert!((loss - 0.0671).abs() < 1e-4, "{loss}");
    }

    #[test]
    fn exact_prediction_has_zero_loss_and_gradient() {
        let mut rng = seed::rng(5);
        let theta = NetworkParams::glorot(SHAPE, &mut rng);
        let s = [0.1; 10];
        let q = theta.forward(&s).unwrap();
        let (loss, grad) = loss_and_grad_samples(
            &[Sample {
                input: &s,
                action: 4,
                target: q[4],
            }],
            &theta,
        )
        .unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.params().all(|&g| g == 0.0));
    }

    #[test]
    fn forward_rejects_bad_input() {
        let theta = NetworkParams::zeros(SHAPE);
        assert!(matches!(theta.forward(&[f64::NAN; 10]), Err(DqnError::NonFiniteInput)));
        assert!(matches!(theta.forward(&[0.0; 3]), Err(DqnError::InputLength { .. })));
        assert!(matches!(
            loss_and_grad_samples(&[], &theta),
            Err(DqnError::EmptyBatch)
        ));
    }

    #[test]
    fn greedy_selection() {
        let mut rng = seed::rng(1);
        let mut q = vec![0.1; 11];
        q[7] = 0.9;
        assert_eq!(act_eps_greedy(&q, 0.0, &mut rng), 7);
        assert_eq!(act_eps_greedy(&[0.5; 11], 0.0, &mut rng), 0);
        assert_eq!(argmax(&[0.2, 0.7, 0.7]), 1);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut rng = seed::rng(2);
        let q = [0.5; 11];
        let mut counts = [0usize; 11];
        let draws = 10_000;
        for _ in 0..draws {
            counts[act_eps_greedy(&q, 1.0, &mut rng)] += 1;
        }
        let expected = draws as f64 / 11.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 10 degrees of freedom, 0.999 quantile
        assert!(chi2 < 29.59, "chi2 = {chi2}");
    }

    fn transition(r: f64, terminal: bool) -> Transition {
        Transition {
            s: StateVector([0.2; 10]),
            a: 3,
            r,
            s_next: StateVector([0.4; 10]),
            terminal,
        }
    }

    #[test]
    fn td_target_examples() {
        let mut rng = seed::rng(3);
        let online = NetworkParams::glorot(SHAPE, &mut rng);
        let target = NetworkParams::glorot(SHAPE, &mut rng);
        assert_eq!(td_target(&transition(0.25, true), &online, &target, 1.0).unwrap(), 0.25);
        assert_eq!(td_target(&transition(0.25, false), &online, &target, 0.0).unwrap(), 0.25);

        // online prefers index 3, target values it at 0.5 (b2 = 0, W2 row = 0)
        let mut online = NetworkParams::zeros(SHAPE);
        online.b2[3] = 2.0;
        let mut target = NetworkParams::glorot(SHAPE, &mut rng);
        target.w2[3 * 64..4 * 64].iter_mut().for_each(|w| *w = 0.0);
        target.b2[3] = 0.0;
        let y = td_target(&transition(0.25, false), &online, &target, 1.0).unwrap();
        assert!((y - 0.75).abs() < 1e-15);
    }

    #[test]
    fn double_target_reduces_to_max_when_networks_match() {
        let mut rng = seed::rng(4);
        let theta = NetworkParams::glorot(SHAPE, &mut rng);
        let tr = transition(0.1, false);
        let q_next = theta.forward(tr.s_next.as_slice()).unwrap();
        let max_q = q_next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let y = td_target(&tr, &theta, &theta, 0.9).unwrap();
        assert_eq!(y, 0.1 + 0.9 * max_q);
    }

    #[test]
    fn sgd_examples() {
        let shape = Shape::new(1, 1, 1);
        let mut theta = NetworkParams::from_flat(shape, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let grad = NetworkParams::from_flat(shape, &[2.0, 0.0, 0.0, 0.0]).unwrap();
        sgd_step(&mut theta, &grad, 0.1);
        assert!((theta.w1[0] - 0.8).abs() < 1e-15);
        sgd_step(&mut theta, &grad, 0.1);
        assert!((theta.w1[0] - 0.6).abs() < 1e-15);
        let before = theta.clone();
        sgd_step(&mut theta, &NetworkParams::zeros(shape), 0.1);
        assert_eq!(theta, before);
    }

    #[test]
    fn flat_roundtrip() {
        let mut rng = seed::rng(6);
        let theta = NetworkParams::glorot(SHAPE, &mut rng);
        assert_eq!(theta.to_flat().len(), SHAPE.n_params());
        let back = NetworkParams::from_flat(SHAPE, &theta.to_flat()).unwrap();
        assert_eq!(back, theta);
        assert!(NetworkParams::from_flat(SHAPE, &[0.0; 3]).is_err());
    }

    #[test]
    fn glorot_bounds_and_zero_bias() {
        let mut rng = seed::rng(8);
        let theta = NetworkParams::glorot(SHAPE, &mut rng);
        let a1 = (6.0 / 74.0_f64).sqrt();
        let a2 = (6.0 / 75.0_f64).sqrt();
        assert!(theta.w1.iter().all(|w| w.abs() <= a1));
        assert!(theta.w2.iter().all(|w| w.abs() <= a2));
        assert!(theta.b1.iter().chain(&theta.b2).all(|&b| b == 0.0));
    }

    /// Loss evaluated by forward passes only, for the finite-difference oracle.
    fn forward_loss(samples: &[(Vec<f64>, usize, f64)], theta: &NetworkParams) -> f64 {
        samples
            .iter()
            .map(|(s, a, y)| (y - theta.forward(s).unwrap()[*a]).powi(2))
            .sum::<f64>()
            / samples.len() as f64
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = seed::rng(11);
        let shape = Shape::new(10, 16, 11);
        let h = 1e-5;
        for _ in 0..5 {
            let mut theta = NetworkParams::glorot(shape, &mut rng);
            theta.b1.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
            let samples: Vec<(Vec<f64>, usize, f64)> = (0..6)
                .map(|_| {
                    let s = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
                    (s, rng.random_range(0..11), rng.random::<f64>())
                })
                .collect();
            let refs: Vec<Sample<'_>> = samples
                .iter()
                .map(|(s, a, y)| Sample { input: s, action: *a, target: *y })
                .collect();
            let (_, grad) = loss_and_grad_samples(&refs, &theta).unwrap();
            let analytic = grad.to_flat();
            let flat = theta.to_flat();
            for (k, &g) in analytic.iter().enumerate() {
                let mut plus = flat.clone();
                plus[k] += h;
                let mut minus = flat.clone();
                minus[k] -= h;
                let lp = forward_loss(&samples, &NetworkParams::from_flat(shape, &plus).unwrap());
                let lm = forward_loss(&samples, &NetworkParams::from_flat(shape, &minus).unwrap());
                let numeric = (lp - lm) / (2.0 * h);
                let rel = (g - numeric).abs() / g.abs().max(numeric.abs()).max(1e-8);
                assert!(rel < 1e-4, "param {k}: analytic {g}, numeric {numeric}");
            }
        }
    }

    #[test]
    fn overfits_single_sample() {
        let mut rng = seed::rng(12);
        let mut theta = NetworkParams::glorot(SHAPE, &mut rng);
        let s: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
        let sample = [Sample { input: &s, action: 2, target: 0.9 }];
        let mut loss = f64::INFINITY;
        for _ in 0..2000 {
            let (l, g) = loss_and_grad_samples(&sample, &theta).unwrap();
            loss = l;
            if loss < 1e-4 {
                break;
            }
            sgd_step(&mut theta, &g, 1e-2);
        }
        assert!(loss < 1e-4, "loss {loss}");
    }
}
