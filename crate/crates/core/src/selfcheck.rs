//! Built-in oracle suites: template recurrence against the naive oracle,
//! finite-difference gradient checks, and Q-learning against value
//! iteration.

use rand::Rng as _;

use crate::controller::learn_mdp;
use crate::error::Result;
use crate::image::GrayImage;
use crate::model::{
    adversarial_losses, multimodal_reconstruction, Discriminator, DiscriminatorConfig, Generator,
    GeneratorConfig,
};
use crate::motion::{compute_template, TemplateConfig};
use crate::oracle::{naive_template, TabularMdp};
use crate::rng::{stream_with, Rng, Stream};
use crate::tensor::gradcheck::{check_gradients, GradCheckReport};
use crate::tensor::{Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {}: {}", self.name, self.detail)
    }
}

/// A random frame sequence for the template oracle.
#[derive(Clone, Debug)]
pub struct TemplateCase {
    pub frames: Vec<GrayImage>,
    pub threshold: u8,
    pub delta: f32,
}

/// `side`×`side` frames, 2 to 6 of them, with a random threshold and a
/// real-valued delta. Pixels are either redrawn or kept from the previous
/// frame so both motion and decay paths are exercised.
pub fn random_template_case(rng: &mut Rng, side: usize) -> TemplateCase {
    let len = rng.gen_range(2..=6);
    let mut frames = Vec::with_capacity(len);
    let mut cur: Vec<u8> = (0..side * side).map(|_| rng.gen()).collect();
    frames.push(GrayImage::new(side, side, cur.clone()).expect("sized"));
    for _ in 1..len {
        for v in cur.iter_mut() {
            if rng.gen_bool(0.3) {
                *v = rng.gen();
            }
        }
        frames.push(GrayImage::new(side, side, cur.clone()).expect("sized"));
    }
    TemplateCase {
        frames,
        threshold: rng.gen_range(1..=255),
        delta: rng.gen_range(0.25f32..6.0),
    }
}

/// Checks the recurrence against the naive oracle, the decay bound
/// `tau_final - delta < v <= tau_final` and recency dominance.
pub fn template_suite(seed: u64, cases: usize) -> Result<CheckResult> {
    let mut rng = stream_with(seed, Stream::Check, 1);
    let mut failures = Vec::new();
    for i in 0..cases {
        let case = random_template_case(&mut rng, 8);
        let cfg = TemplateConfig::new(case.threshold, case.delta)?;
        let mu = compute_template(&case.frames, &cfg)?;
        let (oracle, tau) = naive_template(&case.frames, case.threshold, case.delta);
        let exact = mu.tau_final().to_bits() == tau.to_bits()
            && mu
                .values()
                .iter()
                .zip(&oracle)
                .all(|(a, b)| a.to_bits() == b.to_bits());
        if !exact {
            failures.push(format!("case {i}: differs from oracle"));
            continue;
        }
        let floor = mu.tau_final() - mu.delta();
        if mu
            .values()
            .iter()
            .any(|&v| v != 0.0 && !(v > floor && v <= mu.tau_final()))
        {
            failures.push(format!("case {i}: decay bound violated"));
        }
        let n = case.frames.len();
        let last =
            crate::motion::silhouette(&case.frames[n - 2], &case.frames[n - 1], case.threshold)?;
        if last.data().iter().any(|&s| s > 0) {
            let max = mu.values().iter().cloned().fold(0.0f32, f32::max);
            let dominant = mu
                .values()
                .iter()
                .zip(last.data())
                .all(|(&v, &s)| (v == max) == (s > 0));
            if !dominant {
                failures.push(format!("case {i}: recency dominance violated"));
            }
        }
    }
    Ok(CheckResult {
        name: "motion template oracle".into(),
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("{cases} cases exact, bounds hold")
        } else {
            failures.join("; ")
        },
    })
}

/// Magnitudes in [0.1, 1) with random signs, away from the kinks of abs and
/// the rectifiers at zero.
fn signed(rng: &mut Rng, shape: &[usize]) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let v: f64 = rng.gen_range(0.1..1.0);
            if rng.gen_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("sized")
}

/// Image-like values in [0.05, 0.95).
fn unit(rng: &mut Rng, shape: &[usize]) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.gen_range(0.05..0.95)).collect(),
    )
    .expect("sized")
}

pub const GRAD_REL_TOL: f64 = 1e-3;
/// Step and absolute floor for single ops.
pub const OP_STEP: f64 = 1e-3;
pub const OP_FLOOR: f64 = 1e-6;
/// Model-level checks use a small step so no rectifier or abs kink is
/// crossed. Gradients below the floor are compared absolutely: at this step
/// rounding in an O(1) loss leaves about 1e-9 of noise.
pub const MODEL_STEP: f64 = 1e-6;
pub const MODEL_FLOOR: f64 = 1e-5;

/// One finite-difference comparison.
#[derive(Clone, Debug)]
pub struct GradientCase {
    pub name: String,
    pub report: GradCheckReport,
}

/// Weighted sum so every output element gets a distinct upstream gradient.
fn weigh<'t>(tape: &'t Tape<f64>, y: Var<'t, f64>, w: &Tensor<f64>) -> Result<Var<'t, f64>> {
    Ok(y.mul(tape.leaf(w.clone()))?.sum())
}

type OpFn = for<'t> fn(&[Var<'t, f64>]) -> Result<Var<'t, f64>>;

/// Every differentiable op: input shapes and the op's output. Outputs that
/// are not scalar get weighed by a random tensor.
fn op_table() -> Vec<(&'static str, Vec<Vec<usize>>, OpFn)> {
    vec![
        ("add", vec![vec![2, 3], vec![2, 3]], |v| v[0].add(v[1])),
        ("sub", vec![vec![2, 3], vec![2, 3]], |v| v[0].sub(v[1])),
        ("mul", vec![vec![2, 3], vec![2, 3]], |v| v[0].mul(v[1])),
        ("scale", vec![vec![5]], |v| Ok(v[0].scale(-0.7))),
        ("affine", vec![vec![5]], |v| Ok(v[0].affine(1.7, -0.3))),
        ("add_bias", vec![vec![2, 3, 2, 2], vec![3]], |v| {
            v[0].add_bias(v[1])
        }),
        ("matmul", vec![vec![3, 4], vec![4, 2]], |v| {
            v[0].matmul(v[1])
        }),
        ("conv2d", vec![vec![2, 2, 5, 5], vec![3, 2, 3, 3]], |v| {
            v[0].conv2d(v[1], 2, 1)
        }),
        ("conv2d_k4", vec![vec![1, 3, 8, 8], vec![2, 3, 4, 4]], |v| {
            v[0].conv2d(v[1], 2, 1)
        }),
        (
            "conv_transpose2d",
            vec![vec![2, 3, 3, 3], vec![3, 2, 4, 4]],
            |v| v[0].conv_transpose2d(v[1], 2, 1),
        ),
        ("leaky_relu", vec![vec![7]], |v| Ok(v[0].leaky_relu(0.2))),
        ("relu", vec![vec![7]], |v| Ok(v[0].relu())),
        ("sigmoid", vec![vec![7]], |v| Ok(v[0].sigmoid())),
        ("tanh", vec![vec![7]], |v| Ok(v[0].tanh())),
        ("abs", vec![vec![7]], |v| Ok(v[0].abs())),
        ("sum", vec![vec![2, 3]], |v| Ok(v[0].sum())),
        ("mean", vec![vec![2, 3]], |v| Ok(v[0].mean())),
        ("abs_sum", vec![vec![2, 3]], |v| Ok(v[0].abs_sum())),
        ("bce_real", vec![vec![2, 3]], |v| {
            Ok(v[0].bce_with_logits(1.0))
        }),
        ("bce_fake", vec![vec![2, 3]], |v| {
            Ok(v[0].bce_with_logits(0.0))
        }),
        ("reshape", vec![vec![2, 3]], |v| v[0].reshape(&[3, 2])),
        ("narrow", vec![vec![2, 4, 3]], |v| v[0].narrow(1, 1, 2)),
        ("concat", vec![vec![2, 1, 3], vec![2, 2, 3]], |v| {
            Var::concat(&[v[0], v[1]], 1)
        }),
        ("instance_norm", vec![vec![2, 3, 3, 4]], |v| {
            v[0].instance_norm(1e-5)
        }),
        ("mean_abs_diff", vec![vec![2, 3], vec![2, 3]], |v| {
            v[0].mean_abs_diff(v[1])
        }),
    ]
}

/// Checks every op on inputs drawn from `seed`.
pub fn op_gradient_cases(seed: u64) -> Result<Vec<GradientCase>> {
    op_table()
        .into_iter()
        .enumerate()
        .map(|(i, (name, shapes, f))| {
            let mut rng = stream_with(seed, Stream::Check, 100 + i as u64);
            let inputs: Vec<_> = shapes.iter().map(|s| signed(&mut rng, s)).collect();
            let out_shape = {
                let tape = Tape::new();
                let vars: Vec<_> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
                f(&vars)?.shape()
            };
            let weights = signed(&mut rng, &out_shape);
            let scalar = out_shape.iter().product::<usize>() == 1;
            let report = check_gradients(
                |tape, vars| {
                    let y = f(vars)?;
                    if scalar {
                        Ok(y)
                    } else {
                        weigh(tape, y, &weights)
                    }
                },
                &inputs,
                OP_STEP,
                OP_FLOOR,
            )?;
            Ok(GradientCase {
                name: name.to_string(),
                report,
            })
        })
        .collect()
}

const TINY_RES: usize = 16;

fn tiny_models(seed: u64) -> Result<(Generator<f64>, Discriminator<f64>)> {
    let g = Generator::<f64>::new(
        GeneratorConfig {
            heads: 2,
            base_channels: 2,
            resolution: TINY_RES,
        },
        &mut stream_with(seed, Stream::Init, 0),
    )?;
    let d = Discriminator::<f64>::new(
        DiscriminatorConfig {
            base_channels: 2,
            resolution: TINY_RES,
        },
        &mut stream_with(seed, Stream::Init, 1),
    )?;
    Ok((g, d))
}

/// Total generator loss (adversarial terms plus weighted min-over-heads
/// reconstruction) with respect to every generator parameter.
pub fn generator_gradient_case(seed: u64) -> Result<GradientCase> {
    let (g, d) = tiny_models(seed)?;
    let mut rng = stream_with(seed, Stream::Check, 200);
    let frame = unit(&mut rng, &[2, 1, TINY_RES, TINY_RES]);
    let truth = unit(&mut rng, &[2, 1, TINY_RES, TINY_RES]);
    let report = check_gradients(
        |tape, vars| {
            let x = tape.leaf(frame.clone());
            let y = tape.leaf(truth.clone());
            let dp = d.params().bind(tape);
            let fakes = g.forward(vars, x)?;
            let adv = adversarial_losses(&d, &dp, x, y, fakes)?;
            let rec = multimodal_reconstruction(fakes, y)?;
            let mut total = rec.loss.scale(10.0);
            for a in adv.g_adv {
                total = total.add(a)?;
            }
            Ok(total)
        },
        g.params().tensors(),
        MODEL_STEP,
        MODEL_FLOOR,
    )?;
    Ok(GradientCase {
        name: "generator loss".into(),
        report,
    })
}

/// Discriminator loss with respect to every discriminator parameter.
pub fn discriminator_gradient_case(seed: u64) -> Result<GradientCase> {
    let (g, d) = tiny_models(seed)?;
    let mut rng = stream_with(seed, Stream::Check, 201);
    let frame = unit(&mut rng, &[2, 1, TINY_RES, TINY_RES]);
    let truth = unit(&mut rng, &[2, 1, TINY_RES, TINY_RES]);
    let fakes = g.predict(&frame)?;
    let report = check_gradients(
        |tape, vars| {
            let x = tape.leaf(frame.clone());
            let y = tape.leaf(truth.clone());
            let f = tape.leaf(fakes.clone());
            Ok(adversarial_losses(&d, vars, x, y, f)?.d_loss)
        },
        d.params().tensors(),
        MODEL_STEP,
        MODEL_FLOOR,
    )?;
    Ok(GradientCase {
        name: "discriminator loss".into(),
        report,
    })
}

/// Every op plus both model losses.
pub fn gradient_cases(seed: u64) -> Result<Vec<GradientCase>> {
    let mut cases = op_gradient_cases(seed)?;
    cases.push(generator_gradient_case(seed)?);
    cases.push(discriminator_gradient_case(seed)?);
    Ok(cases)
}

/// Finite-difference checks of every op and both model losses.
pub fn gradient_suite(seed: u64) -> Result<CheckResult> {
    let cases = gradient_cases(seed)?;
    let worst = cases
        .iter()
        .max_by(|a, b| a.report.max_rel_err.total_cmp(&b.report.max_rel_err))
        .expect("non-empty");
    let failed: Vec<&str> = cases
        .iter()
        .filter(|c| !c.report.passed(GRAD_REL_TOL))
        .map(|c| c.name.as_str())
        .collect();
    Ok(CheckResult {
        name: "gradient checks".into(),
        passed: failed.is_empty(),
        detail: format!(
            "{} cases, max relative error {:.2e} in {} (tolerance {GRAD_REL_TOL:.0e}){}",
            cases.len(),
            worst.report.max_rel_err,
            worst.name,
            if failed.is_empty() {
                String::new()
            } else {
                format!(", failed: {}", failed.join(", "))
            }
        ),
    })
}

/// Three small deterministic MDPs: a chain, a loop with a trap and a
/// branching maze.
pub fn reference_mdps() -> Vec<TabularMdp> {
    let chain = TabularMdp {
        next: vec![vec![Some(1)], vec![Some(2)], vec![None]],
        reward: vec![vec![0.0], vec![0.0], vec![1.0]],
    };
    let trap = TabularMdp {
        next: vec![
            vec![Some(1), Some(2)],
            vec![Some(0), Some(3)],
            vec![Some(2), Some(3)],
            vec![None, Some(0)],
        ],
        reward: vec![
            vec![0.0, -0.5],
            vec![0.2, 0.0],
            vec![-1.0, 0.5],
            vec![2.0, 0.1],
        ],
    };
    let states: usize = 10;
    let maze = TabularMdp {
        next: (0..states)
            .map(|s| {
                vec![
                    if s + 1 < states { Some(s + 1) } else { None },
                    Some((s * 3 + 1) % states),
                    Some(s.saturating_sub(2)),
                ]
            })
            .collect(),
        reward: (0..states)
            .map(|s| {
                vec![
                    if s + 1 == states { 5.0 } else { -0.1 },
                    (s % 3) as f64 * 0.3 - 0.2,
                    0.05 * s as f64,
                ]
            })
            .collect(),
    };
    vec![chain, trap, maze]
}

/// Q-learning sweeps against value iteration on [`reference_mdps`].
pub fn qlearning_suite() -> Result<CheckResult> {
    const GAMMA: f64 = 0.9;
    let mut worst = 0.0f64;
    for mdp in reference_mdps() {
        let oracle = mdp.value_iteration(GAMMA, 1e-12);
        let learned = learn_mdp(&mdp, 0.5, GAMMA, 1000)?;
        for (a, b) in learned.iter().flatten().zip(oracle.iter().flatten()) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(CheckResult {
        name: "q-learning oracle".into(),
        passed: worst <= 1e-3,
        detail: format!("max |Q - Q*| = {worst:.2e}"),
    })
}

/// Every suite, in a fixed order.
pub fn run_all(seed: u64) -> Result<Vec<CheckResult>> {
    Ok(vec![
        template_suite(seed, 200)?,
        gradient_suite(seed)?,
        qlearning_suite()?,
    ])
}
