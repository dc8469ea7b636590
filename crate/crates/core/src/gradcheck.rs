//! Finite-difference checks for every primitive and for the end-to-end
//! model loss.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{make_pair, ShapeSpec, Surface};
use crate::error::Result;
use crate::model::{forward, Model, ModelConfig, Variant};
use crate::tensor::{grad_check, Array, Graph, IndexArray, NodeId};
use crate::training::total_loss;

pub const TOLERANCE: f64 = 1e-4;
pub const STEP: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    /// Worst relative error over all cases.
    pub error: f64,
    pub cases: usize,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.error < TOLERANCE
    }
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Array {
    Array::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

fn random_shape(rng: &mut ChaCha8Rng, rank: usize) -> Vec<usize> {
    (0..rank).map(|_| rng.gen_range(1..5)).collect()
}

/// `sum(y * w)` for a fixed random `w`, so every output element matters.
fn project(g: &mut Graph, y: NodeId, rng: &mut ChaCha8Rng) -> Result<NodeId> {
    let shape = g.shape(y).to_vec();
    let len = shape.iter().product();
    let w = g.constant(random(rng, &[len]));
    let flat = g.reshape(y, &[len])?;
    let prod = g.mul(flat, w)?;
    g.reduce_sum(prod, 0)
}

type Case = (Array, Box<dyn Fn(&mut Graph, NodeId) -> Result<NodeId>>);

/// One randomized case for `kind`: an input array and a builder applying
/// the primitive with random constant operands.
fn primitive_case(kind: &str, rng: &mut ChaCha8Rng) -> Case {
    let seed = rng.gen::<u64>();
    let rank = rng.gen_range(1..=4);
    let shape = random_shape(rng, rank);
    let axis = rng.gen_range(0..rank);
    let mut local = ChaCha8Rng::seed_from_u64(seed);
    let x = random(&mut local, &shape);
    let build = move |f: Box<dyn Fn(&mut Graph, NodeId, &mut ChaCha8Rng) -> Result<NodeId>>| -> Box<dyn Fn(&mut Graph, NodeId) -> Result<NodeId>> {
        Box::new(move |g: &mut Graph, x: NodeId| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
            let y = f(g, x, &mut rng)?;
            project(g, y, &mut rng)
        })
    };
    let s = shape.clone();
    let builder = match kind {
        "matmul" => {
            let (m, k, n) = (rng.gen_range(1..5), rng.gen_range(1..5), rng.gen_range(1..5));
            let lead_rank = rng.gen_range(0..=2);
            let mut a_shape = random_shape(rng, lead_rank);
            a_shape.extend([m, k]);
            if rng.gen_bool(0.5) {
                // Differentiate the shared right operand.
                let x = random(&mut local, &[k, n]);
                return (
                    x,
                    build(Box::new(move |g, x, rng| {
                        let a = g.constant(random(rng, &a_shape));
                        g.matmul(a, x)
                    })),
                );
            }
            let x = random(&mut local, &a_shape);
            return (
                x,
                build(Box::new(move |g, x, rng| {
                    let b = g.constant(random(rng, &[k, n]));
                    g.matmul(x, b)
                })),
            );
        }
        "add" | "sub" | "mul" => {
            let kind = kind.to_string();
            let small_input = rng.gen_bool(0.5);
            let cut = rng.gen_range(0..s.len());
            let suffix = s[cut..].to_vec();
            let x = if small_input { random(&mut local, &suffix) } else { x };
            return (
                x,
                build(Box::new(move |g, x, rng| {
                    let other = if small_input {
                        random(rng, &s)
                    } else {
                        random(rng, &suffix)
                    };
                    let c = g.constant(other);
                    let (a, b) = if small_input { (c, x) } else { (x, c) };
                    match kind.as_str() {
                        "add" => g.add(a, b),
                        "sub" => g.sub(a, b),
                        _ => g.mul(a, b),
                    }
                })),
            );
        }
        "concat" => build(Box::new(move |g, x, rng| {
            let mut other = s.clone();
            other[axis] = rng.gen_range(1..4);
            let c = g.constant(random(rng, &other));
            g.concat(&[c, x, x], axis)
        })),
        "relu" => build(Box::new(|g, x, _| g.relu(x))),
        "tanh" => build(Box::new(|g, x, _| g.tanh(x))),
        "softmax" => build(Box::new(move |g, x, _| {
            let y = g.scalar_mul(x, 3.0)?;
            g.softmax(y, axis)
        })),
        "reduce_max" => build(Box::new(move |g, x, _| g.reduce_max(x, axis))),
        "reduce_sum" => build(Box::new(move |g, x, _| g.reduce_sum(x, axis))),
        "reduce_mean" => build(Box::new(move |g, x, _| g.reduce_mean(x, axis))),
        "tile" => {
            let factor = rng.gen_range(1..4);
            build(Box::new(move |g, x, _| g.tile(x, axis, factor)))
        }
        "gather" => {
            let extent = s[axis];
            let idx_rank = rng.gen_range(1..=(5 - rank).min(2));
            let idx_shape = random_shape(rng, idx_rank);
            let len = idx_shape.iter().product();
            let idx = IndexArray::new(idx_shape, (0..len).map(|_| rng.gen_range(0..extent)).collect())
                .expect("consistent index shape");
            build(Box::new(move |g, x, _| g.gather(x, idx.clone(), axis)))
        }
        "reshape" => {
            let len: usize = s.iter().product();
            build(Box::new(move |g, x, _| g.reshape(x, &[1, len])))
        }
        "transpose" => {
            let mut perm: Vec<usize> = (0..rank).collect();
            perm.shuffle(rng);
            build(Box::new(move |g, x, _| g.transpose(x, &perm)))
        }
        "scalar_mul" => {
            let f = rng.gen_range(-3.0..3.0);
            build(Box::new(move |g, x, _| g.scalar_mul(x, f)))
        }
        other => unreachable!("no case for `{other}`"),
    };
    (x, builder)
}

pub const PRIMITIVES: [&str; 16] = [
    "matmul",
    "add",
    "sub",
    "mul",
    "concat",
    "relu",
    "tanh",
    "softmax",
    "reduce_max",
    "reduce_sum",
    "reduce_mean",
    "tile",
    "gather",
    "reshape",
    "transpose",
    "scalar_mul",
];

/// Every primitive on `cases` random shapes.
pub fn check_primitives(cases: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PRIMITIVES
        .iter()
        .map(|&kind| {
            let mut worst: f64 = 0.0;
            for _ in 0..cases {
                let (x, builder) = primitive_case(kind, &mut rng);
                worst = worst.max(grad_check(builder, &x, STEP)?);
            }
            Ok(CheckResult {
                name: kind.to_string(),
                error: worst,
                cases,
            })
        })
        .collect()
}

/// Configuration of the end-to-end check: a 16-point patch at rate 2.
pub fn composite_config() -> ModelConfig {
    ModelConfig {
        n: 16,
        r: 2,
        c: 16,
        feat_blocks: 2,
        feat_knn: 4,
        k: 4,
        attn_reduction: 4,
        variant: Variant::Full,
    }
}

/// Fresh parameters moved off their special initial values (zero offset
/// head, zero attention scale) so every path carries gradient.
pub fn perturbed_model(cfg: &ModelConfig, seed: u64) -> Result<Model> {
    let mut model = Model::new(cfg.clone(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for (name, value) in model.params.iter_mut() {
        if name.starts_with("refiner.head.1") || name.ends_with(".bias") {
            value.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.3..0.3));
        } else if name == "refiner.global.gamma" {
            value.data_mut()[0] = 0.7;
        }
    }
    Ok(model)
}

/// Total loss through generator, refiner and both Chamfer terms, checked
/// against the input points and then against every parameter tensor.
pub fn check_composite(cfg: &ModelConfig, seed: u64) -> Result<Vec<CheckResult>> {
    let model = perturbed_model(cfg, seed)?;
    let geometry = ShapeSpec::at_origin(Surface::Torus {
        major_radius: 1.0,
        minor_radius: 0.4,
    })?;
    let pair = make_pair(&geometry, cfg.n, cfg.r, 0.0, seed)?;
    let target = pair.target.to_array();
    let lambda = 0.6;
    let loss = |g: &mut Graph, input: NodeId, replaced: Option<(&str, NodeId)>| -> Result<NodeId> {
        let mut bound = model.params.bind_constant(g);
        if let Some((name, id)) = replaced {
            bound.replace(name, id)?;
        }
        let t = g.constant(target.clone());
        let nodes = forward(g, input, &bound, &model.config)?;
        let refined = model.config.variant.has_refiner().then_some(nodes.output);
        Ok(total_loss(g, nodes.coarse, refined, t, lambda)?.total)
    };

    let mut results = vec![CheckResult {
        name: "composite/input".into(),
        error: grad_check(|g, x| loss(g, x, None), &pair.input.to_array(), STEP)?,
        cases: 1,
    }];
    let points = pair.input.to_array();
    for (name, value) in model.params.iter() {
        let error = grad_check(
            |g, x| {
                let input = g.constant(points.clone());
                loss(g, input, Some((name, x)))
            },
            value,
            STEP,
        )?;
        results.push(CheckResult {
            name: format!("composite/{name}"),
            error,
            cases: 1,
        });
    }
    Ok(results)
}

/// The full suite: 20 random cases per primitive plus the composite loss.
pub fn run_suite(seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = check_primitives(20, seed)?;
    out.extend(check_composite(&composite_config(), seed)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitives_pass_on_a_few_cases() {
        for r in check_primitives(3, 11).unwrap() {
            assert!(r.passed(), "{}: {}", r.name, r.error);
        }
    }
}
