#![allow(dead_code)]

use optfolio::seeding;
use optfolio::{Method, OptimizerSpec, OptimizerState, ProblemId, ProblemInstance, Status};
use rand::Rng;

pub fn pid(id: u32) -> ProblemId {
    ProblemId::new(id).unwrap()
}

pub fn spec(method: Method) -> OptimizerSpec {
    OptimizerSpec::new(method)
}

/// Seeded start point, uniform in [-5,5]^dim.
pub fn start_point(seed: u64, dim: usize) -> Vec<f64> {
    let mut rng = seeding::stream(&[seed, 0x5747]);
    (0..dim).map(|_| rng.random_range(-5.0..=5.0)).collect()
}

fn recording_instance(function: u32, dim: usize, instance_seed: u64) -> ProblemInstance {
    let mut inst = ProblemInstance::new(pid(function), dim, instance_seed).unwrap();
    inst.record_points();
    inst
}

/// Evaluation sequence of an uninterrupted loop over `step`.
pub fn reference_sequence(method: Method, function: u32, dim: usize, seed: u64, max_iter: usize) -> Vec<Vec<f64>> {
    let mut inst = recording_instance(function, dim, seed);
    let x0 = start_point(seed, dim);
    let mut state = OptimizerState::init(&spec(method), &mut inst, &x0, seed).unwrap();
    for _ in 0..max_iter {
        if state.status() != Status::Running {
            break;
        }
        state.step(&mut inst).unwrap();
    }
    inst.recorded_points().unwrap().to_vec()
}

/// Same run, but the state is cloned and moved between iterations and every
/// iteration is interleaved with an unrelated run on another instance.
pub fn stepwise_sequence(method: Method, function: u32, dim: usize, seed: u64, max_iter: usize) -> Vec<Vec<f64>> {
    let mut inst = recording_instance(function, dim, seed);
    let x0 = start_point(seed, dim);
    let mut suspended = vec![Box::new(OptimizerState::init(&spec(method), &mut inst, &x0, seed).unwrap())];

    let decoy_method = if method == Method::CMA { Method::NelderMead } else { Method::CMA };
    let mut decoy_inst = ProblemInstance::new(pid(8), dim, seed + 1000).unwrap();
    let decoy_x0 = start_point(seed + 1000, dim);
    let mut decoy = OptimizerState::init(&spec(decoy_method), &mut decoy_inst, &decoy_x0, seed ^ 0xdead).unwrap();

    for _ in 0..max_iter {
        let resumed = suspended.pop().unwrap();
        let mut state = (*resumed).clone();
        drop(resumed);
        if state.status() != Status::Running {
            break;
        }
        state.step(&mut inst).unwrap();
        if decoy.status() == Status::Running {
            decoy.step(&mut decoy_inst).unwrap();
        }
        suspended.push(Box::new(state));
    }
    inst.recorded_points().unwrap().to_vec()
}

pub fn same_points(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(p, q)| p.iter().zip(q).all(|(u, v)| u.to_bits() == v.to_bits()))
}
