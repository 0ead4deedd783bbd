use super::{decode_position, normalization_bounds, objective, NormBounds, PsoError, PsoParams};
use crate::jobshop::{Instance, Schedule};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const KEY_VELOCITY_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonalBest {
    pub sequence_keys: Vec<f64>,
    pub speed_position: Vec<f64>,
    pub objective: f64,
}

/// A search point: random keys for the operation order plus a continuous speed coordinate
/// per operation, rounded into `speed_genes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub sequence_keys: Vec<f64>,
    pub speed_position: Vec<f64>,
    pub speed_genes: Vec<usize>,
    pub velocity: Vec<f64>,
    pub speed_velocity: Vec<f64>,
    pub personal_best: PersonalBest,
    pub neighbors: Vec<usize>,
}

impl Particle {
    fn random(rng: &mut ChaCha8Rng, dims: usize, max_speed: usize) -> Self {
        let vmax = max_speed as f64;
        let speed_limit = speed_velocity_limit(max_speed);
        let sequence_keys: Vec<f64> = (0..dims).map(|_| rng.gen::<f64>()).collect();
        let speed_position: Vec<f64> = (0..dims)
            .map(|_| 1.0 + rng.gen::<f64>() * (vmax - 1.0))
            .collect();
        let velocity = (0..dims)
            .map(|_| rng.gen_range(-0.5..=0.5) * KEY_VELOCITY_LIMIT)
            .collect();
        let speed_velocity = (0..dims)
            .map(|_| rng.gen_range(-0.5..=0.5) * speed_limit)
            .collect();
        let speed_genes = genes(&speed_position, max_speed);
        Particle {
            personal_best: PersonalBest {
                sequence_keys: sequence_keys.clone(),
                speed_position: speed_position.clone(),
                objective: f64::INFINITY,
            },
            sequence_keys,
            speed_position,
            speed_genes,
            velocity,
            speed_velocity,
            neighbors: Vec::new(),
        }
    }
}

fn speed_velocity_limit(max_speed: usize) -> f64 {
    ((max_speed as f64 - 1.0) / 2.0).max(0.5)
}

fn genes(position: &[f64], max_speed: usize) -> Vec<usize> {
    position
        .iter()
        .map(|&x| (x.round() as i64).clamp(1, max_speed as i64) as usize)
        .collect()
}

/// Ring topology: the `size` closest indices on either side, nearest first.
fn ring_neighbors(i: usize, swarm: usize, size: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(size);
    let mut d = 1;
    while out.len() < size {
        out.push((i + d) % swarm);
        if out.len() < size {
            out.push((i + swarm - d) % swarm);
        }
        d += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoOutcome {
    pub schedule: Schedule,
    pub objective: f64,
    pub bounds: NormBounds,
    /// Global best objective after each iteration.
    pub best_history: Vec<f64>,
    pub evaluations: usize,
}

/// Runs the swarm and returns the best decoded schedule.
///
/// The first iteration evaluates the random initial swarm; every later one applies
/// `v = w v + c1 r1 (pbest - x) + c2 r2 (nbest - x)` and re-evaluates. A single ChaCha8
/// stream seeded from `params.seed` drives all randomness, so a fixed seed replays exactly.
pub fn pso_run(
    instance: &Instance,
    gamma: f64,
    params: &PsoParams,
) -> Result<PsoOutcome, PsoError> {
    params.validate()?;
    if !(0.0..=1.0).contains(&gamma) {
        return Err(PsoError::Gamma(gamma));
    }
    let bounds = normalization_bounds(instance);
    let dims = instance.num_operations();
    let max_speed = instance.max_speed();
    let vmax = max_speed as f64;
    let speed_limit = speed_velocity_limit(max_speed);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut swarm: Vec<Particle> = (0..params.swarm_size)
        .map(|_| Particle::random(&mut rng, dims, max_speed))
        .collect();
    for (i, p) in swarm.iter_mut().enumerate() {
        p.neighbors = ring_neighbors(i, params.swarm_size, params.neighborhood_size);
    }

    let evaluate = |p: &Particle| -> (Schedule, f64) {
        let s = decode_position(&p.sequence_keys, &p.speed_genes, instance);
        let f = objective(s.makespan_s as f64, s.total_energy.wh(), gamma, bounds);
        (s, f)
    };

    let mut best: Option<(Schedule, f64)> = None;
    let mut best_history = Vec::with_capacity(params.iterations);
    let mut evaluations = 0;

    for iteration in 0..params.iterations {
        if iteration > 0 {
            let snapshot: Vec<(Vec<f64>, Vec<f64>, f64)> = swarm
                .iter()
                .map(|p| {
                    (
                        p.personal_best.sequence_keys.clone(),
                        p.personal_best.speed_position.clone(),
                        p.personal_best.objective,
                    )
                })
                .collect();
            for (i, p) in swarm.iter_mut().enumerate() {
                let leader = std::iter::once(i)
                    .chain(p.neighbors.iter().copied())
                    .min_by(|&a, &b| snapshot[a].2.total_cmp(&snapshot[b].2).then(a.cmp(&b)))
                    .expect("neighborhood includes the particle itself");
                let (nkeys, nspeeds, _) = &snapshot[leader];
                for d in 0..dims {
                    let r1: f64 = rng.gen();
                    let r2: f64 = rng.gen();
                    let v = params.inertia * p.velocity[d]
                        + params.cognitive
                            * r1
                            * (p.personal_best.sequence_keys[d] - p.sequence_keys[d])
                        + params.social * r2 * (nkeys[d] - p.sequence_keys[d]);
                    p.velocity[d] = v.clamp(-KEY_VELOCITY_LIMIT, KEY_VELOCITY_LIMIT);
                    p.sequence_keys[d] = (p.sequence_keys[d] + p.velocity[d]).clamp(0.0, 1.0);

                    let r1: f64 = rng.gen();
                    let r2: f64 = rng.gen();
                    let v = params.inertia * p.speed_velocity[d]
                        + params.cognitive
                            * r1
                            * (p.personal_best.speed_position[d] - p.speed_position[d])
                        + params.social * r2 * (nspeeds[d] - p.speed_position[d]);
                    p.speed_velocity[d] = v.clamp(-speed_limit, speed_limit);
                    p.speed_position[d] =
                        (p.speed_position[d] + p.speed_velocity[d]).clamp(1.0, vmax);
                }
                p.speed_genes = genes(&p.speed_position, max_speed);
            }
        }

        for p in swarm.iter_mut() {
            let (schedule, f) = evaluate(p);
            evaluations += 1;
            if f < p.personal_best.objective {
                p.personal_best = PersonalBest {
                    sequence_keys: p.sequence_keys.clone(),
                    speed_position: p.speed_position.clone(),
                    objective: f,
                };
            }
            if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
                best = Some((schedule, f));
            }
        }
        best_history.push(best.as_ref().map(|(_, f)| *f).unwrap_or(f64::INFINITY));
    }

    let (schedule, objective) = best.expect("at least one particle was evaluated");
    Ok(PsoOutcome {
        schedule,
        objective,
        bounds,
        best_history,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jobshop::{evaluate, generate_instance};

    #[test]
    fn ring_is_symmetric() {
        assert_eq!(ring_neighbors(0, 5, 4), vec![1, 4, 2, 3]);
        assert_eq!(ring_neighbors(2, 30, 3), vec![3, 1, 4]);
        assert!(ring_neighbors(0, 1, 0).is_empty());
    }

    #[test]
    fn single_particle_single_iteration() {
        let inst = generate_instance(2, 3, 3, 1);
        let params = PsoParams {
            swarm_size: 1,
            iterations: 1,
            neighborhood_size: 0,
            seed: 11,
            ..PsoParams::default()
        };
        let out = pso_run(&inst, 0.5, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = Particle::random(&mut rng, inst.num_operations(), inst.max_speed());
        assert_eq!(
            out.schedule,
            decode_position(&p.sequence_keys, &p.speed_genes, &inst)
        );
        assert_eq!(out.evaluations, 1);
    }

    #[test]
    fn deterministic_and_consistent() {
        let inst = generate_instance(3, 5, 3, 2);
        let params = PsoParams {
            iterations: 30,
            seed: 4,
            ..PsoParams::default()
        };
        let a = pso_run(&inst, 0.8, &params).unwrap();
        let b = pso_run(&inst, 0.8, &params).unwrap();
        assert_eq!(a, b);
        let (mk, e) = evaluate(&a.schedule, &inst).unwrap();
        assert_eq!(a.objective, objective(mk as f64, e.wh(), 0.8, a.bounds));
        assert!(a.best_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rejects_bad_gamma() {
        let inst = generate_instance(1, 1, 1, 0);
        assert_eq!(
            pso_run(&inst, 1.5, &PsoParams::default()),
            Err(PsoError::Gamma(1.5))
        );
    }
}
