use super::{Energy, Instance, Operation, SpeedProfile};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded random instance: every job visits each machine once, in a random order.
///
/// At speed 1 a duration is drawn in `[1, 99]` s (raised to at least `max_speed` so the
/// levels stay distinct) and an energy in `[1, 50]` Wh. Faster levels follow
/// `duration(v) = ceil(duration(1) / v)` and `energy(v) = energy(1) * sqrt(v)`, nudged by
/// one unit where rounding would make two adjacent levels equal. Duration therefore strictly
/// decreases and energy strictly increases with speed.
///
/// Panics if any count is zero.
pub fn generate_instance(
    num_machines: usize,
    num_jobs: usize,
    max_speed: usize,
    seed: u64,
) -> Instance {
    assert!(
        num_machines >= 1 && num_jobs >= 1 && max_speed >= 1,
        "instance dimensions must be at least 1"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d_lo = max_speed.max(1) as u64;
    let d_hi = 99u64.max(d_lo);

    let jobs = (0..num_jobs)
        .map(|j| {
            let mut routing: Vec<usize> = (0..num_machines).collect();
            routing.shuffle(&mut rng);
            routing
                .into_iter()
                .enumerate()
                .map(|(k, machine)| {
                    let d1 = rng.gen_range(d_lo..=d_hi);
                    let e1 = rng.gen_range(10u64..=500);
                    Operation {
                        job: j,
                        rank: k,
                        machine,
                        profile: speed_profile(d1, e1, max_speed),
                    }
                })
                .collect()
        })
        .collect();
    Instance::new(num_machines, max_speed, jobs).expect("generator produces valid instances")
}

fn speed_profile(d1: u64, e1_tenths: u64, max_speed: usize) -> Vec<SpeedProfile> {
    let vmax = max_speed as u64;
    let mut out: Vec<SpeedProfile> = Vec::with_capacity(max_speed);
    for v in 1..=vmax {
        let (duration_s, energy) = match out.last() {
            None => (d1, e1_tenths),
            Some(prev) => {
                let d = d1.div_ceil(v).min(prev.duration_s - 1).max(vmax - v + 1);
                let e = ((e1_tenths as f64) * (v as f64).sqrt()).round() as u64;
                (d, e.max(prev.energy.tenths() + 1))
            }
        };
        out.push(SpeedProfile {
            duration_s,
            energy: Energy::from_tenths(energy),
        });
    }
    out
}
