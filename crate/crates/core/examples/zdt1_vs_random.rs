//! Compares MO-SRS against uniform random search on 10-D ZDT1.

use mosrs::evaluator::{zdt1, EvalError};
use mosrs::optimizer::{run, RunConfig};
use mosrs::pareto::{hypervolume, ObjectivePair};
use mosrs::space::SearchSpace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let space = SearchSpace::unit_box(10, 0.0, 1.0).unwrap();
    let reference = ObjectivePair::new(1.1, 10.0);
    let mut wins = 0;
    for seed in 0..10u64 {
        let mut eval = |x: &[f64]| -> Result<ObjectivePair, EvalError> { Ok(zdt1(x).unwrap()) };
        let config = RunConfig {
            budget: 100,
            n0: Some(20),
            seed,
            ..Default::default()
        };
        let result = run(&space, &mut eval, &config).unwrap();
        let hv = hypervolume(&result.archive.objectives(), reference);

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let random: Vec<ObjectivePair> = (0..100)
            .map(|_| zdt1(&(0..10).map(|_| rng.random()).collect::<Vec<f64>>()).unwrap())
            .collect();
        let hv_random = hypervolume(&random, reference);
        if hv > hv_random {
            wins += 1;
        }
        println!("seed {seed}: mo-srs {hv:.4} random {hv_random:.4} archive {}", result.archive.len());
    }
    println!("mo-srs wins {wins}/10");
}
