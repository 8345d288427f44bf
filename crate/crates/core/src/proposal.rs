//! Candidate generation around the leader and surrogate screening.
//!
//! Each iteration perturbs the leader `x_best` with `gamma * v`, where `v` is
//! a sparse standard-normal vector, clips the results to the unit cube, and
//! screens them with the two surrogates. The next point to evaluate is drawn
//! from the predicted Pareto front with the same hypercube roulette used for
//! leaders.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::pareto::{pareto_front, Grid, ObjectivePair};
use crate::surrogate::{RbfModel, SurrogateError};

pub const DEFAULT_GAMMA: f64 = 0.2;
pub const DEFAULT_GAMMA_MIN: f64 = 0.2 * 0.015625; // 0.2 * 0.5^6
pub const DEFAULT_GAMMA_MAX: f64 = 0.2;
pub const DEFAULT_SUCCESS_THRESHOLD: u32 = 3;
pub const DEFAULT_FAILURE_THRESHOLD: u32 = 3;

pub fn default_candidates(dims: usize) -> usize {
    100 * dims
}

pub fn default_perturb_prob(dims: usize) -> f64 {
    (20.0 / dims as f64).min(1.0)
}

/// Step-size schedule and candidate settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrsState {
    /// Perturbation scale in unit-cube coordinates.
    pub gamma: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub success_threshold: u32,
    pub failure_threshold: u32,
    pub consec_success: u32,
    pub consec_fail: u32,
    /// Candidates generated per iteration.
    pub candidates: usize,
    /// Probability that a coordinate is perturbed.
    pub perturb_prob: f64,
}

impl SrsState {
    pub fn with_defaults(dims: usize) -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
            gamma_min: DEFAULT_GAMMA_MIN,
            gamma_max: DEFAULT_GAMMA_MAX,
            success_threshold: DEFAULT_SUCCESS_THRESHOLD,
            failure_threshold: DEFAULT_FAILURE_THRESHOLD,
            consec_success: 0,
            consec_fail: 0,
            candidates: default_candidates(dims),
            perturb_prob: default_perturb_prob(dims),
        }
    }

    /// `improved` means the last evaluated point entered the archive.
    /// Enough consecutive successes double gamma, enough consecutive
    /// failures halve it, within `[gamma_min, gamma_max]`.
    pub fn adapt(&mut self, improved: bool) {
        if improved {
            self.consec_fail = 0;
            self.consec_success += 1;
            if self.consec_success >= self.success_threshold {
                self.gamma = (2.0 * self.gamma).min(self.gamma_max);
                self.consec_success = 0;
            }
        } else {
            self.consec_success = 0;
            self.consec_fail += 1;
            if self.consec_fail >= self.failure_threshold {
                self.gamma = (0.5 * self.gamma).max(self.gamma_min);
                self.consec_fail = 0;
            }
        }
    }

    /// `clip(x_best + gamma * v_j)` for `j = 1..candidates`.
    pub fn generate_candidates<R: Rng + ?Sized>(&self, x_best: &[f64], rng: &mut R) -> Vec<Vec<f64>> {
        let m = x_best.len();
        (0..self.candidates)
            .map(|_| {
                let mut step = vec![0.0; m];
                let mut touched = false;
                for s in step.iter_mut() {
                    if rng.random::<f64>() < self.perturb_prob {
                        *s = rng.sample(StandardNormal);
                        touched = true;
                    }
                }
                if !touched && m > 0 {
                    let k = rng.random_range(0..m);
                    step[k] = rng.sample(StandardNormal);
                }
                x_best
                    .iter()
                    .zip(&step)
                    .map(|(x, v)| (x + self.gamma * v).clamp(0.0, 1.0))
                    .collect()
            })
            .collect()
    }
}

/// Index of the candidate to evaluate next, given predicted objectives for
/// every candidate. `None` only for empty input.
pub fn select_from_predictions<R: Rng + ?Sized>(
    predictions: &[ObjectivePair],
    divisions: usize,
    rng: &mut R,
) -> Option<usize> {
    let front = pareto_front(predictions)?;
    let front_preds: Vec<ObjectivePair> = front.iter().map(|&i| predictions[i]).collect();
    let grid = Grid::build(&front_preds, divisions);
    grid.select(rng).map(|k| front[k])
}

/// Predicts both objectives for all candidates and picks one from the
/// predicted front. Returns the index into `candidates`.
pub fn select_next<R: Rng + ?Sized>(
    candidates: &[Vec<f64>],
    model_f1: &RbfModel,
    model_f2: &RbfModel,
    divisions: usize,
    rng: &mut R,
) -> Result<Option<usize>, SurrogateError> {
    let predictions = candidates
        .iter()
        .map(|c| Ok(ObjectivePair::new(model_f1.predict(c)?, model_f2.predict(c)?)))
        .collect::<Result<Vec<_>, SurrogateError>>()?;
    Ok(select_from_predictions(&predictions, divisions, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linear(b: f64, a: f64) -> RbfModel {
        RbfModel::from_parts(vec![], vec![], vec![b], a).unwrap()
    }

    #[test]
    fn zero_gamma_returns_leader() {
        let mut state = SrsState::with_defaults(3);
        state.gamma = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = vec![0.2, 0.5, 0.9];
        let c = state.generate_candidates(&x, &mut rng);
        assert_eq!(c.len(), 300);
        assert!(c.iter().all(|v| *v == x));
    }

    #[test]
    fn upper_bound_clips() {
        let mut state = SrsState::with_defaults(1);
        state.gamma = 0.5;
        state.candidates = 200;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = state.generate_candidates(&[1.0], &mut rng);
        assert!(c.iter().any(|v| v[0] == 1.0));
        assert!(c.iter().all(|v| v[0] <= 1.0 && v[0] >= 0.0));
    }

    #[test]
    fn exact_count_inside_cube() {
        let mut state = SrsState::with_defaults(4);
        state.candidates = 50;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = state.generate_candidates(&[0.0, 1.0, 0.5, 0.01], &mut rng);
        assert_eq!(c.len(), 50);
        assert!(c.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn sparse_perturbation_touches_at_least_one_coordinate() {
        let mut state = SrsState::with_defaults(40);
        assert_eq!(state.perturb_prob, 0.5);
        state.perturb_prob = 1e-9;
        state.candidates = 100;
        let x = vec![0.5; 40];
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for c in state.generate_candidates(&x, &mut rng) {
            let changed = c.iter().zip(&x).filter(|(a, b)| a != b).count();
            assert_eq!(changed, 1);
        }
    }

    #[test]
    fn gamma_schedule() {
        let mut s = SrsState::with_defaults(2);
        s.gamma = 0.1;
        for _ in 0..3 {
            s.adapt(true);
        }
        assert_eq!(s.gamma, 0.2);

        let mut s = SrsState::with_defaults(2);
        s.gamma = 0.1;
        for _ in 0..3 {
            s.adapt(false);
        }
        assert_eq!(s.gamma, 0.05);

        let mut s = SrsState::with_defaults(2);
        s.gamma = 0.1;
        for i in 0..20 {
            s.adapt(i % 2 == 0);
        }
        assert_eq!(s.gamma, 0.1);

        let mut s = SrsState::with_defaults(2);
        for _ in 0..100 {
            s.adapt(false);
        }
        assert_eq!(s.gamma, DEFAULT_GAMMA_MIN);
        assert!((DEFAULT_GAMMA_MIN - 0.003125).abs() < 1e-15);
    }

    #[test]
    fn single_candidate_is_returned() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let got = select_next(&[vec![0.3]], &linear(1.0, 0.0), &linear(-1.0, 0.0), 10, &mut rng)
            .unwrap();
        assert_eq!(got, Some(0));
    }

    #[test]
    fn dominated_candidate_never_chosen() {
        // predictions (0,0) and (1,1)
        let cands = [vec![0.0], vec![1.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let got = select_next(&cands, &linear(1.0, 0.0), &linear(1.0, 0.0), 10, &mut rng)
                .unwrap();
            assert_eq!(got, Some(0));
        }
    }

    #[test]
    fn symmetric_front_is_fair() {
        // predictions (0,1) and (1,0)
        let cands = [vec![0.0], vec![1.0]];
        let (f1, f2) = (linear(1.0, 0.0), linear(-1.0, 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 10_000;
        let first = (0..n)
            .filter(|_| select_next(&cands, &f1, &f2, 10, &mut rng).unwrap() == Some(0))
            .count() as f64;
        let sigma = (0.25 / n as f64).sqrt();
        assert!((first / n as f64 - 0.5).abs() < 3.0 * sigma);
    }

    #[test]
    fn identical_predictions_are_uniform() {
        let cands: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 / 4.0]).collect();
        let flat = linear(0.0, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 10_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            counts[select_next(&cands, &flat, &flat, 10, &mut rng).unwrap().unwrap()] += 1;
        }
        let p = 0.2;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    proptest! {
        #[test]
        fn candidates_stay_in_cube(
            x in prop::collection::vec(0.0f64..=1.0, 1..12),
            gamma in 0.0f64..3.0,
            prob in 0.01f64..=1.0,
            seed in any::<u64>(),
        ) {
            let mut state = SrsState::with_defaults(x.len());
            state.gamma = gamma;
            state.perturb_prob = prob;
            state.candidates = 20;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for c in state.generate_candidates(&x, &mut rng) {
                prop_assert_eq!(c.len(), x.len());
                prop_assert!(c.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }

        #[test]
        fn gamma_stays_in_range(steps in prop::collection::vec(any::<bool>(), 0..200)) {
            let mut s = SrsState::with_defaults(3);
            for improved in steps {
                s.adapt(improved);
                prop_assert!(s.gamma >= s.gamma_min && s.gamma <= s.gamma_max);
                prop_assert!(s.consec_success == 0 || s.consec_fail == 0);
            }
        }

        #[test]
        fn selection_is_a_member(
            preds in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..60),
            seed in any::<u64>(),
        ) {
            let ys: Vec<ObjectivePair> = preds.into_iter().map(ObjectivePair::from).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let i = select_from_predictions(&ys, 10, &mut rng).unwrap();
            prop_assert!(i < ys.len());
            prop_assert!(pareto_front(&ys).unwrap().contains(&i));
        }
    }
}
