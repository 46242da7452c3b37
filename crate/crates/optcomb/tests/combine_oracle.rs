//! Hinge-LP solutions vs a dense simplex grid-search oracle on random small
//! instances with label-valued (±1) scores. With ±1 entries and margin 0.5,
//! every vertex of the LP projects onto multiples of 1/8 in weight space, so
//! the 10⁻³-step grid contains the exact optimum and the comparison is tight.

use optcomb::combine::{build_lp_single, solve_weights_lp, LpOptions};
use optcomb::Matrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn hinge_objective(scores: &Matrix, targets: &[i8], w: &[f64], margin: f64) -> f64 {
    (0..scores.rows())
        .map(|i| {
            let z: f64 = scores.row(i).iter().zip(w).map(|(a, b)| a * b).sum();
            (margin - f64::from(targets[i]) * z).max(0.0)
        })
        .sum()
}

fn grid_oracle(scores: &Matrix, targets: &[i8], margin: f64) -> f64 {
    let steps = 1000usize;
    let mut best = f64::INFINITY;
    match scores.cols() {
        1 => best = hinge_objective(scores, targets, &[1.0], margin),
        2 => {
            for a in 0..=steps {
                let w1 = a as f64 / steps as f64;
                best = best.min(hinge_objective(scores, targets, &[w1, 1.0 - w1], margin));
            }
        }
        3 => {
            for a in 0..=steps {
                let w1 = a as f64 / steps as f64;
                for b in 0..=(steps - a) {
                    let w2 = b as f64 / steps as f64;
                    let w = [w1, w2, 1.0 - w1 - w2];
                    best = best.min(hinge_objective(scores, targets, &w, margin));
                }
            }
        }
        k => panic!("oracle supports K <= 3, got {k}"),
    }
    best
}

#[test]
fn lp_matches_simplex_grid_oracle_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..200 {
        let n = rng.gen_range(1..=6);
        let k = rng.gen_range(1..=3);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect())
            .collect();
        let targets: Vec<i8> = (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
        let scores = Matrix::from_rows(&rows);

        let lp = build_lp_single(&scores, &targets, LpOptions::default()).unwrap();
        let (w, _) = solve_weights_lp(&lp).unwrap();
        let oracle = grid_oracle(&scores, &targets, 0.5);

        assert!(
            (w.objective_value - oracle).abs() <= 1e-4,
            "case {case} (N={n}, K={k}): LP {} vs oracle {oracle}",
            w.objective_value
        );
        // The LP optimum can never exceed the best grid point.
        assert!(w.objective_value <= oracle + 1e-9, "case {case}: LP above a feasible point");
    }
}
