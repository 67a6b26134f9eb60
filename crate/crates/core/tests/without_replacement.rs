mod common;

use common::{ordered_distinct, random_simplex};
use fedsamp::wor::{combine_gradients, renormalized_distribution, sample_without_replacement};
use fedsamp::{LocalUpdate, LocalUpdateSet, OrderedSelection, RngStream, SimplexPoint};

fn random_locals(rng: &mut RngStream, m: usize, dim: usize) -> (Vec<f64>, LocalUpdateSet) {
    let lambdas = random_simplex(rng, m, 0.0);
    let locals = (0..m)
        .map(|i| {
            let gradient = (0..dim).map(|_| 3.0 * rng.standard_normal()).collect();
            (
                i,
                LocalUpdate {
                    weight: lambdas[i],
                    gradient,
                },
            )
        })
        .collect();
    (lambdas, locals)
}

fn target(locals: &LocalUpdateSet, dim: usize) -> Vec<f64> {
    let mut j = vec![0.0; dim];
    for l in locals.values() {
        for (x, g) in j.iter_mut().zip(&l.gradient) {
            *x += l.weight * g;
        }
    }
    j
}

#[test]
fn ordered_probability_matches_chain_rule() {
    let p = SimplexPoint::new(vec![0.5, 0.3, 0.2]).unwrap();
    let mut rng = RngStream::new(50);
    let n = 100_000;
    let hits = (0..n)
        .filter(|_| sample_without_replacement(&p, 2, &mut rng).unwrap().order() == [0, 1])
        .count();
    assert!((hits as f64 / n as f64 - 0.3).abs() < 0.01);

    let u = SimplexPoint::uniform(2);
    let hits = (0..n)
        .filter(|_| sample_without_replacement(&u, 2, &mut rng).unwrap().order() == [0, 1])
        .count();
    assert!((hits as f64 / n as f64 - 0.5).abs() < 0.01);
}

#[test]
fn step_probabilities_are_renormalized() {
    let p = SimplexPoint::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let mut rng = RngStream::new(51);
    for _ in 0..200 {
        let sel = sample_without_replacement(&p, 3, &mut rng).unwrap();
        for k in 0..3 {
            let expected = renormalized_distribution(&p, &sel.order()[..k]).unwrap();
            assert_eq!(sel.step_probs()[k], expected);
        }
        assert_eq!(OrderedSelection::from_order(&p, sel.order().to_vec()).unwrap(), sel);
    }
}

#[test]
fn unbiased_by_enumeration() {
    let mut rng = RngStream::new(52);
    for case in 0..50 {
        for m in 2..=4 {
            for k in 1..=m.min(3) {
                let dim = 3;
                let p = SimplexPoint::new(random_simplex(&mut rng, m, 0.02)).unwrap();
                let (_, locals) = random_locals(&mut rng, m, dim);
                let j = target(&locals, dim);
                let mut mean = vec![0.0; dim];
                let mut total_prob = 0.0;
                for (order, _, prob) in ordered_distinct(p.probs(), k) {
                    let g = combine_gradients(&OrderedSelection::from_order(&p, order).unwrap(), &locals).unwrap();
                    for (x, v) in mean.iter_mut().zip(&g) {
                        *x += prob * v;
                    }
                    total_prob += prob;
                }
                assert!((total_prob - 1.0).abs() < 1e-12);
                for (x, y) in mean.iter().zip(&j) {
                    assert!(
                        (x - y).abs() <= 1e-12 * y.abs().max(1.0),
                        "case {case} m={m} k={k}: {mean:?} vs {j:?}"
                    );
                }
            }
        }
    }
}
