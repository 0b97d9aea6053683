mod common;

use common::{agrees, grid_min};
use gcf_core::{
    gravity, solve_lexicographic, solve_weighted, solve_weighted_disturbed, AllocProblem,
    FeasibleSet, PriorityWeights, Vec3,
};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rvec(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(lo..hi),
        rng.random_range(lo..hi),
        rng.random_range(lo..hi),
    )
}

fn random_set(rng: &mut ChaCha8Rng, ball: bool) -> FeasibleSet {
    if ball {
        FeasibleSet::ball(rng.random_range(2.0..6.0))
    } else {
        let c = Vec3::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-8.0..0.0),
        );
        let h = rvec(rng, 0.5, 3.0);
        FeasibleSet::cube(c - h, c + h)
    }
}

/// Independent targets: `t_g = m g + d_g`, `t_t = m a_d - (d - d_g)` with
/// `d_g` the projection of `d` on gravity.
fn oracle_targets(prob: &AllocProblem) -> (Vec3, Vec3) {
    let g = prob.gravity;
    let d = prob.disturbance.unwrap_or_else(Vec3::zeros);
    let d_g = g * (d.dot(&g) / g.norm_squared());
    (
        prob.mass * g + d_g,
        prob.mass * prob.accel_desired - (d - d_g),
    )
}

/// Checks each lexicographic step against a lattice search given the
/// solver's result for the previous step.
fn lex_agrees(prob: &AllocProblem) -> bool {
    let (tg, tt) = oracle_targets(prob);
    let a = solve_lexicographic(prob).unwrap();
    let step1 = |x: &Vec3| (x + tg).norm_squared();
    let x = grid_min(&prob.set, [true; 3], Vec3::zeros(), &step1).unwrap();
    if !agrees(&-a.f_g_star, &x, &step1) {
        eprintln!("step 1: solver {} oracle {}", -a.f_g_star, x);
        return false;
    }
    let wanted = tt - a.f_g_star;
    // The level objective is flat across the slice; a faint radial term keeps
    // the refinement near the axis.
    let level = grid_min(&prob.set, [true; 3], Vec3::zeros(), &|u| {
        (u.z - wanted.z).powi(2) + 1e-6 * (u.x * u.x + u.y * u.y)
    })
    .unwrap()
    .z;
    if (level - a.f_d.z).abs() > 0.01 + 1e-12 {
        eprintln!("level: solver {} oracle {level}", a.f_d.z);
        return false;
    }
    let step2 = |u: &Vec3| (u - wanted).norm_squared();
    match grid_min(
        &prob.set,
        [true, true, false],
        Vec3::new(0.0, 0.0, a.f_d.z),
        &step2,
    ) {
        Some(on_slice) => agrees(&a.f_d, &on_slice, &step2),
        // The slice is narrower than the finest lattice.
        None => true,
    }
}

fn weighted_agrees(prob: &AllocProblem) -> bool {
    let (tg, tt) = oracle_targets(prob);
    let (wg, wt) = (prob.weights.gravity, prob.weights.tracking);
    let objective = |u: &Vec3| {
        let f_g = (wg * tg + wt * (tt - u)) / (wg + wt);
        wg * (f_g - tg).norm_squared() + wt * (u + f_g - tt).norm_squared()
    };
    let a = if prob.disturbance.is_some() {
        solve_weighted_disturbed(prob).unwrap()
    } else {
        solve_weighted(prob).unwrap()
    };
    let oracle = grid_min(&prob.set, [true; 3], Vec3::zeros(), &objective).unwrap();
    agrees(&a.f_d, &oracle, &objective)
}

#[test]
fn lexicographic_matches_grid_oracle_on_boxes() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..10 {
        let prob = AllocProblem::new(
            rng.random_range(0.3..1.0),
            gravity(),
            rvec(&mut rng, -8.0, 8.0),
            random_set(&mut rng, false),
        );
        assert!(lex_agrees(&prob), "{prob:?}");
    }
}

#[test]
fn lexicographic_matches_grid_oracle_on_balls() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..6 {
        let prob = AllocProblem::new(
            rng.random_range(0.3..1.0),
            gravity(),
            rvec(&mut rng, -8.0, 8.0),
            random_set(&mut rng, true),
        );
        assert!(lex_agrees(&prob), "{prob:?}");
    }
}

#[test]
fn weighted_matches_grid_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for i in 0..12 {
        let weights = PriorityWeights {
            gravity: 10f64.powf(rng.random_range(1.0..6.0)),
            tracking: 1.0,
        };
        let prob = AllocProblem::new(
            rng.random_range(0.3..1.0),
            gravity(),
            rvec(&mut rng, -8.0, 8.0),
            random_set(&mut rng, i % 3 == 0),
        )
        .with_weights(weights);
        assert!(weighted_agrees(&prob), "{prob:?}");
    }
}

#[test]
fn disturbed_allocations_match_grid_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for i in 0..10 {
        let prob = AllocProblem::new(
            rng.random_range(0.3..1.0),
            gravity(),
            rvec(&mut rng, -6.0, 6.0),
            random_set(&mut rng, i % 2 == 0),
        )
        .with_disturbance(rvec(&mut rng, -4.0, 4.0));
        assert!(lex_agrees(&prob), "{prob:?}");
        assert!(weighted_agrees(&prob), "{prob:?}");
    }
}

fn arb_vec(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn arb_set() -> impl Strategy<Value = FeasibleSet> {
    prop_oneof![
        (0.5f64..30.0).prop_map(FeasibleSet::ball),
        (arb_vec(10.0), arb_vec(5.0))
            .prop_map(|(c, h)| FeasibleSet::cube(c - h.abs(), c + h.abs() + Vec3::repeat(0.01))),
    ]
}

fn arb_problem() -> impl Strategy<Value = AllocProblem> {
    (
        0.1f64..5.0,
        arb_vec(20.0),
        arb_set(),
        proptest::option::of(arb_vec(10.0)),
    )
        .prop_map(|(m, a, set, d)| {
            let mut p = AllocProblem::new(m, gravity(), a, set);
            p.disturbance = d;
            p
        })
}

proptest! {
    #[test]
    fn commands_are_feasible_and_consistent(prob in arb_problem()) {
        for a in [solve_lexicographic(&prob).unwrap(), solve_weighted(&prob).unwrap()] {
            prop_assert!(prob.set.violation(&a.f_d) <= 1e-9);
            prop_assert!((-a.f_g_star + a.f_t_star - a.f_d).norm() <= 1e-12 * (1.0 + a.f_t_star.norm()));
        }
    }

    #[test]
    fn gravity_term_never_loses_to_weighted(prob in arb_problem()) {
        // The lexicographic gravity residual is optimal among all splits with -f_g ∈ F.
        let t = prob.targets().unwrap();
        let lex = solve_lexicographic(&prob).unwrap();
        let best = (lex.f_g_star - t.gravity).norm();
        let candidate = -prob.set.project(&-(0.5 * t.gravity)).unwrap();
        prop_assert!(best <= (candidate - t.gravity).norm() + 1e-9);
    }

    #[test]
    fn weighted_gravity_residual_shrinks_with_priority(prob in arb_problem()) {
        let t = prob.targets().unwrap();
        let mut last = f64::INFINITY;
        for ratio in [10.0, 1e2, 1e4, 1e6] {
            let p = prob.clone().with_weights(PriorityWeights { gravity: ratio, tracking: 1.0 });
            let r = solve_weighted(&p).unwrap().gravity_residual(&t);
            prop_assert!(r <= last);
            last = r;
        }
    }

    #[test]
    fn zero_disturbance_changes_nothing(prob in arb_problem()) {
        let mut plain = prob.clone();
        plain.disturbance = None;
        let zero = plain.clone().with_disturbance(Vec3::zeros());
        prop_assert_eq!(solve_lexicographic(&plain).unwrap(), solve_lexicographic(&zero).unwrap());
        prop_assert_eq!(solve_weighted(&plain).unwrap(), solve_weighted_disturbed(&zero).unwrap());
    }
}
