#![allow(dead_code)]

use gcf_core::{FeasibleSet, Vec3};

/// Lattice points `lo, lo + step, ..` through `hi` inclusive.
pub fn axis_points(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).floor() as usize;
    let mut pts: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
    if hi - pts[n] > 1e-12 {
        pts.push(hi);
    }
    pts
}

/// Axis-aligned bounds of a ball or box.
pub fn bounds(set: &FeasibleSet) -> (Vec3, Vec3) {
    match set {
        FeasibleSet::Ball { radius } => (Vec3::repeat(-radius), Vec3::repeat(*radius)),
        FeasibleSet::Box { lo, hi } => (*lo, *hi),
        FeasibleSet::Intersection { .. } => panic!("oracle handles balls and boxes"),
    }
}

/// Minimizes a convex `f` over the members of `set` on a 0.1 lattice, then
/// on a 0.01 lattice around the coarse winner. Axes with `free[k] == false`
/// stay at `fixed[k]`.
/// `None` when even a 0.001 lattice misses the set.
pub fn grid_min(
    set: &FeasibleSet,
    free: [bool; 3],
    fixed: Vec3,
    f: &dyn Fn(&Vec3) -> f64,
) -> Option<Vec3> {
    let (lo, hi) = bounds(set);
    let search = |lo: Vec3, hi: Vec3, step: f64| {
        let axes: Vec<Vec<f64>> = (0..3)
            .map(|k| {
                if free[k] {
                    axis_points(lo[k], hi[k], step)
                } else {
                    vec![fixed[k]]
                }
            })
            .collect();
        let mut best: (f64, Option<Vec3>) = (f64::INFINITY, None);
        for &x in &axes[0] {
            for &y in &axes[1] {
                for &z in &axes[2] {
                    let p = Vec3::new(x, y, z);
                    if set.violation(&p) > 1e-12 {
                        continue;
                    }
                    let v = f(&p);
                    if v < best.0 {
                        best = (v, Some(p));
                    }
                }
            }
        }
        best.1
    };
    // Thin slices can slip between coarse lattice points.
    let coarse = [0.1, 0.01, 0.001]
        .iter()
        .find_map(|&step| search(lo, hi, step))?;
    search(
        (coarse - Vec3::repeat(0.1)).sup(&lo),
        (coarse + Vec3::repeat(0.1)).inf(&hi),
        0.01,
    )
    .or(Some(coarse))
}

/// Grid resolution as a distance.
pub const RESOLUTION: f64 = 0.017_320_508_075_688_773;

/// Accepts `solver` as the minimizer of `f` when it is within one lattice
/// diagonal of the grid winner, or when no lattice point beats it and the
/// grid winner is no worse than a lattice step along the local gradient.
pub fn agrees(solver: &Vec3, oracle: &Vec3, f: &dyn Fn(&Vec3) -> f64) -> bool {
    if (solver - oracle).norm() <= RESOLUTION {
        return true;
    }
    let h = 1e-6;
    let grad = Vec3::from_fn(|k, _| {
        let mut e = Vec3::zeros();
        e[k] = h;
        (f(&(solver + e)) - f(&(solver - e))) / (2.0 * h)
    });
    let (js, jo) = (f(solver), f(oracle));
    js <= jo + 1e-9 * (1.0 + js.abs()) && jo - js <= 2.0 * RESOLUTION * (1.0 + grad.norm())
}
