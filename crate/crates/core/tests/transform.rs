use std::sync::Arc;

use hemisel::sphere::Damping;
use hemisel::transform::{forward, inverse_series, odd_part, reconstruct_from_odd, InverseOptions};
use hemisel::{Error, Grid, GridFunction};
use proptest::prelude::*;

fn circle(n: usize) -> Arc<Grid> {
    Arc::new(Grid::build(2, n).unwrap())
}

fn sphere(res: usize) -> Arc<Grid> {
    Arc::new(Grid::build(3, res).unwrap())
}

fn half_cosine(x: &[f64]) -> f64 {
    if x[0] > 0.0 {
        x[0] / 2.0
    } else {
        0.0
    }
}

/// Smooth density supported on `{<x, mu> > 0}`, normalized on `grid`.
fn cap_density(grid: &Arc<Grid>, mu: &[f64]) -> GridFunction {
    let raw = GridFunction::from_fn(grid.clone(), |x| {
        let t: f64 = x.iter().zip(mu).map(|(a, b)| a * b).sum();
        t.max(0.0).powi(3)
    });
    let mass = raw.integral();
    raw.map(|v| v / mass)
}

fn rel_l2(a: &GridFunction, b: &GridFunction) -> f64 {
    a.l2_distance(b) / b.l2_norm()
}

#[test]
fn forward_of_uniform_density_is_half() {
    for grid in [circle(256), sphere(32)] {
        let g = forward(&GridFunction::uniform_density(grid));
        assert!(g.values().iter().all(|v| (v - 0.5).abs() < 1e-6));
    }
}

#[test]
fn forward_closed_form_on_circle() {
    let grid = circle(2048);
    let g = forward(&GridFunction::from_fn(grid.clone(), half_cosine));
    for (x, v) in grid.nodes().zip(g.values()) {
        assert!((v - (1.0 + x[0]) / 2.0).abs() < 1e-5);
    }
}

#[test]
fn even_mean_zero_input_is_annihilated() {
    let f3 = GridFunction::from_fn(sphere(32), |x| x[0] * x[0] - 1.0 / 3.0 + 0.5 * x[1] * x[2]);
    assert!(f3.integral().abs() < 1e-12);
    let g3 = forward(&f3);
    assert!(g3.values().iter().all(|v| v.abs() < 1e-6), "max {}", g3.values().iter().fold(0.0f64, |a, v| a.max(v.abs())));
    let f2 = GridFunction::from_fn(circle(512), |x| 2.0 * x[0] * x[0] - 1.0);
    assert!(forward(&f2).values().iter().all(|v| v.abs() < 1e-6));
}

#[test]
fn decomposition_identity() {
    for grid in [circle(512), sphere(32)] {
        let f = GridFunction::from_fn(grid.clone(), |x| (1.0 + 0.5 * x[0] + 0.3 * x[1] * x[1]).exp() / 10.0);
        let diff = forward(&f).combine(1.0, &forward(&odd_part(&f)), -1.0);
        let half_mass = f.integral() / 2.0;
        assert!(diff.values().iter().all(|v| (v - half_mass).abs() < 1e-6));
    }
}

#[test]
fn odd_part_examples() {
    let grid = circle(720);
    assert!(odd_part(&GridFunction::uniform_density(grid.clone())).values().iter().all(|v| v.abs() < 1e-15));
    let fm = odd_part(&GridFunction::from_fn(grid.clone(), half_cosine));
    for (x, v) in grid.nodes().zip(fm.values()) {
        assert!((v - x[0] / 4.0).abs() < 1e-14);
    }
    let odd = GridFunction::from_fn(sphere(16), |x| x[0] * x[1] * x[2] + x[2]);
    assert!(odd_part(&odd).sup_distance(&odd) < 1e-14);
}

#[test]
fn reconstruct_examples() {
    let grid = circle(720);
    let fm = GridFunction::from_fn(grid.clone(), |x| x[0] / 4.0);
    let f = reconstruct_from_odd(&fm).unwrap();
    assert!(f.sup_distance(&GridFunction::from_fn(grid.clone(), half_cosine)) < 1e-15);
    let zero = GridFunction::from_fn(grid.clone(), |_| 0.0);
    assert!(reconstruct_from_odd(&zero).unwrap().values().iter().all(|&v| v == 0.0));
    let s = sphere(32);
    let dens = cap_density(&s, &[0.6, 0.0, 0.8]);
    assert!(reconstruct_from_odd(&odd_part(&dens)).unwrap().sup_distance(&dens) < 1e-8);
    let not_odd = GridFunction::from_fn(grid, |x| x[0] * x[0]);
    assert!(matches!(reconstruct_from_odd(&not_odd), Err(Error::Precondition(_))));
}

#[test]
fn inverse_of_constant_vanishes() {
    let g = GridFunction::from_fn(sphere(24), |_| 0.7);
    let fm = inverse_series(&g, InverseOptions::new(7), sphere(16)).unwrap();
    assert!(fm.values().iter().all(|v| v.abs() < 1e-10));
}

#[test]
fn inverse_closed_form_on_circle() {
    let grid = circle(1024);
    let g = GridFunction::from_fn(grid.clone(), |x| (1.0 + x[0]) / 2.0);
    let fm = inverse_series(&g, InverseOptions::new(15), grid.clone()).unwrap();
    let truth = GridFunction::from_fn(grid.clone(), |x| x[0] / 4.0);
    assert!(fm.sup_distance(&truth) < 1e-3);
    let f = reconstruct_from_odd(&fm).unwrap();
    assert!(f.sup_distance(&GridFunction::from_fn(grid, half_cosine)) < 1e-3);
}

#[test]
fn inverse_ignores_even_part_of_data() {
    let grid = sphere(32);
    let dens = cap_density(&grid, &[0.0, 0.6, 0.8]);
    let g = forward(&dens);
    let gm = odd_part(&g);
    let a = inverse_series(&g, InverseOptions::new(7), grid.clone()).unwrap();
    let b = inverse_series(&gm, InverseOptions::new(7), grid).unwrap();
    assert!(a.sup_distance(&b) < 1e-8);
}

#[test]
fn inverse_output_is_odd() {
    let grid = sphere(24);
    let g = forward(&cap_density(&grid, &[0.8, 0.6, 0.0]));
    let fm = inverse_series(&g, InverseOptions { truncation: 9, damping: Damping::RaisedCosine }, grid.clone()).unwrap();
    for i in 0..grid.len() {
        let j = grid.antipode(i).unwrap();
        assert!((fm.values()[i] + fm.values()[j]).abs() < 1e-8);
    }
}

#[test]
fn round_trip_error_shrinks_with_truncation() {
    let grid = circle(512);
    let dens = cap_density(&grid, &[0.0, 1.0]);
    let g = forward(&dens);
    let target = odd_part(&dens);
    let errs: Vec<f64> = [3, 7, 15]
        .iter()
        .map(|&t| rel_l2(&inverse_series(&g, InverseOptions::new(t), grid.clone()).unwrap(), &target))
        .collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn round_trip_on_the_sphere() {
    let grid = sphere(64);
    let dens = cap_density(&grid, &[0.0, 0.6, 0.8]);
    let fm = inverse_series(&forward(&dens), InverseOptions::new(15), grid).unwrap();
    let err = rel_l2(&reconstruct_from_odd(&fm).unwrap(), &dens);
    assert!(err < 0.02, "relative L2 error {err}");
}

#[test]
fn is_density_flag() {
    let grid = sphere(16);
    assert!(GridFunction::uniform_density(grid.clone()).is_density());
    assert!(!GridFunction::from_fn(grid.clone(), |x| x[0]).is_density());
    assert!(!GridFunction::from_fn(grid, |_| 1.0).is_density());
    assert!((GridFunction::uniform_density(circle(64)).integral() - 1.0).abs() < 1e-12);
}

#[test]
fn csv_serialization() {
    let f = GridFunction::from_fn(circle(8), |x| x[0]);
    let mut buf = Vec::new();
    f.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 9);
    let back: f64 = text.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert_eq!(back, f.values()[0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn forward_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, c in prop::array::uniform3(-1.0f64..1.0)) {
        let grid = sphere(16);
        let f = GridFunction::from_fn(grid.clone(), |x| (c[0] * x[0] + c[1] * x[1] * x[2]).exp());
        let h = GridFunction::from_fn(grid, |x| x[1] + c[2] * x[0] * x[0]);
        let lhs = forward(&f.combine(a, &h, b));
        let rhs = forward(&f).combine(a, &forward(&h), b);
        prop_assert!(lhs.sup_distance(&rhs) < 1e-12 * (1.0 + a.abs() + b.abs()) * 10.0);
    }

    #[test]
    fn odd_part_is_idempotent_and_odd(c in prop::array::uniform4(-2.0f64..2.0)) {
        let grid = sphere(12);
        let f = GridFunction::from_fn(grid, |x| c[0] + c[1] * x[0] + c[2] * x[1] * x[1] + c[3] * x[2].powi(3));
        let fm = odd_part(&f);
        prop_assert!(fm.oddness_defect() < 1e-14);
        prop_assert!(odd_part(&fm).sup_distance(&fm) < 1e-15);
    }
}
