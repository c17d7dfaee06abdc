//! Invariants of the public API, checked on random inputs.

use std::f64::consts::TAU;

use minkray::io::{read_field, write_field};
use minkray::raytransform::{in_lu, Region};
use minkray::symbol::symbol_a;
use minkray::{CausalClass, Covector, Grid4, Sym2, Sym2Field};
use proptest::prelude::*;

fn spacelike() -> impl Strategy<Value = Covector> {
    (-0.95f64..0.95, 0.2f64..5.0, 0.0f64..TAU, -1.0f64..1.0).prop_map(|(r, m, phi, z)| {
        let s = (1.0 - z * z).sqrt();
        Covector([r * m, m * s * phi.cos(), m * s * phi.sin(), m * z])
    })
}

fn sym2() -> impl Strategy<Value = Sym2> {
    prop::array::uniform10(-1.0f64..1.0).prop_map(Sym2)
}

/// Rotation about a unit axis by `angle` (Rodrigues).
fn rotation(axis: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
    let n = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
    let [x, y, z] = axis.map(|a| a / n);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

/// `diag(1, Q)` acting on the covector index of `eta`.
fn rotate_covector(q: &[[f64; 3]; 3], eta: &Covector) -> Covector {
    let e = eta.spatial();
    let r: [f64; 3] = std::array::from_fn(|i| (0..3).map(|j| q[i][j] * e[j]).sum());
    Covector([eta.0[0], r[0], r[1], r[2]])
}

/// `R f R^T` with `R = diag(1, Q)`.
fn rotate_tensor(q: &[[f64; 3]; 3], f: &Sym2) -> Sym2 {
    let mut r = [[0.0; 4]; 4];
    r[0][0] = 1.0;
    for i in 0..3 {
        for j in 0..3 {
            r[i + 1][j + 1] = q[i][j];
        }
    }
    let m = f.to_matrix();
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4)
                .flat_map(|k| (0..4).map(move |l| (k, l)))
                .map(|(k, l)| r[i][k] * m[k][l] * r[j][l])
                .sum();
        }
    }
    Sym2::from_matrix(&out)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symbol_commutes_with_spatial_rotations(
        eta in spacelike(),
        f in sym2(),
        axis in prop::array::uniform3(-1.0f64..1.0),
        angle in 0.0f64..TAU,
    ) {
        prop_assume!(axis.iter().map(|x| x * x).sum::<f64>() > 1e-2);
        let q = rotation(axis, angle);
        let lhs = symbol_a(&rotate_covector(&q, &eta), 32).unwrap().apply(&rotate_tensor(&q, &f));
        let rhs = rotate_tensor(&q, &symbol_a(&eta, 32).unwrap().apply(&f));
        let scale = TAU / eta.spatial_norm() * f.frobenius_norm();
        prop_assert!((lhs - rhs).frobenius_norm() <= 1e-12 * scale);
    }

    #[test]
    fn symbol_is_even(eta in spacelike()) {
        let a = symbol_a(&eta, 32).unwrap();
        let b = symbol_a(&eta.scaled(-1.0), 32).unwrap();
        prop_assert!(a.sub(&b).frobenius_norm() <= 1e-13 * a.frobenius_norm());
    }

    #[test]
    fn causal_class_is_scale_invariant(e in prop::array::uniform4(-3.0f64..3.0), l in 0.01f64..100.0) {
        let eta = Covector(e);
        prop_assume!(eta.euclid_norm_sq() > 1e-6);
        let q = eta.minkowski_q() / eta.euclid_norm_sq();
        prop_assume!(q.abs() > 1e-6);
        let class = eta.causal_class(0.0).unwrap();
        prop_assert_eq!(class, if q > 0.0 { CausalClass::SpaceLike } else { CausalClass::TimeLike });
        prop_assert_eq!(eta.scaled(l).causal_class(0.0).unwrap(), class);
        prop_assert_eq!(eta.scaled(-l).causal_class(0.0).unwrap(), class);
    }

    #[test]
    fn points_on_rays_through_the_region_are_in_lu(
        y in prop::array::uniform3(-0.4f64..0.4),
        phi in 0.0f64..TAU,
        z in -1.0f64..1.0,
        s in -3.0f64..3.0,
    ) {
        let region = Region::Ball { center: [0.0; 3], radius: 0.7 };
        prop_assume!(region.contains(&y));
        let r = (1.0 - z * z).sqrt();
        let v = [r * phi.cos(), r * phi.sin(), z];
        let p = [s, y[0] + s * v[0], y[1] + s * v[1], y[2] + s * v[2]];
        prop_assert!(in_lu(&p, &region));
    }

    #[test]
    fn points_beyond_the_light_sphere_are_not_in_lu(
        dir in prop::array::uniform3(-1.0f64..1.0),
        t in -2.0f64..2.0,
        gap in 1e-3f64..2.0,
    ) {
        let n = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(n > 1e-2);
        let radius = 0.5;
        // every point of the ball is farther than |t| from p'
        let d = t.abs() + radius + gap;
        let p = [t, d * dir[0] / n, d * dir[1] / n, d * dir[2] / n];
        let region = Region::Ball { center: [0.0; 3], radius };
        prop_assert!(!in_lu(&p, &region));
    }

    #[test]
    fn embed_then_crop_is_identity(
        dims in prop::array::uniform4(2usize..5),
        ext in 1usize..4,
        seed in prop::collection::vec(-1.0f64..1.0, 10),
    ) {
        let grid = Grid4::new(dims, [0.3, 0.25, 0.2, 0.5], [-0.4, 0.1, 0.0, -1.0]).unwrap();
        let f = Sym2Field::from_fn(grid.clone(), |x| {
            Sym2(std::array::from_fn(|p| seed[p] * (x[0] + 2.0 * x[1] - x[2] + 0.5 * x[3] + p as f64).sin()))
        });
        let big = grid.extended(ext);
        let embedded = f.embed(&big).unwrap();
        prop_assert!((embedded.l2_norm() - f.l2_norm()).abs() <= 1e-12 * f.l2_norm().max(1e-300));
        let back = embedded.crop(&grid).unwrap();
        prop_assert_eq!(back.values().unwrap(), f.values().unwrap());
    }

    #[test]
    fn field_files_round_trip_bit_exactly(
        dims in prop::array::uniform4(1usize..4),
        values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 810),
    ) {
        let grid = Grid4::new(dims, [0.5, 0.25, 1.0, 2.0], [0.0, -1.0, 3.0, 0.5]).unwrap();
        let data = values[..10 * grid.len()].to_vec();
        let f = Sym2Field::from_position_data(grid, data).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        let back = read_field(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(back.grid(), f.grid());
        let a: Vec<u64> = back.values().unwrap().iter().map(|x| x.to_bits()).collect();
        let b: Vec<u64> = f.values().unwrap().iter().map(|x| x.to_bits()).collect();
        prop_assert_eq!(a, b);
    }
}
