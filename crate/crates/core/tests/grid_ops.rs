//! Discretization, splitting and operator construction.

use std::f64::consts::PI;
use std::sync::Arc;

use expint::field::Field;
use expint::grid::{Boundary, GridSpec};
use expint::kron::{build_fd_kron, second_difference};
use expint::ops::{
    apply_full_operator, build_fourier_symbol, compute_amax, compute_beta, jacobian_matvec,
    residual_g, Discretization, SplitConfig, SplitSystem,
};
use expint::problem::{adr2d, adr3d, lin1d, nl1d, preset, ProblemDef, PRESETS};
use expint::system::SemilinearSystem;
use proptest::prelude::*;

fn rel_inf(a: &Field, b: &Field) -> f64 {
    let scale = b.max_abs().max(a.max_abs()).max(1e-300);
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / scale
}

fn small_grid(p: &ProblemDef) -> GridSpec {
    let n = match p.dim() {
        1 => 64,
        2 => 16,
        _ => 8,
    };
    p.grid(n).unwrap()
}

fn field_on(grid: &GridSpec, f: impl Fn(&[f64]) -> f64) -> Field {
    let d = grid.dim();
    let xs = grid.node_coordinates();
    Field::from_vec(grid.shape(), xs.chunks(d).map(f).collect()).unwrap()
}

fn constant_advection(a: f64, c: f64) -> ProblemDef {
    let mut p = ProblemDef::constant_diffusion(
        &[a],
        &[(-PI, PI)],
        Boundary::Periodic,
        Arc::new(|x: &[f64]| x[0].sin()),
    );
    p.velocity = vec![Some(Arc::new(move |_: &[f64]| c))];
    p
}

#[test]
fn amax_examples() {
    let p = lin1d();
    let amax = compute_amax(&p, &p.grid(64).unwrap()).unwrap();
    assert!((amax[0] - 11.0).abs() < 1e-12);

    let c = ProblemDef::constant_diffusion(
        &[0.7],
        &[(0.0, 1.0)],
        Boundary::Periodic,
        Arc::new(|_: &[f64]| 0.0),
    );
    assert_eq!(compute_amax(&c, &c.grid(16).unwrap()).unwrap(), vec![0.7]);

    // π/2 is a node of the 48-point grid on (−3π, 3π)
    let p = adr2d();
    let amax = compute_amax(&p, &p.grid(48).unwrap()).unwrap();
    assert!((amax[0] - 2.0 / 3.0).abs() < 1e-14);
    assert!((amax[1] - 2.0 / 3.0).abs() < 1e-14);
}

#[test]
fn amax_rejects_non_positive_diffusion() {
    let c = ProblemDef::constant_diffusion(
        &[-1.0],
        &[(0.0, 1.0)],
        Boundary::Periodic,
        Arc::new(|_: &[f64]| 0.0),
    );
    assert!(compute_amax(&c, &c.grid(8).unwrap()).is_err());
}

#[test]
fn beta_examples() {
    let p = constant_advection(2.0, 0.3);
    let beta = compute_beta(&p, &p.grid(32).unwrap()).unwrap();
    assert!((beta[0] - 0.3).abs() < 1e-15);

    let p = nl1d();
    let beta = compute_beta(&p, &p.grid(64).unwrap()).unwrap();
    assert!(beta[0].abs() < 1e-12, "{}", beta[0]);

    let p = adr2d();
    let beta = compute_beta(&p, &p.grid(64).unwrap()).unwrap();
    assert!((beta[0] - 0.1).abs() < 1e-10, "{}", beta[0]);
    assert!((beta[1] - 0.1).abs() < 1e-10, "{}", beta[1]);

    let p = adr3d(-1.0);
    let beta = compute_beta(&p, &p.grid(8).unwrap()).unwrap();
    assert!(beta.iter().all(|&b| (b + 1.0).abs() < 1e-12), "{beta:?}");
}

#[test]
fn symbol_examples() {
    let g = GridSpec::new(&[16], &[(-PI, PI)], Boundary::Periodic).unwrap();
    let zero =
        build_fourier_symbol(&g, &SplitConfig::new(0.0, vec![3.0], vec![0.0]).unwrap()).unwrap();
    assert!(zero.iter().all(|s| s.norm() == 0.0));

    let s =
        build_fourier_symbol(&g, &SplitConfig::new(1.0, vec![1.0], vec![0.0]).unwrap()).unwrap();
    for (k, v) in s.iter().enumerate() {
        assert!((v.re + (k * k) as f64).abs() < 1e-12, "mode {k}: {v}");
    }

    let g = GridSpec::new(&[32], &[(-3.0 * PI, 3.0 * PI)], Boundary::Periodic).unwrap();
    let s =
        build_fourier_symbol(&g, &SplitConfig::new(0.4, vec![2.0], vec![0.25]).unwrap()).unwrap();
    assert!((s[3].re + 0.8).abs() < 1e-12);
    assert!((s[3].im - 0.25).abs() < 1e-12);

    let fd = GridSpec::cube(3, 8, (0.0, 1.0), Boundary::DirichletNeumannMix3D).unwrap();
    assert!(build_fourier_symbol(
        &fd,
        &SplitConfig::new(1.0, vec![1.0; 3], vec![0.0; 3]).unwrap()
    )
    .is_err());
}

#[test]
fn symbol_is_conjugate_symmetric() {
    for (shape, bounds) in [
        (vec![16usize], vec![(-PI, PI)]),
        (vec![12, 16], vec![(-PI, PI), (0.0, 3.0)]),
    ] {
        let g = GridSpec::new(&shape, &bounds, Boundary::Periodic).unwrap();
        let d = shape.len();
        let split = SplitConfig::new(0.7, vec![1.3; d], vec![0.4; d]).unwrap();
        let s = build_fourier_symbol(&g, &split).unwrap();
        let last = shape[d - 1];
        let half = last / 2 + 1;
        let rows: usize = shape[..d - 1].iter().product();
        // entries in the half spectrum whose conjugate partner is also stored
        for kl in [0, last / 2] {
            for r in 0..rows {
                let partner = (rows - r) % rows;
                let a = s[r * half + kl];
                let b = s[partner * half + kl];
                assert!((a - b.conj()).norm() < 1e-12, "{shape:?} row {r} col {kl}");
            }
        }
    }
}

#[test]
fn fd_stencil_rows() {
    let g = GridSpec::cube(3, 8, (0.0, 1.0), Boundary::DirichletNeumannMix3D).unwrap();
    let (lambda, amax, b) = (0.5, 0.1, -1.0);
    let ks = build_fd_kron(&g, lambda, &[amax; 3], &[b; 3]).unwrap();
    let h = 1.0 / 8.0;
    let f = &ks.factors()[1];
    let diff = lambda * amax / (h * h);
    let adv = b / (2.0 * h);
    assert!((f[[3, 2]] - (diff - adv)).abs() < 1e-12);
    assert!((f[[3, 3]] + 2.0 * diff).abs() < 1e-12);
    assert!((f[[3, 4]] - (diff + adv)).abs() < 1e-12);
    assert!(f
        .row(3)
        .iter()
        .enumerate()
        .all(|(j, &v)| (2..=4).contains(&j) || v == 0.0));

    let zero = build_fd_kron(&g, 0.0, &[amax; 3], &[0.0; 3]).unwrap();
    assert!(zero.factors().iter().all(|m| m.iter().all(|&v| v == 0.0)));
}

#[test]
fn periodic_factor_eigenvalues() {
    let n = 16;
    let h = 2.0 * PI / n as f64;
    let (lambda, amax) = (0.6, 2.0);
    let d = second_difference(n, h, Boundary::Periodic) * (lambda * amax);
    for j in 0..n {
        let theta = 2.0 * PI * j as f64 / n as f64;
        let ev = -(2.0 * lambda * amax / (h * h)) * (1.0 - theta.cos());
        assert!(ev <= 0.0);
        let v: Vec<f64> = (0..n).map(|i| (theta * i as f64).cos()).collect();
        for i in 0..n {
            let av: f64 = (0..n).map(|k| d[[i, k]] * v[k]).sum();
            assert!((av - ev * v[i]).abs() < 1e-10, "mode {j}");
        }
    }
}

#[test]
fn mixed_diffusion_factors_have_non_positive_spectrum() {
    // Gershgorin discs of a pure-diffusion factor sit in the closed left half-plane
    let g = GridSpec::cube(3, 16, (0.0, 1.0), Boundary::DirichletNeumannMix3D).unwrap();
    let ks = build_fd_kron(&g, 1.0, &[0.1; 3], &[0.0; 3]).unwrap();
    for f in ks.factors() {
        for (i, row) in f.outer_iter().enumerate() {
            let radius: f64 = row
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, v)| v.abs())
                .sum();
            assert!(row[i] + radius <= 1e-9, "row {i}");
        }
    }
}

#[test]
fn full_operator_examples() {
    let p = ProblemDef::constant_diffusion(
        &[1.0],
        &[(-PI, PI)],
        Boundary::Periodic,
        Arc::new(|x: &[f64]| x[0].sin()),
    );
    let g = p.grid(32).unwrap();
    let u = field_on(&g, |x| x[0].sin());
    let f = apply_full_operator(&p, &g, &u, 0.0).unwrap();
    let expected = u.map(|v| -v);
    assert!(rel_inf(&f, &expected) < 1e-13);

    let p = nl1d();
    let g = p.grid(32).unwrap();
    let half = Field::from_vec(&[32], vec![0.5; 32]).unwrap();
    let f = apply_full_operator(&p, &g, &half, 0.0).unwrap();
    assert!(f.as_slice().iter().all(|&v| (v - 0.25).abs() < 1e-13));
    let f = apply_full_operator(&p, &g, &Field::zeros(&[32]), 0.0).unwrap();
    assert!(f.max_abs() < 1e-15);

    let g3 = GridSpec::cube(3, 4, (0.0, 1.0), Boundary::DirichletNeumannMix3D).unwrap();
    assert!(apply_full_operator(&p, &g3, &half, 0.0).is_err());
}

#[test]
fn residual_examples() {
    let p = nl1d();
    let g = p.grid(32).unwrap();
    let u = field_on(&g, |x| (2.0 * x[0]).cos() + 0.3);
    let f = apply_full_operator(&p, &g, &u, 0.0).unwrap();
    let r = residual_g(
        &p,
        &g,
        &SplitConfig::new(0.0, vec![11.0], vec![0.0]).unwrap(),
        &u,
        0.0,
    )
    .unwrap();
    assert!(rel_inf(&r, &f) < 1e-14);

    let p = constant_advection(2.0, 0.3);
    let g = p.grid(32).unwrap();
    let u = field_on(&g, |x| (3.0 * x[0]).sin() + x[0].cos());
    let r = residual_g(
        &p,
        &g,
        &SplitConfig::new(1.0, vec![2.0], vec![0.3]).unwrap(),
        &u,
        0.0,
    )
    .unwrap();
    assert!(r.max_abs() < 1e-12 * apply_full_operator(&p, &g, &u, 0.0).unwrap().max_abs());
}

#[test]
fn jacobian_examples() {
    let p = ProblemDef::constant_diffusion(
        &[1.5],
        &[(-PI, PI)],
        Boundary::Periodic,
        Arc::new(|x: &[f64]| x[0].sin()),
    );
    let g = p.grid(32).unwrap();
    let split = SplitConfig::new(0.5, vec![1.5], vec![0.0]).unwrap();
    let u = field_on(&g, |x| x[0].cos());
    let v = field_on(&g, |x| (2.0 * x[0]).sin());
    let jv = jacobian_matvec(&p, &g, &split, &u, &v, 0.0).unwrap();
    assert!(rel_inf(&jv, &apply_full_operator(&p, &g, &v, 0.0).unwrap()) < 1e-14);

    // cubic reaction: J v − (linear part) v = (1 + 3u²) v
    let p = adr3d(-0.01);
    let g = p.grid(8).unwrap();
    let disc = Arc::new(Discretization::new(&p, &g).unwrap());
    let u = disc.initial_field();
    let v = field_on(&g, |x| x[0] * x[1] + x[2]);
    let jv = disc.jacobian_matvec(&u, &v, 0.0).unwrap();
    let lin = disc.linear_part(&v).unwrap();
    for i in 0..u.len() {
        let (ui, vi) = (u.as_slice()[i], v.as_slice()[i]);
        let pointwise = jv.as_slice()[i] - lin.as_slice()[i];
        assert!((pointwise - (1.0 + 3.0 * ui * ui) * vi).abs() < 1e-12);
    }
}

#[test]
fn jacobian_matches_directional_derivative() {
    for name in PRESETS {
        let p = preset(name, None).unwrap();
        let g = small_grid(&p);
        let disc = Arc::new(Discretization::new(&p, &g).unwrap());
        let sys = SplitSystem::accelerated(disc.clone(), 0.5).unwrap();
        let u = disc.initial_field();
        let v = field_on(&g, |x| x.iter().map(|c| (1.3 * c).sin()).sum::<f64>());
        let eps = 1e-6;
        let f0 = sys.rhs(0.0, &u).unwrap();
        let f1 = sys
            .rhs(0.0, &Field::lincomb(&[(1.0, &u), (eps, &v)]))
            .unwrap();
        let fd = Field::lincomb(&[(1.0 / eps, &f1), (-1.0 / eps, &f0)]);
        let jv = sys.jacobian_matvec(0.0, &u, &v).unwrap();
        let err = rel_inf(&fd, &jv);
        assert!(err < 1e-4, "{name}: {err}");
    }
}

#[test]
fn jacobian_needs_reaction_derivative() {
    let mut p = nl1d();
    p.reaction_du = None;
    let g = p.grid(16).unwrap();
    let u = Field::zeros(&[16]);
    let split = SplitConfig::new(1.0, vec![11.0], vec![0.0]).unwrap();
    assert!(jacobian_matvec(&p, &g, &split, &u, &u, 0.0).is_err());
}

fn random_field(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn split_consistency(idx in 0usize..4, lambda in 0.0f64..=1.0, values in random_field(512)) {
        let p = preset(PRESETS[idx], None).unwrap();
        let g = small_grid(&p);
        let disc = Arc::new(Discretization::new(&p, &g).unwrap());
        let sys = SplitSystem::accelerated(disc.clone(), lambda).unwrap();
        let u = Field::from_vec(g.shape(), values[..g.len()].to_vec()).unwrap();
        let f = disc.full_operator(&u, 0.0).unwrap();
        let sum = Field::lincomb(&[(1.0, &sys.apply_linear(&u).unwrap()), (1.0, &sys.nonlinear(0.0, &u).unwrap())]);
        prop_assert!(rel_inf(&sum, &f) < 1e-11, "{}: {}", PRESETS[idx], rel_inf(&sum, &f));
    }

    #[test]
    fn fourier_linear_part_is_real(values in random_field(256), lambda in 0.0f64..=1.0) {
        let p = adr2d();
        let g = p.grid(16).unwrap();
        let disc = Arc::new(Discretization::new(&p, &g).unwrap());
        let sys = SplitSystem::accelerated(disc.clone(), lambda).unwrap();
        let u = Field::from_vec(g.shape(), values).unwrap();
        let au = sys.apply_linear(&u).unwrap();
        // a real result re-transforms to a spectrum with real DC entry
        let spec = disc.spectrum(&au).unwrap();
        prop_assert!(spec[0].im.abs() < 1e-12 * (1.0 + au.max_abs()));
        prop_assert!(au.is_finite());
    }
}
