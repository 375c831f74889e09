use super::*;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn triplets(a: &DMatrix<f64>) -> Vec<Triplet> {
    let mut t = Vec::new();
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if a[(i, j)] != 0.0 {
                t.push(Triplet { row: i, col: j, val: a[(i, j)] });
            }
        }
    }
    t
}

fn analytic_nonneg() -> ConicProblem {
    ConicProblem {
        c: vec![1.0],
        a: vec![Triplet { row: 0, col: 0, val: -1.0 }],
        b: vec![-1.0],
        cones: ConeSpec(vec![Cone::NonNeg(1)]),
    }
}

fn analytic_sdp() -> ConicProblem {
    let eye = svec(&DMatrix::identity(2, 2));
    ConicProblem {
        c: eye.clone(),
        a: (0..3).map(|i| Triplet { row: i, col: i, val: -1.0 }).collect(),
        b: eye.iter().map(|v| -v).collect(),
        cones: ConeSpec(vec![Cone::Psd(2)]),
    }
}

fn analytic_soc() -> ConicProblem {
    ConicProblem {
        c: vec![1.0],
        a: vec![Triplet { row: 0, col: 0, val: -1.0 }],
        b: vec![0.0, 3.0, 4.0],
        cones: ConeSpec(vec![Cone::Soc(3)]),
    }
}

/// Random primal-dual pair with known optimum `c'x* = -b'y*`.
fn random_problem(seed: u64, with_eq: bool) -> (ConicProblem, f64) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut cones = Vec::new();
    if with_eq {
        cones.push(Cone::Zero(3));
    }
    cones.extend([Cone::NonNeg(5), Cone::Soc(4), Cone::Psd(3), Cone::Soc(3)]);
    let spec = ConeSpec(cones);
    let m = spec.dim();
    let n = 8;
    let mut s = vec![0.0; m];
    let mut y = vec![0.0; m];
    for (off, cone) in spec.blocks() {
        match cone {
            Cone::Zero(d) => {
                for i in 0..d {
                    y[off + i] = r.random_range(-1.0..1.0);
                }
            }
            Cone::NonNeg(d) => {
                for i in 0..d {
                    let v = r.random_range(0.1..1.0);
                    if r.random_bool(0.5) {
                        s[off + i] = v;
                    } else {
                        y[off + i] = v;
                    }
                }
            }
            Cone::Soc(d) => {
                let v: Vec<f64> = (0..d - 1).map(|_| r.random_range(-1.0..1.0)).collect();
                let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let (a, b) = (r.random_range(0.5..1.5), r.random_range(0.5..1.5));
                s[off] = a * nv;
                y[off] = b * nv;
                for i in 0..d - 1 {
                    s[off + 1 + i] = a * v[i];
                    y[off + 1 + i] = -b * v[i];
                }
            }
            Cone::Psd(side) => {
                let q = DMatrix::from_fn(side, side, |_, _| r.random_range(-1.0..1.0)).qr().q();
                let mut sm = DMatrix::zeros(side, side);
                let mut ym = DMatrix::zeros(side, side);
                for k in 0..side {
                    let col = q.column(k);
                    let outer = col * col.transpose();
                    if k == 0 {
                        ym += outer * r.random_range(0.5..1.5);
                    } else {
                        sm += outer * r.random_range(0.5..1.5);
                    }
                }
                s[off..off + svec_len(side)].copy_from_slice(&svec(&sm));
                y[off..off + svec_len(side)].copy_from_slice(&svec(&ym));
            }
        }
    }
    let a = DMatrix::from_fn(m, n, |_, _| r.random_range(-1.0..1.0));
    let x: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let xv = nalgebra::DVector::from_column_slice(&x);
    let yv = nalgebra::DVector::from_column_slice(&y);
    let b: Vec<f64> = (&a * &xv).iter().zip(&s).map(|(ax, s)| ax + s).collect();
    let c: Vec<f64> = (a.transpose() * &yv).iter().map(|v| -v).collect();
    let opt = c.iter().zip(&x).map(|(c, x)| c * x).sum();
    (ConicProblem { c, a: triplets(&a), b, cones: spec }, opt)
}

#[test]
fn analytic_optima() {
    for (p, opt) in [(analytic_nonneg(), 1.0), (analytic_sdp(), 2.0), (analytic_soc(), 5.0)] {
        let t = std::time::Instant::now();
        let sol = solve(&p, &Settings::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.objective - opt).abs() < 1e-7, "{} vs {opt}", sol.objective);
        assert!(t.elapsed().as_secs_f64() < 1.0);
    }
}

#[test]
fn analytic_optima_splitting() {
    for (p, opt) in [(analytic_nonneg(), 1.0), (analytic_sdp(), 2.0), (analytic_soc(), 5.0)] {
        let sol = solve(&p, &Settings::splitting()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.objective - opt).abs() < 1e-4, "{} vs {opt}", sol.objective);
    }
}

#[test]
fn random_problems_reach_known_optimum() {
    for seed in 0..20 {
        for with_eq in [false, true] {
            let (p, opt) = random_problem(seed, with_eq);
            let sol = solve(&p, &Settings::default()).unwrap();
            assert_eq!(sol.status, Status::Optimal, "seed {seed}");
            assert!(sol.residuals.gap <= 1e-6);
            assert!(
                (sol.objective - opt).abs() <= 1e-6 * (1.0 + opt.abs()),
                "seed {seed}: {} vs {opt}",
                sol.objective
            );
            let (ds, dy) = cone_violation(&p, &sol.y, &sol.s);
            assert!(ds <= 1e-8 && dy <= 1e-8, "seed {seed}: {ds} {dy}");
        }
    }
}

#[test]
fn splitting_agrees_with_interior_point() {
    for seed in 0..5 {
        let (p, opt) = random_problem(100 + seed, true);
        let sol = solve(&p, &Settings::splitting()).unwrap();
        assert_eq!(sol.status, Status::Optimal, "seed {seed} {:?} {}", sol.residuals, sol.iterations);
        assert!((sol.objective - opt).abs() <= 1e-4 * (1.0 + opt.abs()));
    }
}

#[test]
fn primal_infeasible_certificate() {
    // x >= 1 and x <= 0
    let p = ConicProblem {
        c: vec![1.0],
        a: vec![Triplet { row: 0, col: 0, val: -1.0 }, Triplet { row: 1, col: 0, val: 1.0 }],
        b: vec![-1.0, 0.0],
        cones: ConeSpec(vec![Cone::NonNeg(2)]),
    };
    for settings in [Settings::default(), Settings::splitting()] {
        let sol = solve(&p, &settings).unwrap();
        assert_eq!(sol.status, Status::PrimalInfeasible);
        assert!(sol.certificate_residual <= 1e-6);
        let by: f64 = p.b.iter().zip(&sol.y).map(|(b, y)| b * y).sum();
        assert!((by + 1.0).abs() < 1e-12);
        assert!(sol.y.iter().all(|v| *v >= -1e-9));
    }
}

#[test]
fn sdp_infeasible_certificate() {
    // X psd 2x2 with X11 = -1
    let p = ConicProblem {
        c: vec![0.0, 0.0, 0.0],
        a: vec![
            Triplet { row: 0, col: 0, val: 1.0 },
            Triplet { row: 1, col: 0, val: -1.0 },
            Triplet { row: 2, col: 1, val: -1.0 },
            Triplet { row: 3, col: 2, val: -1.0 },
        ],
        b: vec![-1.0, 0.0, 0.0, 0.0],
        cones: ConeSpec(vec![Cone::Zero(1), Cone::Psd(2)]),
    };
    let sol = solve(&p, &Settings::default()).unwrap();
    assert_eq!(sol.status, Status::PrimalInfeasible);
}

#[test]
fn dual_infeasible_certificate() {
    // minimize x subject to x <= 0
    let p = ConicProblem {
        c: vec![1.0],
        a: vec![Triplet { row: 0, col: 0, val: 1.0 }],
        b: vec![0.0],
        cones: ConeSpec(vec![Cone::NonNeg(1)]),
    };
    for settings in [Settings::default(), Settings::splitting()] {
        let sol = solve(&p, &settings).unwrap();
        assert_eq!(sol.status, Status::DualInfeasible);
        assert!(sol.certificate_residual <= 1e-6);
    }
}

#[test]
fn scaled_problem_has_same_objective() {
    let mut r = ChaCha8Rng::seed_from_u64(9);
    for seed in 0..5 {
        let (p, _) = random_problem(200 + seed, true);
        let base = solve(&p, &Settings::default()).unwrap();
        // block-constant row scales and per-column scales, powers of two
        let mut row_scale = vec![1.0; p.n_rows()];
        for (off, cone) in p.cones.blocks() {
            let f = 2f64.powi(r.random_range(-6..=6));
            for i in off..off + cone.dim() {
                row_scale[i] = match cone {
                    Cone::Zero(_) | Cone::NonNeg(_) => 2f64.powi(r.random_range(-6..=6)),
                    _ => f,
                };
            }
        }
        let col_scale: Vec<f64> = (0..p.n_vars()).map(|_| 2f64.powi(r.random_range(-6..=6))).collect();
        let q = ConicProblem {
            c: p.c.iter().zip(&col_scale).map(|(c, e)| c * e).collect(),
            a: p.a
                .iter()
                .map(|t| Triplet { row: t.row, col: t.col, val: t.val * row_scale[t.row] * col_scale[t.col] })
                .collect(),
            b: p.b.iter().zip(&row_scale).map(|(b, d)| b * d).collect(),
            cones: p.cones.clone(),
        };
        let scaled = solve(&q, &Settings::default()).unwrap();
        assert_eq!(scaled.status, Status::Optimal);
        assert!(
            (scaled.objective - base.objective).abs() <= 10.0 * 1e-6 * (1.0 + base.objective.abs()),
            "{} vs {}",
            scaled.objective,
            base.objective
        );
    }
}

#[test]
fn validation_rejects_bad_shapes() {
    let mut p = analytic_soc();
    p.b.push(1.0);
    assert!(solve(&p, &Settings::default()).is_err());
    let mut p = analytic_soc();
    p.a.push(Triplet { row: 0, col: 3, val: 1.0 });
    assert!(solve(&p, &Settings::default()).is_err());
    let mut p = analytic_soc();
    p.a[0].val = f64::NAN;
    assert!(solve(&p, &Settings::default()).is_err());
}

#[test]
fn dump_layout() {
    let text = analytic_soc().dump();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "1 3");
    assert!(lines[1].starts_with("0 0 "));
    assert_eq!(lines[2], "b");
    assert!(text.contains("cones\nsoc 3\n"));
}

#[test]
fn tally_counts() {
    let spec = ConeSpec(vec![Cone::Zero(2), Cone::NonNeg(3), Cone::Soc(4), Cone::Psd(3), Cone::Zero(1)]);
    let t = spec.tally();
    assert_eq!(t.zero, 3);
    assert_eq!(t.nonneg, 3);
    assert_eq!(t.soc, vec![4]);
    assert_eq!(t.psd, vec![3]);
    assert_eq!(spec.dim(), 2 + 3 + 4 + 6 + 1);
}
