use std::time::Duration;

use ipop_core::analysis::{ert, speedup_table, ErtTable, RunHits, SpeedupCell, TargetGrid};
use ipop_core::fabric::{
    evaluate_scatter_gather, evaluate_sequential, ResourcePartition, TimeMode,
};
use ipop_core::linalg::{eig_symmetric, gemm, syr1, Matrix};
use ipop_core::objectives::{FunctionId, Objective, DOMAIN_LOWER, DOMAIN_UPPER};
use ipop_core::restart::{run_ipop, IpopConfig};
use ipop_core::rng::rng_from_seed;
use proptest::prelude::*;

mod common;
use common::{frobenius_diff, orthonormality_error, random_spd};

fn matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    use rand::Rng;
    let mut rng = rng_from_seed(seed);
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| rng.random_range(-2.0..2.0))
            .collect(),
    )
    .unwrap()
}

fn triple_loop(a: &Matrix, b: &Matrix) -> Matrix {
    let mut c = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            for k in 0..a.cols() {
                c[(i, j)] += a[(i, k)] * b[(k, j)];
            }
        }
    }
    c
}

fn any_function() -> impl Strategy<Value = FunctionId> {
    prop::sample::select(FunctionId::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gemm_matches_triple_loop(m in 1usize..12, k in 1usize..12, n in 1usize..12, seed: u64) {
        let a = matrix(m, k, seed);
        let b = matrix(k, n, seed ^ 1);
        let got = gemm(1.0, &a, &b, 0.0, &Matrix::zeros(m, n)).unwrap();
        prop_assert!(got.max_abs_diff(&triple_loop(&a, &b)) < 1e-12);
    }

    #[test]
    fn gemm_is_associative(m in 1usize..8, k in 1usize..8, l in 1usize..8, n in 1usize..8, seed: u64) {
        let a = matrix(m, k, seed);
        let b = matrix(k, l, seed ^ 1);
        let c = matrix(l, n, seed ^ 2);
        let ab = gemm(1.0, &a, &b, 0.0, &Matrix::zeros(m, l)).unwrap();
        let bc = gemm(1.0, &b, &c, 0.0, &Matrix::zeros(k, n)).unwrap();
        let left = gemm(1.0, &ab, &c, 0.0, &Matrix::zeros(m, n)).unwrap();
        let right = gemm(1.0, &a, &bc, 0.0, &Matrix::zeros(m, n)).unwrap();
        prop_assert!(left.max_abs_diff(&right) < 1e-10 * (1.0 + left.max_abs()));
    }

    #[test]
    fn syr1_stays_exactly_symmetric(n in 1usize..16, alpha in -3.0f64..3.0, seed: u64) {
        let c = random_spd(&mut rng_from_seed(seed), n);
        let v = matrix(n, 1, seed ^ 3).column(0);
        prop_assert_eq!(syr1(&c, &v, alpha).unwrap().max_asymmetry(), 0.0);
    }

    #[test]
    fn eig_of_random_spd(n in 1usize..20, seed: u64) {
        let c = random_spd(&mut rng_from_seed(seed), n);
        let e = eig_symmetric(&c).unwrap();
        prop_assert!(orthonormality_error(&e.vectors) < 1e-10);
        prop_assert!(frobenius_diff(&e.reconstruct(), &c) / c.frobenius_norm() < 1e-8);
        prop_assert!(e.values.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn ert_grows_with_a_hitting_time(times in prop::collection::vec(1.0f64..100.0, 1..10), extra in 0.0f64..50.0, idx: prop::sample::Index) {
        let runs: Vec<(Option<f64>, f64)> = times.iter().map(|&t| (Some(t), t)).collect();
        let mut later = runs.clone();
        let i = idx.index(runs.len());
        later[i].0 = Some(runs[i].1 + extra);
        later[i].1 = runs[i].1 + extra;
        let before = ert(&runs).unwrap().unwrap();
        prop_assert!(ert(&later).unwrap().unwrap() >= before);
        let mean = times.iter().sum::<f64>() / times.len() as f64;
        prop_assert!((before - mean).abs() <= 1e-12 * mean);
    }

    #[test]
    fn speedup_against_itself_is_one(hits in prop::collection::vec(prop::option::of(1.0f64..1e4), 9)) {
        let grid = TargetGrid::default();
        let runs = vec![RunHits { function: "f".into(), hits, spent: 2e4 }];
        let table = ErtTable::from_runs("a", &grid, &runs).unwrap();
        let s = speedup_table(&table, &table);
        for cell in &s.cells["f"] {
            match cell {
                SpeedupCell::Ratio(r) => prop_assert_eq!(*r, 1.0),
                other => prop_assert_eq!(other, &SpeedupCell::Neither),
            }
        }
    }

    #[test]
    fn objectives_are_shifted_base_functions(f in any_function(), n in 2usize..12, seed: u64, u in prop::collection::vec(0.0f64..1.0, 12)) {
        let obj = Objective::new(f, n, seed, 0.0).unwrap();
        let x: Vec<f64> = u[..n].iter().map(|t| DOMAIN_LOWER + t * (DOMAIN_UPPER - DOMAIN_LOWER)).collect();
        let y = obj.evaluate(&x).unwrap();
        let z: Vec<f64> = x.iter().zip(obj.x_opt()).map(|(a, b)| a - b).collect();
        prop_assert!(y.is_finite());
        prop_assert!(y >= obj.f_opt());
        prop_assert_eq!(y, obj.base(&z) + obj.f_opt());
    }

    #[test]
    fn scatter_gather_matches_sequential(workers in 1usize..9, lambda in 1usize..24, seed: u64) {
        let points = matrix(3, lambda, seed);
        let f = |x: &[f64]| {
            let micros = (x[0].abs() * 300.0) as u64;
            std::thread::sleep(Duration::from_micros(micros));
            x.iter().map(|v| v * v).sum::<f64>()
        };
        let part = ResourcePartition::root(workers).unwrap();
        let got = evaluate_scatter_gather(&part, &points, &f).unwrap();
        prop_assert_eq!(got, evaluate_sequential(&points, &f));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn ipop_is_deterministic(seed: u64, dim in 2usize..6) {
        let mut cfg = IpopConfig::new("rastrigin", dim);
        cfg.lambda_start = 6;
        cfg.k_max = 4;
        cfg.seed = seed;
        cfg.time_mode = TimeMode::Virtual { eval_ms: 1.0 };
        let a = run_ipop(&cfg, None).unwrap();
        let b = run_ipop(&cfg, None).unwrap();
        let bits = |o: &ipop_core::restart::IpopOutcome| -> Vec<u64> {
            o.log.records.iter().map(|r| r.best_f.to_bits()).collect()
        };
        prop_assert_eq!(bits(&a), bits(&b));
    }
}
