use std::time::Instant;

use ipop_core::objectives::{FunctionId, Objective};

#[test]
fn ten_ms_cost_takes_ten_to_thirteen_ms() {
    let obj = Objective::new(FunctionId::Sphere, 10, 1, 10.0).unwrap();
    let x = vec![0.5; 10];
    obj.evaluate(&x).unwrap();
    let mut samples: Vec<f64> = (0..20)
        .map(|_| {
            let t = Instant::now();
            obj.evaluate(&x).unwrap();
            t.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    let median = samples[samples.len() / 2];
    assert!(samples[0] >= 10.0, "fastest {:.3} ms", samples[0]);
    assert!((10.0..=13.0).contains(&median), "median {median:.3} ms");
}

#[test]
fn zero_cost_is_fast() {
    let obj = Objective::new(FunctionId::Rastrigin, 20, 1, 0.0).unwrap();
    let x = vec![0.1; 20];
    let t = Instant::now();
    for _ in 0..1000 {
        obj.evaluate(&x).unwrap();
    }
    assert!(t.elapsed().as_millis() < 100);
}
