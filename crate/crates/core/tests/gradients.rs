//! Analytic gradients against central finite differences.

use dsgc_core::autodiff::{ParamStore, Tape};
use dsgc_core::gradcheck::{battery, check, relative_error};
use dsgc_core::tensor::Matrix;

const TOLERANCE: f64 = 1e-4;

#[test]
fn whole_battery_within_tolerance() {
    for seed in [1, 2] {
        let results = battery(seed).unwrap();
        assert!(results.len() > 60);
        for (name, report) in &results {
            let (param, err) = report.worst().unwrap();
            assert!(err < &TOLERANCE, "seed {seed}, {name}: {param} relative error {err:e}");
        }
    }
}

#[test]
fn arcosh_derivative_at_two() {
    let mut store = ParamStore::new();
    let x = store.add("x", Matrix::scalar(2.0));
    let mut tape = Tape::new();
    let v = tape.param(&store, x);
    let y = tape.arcosh(v).unwrap();
    tape.backward(y, &mut store).unwrap();
    let analytic = store.grad(x).item();
    assert!((analytic - 1.0 / 3f64.sqrt()).abs() < 1e-12);
    let h = 1e-6f64;
    let numeric = ((2.0f64 + h).acosh() - (2.0f64 - h).acosh()) / (2.0 * h);
    assert!((analytic - numeric).abs() < 1e-8);
}

#[test]
fn check_detects_a_wrong_gradient() {
    // relu at exactly zero has a one-sided numeric slope of 0.5
    let mut store = ParamStore::new();
    store.add("x", Matrix::scalar(0.0));
    let report = check(&mut store, 1e-5, |tape, store| {
        let x = tape.param(store, store.ids().next().unwrap());
        Ok(tape.relu(x)?)
    })
    .unwrap();
    assert!(report.max_relative_error() > 0.1);
    assert_eq!(relative_error(&[1.0, 0.0], &[1.0, 0.0]), 0.0);
}
