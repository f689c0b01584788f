use proptest::prelude::*;

use tightwin::formats::{
    check_csv, read_window_csv, write_spectrum_csv, write_summary_csv, write_trace_csv, write_window_csv, CsvKind,
    Metrics, SummaryRow, WindowFile,
};
use tightwin::gabor::{GaborParams, Window};
use tightwin::solver::{init_from_slepian, solve, SolverConfig};
use tightwin::spectral::spectrum;

#[test]
fn unknown_fields_and_bad_geometry_are_rejected() {
    let ok = r#"{"K": 4, "a": 2, "M": 4, "p": null, "lambda": null, "coeffs": [1, 0.5, 0.5, 1]}"#;
    assert!(WindowFile::from_json(ok).is_ok());
    let extra = r#"{"K": 4, "a": 2, "M": 4, "p": null, "lambda": null, "coeffs": [1, 1, 1, 1], "x": 1}"#;
    assert!(WindowFile::from_json(extra).is_err());
    let short = r#"{"K": 4, "a": 2, "M": 4, "p": null, "lambda": null, "coeffs": [1, 1]}"#;
    assert!(WindowFile::from_json(short).is_err());
    let bad_hop = r#"{"K": 4, "a": 3, "M": 4, "p": null, "lambda": null, "coeffs": [1, 1, 1, 1]}"#;
    assert!(WindowFile::from_json(bad_hop).is_err());
}

#[test]
fn every_csv_we_write_passes_the_checker() {
    let params = GaborParams::new(64, 16, 4, 16).unwrap();
    let w = init_from_slepian(0.2, &params).unwrap();
    let sol = solve(&w, 0.2, &SolverConfig::default()).unwrap();

    let mut buf = Vec::new();
    write_spectrum_csv(&mut buf, &spectrum(w.coeffs(), 256).unwrap()).unwrap();
    assert_eq!(check_csv(std::str::from_utf8(&buf).unwrap()).unwrap(), (CsvKind::Spectrum, 256));

    let mut buf = Vec::new();
    write_trace_csv(&mut buf, &sol.trace).unwrap();
    let rows = sol.trace.iterations + 1;
    assert_eq!(check_csv(std::str::from_utf8(&buf).unwrap()).unwrap(), (CsvKind::Trace, rows));

    let mut buf = Vec::new();
    let row = SummaryRow {
        p_numerator: 3,
        iterations: 4,
        status: "converged".into(),
        concentration: 0.99,
        sidelobe_energy: 0.01,
    };
    write_summary_csv(&mut buf, &[row]).unwrap();
    assert_eq!(check_csv(std::str::from_utf8(&buf).unwrap()).unwrap(), (CsvKind::Summary, 1));

    let mut buf = Vec::new();
    write_window_csv(&mut buf, w.coeffs()).unwrap();
    assert_eq!(check_csv(std::str::from_utf8(&buf).unwrap()).unwrap(), (CsvKind::Window, 16));
}

#[test]
fn malformed_csv_is_reported() {
    assert!(check_csv("").is_err());
    assert!(check_csv("iter,grad_norm,objective\n0,1e-3,-0.4\n2,1e-5,-0.45\n").is_err());
    assert!(check_csv("1.0\nabc\n").is_err());
    let bad_status = "p_numerator,iterations,status,concentration,sidelobe_energy\n1,2,maybe,0.9,0.1\n";
    assert!(check_csv(bad_status).is_err());
}

#[test]
fn metrics_round_trip() {
    let m = Metrics {
        p: 0.125,
        concentration: 0.999,
        sidelobe_energy: 1e-3,
        is_tight: true,
        lambda: 4.0,
    };
    let text = serde_json::to_string(&m).unwrap();
    let back: Metrics = serde_json::from_str(&text).unwrap();
    assert_eq!(back, m);
    assert!(back.validate().is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn window_files_round_trip_exactly(coeffs in prop::collection::vec(-1e3f64..1e3, 12)) {
        let params = GaborParams::new(48, 12, 3, 12).unwrap();
        let w = Window::new(coeffs, params).unwrap();
        let file = WindowFile::from_window(&w, Some(0.25), None);
        let back = WindowFile::from_json(&file.to_json()).unwrap();
        prop_assert_eq!(back.to_window(48).unwrap(), w.clone());

        let mut buf = Vec::new();
        write_window_csv(&mut buf, w.coeffs()).unwrap();
        prop_assert_eq!(read_window_csv(&buf[..]).unwrap(), w.coeffs().to_vec());
    }
}
