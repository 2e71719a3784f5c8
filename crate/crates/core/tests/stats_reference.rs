//! Frozen reference values from scipy (F quantiles) and statsmodels (MANOVA);
//! see fixtures/generate_reference.py.

use serde::Deserialize;
use streetcov_core::geo::Point;
use streetcov_core::stats::{f_cdf, manova_two_group_named};

#[derive(Deserialize)]
struct Quantile {
    d1: f64,
    d2: f64,
    p: f64,
    x: f64,
}

#[derive(Deserialize)]
struct ManovaCase {
    a: Vec<[f64; 2]>,
    b: Vec<[f64; 2]>,
    wilks: f64,
    wilks_p: f64,
    pillai: f64,
    pillai_p: f64,
    hotelling: f64,
    hotelling_p: f64,
    roy: f64,
    roy_p: f64,
}

fn fixture(name: &str) -> String {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

#[test]
fn f_cdf_matches_reference_quantiles() {
    let table: Vec<Quantile> = serde_json::from_str(&fixture("f_quantiles.json")).unwrap();
    assert_eq!(table.len(), 20);
    for q in &table {
        let p = f_cdf(q.x, q.d1, q.d2);
        assert!(
            (p - q.p).abs() < 1e-6,
            "F({}, {}) at {}: {p} vs {}",
            q.d1,
            q.d2,
            q.x,
            q.p
        );
    }
}

#[test]
fn manova_matches_reference_implementation() {
    let cases: Vec<ManovaCase> = serde_json::from_str(&fixture("manova_reference.json")).unwrap();
    assert_eq!(cases.len(), 20);
    let pts = |v: &[[f64; 2]]| v.iter().map(|p| Point::new(p[0], p[1])).collect::<Vec<_>>();
    for (i, c) in cases.iter().enumerate() {
        let r = manova_two_group_named(&pts(&c.a), "a", &pts(&c.b), "b").unwrap();
        let close = |got: f64, want: f64, what: &str| {
            assert!(
                (got - want).abs() <= 1e-9 * want.abs().max(1.0),
                "case {i} {what}: {got} vs {want}"
            );
        };
        close(r.wilks_lambda, c.wilks, "wilks");
        close(r.pillai_trace, c.pillai, "pillai");
        close(r.hotelling_lawley, c.hotelling, "hotelling");
        close(r.roys_root, c.roy, "roy");
        for (got, want, what) in [
            (r.p_values.wilks, c.wilks_p, "wilks p"),
            (r.p_values.pillai, c.pillai_p, "pillai p"),
            (r.p_values.hotelling_lawley, c.hotelling_p, "hotelling p"),
            (r.p_values.roy, c.roy_p, "roy p"),
        ] {
            assert!((got - want).abs() < 1e-6, "case {i} {what}: {got} vs {want}");
        }
    }
}
