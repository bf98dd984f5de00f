use std::fs;
use std::path::Path;

use npsn_core::lds::{sobol_points, SobolState};

fn fixture() -> Vec<(usize, u64, Vec<u32>)> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/sobol_reference.txt");
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let v: Vec<u64> = l.split_whitespace().map(|t| t.parse().unwrap()).collect();
            (
                v[0] as usize,
                v[1],
                v[2..].iter().map(|&x| x as u32).collect(),
            )
        })
        .collect()
}

#[test]
fn raw_integers_match_reference_table() {
    let rows = fixture();
    assert_eq!(rows.len(), 3 * 64);
    for (s, index, want) in rows {
        let state = SobolState::new(s).unwrap();
        let got: Vec<u32> = (0..s).map(|d| state.raw(index, d)).collect();
        assert_eq!(got, want, "s={s} index={index}");
    }
}

#[test]
fn point_sets_are_the_scaled_integers() {
    let pts = sobol_points(64, 8).unwrap();
    for (s, index, want) in fixture().into_iter().filter(|r| r.0 == 8) {
        for d in 0..s {
            assert_eq!(
                pts.point(index as usize)[d],
                f64::from(want[d]) / 4294967296.0
            );
        }
    }
}
