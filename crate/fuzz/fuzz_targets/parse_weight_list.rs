#![no_main]

use ensemblefuse::ensemble::{parse_weight_list, project_to_simplex};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(raw) = parse_weight_list(s) {
            let w = project_to_simplex(&raw);
            let sum: f64 = w.as_slice().iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12, "{raw:?} -> {w:?}");
            assert!(w.as_slice().iter().all(|x| *x >= 0.0));
        }
    }
});
