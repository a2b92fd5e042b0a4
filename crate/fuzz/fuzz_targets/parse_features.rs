#![no_main]

use ensemblefuse::model_io::parse_features;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = parse_features(data) {
        assert!(m.values().iter().all(|v| v.is_finite()));
    }
});
