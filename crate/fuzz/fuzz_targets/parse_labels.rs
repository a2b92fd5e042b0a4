#![no_main]

use ensemblefuse::losses::compute_prevalence;
use ensemblefuse::model_io::parse_labels;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(labels) = parse_labels(data) {
        assert!(labels.values().iter().all(|&y| y <= 1));
        let rho = compute_prevalence(&labels);
        assert!(rho.rho.iter().all(|r| (0.0..=1.0).contains(r)));
    }
});
