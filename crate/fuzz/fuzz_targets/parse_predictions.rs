#![no_main]

use ensemblefuse::metrics::evaluate;
use ensemblefuse::model_io::{parse_labels, parse_predictions};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(m) = parse_predictions(data) else {
        return;
    };
    assert!(m.n_samples() >= 1);
    assert_eq!(m.values().len(), m.n_samples() * m.n_classes());
    assert!(m.values().iter().all(|v| (0.0..=1.0).contains(v)));

    // Threshold the matrix into labels so evaluate sees arbitrary shapes.
    let mut text = m.classes().names().join(",");
    text.push('\n');
    for row in m.values().chunks(m.n_classes()) {
        let fields: Vec<&str> = row
            .iter()
            .map(|v| if *v >= 0.5 { "1" } else { "0" })
            .collect();
        text.push_str(&fields.join(","));
        text.push('\n');
    }
    let labels = parse_labels(text.as_bytes()).expect("thresholded labels parse");
    if let Ok(report) = evaluate(&m, &labels) {
        assert!((0.0..=1.0).contains(&report.mean));
    }
});
