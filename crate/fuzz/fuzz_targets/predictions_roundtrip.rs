#![no_main]

use ensemblefuse::model_io::{
    parse_predictions, write_predictions_to, ClassList, PredictionMatrix,
};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let values: Vec<f64> = data
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .filter(|v| (0.0..=1.0).contains(v))
        .collect();
    if values.is_empty() {
        return;
    }
    let width = (data[0] as usize % 4) + 1;
    let usable = values.len() / width * width;
    if usable == 0 {
        return;
    }
    let classes = ClassList::new((0..width).map(|i| format!("c{i}"))).unwrap();
    let m = PredictionMatrix::from_flat(classes, values[..usable].to_vec()).unwrap();
    let mut buf = Vec::new();
    write_predictions_to(&m, &mut buf).unwrap();
    let back = parse_predictions(buf.as_slice()).unwrap();
    for (a, b) in m.values().iter().zip(back.values()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
});
