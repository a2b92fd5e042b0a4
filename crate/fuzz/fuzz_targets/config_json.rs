#![no_main]

use ensemblefuse::ensemble::DEConfig;
use ensemblefuse::losses::LossConfig;
use ensemblefuse::synthlab::{SynthConfig, ToyTrainConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(cfg) = serde_json::from_str::<SynthConfig>(s) {
            let _ = cfg.validate();
        }
        if let Ok(cfg) = serde_json::from_str::<LossConfig>(s) {
            let _ = cfg.validate();
        }
        if let Ok(cfg) = serde_json::from_str::<ToyTrainConfig>(s) {
            let _ = cfg.validate();
        }
        if let Ok(cfg) = serde_json::from_str::<DEConfig>(s) {
            let _ = cfg.validate(2);
        }
    }
});
