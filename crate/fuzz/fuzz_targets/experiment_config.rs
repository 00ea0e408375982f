#![no_main]

use libfuzzer_sys::fuzz_target;
use siegel::experiments::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(v) = ExperimentConfig::from_json_slice(data) {
        let text = serde_json::to_vec(&v).unwrap();
        assert!(ExperimentConfig::from_json_slice(&text).is_ok());
    }
});
