#![no_main]

use libfuzzer_sys::fuzz_target;
use siegel::measures::Measure;

fuzz_target!(|data: &[u8]| {
    if let Ok(v) = Measure::from_json_slice(data) {
        let text = serde_json::to_vec(&v).unwrap();
        assert!(Measure::from_json_slice(&text).is_ok());
    }
});
