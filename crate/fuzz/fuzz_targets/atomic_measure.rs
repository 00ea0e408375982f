#![no_main]

use libfuzzer_sys::fuzz_target;
use siegel::measures::AtomicMeasure;

fuzz_target!(|data: &[u8]| {
    if let Ok(v) = AtomicMeasure::from_json_slice(data) {
        let text = serde_json::to_vec(&v).unwrap();
        assert!(AtomicMeasure::from_json_slice(&text).is_ok());
    }
});
