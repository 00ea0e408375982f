#![no_main]

use libfuzzer_sys::fuzz_target;
use siegel::experiments::parse_measures;

fuzz_target!(|data: &[u8]| {
    if let Ok(v) = parse_measures(data) {
        let text = serde_json::to_vec(&v).unwrap();
        assert!(parse_measures(&text).is_ok());
    }
});
