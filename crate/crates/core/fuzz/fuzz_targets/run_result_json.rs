#![no_main]

use gcs_core::tree::RunResult;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = RunResult::from_json_str(text) {
        let again = RunResult::from_json_str(&r.to_json_string()).expect("re-encoded result parses");
        assert_eq!(again.to_json_string(), r.to_json_string());
    }
});
