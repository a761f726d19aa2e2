#![no_main]

use gcs_core::tensor::Checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ck) = Checkpoint::from_json_str(text) {
        let again = Checkpoint::from_json_str(&ck.to_json_string()).expect("re-encoded checkpoint parses");
        assert_eq!(again.to_json_string(), ck.to_json_string());
    }
});
