#![no_main]

use gcs_core::instance::MipInstance;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(inst) = MipInstance::from_json_str(text) {
        // accepted documents survive a re-encode unchanged
        let again = MipInstance::from_json_str(&inst.to_json_string()).expect("re-encoded instance parses");
        assert_eq!(again, inst);
        assert_eq!(again.content_hash(), inst.content_hash());
    }
});
