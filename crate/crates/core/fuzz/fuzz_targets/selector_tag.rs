#![no_main]

use gcs_core::experiment::SplitPart;
use gcs_core::generate::Family;
use gcs_core::policy::SelectorTag;
use gcs_core::tree::CutScope;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(tag) = SelectorTag::parse(s) {
        assert!(s.starts_with(tag.label()));
    }
    if let Ok(scope) = CutScope::parse(s) {
        assert_eq!(CutScope::parse(scope.tag()).unwrap(), scope);
    }
    if let Ok(f) = Family::parse(s) {
        assert_eq!(Family::parse(f.tag()).unwrap(), f);
    }
    let _ = SplitPart::parse(s);
});
