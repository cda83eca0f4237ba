#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(t) = gsagcn::data::parse_features_csv(text) {
        assert_eq!(t.x.rows(), t.labels.len());
    }
});
