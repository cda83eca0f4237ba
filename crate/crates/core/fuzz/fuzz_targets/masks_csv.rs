#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = gsagcn::data::parse_masks_csv(text) {
        let (tr, va, te) = m.counts();
        assert!(tr + va + te <= 3 * m.len());
    }
});
