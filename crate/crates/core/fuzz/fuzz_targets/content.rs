#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(table) = gsagcn::data::parse_content(text) {
        let index = table.index();
        assert!(index.len() <= table.ids.len());
    }
});
