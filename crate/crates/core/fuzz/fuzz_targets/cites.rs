#![no_main]

use std::collections::HashMap;

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let index: HashMap<&str, usize> = [("a", 0), ("b", 1), ("31336", 2), ("1061127", 3)].into_iter().collect();
    if let Ok((edges, _, _)) = gsagcn::data::parse_cites(text, &index) {
        assert!(edges.iter().all(|&(a, b)| a < 4 && b < 4 && a != b));
    }
});
