#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = gsagcn::data::parse_graphs_csv(text) {
        for w in rows.windows(2) {
            assert_eq!(w[0].first_node + w[0].num_nodes, w[1].first_node);
        }
    }
});
