#![no_main]

use gsagcn::graph::Graph;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(g) = Graph::parse_edge_list(text) {
        let again = Graph::parse_edge_list(&g.to_edge_list()).expect("written edge lists parse");
        assert_eq!(g, again);
    }
});
