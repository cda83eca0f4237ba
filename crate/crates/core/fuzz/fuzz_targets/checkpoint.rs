#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(params) = gsagcn::checkpoint::decode(data) {
        assert_eq!(gsagcn::checkpoint::encode(&params), data);
    }
});
