#![no_main]

//! Run configuration sections as the CLI reads them from TOML.

use gsagcn::data::{GraphSynthConfig, SynthConfig};
use gsagcn::diagnostics::LemmaSuiteConfig;
use gsagcn::train::TrainConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = toml::from_str::<TrainConfig>(text) {
        let _ = c.validate();
    }
    if let Ok(c) = toml::from_str::<SynthConfig>(text) {
        let _ = c.validate();
    }
    if let Ok(c) = toml::from_str::<GraphSynthConfig>(text) {
        let _ = c.validate();
    }
    if let Ok(c) = toml::from_str::<LemmaSuiteConfig>(text) {
        let _ = c.validate();
    }
});
