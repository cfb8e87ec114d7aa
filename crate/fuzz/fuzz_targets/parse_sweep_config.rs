#![no_main]

use libfuzzer_sys::fuzz_target;
use quadhc::harness::SweepConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = SweepConfig::from_toml_str(s, "fuzz");
        let _ = SweepConfig::from_json_str(s);
    }
});
