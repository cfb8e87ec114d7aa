#![no_main]

use libfuzzer_sys::fuzz_target;
use quadhc::harness::RunManifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = RunManifest::from_json_str(s);
    }
});
