#![no_main]

use libfuzzer_sys::fuzz_target;
use quadhc::{io, oracle};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(rows) = io::parse_triplets_csv(s, "fuzz") {
            let _ = oracle::ingest_triplets(&rows, None);
        }
    }
});
