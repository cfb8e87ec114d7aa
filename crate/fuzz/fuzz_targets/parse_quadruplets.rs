#![no_main]

use libfuzzer_sys::fuzz_target;
use quadhc::{io, oracle};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(rows) = io::parse_quadruplets_csv(s, "fuzz") {
            // ingestion may reject rows (contradictions, too many items) but must not panic
            if let Ok(qs) = oracle::ingest_quadruplets(&rows, None) {
                let text = io::write_quadruplets_csv(&qs);
                let back = io::parse_quadruplets_csv(&text, "fuzz").unwrap();
                assert_eq!(back.len(), qs.len());
            }
        }
    }
});
