#![no_main]

use libfuzzer_sys::fuzz_target;
use quadhc::io;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(d) = io::parse_linkage_csv(s, "fuzz") {
            let again = io::parse_linkage_csv(&io::write_linkage_csv(&d), "fuzz").unwrap();
            assert_eq!(again.merges().len(), d.merges().len());
            let _ = d.to_newick();
        }
    }
});
