#![no_main]

use libfuzzer_sys::fuzz_target;
use quadhc::io;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(p) = io::parse_partition_csv(s, "fuzz") {
            let labels = p.labels(p.n_items()).unwrap();
            let again = io::parse_partition_csv(&io::write_partition_csv(&labels), "fuzz").unwrap();
            assert_eq!(again.labels(again.n_items()).unwrap(), labels);
        }
    }
});
