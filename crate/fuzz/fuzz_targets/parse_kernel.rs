#![no_main]

use libfuzzer_sys::fuzz_target;
use quadhc::io;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok((k, q)) = io::parse_kernel_csv(s, "fuzz") {
            let again = io::parse_kernel_csv(&io::write_kernel_csv(&k, q), "fuzz").unwrap();
            assert_eq!(again, (k, q));
        }
    }
});
