#![no_main]

use libfuzzer_sys::fuzz_target;
use quadhc::{eval, io};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok((values, dim)) = io::parse_features_csv(s, "fuzz") {
            assert_eq!(values.len() % dim, 0);
            if values.len() / dim <= 64 {
                let _ = eval::cosine_similarity_matrix(&values, dim);
            }
        }
    }
});
