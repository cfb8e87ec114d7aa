#![no_main]

use libfuzzer_sys::fuzz_target;
use quadhc::io;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(w) = io::parse_similarity_csv(s, "fuzz") {
            let again = io::parse_similarity_csv(&io::write_similarity_csv(&w), "fuzz").unwrap();
            let bits = |m: &quadhc::SimilarityMatrix| m.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&w), bits(&again));
        }
    }
});
