#![no_main]

use libfuzzer_sys::fuzz_target;
use zeromode::data::{parse_optdigits, MAX_INGESTED_PIXEL};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(ds) = parse_optdigits(text) {
        for (k, image) in ds.images().iter().enumerate() {
            assert_eq!(image.id(), k);
            assert!(image.label() <= 9);
            assert!(image
                .pixels()
                .iter()
                .all(|&p| (0.0..=MAX_INGESTED_PIXEL as f64).contains(&p)));
        }
        assert_eq!(parse_optdigits(text).unwrap().fingerprint(), ds.fingerprint());
    }
});
