#![no_main]

use std::collections::HashSet;

use libfuzzer_sys::fuzz_target;
use zeromode::data::{read_split_manifest, SplitTag};

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = read_split_manifest(data) {
        let all = m.ids(SplitTag::All);
        let unique: HashSet<usize> = all.iter().copied().collect();
        assert_eq!(unique.len(), all.len());
    }
});
