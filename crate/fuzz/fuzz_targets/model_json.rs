#![no_main]

use libfuzzer_sys::fuzz_target;
use zeromode::classifier::{model_from_json, model_to_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = model_from_json(text) {
        let again = model_from_json(&model_to_json(&model)).expect("a loaded model re-serializes");
        assert_eq!(again, model);
    }
});
