#![no_main]

use libfuzzer_sys::fuzz_target;
use zeromode_cli::commands::{array_params, classifier_config, train_config};
use zeromode_cli::settings::{ConfigFormat, Settings};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    for format in [ConfigFormat::Toml, ConfigFormat::Json] {
        if let Ok(s) = Settings::parse(text, format) {
            // Validation must reject bad values with an error, never a panic.
            let s = s.over(Settings::default());
            let _ = array_params(&s);
            let _ = classifier_config(&s);
            let _ = train_config(&s);
            let _ = serde_json::to_string(&s);
        }
    }
});
