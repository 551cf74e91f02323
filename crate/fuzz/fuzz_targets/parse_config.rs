#![no_main]

use libfuzzer_sys::fuzz_target;
use smote_cls::cli::config::{parse_config, Overrides, Settings};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(map) = parse_config(text) {
        let _ = Settings::resolve(&Overrides::default(), &map);
    }
});
