#![no_main]

use libfuzzer_sys::fuzz_target;
use smote_cls::cli::manifest::RunManifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = RunManifest::parse(text) {
        assert_eq!(RunManifest::parse(&m.to_json()).unwrap(), m);
    }
});
