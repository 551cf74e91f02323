#![no_main]

use libfuzzer_sys::fuzz_target;
use smote_cls::metrics::Method;
use smote_cls::sampler::Strategy;
use smote_cls::simgen::Origin;

// Command-line and column tokens. Anything accepted must print back to a
// token that parses to the same value.
fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(st) = s.parse::<Strategy>() {
        assert_eq!(st.to_string().parse::<Strategy>().unwrap(), st);
    }
    if let Ok(m) = s.parse::<Method>() {
        assert_eq!(m.label().parse::<Method>().unwrap(), m);
    }
    let _ = s.parse::<Origin>();
});
