#![no_main]

use brownflag::ensemble::EnsembleSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = s.parse::<EnsembleSpec>() {
        assert_eq!(spec.to_string().parse::<EnsembleSpec>().unwrap(), spec);
        if spec.n <= 16 {
            assert!(spec.sample().unwrap().is_finite());
        }
    }
});
