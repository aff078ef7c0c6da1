#![no_main]

use brownflag::ComplexMatrix;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(m) = ComplexMatrix::from_json(s) {
        assert!(m.is_finite());
        let again = ComplexMatrix::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(again, m);
    }
});
