#![no_main]

use brownflag::dyadic::Dyadic;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(d) = s.parse::<Dyadic>() {
        assert!(d <= Dyadic::ONE);
        assert_eq!(d.to_string().parse::<Dyadic>().unwrap(), d);
    }
});
