#![no_main]

use brownflag::grid::Square;
use brownflag::region::Region;
use brownflag::C64;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(r) = Region::parse(s, Square::new(1.0)) {
        let z = C64::new(0.1, 0.2);
        assert_eq!(r.clone().complement().contains(z), !r.contains(z));
    }
});
