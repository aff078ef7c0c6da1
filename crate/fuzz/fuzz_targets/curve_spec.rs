#![no_main]

use brownflag::curve::CurveSpec;
use brownflag::grid::Square;
use brownflag::C64;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = s.parse::<CurveSpec>() {
        assert_eq!(spec.to_string().parse::<CurveSpec>().unwrap(), spec);
        let curve = spec.bind(Square::new(1.0));
        let t = curve.min_preimage(C64::new(0.25, -0.5)).unwrap();
        let _ = curve.eval(t);
    }
});
