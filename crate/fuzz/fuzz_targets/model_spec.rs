#![no_main]

use embedcap::ModelSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = text.parse::<ModelSpec>() {
        let again: ModelSpec = spec.to_string().parse().expect("display output parses");
        assert_eq!(again.model(), spec.model());
        let m = spec.model();
        assert!(m.rate() > 0.0 && m.rate().is_finite());
        let _ = m.updf(1.0);
        let _ = m.cdf(1.0);
    }
});
