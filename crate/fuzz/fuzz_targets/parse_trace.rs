#![no_main]

use embedcap::traces::parse_trace_str;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&col, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    let column = usize::from(col % 4);
    if let Ok(trace) = parse_trace_str(text, column, "fuzz") {
        let ts = trace.timestamps();
        assert!(!ts.is_empty());
        assert!(ts.iter().all(|t| t.is_finite()));
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
    }
});
