//! How many targets each tensor reshape can identify.

use tbdoa::baselines::identifiability::{identifiability_check, ProblemSize, Variant};

fn main() {
    let size = ProblemSize {
        subarrays: 8,
        waveforms: 4,
        receivers: 12,
        pulses: 50,
        targets: 3,
    };
    for variant in [Variant::F, Variant::T] {
        let r = identifiability_check(&size, variant);
        println!(
            "{variant:?}: capacity {} ({:?} binds), L = 3 passes: {}",
            r.capacity, r.binding, r.passed
        );
    }
    // One pulse, multiscale: the third mode holds K N samples.
    let single = Variant::Reshaped {
        i1: 4,
        i2: 4,
        i3: 4 * 12,
    };
    let r = identifiability_check(&ProblemSize { pulses: 1, ..size }, single);
    println!("single pulse: capacity {}", r.capacity);
}
