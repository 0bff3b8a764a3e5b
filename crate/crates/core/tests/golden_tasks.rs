//! Golden-file check for the copy-task generator: regenerate each recorded
//! sample from its (seed, spec) and require byte-identical serialization.
//! Regenerate the file with `cargo test -p cernn-core print_golden --
//! --ignored --nocapture` if the generator intentionally changes.

use cernn_core::rng::Rng;
use cernn_core::tasks::{gen_copy_batch, CopyTaskSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct GoldenLine {
    seed: u64,
    t_len: usize,
    n_fill: usize,
    sample: usize,
    inputs: Vec<usize>,
    targets: Vec<usize>,
}

#[test]
fn copy_generator_matches_golden_file() {
    let raw = include_str!("golden/copy_samples.jsonl");
    let mut checked = 0;
    for line in raw.lines().filter(|l| !l.trim().is_empty()) {
        let golden: GoldenLine = serde_json::from_str(line).expect("golden line parses");
        let spec = CopyTaskSpec::new(golden.t_len, golden.n_fill, golden.seed);
        let mut rng = Rng::stream(golden.seed, 2);
        let batch = gen_copy_batch(&spec, golden.sample + 1, &mut rng);
        let regenerated = &batch.samples[golden.sample];
        let line_now = serde_json::to_string(&GoldenLine {
            seed: golden.seed,
            t_len: golden.t_len,
            n_fill: golden.n_fill,
            sample: golden.sample,
            inputs: regenerated.inputs.clone(),
            targets: regenerated.targets.clone(),
        })
        .unwrap();
        // Byte-stable serialization: the regenerated line must equal the
        // stored line exactly.
        assert_eq!(line_now, line, "sample {} drifted", golden.sample);
        checked += 1;
    }
    assert_eq!(checked, 4);
}
