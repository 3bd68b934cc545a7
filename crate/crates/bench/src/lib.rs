//! Synthetic inputs for the benchmarks.

use std::fmt::Write;

use vulspg::embed::{train_skipgram, SkipGramConfig};
use vulspg::pipeline::{pretraining_sentences, unit_spgs, SpgOptions};
use vulspg::{parse_source, Model, ModelConfig, SourceUnit, Spg, VulnerableLines};

/// A unit of `functions` functions, each calling the previous one and
/// mixing arithmetic, arrays, pointers and library calls.
pub fn synthetic_unit(functions: usize) -> SourceUnit {
    let mut src = String::new();
    for i in 0..functions {
        let _ = writeln!(src, "int f{i}(int n, char *buf)\n{{");
        src.push_str("    int i;\n    int acc;\n    char tmp[16];\n    acc = 0;\n");
        src.push_str("    for (i = 0; i < n; i = i + 1) {\n        if (buf[i] == 0)\n            acc = acc - 1;\n");
        src.push_str("        tmp[i % 16] = buf[i];\n        acc = acc + tmp[i % 16] / n;\n    }\n");
        src.push_str("    memcpy(buf, tmp, n);\n");
        if i > 0 {
            let _ = writeln!(src, "    acc = acc + f{}(n - 1, buf);", i - 1);
        }
        src.push_str("    return acc;\n}\n\n");
    }
    parse_source("bench.c", &src).expect("synthetic unit parses")
}

/// Labeled SPGs of a synthetic unit and a default-sized model over its tokens.
pub fn model_and_spgs(functions: usize) -> (Model, Vec<Spg>) {
    let unit = synthetic_unit(functions);
    let opts = SpgOptions::default();
    let spgs = unit_spgs(&unit, &VulnerableLines::default(), &opts).expect("SPGs");
    let emb = train_skipgram(
        &pretraining_sentences(std::slice::from_ref(&unit), &opts),
        &SkipGramConfig { epochs: 1, ..SkipGramConfig::default() },
    )
    .expect("embeddings");
    (Model::new(ModelConfig::default(), emb).expect("model"), spgs)
}
