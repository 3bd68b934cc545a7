use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::frontend::{normalize, parse_source, SourceUnit};
use crate::graphs::build_cpg;
use crate::spg::{dedup, label_spg, spg_for, Spg, VulnerableLines};
use crate::syvc::{extract_syvcs, SyvcKind};

use super::PipelineError;

/// One program: a source file and its vulnerable lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub vulnerable_lines: BTreeSet<u32>,
}

impl ManifestEntry {
    pub fn is_vulnerable(&self) -> bool {
        !self.vulnerable_lines.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Parses `path<TAB>comma-separated-lines` rows. Relative paths are
    /// resolved against `base`. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str, base: &Path) -> Result<DatasetManifest, PipelineError> {
        let mut entries = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (path, lines) = line.split_once('\t').unwrap_or((line, ""));
            let mut vulnerable_lines = BTreeSet::new();
            for item in lines.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let n: u32 = item.parse().map_err(|_| {
                    PipelineError::Config(format!("manifest line {}: `{item}` is not a line number", no + 1))
                })?;
                vulnerable_lines.insert(n);
            }
            let path = Path::new(path.trim());
            let path = if path.is_relative() { base.join(path) } else { path.to_path_buf() };
            entries.push(ManifestEntry { path, vulnerable_lines });
        }
        Ok(DatasetManifest { entries })
    }

    pub fn load(path: &Path) -> Result<DatasetManifest, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        DatasetManifest::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|e| {
                let lines: Vec<String> = e.vulnerable_lines.iter().map(u32::to_string).collect();
                format!("{}\t{}\n", e.path.display(), lines.join(","))
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Program-level split: indices of training and test programs, each sorted.
pub fn split_dataset(programs: usize, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), PipelineError> {
    if programs < 2 {
        return Err(PipelineError::Config(format!("need at least 2 programs to split, got {programs}")));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(PipelineError::Config(format!("split ratio {ratio} is outside (0, 1)")));
    }
    let mut order: Vec<usize> = (0..programs).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((programs as f64 * ratio).round() as usize).clamp(1, programs - 1);
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// What SPG generation extracts.
#[derive(Debug, Clone, PartialEq)]
pub struct SpgOptions {
    pub kinds: BTreeSet<SyvcKind>,
    pub api: BTreeSet<String>,
    /// Rename user identifiers before building graphs.
    pub normalize: bool,
}

impl Default for SpgOptions {
    fn default() -> Self {
        SpgOptions { kinds: SyvcKind::ALL.into_iter().collect(), api: crate::syvc::default_api_list(), normalize: true }
    }
}

/// SPGs of one program, in generation order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgramSpgs {
    /// Position of the program in its manifest.
    pub program: usize,
    pub path: String,
    pub spgs: Vec<Spg>,
}

/// Generates, labels and deduplicates the SPGs of one parsed unit.
/// Criterion elements keep their source spelling; node text is normalized
/// when `opts.normalize` is set.
pub fn unit_spgs(unit: &SourceUnit, vulnerable: &VulnerableLines, opts: &SpgOptions) -> Result<Vec<Spg>, PipelineError> {
    vulnerable.check_files([unit.path.as_str()])?;
    let syvcs = extract_syvcs(unit, &opts.api, &opts.kinds);
    let graph_unit = if opts.normalize { normalize(unit, &opts.api).0 } else { unit.clone() };
    let cpg = build_cpg(std::slice::from_ref(&graph_unit))?;
    let mut spgs = Vec::with_capacity(syvcs.len());
    for s in &syvcs {
        let mut spg = spg_for(&cpg, s)?;
        spg.label = Some(label_spg(&spg, vulnerable));
        spgs.push(spg);
    }
    Ok(dedup(spgs))
}

pub fn read_unit(path: &Path) -> Result<SourceUnit, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    let name = path.display().to_string();
    parse_source(&name, &text).map_err(|e| PipelineError::Frontend { path: name, source: e })
}

/// SPGs of every manifest program, generated in parallel, in manifest order.
pub fn generate_corpus(manifest: &DatasetManifest, opts: &SpgOptions) -> Result<Vec<ProgramSpgs>, PipelineError> {
    manifest
        .entries
        .par_iter()
        .enumerate()
        .map(|(program, entry)| {
            let unit = read_unit(&entry.path)?;
            let mut vulnerable = VulnerableLines::default();
            for &l in &entry.vulnerable_lines {
                vulnerable.insert(unit.path.clone(), l);
            }
            let spgs = unit_spgs(&unit, &vulnerable, opts)?;
            Ok(ProgramSpgs { program, path: unit.path.clone(), spgs })
        })
        .collect()
}

/// Token sentences for embedding pretraining: one per function, the
/// statement tokens of the (optionally normalized) unit in order.
pub fn pretraining_sentences(units: &[SourceUnit], opts: &SpgOptions) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for unit in units {
        let unit = if opts.normalize { normalize(unit, &opts.api).0 } else { unit.clone() };
        for f in &unit.functions {
            out.push(f.statements.iter().flat_map(|s| s.tokens.iter().map(|t| t.text.clone())).collect());
        }
    }
    out
}

/// Number of SPGs per label, as `[label 0, label 1]`.
pub fn label_counts<'a>(spgs: impl IntoIterator<Item = &'a Spg>) -> [usize; 2] {
    let mut counts = [0, 0];
    for s in spgs {
        if let Some(l) = s.label {
            counts[usize::from(l.min(1))] += 1;
        }
    }
    counts
}
