use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::frontend::{normalize, SourceUnit};
use crate::graphs::build_cpg;
use crate::model::{predicted_label, Model};
use crate::spg::{spg_for, Spg, SpgCriterion, VulnerableLines};
use crate::syvc::{extract_syvcs, SyvcKind};

use super::{unit_spgs, PipelineError, SpgOptions};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpgVerdict {
    pub criterion: SpgCriterion,
    pub probability: f64,
    pub verdict: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProgramReport {
    pub path: String,
    pub verdict: u8,
    /// Set when the program yields no SyVC, so verdict 0 is not a clean negative.
    pub no_coverage: bool,
    pub spgs: Vec<SpgVerdict>,
}

impl ProgramReport {
    /// Program verdict from per-SPG verdicts: 1 iff any is 1.
    pub fn from_verdicts(path: String, spgs: Vec<SpgVerdict>) -> ProgramReport {
        let verdict = u8::from(spgs.iter().any(|s| s.verdict == 1));
        ProgramReport { path, verdict, no_coverage: spgs.is_empty(), spgs }
    }
}

/// Classifies every SPG of `unit`.
pub fn detect_program(unit: &SourceUnit, model: &Model, opts: &SpgOptions) -> Result<ProgramReport, PipelineError> {
    let spgs = unit_spgs(unit, &VulnerableLines::default(), opts)?;
    let mut verdicts = Vec::with_capacity(spgs.len());
    for s in spgs {
        let p = model.predict(&model.prepare(&s))?;
        verdicts.push(SpgVerdict { criterion: s.criterion, probability: p[1], verdict: predicted_label(p) });
    }
    Ok(ProgramReport::from_verdicts(unit.path.clone(), verdicts))
}

/// SPG counts and vulnerable-line coverage for one kind selection.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Coverage {
    pub kinds: Vec<SyvcKind>,
    /// SPGs per kind, before deduplication.
    pub spgs: BTreeMap<SyvcKind, usize>,
    pub vulnerable_lines: usize,
    pub covered_lines: usize,
}

impl Coverage {
    pub fn fraction(&self) -> Option<f64> {
        (self.vulnerable_lines > 0).then(|| self.covered_lines as f64 / self.vulnerable_lines as f64)
    }
}

fn unit_spgs_raw(unit: &SourceUnit, opts: &SpgOptions) -> Result<Vec<Spg>, PipelineError> {
    let syvcs = extract_syvcs(unit, &opts.api, &opts.kinds);
    let graph_unit = if opts.normalize { normalize(unit, &opts.api).0 } else { unit.clone() };
    let cpg = build_cpg(std::slice::from_ref(&graph_unit))?;
    syvcs.iter().map(|s| spg_for(&cpg, s).map_err(PipelineError::from)).collect()
}

/// A vulnerable line counts as covered when some SPG node spans it.
pub fn coverage(corpus: &[(SourceUnit, VulnerableLines)], opts: &SpgOptions) -> Result<Coverage, PipelineError> {
    let mut out = Coverage { kinds: opts.kinds.iter().copied().collect(), ..Coverage::default() };
    for (unit, vulnerable) in corpus {
        vulnerable.check_files([unit.path.as_str()])?;
        let spgs = unit_spgs_raw(unit, opts)?;
        for s in &spgs {
            *out.spgs.entry(s.criterion.kind).or_default() += 1;
        }
        for (file, lines) in &vulnerable.by_file {
            out.vulnerable_lines += lines.len();
            let covered: BTreeSet<u32> = lines
                .iter()
                .copied()
                .filter(|&l| spgs.iter().flat_map(|s| &s.nodes).any(|n| &n.file == file && n.covers(l)))
                .collect();
            out.covered_lines += covered.len();
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub all: Coverage,
    /// Without FP and FR.
    pub classic: Coverage,
}

impl CoverageReport {
    pub fn is_empty(&self) -> bool {
        self.all.spgs.is_empty() && self.all.vulnerable_lines == 0
    }

    pub fn to_table(&self) -> String {
        let pct = |c: &Coverage| c.fraction().map_or("n/a".to_string(), |f| format!("{:.1}%", 100.0 * f));
        let mut out = String::from("kind   spgs\n");
        for k in SyvcKind::ALL {
            out.push_str(&format!("{:<6} {:>5}\n", k.as_str(), self.all.spgs.get(&k).copied().unwrap_or(0)));
        }
        out.push_str(&format!(
            "coverage, six kinds:  {}/{} ({})\n",
            self.all.covered_lines,
            self.all.vulnerable_lines,
            pct(&self.all)
        ));
        out.push_str(&format!(
            "coverage, four kinds: {}/{} ({})\n",
            self.classic.covered_lines,
            self.classic.vulnerable_lines,
            pct(&self.classic)
        ));
        out
    }
}

/// Coverage with all six kinds and with FC/AU/PU/AE only.
pub fn coverage_report(corpus: &[(SourceUnit, VulnerableLines)], opts: &SpgOptions) -> Result<CoverageReport, PipelineError> {
    let all = SpgOptions { kinds: SyvcKind::ALL.into_iter().collect(), ..opts.clone() };
    let classic = SpgOptions { kinds: SyvcKind::CLASSIC.into_iter().collect(), ..opts.clone() };
    Ok(CoverageReport { all: coverage(corpus, &all)?, classic: coverage(corpus, &classic)? })
}
