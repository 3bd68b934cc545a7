//! Program graphs: per-function CFG and PDG, and the whole-program CPG
//! with call edges.

mod cfg;
mod control;
mod cpg;
mod dataflow;
pub mod export;
mod postdom;

pub use cfg::{build_cfg, Cfg, CfgNode};
pub use control::control_dependencies;
pub use cpg::{build_cpg, CallEdge, Cpg, FuncId, Pdg, QualifiedStmt, StmtInfo};
pub use dataflow::{def_use, reaching_definitions, Def, DefUse, ReachingDefinitions};
pub use postdom::{post_dominators, PostDominators};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::StmtId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeKind {
    #[serde(rename = "DATA")]
    Data,
    #[serde(rename = "CONTROL")]
    Control,
    #[serde(rename = "FUNCTION_CALL")]
    FunctionCall,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 3] = [EdgeKind::Data, EdgeKind::Control, EdgeKind::FunctionCall];

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Data => "DATA",
            EdgeKind::Control => "CONTROL",
            EdgeKind::FunctionCall => "FUNCTION_CALL",
        }
    }

    /// Label used in DOT output.
    pub fn dot_label(self) -> &'static str {
        match self {
            EdgeKind::Data => "DATA",
            EdgeKind::Control => "CONTROL",
            EdgeKind::FunctionCall => "CALL",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Intraprocedural dependence between two statements of one function.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct DependencyEdge {
    pub src: StmtId,
    pub dst: StmtId,
    pub kind: EdgeKind,
    /// Governing variable of a DATA edge.
    pub variable: Option<String>,
}

impl DependencyEdge {
    pub fn new(src: StmtId, dst: StmtId, kind: EdgeKind, variable: Option<String>) -> Self {
        DependencyEdge { src, dst, kind, variable }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("function `{function}`: EXIT is unreachable from {node}")]
    ExitUnreachable { function: String, node: String },
}
