//! Shared generators and brute-force oracles for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use vulspg::embed::{Embeddings, NodeInitConfig, Vocabulary};
use vulspg::frontend::{AstKind, Span, StmtId};
use vulspg::graphs::{Cfg, CfgNode, DefUse, Def, DependencyEdge, FuncId, Pdg, StmtInfo};
use vulspg::model::{Model, ModelConfig};
use vulspg::spg::{Spg, SpgCriterion, SpgEdge, SpgNode};
use vulspg::syvc::SyvcKind;
use vulspg::{parse_source, EdgeKind, SourceUnit, Tensor, VulnerableLines};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn read_fixture(name: &str) -> SourceUnit {
    let text = std::fs::read_to_string(fixture(name)).unwrap();
    parse_source(name, &text).unwrap()
}

// ---------------------------------------------------------------------------
// slicing

/// A PDG with `n` statements and random DATA/CONTROL edges.
pub fn random_pdg(rng: &mut ChaCha8Rng, n: usize) -> Pdg {
    let statements = (0..n)
        .map(|i| StmtInfo {
            id: StmtId(i as u32),
            kind: AstKind::ExpressionStatement,
            text: format!("s{i}"),
            tokens: vec![format!("s{i}")],
            span: Span { start: i as u32 + 1, end: i as u32 + 1 },
            calls: Vec::new(),
        })
        .collect();
    let density = rng.gen_range(0.05..0.35);
    let mut edges = BTreeSet::new();
    for a in 0..n {
        for b in 0..n {
            if rng.gen_bool(density) {
                let kind = if rng.gen_bool(0.5) { EdgeKind::Data } else { EdgeKind::Control };
                edges.insert(DependencyEdge::new(StmtId(a as u32), StmtId(b as u32), kind, None));
            }
        }
    }
    Pdg::from_parts(FuncId(0), "f", statements, Cfg::new("f"), edges)
}

/// Transitive closure by Floyd–Warshall: `reach[a][b]` iff a path of length ≥ 0 leads from a to b.
pub fn reachability(pdg: &Pdg) -> Vec<Vec<bool>> {
    let n = pdg.statements.len();
    let mut reach = vec![vec![false; n]; n];
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
    }
    for e in &pdg.edges {
        reach[e.src.0 as usize][e.dst.0 as usize] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    reach
}

// ---------------------------------------------------------------------------
// control dependence

/// A random structured function body with at most `budget` statements.
pub fn random_structured_function(rng: &mut ChaCha8Rng, budget: usize) -> String {
    fn block(rng: &mut ChaCha8Rng, left: &mut usize, depth: usize, out: &mut String) {
        let count = rng.gen_range(1..=3);
        for _ in 0..count {
            if *left == 0 {
                return;
            }
            *left -= 1;
            let choice = if depth >= 3 || *left == 0 { 0 } else { rng.gen_range(0..5) };
            match choice {
                1 => {
                    out.push_str("if (c) {\n");
                    block(rng, left, depth + 1, out);
                    out.push_str("}\n");
                }
                2 => {
                    out.push_str("if (c) {\n");
                    block(rng, left, depth + 1, out);
                    out.push_str("} else {\n");
                    block(rng, left, depth + 1, out);
                    out.push_str("}\n");
                }
                3 => {
                    out.push_str("while (c) {\n");
                    block(rng, left, depth + 1, out);
                    out.push_str("}\n");
                }
                4 => {
                    out.push_str("for (i = 0; i < c; i = i + 1) {\n");
                    block(rng, left, depth + 1, out);
                    out.push_str("}\n");
                }
                _ if rng.gen_bool(0.1) && depth > 0 => out.push_str("return;\n"),
                _ => out.push_str("a = a + 1;\n"),
            }
        }
    }
    let mut body = String::new();
    let mut left = budget;
    block(rng, &mut left, 0, &mut body);
    format!("void f(int c)\n{{\nint a;\nint i;\n{body}}}\n")
}

/// Brute-force post-dominance: `y` post-dominates `z` iff `z == y` or
/// `z` cannot reach EXIT once `y` is removed.
pub fn brute_post_dominates(cfg: &Cfg, y: CfgNode, z: CfgNode) -> bool {
    if y == z {
        return true;
    }
    let mut seen = BTreeSet::from([z]);
    let mut queue = VecDeque::from([z]);
    while let Some(n) = queue.pop_front() {
        if n == CfgNode::Exit {
            return false;
        }
        for s in cfg.successors(n) {
            if s != y && seen.insert(s) {
                queue.push_back(s);
            }
        }
    }
    true
}

/// Path-based control dependence: `y` depends on `x` iff some path
/// `x → s → … → y` has every node after `x` post-dominated by `y`, and
/// `y` does not strictly post-dominate `x`.
pub fn brute_control_dependence(cfg: &Cfg) -> BTreeSet<(StmtId, StmtId)> {
    let stmts: Vec<StmtId> = cfg.statements().collect();
    let mut out = BTreeSet::new();
    for &x in &stmts {
        for &y in &stmts {
            let (xn, yn) = (CfgNode::Stmt(x), CfgNode::Stmt(y));
            if x != y && brute_post_dominates(cfg, yn, xn) {
                continue;
            }
            let found = cfg.successors(xn).any(|s| {
                if !brute_post_dominates(cfg, yn, s) {
                    return false;
                }
                let mut seen = BTreeSet::from([s]);
                let mut queue = VecDeque::from([s]);
                while let Some(n) = queue.pop_front() {
                    if n == yn {
                        return true;
                    }
                    for m in cfg.successors(n) {
                        if brute_post_dominates(cfg, yn, m) && seen.insert(m) {
                            queue.push_back(m);
                        }
                    }
                }
                false
            });
            if found {
                out.insert((x, y));
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// reaching definitions

pub const VARS: [&str; 3] = ["x", "y", "z"];

/// A random DAG over statements 1..=n where every statement is reachable
/// from ENTRY and reaches EXIT, with random strong and weak defs and uses.
pub fn random_acyclic(rng: &mut ChaCha8Rng, n: usize) -> (Cfg, BTreeMap<StmtId, DefUse>) {
    let node = |i: usize| if i == 0 { CfgNode::Entry } else { CfgNode::Stmt(StmtId(i as u32)) };
    let mut edges = Vec::new();
    let mut has_succ = vec![false; n + 1];
    for i in 1..=n {
        let first = rng.gen_range(0..i);
        edges.push((node(first), node(i)));
        has_succ[first] = true;
        for p in 0..i {
            if p != first && rng.gen_bool(0.25) {
                edges.push((node(p), node(i)));
                has_succ[p] = true;
            }
        }
    }
    for (i, &h) in has_succ.iter().enumerate() {
        if !h || rng.gen_bool(0.15) {
            edges.push((node(i), CfgNode::Exit));
        }
    }
    let cfg = Cfg::from_edges("f", edges);
    let mut defuse = BTreeMap::new();
    for i in 1..=n {
        let mut du = DefUse::default();
        for v in VARS {
            match rng.gen_range(0..6) {
                0 | 1 => du.defs.push(Def { var: v.into(), strong: true }),
                2 => du.defs.push(Def { var: v.into(), strong: false }),
                _ => {}
            }
            if rng.gen_bool(0.4) {
                du.uses.insert(v.into());
            }
        }
        defuse.insert(StmtId(i as u32), du);
    }
    (cfg, defuse)
}

fn paths_to(cfg: &Cfg, target: CfgNode) -> Vec<Vec<CfgNode>> {
    fn walk(cfg: &Cfg, at: CfgNode, target: CfgNode, path: &mut Vec<CfgNode>, out: &mut Vec<Vec<CfgNode>>) {
        path.push(at);
        if at == target {
            out.push(path.clone());
        } else {
            for s in cfg.successors(at) {
                walk(cfg, s, target, path, out);
            }
        }
        path.pop();
    }
    let mut out = Vec::new();
    walk(cfg, CfgNode::Entry, target, &mut Vec::new(), &mut out);
    out
}

/// Definitions reaching the entry of each statement, by enumerating every
/// ENTRY path.
pub fn brute_reaching(cfg: &Cfg, defuse: &BTreeMap<StmtId, DefUse>) -> BTreeMap<StmtId, BTreeSet<(StmtId, String)>> {
    let mut out = BTreeMap::new();
    for s in cfg.statements() {
        let mut reaching = BTreeSet::new();
        for path in paths_to(cfg, CfgNode::Stmt(s)) {
            let last = path.len() - 1;
            for i in 0..last {
                let CfgNode::Stmt(d) = path[i] else { continue };
                for def in &defuse[&d].defs {
                    let killed = path[i + 1..last].iter().any(|n| match n {
                        CfgNode::Stmt(k) => defuse[k].defs.iter().any(|kd| kd.strong && kd.var == def.var),
                        _ => false,
                    });
                    if !killed {
                        reaching.insert((d, def.var.clone()));
                    }
                }
            }
        }
        out.insert(s, reaching);
    }
    out
}

// ---------------------------------------------------------------------------
// corpora

const FUNC_NAMES: [&str; 8] = ["scale", "ratio", "split", "share", "avg_len", "per_item", "chunk", "quota"];
const VAR_NAMES: [&str; 10] = ["total", "count", "len", "n", "size", "width", "parts", "items", "num", "den"];

pub struct ToyProgram {
    pub path: String,
    pub source: String,
    pub vulnerable_lines: Vec<u32>,
}

impl ToyProgram {
    pub fn unit(&self) -> SourceUnit {
        parse_source(&self.path, &self.source).unwrap()
    }

    pub fn labels(&self) -> VulnerableLines {
        let mut v = VulnerableLines::default();
        for &l in &self.vulnerable_lines {
            v.insert(self.path.clone(), l);
        }
        v
    }
}

/// One toy program. A vulnerable one divides by a parameter that its
/// caller controls; a benign one multiplies, adds, or divides by a
/// nonzero constant.
pub fn toy_program(rng: &mut ChaCha8Rng, index: usize, vulnerable: bool) -> ToyProgram {
    let mut names = VAR_NAMES.to_vec();
    names.shuffle(rng);
    let (a, b, r, t, x, y) = (names[0], names[1], names[2], names[3], names[4], names[5]);
    let f = FUNC_NAMES[rng.gen_range(0..FUNC_NAMES.len())];
    let k = rng.gen_range(2..9);
    let expr = if vulnerable {
        if rng.gen_bool(0.5) { format!("{a} / {b}") } else { format!("{a} % {b}") }
    } else {
        match rng.gen_range(0..4) {
            0 => format!("{a} * {b}"),
            1 => format!("{a} / {k}"),
            2 => format!("{a} + {b}"),
            _ => format!("{a} % {k}"),
        }
    };
    let mut lines = vec![format!("int {f}(int {a}, int {b})"), "{".into(), format!("    int {r};")];
    if rng.gen_bool(0.5) {
        lines.push(format!("    int {t};"));
        lines.push(format!("    {t} = {b} - {k};"));
    }
    lines.push(format!("    {r} = {expr};"));
    let hot = lines.len() as u32;
    if rng.gen_bool(0.4) {
        lines.push(format!("    if ({r} > {k})"));
        lines.push(format!("        {r} = {r} - 1;"));
    }
    lines.push(format!("    return {r};"));
    lines.push("}".into());
    lines.push(String::new());
    lines.push(format!("int main_{index}(int {x})"));
    lines.push("{".into());
    lines.push(format!("    int {y};"));
    lines.push(format!("    {y} = {f}({x}, {x} + {k});"));
    lines.push(format!("    return {y};"));
    lines.push("}".into());
    ToyProgram {
        path: format!("toy_{index:03}.c"),
        source: lines.join("\n") + "\n",
        vulnerable_lines: if vulnerable { vec![hot] } else { Vec::new() },
    }
}

/// `n_vulnerable` vulnerable programs followed by `n_benign` benign ones.
pub fn toy_corpus(rng: &mut ChaCha8Rng, n_vulnerable: usize, n_benign: usize) -> Vec<ToyProgram> {
    (0..n_vulnerable + n_benign).map(|i| toy_program(rng, i, i < n_vulnerable)).collect()
}

/// Programs whose planted vulnerable line is reachable only from FP or FR
/// criteria: no library call, array, pointer or arithmetic anywhere.
pub fn fp_fr_corpus() -> Vec<ToyProgram> {
    let sources: [(&str, u32); 6] = [
        ("int pick(int n)\n{\n    return n;\n}\n", 3),
        ("int max2(int a, int b)\n{\n    if (a > b)\n        return a;\n    return b;\n}\n", 3),
        ("int clamp(int v, int hi)\n{\n    int r;\n    r = v;\n    if (r >= hi)\n        r = hi;\n    return r;\n}\n", 5),
        ("int first(int a, int b)\n{\n    while (a < b)\n        a = b;\n    return a;\n}\n", 4),
        ("int same(int a, int b)\n{\n    int eq;\n    eq = a == b;\n    return eq;\n}\n", 5),
        ("int sel(int c, int a, int b)\n{\n    int out;\n    out = b;\n    if (c)\n        out = a;\n    return out;\n}\n", 6),
    ];
    sources
        .iter()
        .enumerate()
        .map(|(i, (src, line))| ToyProgram {
            path: format!("fpfr_{i}.c"),
            source: src.to_string(),
            vulnerable_lines: vec![*line],
        })
        .collect()
}

// ---------------------------------------------------------------------------
// model

/// A four-node SPG carrying DATA, CONTROL and FUNCTION_CALL edges.
pub fn four_node_spg() -> Spg {
    let node = |id: usize, text: &str, kind: AstKind, line: u32| SpgNode {
        id,
        text: text.into(),
        kind,
        file: "g.c".into(),
        line,
        last_line: line,
        origin: None,
    };
    Spg {
        criterion: SpgCriterion { kind: SyvcKind::FP, element: "VAR1".into(), file: "g.c".into(), line: 1 },
        nodes: vec![
            node(0, "int FUN1 ( int VAR1 )", AstKind::FunctionDef, 1),
            node(1, "int VAR1", AstKind::Parameter, 1),
            node(2, "if ( VAR1 > 0 )", AstKind::IfStatement, 3),
            node(3, "VAR2 = FUN1 ( VAR1 / 2 ) ;", AstKind::ExpressionStatement, 4),
        ],
        edges: vec![
            SpgEdge { src: 1, dst: 2, kind: EdgeKind::Data },
            SpgEdge { src: 1, dst: 3, kind: EdgeKind::Data },
            SpgEdge { src: 2, dst: 3, kind: EdgeKind::Control },
            SpgEdge { src: 3, dst: 0, kind: EdgeKind::FunctionCall },
        ],
        label: Some(1),
    }
}

/// Small deterministic embeddings over the tokens of `spg`.
pub fn embeddings_for(spg: &Spg, c: usize, rng: &mut ChaCha8Rng) -> Embeddings {
    let tokens: BTreeSet<String> = spg.nodes.iter().flat_map(|n| n.tokens().map(String::from)).collect();
    let vocab = Vocabulary::from_tokens(tokens);
    let mut table = Tensor::zeros(vocab.len(), c);
    for i in 2..vocab.len() {
        for j in 0..c {
            table.set(i, j, rng.gen_range(-1.0..1.0));
        }
    }
    Embeddings { vocab, table }
}

pub fn small_model(spg: &Spg, seed: u64, rng: &mut ChaCha8Rng) -> Model {
    let node = NodeInitConfig { c: 4, m: 6, a: 2, z: 3, ..NodeInitConfig::default() };
    let cfg = ModelConfig { node, layers: 2, seed, ..ModelConfig::default() };
    Model::new(cfg, embeddings_for(spg, 4, rng)).unwrap()
}

/// `spg` with node `i` moved to position `perm[i]`.
pub fn permute_spg(spg: &Spg, perm: &[usize]) -> Spg {
    let mut nodes = spg.nodes.clone();
    for (i, n) in spg.nodes.iter().enumerate() {
        nodes[perm[i]] = SpgNode { id: perm[i], ..n.clone() };
    }
    let edges = spg.edges.iter().map(|e| SpgEdge { src: perm[e.src], dst: perm[e.dst], kind: e.kind }).collect();
    Spg { nodes, edges, ..spg.clone() }
}
