use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::cfg::{Cfg, CfgNode};
use super::AnalysisError;

/// Reflexive post-dominator sets: `pd[n]` holds every node on all paths
/// from `n` to EXIT, including `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PostDominators {
    sets: BTreeMap<CfgNode, BTreeSet<CfgNode>>,
}

impl PostDominators {
    pub fn of(&self, n: CfgNode) -> &BTreeSet<CfgNode> {
        &self.sets[&n]
    }

    pub fn post_dominates(&self, a: CfgNode, b: CfgNode) -> bool {
        self.sets.get(&b).is_some_and(|s| s.contains(&a))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CfgNode, &BTreeSet<CfgNode>)> {
        self.sets.iter()
    }
}

/// Iterative intersection-over-successors fixpoint.
pub fn post_dominators(cfg: &Cfg) -> Result<PostDominators, AnalysisError> {
    // every node must reach EXIT
    let mut reaches_exit = BTreeSet::from([CfgNode::Exit]);
    let mut queue = VecDeque::from([CfgNode::Exit]);
    while let Some(n) = queue.pop_front() {
        for p in cfg.predecessors(n) {
            if reaches_exit.insert(p) {
                queue.push_back(p);
            }
        }
    }
    if let Some(bad) = cfg.nodes().find(|n| !reaches_exit.contains(n)) {
        return Err(AnalysisError::ExitUnreachable { function: cfg.function.clone(), node: bad.to_string() });
    }

    let all: BTreeSet<CfgNode> = cfg.nodes().collect();
    let mut sets: BTreeMap<CfgNode, BTreeSet<CfgNode>> =
        cfg.nodes().map(|n| (n, if n == CfgNode::Exit { BTreeSet::from([n]) } else { all.clone() })).collect();
    // postorder of the forward graph visits successors first
    let mut order = cfg.reverse_postorder();
    order.reverse();
    loop {
        let mut changed = false;
        for &n in &order {
            if n == CfgNode::Exit {
                continue;
            }
            let mut succs = cfg.successors(n);
            let Some(first) = succs.next() else { continue };
            let mut meet = sets[&first].clone();
            for s in succs {
                meet.retain(|x| sets[&s].contains(x));
            }
            meet.insert(n);
            if meet != sets[&n] {
                sets.insert(n, meet);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(PostDominators { sets })
}
