use std::collections::BTreeSet;

use super::cfg::{Cfg, CfgNode};
use super::postdom::PostDominators;
use super::{DependencyEdge, EdgeKind};

/// Control dependences: `Y` depends on `X` when some successor of `X` is
/// post-dominated by `Y` while `Y` does not strictly post-dominate `X`.
/// A loop header therefore depends on itself. Edges touching ENTRY or
/// EXIT are dropped.
pub fn control_dependencies(cfg: &Cfg, pd: &PostDominators) -> BTreeSet<DependencyEdge> {
    let mut out = BTreeSet::new();
    for x in cfg.nodes() {
        let CfgNode::Stmt(xs) = x else { continue };
        for s in cfg.successors(x) {
            for &y in pd.of(s) {
                let CfgNode::Stmt(ys) = y else { continue };
                let strictly_pd = y != x && pd.post_dominates(y, x);
                if !strictly_pd {
                    out.insert(DependencyEdge::new(xs, ys, EdgeKind::Control, None));
                }
            }
        }
    }
    out
}
