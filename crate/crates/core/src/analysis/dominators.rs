use std::collections::{BTreeSet, HashMap};

use crate::ir::Function;

/// Dominator tree over block indices. Unreachable blocks have no entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomTree {
    idom: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    rpo: Vec<usize>,
}

/// Iterative dominator computation over reverse postorder
/// (Cooper, Harvey and Kennedy).
pub fn compute_dominators(f: &Function) -> DomTree {
    let n = f.blocks.len();
    let rpo = f.rpo();
    let mut order = vec![usize::MAX; n];
    for (i, &b) in rpo.iter().enumerate() {
        order[b] = i;
    }
    let preds = f.predecessors();
    let mut idom: Vec<Option<usize>> = vec![None; n];
    if n > 0 {
        idom[0] = Some(0);
    }
    let intersect = |idom: &[Option<usize>], mut a: usize, mut b: usize| {
        while a != b {
            while order[a] > order[b] {
                a = idom[a].unwrap();
            }
            while order[b] > order[a] {
                b = idom[b].unwrap();
            }
        }
        a
    };
    let mut changed = true;
    while changed {
        changed = false;
        for &b in rpo.iter().skip(1) {
            let mut new_idom = None;
            for &p in &preds[b] {
                if idom[p].is_none() {
                    continue;
                }
                new_idom = Some(match new_idom {
                    None => p,
                    Some(cur) => intersect(&idom, p, cur),
                });
            }
            if new_idom.is_some() && idom[b] != new_idom {
                idom[b] = new_idom;
                changed = true;
            }
        }
    }
    let mut children = vec![Vec::new(); n];
    for &b in rpo.iter().skip(1) {
        if let Some(d) = idom[b] {
            children[d].push(b);
        }
    }
    DomTree { idom, children, rpo }
}

impl DomTree {
    /// Immediate dominator; the entry maps to itself.
    pub fn idom(&self, b: usize) -> Option<usize> {
        self.idom.get(b).copied().flatten()
    }

    pub fn children(&self, b: usize) -> &[usize] {
        &self.children[b]
    }

    pub fn is_reachable(&self, b: usize) -> bool {
        self.idom(b).is_some()
    }

    /// Reflexive dominance. Unreachable blocks dominate nothing and are
    /// dominated by nothing.
    pub fn dominates(&self, a: usize, b: usize) -> bool {
        if !self.is_reachable(a) || !self.is_reachable(b) {
            return false;
        }
        let mut cur = b;
        loop {
            if cur == a {
                return true;
            }
            let next = self.idom[cur].unwrap();
            if next == cur {
                return false;
            }
            cur = next;
        }
    }

    pub fn strictly_dominates(&self, a: usize, b: usize) -> bool {
        a != b && self.dominates(a, b)
    }

    /// Reachable blocks in reverse postorder.
    pub fn rpo(&self) -> &[usize] {
        &self.rpo
    }

    /// Dominator-tree preorder starting at the entry.
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::new();
        if self.rpo.is_empty() {
            return out;
        }
        let mut stack = vec![0usize];
        while let Some(b) = stack.pop() {
            out.push(b);
            stack.extend(self.children[b].iter().rev());
        }
        out
    }

    /// Dominance frontier of every reachable block.
    pub fn frontiers(&self, f: &Function) -> Vec<BTreeSet<usize>> {
        let preds = f.predecessors();
        let mut df = vec![BTreeSet::new(); f.blocks.len()];
        for &b in &self.rpo {
            let ps: Vec<usize> = preds[b].iter().copied().filter(|&p| self.is_reachable(p)).collect();
            if ps.len() < 2 {
                continue;
            }
            let stop = self.idom[b].unwrap();
            for p in ps {
                let mut runner = p;
                while runner != stop {
                    df[runner].insert(b);
                    let next = self.idom[runner].unwrap();
                    if next == runner {
                        break;
                    }
                    runner = next;
                }
            }
        }
        df
    }

    /// Immediate dominators keyed by label.
    pub fn idom_labels<'f>(&self, f: &'f Function) -> HashMap<&'f str, &'f str> {
        (0..f.blocks.len())
            .filter_map(|b| {
                self.idom(b)
                    .map(|d| (f.blocks[b].label.as_str(), f.blocks[d].label.as_str()))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_function;

    #[test]
    fn single_block() {
        let f = parse_function("func @f() {\nentry:\n  ret 0\n}\n").unwrap();
        let d = compute_dominators(&f);
        assert_eq!(d.idom(0), Some(0));
    }

    #[test]
    fn diamond() {
        let f = parse_function(
            "func @f(%c) {
entry:
  condbr %c, a, b
a:
  br join
b:
  br join
join:
  ret 0
}
",
        )
        .unwrap();
        let d = compute_dominators(&f);
        assert_eq!(d.idom_labels(&f)["join"], "entry");
        let df = d.frontiers(&f);
        assert_eq!(df[1], BTreeSet::from([3]));
        assert_eq!(df[2], BTreeSet::from([3]));
    }

    #[test]
    fn loop_body_idom_is_header() {
        let f = parse_function(
            "func @f(%n) {
entry:
  br header
header:
  %i = phi [0, entry], [%j, body]
  %c = icmp.ult %i, %n
  condbr %c, body, exit
body:
  %j = add %i, 1
  br header
exit:
  ret %i
}
",
        )
        .unwrap();
        let d = compute_dominators(&f);
        let idoms = d.idom_labels(&f);
        assert_eq!(idoms["body"], "header");
        assert_eq!(idoms["exit"], "header");
        assert_eq!(idoms["header"], "entry");
    }
}
