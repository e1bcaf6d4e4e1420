use std::collections::BTreeSet;

use super::DomTree;
use crate::ir::Function;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Loop {
    pub header: usize,
    pub body: BTreeSet<usize>,
    pub latches: Vec<usize>,
    /// The unique out-of-loop predecessor of the header, when it has a
    /// single successor.
    pub preheader: Option<usize>,
}

impl Loop {
    pub fn contains(&self, b: usize) -> bool {
        self.body.contains(&b)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoopForest {
    pub loops: Vec<Loop>,
    /// Innermost enclosing loop of each loop.
    pub parent: Vec<Option<usize>>,
}

impl LoopForest {
    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }

    pub fn depth(&self, l: usize) -> usize {
        let mut d = 1;
        let mut cur = l;
        while let Some(p) = self.parent[cur] {
            d += 1;
            cur = p;
        }
        d
    }
}

pub fn find_natural_loops(f: &Function, dom: &DomTree) -> LoopForest {
    let preds = f.predecessors();
    let mut loops: Vec<Loop> = Vec::new();
    for &b in dom.rpo() {
        for s in f.successors(b) {
            if !dom.dominates(s, b) {
                continue;
            }
            // b -> s is a back edge.
            let idx = match loops.iter().position(|l| l.header == s) {
                Some(i) => i,
                None => {
                    loops.push(Loop {
                        header: s,
                        body: BTreeSet::from([s]),
                        latches: Vec::new(),
                        preheader: None,
                    });
                    loops.len() - 1
                }
            };
            let l = &mut loops[idx];
            l.latches.push(b);
            let mut work = vec![b];
            while let Some(x) = work.pop() {
                if l.body.insert(x) {
                    work.extend(preds[x].iter().copied().filter(|&p| dom.is_reachable(p)));
                }
            }
        }
    }
    for l in &mut loops {
        l.latches.sort_unstable();
        let outside: Vec<usize> = preds[l.header]
            .iter()
            .copied()
            .filter(|p| !l.body.contains(p))
            .collect();
        if let [p] = outside[..] {
            if f.successors(p).len() == 1 {
                l.preheader = Some(p);
            }
        }
    }
    let parent = (0..loops.len())
        .map(|i| {
            (0..loops.len())
                .filter(|&j| {
                    j != i && loops[j].body.is_superset(&loops[i].body) && loops[j].body.len() > loops[i].body.len()
                })
                .min_by_key(|&j| loops[j].body.len())
        })
        .collect();
    LoopForest { loops, parent }
}
