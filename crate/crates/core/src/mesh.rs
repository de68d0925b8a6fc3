//! The lattice of bisection refinements of the initial partition of
//! `(0, M+1)` into unit macro cells.
//!
//! Each macro cell carries a dyadic leaf tree. Complete subtrees are stored
//! as a single `Uniform(depth)` node, so partitions whose cells are refined
//! uniformly (the shape every marking strategy here produces) stay small even
//! when the leaf count is astronomically large; cardinalities are exact
//! `BigUint`s. Trees are kept in a canonical maximally-collapsed form, which
//! makes structural equality coincide with partition equality.

use crate::error::{Error, Result};
use num_bigint::BigUint;
use num_traits::One;

/// Largest leaf set (as log2 of the count) that may be materialized into
/// explicit `Element`s. Compressed operations have no such bound.
const MAX_EXPLICIT_LEAF_LOG2: u32 = 22;

/// Default cap on element generations; exceeding it is an error, never a
/// silent truncation.
pub const DEFAULT_MAX_GEN: u32 = 4096;

/// One closed dyadic subinterval of a macro cell: the interval
/// `[m + o 2^-g, m + (o+1) 2^-g]` of length exactly `2^-g`.
///
/// Offsets are explicit `u64`s; elements deeper than generation 63 are only
/// representable while their offset fits (the chain of elements containing
/// zero always has offset 0 or 1, so deep runs stay representable).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Element {
    pub macro_cell: u32,
    pub gen: u32,
    pub offset: u64,
}

impl Element {
    pub fn new(macro_cell: u32, gen: u32, offset: u64) -> Result<Element> {
        if gen < 64 && offset >= 1u64 << gen {
            return Err(Error::InvalidParameter(format!(
                "offset {offset} out of range for generation {gen}"
            )));
        }
        Ok(Element {
            macro_cell,
            gen,
            offset,
        })
    }

    /// The two children from one bisection: generation `g + 1`, offsets
    /// `2o` and `2o + 1`.
    pub fn bisect(&self) -> (Element, Element) {
        let left = self
            .offset
            .checked_mul(2)
            .expect("offset overflow: element too deep for explicit bisection");
        (
            Element {
                macro_cell: self.macro_cell,
                gen: self.gen + 1,
                offset: left,
            },
            Element {
                macro_cell: self.macro_cell,
                gen: self.gen + 1,
                offset: left + 1,
            },
        )
    }

    /// True iff this element contains the point zero.
    pub fn contains_zero(&self) -> bool {
        self.macro_cell == 0 && self.offset == 0
    }

    fn offset_in_range(&self) -> bool {
        self.gen >= 64 || self.offset < 1u64 << self.gen
    }

    /// Approximate interval endpoints, for display only.
    pub fn endpoints(&self) -> (f64, f64) {
        let scale = (-(f64::from(self.gen))).exp2();
        let left = f64::from(self.macro_cell) + self.offset as f64 * scale;
        (left, left + scale)
    }

    /// Path bit at `level` (0 = first bisection below the macro cell).
    /// Bits above the explicit `u64` range are zero.
    fn path_bit(&self, level: u32) -> u64 {
        debug_assert!(level < self.gen);
        let shift = self.gen - 1 - level;
        if shift >= 64 {
            0
        } else {
            (self.offset >> shift) & 1
        }
    }

    /// Left-endpoint order within one partition (elements of a common
    /// partition never share a left endpoint).
    pub fn cmp_position(&self, other: &Element) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        match self.macro_cell.cmp(&other.macro_cell) {
            Ordering::Equal => {}
            ord => return ord,
        }
        let common = self.gen.min(other.gen);
        for level in 0..common {
            match self.path_bit(level).cmp(&other.path_bit(level)) {
                Ordering::Equal => {}
                ord => return ord,
            }
        }
        // One path is a prefix of the other: the deeper element starts at the
        // same point iff its remaining bits are all zero.
        let (deeper, flip) = if self.gen > other.gen {
            (self, false)
        } else {
            (other, true)
        };
        for level in common..deeper.gen {
            if deeper.path_bit(level) != 0 {
                return if flip {
                    Ordering::Less
                } else {
                    Ordering::Greater
                };
            }
        }
        self.gen.cmp(&other.gen)
    }
}

/// A dyadic leaf tree over one macro cell, in canonical collapsed form.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Node {
    Leaf,
    /// Complete subtree: every leaf exactly `d >= 1` levels down.
    Uniform(u32),
    Split(Box<Node>, Box<Node>),
}

impl Node {
    fn uniform(d: u32) -> Node {
        if d == 0 {
            Node::Leaf
        } else {
            Node::Uniform(d)
        }
    }

    /// `Some(d)` iff the subtree is a complete tree of depth `d`.
    fn uniform_depth(&self) -> Option<u32> {
        match self {
            Node::Leaf => Some(0),
            Node::Uniform(d) => Some(*d),
            Node::Split(..) => None,
        }
    }

    /// Canonicalizing constructor: a split of two equal complete trees is a
    /// complete tree one level deeper.
    fn split(left: Node, right: Node) -> Node {
        match (left.uniform_depth(), right.uniform_depth()) {
            (Some(a), Some(b)) if a == b => Node::Uniform(a + 1),
            _ => Node::Split(Box::new(left), Box::new(right)),
        }
    }

    /// Collapse this node if an in-place mutation made its children equal
    /// complete trees.
    fn normalize_shallow(&mut self) {
        if let Node::Split(l, r) = self {
            if let (Some(a), Some(b)) = (l.uniform_depth(), r.uniform_depth()) {
                if a == b {
                    *self = Node::Uniform(a + 1);
                }
            }
        }
    }

    fn max_depth(&self) -> u32 {
        match self {
            Node::Leaf => 0,
            Node::Uniform(d) => *d,
            Node::Split(l, r) => 1 + l.max_depth().max(r.max_depth()),
        }
    }

    fn leftmost_depth(&self) -> u32 {
        match self {
            Node::Leaf => 0,
            Node::Uniform(d) => *d,
            Node::Split(l, _) => 1 + l.leftmost_depth(),
        }
    }

    fn add_leaf_count(&self, small: &mut u64, big: &mut BigUint) {
        match self {
            Node::Leaf => {
                if let Some(s) = small.checked_add(1) {
                    *small = s;
                } else {
                    *big += BigUint::from(*small);
                    *small = 1;
                }
            }
            Node::Uniform(d) => {
                if *d < 63 {
                    let n = 1u64 << *d;
                    if let Some(s) = small.checked_add(n) {
                        *small = s;
                    } else {
                        *big += BigUint::from(*small);
                        *small = n;
                    }
                } else {
                    *big += BigUint::one() << *d;
                }
            }
            Node::Split(l, r) => {
                l.add_leaf_count(small, big);
                r.add_leaf_count(small, big);
            }
        }
    }

    fn leaf_count(&self) -> BigUint {
        let mut small = 0u64;
        let mut big = BigUint::from(0u32);
        self.add_leaf_count(&mut small, &mut big);
        big + BigUint::from(small)
    }

    /// `self >= other` in the refinement order: the node set of `other` is
    /// contained in the node set of `self`.
    fn refines(&self, other: &Node) -> bool {
        match (self, other) {
            (_, Node::Leaf) => true,
            (Node::Leaf, _) => false,
            (Node::Uniform(a), Node::Uniform(b)) => a >= b,
            (Node::Uniform(a), Node::Split(l, r)) => {
                let c = Node::uniform(a - 1);
                c.refines(l) && c.refines(r)
            }
            (Node::Split(l, r), Node::Uniform(b)) => {
                let c = Node::uniform(b - 1);
                l.refines(&c) && r.refines(&c)
            }
            (Node::Split(l1, r1), Node::Split(l2, r2)) => l1.refines(l2) && r1.refines(r2),
        }
    }

    /// Finest common coarsening: a node splits iff both arguments split.
    fn meet(&self, other: &Node) -> Node {
        match (self, other) {
            (Node::Leaf, _) | (_, Node::Leaf) => Node::Leaf,
            (Node::Uniform(a), Node::Uniform(b)) => Node::Uniform(*a.min(b)),
            (Node::Uniform(a), Node::Split(l, r)) | (Node::Split(l, r), Node::Uniform(a)) => {
                let c = Node::uniform(a - 1);
                Node::split(c.meet(l), c.meet(r))
            }
            (Node::Split(l1, r1), Node::Split(l2, r2)) => Node::split(l1.meet(l2), r1.meet(r2)),
        }
    }

    /// Coarsest common refinement: a node splits iff either argument splits.
    fn join(&self, other: &Node) -> Node {
        match (self, other) {
            (Node::Leaf, x) | (x, Node::Leaf) => x.clone(),
            (Node::Uniform(a), Node::Uniform(b)) => Node::Uniform(*a.max(b)),
            (Node::Uniform(a), Node::Split(l, r)) | (Node::Split(l, r), Node::Uniform(a)) => {
                let c = Node::uniform(a - 1);
                Node::split(c.join(l), c.join(r))
            }
            (Node::Split(l1, r1), Node::Split(l2, r2)) => Node::split(l1.join(l2), r1.join(r2)),
        }
    }

    /// Bisect every leaf of the subtree.
    fn refine_all_mut(&mut self) {
        match self {
            Node::Leaf => *self = Node::Uniform(1),
            Node::Uniform(d) => *d += 1,
            Node::Split(l, r) => {
                l.refine_all_mut();
                r.refine_all_mut();
                self.normalize_shallow();
            }
        }
    }

    /// Bisect the leaf `rel_gen` levels down at `offset`. Returns false if
    /// that position is not a leaf of the tree.
    fn refine_at_mut(&mut self, rel_gen: u32, offset: u64) -> bool {
        if rel_gen == 0 {
            return match self {
                Node::Leaf => {
                    *self = Node::Uniform(1);
                    true
                }
                _ => false,
            };
        }
        let shift = rel_gen - 1;
        let (bit, rest) = if shift >= 64 {
            (0, offset)
        } else {
            ((offset >> shift) & 1, offset & ((1u64 << shift) - 1))
        };
        match self {
            Node::Leaf => false,
            Node::Uniform(d) => {
                let d = *d;
                // The target is a leaf of this complete subtree only at its
                // exact leaf depth.
                if d != rel_gen {
                    return false;
                }
                let mut l = Node::uniform(d - 1);
                let mut r = Node::uniform(d - 1);
                let ok = if bit == 0 {
                    l.refine_at_mut(rel_gen - 1, rest)
                } else {
                    r.refine_at_mut(rel_gen - 1, rest)
                };
                debug_assert!(ok, "leaf of a complete subtree must refine");
                *self = Node::split(l, r);
                ok
            }
            Node::Split(l, r) => {
                let ok = if bit == 0 {
                    l.refine_at_mut(rel_gen - 1, rest)
                } else {
                    r.refine_at_mut(rel_gen - 1, rest)
                };
                if ok {
                    self.normalize_shallow();
                }
                ok
            }
        }
    }

    fn is_leaf_at(&self, rel_gen: u32, offset: u64) -> bool {
        if rel_gen == 0 {
            return matches!(self, Node::Leaf);
        }
        let shift = rel_gen - 1;
        let (bit, rest) = if shift >= 64 {
            (0, offset)
        } else {
            ((offset >> shift) & 1, offset & ((1u64 << shift) - 1))
        };
        match self {
            Node::Leaf => false,
            Node::Uniform(d) => *d == rel_gen,
            Node::Split(l, r) => {
                if bit == 0 {
                    l.is_leaf_at(rel_gen - 1, rest)
                } else {
                    r.is_leaf_at(rel_gen - 1, rest)
                }
            }
        }
    }

    /// Visit maximal runs of equal-generation leaves in left-to-right order.
    /// A run reports `(gen, count_log2)` and holds `2^count_log2` leaves.
    fn for_each_leaf_run(&self, depth: u32, f: &mut impl FnMut(u32, u32)) {
        match self {
            Node::Leaf => f(depth, 0),
            Node::Uniform(d) => f(depth + d, *d),
            Node::Split(l, r) => {
                l.for_each_leaf_run(depth + 1, f);
                r.for_each_leaf_run(depth + 1, f);
            }
        }
    }

    /// As `for_each_leaf_run`, additionally reporting the offset of the
    /// run's leftmost leaf. Fails if a nonzero path cannot be shifted into
    /// a `u64` offset.
    fn for_each_leaf_run_offsets(
        &self,
        depth: u32,
        path: u64,
        f: &mut impl FnMut(LeafRun),
    ) -> Result<()> {
        match self {
            Node::Leaf => {
                f(LeafRun {
                    gen: depth,
                    count_log2: 0,
                    first_offset: path,
                });
                Ok(())
            }
            Node::Uniform(d) => {
                let first_offset = if path == 0 {
                    0
                } else {
                    path.checked_shl(*d).ok_or(Error::OffsetOverflow)?
                };
                f(LeafRun {
                    gen: depth + d,
                    count_log2: *d,
                    first_offset,
                });
                Ok(())
            }
            Node::Split(l, r) => {
                let down = |bit: u64| -> Result<u64> {
                    if path == 0 && bit == 0 {
                        Ok(0)
                    } else {
                        path.checked_shl(1)
                            .map(|p| p | bit)
                            .ok_or(Error::OffsetOverflow)
                    }
                };
                l.for_each_leaf_run_offsets(depth + 1, down(0)?, f)?;
                r.for_each_leaf_run_offsets(depth + 1, down(1)?, f)
            }
        }
    }

    fn collect_leaves(&self, macro_cell: u32, out: &mut Vec<Element>) -> Result<()> {
        self.for_each_leaf_run_offsets(0, 0, &mut |run| {
            // Expansion size was bounded by the caller.
            for i in 0..(1u64 << run.count_log2) {
                out.push(Element {
                    macro_cell,
                    gen: run.gen,
                    offset: run.first_offset + i,
                });
            }
        })
    }

    /// Co-walk of a nested pair. Emits every leaf run of the symmetric
    /// difference and of the common part; errors if `fine` does not refine
    /// `coarse`.
    fn for_each_diff_run(
        coarse: &Node,
        fine: &Node,
        depth: u32,
        f: &mut impl FnMut(RunClass, u32, u32),
    ) -> Result<()> {
        match (coarse, fine) {
            (Node::Leaf, Node::Leaf) => {
                f(RunClass::Common, depth, 0);
                Ok(())
            }
            (Node::Leaf, fine) => {
                f(RunClass::OnlyCoarse, depth, 0);
                fine.for_each_leaf_run(depth, &mut |g, c| f(RunClass::OnlyFine, g, c));
                Ok(())
            }
            (Node::Uniform(_), Node::Leaf) | (Node::Split(..), Node::Leaf) => Err(Error::NotNested),
            (Node::Uniform(a), Node::Uniform(b)) => {
                if a > b {
                    return Err(Error::NotNested);
                }
                if a == b {
                    f(RunClass::Common, depth + a, *a);
                } else {
                    f(RunClass::OnlyCoarse, depth + a, *a);
                    f(RunClass::OnlyFine, depth + b, *b);
                }
                Ok(())
            }
            (Node::Uniform(a), Node::Split(l, r)) => {
                let c = Node::uniform(a - 1);
                Self::for_each_diff_run(&c, l, depth + 1, f)?;
                Self::for_each_diff_run(&c, r, depth + 1, f)
            }
            (Node::Split(l, r), Node::Uniform(b)) => {
                // `fine` must be at least as deep everywhere as `coarse`.
                let c = Node::uniform(b - 1);
                Self::for_each_diff_run(l, &c, depth + 1, f)?;
                Self::for_each_diff_run(r, &c, depth + 1, f)
            }
            (Node::Split(l1, r1), Node::Split(l2, r2)) => {
                Self::for_each_diff_run(l1, l2, depth + 1, f)?;
                Self::for_each_diff_run(r1, r2, depth + 1, f)
            }
        }
    }
}

/// A maximal run of equal-generation leaves with consecutive offsets.
#[derive(Clone, Copy, Debug)]
pub(crate) struct LeafRun {
    pub gen: u32,
    pub count_log2: u32,
    pub first_offset: u64,
}

/// Classification of a leaf run in the co-walk of a nested pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum RunClass {
    /// Leaf of both partitions.
    Common,
    /// Leaf of the coarse partition refined away in the fine one.
    OnlyCoarse,
    /// Leaf of the fine partition absent from the coarse one.
    OnlyFine,
}

/// A refinement of the initial partition: one dyadic leaf tree per macro
/// cell. Immutable value type; all operations return new partitions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    macros: Vec<Node>,
}

impl Partition {
    /// The initial partition `{[0,1], ..., [M, M+1]}` of `(0, M+1)`.
    pub fn initial(m: u32) -> Result<Partition> {
        if m == 0 {
            return Err(Error::ZeroMacroCount);
        }
        Ok(Partition {
            macros: vec![Node::Leaf; m as usize + 1],
        })
    }

    /// The macro count `M`; macro cells are indexed `0..=M`.
    pub fn m(&self) -> u32 {
        self.macros.len() as u32 - 1
    }

    /// Total number of leaves, exact.
    pub fn cardinality(&self) -> BigUint {
        let mut small = 0u64;
        let mut big = BigUint::from(0u32);
        for node in &self.macros {
            node.add_leaf_count(&mut small, &mut big);
        }
        big + BigUint::from(small)
    }

    /// Number of leaves inside macro cell `m`.
    pub fn leaf_count_in_cell(&self, m: u32) -> Result<BigUint> {
        self.cell(m).map(Node::leaf_count)
    }

    /// Largest generation of any leaf.
    pub fn max_gen(&self) -> u32 {
        self.macros.iter().map(Node::max_depth).max().unwrap_or(0)
    }

    /// The leaf containing zero: macro 0, offset 0.
    pub fn zero_element(&self) -> Element {
        Element {
            macro_cell: 0,
            gen: self.g0(),
            offset: 0,
        }
    }

    /// Generation of the leaf containing zero.
    pub fn g0(&self) -> u32 {
        self.macros[0].leftmost_depth()
    }

    pub fn is_leaf(&self, e: &Element) -> bool {
        if !e.offset_in_range() {
            return false;
        }
        match self.cell(e.macro_cell) {
            Ok(node) => node.is_leaf_at(e.gen, e.offset),
            Err(_) => false,
        }
    }

    /// All leaves of macro cell `m` for `1 <= m <= M`, ordered by left
    /// endpoint.
    pub fn leaves_in_unit_interval(&self, m: u32) -> Result<Vec<Element>> {
        if m == 0 || m > self.m() {
            return Err(Error::MacroIndexOutOfRange {
                index: m,
                max: self.m(),
            });
        }
        let node = &self.macros[m as usize];
        self.check_explicit(&node.leaf_count())?;
        let mut out = Vec::new();
        node.collect_leaves(m, &mut out)?;
        Ok(out)
    }

    /// All leaves, ordered by (macro cell, left endpoint). Errors if the
    /// partition is too large to materialize.
    pub fn leaves(&self) -> Result<Vec<Element>> {
        self.check_explicit(&self.cardinality())?;
        let mut out = Vec::new();
        for (m, node) in self.macros.iter().enumerate() {
            node.collect_leaves(m as u32, &mut out)?;
        }
        Ok(out)
    }

    /// `(t \ marked) ∪ bisect(marked)` with the default generation cap.
    pub fn refine(&self, marked: &MarkedSet) -> Result<Partition> {
        self.refine_with_limit(marked, DEFAULT_MAX_GEN)
    }

    /// Refinement with an explicit generation cap.
    pub fn refine_with_limit(&self, marked: &MarkedSet, max_gen: u32) -> Result<Partition> {
        let mut macros = self.macros.clone();
        for item in &marked.items {
            match item {
                MarkItem::UnitCell(m) => {
                    let idx = *m as usize;
                    if idx >= macros.len() {
                        return Err(Error::MacroIndexOutOfRange {
                            index: *m,
                            max: self.m(),
                        });
                    }
                    if macros[idx].max_depth() + 1 > max_gen {
                        return Err(Error::GenerationLimitExceeded { limit: max_gen });
                    }
                    macros[idx].refine_all_mut();
                }
                MarkItem::Element(e) => {
                    let idx = e.macro_cell as usize;
                    if idx >= macros.len() || !e.offset_in_range() {
                        return Err(Error::NotALeaf(*e));
                    }
                    if e.gen + 1 > max_gen {
                        return Err(Error::GenerationLimitExceeded { limit: max_gen });
                    }
                    if !macros[idx].refine_at_mut(e.gen, e.offset) {
                        return Err(Error::NotALeaf(*e));
                    }
                }
            }
        }
        Ok(Partition { macros })
    }

    /// Finest common coarsening.
    pub fn meet(&self, other: &Partition) -> Result<Partition> {
        self.check_same_m(other)?;
        Ok(Partition {
            macros: self
                .macros
                .iter()
                .zip(&other.macros)
                .map(|(a, b)| a.meet(b))
                .collect(),
        })
    }

    /// Coarsest common refinement.
    pub fn join(&self, other: &Partition) -> Result<Partition> {
        self.check_same_m(other)?;
        Ok(Partition {
            macros: self
                .macros
                .iter()
                .zip(&other.macros)
                .map(|(a, b)| a.join(b))
                .collect(),
        })
    }

    /// True iff every leaf of `self` is contained in some leaf of `coarser`.
    pub fn is_refinement_of(&self, coarser: &Partition) -> Result<bool> {
        self.check_same_m(coarser)?;
        Ok(self
            .macros
            .iter()
            .zip(&coarser.macros)
            .all(|(a, b)| a.refines(b)))
    }

    /// Leaf triples `[macro, gen, offset]`, sorted by (macro, left endpoint).
    pub fn leaf_triples(&self) -> Result<Vec<[u64; 3]>> {
        Ok(self
            .leaves()?
            .into_iter()
            .map(|e| [u64::from(e.macro_cell), u64::from(e.gen), e.offset])
            .collect())
    }

    /// JSON form of `leaf_triples`, the golden-test serialization.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.leaf_triples()?).expect("triples serialize"))
    }

    fn cell(&self, m: u32) -> Result<&Node> {
        self.macros
            .get(m as usize)
            .ok_or(Error::MacroIndexOutOfRange {
                index: m,
                max: self.m(),
            })
    }

    fn check_same_m(&self, other: &Partition) -> Result<()> {
        if self.m() != other.m() {
            return Err(Error::MacroCountMismatch(self.m(), other.m()));
        }
        Ok(())
    }

    fn check_explicit(&self, count: &BigUint) -> Result<()> {
        if count.bits() > u64::from(MAX_EXPLICIT_LEAF_LOG2) {
            return Err(Error::TooManyLeaves {
                count_log2_bound: count.bits() as u32,
            });
        }
        Ok(())
    }

    /// Leaf runs of macro cell `m` without offsets, in left-to-right order.
    pub(crate) fn cell_leaf_runs(&self, m: u32, f: &mut impl FnMut(u32, u32)) {
        self.macros[m as usize].for_each_leaf_run(0, f);
    }

    /// Leaf runs of macro cell `m` with offsets.
    pub(crate) fn cell_leaf_runs_offsets(&self, m: u32, f: &mut impl FnMut(LeafRun)) -> Result<()> {
        self.macros[m as usize].for_each_leaf_run_offsets(0, 0, f)
    }

    /// True iff macro cell `m` consists of a single complete tree, i.e. all
    /// its leaves share one generation.
    pub(crate) fn cell_is_uniform(&self, m: u32) -> bool {
        self.macros[m as usize].uniform_depth().is_some()
    }

    /// Co-walk the nested pair `(self, fine)` over macro cell `m`.
    pub(crate) fn cell_diff_runs(
        &self,
        fine: &Partition,
        m: u32,
        f: &mut impl FnMut(RunClass, u32, u32),
    ) -> Result<()> {
        Node::for_each_diff_run(&self.macros[m as usize], &fine.macros[m as usize], 0, f)
    }
}

/// Compressed selection of leaves of a stated partition: explicit elements
/// plus whole-cell items. Whole-cell items keep marked sets of size `2^g`
/// representable without materialization.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MarkedSet {
    items: Vec<MarkItem>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MarkItem {
    Element(Element),
    /// Every leaf of macro cell `m`.
    UnitCell(u32),
}

impl MarkedSet {
    pub fn new() -> MarkedSet {
        MarkedSet::default()
    }

    pub fn singleton(e: Element) -> MarkedSet {
        MarkedSet {
            items: vec![MarkItem::Element(e)],
        }
    }

    pub fn from_elements(elements: impl IntoIterator<Item = Element>) -> MarkedSet {
        MarkedSet {
            items: elements.into_iter().map(MarkItem::Element).collect(),
        }
    }

    pub fn push_element(&mut self, e: Element) {
        self.items.push(MarkItem::Element(e));
    }

    pub fn push_unit_cell(&mut self, m: u32) {
        self.items.push(MarkItem::UnitCell(m));
    }

    pub fn items(&self) -> &[MarkItem] {
        &self.items
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Number of marked leaves, exact.
    pub fn count(&self, t: &Partition) -> Result<BigUint> {
        let mut total = BigUint::from(0u32);
        for item in &self.items {
            match item {
                MarkItem::Element(_) => total += BigUint::one(),
                MarkItem::UnitCell(m) => total += t.leaf_count_in_cell(*m)?,
            }
        }
        Ok(total)
    }

    /// Explicit triples `[macro, gen, offset]`, sorted by (macro, left
    /// endpoint); whole-cell items are expanded.
    pub fn triples(&self, t: &Partition) -> Result<Vec<[u64; 3]>> {
        t.check_explicit(&self.count(t)?)?;
        let mut elements = Vec::new();
        for item in &self.items {
            match item {
                MarkItem::Element(e) => elements.push(*e),
                MarkItem::UnitCell(m) => {
                    t.cell(*m)?.collect_leaves(*m, &mut elements)?;
                }
            }
        }
        elements.sort_by(Element::cmp_position);
        Ok(elements
            .into_iter()
            .map(|e| [u64::from(e.macro_cell), u64::from(e.gen), e.offset])
            .collect())
    }

    /// JSON list of `[macro, gen, offset]`.
    pub fn to_json(&self, t: &Partition) -> Result<String> {
        Ok(serde_json::to_string(&self.triples(t)?).expect("triples serialize"))
    }
}
