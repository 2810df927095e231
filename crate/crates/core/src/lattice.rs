//! Non-recombining information-set lattice for a symmetric `d`-dimensional
//! binomial walk joined with a finite Markov chain.
//!
//! Each node is a full history (shock vectors and regime labels), so
//! path-dependent coefficients and incomes are always evaluated exactly.
//! Nodes live in a breadth-first arena: every layer is a contiguous index
//! range and the children of a node are contiguous too, which makes the
//! descendants of any node at any later layer a contiguous range as well.

use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::market::RegimeChain;
use crate::numeric::CompensatedSum;

/// Trading dates `t_n = n h`, `n = 0..=N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    steps: usize,
    step_length: f64,
}

impl TimeGrid {
    pub fn new(steps: usize, step_length: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Config("number of periods N must be >= 1".into()));
        }
        if !(step_length.is_finite() && step_length > 0.0) {
            return Err(Error::Config(format!(
                "period length h must be positive and finite, got {step_length}"
            )));
        }
        Ok(Self { steps, step_length })
    }

    /// Number of periods `N`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Period length `h`.
    pub fn h(&self) -> f64 {
        self.step_length
    }

    pub fn sqrt_h(&self) -> f64 {
        self.step_length.sqrt()
    }

    /// Horizon `T = N h`.
    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.step_length
    }

    pub fn time(&self, index: usize) -> f64 {
        index as f64 * self.step_length
    }
}

/// One draw of the `d` walk increments, each exactly `+1` or `-1`.
///
/// Bit `i` set means component `i` (zero-based) is `-1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ShockVector {
    bits: u32,
    dim: u8,
}

/// Largest supported walk dimension.
pub const MAX_DIMENSION: usize = 16;

impl ShockVector {
    pub fn new(components: &[i8]) -> Result<Self> {
        if components.is_empty() || components.len() > MAX_DIMENSION {
            return Err(Error::Config(format!(
                "shock dimension must be in 1..={MAX_DIMENSION}, got {}",
                components.len()
            )));
        }
        let mut bits = 0u32;
        for (i, &c) in components.iter().enumerate() {
            match c {
                1 => {}
                -1 => bits |= 1 << i,
                other => {
                    return Err(Error::Config(format!(
                        "shock component {i} must be +1 or -1, got {other}"
                    )))
                }
            }
        }
        Ok(Self {
            bits,
            dim: components.len() as u8,
        })
    }

    /// The `index`-th outcome in enumeration order; index 0 is all `+1`.
    pub(crate) fn from_index(index: u32, dim: usize) -> Self {
        Self {
            bits: index,
            dim: dim as u8,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    /// Component `i` (zero-based) as `+1.0` or `-1.0`.
    pub fn get(&self, i: usize) -> f64 {
        assert!(i < self.dim(), "shock component {i} out of range");
        if self.bits & (1 << i) == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// `Δb¹`, the component driving the traded asset.
    pub fn first(&self) -> f64 {
        self.get(0)
    }

    pub fn components(&self) -> Vec<i8> {
        (0..self.dim())
            .map(|i| if self.get(i) > 0.0 { 1 } else { -1 })
            .collect()
    }
}

impl fmt::Display for ShockVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.dim() {
            f.write_str(if self.get(i) > 0.0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for ShockVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ShockVector({self})")
    }
}

/// Conditioning events on the next first shock component:
/// `Up` is `A = {Δb¹ = +1}`, `Down` its complement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    Up,
    Down,
}

impl Event {
    pub fn of(shock: &ShockVector) -> Self {
        if shock.first() > 0.0 {
            Event::Up
        } else {
            Event::Down
        }
    }

    pub fn contains(&self, shock: &ShockVector) -> bool {
        Event::of(shock) == *self
    }
}

/// A point of the information structure, identified by its full history.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Node {
    pub time_index: usize,
    /// `time_index` entries.
    pub shocks: Vec<ShockVector>,
    /// `time_index + 1` entries, starting with the initial regime.
    pub regimes: Vec<usize>,
}

impl Node {
    pub fn root(regime: usize) -> Self {
        Self {
            time_index: 0,
            shocks: Vec::new(),
            regimes: vec![regime],
        }
    }

    pub fn current_regime(&self) -> usize {
        *self.regimes.last().expect("regime history is never empty")
    }

    fn child(&self, shock: ShockVector, regime: usize) -> Self {
        let mut shocks = self.shocks.clone();
        shocks.push(shock);
        let mut regimes = self.regimes.clone();
        regimes.push(regime);
        Self {
            time_index: self.time_index + 1,
            shocks,
            regimes,
        }
    }
}

/// One joint outcome of the next shock and the next regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub shock: ShockVector,
    pub regime: usize,
    pub weight: f64,
}

/// All outcomes reachable in one step from `regime`, shocks outermost.
///
/// The shock weight `2^-d` is a power of two, so each joint weight is the
/// transition entry scaled exactly.
pub fn child_outcomes(dim: usize, chain: &RegimeChain, regime: usize) -> Vec<Outcome> {
    let shock_weight = 1.0 / (1u64 << dim) as f64;
    let row = chain.row(regime);
    let mut out = Vec::with_capacity((1 << dim) * row.len());
    for index in 0..(1u32 << dim) {
        let shock = ShockVector::from_index(index, dim);
        for (next, &p) in row.iter().enumerate() {
            if p > 0.0 {
                out.push(Outcome {
                    shock,
                    regime: next,
                    weight: shock_weight * p,
                });
            }
        }
    }
    out
}

/// Children of a node with their conditional probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ChildDistribution {
    pub entries: Vec<(Node, f64)>,
}

impl ChildDistribution {
    pub fn total_weight(&self) -> f64 {
        self.entries
            .iter()
            .map(|(_, w)| *w)
            .collect::<CompensatedSum>()
            .value()
    }
}

/// Value-level child enumeration for a node given by its history.
pub fn enumerate_children(
    node: &Node,
    grid: &TimeGrid,
    dim: usize,
    chain: &RegimeChain,
) -> Result<ChildDistribution> {
    if node.time_index >= grid.steps() {
        return Err(Error::NoChildren {
            time_index: node.time_index,
        });
    }
    let entries = child_outcomes(dim, chain, node.current_regime())
        .into_iter()
        .map(|o| (node.child(o.shock, o.regime), o.weight))
        .collect();
    Ok(ChildDistribution { entries })
}

/// Index of a node in a [`Lattice`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(&self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
struct Record {
    parent: Option<NodeId>,
    time: u32,
    shock: Option<ShockVector>,
    regime: u32,
    /// Conditional probability from the parent; initial probability for roots.
    weight: f64,
    first_child: usize,
    child_count: u32,
}

/// The fully expanded tree, one arena per scenario.
#[derive(Debug, Clone)]
pub struct Lattice {
    grid: TimeGrid,
    dim: usize,
    records: Vec<Record>,
    roots: Vec<NodeId>,
    layers: Vec<Range<usize>>,
}

impl Lattice {
    pub const DEFAULT_PATH_CAP: u128 = 1 << 24;

    /// Upper bound on the number of nodes: roots × Σₙ (2^d · max row support)ⁿ.
    pub fn node_count_bound(grid: &TimeGrid, dim: usize, chain: &RegimeChain) -> u128 {
        let support = (0..chain.len())
            .map(|i| chain.row(i).iter().filter(|p| **p > 0.0).count())
            .max()
            .unwrap_or(1) as u128;
        let roots = chain.initial().iter().filter(|p| **p > 0.0).count() as u128;
        let branching = (1u128 << dim.min(64)).saturating_mul(support);
        let mut layer = roots;
        let mut total = roots;
        for _ in 0..grid.steps() {
            layer = layer.saturating_mul(branching);
            total = total.saturating_add(layer);
        }
        total
    }

    pub fn build(grid: TimeGrid, dim: usize, chain: &RegimeChain, path_cap: u128) -> Result<Self> {
        if dim == 0 || dim > MAX_DIMENSION {
            return Err(Error::Config(format!(
                "walk dimension d must be in 1..={MAX_DIMENSION}, got {dim}"
            )));
        }
        let bound = Self::node_count_bound(&grid, dim, chain);
        if bound > path_cap {
            return Err(Error::ResourceGuard {
                requested: bound,
                cap: path_cap,
            });
        }

        let mut records = Vec::with_capacity(bound as usize);
        let mut roots = Vec::new();
        for (regime, &p) in chain.initial().iter().enumerate() {
            if p > 0.0 {
                roots.push(NodeId(records.len()));
                records.push(Record {
                    parent: None,
                    time: 0,
                    shock: None,
                    regime: regime as u32,
                    weight: p,
                    first_child: 0,
                    child_count: 0,
                });
            }
        }
        let mut layers: Vec<Range<usize>> = Vec::with_capacity(grid.steps() + 1);
        layers.push(0..records.len());

        // one outcome table per regime, reused for every node
        let tables: Vec<Vec<Outcome>> = (0..chain.len())
            .map(|r| child_outcomes(dim, chain, r))
            .collect();

        for n in 0..grid.steps() {
            let current = layers[n].clone();
            let start = records.len();
            for parent in current {
                let outcomes = &tables[records[parent].regime as usize];
                records[parent].first_child = records.len();
                records[parent].child_count = outcomes.len() as u32;
                for o in outcomes {
                    records.push(Record {
                        parent: Some(NodeId(parent)),
                        time: (n + 1) as u32,
                        shock: Some(o.shock),
                        regime: o.regime as u32,
                        weight: o.weight,
                        first_child: 0,
                        child_count: 0,
                    });
                }
            }
            layers.push(start..records.len());
        }

        Ok(Self {
            grid,
            dim,
            records,
            roots,
            layers,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn roots(&self) -> &[NodeId] {
        &self.roots
    }

    /// Node ids at time index `n`.
    pub fn layer(&self, n: usize) -> impl DoubleEndedIterator<Item = NodeId> + ExactSizeIterator {
        self.layers[n].clone().map(NodeId)
    }

    pub fn layer_range(&self, n: usize) -> Range<usize> {
        self.layers[n].clone()
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.records.len()).map(NodeId)
    }

    pub fn time(&self, id: NodeId) -> usize {
        self.records[id.0].time as usize
    }

    pub fn is_terminal(&self, id: NodeId) -> bool {
        self.time(id) == self.grid.steps()
    }

    /// The shock that led into this node (`None` at a root).
    pub fn shock(&self, id: NodeId) -> Option<ShockVector> {
        self.records[id.0].shock
    }

    pub fn regime(&self, id: NodeId) -> usize {
        self.records[id.0].regime as usize
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.records[id.0].parent
    }

    /// Conditional one-step probability from the parent (initial law for roots).
    pub fn weight(&self, id: NodeId) -> f64 {
        self.records[id.0].weight
    }

    pub fn children(&self, id: NodeId) -> impl ExactSizeIterator<Item = (NodeId, f64)> + '_ {
        let r = &self.records[id.0];
        (r.first_child..r.first_child + r.child_count as usize)
            .map(move |c| (NodeId(c), self.records[c].weight))
    }

    pub fn child_count(&self, id: NodeId) -> usize {
        self.records[id.0].child_count as usize
    }

    pub fn root_of(&self, mut id: NodeId) -> NodeId {
        while let Some(p) = self.parent(id) {
            id = p;
        }
        id
    }

    /// Node ids from the root down to `id`, inclusive.
    pub fn path_to(&self, id: NodeId) -> Vec<NodeId> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.parent(cur) {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Probability of reaching `id` from its root.
    pub fn path_probability(&self, id: NodeId) -> f64 {
        self.path_to(id)
            .into_iter()
            .skip(1)
            .map(|n| self.weight(n))
            .product()
    }

    /// Descendants of `id` living at time index `time` (contiguous in the arena).
    pub fn descendants_at(&self, id: NodeId, time: usize) -> Range<usize> {
        let own = self.time(id);
        assert!(time >= own, "descendants must lie in the future");
        let mut range = id.0..id.0 + 1;
        for _ in own..time {
            let first = &self.records[range.start];
            let last = &self.records[range.end - 1];
            range = first.first_child..last.first_child + last.child_count as usize;
        }
        range
    }

    /// Reconstructs the full history of a node.
    pub fn node(&self, id: NodeId) -> Node {
        let path = self.path_to(id);
        Node {
            time_index: self.time(id),
            shocks: path.iter().skip(1).filter_map(|n| self.shock(*n)).collect(),
            regimes: path.iter().map(|n| self.regime(*n)).collect(),
        }
    }

    /// Locates a node by its history.
    pub fn find(&self, node: &Node) -> Option<NodeId> {
        let mut cur = *self.roots.iter().find(|r| self.regime(**r) == node.regimes[0])?;
        for (shock, regime) in node.shocks.iter().zip(&node.regimes[1..]) {
            cur = self
                .children(cur)
                .map(|(c, _)| c)
                .find(|c| self.shock(*c) == Some(*shock) && self.regime(*c) == *regime)?;
        }
        Some(cur)
    }

    fn require_children(&self, id: NodeId) -> Result<()> {
        if self.is_terminal(id) {
            Err(Error::NoChildren {
                time_index: self.time(id),
            })
        } else {
            Ok(())
        }
    }

    /// `E[f | F_{t_n}]` at `id`.
    pub fn expect<F>(&self, id: NodeId, mut f: F) -> Result<f64>
    where
        F: FnMut(NodeId) -> f64,
    {
        self.require_children(id)?;
        let mut acc = CompensatedSum::new();
        for (child, w) in self.children(id) {
            acc.add(w * f(child));
        }
        Ok(acc.value())
    }

    /// `E[f | event ∨ F_{t_n}]` at `id`.
    pub fn expect_given<F>(&self, id: NodeId, event: Event, mut f: F) -> Result<f64>
    where
        F: FnMut(NodeId) -> f64,
    {
        self.require_children(id)?;
        let mut num = CompensatedSum::new();
        let mut mass = CompensatedSum::new();
        for (child, w) in self.children(id) {
            let shock = self.shock(child).expect("children carry a shock");
            if event.contains(&shock) {
                num.add(w * f(child));
                mass.add(w);
            }
        }
        Ok(num.value() / mass.value())
    }
}
