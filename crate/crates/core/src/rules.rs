//! Rule extraction: the discrete model read out as a graph of conjunctions
//! and disjunctions, pruned of provably inert structure.
//!
//! [`extract`] binarizes the logical weights and then runs three passes:
//!
//! 1. constants: nodes whose output cannot vary are replaced by their value
//!    and the value is propagated upwards (a constant-1 literal is dropped
//!    from a conjunction, a constant-0 literal kills it; dually for
//!    disjunctions);
//! 2. duplicates: nodes of one layer with the same canonical literal set are
//!    merged and their head weights pooled;
//! 3. zero weights: top-level rules whose class weights are all below a
//!    threshold are dropped, along with structure only they used.
//!
//! These passes stand in for the dead-node detection and redundant-rule
//! elimination the method cites but does not spell out.
//!
//! Head weights are kept as the multiset of original terms rather than
//! their rounded sums, and logits are correctly rounded sums of those
//! terms. A pruned rule set therefore reproduces the model's discrete
//! logits bit for bit.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::binarizer::bound_feature_names;
use crate::data::{ColumnKind, Dataset};
use crate::error::{Result, RrlError};
use crate::laf::{binarize_weights, NodeKind};
use crate::model::{argmax_rows, RrlModel};
use crate::numerics::{exact_sum, DenseMatrix};

/// Default magnitude below which a head weight counts as zero.
pub const ZERO_WEIGHT_THRESHOLD: f64 = 1e-6;

/// What one `u⁽⁰⁾` dimension tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "snake_case")]
pub enum AtomKind {
    /// `feature > threshold`.
    Above { feature: usize, threshold: f64 },
    /// `feature < threshold`.
    Below { feature: usize, threshold: f64 },
    /// `feature == category`, one of `categories` mutually exclusive values.
    Category { feature: usize, category: usize, categories: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub name: String,
    #[serde(flatten)]
    pub kind: AtomKind,
}

/// Node `index` of the output of logical layer `layer` (1-based), numbered
/// as in the model: conjunctions first, then disjunctions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId {
    pub layer: usize,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Literal {
    /// A `u⁽⁰⁾` dimension.
    Atom(usize),
    /// The output of a lower node.
    Node(NodeId),
}

/// A surviving logical node with its duplicate-free, sorted literals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub literals: Vec<Literal>,
}

/// A node read by the head, with its class weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub node: NodeId,
    pub kind: NodeKind,
    pub literals: Vec<Literal>,
    pub rendered: String,
    /// Per-class weight: the correctly rounded sum of `weight_terms`.
    pub weights: Vec<f64>,
    /// Per class, the original head weights pooled into this rule.
    pub weight_terms: Vec<Vec<f64>>,
}

impl Rule {
    pub fn max_abs_weight(&self) -> f64 {
        self.weights.iter().fold(0.0, |m, w| m.max(w.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub atoms: Vec<Atom>,
    pub class_names: Vec<String>,
    /// Every surviving node, ordered by id (so children precede parents).
    pub nodes: Vec<RuleNode>,
    /// Top-level rules, by largest absolute class weight descending.
    pub rules: Vec<Rule>,
    /// Per-class bias: the sum of `bias_terms`.
    pub biases: Vec<f64>,
    /// Per class, the model bias plus the weights of always-true rules.
    pub bias_terms: Vec<Vec<f64>>,
    pub edge_count: usize,
    pub dead_nodes_removed: usize,
    pub merged_duplicates: usize,
    /// Nodes that survived the constant pass but feed no surviving rule.
    pub unused_nodes_removed: usize,
}

/// How constant nodes are recognized.
#[derive(Debug, Clone, Copy)]
pub enum DeadNodes<'a> {
    /// Only analytically constant nodes: vacuous gates, contradictory or
    /// exhaustive literal sets, and anything forced by those. Safe on every
    /// possible input.
    Symbolic,
    /// Also nodes whose output happens to be constant over these instances.
    /// Exact on them, but not necessarily on unseen data.
    Empirical(&'a Dataset),
}

#[derive(Debug, Clone, Copy)]
pub struct ExtractOptions<'a> {
    pub dead_nodes: DeadNodes<'a>,
    pub zero_weight_threshold: f64,
}

impl Default for ExtractOptions<'_> {
    fn default() -> Self {
        Self {
            dead_nodes: DeadNodes::Symbolic,
            zero_weight_threshold: ZERO_WEIGHT_THRESHOLD,
        }
    }
}

/// Atoms of a model's `u⁽⁰⁾`, in assembly order.
pub fn model_atoms(model: &RrlModel) -> Vec<Atom> {
    let names = bound_feature_names(&model.bounds, &model.schema);
    let mut kinds = Vec::with_capacity(names.len());
    let k = model.bounds.k();
    for feature in 0..model.bounds.feature_count() {
        for &threshold in model.bounds.lower().row(feature) {
            kinds.push(AtomKind::Above { feature, threshold });
        }
        for &threshold in model.bounds.upper().row(feature) {
            kinds.push(AtomKind::Below { feature, threshold });
        }
    }
    debug_assert_eq!(kinds.len(), 2 * k * model.bounds.feature_count());
    let discrete = model
        .schema
        .columns()
        .iter()
        .filter(|c| matches!(c.kind, ColumnKind::Discrete(_)));
    for (offset, column) in discrete.enumerate() {
        let ColumnKind::Discrete(cats) = &column.kind else { unreachable!() };
        // Discrete features are numbered after the continuous ones.
        let feature = model.bounds.feature_count() + offset;
        for category in 0..cats.len() {
            kinds.push(AtomKind::Category {
                feature,
                category,
                categories: cats.len(),
            });
        }
    }
    names
        .into_iter()
        .zip(kinds)
        .map(|(name, kind)| Atom { name, kind })
        .collect()
}

/// Rule set of a trained model.
pub fn extract(model: &RrlModel, options: &ExtractOptions<'_>) -> Result<RuleSet> {
    model.validate()?;
    let widths = model.output_widths();
    let locate = |sources: &[usize], column: usize| -> Literal {
        let mut offset = column;
        for &s in sources {
            if offset < widths[s] {
                return if s == 0 {
                    Literal::Atom(offset)
                } else {
                    Literal::Node(NodeId { layer: s, index: offset })
                };
            }
            offset -= widths[s];
        }
        unreachable!("column within the source widths")
    };

    let mut nodes = Vec::new();
    for (i, layer) in model.layers.iter().enumerate() {
        for (kind, base, w) in [
            (NodeKind::Conj, 0, &layer.w_conj),
            (NodeKind::Disj, layer.conj_count(), &layer.w_disj),
        ] {
            let w = binarize_weights(w);
            for r in 0..w.rows() {
                let literals = (0..w.cols())
                    .filter(|&c| w.get(r, c) == 1.0)
                    .map(|c| locate(&layer.sources, c))
                    .collect();
                nodes.push(RuleNode {
                    id: NodeId { layer: i + 1, index: base + r },
                    kind,
                    literals,
                });
            }
        }
    }
    let m = model.class_count();
    let head = (0..model.head.weights.cols())
        .map(|j| {
            let terms = (0..m).map(|c| vec![model.head.weights.get(c, j)]).collect();
            (locate(&model.head.sources, j), terms)
        })
        .collect();
    let graph = Graph {
        nodes,
        head,
        bias_terms: model.head.biases.iter().map(|&b| vec![b]).collect(),
    };
    let empirical = match options.dead_nodes {
        DeadNodes::Symbolic => None,
        DeadNodes::Empirical(ds) => Some(model.encode(ds)?),
    };
    let atoms = model_atoms(model);
    let stats = Stats::default();
    prune(graph, atoms, model.schema.class_names().to_vec(), empirical.as_ref(), options.zero_weight_threshold, stats)
}

impl RuleSet {
    /// Runs the pruning passes again on this rule set. A set produced by
    /// [`extract`] with the same options is returned unchanged.
    pub fn canonicalize(&self, options: &ExtractOptions<'_>) -> Result<RuleSet> {
        let empirical = match options.dead_nodes {
            DeadNodes::Symbolic => None,
            DeadNodes::Empirical(_) => {
                return Err(RrlError::InvalidArgument(
                    "empirical dead-node detection needs the model's encoding; use extract".into(),
                ))
            }
        };
        let mut head: Vec<(Literal, Vec<Vec<f64>>)> = Vec::new();
        for rule in &self.rules {
            head.push((Literal::Node(rule.node), rule.weight_terms.clone()));
        }
        // Reprocess in id order so the result does not depend on rule order.
        head.sort_by_key(|(l, _)| *l);
        let graph = Graph {
            nodes: self.nodes.clone(),
            head,
            bias_terms: self.bias_terms.clone(),
        };
        let stats = Stats {
            dead: self.dead_nodes_removed,
            merged: self.merged_duplicates,
            unused: self.unused_nodes_removed,
        };
        prune(graph, self.atoms.clone(), self.class_names.clone(), empirical, options.zero_weight_threshold, stats)
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    /// Output of every node for one `u⁽⁰⁾` row, aligned with `nodes`.
    fn node_values(&self, u: &[f64], index: &HashMap<NodeId, usize>) -> Vec<bool> {
        let mut values = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let lit = |l: &Literal| match l {
                Literal::Atom(j) => u[*j] == 1.0,
                Literal::Node(id) => values[index[id]],
            };
            let v = match node.kind {
                NodeKind::Conj => node.literals.iter().all(lit),
                NodeKind::Disj => node.literals.iter().any(lit),
            };
            values.push(v);
        }
        values
    }

    /// Discrete logits of every row of `u0`, as correctly rounded sums of
    /// the bias terms and the weight terms of the rules that fire.
    pub fn logits(&self, u0: &DenseMatrix) -> Result<DenseMatrix> {
        if u0.cols() != self.atoms.len() {
            return Err(RrlError::Shape(format!(
                "input has width {}, rule set expects {}",
                u0.cols(),
                self.atoms.len()
            )));
        }
        let index: HashMap<NodeId, usize> = self.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let m = self.class_count();
        let mut out = DenseMatrix::zeros(u0.rows(), m);
        for i in 0..u0.rows() {
            let values = self.node_values(u0.row(i), &index);
            let firing: Vec<&Rule> = self.rules.iter().filter(|r| values[index[&r.node]]).collect();
            for c in 0..m {
                let terms = self.bias_terms[c]
                    .iter()
                    .chain(firing.iter().flat_map(|r| r.weight_terms[c].iter()))
                    .copied();
                out.set(i, c, exact_sum(terms));
            }
        }
        Ok(out)
    }

    pub fn predict_encoded(&self, u0: &DenseMatrix) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.logits(u0)?))
    }

    /// Machine-readable export.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| RrlError::InvalidArgument(format!("rule set export: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| RrlError::Data(format!("rule set import: {e}")))
    }
}

/// `#edges` of a rule set: surviving literal links plus non-zero head links.
pub fn count_edges(ruleset: &RuleSet) -> usize {
    ruleset.edge_count
}

fn compute_edges(nodes: &[RuleNode], rules: &[Rule], threshold: f64) -> usize {
    let literal_links: usize = nodes.iter().map(|n| n.literals.len()).sum();
    let head_links: usize = rules
        .iter()
        .map(|r| r.weights.iter().filter(|w| w.abs() >= threshold).count())
        .sum();
    literal_links + head_links
}

#[derive(Debug, Clone)]
struct Graph {
    nodes: Vec<RuleNode>,
    head: Vec<(Literal, Vec<Vec<f64>>)>,
    bias_terms: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Stats {
    dead: usize,
    merged: usize,
    unused: usize,
}

#[derive(Debug, Clone, Copy)]
enum Status {
    Const(bool),
    Alias(NodeId),
    Live,
}

/// A literal after substitution: a known constant or a live reference.
enum Resolved {
    Const(bool),
    Lit(Literal),
}

fn prune(
    mut graph: Graph,
    atoms: Vec<Atom>,
    class_names: Vec<String>,
    empirical: Option<&DenseMatrix>,
    threshold: f64,
    mut stats: Stats,
) -> Result<RuleSet> {
    let m = class_names.len();
    if graph.bias_terms.len() != m || graph.head.iter().any(|(_, t)| t.len() != m) {
        return Err(RrlError::Shape("head terms do not match the class count".into()));
    }
    graph.nodes.sort_by_key(|n| n.id);

    // Atom values over the reference data, for the empirical mode.
    let atom_const = |j: usize| -> Option<bool> {
        match &atoms[j].kind {
            AtomKind::Category { categories: 1, .. } => return Some(true),
            _ => {}
        }
        let u = empirical?;
        let first = u.get(0, j);
        (0..u.rows()).all(|i| u.get(i, j) == first).then_some(first == 1.0)
    };

    let mut status: HashMap<NodeId, Status> = HashMap::new();
    let mut values: HashMap<NodeId, Vec<bool>> = HashMap::new();
    let mut seen: HashMap<(usize, NodeKind, Vec<Literal>), NodeId> = HashMap::new();
    let mut kept: Vec<RuleNode> = Vec::new();

    for node in &graph.nodes {
        let mut resolved = Vec::with_capacity(node.literals.len());
        for lit in &node.literals {
            resolved.push(match *lit {
                Literal::Atom(j) => match atom_const(j) {
                    Some(v) => Resolved::Const(v),
                    None => Resolved::Lit(Literal::Atom(j)),
                },
                Literal::Node(id) => match status.get(&id) {
                    Some(Status::Const(v)) => Resolved::Const(*v),
                    Some(Status::Alias(rep)) => Resolved::Lit(Literal::Node(*rep)),
                    Some(Status::Live) => Resolved::Lit(Literal::Node(id)),
                    None => {
                        return Err(RrlError::InvalidArgument(format!(
                            "node {:?} reads unknown node {:?}",
                            node.id, id
                        )))
                    }
                },
            });
        }
        // For a conjunction, a 0 literal decides and a 1 literal is inert;
        // a disjunction is the mirror image.
        let (decisive, identity) = match node.kind {
            NodeKind::Conj => (false, true),
            NodeKind::Disj => (true, false),
        };
        let mut outcome = None;
        let mut literals = Vec::new();
        for r in resolved {
            match r {
                Resolved::Const(v) if v == decisive => outcome = Some(decisive),
                Resolved::Const(_) => {}
                Resolved::Lit(l) => literals.push(l),
            }
        }
        literals.sort_unstable();
        literals.dedup();
        if outcome.is_none() {
            if literals.is_empty() {
                outcome = Some(identity);
            } else if decided_by_atoms(node.kind, &literals, &atoms) {
                outcome = Some(decisive);
            }
        }
        let mut column = None;
        if outcome.is_none() {
            if let Some(u) = empirical {
                let col: Vec<bool> = (0..u.rows())
                    .map(|i| {
                        let lit = |l: &Literal| match l {
                            Literal::Atom(j) => u.get(i, *j) == 1.0,
                            Literal::Node(id) => values[id][i],
                        };
                        match node.kind {
                            NodeKind::Conj => literals.iter().all(lit),
                            NodeKind::Disj => literals.iter().any(lit),
                        }
                    })
                    .collect();
                if let Some(&first) = col.first() {
                    if col.iter().all(|&v| v == first) {
                        outcome = Some(first);
                    }
                }
                column = Some(col);
            }
        }
        if let Some(v) = outcome {
            status.insert(node.id, Status::Const(v));
            stats.dead += 1;
            continue;
        }
        // A single literal means the same thing under either gate.
        let key_kind = if literals.len() == 1 { NodeKind::Conj } else { node.kind };
        let key = (node.id.layer, key_kind, literals.clone());
        if let Some(&rep) = seen.get(&key) {
            status.insert(node.id, Status::Alias(rep));
            stats.merged += 1;
            continue;
        }
        seen.insert(key, node.id);
        status.insert(node.id, Status::Live);
        if let Some(col) = column {
            values.insert(node.id, col);
        }
        kept.push(RuleNode {
            id: node.id,
            kind: node.kind,
            literals,
        });
    }

    // Head: constant-true rules fold into the bias, constant-false ones
    // vanish, aliases pool their terms with their representative.
    let mut bias_terms = graph.bias_terms;
    let mut pooled: BTreeMap<NodeId, Vec<Vec<f64>>> = BTreeMap::new();
    for (lit, terms) in graph.head {
        let target = match lit {
            Literal::Atom(j) => {
                return Err(RrlError::InvalidArgument(format!(
                    "head reads input atom {j} directly"
                )))
            }
            Literal::Node(id) => match status.get(&id) {
                Some(Status::Const(true)) => {
                    for (b, t) in bias_terms.iter_mut().zip(terms) {
                        b.extend(t);
                    }
                    continue;
                }
                Some(Status::Const(false)) => continue,
                Some(Status::Alias(rep)) => *rep,
                Some(Status::Live) => id,
                None => {
                    return Err(RrlError::InvalidArgument(format!("head reads unknown node {id:?}")))
                }
            },
        };
        let entry = pooled.entry(target).or_insert_with(|| vec![Vec::new(); m]);
        for (e, t) in entry.iter_mut().zip(terms) {
            e.extend(t);
        }
    }

    // Zero-weight pass, then drop structure no surviving rule reads.
    let by_id: HashMap<NodeId, &RuleNode> = kept.iter().map(|n| (n.id, n)).collect();
    let mut rules = Vec::new();
    for (id, mut terms) in pooled {
        for t in &mut terms {
            // Term order is irrelevant to the exact sum; sorting makes the
            // representation canonical.
            t.sort_by(f64::total_cmp);
        }
        let weights: Vec<f64> = terms.iter().map(|t| exact_sum(t.iter().copied())).collect();
        if weights.iter().all(|w| w.abs() < threshold) {
            continue;
        }
        let node = by_id[&id];
        rules.push(Rule {
            node: id,
            kind: node.kind,
            literals: node.literals.clone(),
            rendered: String::new(),
            weights,
            weight_terms: terms,
        });
    }
    let mut reachable: std::collections::HashSet<NodeId> = rules.iter().map(|r| r.node).collect();
    for node in kept.iter().rev() {
        if reachable.contains(&node.id) {
            for l in &node.literals {
                if let Literal::Node(child) = l {
                    reachable.insert(*child);
                }
            }
        }
    }
    let before = kept.len();
    kept.retain(|n| reachable.contains(&n.id));
    stats.unused += before - kept.len();

    for t in &mut bias_terms {
        t.sort_by(f64::total_cmp);
    }
    let biases = bias_terms.iter().map(|t| exact_sum(t.iter().copied())).collect();
    let by_id: HashMap<NodeId, &RuleNode> = kept.iter().map(|n| (n.id, n)).collect();
    for rule in &mut rules {
        rule.rendered = render_node(rule.node, &by_id, &atoms, true);
    }
    rules.sort_by(|a, b| {
        b.max_abs_weight()
            .total_cmp(&a.max_abs_weight())
            .then(a.node.cmp(&b.node))
    });
    let edge_count = compute_edges(&kept, &rules, threshold);
    Ok(RuleSet {
        atoms,
        class_names,
        nodes: kept,
        rules,
        biases,
        bias_terms,
        edge_count,
        dead_nodes_removed: stats.dead,
        merged_duplicates: stats.merged,
        unused_nodes_removed: stats.unused,
    })
}

/// Whether the atom literals alone force a gate: mutually exclusive atoms
/// in a conjunction (two categories of one feature, or `x > T` with `x < H`
/// where `T ≥ H`), or jointly exhaustive atoms in a disjunction (every
/// category of a feature, or `x > T` with `x < H` where `H > T`).
fn decided_by_atoms(kind: NodeKind, literals: &[Literal], atoms: &[Atom]) -> bool {
    #[derive(Default)]
    struct Feature {
        above: Vec<f64>,
        below: Vec<f64>,
        categories: Vec<usize>,
        of: usize,
    }
    let mut features: BTreeMap<usize, Feature> = BTreeMap::new();
    for l in literals {
        let Literal::Atom(j) = l else { continue };
        match atoms[*j].kind {
            AtomKind::Above { feature, threshold } => features.entry(feature).or_default().above.push(threshold),
            AtomKind::Below { feature, threshold } => features.entry(feature).or_default().below.push(threshold),
            AtomKind::Category {
                feature,
                category,
                categories,
            } => {
                let f = features.entry(feature).or_default();
                f.categories.push(category);
                f.of = categories;
            }
        }
    }
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    features.values().any(|f| match kind {
        NodeKind::Conj => {
            let mut cats = f.categories.clone();
            cats.sort_unstable();
            cats.dedup();
            cats.len() > 1 || (!f.above.is_empty() && !f.below.is_empty() && max(&f.above) >= min(&f.below))
        }
        NodeKind::Disj => {
            let mut cats = f.categories.clone();
            cats.sort_unstable();
            cats.dedup();
            (f.of > 0 && cats.len() == f.of)
                || (!f.above.is_empty() && !f.below.is_empty() && max(&f.below) > min(&f.above))
        }
    })
}

fn render_literal(l: &Literal, nodes: &HashMap<NodeId, &RuleNode>, atoms: &[Atom]) -> String {
    match l {
        Literal::Atom(j) => atoms[*j].name.clone(),
        Literal::Node(id) => render_node(*id, nodes, atoms, false),
    }
}

fn render_node(id: NodeId, nodes: &HashMap<NodeId, &RuleNode>, atoms: &[Atom], top: bool) -> String {
    let node = nodes[&id];
    let parts: Vec<String> = node.literals.iter().map(|l| render_literal(l, nodes, atoms)).collect();
    let op = match node.kind {
        NodeKind::Conj => " ∧ ",
        NodeKind::Disj => " ∨ ",
    };
    let joined = parts.join(op);
    if top || parts.len() == 1 {
        joined
    } else {
        format!("({joined})")
    }
}

fn format_weight(w: f64) -> String {
    // Avoid printing "-0.0000" for weights that round to zero.
    let s = format!("{w:+.4}");
    if s == "-0.0000" {
        "+0.0000".into()
    } else {
        s
    }
}

/// Text document listing every rule with its per-class weights, strongest
/// first.
pub fn render(ruleset: &RuleSet) -> String {
    let mut out = String::new();
    let classes = &ruleset.class_names;
    let _ = writeln!(out, "# Rule set");
    let _ = writeln!(out, "classes: {}", classes.join(", "));
    let _ = writeln!(
        out,
        "edges: {} (dead nodes removed: {}, duplicates merged: {}, unused nodes removed: {})",
        ruleset.edge_count, ruleset.dead_nodes_removed, ruleset.merged_duplicates, ruleset.unused_nodes_removed
    );
    let biases: Vec<String> = ruleset.biases.iter().map(|&b| format_weight(b)).collect();
    let _ = writeln!(out, "bias: {}", biases.join(" "));
    let _ = writeln!(out);
    if ruleset.rules.is_empty() {
        let _ = writeln!(
            out,
            "No rules survive: this is a bias-only model that predicts `{}` for every input.",
            classes[argmax_rows(&DenseMatrix::from_rows(&[&ruleset.biases]).expect("one row"))[0]]
        );
        return out;
    }
    let width = classes.iter().map(|c| c.chars().count()).max().unwrap_or(0).max(8);
    let header: Vec<String> = classes.iter().map(|c| format!("{c:>width$}")).collect();
    let _ = writeln!(out, "{:>5}  {}  rule", "#", header.join(" "));
    for (i, rule) in ruleset.rules.iter().enumerate() {
        let weights: Vec<String> = rule.weights.iter().map(|&w| format!("{:>width$}", format_weight(w))).collect();
        let _ = writeln!(out, "{:>5}  {}  {}", i + 1, weights.join(" "), rule.rendered);
    }
    out
}

/// Relative importance of every rule: its largest absolute class weight
/// divided by the largest over all rules, in rule order.
pub fn weight_distribution(ruleset: &RuleSet) -> Vec<(usize, f64)> {
    let top = ruleset.rules.iter().map(Rule::max_abs_weight).fold(0.0, f64::max);
    ruleset
        .rules
        .iter()
        .enumerate()
        .map(|(i, r)| (i + 1, if top > 0.0 { r.max_abs_weight() / top } else { 0.0 }))
        .collect()
}
