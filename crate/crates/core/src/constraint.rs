//! Boolean constraints over scenarios.
//!
//! A [`ConstraintExpr`] references features by id and values by index into the
//! feature's value list. Expressions are compiled against a [`ScenarioSpace`]
//! into bitmask form before evaluation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Scenario, ScenarioSpace};

/// Set of value indices for one feature.
pub type ValueSet = BTreeSet<usize>;

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "camelCase")]
pub enum ConstraintExpr {
    #[default]
    True,
    /// The feature's value index is in `values`.
    Allow { feature: u32, values: ValueSet },
    /// At least one `(feature, values)` atom matches.
    AtLeastOne { atoms: Vec<(u32, ValueSet)> },
    And { args: Vec<ConstraintExpr> },
    Or { args: Vec<ConstraintExpr> },
    Not { arg: Box<ConstraintExpr> },
}

impl ConstraintExpr {
    pub fn allow(feature: u32, values: impl IntoIterator<Item = usize>) -> Self {
        ConstraintExpr::Allow {
            feature,
            values: values.into_iter().collect(),
        }
    }

    pub fn at_least_one<I, V>(atoms: I) -> Self
    where
        I: IntoIterator<Item = (u32, V)>,
        V: IntoIterator<Item = usize>,
    {
        ConstraintExpr::AtLeastOne {
            atoms: atoms
                .into_iter()
                .map(|(f, vs)| (f, vs.into_iter().collect()))
                .collect(),
        }
    }

    pub fn and(args: Vec<ConstraintExpr>) -> Self {
        ConstraintExpr::And { args }
    }

    pub fn or(args: Vec<ConstraintExpr>) -> Self {
        ConstraintExpr::Or { args }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(arg: ConstraintExpr) -> Self {
        ConstraintExpr::Not { arg: Box::new(arg) }
    }

    /// Checks feature references, index ranges and non-empty lists.
    pub fn validate(&self, space: &ScenarioSpace) -> Result<()> {
        self.compile(space).map(|_| ())
    }

    pub fn compile(&self, space: &ScenarioSpace) -> Result<CompiledConstraint> {
        Ok(CompiledConstraint {
            root: compile_node(self, space)?,
        })
    }

    pub fn eval(&self, scenario: &Scenario, space: &ScenarioSpace) -> Result<bool> {
        space.check_scenario(scenario)?;
        Ok(self.compile(space)?.matches(&scenario.assignment))
    }

    /// True for the canonical unsatisfiable form: an `Allow` with no values.
    pub fn is_trivially_false(&self) -> bool {
        matches!(self, ConstraintExpr::Allow { values, .. } if values.is_empty())
    }

    /// Rewrites into an equivalent canonical expression.
    ///
    /// Negations are pushed down to `Allow` level as set complements, nested
    /// `And`/`Or` are flattened, `Allow`s on the same feature are intersected
    /// under `And` and merged into a single `AtLeastOne` under `Or`, and
    /// full-domain `Allow`s are dropped. An unsatisfiable expression becomes an
    /// `Allow` with an empty set on the first feature.
    pub fn normalize(&self, space: &ScenarioSpace) -> Result<ConstraintExpr> {
        let full = full_masks(space);
        let node = to_nnf(self, false, space, &full)?;
        let node = simplify(node, &full);
        Ok(from_mask_node(&node, space))
    }

    /// Feature ids fixed to a proper subset of their values by a top-level
    /// conjunct of the normalized constraint.
    pub fn constrained_features(&self, space: &ScenarioSpace) -> Result<Vec<u32>> {
        let normalized = self.normalize(space)?;
        let mut out = BTreeSet::new();
        let conjuncts: &[ConstraintExpr] = match &normalized {
            ConstraintExpr::And { args } => args,
            other => std::slice::from_ref(other),
        };
        for c in conjuncts {
            if let ConstraintExpr::Allow { feature, .. } = c {
                out.insert(*feature);
            }
        }
        Ok(space
            .features
            .iter()
            .map(|f| f.feature_id)
            .filter(|id| out.contains(id))
            .collect())
    }

    /// Decomposes into per-feature allowed masks plus at most one `AtLeastOne`
    /// clause, the shape the convolution counter handles.
    pub fn conjunctive_shape(&self, space: &ScenarioSpace) -> Result<ConjunctiveShape> {
        let normalized = self.normalize(space)?;
        let mut shape = ConjunctiveShape {
            masks: full_masks(space),
            at_least_one: None,
        };
        let conjuncts: &[ConstraintExpr] = match &normalized {
            ConstraintExpr::True => &[],
            ConstraintExpr::And { args } => args,
            other => std::slice::from_ref(other),
        };
        for c in conjuncts {
            match c {
                ConstraintExpr::Allow { feature, values } => {
                    let pos = position_of(space, *feature)?;
                    shape.masks[pos] &= mask_of(values);
                }
                ConstraintExpr::AtLeastOne { atoms } => {
                    if shape.at_least_one.is_some() {
                        return Err(Error::UnsupportedShape(
                            "more than one at-least-one clause".into(),
                        ));
                    }
                    let mut compiled = Vec::with_capacity(atoms.len());
                    for (feature, values) in atoms {
                        compiled.push((position_of(space, *feature)?, mask_of(values)));
                    }
                    shape.at_least_one = Some(compiled);
                }
                other => {
                    return Err(Error::UnsupportedShape(format!(
                        "{} clause after normalization",
                        op_name(other)
                    )))
                }
            }
        }
        Ok(shape)
    }
}

fn op_name(e: &ConstraintExpr) -> &'static str {
    match e {
        ConstraintExpr::True => "true",
        ConstraintExpr::Allow { .. } => "allow",
        ConstraintExpr::AtLeastOne { .. } => "atLeastOne",
        ConstraintExpr::And { .. } => "and",
        ConstraintExpr::Or { .. } => "or",
        ConstraintExpr::Not { .. } => "not",
    }
}

/// Per-feature allowed masks (by position) and an optional disjunction of atoms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConjunctiveShape {
    pub masks: Vec<u64>,
    pub at_least_one: Option<Vec<(usize, u64)>>,
}

impl ConjunctiveShape {
    /// Masks with every at-least-one atom excluded; counting these and
    /// subtracting gives the at-least-one count by inclusion–exclusion.
    pub fn excluded_masks(&self) -> Option<Vec<u64>> {
        let atoms = self.at_least_one.as_ref()?;
        let mut masks = self.masks.clone();
        for &(pos, mask) in atoms {
            masks[pos] &= !mask;
        }
        Some(masks)
    }

    pub fn matches(&self, assignment: &[usize]) -> bool {
        let base = self
            .masks
            .iter()
            .zip(assignment)
            .all(|(m, &i)| m & (1u64 << i) != 0);
        base && self.at_least_one.as_ref().is_none_or(|atoms| {
            atoms.iter().any(|&(pos, m)| m & (1u64 << assignment[pos]) != 0)
        })
    }
}

/// A constraint with feature ids resolved to positions and value sets to masks.
#[derive(Clone, Debug)]
pub struct CompiledConstraint {
    root: Node,
}

#[derive(Clone, Debug)]
enum Node {
    True,
    Allow(usize, u64),
    AtLeastOne(Vec<(usize, u64)>),
    And(Vec<Node>),
    Or(Vec<Node>),
    Not(Box<Node>),
}

impl CompiledConstraint {
    pub fn always() -> Self {
        CompiledConstraint { root: Node::True }
    }

    /// Evaluates against a value-index assignment already checked against the space.
    pub fn matches(&self, assignment: &[usize]) -> bool {
        eval_node(&self.root, assignment)
    }
}

fn eval_node(node: &Node, a: &[usize]) -> bool {
    match node {
        Node::True => true,
        Node::Allow(pos, mask) => mask & (1u64 << a[*pos]) != 0,
        Node::AtLeastOne(atoms) => atoms.iter().any(|&(p, m)| m & (1u64 << a[p]) != 0),
        Node::And(args) => args.iter().all(|n| eval_node(n, a)),
        Node::Or(args) => args.iter().any(|n| eval_node(n, a)),
        Node::Not(arg) => !eval_node(arg, a),
    }
}

fn position_of(space: &ScenarioSpace, feature: u32) -> Result<usize> {
    space.position(feature).ok_or(Error::UnknownFeature(feature))
}

fn mask_of(values: &ValueSet) -> u64 {
    values.iter().fold(0u64, |m, &i| m | (1u64 << i))
}

fn full_mask(len: usize) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

pub(crate) fn full_masks(space: &ScenarioSpace) -> Vec<u64> {
    space.features.iter().map(|f| full_mask(f.values.len())).collect()
}

fn compile_atom(space: &ScenarioSpace, feature: u32, values: &ValueSet) -> Result<(usize, u64)> {
    let pos = position_of(space, feature)?;
    let len = space.features[pos].values.len();
    if let Some(&bad) = values.iter().find(|&&i| i >= len) {
        return Err(Error::IndexOutOfRange {
            feature_id: feature,
            index: bad,
            len,
        });
    }
    Ok((pos, mask_of(values)))
}

fn compile_node(e: &ConstraintExpr, space: &ScenarioSpace) -> Result<Node> {
    Ok(match e {
        ConstraintExpr::True => Node::True,
        ConstraintExpr::Allow { feature, values } => {
            let (pos, mask) = compile_atom(space, *feature, values)?;
            Node::Allow(pos, mask)
        }
        ConstraintExpr::AtLeastOne { atoms } => {
            if atoms.is_empty() {
                return Err(Error::InvalidConstraint("atLeastOne with no atoms".into()));
            }
            Node::AtLeastOne(
                atoms
                    .iter()
                    .map(|(f, vs)| compile_atom(space, *f, vs))
                    .collect::<Result<_>>()?,
            )
        }
        ConstraintExpr::And { args } | ConstraintExpr::Or { args } => {
            if args.is_empty() {
                return Err(Error::InvalidConstraint(format!(
                    "{} with empty argument list",
                    op_name(e)
                )));
            }
            let nodes = args
                .iter()
                .map(|a| compile_node(a, space))
                .collect::<Result<_>>()?;
            if matches!(e, ConstraintExpr::And { .. }) {
                Node::And(nodes)
            } else {
                Node::Or(nodes)
            }
        }
        ConstraintExpr::Not { arg } => Node::Not(Box::new(compile_node(arg, space)?)),
    })
}

// Negation-free intermediate form used by `normalize`.
#[derive(Clone, Debug)]
enum MaskNode {
    Const(bool),
    Allow(usize, u64),
    AtLeastOne(BTreeMap<usize, u64>),
    And(Vec<MaskNode>),
    Or(Vec<MaskNode>),
}

fn to_nnf(e: &ConstraintExpr, negate: bool, space: &ScenarioSpace, full: &[u64]) -> Result<MaskNode> {
    Ok(match e {
        ConstraintExpr::True => MaskNode::Const(!negate),
        ConstraintExpr::Allow { feature, values } => {
            let (pos, mask) = compile_atom(space, *feature, values)?;
            MaskNode::Allow(pos, if negate { full[pos] & !mask } else { mask })
        }
        ConstraintExpr::AtLeastOne { atoms } => {
            if atoms.is_empty() {
                return Err(Error::InvalidConstraint("atLeastOne with no atoms".into()));
            }
            let compiled = atoms
                .iter()
                .map(|(f, vs)| compile_atom(space, *f, vs))
                .collect::<Result<Vec<_>>>()?;
            if negate {
                MaskNode::And(
                    compiled
                        .into_iter()
                        .map(|(pos, mask)| MaskNode::Allow(pos, full[pos] & !mask))
                        .collect(),
                )
            } else {
                let mut merged = BTreeMap::new();
                for (pos, mask) in compiled {
                    *merged.entry(pos).or_insert(0) |= mask;
                }
                MaskNode::AtLeastOne(merged)
            }
        }
        ConstraintExpr::And { args } | ConstraintExpr::Or { args } => {
            if args.is_empty() {
                return Err(Error::InvalidConstraint(format!(
                    "{} with empty argument list",
                    op_name(e)
                )));
            }
            let children = args
                .iter()
                .map(|a| to_nnf(a, negate, space, full))
                .collect::<Result<Vec<_>>>()?;
            let conjunctive = matches!(e, ConstraintExpr::And { .. }) != negate;
            if conjunctive {
                MaskNode::And(children)
            } else {
                MaskNode::Or(children)
            }
        }
        ConstraintExpr::Not { arg } => to_nnf(arg, !negate, space, full)?,
    })
}

fn simplify(node: MaskNode, full: &[u64]) -> MaskNode {
    match node {
        MaskNode::Const(_) => node,
        MaskNode::Allow(pos, mask) => {
            if mask == full[pos] {
                MaskNode::Const(true)
            } else if mask == 0 {
                MaskNode::Const(false)
            } else {
                MaskNode::Allow(pos, mask)
            }
        }
        MaskNode::AtLeastOne(atoms) => simplify_at_least_one(atoms, full),
        MaskNode::And(children) => {
            let mut allows: BTreeMap<usize, u64> = BTreeMap::new();
            let mut rest = Vec::new();
            let mut stack: Vec<MaskNode> = children.into_iter().map(|c| simplify(c, full)).collect();
            while let Some(c) = stack.pop() {
                match c {
                    MaskNode::Const(true) => {}
                    MaskNode::Const(false) => return MaskNode::Const(false),
                    MaskNode::Allow(pos, mask) => {
                        *allows.entry(pos).or_insert(full[pos]) &= mask;
                    }
                    MaskNode::And(inner) => stack.extend(inner),
                    other => rest.push(other),
                }
            }
            if allows.values().any(|&m| m == 0) {
                return MaskNode::Const(false);
            }
            let mut out: Vec<MaskNode> = allows
                .into_iter()
                .filter(|&(pos, m)| m != full[pos])
                .map(|(pos, m)| MaskNode::Allow(pos, m))
                .collect();
            out.extend(rest);
            match out.len() {
                0 => MaskNode::Const(true),
                1 => out.pop().unwrap(),
                _ => MaskNode::And(out),
            }
        }
        MaskNode::Or(children) => {
            let mut atoms: BTreeMap<usize, u64> = BTreeMap::new();
            let mut has_atoms = false;
            let mut rest = Vec::new();
            let mut stack: Vec<MaskNode> = children.into_iter().map(|c| simplify(c, full)).collect();
            while let Some(c) = stack.pop() {
                match c {
                    MaskNode::Const(false) => {}
                    MaskNode::Const(true) => return MaskNode::Const(true),
                    MaskNode::Allow(pos, mask) => {
                        has_atoms = true;
                        *atoms.entry(pos).or_insert(0) |= mask;
                    }
                    MaskNode::AtLeastOne(inner) => {
                        has_atoms = true;
                        for (pos, mask) in inner {
                            *atoms.entry(pos).or_insert(0) |= mask;
                        }
                    }
                    MaskNode::Or(inner) => stack.extend(inner),
                    other => rest.push(other),
                }
            }
            let mut out = Vec::new();
            if has_atoms {
                match simplify_at_least_one(atoms, full) {
                    MaskNode::Const(true) => return MaskNode::Const(true),
                    MaskNode::Const(false) => {}
                    n => out.push(n),
                }
            }
            out.extend(rest);
            match out.len() {
                0 => MaskNode::Const(false),
                1 => out.pop().unwrap(),
                _ => MaskNode::Or(out),
            }
        }
    }
}

fn simplify_at_least_one(atoms: BTreeMap<usize, u64>, full: &[u64]) -> MaskNode {
    let atoms: BTreeMap<usize, u64> = atoms.into_iter().filter(|&(_, m)| m != 0).collect();
    if atoms.iter().any(|(&pos, &m)| m == full[pos]) {
        return MaskNode::Const(true);
    }
    match atoms.len() {
        0 => MaskNode::Const(false),
        1 => {
            let (&pos, &m) = atoms.iter().next().unwrap();
            MaskNode::Allow(pos, m)
        }
        _ => MaskNode::AtLeastOne(atoms),
    }
}

fn set_of(mask: u64) -> ValueSet {
    (0..64).filter(|i| mask & (1u64 << i) != 0).collect()
}

fn from_mask_node(node: &MaskNode, space: &ScenarioSpace) -> ConstraintExpr {
    let id = |pos: usize| space.features[pos].feature_id;
    match node {
        MaskNode::Const(true) => ConstraintExpr::True,
        MaskNode::Const(false) => ConstraintExpr::Allow {
            feature: id(0),
            values: ValueSet::new(),
        },
        MaskNode::Allow(pos, mask) => ConstraintExpr::Allow {
            feature: id(*pos),
            values: set_of(*mask),
        },
        MaskNode::AtLeastOne(atoms) => ConstraintExpr::AtLeastOne {
            atoms: atoms.iter().map(|(&pos, &m)| (id(pos), set_of(m))).collect(),
        },
        MaskNode::And(children) | MaskNode::Or(children) => {
            let mut args: Vec<ConstraintExpr> =
                children.iter().map(|c| from_mask_node(c, space)).collect();
            args.sort();
            args.dedup();
            if matches!(node, MaskNode::And(_)) {
                ConstraintExpr::And { args }
            } else {
                ConstraintExpr::Or { args }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{builtin_crosswalk_space, profile_presets};

    fn scenario(a: [usize; 12]) -> Scenario {
        Scenario::new(a.to_vec())
    }

    #[test]
    fn true_accepts_anything() {
        let space = builtin_crosswalk_space();
        assert!(ConstraintExpr::True.eval(&scenario([0; 12]), &space).unwrap());
    }

    #[test]
    fn profile_one_rejects_silent_scenarios() {
        let space = builtin_crosswalk_space();
        let presets = profile_presets();
        let p1 = &presets["profile-1"];
        assert!(!p1.eval(&scenario([0; 12]), &space).unwrap());
        let mut a = [0; 12];
        a[6] = 1;
        assert!(p1.eval(&scenario(a), &space).unwrap());
    }

    #[test]
    fn broken_traffic_light_allowed() {
        let space = builtin_crosswalk_space();
        let broken = space.features[11].value_index(crate::Rational::ONE).unwrap();
        let e = ConstraintExpr::allow(12, [broken]);
        let mut a = [0; 12];
        a[11] = 5;
        assert!(e.eval(&scenario(a), &space).unwrap());
        a[11] = 4;
        assert!(!e.eval(&scenario(a), &space).unwrap());
    }

    #[test]
    fn dangling_feature_is_an_error() {
        let space = builtin_crosswalk_space();
        let e = ConstraintExpr::allow(13, [0]);
        assert!(matches!(
            e.eval(&scenario([0; 12]), &space),
            Err(Error::UnknownFeature(13))
        ));
        let e = ConstraintExpr::allow(2, [2]);
        assert!(matches!(e.validate(&space), Err(Error::IndexOutOfRange { .. })));
        assert!(ConstraintExpr::and(vec![]).validate(&space).is_err());
    }

    #[test]
    fn not_becomes_complement() {
        let space = builtin_crosswalk_space();
        let e = ConstraintExpr::not(ConstraintExpr::allow(2, [0]));
        assert_eq!(e.normalize(&space).unwrap(), ConstraintExpr::allow(2, [1]));
    }

    #[test]
    fn duplicate_allows_intersect() {
        let space = builtin_crosswalk_space();
        let e = ConstraintExpr::and(vec![
            ConstraintExpr::allow(12, [0, 1]),
            ConstraintExpr::allow(12, [1, 2]),
        ]);
        assert_eq!(e.normalize(&space).unwrap(), ConstraintExpr::allow(12, [1]));
    }

    #[test]
    fn unsatisfiable_is_flagged() {
        let space = builtin_crosswalk_space();
        let e = ConstraintExpr::and(vec![
            ConstraintExpr::allow(4, [0]),
            ConstraintExpr::allow(4, [2]),
            ConstraintExpr::allow(1, [1]),
        ]);
        let n = e.normalize(&space).unwrap();
        assert!(n.is_trivially_false());
        assert!(ConstraintExpr::not(ConstraintExpr::True)
            .normalize(&space)
            .unwrap()
            .is_trivially_false());
    }

    #[test]
    fn or_of_allows_becomes_at_least_one() {
        let space = builtin_crosswalk_space();
        let e = ConstraintExpr::or(vec![
            ConstraintExpr::allow(6, [1]),
            ConstraintExpr::or(vec![ConstraintExpr::allow(7, [1]), ConstraintExpr::allow(6, [1])]),
        ]);
        assert_eq!(
            e.normalize(&space).unwrap(),
            ConstraintExpr::at_least_one([(6, [1]), (7, [1])])
        );
    }

    #[test]
    fn full_domain_allow_vanishes() {
        let space = builtin_crosswalk_space();
        let e = ConstraintExpr::and(vec![
            ConstraintExpr::allow(2, [0, 1]),
            ConstraintExpr::allow(1, [1, 2]),
        ]);
        assert_eq!(e.normalize(&space).unwrap(), ConstraintExpr::allow(1, [1, 2]));
        assert_eq!(
            ConstraintExpr::allow(2, [0, 1]).normalize(&space).unwrap(),
            ConstraintExpr::True
        );
    }

    #[test]
    fn constrained_features_of_presets() {
        let space = builtin_crosswalk_space();
        let presets = profile_presets();
        assert!(presets["profile-1"].constrained_features(&space).unwrap().is_empty());
        assert_eq!(
            presets["profile-3"].constrained_features(&space).unwrap(),
            vec![1, 4, 5, 12]
        );
        assert_eq!(presets["profile-4"].constrained_features(&space).unwrap(), vec![1, 5]);
    }

    #[test]
    fn shape_rejects_general_or() {
        let space = builtin_crosswalk_space();
        let e = ConstraintExpr::or(vec![
            ConstraintExpr::and(vec![ConstraintExpr::allow(1, [0]), ConstraintExpr::allow(2, [0])]),
            ConstraintExpr::allow(3, [1]),
        ]);
        assert!(matches!(
            e.conjunctive_shape(&space),
            Err(Error::UnsupportedShape(_))
        ));
        let shape = profile_presets()["profile-1"].conjunctive_shape(&space).unwrap();
        assert_eq!(shape.at_least_one.as_ref().unwrap().len(), 3);
    }

    #[test]
    fn json_document_shape() {
        let doc = r#"{"op":"and","args":[{"op":"allow","feature":12,"values":[3,4]},
            {"op":"atLeastOne","atoms":[[6,[1]],[7,[1]],[8,[1]]]}]}"#;
        let e: ConstraintExpr = serde_json::from_str(doc).unwrap();
        assert_eq!(
            e,
            ConstraintExpr::and(vec![
                ConstraintExpr::allow(12, [3, 4]),
                ConstraintExpr::at_least_one([(6, [1]), (7, [1]), (8, [1])]),
            ])
        );
        let back: ConstraintExpr = serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
        assert_eq!(back, e);
        let t: ConstraintExpr = serde_json::from_str(r#"{"op":"true"}"#).unwrap();
        assert_eq!(t, ConstraintExpr::True);
        let n: ConstraintExpr =
            serde_json::from_str(r#"{"op":"not","arg":{"op":"allow","feature":2,"values":[0]}}"#).unwrap();
        assert_eq!(n, ConstraintExpr::not(ConstraintExpr::allow(2, [0])));
    }
}
