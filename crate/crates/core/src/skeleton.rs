//! Skeleton definitions and per-joint explicit relation sets.
//!
//! A joint's relation set gathers itself, its kinematic neighbours, the
//! joint at the same position on the mirrored limb, and the joint at the same
//! position on the opposite-side limb of the other kind (left arm with right
//! leg, right arm with left leg). Positions along a limb are ranks in joint
//! index order among joints sharing the limb tag.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MotionError, Result};

const TOY7: &str = include_str!("../data/toy7.json");
const H36M22: &str = include_str!("../data/h36m22.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimbTag {
    LeftArm,
    RightArm,
    LeftLeg,
    RightLeg,
    Torso,
    Head,
}

impl LimbTag {
    pub fn as_str(self) -> &'static str {
        match self {
            LimbTag::LeftArm => "left_arm",
            LimbTag::RightArm => "right_arm",
            LimbTag::LeftLeg => "left_leg",
            LimbTag::RightLeg => "right_leg",
            LimbTag::Torso => "torso",
            LimbTag::Head => "head",
        }
    }

    pub fn mirror(self) -> Option<LimbTag> {
        match self {
            LimbTag::LeftArm => Some(LimbTag::RightArm),
            LimbTag::RightArm => Some(LimbTag::LeftArm),
            LimbTag::LeftLeg => Some(LimbTag::RightLeg),
            LimbTag::RightLeg => Some(LimbTag::LeftLeg),
            _ => None,
        }
    }

    pub fn contralateral(self) -> Option<LimbTag> {
        match self {
            LimbTag::LeftArm => Some(LimbTag::RightLeg),
            LimbTag::RightLeg => Some(LimbTag::LeftArm),
            LimbTag::RightArm => Some(LimbTag::LeftLeg),
            LimbTag::LeftLeg => Some(LimbTag::RightArm),
            _ => None,
        }
    }

    /// +1 for left limbs, -1 for right limbs, 0 on the midline.
    pub fn side(self) -> f64 {
        match self {
            LimbTag::LeftArm | LimbTag::LeftLeg => 1.0,
            LimbTag::RightArm | LimbTag::RightLeg => -1.0,
            _ => 0.0,
        }
    }

    pub fn is_limb(self) -> bool {
        self.mirror().is_some()
    }
}

impl fmt::Display for LimbTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One problem found by [`Skeleton::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Finding {
    Empty,
    NoRoot,
    MultipleRoots(Vec<usize>),
    Cycle(Vec<usize>),
    ParentOutOfRange { joint: usize, parent: usize },
    UncoveredTags(Vec<usize>),
    DuplicateName(String),
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::Empty => write!(f, "skeleton has no joints"),
            Finding::NoRoot => write!(f, "no root joint"),
            Finding::MultipleRoots(r) => write!(f, "multiple roots: {r:?}"),
            Finding::Cycle(c) => write!(f, "cycle: {c:?}"),
            Finding::ParentOutOfRange { joint, parent } => {
                write!(f, "joint {joint} has out-of-range parent {parent}")
            }
            Finding::UncoveredTags(j) => write!(f, "joints without limb tag: {j:?}"),
            Finding::DuplicateName(n) => write!(f, "duplicate joint name {n:?}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.findings.iter().map(|x| x.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Kinematic tree with limb tags. Roots point at themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    name: String,
    names: Vec<String>,
    parent: Vec<usize>,
    tags: Vec<Option<LimbTag>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct JointEntry {
    name: String,
    parent: Option<String>,
    limb_tag: Option<LimbTag>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SkeletonFile {
    #[serde(default)]
    name: String,
    joints: Vec<JointEntry>,
}

impl Skeleton {
    /// Builds a skeleton without checking invariants; see [`Skeleton::new`].
    pub fn unchecked(
        name: impl Into<String>,
        names: Vec<String>,
        parent: Vec<usize>,
        tags: Vec<Option<LimbTag>>,
    ) -> Self {
        Skeleton {
            name: name.into(),
            names,
            parent,
            tags,
        }
    }

    pub fn new(
        name: impl Into<String>,
        names: Vec<String>,
        parent: Vec<usize>,
        tags: Vec<LimbTag>,
    ) -> Result<Self> {
        let skel = Skeleton::unchecked(name, names, parent, tags.into_iter().map(Some).collect());
        let report = skel.validate();
        if report.is_empty() {
            Ok(skel)
        } else {
            Err(MotionError::Validation(report.to_string()))
        }
    }

    /// The 7-joint test skeleton: a torso root with one-joint arms and
    /// two-joint legs.
    pub fn toy() -> Self {
        Skeleton::from_json(TOY7).expect("bundled toy skeleton is valid")
    }

    /// The 22-joint evaluation skeleton.
    pub fn default_eval() -> Self {
        Skeleton::from_json(H36M22).expect("bundled evaluation skeleton is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SkeletonFile = serde_json::from_str(text)?;
        let index: HashMap<&str, usize> = file
            .joints
            .iter()
            .enumerate()
            .map(|(i, j)| (j.name.as_str(), i))
            .collect();
        let mut parent = Vec::with_capacity(file.joints.len());
        for (i, j) in file.joints.iter().enumerate() {
            parent.push(match &j.parent {
                None => i,
                Some(p) => *index.get(p.as_str()).ok_or_else(|| {
                    MotionError::Validation(format!("joint {:?} names unknown parent {p:?}", j.name))
                })?,
            });
        }
        let skel = Skeleton::unchecked(
            file.name,
            file.joints.iter().map(|j| j.name.clone()).collect(),
            parent,
            file.joints.iter().map(|j| j.limb_tag).collect(),
        );
        let report = skel.validate();
        if !report.is_empty() {
            return Err(MotionError::Validation(report.to_string()));
        }
        Ok(skel)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| MotionError::io(path, e))?;
        Skeleton::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let file = SkeletonFile {
            name: self.name.clone(),
            joints: (0..self.len())
                .map(|j| JointEntry {
                    name: self.names[j].clone(),
                    parent: (self.parent[j] != j).then(|| self.names[self.parent[j]].clone()),
                    limb_tag: self.tags[j],
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("skeleton serializes")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn parent(&self, j: usize) -> Option<usize> {
        (self.parent[j] != j).then_some(self.parent[j])
    }

    pub fn tag(&self, j: usize) -> LimbTag {
        self.tags[j].expect("validated skeleton has tags")
    }

    pub fn root(&self) -> usize {
        (0..self.len()).find(|&j| self.parent[j] == j).expect("validated skeleton has a root")
    }

    pub fn children(&self, j: usize) -> Vec<usize> {
        (0..self.len()).filter(|&c| c != j && self.parent[c] == j).collect()
    }

    /// Joints carrying `tag`, in index order.
    pub fn limb_chain(&self, tag: LimbTag) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.tags[j] == Some(tag)).collect()
    }

    /// Rank of `j` within its limb chain.
    pub fn limb_rank(&self, j: usize) -> usize {
        let tag = self.tags[j];
        (0..j).filter(|&i| self.tags[i] == tag).count()
    }

    pub fn validate(&self) -> ValidationReport {
        let n = self.names.len();
        let mut findings = Vec::new();
        if n == 0 {
            findings.push(Finding::Empty);
            return ValidationReport { findings };
        }
        let mut seen = BTreeSet::new();
        for name in &self.names {
            if !seen.insert(name.as_str()) {
                findings.push(Finding::DuplicateName(name.clone()));
            }
        }
        let mut parent_ok = true;
        for (j, &p) in self.parent.iter().enumerate() {
            if p >= n {
                findings.push(Finding::ParentOutOfRange { joint: j, parent: p });
                parent_ok = false;
            }
        }
        if self.parent.len() != n {
            findings.push(Finding::ParentOutOfRange {
                joint: self.parent.len().min(n),
                parent: usize::MAX,
            });
            parent_ok = false;
        }
        if parent_ok {
            let roots: Vec<usize> = (0..n).filter(|&j| self.parent[j] == j).collect();
            match roots.len() {
                0 => findings.push(Finding::NoRoot),
                1 => {}
                _ => findings.push(Finding::MultipleRoots(roots)),
            }
            for cycle in self.cycles() {
                findings.push(Finding::Cycle(cycle));
            }
        }
        let untagged: Vec<usize> = (0..n).filter(|&j| self.tags.get(j).copied().flatten().is_none()).collect();
        if !untagged.is_empty() {
            findings.push(Finding::UncoveredTags(untagged));
        }
        ValidationReport { findings }
    }

    /// Cycles in the parent graph (self-loops are roots, not cycles), each as
    /// a sorted member list.
    fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.parent.len();
        // 0 = unvisited, 1 = on current walk, 2 = done
        let mut state = vec![0u8; n];
        let mut found = Vec::new();
        for start in 0..n {
            let mut walk = Vec::new();
            let mut j = start;
            while state[j] == 0 {
                state[j] = 1;
                walk.push(j);
                let p = self.parent[j];
                if p == j {
                    break;
                }
                j = p;
            }
            if state[j] == 1 && self.parent[j] != j {
                let pos = walk.iter().position(|&x| x == j).expect("on walk");
                let mut cyc = walk[pos..].to_vec();
                cyc.sort_unstable();
                found.push(cyc);
            }
            for w in walk {
                state[w] = 2;
            }
        }
        found
    }
}

/// Which relation kinds enter each joint's set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationRules {
    /// Tree distance of kinematic neighbours (1 = parent and children).
    pub kinematic_hops: usize,
    pub mirror: bool,
    pub contralateral: bool,
}

impl Default for RelationRules {
    fn default() -> Self {
        RelationRules {
            kinematic_hops: 1,
            mirror: true,
            contralateral: true,
        }
    }
}

/// Per joint, the ordered indices of its explicitly related joints,
/// starting with the joint itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSet {
    sets: Vec<Vec<usize>>,
}

impl RelationSet {
    /// Every joint related only to itself.
    pub fn singletons(joints: usize) -> Self {
        RelationSet {
            sets: (0..joints).map(|j| vec![j]).collect(),
        }
    }

    pub fn get(&self, j: usize) -> &[usize] {
        &self.sets[j]
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn cardinality(&self, j: usize) -> usize {
        self.sets[j].len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.sets.iter().map(|s| s.as_slice())
    }
}

fn kinematic_neighbours(skel: &Skeleton, j: usize, hops: usize) -> Vec<usize> {
    let n = skel.len();
    let mut dist = vec![usize::MAX; n];
    dist[j] = 0;
    let mut queue = VecDeque::from([j]);
    while let Some(v) = queue.pop_front() {
        if dist[v] == hops {
            continue;
        }
        let mut adj = skel.children(v);
        if let Some(p) = skel.parent(v) {
            adj.push(p);
        }
        for a in adj {
            if dist[a] == usize::MAX {
                dist[a] = dist[v] + 1;
                queue.push_back(a);
            }
        }
    }
    (0..n).filter(|&i| i != j && dist[i] != usize::MAX).collect()
}

pub fn build_relations(skel: &Skeleton, rules: RelationRules) -> Result<RelationSet> {
    let mut chains: HashMap<LimbTag, Vec<usize>> = HashMap::new();
    for tag in [LimbTag::LeftArm, LimbTag::RightArm, LimbTag::LeftLeg, LimbTag::RightLeg] {
        chains.insert(tag, skel.limb_chain(tag));
    }
    if rules.mirror {
        for (l, r) in [(LimbTag::LeftArm, LimbTag::RightArm), (LimbTag::LeftLeg, LimbTag::RightLeg)] {
            if chains[&l].len() != chains[&r].len() {
                return Err(MotionError::Validation(format!(
                    "asymmetric limb chains: {l} has {} joints, {r} has {}",
                    chains[&l].len(),
                    chains[&r].len()
                )));
            }
        }
    }

    let mut sets = Vec::with_capacity(skel.len());
    for j in 0..skel.len() {
        let mut set = vec![j];
        let push = |set: &mut Vec<usize>, x: usize| {
            if !set.contains(&x) {
                set.push(x);
            }
        };
        if rules.kinematic_hops > 0 {
            for k in kinematic_neighbours(skel, j, rules.kinematic_hops) {
                push(&mut set, k);
            }
        }
        let tag = skel.tag(j);
        let rank = skel.limb_rank(j);
        if rules.mirror {
            if let Some(&m) = tag.mirror().and_then(|t| chains[&t].get(rank)) {
                push(&mut set, m);
            }
        }
        if rules.contralateral {
            if let Some(&c) = tag.contralateral().and_then(|t| chains[&t].get(rank)) {
                push(&mut set, c);
            }
        }
        sets.push(set);
    }
    Ok(RelationSet { sets })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(s: &Skeleton, name: &str) -> usize {
        s.names().iter().position(|n| n == name).unwrap()
    }

    #[test]
    fn toy_left_arm_relations() {
        let s = Skeleton::toy();
        let rel = build_relations(&s, RelationRules::default()).unwrap();
        let la = idx(&s, "left_arm_0");
        let expect = vec![la, idx(&s, "root"), idx(&s, "right_arm_0"), idx(&s, "right_leg_0")];
        assert_eq!(rel.get(la), expect.as_slice());
    }

    #[test]
    fn torso_root_with_two_children() {
        let s = Skeleton::new(
            "t3",
            vec!["root".into(), "a".into(), "b".into()],
            vec![0, 0, 0],
            vec![LimbTag::Torso, LimbTag::Torso, LimbTag::Head],
        )
        .unwrap();
        let rel = build_relations(&s, RelationRules::default()).unwrap();
        assert_eq!(rel.get(0), &[0, 1, 2]);
    }

    #[test]
    fn asymmetric_limbs_rejected() {
        let s = Skeleton::new(
            "bad",
            vec!["root".into(), "l0".into(), "l1".into(), "r0".into()],
            vec![0, 0, 1, 0],
            vec![LimbTag::Torso, LimbTag::LeftArm, LimbTag::LeftArm, LimbTag::RightArm],
        )
        .unwrap();
        let err = build_relations(&s, RelationRules::default()).unwrap_err().to_string();
        assert!(err.contains("left_arm") && err.contains("right_arm"), "{err}");
        let no_mirror = RelationRules {
            mirror: false,
            ..RelationRules::default()
        };
        assert!(build_relations(&s, no_mirror).is_ok());
    }

    #[test]
    fn rule_flags_reduce_to_kinematic_neighbourhood() {
        for s in [Skeleton::toy(), Skeleton::default_eval()] {
            let rules = RelationRules {
                kinematic_hops: 1,
                mirror: false,
                contralateral: false,
            };
            let rel = build_relations(&s, rules).unwrap();
            for j in 0..s.len() {
                let mut expect = vec![j];
                let mut nb: Vec<usize> = s.children(j);
                nb.extend(s.parent(j));
                nb.sort_unstable();
                expect.extend(nb);
                assert_eq!(rel.get(j), expect.as_slice());
            }
        }
    }

    #[test]
    fn relations_are_symmetric_for_pairing_rules() {
        let s = Skeleton::default_eval();
        let rel = build_relations(&s, RelationRules::default()).unwrap();
        for j in 0..s.len() {
            let tag = s.tag(j);
            for k in rel.get(j) {
                let kt = s.tag(*k);
                if Some(kt) == tag.mirror() || Some(kt) == tag.contralateral() {
                    assert!(rel.get(*k).contains(&j), "{j} -> {k} not reciprocated");
                }
            }
        }
    }

    #[test]
    fn two_hop_knob_widens_sets() {
        let s = Skeleton::toy();
        let rules = RelationRules {
            kinematic_hops: 2,
            mirror: false,
            contralateral: false,
        };
        let rel = build_relations(&s, rules).unwrap();
        let ll1 = idx(&s, "left_leg_1");
        assert_eq!(rel.get(ll1), &[ll1, 0, idx(&s, "left_leg_0")]);
    }

    #[test]
    fn validate_reports() {
        assert!(Skeleton::toy().validate().is_empty());

        let two_roots = Skeleton::unchecked(
            "x",
            vec!["a".into(), "b".into(), "c".into()],
            vec![0, 1, 0],
            vec![Some(LimbTag::Torso); 3],
        );
        assert_eq!(
            two_roots.validate().findings,
            vec![Finding::MultipleRoots(vec![0, 1])]
        );

        let cyc = Skeleton::unchecked(
            "y",
            vec!["r".into(), "a".into(), "b".into(), "c".into()],
            vec![0, 3, 1, 2],
            vec![Some(LimbTag::Torso); 4],
        );
        assert_eq!(cyc.validate().findings, vec![Finding::Cycle(vec![1, 2, 3])]);

        let untagged = Skeleton::unchecked("z", vec!["r".into(), "a".into()], vec![0, 0], vec![Some(LimbTag::Torso), None]);
        assert_eq!(untagged.validate().findings, vec![Finding::UncoveredTags(vec![1])]);
    }

    #[test]
    fn json_round_trip_and_rejection() {
        let s = Skeleton::default_eval();
        assert_eq!(s.len(), 22);
        assert_eq!(Skeleton::from_json(&s.to_json()).unwrap(), s);

        let bad = r#"{"name":"b","joints":[{"name":"a","parent":null,"limb_tag":"torso"},{"name":"b","parent":null,"limb_tag":"torso"}]}"#;
        assert!(matches!(Skeleton::from_json(bad), Err(MotionError::Validation(_))));
        let untagged = r#"{"joints":[{"name":"a","parent":null}]}"#;
        assert!(matches!(Skeleton::from_json(untagged), Err(MotionError::Validation(_))));
    }
}
