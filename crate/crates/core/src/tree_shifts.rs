//! Directed trees, weighted shifts `(S f)(v) = λ_v f(par v)` on them, and
//! their translation into weighted composition systems.
//!
//! Finite trees come from truncating infinite ones. Vertices listed as
//! `truncated` have lost part of their neighbourhood (a parent or children),
//! so criteria restricted to the interior skip them.

use std::collections::{BTreeSet, HashMap};

use num_complex::Complex64;
use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{input_err, Result, WcoError};
use crate::matrix_oracle::{identity_like, spectral_norm, svd_polar, to_matrix};
use crate::measure_space::{approx_eq, DiscreteMeasureSpace, ScalarField};
use crate::properties::{Property, PropertyReport, Witness};
use crate::wco_model::WcoSystem;

#[derive(Debug, Clone, PartialEq)]
pub struct DirectedTree {
    vertices: Vec<String>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    root: Option<usize>,
    top: usize,
    truncated: BTreeSet<usize>,
    index: HashMap<String, usize>,
}

impl DirectedTree {
    /// `parent` lists `(child, parent)` edges. Exactly one vertex may lack a
    /// parent; it is the root when `root` names it, and otherwise a
    /// truncation point of a rootless tree (and is marked truncated).
    pub fn new(vertices: Vec<String>, edges: &[(String, String)], root: Option<&str>, truncated: &[String]) -> Result<Self> {
        if vertices.is_empty() {
            return input_err("a tree needs at least one vertex");
        }
        let mut index = HashMap::with_capacity(vertices.len());
        for (i, v) in vertices.iter().enumerate() {
            if index.insert(v.clone(), i).is_some() {
                return input_err(format!("duplicate vertex `{v}`"));
            }
        }
        let lookup = |v: &str| index.get(v).copied().ok_or_else(|| WcoError::UnknownAtom(v.to_string()));
        let n = vertices.len();
        let mut parent = vec![None; n];
        for (child, par) in edges {
            let c = lookup(child)?;
            if parent[c].replace(lookup(par)?).is_some() {
                return input_err(format!("vertex `{child}` has two parents"));
            }
        }
        let tops: Vec<usize> = (0..n).filter(|&v| parent[v].is_none()).collect();
        let top = match tops.as_slice() {
            [t] => *t,
            [] => return input_err("every vertex has a parent, so the graph has a cycle"),
            _ => return input_err(format!("{} vertices lack a parent; a tree has at most one", tops.len())),
        };
        let root = match root {
            Some(r) => {
                let r = lookup(r)?;
                if r != top {
                    return input_err(format!("root `{}` has a parent", vertices[r]));
                }
                Some(r)
            }
            None => None,
        };
        for (start, id) in vertices.iter().enumerate() {
            let mut v = start;
            for _ in 0..n {
                match parent[v] {
                    Some(p) => v = p,
                    None => break,
                }
            }
            if v != top {
                return input_err(format!("vertex `{id}` lies on a cycle"));
            }
        }
        let mut children = vec![Vec::new(); n];
        for (v, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(v);
            }
        }
        let mut cut = truncated.iter().map(|v| lookup(v)).collect::<Result<BTreeSet<_>>>()?;
        if root.is_none() {
            cut.insert(top);
        }
        Ok(Self { vertices, parent, children, root, top, truncated: cut, index })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn id(&self, v: usize) -> &str {
        &self.vertices[v]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index.get(id).copied().ok_or_else(|| WcoError::UnknownAtom(id.to_string()))
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn root(&self) -> Option<usize> {
        self.root
    }

    /// The parentless vertex (the root, or the truncation point).
    pub fn top(&self) -> usize {
        self.top
    }

    pub fn is_truncated(&self, v: usize) -> bool {
        self.truncated.contains(&v)
    }

    /// `v` and all its children keep their full neighbourhoods.
    fn interior_family(&self, v: usize) -> bool {
        !self.is_truncated(v) && self.children[v].iter().all(|&u| !self.is_truncated(u))
    }
}

/// A weighted shift `S_λ` on a finite (truncated) directed tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeShift {
    tree: DirectedTree,
    lambda: Vec<Complex64>,
}

impl TreeShift {
    /// `lambda` is indexed by vertex; the entry at the parentless vertex is ignored.
    pub fn new(tree: DirectedTree, mut lambda: Vec<Complex64>) -> Result<Self> {
        if lambda.len() != tree.len() {
            return input_err(format!("{} weights for {} vertices", lambda.len(), tree.len()));
        }
        if lambda.iter().any(|l| !(l.re.is_finite() && l.im.is_finite())) {
            return input_err("tree weights must be finite");
        }
        lambda[tree.top] = Complex64::new(0.0, 0.0);
        Ok(Self { tree, lambda })
    }

    pub fn from_ids(tree: DirectedTree, lambda: &[(&str, Complex64)]) -> Result<Self> {
        let mut values = vec![Complex64::new(0.0, 0.0); tree.len()];
        let mut seen = vec![false; tree.len()];
        for (v, l) in lambda {
            let i = tree.index_of(v)?;
            if i == tree.top {
                return input_err(format!("vertex `{v}` has no parent and carries no weight"));
            }
            values[i] = *l;
            seen[i] = true;
        }
        if let Some(v) = (0..tree.len()).find(|&v| v != tree.top && !seen[v]) {
            return input_err(format!("vertex `{}` has no weight", tree.id(v)));
        }
        Self::new(tree, values)
    }

    pub fn tree(&self) -> &DirectedTree {
        &self.tree
    }

    pub fn lambda(&self) -> &[Complex64] {
        &self.lambda
    }

    pub fn set_lambda(&mut self, v: usize, value: Complex64) {
        if v != self.tree.top {
            self.lambda[v] = value;
        }
    }

    /// `Σ_{u ∈ Chi(v)} |λ_u|²` for every vertex `v`.
    pub fn child_sums(&self) -> Vec<f64> {
        (0..self.tree.len())
            .map(|v| self.tree.children(v).iter().map(|&u| self.lambda[u].norm_sqr()).fold(0.0, |a, b| a + b))
            .collect()
    }

    /// `max_v Σ_{u ∈ Chi(v)} |λ_u|²`, the square of the norm of `S_λ`.
    pub fn norm_bound(&self) -> f64 {
        self.child_sums().into_iter().fold(0.0, f64::max)
    }
}

/// Counting measure on the vertices, `φ = par` with the parentless vertex
/// fixed, `w = λ` and weight zero at the parentless vertex.
pub fn tree_to_wco(shift: &TreeShift) -> WcoSystem {
    let tree = &shift.tree;
    let space = DiscreteMeasureSpace::new(
        tree.vertices.iter().map(|id| crate::Atom { id: id.clone(), mass: 1.0 }).collect(),
    )
    .expect("vertex ids are unique");
    let phi = (0..tree.len()).map(|v| tree.parent(v).unwrap_or(v)).collect();
    WcoSystem::new(space, phi, ScalarField(shift.lambda.clone())).expect("tree weights are finite")
}

fn sibling_mismatch(
    tree: &DirectedTree,
    interior_only: bool,
    values: &[f64],
    include: impl Fn(usize) -> bool,
    tol: f64,
) -> Option<Witness> {
    for v in 0..tree.len() {
        if interior_only && !tree.interior_family(v) {
            continue;
        }
        let kids: Vec<usize> = tree.children(v).iter().copied().filter(|&u| include(u)).collect();
        for (i, &a) in kids.iter().enumerate() {
            for &b in &kids[i + 1..] {
                if !approx_eq(values[a], values[b], tol) {
                    return Some(Witness::TreeTriple {
                        vertex: tree.id(v).into(),
                        first_child: tree.id(a).into(),
                        second_child: tree.id(b).into(),
                        first_sum: values[a],
                        second_sum: values[b],
                    });
                }
            }
        }
    }
    None
}

/// Siblings with nonzero weights have equal child sums `Σ_{y∈Chi(u)} |λ_y|²`.
pub fn tree_weakly_centered(shift: &TreeShift, interior_only: bool, tol: f64) -> PropertyReport {
    let sums = shift.child_sums();
    let witness = sibling_mismatch(&shift.tree, interior_only, &sums, |u| shift.lambda[u].norm_sqr() > 0.0, tol);
    PropertyReport::from_check(Property::WeaklyCentered, tol, witness)
}

/// Siblings have equal numbers of children.
pub fn unweighted_tree_criterion(tree: &DirectedTree, interior_only: bool) -> PropertyReport {
    let counts: Vec<f64> = (0..tree.len()).map(|v| tree.children(v).len() as f64).collect();
    let witness = sibling_mismatch(tree, interior_only, &counts, |_| true, 0.0);
    PropertyReport::from_check(Property::UnweightedTreeCriterion, 0.0, witness)
}

/// Whether the phase `U` of `S_λ` satisfies `U*U = UU* = I`, on the matrix.
pub fn phase_is_unitary(shift: &TreeShift, tol: f64) -> PropertyReport {
    let m = to_matrix(&tree_to_wco(shift));
    let u = svd_polar(&m).phase;
    let id = identity_like(m.dim());
    let defect = spectral_norm(&(u.adjoint() * &u - &id)).max(spectral_norm(&(&u * u.adjoint() - &id)));
    let witness = (defect > tol).then(|| Witness::Norm { metric: "max(‖U*U − I‖, ‖UU* − I‖)".into(), value: defect, threshold: tol });
    PropertyReport::from_check(Property::PhaseUnitary, tol, witness)
        .with_note("matrix check only; no structural classification of the tree is attempted")
}

fn path_ids(depth: usize) -> Vec<String> {
    (0..=depth).rev().map(|k| if k == 0 { "0".to_string() } else { format!("-{k}") }).collect()
}

fn path_edges(depth: usize) -> Vec<(String, String)> {
    let ids = path_ids(depth);
    ids.windows(2).map(|w| (w[1].clone(), w[0].clone())).collect()
}

fn branch(i: usize, depth: usize, from: &str, edges: &mut Vec<(String, String)>) -> Vec<String> {
    let ids: Vec<String> = (1..=depth).map(|j| format!("{i},{j}")).collect();
    edges.push((ids[0].clone(), from.to_string()));
    for w in ids.windows(2) {
        edges.push((w[1].clone(), w[0].clone()));
    }
    ids
}

fn check_depth(depth: usize) -> Result<()> {
    if depth < 3 {
        return input_err(format!("depth must be at least 3, got {depth}"));
    }
    Ok(())
}

/// The two-branch tree with a backward path: `−depth … −1, 0` followed by
/// branches `(1, j)` and `(2, j)`, `j ≤ depth`; `λ_{(2,2)} = alpha`, other weights 1.
pub fn build_t2infty(alpha: Complex64, depth: usize) -> Result<TreeShift> {
    check_depth(depth)?;
    let mut vertices = path_ids(depth);
    let mut edges = path_edges(depth);
    vertices.extend(branch(1, depth, "0", &mut edges));
    vertices.extend(branch(2, depth, "0", &mut edges));
    let truncated = [format!("-{depth}"), format!("1,{depth}"), format!("2,{depth}")];
    let tree = DirectedTree::new(vertices, &edges, None, &truncated)?;
    let n = tree.len();
    let mut shift = TreeShift::new(tree, vec![Complex64::new(1.0, 0.0); n])?;
    let special = shift.tree.index_of("2,2")?;
    shift.set_lambda(special, alpha);
    Ok(shift)
}

/// The tree with backward path `−depth … 0`, vertex `1`, branches `(1, j)` and
/// `(2, j)`, and an extra leaf `(3, 2)` under `(2, 1)` with `λ_{(3,2)} = 0`.
pub fn build_zero_leaf_tree(depth: usize) -> Result<TreeShift> {
    check_depth(depth)?;
    let mut vertices = path_ids(depth);
    let mut edges = path_edges(depth);
    vertices.push("1".into());
    edges.push(("1".into(), "0".into()));
    vertices.extend(branch(1, depth, "1", &mut edges));
    vertices.extend(branch(2, depth, "1", &mut edges));
    vertices.push("3,2".into());
    edges.push(("3,2".into(), "2,1".into()));
    let truncated = [format!("-{depth}"), format!("1,{depth}"), format!("2,{depth}")];
    let tree = DirectedTree::new(vertices, &edges, None, &truncated)?;
    let n = tree.len();
    let mut shift = TreeShift::new(tree, vec![Complex64::new(1.0, 0.0); n])?;
    let leaf = shift.tree.index_of("3,2")?;
    shift.set_lambda(leaf, Complex64::new(0.0, 0.0));
    Ok(shift)
}

#[derive(Deserialize)]
struct TreeIn {
    vertices: Vec<String>,
    #[serde(default)]
    root: Option<String>,
    #[serde(default)]
    parent: HashMap<String, String>,
    #[serde(default)]
    lambda: HashMap<String, Complex64>,
    #[serde(default)]
    truncated: Vec<String>,
}

impl<'de> Deserialize<'de> for TreeShift {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = TreeIn::deserialize(de)?;
        let edges: Vec<(String, String)> = raw.parent.into_iter().collect();
        let tree = DirectedTree::new(raw.vertices, &edges, raw.root.as_deref(), &raw.truncated).map_err(D::Error::custom)?;
        let lambda: Vec<(&str, Complex64)> = raw.lambda.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        TreeShift::from_ids(tree, &lambda).map_err(D::Error::custom)
    }
}

struct Entries<'a, T>(Vec<(&'a str, T)>);

impl<T: Serialize> Serialize for Entries<'_, T> {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = ser.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl Serialize for TreeShift {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let t = &self.tree;
        let parents = Entries((0..t.len()).filter_map(|v| t.parent(v).map(|p| (t.id(v), t.id(p)))).collect());
        let lambda = Entries((0..t.len()).filter(|&v| v != t.top).map(|v| (t.id(v), self.lambda[v])).collect());
        let truncated: Vec<&str> = t.truncated.iter().map(|&v| t.id(v)).collect();
        let mut map = ser.serialize_map(Some(5))?;
        map.serialize_entry("vertices", &t.vertices)?;
        map.serialize_entry("root", &t.root.map(|r| t.id(r)))?;
        map.serialize_entry("parent", &parents)?;
        map.serialize_entry("lambda", &lambda)?;
        map.serialize_entry("truncated", &truncated)?;
        map.end()
    }
}
