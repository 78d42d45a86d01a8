//! Concept taxonomy with depth, least-common-superconcept and Wu-Palmer
//! similarity queries.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::io::BufRead;
use std::sync::RwLock;

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("taxonomy is empty")]
    Empty,
    #[error("cycle detected through concept '{0}'")]
    Cycle(String),
    #[error("multiple roots: {}", .0.join(", "))]
    MultipleRoots(Vec<String>),
    #[error("dangling reference to undeclared concept '{0}'")]
    Dangling(String),
    #[error("unknown concept '{0}'")]
    UnknownConcept(String),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConceptId(u32);

impl ConceptId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Checks the id alphabet `[A-Za-z0-9_.\-]+`.
pub fn is_valid_concept_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'))
}

/// Folds the spellings a formula may use for a taxonomy id onto one key:
/// `cup.n.01`, `Cup_n_01` and `"cup.n.01"` all map to `cup_n_01`.
pub fn normalize_concept_name(name: &str) -> String {
    name.chars()
        .map(|c| match c {
            '.' | '-' => '_',
            c => c.to_ascii_lowercase(),
        })
        .collect()
}

/// Incrementally collects concepts and `(child, parent)` edges, then
/// validates them into a [`Taxonomy`].
#[derive(Debug, Default)]
pub struct TaxonomyBuilder {
    ids: Vec<String>,
    index: HashMap<String, u32>,
    edges: Vec<(String, String)>,
}

impl TaxonomyBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_concept(&mut self, id: &str) -> &mut Self {
        if !self.index.contains_key(id) {
            self.index.insert(id.to_string(), self.ids.len() as u32);
            self.ids.push(id.to_string());
        }
        self
    }

    /// Records `child ⊑ parent`. Both ends must be declared with
    /// [`add_concept`](Self::add_concept) before [`build`](Self::build).
    pub fn add_edge(&mut self, child: &str, parent: &str) -> &mut Self {
        self.edges.push((child.to_string(), parent.to_string()));
        self
    }

    pub fn build(self) -> Result<Taxonomy, TaxonomyError> {
        if self.ids.is_empty() {
            return Err(TaxonomyError::Empty);
        }
        let n = self.ids.len();
        let mut parents: Vec<Vec<ConceptId>> = vec![Vec::new(); n];
        let mut children: Vec<Vec<ConceptId>> = vec![Vec::new(); n];
        for (child, parent) in &self.edges {
            let c = *self
                .index
                .get(child)
                .ok_or_else(|| TaxonomyError::Dangling(child.clone()))?;
            let p = *self
                .index
                .get(parent)
                .ok_or_else(|| TaxonomyError::Dangling(parent.clone()))?;
            if c == p {
                return Err(TaxonomyError::Cycle(child.clone()));
            }
            if !parents[c as usize].contains(&ConceptId(p)) {
                parents[c as usize].push(ConceptId(p));
                children[p as usize].push(ConceptId(c));
            }
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }

        // Kahn's algorithm; anything left over sits on a cycle.
        let mut pending: Vec<usize> = parents.iter().map(Vec::len).collect();
        let roots: Vec<usize> = (0..n).filter(|&i| pending[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        let mut queue: VecDeque<usize> = roots.iter().copied().collect();
        while let Some(c) = queue.pop_front() {
            order.push(c);
            for child in &children[c] {
                let k = child.index();
                pending[k] -= 1;
                if pending[k] == 0 {
                    queue.push_back(k);
                }
            }
        }
        if order.len() != n {
            let stuck = (0..n)
                .filter(|&i| pending[i] > 0)
                .map(|i| self.ids[i].as_str())
                .min()
                .unwrap_or_default();
            return Err(TaxonomyError::Cycle(stuck.to_string()));
        }
        let root = match roots.as_slice() {
            [r] => *r,
            many => {
                let mut names: Vec<String> = many.iter().map(|&i| self.ids[i].clone()).collect();
                names.sort();
                return Err(TaxonomyError::MultipleRoots(names));
            }
        };

        let mut depth = vec![0u32; n];
        let mut ancestors: Vec<Vec<ConceptId>> = vec![Vec::new(); n];
        for &c in &order {
            depth[c] = 1 + parents[c]
                .iter()
                .map(|p| depth[p.index()])
                .max()
                .unwrap_or(0);
            let mut anc = vec![ConceptId(c as u32)];
            for p in &parents[c] {
                anc.extend_from_slice(&ancestors[p.index()]);
            }
            anc.sort_unstable();
            anc.dedup();
            ancestors[c] = anc;
        }

        let mut aliases: HashMap<String, Option<ConceptId>> = HashMap::new();
        for (i, id) in self.ids.iter().enumerate() {
            aliases
                .entry(normalize_concept_name(id))
                .and_modify(|e| *e = None)
                .or_insert(Some(ConceptId(i as u32)));
        }

        Ok(Taxonomy {
            ids: self.ids,
            index: self.index,
            parents,
            children,
            depth,
            ancestors,
            root: ConceptId(root as u32),
            aliases,
            memo: RwLock::new(HashMap::new()),
        })
    }
}

/// A rooted DAG of concepts. Immutable after construction; similarity
/// queries are memoized behind an internal lock.
pub struct Taxonomy {
    ids: Vec<String>,
    index: HashMap<String, u32>,
    parents: Vec<Vec<ConceptId>>,
    children: Vec<Vec<ConceptId>>,
    depth: Vec<u32>,
    ancestors: Vec<Vec<ConceptId>>,
    root: ConceptId,
    aliases: HashMap<String, Option<ConceptId>>,
    memo: RwLock<HashMap<(ConceptId, ConceptId), (u32, u32)>>,
}

impl fmt::Debug for Taxonomy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Taxonomy")
            .field("concepts", &self.ids.len())
            .field("root", &self.ids[self.root.index()])
            .finish()
    }
}

impl Taxonomy {
    /// Reads `child parent` lines. `#` starts a comment; a line holding a
    /// single id declares a concept without an edge.
    pub fn load<R: BufRead>(reader: R) -> Result<Self, TaxonomyError> {
        let mut builder = TaxonomyBuilder::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| TaxonomyError::Io(e.to_string()))?;
            let content = line.split('#').next().unwrap_or_default();
            let fields: Vec<&str> = content.split_whitespace().collect();
            if let Some(bad) = fields.iter().find(|f| !is_valid_concept_id(f)) {
                return Err(TaxonomyError::Syntax {
                    line: lineno + 1,
                    message: format!("invalid concept id '{bad}'"),
                });
            }
            match fields.as_slice() {
                [] => {}
                [id] => {
                    builder.add_concept(id);
                }
                [child, parent] => {
                    builder
                        .add_concept(child)
                        .add_concept(parent)
                        .add_edge(child, parent);
                }
                _ => {
                    return Err(TaxonomyError::Syntax {
                        line: lineno + 1,
                        message: format!(
                            "expected '<child> <parent>', found {} fields",
                            fields.len()
                        ),
                    })
                }
            }
        }
        builder.build()
    }

    pub fn parse_str(text: &str) -> Result<Self, TaxonomyError> {
        Self::load(text.as_bytes())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn root(&self) -> ConceptId {
        self.root
    }

    pub fn concepts(&self) -> impl Iterator<Item = ConceptId> + '_ {
        (0..self.ids.len() as u32).map(ConceptId)
    }

    pub fn name(&self, c: ConceptId) -> &str {
        &self.ids[c.index()]
    }

    pub fn parents(&self, c: ConceptId) -> &[ConceptId] {
        &self.parents[c.index()]
    }

    pub fn children(&self, c: ConceptId) -> &[ConceptId] {
        &self.children[c.index()]
    }

    pub fn id(&self, name: &str) -> Result<ConceptId, TaxonomyError> {
        self.index
            .get(name)
            .map(|&i| ConceptId(i))
            .ok_or_else(|| TaxonomyError::UnknownConcept(name.to_string()))
    }

    /// Looks a formula constant up by exact id, falling back to the
    /// normalized spelling (`Cup_n_01` for `cup.n.01`). Ambiguous
    /// normalized spellings do not resolve.
    pub fn resolve(&self, name: &str) -> Option<ConceptId> {
        if let Some(&i) = self.index.get(name) {
            return Some(ConceptId(i));
        }
        self.aliases
            .get(&normalize_concept_name(name))
            .copied()
            .flatten()
    }

    /// Node count of the longest root-to-`c` path; the root has depth 1.
    pub fn depth(&self, c: ConceptId) -> u32 {
        self.depth[c.index()]
    }

    /// Ancestors of `c`, including `c` itself, sorted by id.
    pub fn ancestors(&self, c: ConceptId) -> &[ConceptId] {
        &self.ancestors[c.index()]
    }

    /// Every concept below `c` in the taxonomy, including `c`.
    pub fn descendants(&self, c: ConceptId) -> Vec<ConceptId> {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![c];
        let mut out = Vec::new();
        while let Some(n) = stack.pop() {
            if std::mem::replace(&mut seen[n.index()], true) {
                continue;
            }
            out.push(n);
            stack.extend_from_slice(&self.children[n.index()]);
        }
        out.sort_unstable();
        out
    }

    pub fn is_leaf(&self, c: ConceptId) -> bool {
        self.children[c.index()].is_empty()
    }

    /// Deepest common ancestor; ties go to the lexicographically smallest id.
    pub fn lcs(&self, a: ConceptId, b: ConceptId) -> ConceptId {
        let (xs, ys) = (self.ancestors(a), self.ancestors(b));
        let (mut i, mut j) = (0, 0);
        let mut best: Option<ConceptId> = None;
        while i < xs.len() && j < ys.len() {
            match xs[i].cmp(&ys[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    let c = xs[i];
                    best = Some(match best {
                        None => c,
                        Some(cur) => {
                            let (dc, dcur) = (self.depth(c), self.depth(cur));
                            if dc > dcur || (dc == dcur && self.name(c) < self.name(cur)) {
                                c
                            } else {
                                cur
                            }
                        }
                    });
                    i += 1;
                    j += 1;
                }
            }
        }
        // The root is an ancestor of everything.
        best.unwrap_or(self.root)
    }

    /// Wu-Palmer similarity as the exact fraction `(2·depth(lcs), depth(a)+depth(b))`.
    pub fn wup_ratio(&self, a: ConceptId, b: ConceptId) -> (u32, u32) {
        let key = if a <= b { (a, b) } else { (b, a) };
        if let Some(&r) = self.memo.read().expect("memo lock poisoned").get(&key) {
            return r;
        }
        let l = self.lcs(key.0, key.1);
        let r = (2 * self.depth(l), self.depth(a) + self.depth(b));
        self.memo
            .write()
            .expect("memo lock poisoned")
            .insert(key, r);
        r
    }

    pub fn wup<T: Real>(&self, a: ConceptId, b: ConceptId) -> T {
        let (num, den) = self.wup_ratio(a, b);
        T::from_u32(num).unwrap() / T::from_u32(den).unwrap()
    }

    /// [`wup`](Self::wup) by concept name.
    pub fn similarity<T: Real>(&self, a: &str, b: &str) -> Result<T, TaxonomyError> {
        Ok(self.wup(self.id(a)?, self.id(b)?))
    }

    /// Writes the taxonomy back out in the loader's line format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if self.len() == 1 {
            out.push_str(self.name(self.root));
            out.push('\n');
        }
        for c in self.concepts() {
            for p in self.parents(c) {
                out.push_str(&format!("{} {}\n", self.name(c), self.name(*p)));
            }
        }
        out
    }
}
