use serde::Serialize;

use crate::grounding::GroundMrf;
use crate::scalar::Real;
use crate::taxonomy::Taxonomy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Gibbs,
}

#[derive(Debug, Clone, Serialize)]
pub struct Marginal<T> {
    pub atom: String,
    pub p: T,
}

/// Marginals of the queried atoms plus run metadata.
#[derive(Debug, Clone, Serialize)]
pub struct MarginalResult<T> {
    pub query: String,
    pub method: Method,
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    pub marginals: Vec<Marginal<T>>,
}

impl<T: Real + Serialize> MarginalResult<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("marginals serialize")
    }
}

impl<T: Real> MarginalResult<T> {
    pub fn new(
        query: String,
        method: Method,
        g: &GroundMrf<T>,
        targets: &[usize],
        marginals: &[T],
    ) -> Self {
        MarginalResult {
            query,
            method,
            seed: None,
            samples: None,
            marginals: targets
                .iter()
                .map(|&v| Marginal {
                    atom: g.free_atom(v).to_string(),
                    p: marginals[v],
                })
                .collect(),
        }
    }

    pub fn get(&self, atom: &str) -> Option<T> {
        self.marginals.iter().find(|m| m.atom == atom).map(|m| m.p)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("atom\tp\n");
        for m in &self.marginals {
            out.push_str(&format!("{}\t{}\n", m.atom, m.p));
        }
        out
    }
}

/// DOT rendering of the taxonomy with nodes shaded by probability; darker
/// means more probable. Nodes absent from `scores` are left white.
pub fn heatmap_dot<T: Real>(taxonomy: &Taxonomy, scores: &[(String, T)]) -> String {
    let mut out = String::from("digraph taxonomy {\n  rankdir=BT;\n  node [shape=box, style=filled, fontname=\"Helvetica\"];\n");
    for c in taxonomy.concepts() {
        let name = taxonomy.name(c);
        let p = scores
            .iter()
            .find(|(s, _)| taxonomy.resolve(s) == Some(c))
            .map(|s| s.1.to_f64_lossy().clamp(0.0, 1.0));
        let (gray, label) = match p {
            Some(p) => (
                (100.0 * (1.0 - p)).round() as u32,
                format!("{name}\\n{p:.3}"),
            ),
            None => (100, name.to_string()),
        };
        let font = if gray < 50 { "white" } else { "black" };
        out.push_str(&format!(
            "  \"{name}\" [label=\"{label}\", fillcolor=\"gray{gray}\", fontcolor=\"{font}\"];\n"
        ));
    }
    for c in taxonomy.concepts() {
        for &p in taxonomy.parents(c) {
            out.push_str(&format!(
                "  \"{}\" -> \"{}\";\n",
                taxonomy.name(c),
                taxonomy.name(p)
            ));
        }
    }
    out.push_str("}\n");
    out
}
