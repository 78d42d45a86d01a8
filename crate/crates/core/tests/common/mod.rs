//! Random small models and a brute-force reference implementation that
//! grounds and enumerates them without going through the library.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use fuzzy_mln::logic::{parse_formula, Atom, Formula, Term};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const ENTITIES: [&str; 2] = ["A", "B"];
pub const SENSES: [&str; 2] = ["S1", "S2"];
pub const CONCEPTS: [&str; 2] = ["C1", "C2"];

pub const DECLS: &str = "\
p(ent)
q(ent, ent)
instance_of(ent, sense)
is_a(sense, concept)
#fuzzy is_a
ent = {A, B}
sense = {S1, S2}
concept = {C1, C2}
";

/// A generated model: model text, evidence text and `is_a` values.
#[derive(Debug, Clone)]
pub struct Case {
    pub formulas: Vec<(f64, String)>,
    pub evidence: Vec<(String, bool)>,
    pub sims: BTreeMap<(String, String), f64>,
}

impl Case {
    pub fn mln_text(&self) -> String {
        let mut s = DECLS.to_string();
        for (w, f) in &self.formulas {
            s.push_str(&format!("{w:?} {f}\n"));
        }
        s
    }

    pub fn db_text(&self) -> String {
        self.evidence
            .iter()
            .map(|(a, v)| if *v { format!("{a}\n") } else { format!("!{a}\n") })
            .collect()
    }

    pub fn sim_table(&self) -> fuzzy_mln::grounding::SimilarityTable<'static, f64> {
        let mut t = fuzzy_mln::grounding::SimilarityTable::new();
        for ((s, c), &v) in &self.sims {
            t.insert(s, c, v).unwrap();
        }
        t
    }
}

#[derive(Clone, Copy)]
pub enum Sims {
    Fuzzy,
    Binary,
    Zero,
}

fn var(rng: &mut ChaCha8Rng, pool: &[&str]) -> String {
    pool.choose(rng).unwrap().to_string()
}

fn literal(rng: &mut ChaCha8Rng) -> String {
    match rng.gen_range(0..5) {
        0 => format!("p({})", var(rng, &["x", "y"])),
        1 => format!("q({}, {})", var(rng, &["x", "y"]), var(rng, &["x", "y", "A"])),
        2 => format!("instance_of({}, {})", var(rng, &["x", "y"]), var(rng, &["s", "t"])),
        3 => format!("is_a({}, {})", var(rng, &["s", "t"]), var(rng, &["C1", "C2", "c"])),
        _ => "(q(x, y) ^ x =/= y)".to_string(),
    }
}

fn formula(rng: &mut ChaCha8Rng, depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.3) {
        let l = literal(rng);
        return if rng.gen_bool(0.25) { format!("!({l})") } else { l };
    }
    let a = formula(rng, depth - 1);
    let b = formula(rng, depth - 1);
    let op = ["^", "v", "=>", "<=>", "^"].choose(rng).unwrap();
    format!("({a}) {op} ({b})")
}

/// A conjunction that contains an `is_a` literal, so it vanishes when every
/// similarity is 0.
fn is_a_conjunction(rng: &mut ChaCha8Rng) -> String {
    let mut parts = vec![format!("instance_of(x, s)"), format!("is_a(s, {})", var(rng, &["C1", "C2"]))];
    for _ in 0..rng.gen_range(0..3) {
        let l = match rng.gen_range(0..3) {
            0 => format!("p({})", var(rng, &["x", "y"])),
            1 => format!("q(x, {})", var(rng, &["y", "A", "B"])),
            _ => format!("!p({})", var(rng, &["x", "y"])),
        };
        parts.push(l);
    }
    parts.shuffle(rng);
    parts.join(" ^ ")
}

fn all_binary_atoms() -> Vec<String> {
    let mut out = Vec::new();
    for a in ENTITIES {
        out.push(format!("p({a})"));
    }
    for a in ENTITIES {
        for b in ENTITIES {
            out.push(format!("q({a}, {b})"));
        }
    }
    for a in ENTITIES {
        for s in SENSES {
            out.push(format!("instance_of({a}, {s})"));
        }
    }
    out
}

fn sims(rng: &mut ChaCha8Rng, kind: Sims) -> BTreeMap<(String, String), f64> {
    let mut m = BTreeMap::new();
    for s in SENSES {
        for c in CONCEPTS {
            let v = match kind {
                Sims::Fuzzy => (rng.gen_range(0.0..1.0f64) * 1000.0).round() / 1000.0,
                Sims::Binary => f64::from(rng.gen_bool(0.5) as u8),
                Sims::Zero => 0.0,
            };
            m.insert((s.to_string(), c.to_string()), v);
        }
    }
    m
}

fn evidence(rng: &mut ChaCha8Rng, max_free: usize) -> Vec<(String, bool)> {
    let atoms = all_binary_atoms();
    loop {
        let mut ev = Vec::new();
        for a in &atoms {
            let r: f64 = rng.gen();
            if r < 0.3 {
                ev.push((a.clone(), true));
            } else if r < 0.5 {
                ev.push((a.clone(), false));
            }
        }
        if atoms.len() - ev.len() <= max_free {
            return ev;
        }
    }
}

/// A random model over the fixed signature with at most 10 free atoms.
pub fn random_case(rng: &mut ChaCha8Rng, kind: Sims, max_formulas: usize, weight: f64) -> Case {
    let n = rng.gen_range(1..=max_formulas);
    let formulas = (0..n)
        .map(|_| {
            let w = (rng.gen_range(-weight..weight) * 1000.0).round() / 1000.0;
            (w, formula(rng, 2))
        })
        .collect();
    Case {
        formulas,
        evidence: evidence(rng, 10),
        sims: sims(rng, kind),
    }
}

/// Random model whose formulas are conjunctions through `is_a`.
pub fn random_is_a_case(rng: &mut ChaCha8Rng, kind: Sims) -> Case {
    let n = rng.gen_range(1..=4);
    let formulas = (0..n)
        .map(|_| ((rng.gen_range(-3.0..3.0f64) * 1000.0).round() / 1000.0, is_a_conjunction(rng)))
        .collect();
    Case {
        formulas,
        evidence: evidence(rng, 10),
        sims: sims(rng, kind),
    }
}

/// Brute-force reference: every free atom's marginal, keyed by atom text.
pub struct Reference {
    pub marginals: BTreeMap<String, f64>,
    pub log_z: f64,
}

fn domain_of(var: &str) -> &'static [&'static str] {
    match var {
        "x" | "y" => &ENTITIES,
        "s" | "t" => &SENSES,
        "c" => &CONCEPTS,
        other => panic!("unexpected variable {other}"),
    }
}

fn bindings(vars: &[String]) -> Vec<BTreeMap<String, String>> {
    let mut out = vec![BTreeMap::new()];
    for v in vars {
        let mut next = Vec::new();
        for b in &out {
            for c in domain_of(v) {
                let mut b = b.clone();
                b.insert(v.clone(), c.to_string());
                next.push(b);
            }
        }
        out = next;
    }
    out
}

fn term_value<'a>(t: &'a Term, b: &'a BTreeMap<String, String>) -> &'a str {
    match t {
        Term::Constant(c) => c,
        Term::Variable(v) | Term::Template(v) => &b[v],
    }
}

fn atom_key(a: &Atom, b: &BTreeMap<String, String>) -> String {
    let args: Vec<&str> = a.args.iter().map(|t| term_value(t, b)).collect();
    format!("{}({})", a.predicate, args.join(", "))
}

/// Truth of `f` with min / max / 1 - x connectives.
fn value(f: &Formula, b: &BTreeMap<String, String>, world: &BTreeMap<String, f64>) -> f64 {
    match f {
        Formula::Atom(a) => world[&atom_key(a, b)],
        Formula::NotEquals(x, y) => f64::from((term_value(x, b) != term_value(y, b)) as u8),
        Formula::Not(a) => 1.0 - value(a, b, world),
        Formula::And(x, y) => value(x, b, world).min(value(y, b, world)),
        Formula::Or(x, y) => value(x, b, world).max(value(y, b, world)),
        Formula::Implies(x, y) => (1.0 - value(x, b, world)).max(value(y, b, world)),
        Formula::Iff(x, y) => {
            let (u, v) = (value(x, b, world), value(y, b, world));
            (1.0 - u).max(v).min((1.0 - v).max(u))
        }
    }
}

/// Classical truth of `f`; `is_a` atoms are true iff their value is 1.
fn truth(f: &Formula, b: &BTreeMap<String, String>, world: &BTreeMap<String, f64>) -> bool {
    match f {
        Formula::Atom(a) => world[&atom_key(a, b)] == 1.0,
        Formula::NotEquals(x, y) => term_value(x, b) != term_value(y, b),
        Formula::Not(a) => !truth(a, b, world),
        Formula::And(x, y) => truth(x, b, world) && truth(y, b, world),
        Formula::Or(x, y) => truth(x, b, world) || truth(y, b, world),
        Formula::Implies(x, y) => !truth(x, b, world) || truth(y, b, world),
        Formula::Iff(x, y) => truth(x, b, world) == truth(y, b, world),
    }
}

/// Enumerates every assignment of the non-evidence binary atoms.
/// `classical` scores worlds by counts of true groundings instead of
/// summed fuzzy values.
pub fn reference(case: &Case, classical: bool) -> Reference {
    let parsed: Vec<(f64, Formula, Vec<BTreeMap<String, String>>)> = case
        .formulas
        .iter()
        .map(|(w, text)| {
            let f = parse_formula(text).unwrap();
            let b = bindings(&f.variables());
            (*w, f, b)
        })
        .collect();
    let evidence: BTreeMap<String, bool> = case
        .evidence
        .iter()
        .map(|(a, v)| (parse_formula(a).unwrap().to_string(), *v))
        .collect();
    let free: Vec<String> = all_binary_atoms()
        .into_iter()
        .filter(|a| !evidence.contains_key(a))
        .collect();
    let mut world: BTreeMap<String, f64> = BTreeMap::new();
    for ((s, c), v) in &case.sims {
        world.insert(format!("is_a({s}, {c})"), *v);
    }
    for (a, v) in &evidence {
        world.insert(a.clone(), f64::from(*v as u8));
    }
    let n = free.len();
    let mut scores = Vec::with_capacity(1 << n);
    for x in 0..(1u64 << n) {
        for (i, a) in free.iter().enumerate() {
            world.insert(a.clone(), f64::from(((x >> i) & 1) as u8));
        }
        let mut score = 0.0;
        for (w, f, bs) in &parsed {
            for b in bs {
                score += w * if classical {
                    f64::from(truth(f, b, &world) as u8)
                } else {
                    value(f, b, &world)
                };
            }
        }
        scores.push(score);
    }
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = scores.iter().map(|s| (s - max).exp()).sum();
    let marginals = free
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let on: f64 = scores
                .iter()
                .enumerate()
                .filter(|(x, _)| (x >> i) & 1 == 1)
                .map(|(_, s)| (s - max).exp())
                .sum();
            (a.clone(), on / z)
        })
        .collect();
    Reference {
        marginals,
        log_z: max + z.ln(),
    }
}

/// Free atoms the reference knows about, as a set of atom texts.
pub fn reference_atoms(case: &Case) -> BTreeSet<String> {
    let evidence: BTreeSet<String> = case.evidence.iter().map(|(a, _)| a.clone()).collect();
    all_binary_atoms().into_iter().filter(|a| !evidence.contains(a)).collect()
}
