//! Turns an instance document into core objects, reporting problems at the
//! line where the offending value starts.

use std::collections::HashMap;
use std::sync::Arc;

use mdx_core::abstract_network::DigraphPathSystem;
use mdx_core::apps::committee::CommitteeInstance;
use mdx_core::apps::coverage::{CoverageInstance, Scenario};
use mdx_core::apps::security::SmugglingTree;
use mdx_core::lattice::{lattice_instance, RootedCutLattice};
use mdx_core::rational::{self, Rational};
use mdx_core::supermodular::SupermodularOracle;
use mdx_core::{
    Error, ExplicitSystem, GroundSet, Instance, Limits, Marginals, Requirements, Subset,
};

use crate::locate::{line_of, token};
use crate::schema::{Entry, Exact, Family, InstanceFile, Named, RequirementsSpec, SCHEMA_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_ORACLE: i32 = 4;
pub const EXIT_APP: i32 = 5;

/// A failed command: process exit code and message.
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Failure::new(EXIT_INPUT, message)
    }
}

/// Exit code for a core error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidInput(_)
        | Error::DimensionMismatch { .. }
        | Error::NoPath { .. }
        | Error::EmptySupport => EXIT_INPUT,
        Error::InfeasibleMarginals { .. }
        | Error::NotInYStar { .. }
        | Error::NotDeterable(_)
        | Error::NotBalanced { .. } => EXIT_INFEASIBLE,
        Error::CardinalityMismatch { .. } | Error::TooManyGroups { .. } => EXIT_APP,
        _ => EXIT_ORACLE,
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure::new(exit_code(&err), err.to_string())
    }
}

/// Source text with its display name, for anchoring messages.
#[derive(Clone, Debug)]
pub struct Source {
    pub name: String,
    pub text: String,
}

impl Source {
    pub fn read(path: &str) -> Result<Self, Failure> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{path}: {e}")))?;
        Ok(Source {
            name: path.to_string(),
            text,
        })
    }

    /// Error anchored at the value under `pointer`.
    pub fn at(&self, code: i32, pointer: &str, message: impl std::fmt::Display) -> Failure {
        match line_of(&self.text, pointer) {
            Some(line) => Failure::new(code, format!("{}:{line}: {pointer}: {message}", self.name)),
            None => Failure::new(code, format!("{}: {pointer}: {message}", self.name)),
        }
    }

    pub fn input_at(&self, pointer: &str, message: impl std::fmt::Display) -> Failure {
        self.at(EXIT_INPUT, pointer, message)
    }

    /// Parses JSON, reporting syntax and shape errors at their line.
    pub fn parse<T: serde::de::DeserializeOwned>(&self) -> Result<T, Failure> {
        serde_json::from_str(&self.text)
            .map_err(|e| Failure::input(format!("{}:{}:{}: {e}", self.name, e.line(), e.column())))
    }
}

/// The family of a loaded instance in core form.
pub enum Model {
    Explicit {
        members: Vec<(Subset, Rational)>,
        /// Element orders as listed, for abstract mode.
        orders: Vec<Vec<usize>>,
    },
    Digraph(Arc<DigraphPathSystem>),
    Supermodular(Arc<SupermodularOracle>),
    Lattice(Arc<RootedCutLattice>),
    Smuggling(SmugglingTree, Arc<SupermodularOracle>),
    Coverage(CoverageInstance),
    Committee {
        k: usize,
        votes: Option<Vec<u64>>,
        groups: Vec<(Subset, Rational)>,
    },
}

pub struct Loaded {
    pub source: Source,
    pub doc: InstanceFile,
    pub ground: GroundSet,
    pub model: Model,
    pub rho: Option<Marginals>,
    pub costs: Option<Vec<Rational>>,
    pub limits: Limits,
}

impl Loaded {
    pub fn kind(&self) -> &'static str {
        self.doc.family.kind()
    }

    /// Marginals, required by `check` and `decompose`.
    pub fn rho(&self) -> Result<&Marginals, Failure> {
        self.rho
            .as_ref()
            .ok_or_else(|| self.source.input_at("", "the instance has no marginals"))
    }

    /// Set system view for the covering condition and verification.
    pub fn instance(&self) -> Result<Instance, Failure> {
        let ground = self.ground.clone();
        let n = ground.len();
        let inst = match &self.model {
            Model::Explicit { members, .. }
            | Model::Committee {
                groups: members, ..
            } => Instance::new(
                ground,
                Arc::new(ExplicitSystem::from_pairs(n, members.clone())?),
            )?,
            Model::Digraph(sys) => Instance::new(ground, sys.clone())?,
            Model::Supermodular(o) | Model::Smuggling(_, o) => Instance::new(ground, o.clone())?,
            Model::Lattice(l) => lattice_instance(ground, l.clone(), self.limits.clone())?,
            Model::Coverage(_) => {
                return Err(self.source.input_at(
                    "/family",
                    "coverage instances have no covering condition to check",
                ))
            }
        };
        Ok(inst)
    }

    /// Committee instance from votes or marginals.
    pub fn committee(&self) -> Result<CommitteeInstance, Failure> {
        let Model::Committee { k, votes, groups } = &self.model else {
            return Err(self
                .source
                .input_at("/family/kind", "expected a committee instance"));
        };
        let built = match (votes, &self.rho) {
            (Some(v), _) => CommitteeInstance::from_votes(v, *k, groups.clone()),
            (None, Some(rho)) => CommitteeInstance::from_marginals(rho.clone(), *k, groups.clone()),
            (None, None) => {
                return Err(self
                    .source
                    .input_at("/family", "committee needs votes or marginals"))
            }
        };
        built.map_err(|e| self.source.at(exit_code(&e), "/family", e))
    }
}

fn ptr(parts: &[&str]) -> String {
    parts.iter().map(|p| format!("/{}", token(p))).collect()
}

struct Reader<'a> {
    src: &'a Source,
    ground: &'a GroundSet,
}

impl Reader<'_> {
    fn number(&self, pointer: &str, value: &Exact) -> Result<Rational, Failure> {
        rational::parse(&value.0).map_err(|e| self.src.input_at(pointer, e))
    }

    fn element(&self, pointer: &str, name: &str) -> Result<usize, Failure> {
        self.ground.position(name).ok_or_else(|| {
            self.src
                .input_at(pointer, format!("unknown element {name:?}"))
        })
    }

    fn set(&self, pointer: &str, names: &[String]) -> Result<Subset, Failure> {
        let mut set = Subset::EMPTY;
        for (i, name) in names.iter().enumerate() {
            let e = self.element(&format!("{pointer}/{i}"), name)?;
            if set.contains(e) {
                return Err(self.src.input_at(
                    &format!("{pointer}/{i}"),
                    format!("element {name:?} repeats"),
                ));
            }
            set = set.with(e);
        }
        Ok(set)
    }

    /// Values keyed by ground element, missing ones zero.
    fn per_element(&self, pointer: &str, map: &Named) -> Result<Vec<Rational>, Failure> {
        let mut out = vec![Rational::from_integer(0.into()); self.ground.len()];
        for (name, v) in map {
            let p = format!("{pointer}/{}", token(name));
            let e = self.element(&p, name)?;
            out[e] = self.number(&p, v)?;
        }
        Ok(out)
    }

    /// Table entries with values at most 1.
    fn table(&self, entries: &[Entry]) -> Result<Vec<(Subset, Rational, String)>, Failure> {
        let mut out: Vec<(Subset, Rational, String)> = Vec::with_capacity(entries.len());
        for (i, entry) in entries.iter().enumerate() {
            let base = format!("/requirements/entries/{i}");
            let set = self.set(&format!("{base}/set"), &entry.set)?;
            let value = self.number(&format!("{base}/value"), &entry.value)?;
            if value > Rational::from_integer(1.into()) {
                return Err(self.src.input_at(
                    &format!("{base}/value"),
                    format!("requirement {} exceeds 1", rational::format(&value)),
                ));
            }
            if out.iter().any(|(s, _, _)| *s == set) {
                return Err(self
                    .src
                    .input_at(&format!("{base}/set"), "set listed twice"));
            }
            out.push((set, value, base));
        }
        Ok(out)
    }
}

/// Names to positions within a node list.
fn node_index(
    src: &Source,
    pointer: &str,
    nodes: &[String],
) -> Result<HashMap<String, usize>, Failure> {
    let mut index = HashMap::new();
    for (i, name) in nodes.iter().enumerate() {
        if index.insert(name.clone(), i).is_some() {
            return Err(src.input_at(&format!("{pointer}/{i}"), format!("node {name:?} repeats")));
        }
    }
    Ok(index)
}

fn node(
    src: &Source,
    pointer: &str,
    index: &HashMap<String, usize>,
    name: &str,
) -> Result<usize, Failure> {
    index
        .get(name)
        .copied()
        .ok_or_else(|| src.input_at(pointer, format!("unknown node {name:?}")))
}

fn node_pairs(
    src: &Source,
    pointer: &str,
    index: &HashMap<String, usize>,
    pairs: &[(String, String)],
) -> Result<Vec<(usize, usize)>, Failure> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, (a, b))| {
            Ok((
                node(src, &format!("{pointer}/{i}/0"), index, a)?,
                node(src, &format!("{pointer}/{i}/1"), index, b)?,
            ))
        })
        .collect()
}

fn expect_ground_len(
    src: &Source,
    pointer: &str,
    found: usize,
    ground: &GroundSet,
) -> Result<(), Failure> {
    if found != ground.len() {
        return Err(src.input_at(
            pointer,
            format!(
                "{found} entries, but the ground set has {} elements",
                ground.len()
            ),
        ));
    }
    Ok(())
}

/// Reads and validates an instance file.
pub fn load(path: &str, limits: Limits) -> Result<Loaded, Failure> {
    load_source(Source::read(path)?, limits)
}

pub fn load_source(source: Source, limits: Limits) -> Result<Loaded, Failure> {
    let doc: InstanceFile = source.parse()?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(source.input_at(
            "/schema_version",
            format!(
                "unsupported schema version {}, expected {SCHEMA_VERSION}",
                doc.schema_version
            ),
        ));
    }
    let ground = GroundSet::new(doc.ground_set.iter().cloned())
        .map_err(|e| source.at(exit_code(&e), "/ground_set", e))?;
    let reader = Reader {
        src: &source,
        ground: &ground,
    };
    let n = ground.len();

    let rho = match &doc.marginals {
        Some(map) => {
            let values = reader.per_element("/marginals", map)?;
            if let Some((name, v)) = map.iter().find(|(_, v)| {
                rational::parse(&v.0)
                    .map(|r| !rational::in_unit_interval(&r))
                    .unwrap_or(false)
            }) {
                return Err(source.input_at(
                    &ptr(&["marginals", name]),
                    format!("marginal {} outside [0, 1]", v.0),
                ));
            }
            Some(Marginals::new(values)?)
        }
        None => None,
    };
    let costs = match &doc.costs {
        Some(map) => Some(reader.per_element("/costs", map)?),
        None => None,
    };

    let model = match &doc.family {
        Family::Explicit { members } => {
            let mut sets = Vec::with_capacity(members.len());
            let mut orders = Vec::with_capacity(members.len());
            for (i, names) in members.iter().enumerate() {
                let p = format!("/family/members/{i}");
                let set = reader.set(&p, names)?;
                if sets.contains(&set) {
                    return Err(source.input_at(&p, "member listed twice"));
                }
                sets.push(set);
                orders.push(
                    names
                        .iter()
                        .map(|x| ground.position(x).expect("checked above"))
                        .collect(),
                );
            }
            let values: Vec<Rational> = match &doc.requirements {
                None | Some(RequirementsSpec::Derived) => {
                    vec![Rational::from_integer(0.into()); sets.len()]
                }
                Some(RequirementsSpec::Table { entries }) => {
                    let table = reader.table(entries)?;
                    if let Some((_, _, base)) = table.iter().find(|(s, _, _)| !sets.contains(s)) {
                        return Err(
                            source.input_at(&format!("{base}/set"), "not a member of the family")
                        );
                    }
                    sets.iter()
                        .map(|s| {
                            table
                                .iter()
                                .find(|(t, _, _)| t == s)
                                .map(|(_, v, _)| v.clone())
                                .unwrap_or_else(|| Rational::from_integer(0.into()))
                        })
                        .collect()
                }
                Some(RequirementsSpec::Affine { mu }) => {
                    let mu = reader.per_element("/requirements/mu", mu)?;
                    let req = Requirements::affine(mu)
                        .map_err(|e| source.input_at("/requirements/mu", e))?;
                    sets.iter()
                        .map(|s| req.eval(*s).expect("affine requirements are total"))
                        .collect()
                }
            };
            Model::Explicit {
                members: sets.into_iter().zip(values).collect(),
                orders,
            }
        }
        Family::Digraph {
            nodes,
            arcs,
            source: s,
            sink: t,
        } => {
            let index = node_index(&source, "/family/nodes", nodes)?;
            expect_ground_len(&source, "/family/arcs", arcs.len(), &ground)?;
            let arc_list = node_pairs(&source, "/family/arcs", &index, arcs)?;
            let s = node(&source, "/family/source", &index, s)?;
            let t = node(&source, "/family/sink", &index, t)?;
            let (req, table) = match &doc.requirements {
                Some(RequirementsSpec::Affine { mu }) => {
                    let mu = reader.per_element("/requirements/mu", mu)?;
                    (
                        Requirements::affine(mu)
                            .map_err(|e| source.input_at("/requirements/mu", e))?,
                        None,
                    )
                }
                Some(RequirementsSpec::Table { entries }) => {
                    let table = reader.table(entries)?;
                    let map: HashMap<Subset, Rational> =
                        table.iter().map(|(s, v, _)| (*s, v.clone())).collect();
                    let zero = Rational::from_integer(0.into());
                    (
                        Requirements::callback(move |p| {
                            map.get(&p).cloned().unwrap_or_else(|| zero.clone())
                        }),
                        Some(table),
                    )
                }
                None | Some(RequirementsSpec::Derived) => {
                    return Err(source.input_at(
                        "/requirements",
                        "digraph instances need a table or affine requirements",
                    ))
                }
            };
            let sys = DigraphPathSystem::new(nodes.len(), arc_list, s, t, req, limits.clone())
                .map_err(|e| source.at(exit_code(&e), "/family", e))?;
            if let Some(table) = table {
                let paths: Vec<Subset> = sys
                    .paths()?
                    .iter()
                    .map(|p| Subset::from_indices(p.iter().copied()))
                    .collect();
                if let Some((_, _, base)) = table.iter().find(|(s, _, _)| !paths.contains(s)) {
                    return Err(
                        source.input_at(&format!("{base}/set"), "not an s-t path of the digraph")
                    );
                }
            }
            Model::Digraph(Arc::new(sys))
        }
        Family::SupermodularTable => {
            let Some(RequirementsSpec::Table { entries }) = &doc.requirements else {
                return Err(source.input_at(
                    "/requirements",
                    "supermodular_table needs a requirement table",
                ));
            };
            let table = reader.table(entries)?;
            let map: HashMap<Subset, Rational> =
                table.iter().map(|(s, v, _)| (*s, v.clone())).collect();
            let oracle = SupermodularOracle::from_table(n, &map, limits.clone())
                .map_err(|e| source.at(exit_code(&e), "/requirements/entries", e))?;
            Model::Supermodular(Arc::new(oracle))
        }
        Family::RootedCuts {
            nodes,
            edges,
            root,
            alpha,
            beta,
        } => {
            derived_only(&source, &doc.requirements)?;
            let index = node_index(&source, "/family/nodes", nodes)?;
            expect_ground_len(&source, "/family/edges", edges.len(), &ground)?;
            let edge_list = node_pairs(&source, "/family/edges", &index, edges)?;
            let root = node(&source, "/family/root", &index, root)?;
            let mut a = vec![Rational::from_integer(0.into()); nodes.len()];
            for (name, v) in alpha {
                let p = ptr(&["family", "alpha", name]);
                a[node(&source, &p, &index, name)?] = reader.number(&p, v)?;
            }
            let beta = reader.number("/family/beta", beta)?;
            let lattice =
                RootedCutLattice::new(nodes.len(), edge_list, root, a, beta, limits.clone())
                    .map_err(|e| source.at(exit_code(&e), "/family", e))?;
            Model::Lattice(Arc::new(lattice))
        }
        Family::SmugglingTree {
            nodes,
            edges,
            rewards,
            beta,
        } => {
            derived_only(&source, &doc.requirements)?;
            let index = node_index(&source, "/family/nodes", nodes)?;
            expect_ground_len(&source, "/family/edges", edges.len(), &ground)?;
            let edge_list = node_pairs(&source, "/family/edges", &index, edges)?;
            let mut r = Vec::with_capacity(rewards.len());
            for (i, reward) in rewards.iter().enumerate() {
                let p = format!("/family/rewards/{i}");
                let v = node(&source, &format!("{p}/pair/0"), &index, &reward.pair.0)?;
                let w = node(&source, &format!("{p}/pair/1"), &index, &reward.pair.1)?;
                r.push((v, w, reader.number(&format!("{p}/alpha"), &reward.alpha)?));
            }
            let beta = reader.number("/family/beta", beta)?;
            let tree = SmugglingTree::new(nodes.len(), edge_list, r, beta)
                .map_err(|e| source.at(exit_code(&e), "/family", e))?;
            let oracle = tree
                .oracle(limits.clone())
                .map_err(|e| source.at(exit_code(&e), "/family", e))?;
            Model::Smuggling(tree, Arc::new(oracle))
        }
        Family::Coverage {
            universe,
            covers,
            scenarios,
        } => {
            derived_only(&source, &doc.requirements)?;
            let items = GroundSet::new(universe.iter().cloned())
                .map_err(|e| source.at(exit_code(&e), "/family/universe", e))?;
            let mut cover_sets = vec![Subset::EMPTY; n];
            for (name, list) in covers {
                let p = ptr(&["family", "covers", name]);
                let e = reader.element(&p, name)?;
                for (i, item) in list.iter().enumerate() {
                    let u = items.position(item).ok_or_else(|| {
                        source.input_at(&format!("{p}/{i}"), format!("unknown item {item:?}"))
                    })?;
                    cover_sets[e] = cover_sets[e].with(u);
                }
            }
            let item_reader = Reader {
                src: &source,
                ground: &items,
            };
            let mut sc = Vec::with_capacity(scenarios.len());
            for (i, spec) in scenarios.iter().enumerate() {
                let p = format!("/family/scenarios/{i}");
                sc.push(Scenario {
                    rewards: item_reader.per_element(&format!("{p}/rewards"), &spec.rewards)?,
                    costs: reader.per_element(&format!("{p}/costs"), &spec.costs)?,
                });
            }
            let inst = CoverageInstance::new(items.len(), cover_sets, sc)
                .map_err(|e| source.at(exit_code(&e), "/family", e))?;
            Model::Coverage(inst)
        }
        Family::Committee { k, votes } => {
            let groups = match &doc.requirements {
                Some(RequirementsSpec::Table { entries }) => reader
                    .table(entries)?
                    .into_iter()
                    .map(|(s, v, _)| (s, v))
                    .collect(),
                None => Vec::new(),
                Some(_) => {
                    return Err(
                        source.input_at("/requirements/kind", "committee groups need a table")
                    )
                }
            };
            let votes = match votes {
                Some(map) => {
                    let mut v = vec![0u64; n];
                    for (name, count) in map {
                        let e = reader.element(&ptr(&["family", "votes", name]), name)?;
                        v[e] = *count;
                    }
                    Some(v)
                }
                None => None,
            };
            Model::Committee {
                k: *k,
                votes,
                groups,
            }
        }
    };
    Ok(Loaded {
        source,
        doc,
        ground,
        model,
        rho,
        costs,
        limits,
    })
}

fn derived_only(src: &Source, req: &Option<RequirementsSpec>) -> Result<(), Failure> {
    match req {
        None | Some(RequirementsSpec::Derived) => Ok(()),
        Some(_) => Err(src.input_at(
            "/requirements/kind",
            "this family derives its requirements; use \"derived\"",
        )),
    }
}
