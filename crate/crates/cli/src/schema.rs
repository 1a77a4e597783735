//! JSON documents read and written by the CLI.
//!
//! Numbers are carried as exact decimal or `p/q` strings; bare JSON numbers
//! are accepted on input and kept verbatim.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const SCHEMA_VERSION: u32 = 1;

/// A rational as written in the document.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Exact(pub String);

impl Exact {
    pub fn new(text: impl Into<String>) -> Self {
        Exact(text.into())
    }
}

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(serde_json::Number),
        }
        match Raw::deserialize(d)
            .map_err(|_| serde::de::Error::custom("expected a number or a numeric string"))?
        {
            Raw::Text(s) => Ok(Exact(s)),
            Raw::Number(n) => Ok(Exact(n.to_string())),
        }
    }
}

pub type Named = BTreeMap<String, Exact>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub schema_version: u32,
    pub ground_set: Vec<String>,
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requirements: Option<RequirementsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginals: Option<Named>,
    /// Per-element costs, used by the security game.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<Named>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// Members listed as element sequences; the listed order is the member's
    /// order in abstract mode.
    Explicit { members: Vec<Vec<String>> },
    /// `arcs[i]` is ground element `i`.
    Digraph {
        nodes: Vec<String>,
        arcs: Vec<(String, String)>,
        source: String,
        sink: String,
    },
    /// All subsets, with the requirement table as the set function.
    SupermodularTable,
    /// `edges[i]` is ground element `i`.
    RootedCuts {
        nodes: Vec<String>,
        edges: Vec<(String, String)>,
        root: String,
        #[serde(default)]
        alpha: Named,
        beta: Exact,
    },
    /// `edges[i]` is ground element `i`.
    SmugglingTree {
        nodes: Vec<String>,
        edges: Vec<(String, String)>,
        #[serde(default)]
        rewards: Vec<Reward>,
        beta: Exact,
    },
    /// Ground elements cover items of `universe`.
    Coverage {
        universe: Vec<String>,
        covers: BTreeMap<String, Vec<String>>,
        scenarios: Vec<ScenarioSpec>,
    },
    /// Groups come from the requirement table; marginals from `votes` or
    /// the top-level `marginals`.
    Committee {
        k: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        votes: Option<BTreeMap<String, u64>>,
    },
}

impl Family {
    pub fn kind(&self) -> &'static str {
        match self {
            Family::Explicit { .. } => "explicit",
            Family::Digraph { .. } => "digraph",
            Family::SupermodularTable => "supermodular_table",
            Family::RootedCuts { .. } => "rooted_cuts",
            Family::SmugglingTree { .. } => "smuggling_tree",
            Family::Coverage { .. } => "coverage",
            Family::Committee { .. } => "committee",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reward {
    pub pair: (String, String),
    pub alpha: Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub rewards: Named,
    #[serde(default)]
    pub costs: Named,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RequirementsSpec {
    Table {
        entries: Vec<Entry>,
    },
    /// `π_P = 1 − μ(P)`.
    Affine {
        mu: Named,
    },
    /// Computed from the family's own data.
    Derived,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub set: Vec<String>,
    pub value: Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultFile {
    pub schema_version: u32,
    pub status: String,
    pub decomposition: Vec<WeightedSet>,
    pub diagnostics: Diagnostics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub app: Option<AppReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedSet {
    pub set: Vec<String>,
    pub weight: Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    /// Engine iterations; absent for solvers that do not run the loop.
    pub iterations: Option<usize>,
    pub support_size: usize,
    /// `min_P (Pr[S ∩ P ≠ ∅] − π_P)`; absent for an empty family.
    pub worst_slack: Option<Exact>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AppReport {
    Security {
        cost: Exact,
        marginals: Named,
    },
    Coverage {
        t: Exact,
        marginals: Named,
        /// Coverage target per universe item.
        pi: Named,
    },
    Committee {
        k: usize,
        epsilon: Exact,
        sampler: Vec<SamplerRowSpec>,
        protocol: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerRowSpec {
    pub set: Vec<String>,
    pub weight: Exact,
    /// Fill-up interval lengths in ground order.
    pub lengths: Vec<(String, Exact)>,
}
