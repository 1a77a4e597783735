//! The subcommands. Each returns the text to print, or a [`Failure`]
//! carrying the exit code.

use clap::ValueEnum;
use mdx_core::abstract_network::{AbstractNetwork, Conservation};
use mdx_core::apps::committee::committee_round;
use mdx_core::apps::coverage::solve_robust_coverage;
use mdx_core::apps::security::{solve_security_game, SecurityGame, SecurityModel};
use mdx_core::balanced::{perfect_decompose, Hypergraph};
use mdx_core::engine::{decompose_with, verify_members, BruteForceAsc};
use mdx_core::lattice::{decompose_lattice, LatticeOracle};
use mdx_core::model::unit_draw;
use mdx_core::rational::{self, Rational};
use mdx_core::{
    check_star, verify, AscOracle, Decomposition, EngineOptions, GroundSet, Instance, Marginals,
    Report, Requirements, StarCheck, Subset,
};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::load::{exit_code, Failure, Loaded, Model, Source, EXIT_INFEASIBLE, EXIT_ORACLE};
use crate::schema::{
    AppReport, Diagnostics, Exact, Named, ResultFile, SamplerRowSpec, WeightedSet, SCHEMA_VERSION,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Auto,
    Supermodular,
    Abstract,
    Lattice,
    Balanced,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum App {
    Security,
    Coverage,
    Committee,
}

fn exact(value: &Rational) -> Exact {
    Exact(rational::format(value))
}

fn named(ground: &GroundSet, values: &[Rational]) -> Named {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| (ground.name(i).to_string(), exact(v)))
        .collect()
}

fn weighted_sets(ground: &GroundSet, z: &Decomposition) -> Vec<WeightedSet> {
    z.iter()
        .map(|(s, w)| WeightedSet {
            set: ground.names(s),
            weight: exact(w),
        })
        .collect()
}

fn result(
    ground: &GroundSet,
    z: &Decomposition,
    iterations: Option<usize>,
    report: &Report,
) -> ResultFile {
    ResultFile {
        schema_version: SCHEMA_VERSION,
        status: "ok".into(),
        decomposition: weighted_sets(ground, z),
        diagnostics: Diagnostics {
            iterations,
            support_size: z.support_size(),
            worst_slack: report.worst_violation.as_ref().map(|v| exact(&-v.clone())),
        },
        app: None,
    }
}

/// Fails unless the report is clean; nothing unverified is ever written.
fn ensure_verified(report: &Report) -> Result<(), Failure> {
    if report.is_ok() {
        Ok(())
    } else {
        Err(Failure::new(
            EXIT_ORACLE,
            format!("internal error: decomposition failed verification: {report:?}"),
        ))
    }
}

/// Serialized result with a trailing newline.
pub fn render(file: &ResultFile) -> String {
    let mut text = serde_json::to_string_pretty(file).expect("result files serialize");
    text.push('\n');
    text
}

fn violation(inst: &Instance, member: Subset, gap: &Rational) -> Failure {
    Failure::new(
        EXIT_INFEASIBLE,
        format!(
            "infeasible: member {} is short by {}",
            inst.ground.display(member),
            rational::format(gap)
        ),
    )
}

/// Reports whether the marginals satisfy the covering condition.
pub fn check(loaded: &Loaded) -> Result<String, Failure> {
    let inst = loaded.instance()?;
    match check_star(&inst, loaded.rho()?)? {
        StarCheck::Feasible => Ok("feasible\n".into()),
        StarCheck::Violated { member, gap } => Err(violation(&inst, member, &gap)),
    }
}

fn mode_mismatch(loaded: &Loaded, mode: Mode) -> Failure {
    let name = mode
        .to_possible_value()
        .map(|v| v.get_name().to_string())
        .unwrap_or_default();
    loaded.source.input_at(
        "/family/kind",
        format!(
            "mode {name} does not apply to family kind {}",
            loaded.kind()
        ),
    )
}

fn run_engine(
    inst: &Instance,
    rho: &Marginals,
    oracle: &dyn AscOracle,
) -> Result<(Decomposition, Option<usize>), Failure> {
    let out = decompose_with(inst, rho, oracle, &EngineOptions::default())?;
    let iterations = out.iterations();
    Ok((out.decomposition, Some(iterations)))
}

fn supermodular_guard(
    loaded: &Loaded,
    oracle: &mdx_core::supermodular::SupermodularOracle,
) -> Result<(), Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let samples = oracle.default_samples();
    if let Some((a, b)) = oracle.find_supermodularity_violation(&mut rng, samples) {
        return Err(loaded.source.input_at(
            "/requirements",
            format!(
                "requirements are not supermodular on {} and {}",
                loaded.ground.display(a),
                loaded.ground.display(b)
            ),
        ));
    }
    Ok(())
}

/// Decomposes the instance's marginals with the solver selected by `mode`.
pub fn decompose(loaded: &Loaded, mode: Mode) -> Result<ResultFile, Failure> {
    let rho = loaded.rho()?;
    let inst = loaded.instance()?;
    if let StarCheck::Violated { member, gap } = check_star(&inst, rho)? {
        return Err(violation(&inst, member, &gap));
    }
    let n = loaded.ground.len();
    let (z, iterations) = match (&loaded.model, mode) {
        (
            Model::Explicit { members, .. }
            | Model::Committee {
                groups: members, ..
            },
            Mode::Auto,
        ) => run_engine(
            &inst,
            rho,
            &BruteForceAsc::new(members.clone(), &loaded.limits),
        )?,
        (Model::Explicit { members, orders }, Mode::Abstract) => {
            let req = Requirements::table(members.iter().cloned());
            let network = AbstractNetwork::new(n, orders.clone(), &req, &loaded.limits)
                .map_err(|e| loaded.source.at(exit_code(&e), "/family/members", e))?;
            if let Some((p, q, e)) = network.check_crossing()? {
                return Err(loaded.source.input_at(
                    "/family/members",
                    format!(
                        "members {p} and {q} have no crossing member at {}",
                        loaded.ground.name(e)
                    ),
                ));
            }
            if let Conservation::CounterExample { p, q, e } = network.check_weak_conservation()? {
                return Err(loaded.source.input_at(
                    "/requirements",
                    format!(
                        "requirements of members {} and {} violate conservation at {}",
                        loaded.ground.display(p),
                        loaded.ground.display(q),
                        loaded.ground.name(e)
                    ),
                ));
            }
            run_engine(&inst, rho, &network)?
        }
        (
            Model::Explicit { members, .. }
            | Model::Committee {
                groups: members, ..
            },
            Mode::Balanced,
        ) => {
            let sets: Vec<Subset> = members
                .iter()
                .map(|(p, _)| *p)
                .filter(|p| !p.is_empty())
                .collect();
            let h = Hypergraph::new(n, sets)?;
            (perfect_decompose(&h, rho, &loaded.limits)?, None)
        }
        (Model::Digraph(sys), Mode::Auto | Mode::Abstract) => {
            if !matches!(sys.requirements(), Requirements::Affine(_)) {
                if let Conservation::CounterExample { p, q, e } =
                    sys.to_network()?.check_weak_conservation()?
                {
                    return Err(loaded.source.input_at(
                        "/requirements",
                        format!(
                            "requirements of paths {} and {} violate conservation at {}",
                            loaded.ground.display(p),
                            loaded.ground.display(q),
                            loaded.ground.name(e)
                        ),
                    ));
                }
            }
            run_engine(&inst, rho, sys.as_ref())?
        }
        (Model::Supermodular(o) | Model::Smuggling(_, o), Mode::Auto | Mode::Supermodular) => {
            supermodular_guard(loaded, o)?;
            run_engine(&inst, rho, o.as_ref())?
        }
        (Model::Lattice(l), Mode::Auto | Mode::Lattice) => (
            decompose_lattice(&inst, l.as_ref() as &dyn LatticeOracle, rho, &loaded.limits)?,
            None,
        ),
        (Model::Coverage(_), _) => unreachable!("instance() rejects coverage families"),
        _ => return Err(mode_mismatch(loaded, mode)),
    };
    let report = verify(&inst, rho, &z)?;
    ensure_verified(&report)?;
    Ok(result(&loaded.ground, &z, iterations, &report))
}

/// Runs one of the application solvers.
pub fn app(loaded: &Loaded, which: App) -> Result<ResultFile, Failure> {
    match which {
        App::Security => security(loaded),
        App::Coverage => coverage(loaded),
        App::Committee => committee(loaded),
    }
}

fn security(loaded: &Loaded) -> Result<ResultFile, Failure> {
    let model = match &loaded.model {
        Model::Smuggling(tree, _) => SecurityModel::Smuggling(tree.clone()),
        Model::Lattice(l) => SecurityModel::EnergyNetwork(l.as_ref().clone()),
        _ => {
            return Err(loaded.source.input_at(
                "/family/kind",
                "security needs a smuggling_tree or rooted_cuts family",
            ))
        }
    };
    let costs = loaded.costs.clone().ok_or_else(|| {
        loaded
            .source
            .input_at("", "security needs per-element costs")
    })?;
    let game = SecurityGame::new(model, costs)
        .map_err(|e| loaded.source.at(exit_code(&e), "/costs", e))?;
    let out = solve_security_game(&game, &loaded.limits)?;
    let inst = loaded.instance()?;
    let report = verify(&inst, &out.marginals, &out.decomposition)?;
    ensure_verified(&report)?;
    let mut file = result(&loaded.ground, &out.decomposition, None, &report);
    file.app = Some(AppReport::Security {
        cost: exact(&out.cost),
        marginals: named(&loaded.ground, out.marginals.values()),
    });
    Ok(file)
}

fn coverage(loaded: &Loaded) -> Result<ResultFile, Failure> {
    let Model::Coverage(inst) = &loaded.model else {
        return Err(loaded
            .source
            .input_at("/family/kind", "coverage needs a coverage family"));
    };
    let out = solve_robust_coverage(inst, &loaded.limits)?;
    let members: Vec<(Subset, Rational)> = (0..inst.universe())
        .map(|u| (inst.member_of(u), out.pi[u].clone()))
        .filter(|(p, _)| !p.is_empty())
        .collect();
    let report = verify_members(&members, &out.rho, &out.decomposition);
    ensure_verified(&report)?;
    if inst.worst_case(&out.decomposition) < out.t {
        return Err(Failure::new(
            EXIT_ORACLE,
            "internal error: distribution falls short of the optimum",
        ));
    }
    let crate::schema::Family::Coverage { universe, .. } = &loaded.doc.family else {
        unreachable!()
    };
    let mut file = result(&loaded.ground, &out.decomposition, None, &report);
    file.app = Some(AppReport::Coverage {
        t: exact(&out.t),
        marginals: named(&loaded.ground, out.rho.values()),
        pi: universe
            .iter()
            .cloned()
            .zip(out.pi.iter().map(exact))
            .collect(),
    });
    Ok(file)
}

/// How `mdx sample` draws from a result file.
pub const SAMPLE_PROTOCOL: &str = "ChaCha8 seeded with the sample seed; each draw takes u = next_u64 / 2^64 and \
returns the first decomposition entry, in file order, whose cumulative weight exceeds u. The sampler rows give \
the same law in two stages: a row is drawn the same way, then tau = next_u64 / 2^64, and candidate i of the row \
joins when [a_(i-1), a_i) contains tau + h for an integer h >= 0, where a are the cumulative lengths.";

fn committee(loaded: &Loaded) -> Result<ResultFile, Failure> {
    let inst = loaded.committee()?;
    let z = inst.decompose(&loaded.limits)?;
    let sampler = committee_round(&inst, &z)?;
    let law = sampler.exact_law();
    let keep = Rational::from_integer(1.into()) - sampler.epsilon();
    let scaled: Vec<(Subset, Rational)> = inst
        .groups()
        .iter()
        .map(|(p, pi)| (*p, &keep * pi))
        .collect();
    let report = verify_members(&scaled, inst.rho(), &law);
    ensure_verified(&report)?;
    if law.support().any(|s| s.len() != inst.k()) {
        return Err(Failure::new(
            EXIT_ORACLE,
            "internal error: committee of the wrong size",
        ));
    }
    let ground = &loaded.ground;
    let mut file = result(ground, &law, None, &report);
    file.app = Some(AppReport::Committee {
        k: inst.k(),
        epsilon: exact(sampler.epsilon()),
        sampler: sampler
            .rows()
            .iter()
            .map(|row| SamplerRowSpec {
                set: ground.names(row.set),
                weight: exact(&row.weight),
                lengths: row
                    .lengths
                    .iter()
                    .map(|(e, l)| (ground.name(*e).to_string(), exact(l)))
                    .collect(),
            })
            .collect(),
        protocol: SAMPLE_PROTOCOL.into(),
    });
    Ok(file)
}

/// Draws `n` sets from a result file, one comma-separated line each.
pub fn sample(source: &Source, n: usize, seed: u64) -> Result<String, Failure> {
    let file: ResultFile = source.parse()?;
    let mut entries = Vec::with_capacity(file.decomposition.len());
    let mut total = Rational::from_integer(0.into());
    for (i, entry) in file.decomposition.iter().enumerate() {
        let pointer = format!("/decomposition/{i}/weight");
        let w = rational::parse(&entry.weight.0).map_err(|e| source.input_at(&pointer, e))?;
        if w < Rational::from_integer(0.into()) {
            return Err(source.input_at(&pointer, "negative weight"));
        }
        total += &w;
        entries.push((entry.set.join(","), w));
    }
    if total != Rational::from_integer(1.into()) {
        return Err(source.input_at(
            "/decomposition",
            format!("weights sum to {}", rational::format(&total)),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    for _ in 0..n {
        let u = unit_draw(&mut rng);
        let mut acc = Rational::from_integer(0.into());
        let line = entries
            .iter()
            .find(|(_, w)| {
                acc += w;
                u < acc
            })
            .or(entries.last())
            .map(|(s, _)| s.as_str())
            .unwrap_or("");
        out.push_str(line);
        out.push('\n');
    }
    Ok(out)
}
