//! Subcommand implementations. Every command is deterministic under a
//! fixed seed and records the seed in its outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pauli_learn::channel::NoiseModel;
use pauli_learn::clifford::GateSet;
use pauli_learn::fit::{
    feasible_region, fit_decay, intercept_estimate, reconstruct_with_bootstrap, FitOptions,
    LearnableEstimates,
};
use pauli_learn::gauge::{apply_gauge, certify_indistinguishable, GaugeTransform};
use pauli_learn::graph::PatternGraph;
use pauli_learn::report::{analyze as analyze_graph, human_basis};
use pauli_learn::sim::{
    intercept_specs, interleaved_spec, plan_learnable_suite, run_specs, standard_spec, CbDataset,
    CbParams, CptpNoiseSpec, Engine, Protocol, ResolvedNoise, RunSpec,
};

use crate::svg;

/// Exit codes: 2 validation, 3 infeasible/empty region, 4 parse error.
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn parse(message: impl Into<String>) -> CliError {
        CliError { code: 4, message: message.into() }
    }

    fn validation(message: impl Into<String>) -> CliError {
        CliError { code: 2, message: message.into() }
    }

    fn infeasible(message: impl Into<String>) -> CliError {
        CliError { code: 3, message: message.into() }
    }
}

fn read_file(path: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::parse(format!("cannot read {path}: {e}")))
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::validation(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn load_gateset(path: &str) -> Result<GateSet, CliError> {
    GateSet::from_json(&read_file(path)?)
        .map_err(|e| CliError::parse(format!("{path}: {e}")))
}

fn load_model(path: &str) -> Result<NoiseModel, CliError> {
    NoiseModel::from_json(&read_file(path)?)
        .map_err(|e| CliError::parse(format!("{path}: {e}")))
}

fn formats(list: &str) -> Vec<&str> {
    list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

pub fn analyze(gateset: &str, out: &str, format: &str) -> Result<(), CliError> {
    let gates = load_gateset(gateset)?;
    let graph = PatternGraph::build(&gates)
        .map_err(|e| CliError::validation(e.to_string()))?;
    let report = analyze_graph(&graph, &gates)
        .map_err(|e| CliError::validation(e.to_string()))?;
    let dir = Path::new(out);
    let wanted = formats(format);
    if wanted.contains(&"json") {
        write_out(dir, "report.json", &report.to_json())?;
    }
    if wanted.contains(&"md") {
        write_out(dir, "report.md", &report.to_markdown())?;
    }
    if wanted.contains(&"dot") {
        write_out(dir, "graph.dot", &graph.to_dot())?;
    }
    println!(
        "gates {{{}}}: |Lambda| = {}, UDF = {}, LDF = {}",
        report.gates.join(", "),
        report.total_params,
        report.udf,
        report.ldf
    );
    Ok(())
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SimConfigFile {
    protocol: Option<String>,
    gate: Option<String>,
    paulis: Option<Vec<String>>,
    depths: Option<Vec<u32>>,
    l_values: Option<Vec<u32>>,
    circuits: Option<u32>,
    shots: Option<u32>,
    seed: Option<u64>,
    engine: Option<String>,
}

pub struct SimulateArgs {
    pub gateset: String,
    pub noise: Option<String>,
    pub cptp: Option<String>,
    pub config: Option<String>,
    pub protocol: Option<String>,
    pub gate: Option<String>,
    pub paulis: Option<String>,
    pub depths: Option<String>,
    pub l_values: Option<String>,
    pub circuits: Option<u32>,
    pub shots: Option<u32>,
    pub seed: Option<u64>,
    pub engine: Option<String>,
    pub out: String,
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| CliError::parse(format!("bad {what} entry {s:?}"))))
        .collect()
}

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let gates = load_gateset(&args.gateset)?;
    let mut cfg: SimConfigFile = match &args.config {
        Some(path) => serde_json::from_str(&read_file(path)?)
            .map_err(|e| CliError::parse(format!("{path}: {e}")))?,
        None => SimConfigFile::default(),
    };
    if let Some(p) = args.protocol {
        cfg.protocol = Some(p);
    }
    if let Some(g) = args.gate {
        cfg.gate = Some(g);
    }
    if let Some(p) = args.paulis {
        cfg.paulis = Some(parse_list(&p, "pauli")?);
    }
    if let Some(d) = args.depths {
        cfg.depths = Some(parse_list(&d, "depth")?);
    }
    if let Some(l) = args.l_values {
        cfg.l_values = Some(parse_list(&l, "l value")?);
    }
    if let Some(c) = args.circuits {
        cfg.circuits = Some(c);
    }
    if let Some(s) = args.shots {
        cfg.shots = Some(s);
    }
    if let Some(s) = args.seed {
        cfg.seed = Some(s);
    }
    if let Some(e) = args.engine {
        cfg.engine = Some(e);
    }

    let engine = match cfg.engine.as_deref() {
        None => None,
        Some("pauli_fast") => Some(Engine::PauliFast),
        Some("ptm_dense") => Some(Engine::PtmDense),
        Some(other) => return Err(CliError::parse(format!("unknown engine {other:?}"))),
    };
    // Default study scale: depths 2..128, C = 60, 1000 shots.
    let depths = cfg.depths.unwrap_or_else(|| vec![2, 4, 8, 16, 32, 64, 128]);
    let l_values = cfg.l_values.unwrap_or_else(|| vec![0, 1, 2, 4, 8, 16, 32]);
    let params = CbParams {
        circuits: cfg.circuits.unwrap_or(60),
        shots: cfg.shots.unwrap_or(1000),
        seed: cfg.seed.unwrap_or(0),
        engine: engine.unwrap_or(Engine::PauliFast),
    };

    let graph = PatternGraph::build(&gates)
        .map_err(|e| CliError::validation(e.to_string()))?;
    let gate = match cfg.gate {
        Some(name) => {
            gates
                .by_name(&name)
                .ok_or_else(|| CliError::validation(format!("gate {name:?} not in gate set")))?;
            name
        }
        None => gates.gate(0).name().to_string(),
    };
    let all_paulis = || -> Vec<String> {
        (0..(1u64 << (2 * gates.n())))
            .map(|a| pauli_learn::PauliOp::from_index(gates.n(), a).to_string())
            .collect()
    };
    let protocol = cfg.protocol.as_deref().unwrap_or("suite");
    let specs: Vec<RunSpec> = match protocol {
        "suite" => plan_learnable_suite(&gates, &graph, &depths)
            .map_err(|e| CliError::validation(e.to_string()))?,
        "standard" => {
            let paulis = cfg.paulis.unwrap_or_else(all_paulis);
            paulis
                .iter()
                .map(|p| standard_spec(&gates, &gate, p, &depths))
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::validation(e.to_string()))?
        }
        "interleaved" => {
            let explicit = cfg.paulis.is_some();
            let paulis = cfg.paulis.unwrap_or_else(all_paulis);
            let mut specs = Vec::new();
            for p in &paulis {
                match interleaved_spec(&gates, &gate, p, None, &depths) {
                    Ok(s) => specs.push(s),
                    Err(pauli_learn::sim::SimError::OrbitNotClosed(a, b)) if !explicit => {
                        // Default "all": skip Paulis whose pattern changes.
                        let _ = (a, b);
                    }
                    Err(e) => return Err(CliError::validation(e.to_string())),
                }
            }
            specs
        }
        "intercept" => {
            let paulis = cfg.paulis.unwrap_or_else(all_paulis);
            let mut specs = Vec::new();
            for p in &paulis {
                specs.extend(
                    intercept_specs(&gates, &gate, p, &l_values)
                        .map_err(|e| CliError::validation(e.to_string()))?,
                );
            }
            specs
        }
        other => return Err(CliError::parse(format!("unknown protocol {other:?}"))),
    };

    let dataset = match (&args.noise, &args.cptp) {
        (Some(path), None) => {
            let model = load_model(path)?;
            let noise = ResolvedNoise::from_model(&model, &gates)
                .map_err(|e| CliError::validation(e.to_string()))?;
            run_specs(&noise, &gates, &specs, &params)
                .map_err(|e| CliError::validation(e.to_string()))?
        }
        (None, Some(path)) => {
            let spec = CptpNoiseSpec::from_json(&read_file(path)?)
                .map_err(|e| CliError::parse(format!("{path}: {e}")))?;
            if params.engine == Engine::PauliFast {
                return Err(CliError::validation(
                    "pauli_fast engine cannot take a CPTP (Kraus) spec; use --engine ptm_dense",
                ));
            }
            let noise =
                spec.resolve(&gates).map_err(|e| CliError::validation(e.to_string()))?;
            run_specs(&noise, &gates, &specs, &params)
                .map_err(|e| CliError::validation(e.to_string()))?
        }
        _ => {
            return Err(CliError::validation(
                "exactly one of --noise or --cptp is required",
            ))
        }
    };
    let dir = Path::new(&args.out);
    write_out(dir, "dataset.json", &dataset.to_json())?;
    write_out(dir, "dataset.csv", &dataset.to_csv())?;
    write_out(
        dir,
        "plan.json",
        &serde_json::to_string_pretty(&specs).expect("specs serialize"),
    )?;
    println!(
        "simulated {} runs x {} circuits (shots = {}, seed = {}, engine = {:?})",
        dataset.runs.len(),
        params.circuits,
        params.shots,
        params.seed,
        params.engine
    );
    Ok(())
}

pub fn fit(
    gateset: &str,
    data: &str,
    bootstrap: Option<u32>,
    seed: Option<u64>,
    format: &str,
    out: &str,
) -> Result<(), CliError> {
    let gates = load_gateset(gateset)?;
    let graph = PatternGraph::build(&gates)
        .map_err(|e| CliError::validation(e.to_string()))?;
    let dataset = CbDataset::from_json(&read_file(data)?)
        .map_err(|e| CliError::parse(format!("{data}: {e}")))?;
    let opts = FitOptions {
        bootstrap: bootstrap.unwrap_or(FitOptions::default().bootstrap),
        seed: seed.unwrap_or(0),
    };
    let targets: Vec<pauli_learn::fit::LabeledFunctional> =
        human_basis(&graph, &gates).into_iter().map(|b| (b.label, b.entries)).collect();
    let estimates = reconstruct_with_bootstrap(&dataset.runs, &graph, &gates, &targets, &opts)
        .map_err(|e| CliError::validation(e.to_string()))?;
    if !estimates.missing.is_empty() {
        eprintln!(
            "note: {} basis directions not covered by this dataset: {}\n      run the missing protocols (e.g. `simulate --protocol suite`)",
            estimates.missing.len(),
            estimates.missing.join(", ")
        );
    }

    // Intercept pairs, when present.
    let mut intercepts = Vec::new();
    for run in &dataset.runs {
        if run.meta.protocol != Protocol::InterceptA {
            continue;
        }
        let partner_id = run.meta.run_id.replace(":A", ":B");
        if let Some(partner) = dataset.run(&partner_id) {
            let est = intercept_estimate(run, partner, &opts)
                .map_err(|e| CliError::validation(e.to_string()))?;
            if !est.rates_compatible {
                eprintln!(
                    "warning: intercept families for {} disagree on the decay rate (possible model violation)",
                    est.pauli
                );
            }
            intercepts.push(est);
        }
    }

    let dir = Path::new(out);
    let wanted = formats(format);
    let fits: Vec<_> = dataset
        .runs
        .iter()
        .filter(|r| {
            r.meta.protocol != Protocol::InterceptA && r.meta.protocol != Protocol::InterceptB
        })
        .map(|r| fit_decay(r, &opts).map_err(|e| CliError::validation(e.to_string())))
        .collect::<Result<_, _>>()?;
    if wanted.contains(&"json") {
        write_out(dir, "fits.json", &serde_json::to_string_pretty(&fits).expect("serialize"))?;
        write_out(
            dir,
            "learnable.json",
            &serde_json::to_string_pretty(&estimates).expect("serialize"),
        )?;
        if !intercepts.is_empty() {
            write_out(
                dir,
                "intercept.json",
                &serde_json::to_string_pretty(&intercepts).expect("serialize"),
            )?;
        }
    }
    if wanted.contains(&"csv") {
        let mut curves = String::from("run_id,depth,x,mean,stderr\n");
        for run in &dataset.runs {
            for (depth, x, means) in run.means_by_depth() {
                let c = means.len() as f64;
                let mean = means.iter().sum::<f64>() / c;
                let var = if means.len() > 1 {
                    means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (c - 1.0) / c
                } else {
                    0.0
                };
                curves.push_str(&format!(
                    "{},{},{},{:.12e},{:.12e}\n",
                    run.meta.run_id,
                    depth,
                    x,
                    mean,
                    var.sqrt()
                ));
            }
        }
        write_out(dir, "decay_curves.csv", &curves)?;
        let mut bars = String::from("label,lambda,sigma\n");
        for b in &estimates.basis {
            let lambda = b.value.exp();
            bars.push_str(&format!("{},{:.12e},{:.12e}\n", b.label, lambda, lambda * b.sigma));
        }
        write_out(dir, "estimates.csv", &bars)?;
    }
    if wanted.contains(&"svg") {
        write_out(dir, "decays.svg", &svg::decay_chart(&dataset))?;
        let labels: Vec<String> = estimates.basis.iter().map(|b| b.label.clone()).collect();
        let values: Vec<f64> = estimates.basis.iter().map(|b| b.value.exp()).collect();
        let sigmas: Vec<f64> =
            estimates.basis.iter().map(|b| b.value.exp() * b.sigma).collect();
        write_out(dir, "estimates.svg", &svg::bar_chart(&labels, &values, &sigmas))?;
    }
    println!(
        "fitted {} runs; {} basis estimates, {} missing directions, {} intercept pairs",
        fits.len(),
        estimates.basis.len(),
        estimates.missing.len(),
        intercepts.len()
    );
    Ok(())
}

pub fn feasible(
    gateset: &str,
    fits: &str,
    eps: Option<f64>,
    grid: usize,
    format: &str,
    out: &str,
) -> Result<(), CliError> {
    let gates = load_gateset(gateset)?;
    let graph = PatternGraph::build(&gates)
        .map_err(|e| CliError::validation(e.to_string()))?;
    let estimates: LearnableEstimates = serde_json::from_str(&read_file(fits)?)
        .map_err(|e| CliError::parse(format!("{fits}: {e}")))?;
    // Default slack: the largest bootstrap sigma among the fidelity
    // estimates (in the lambda domain).
    let eps = eps.unwrap_or_else(|| {
        estimates
            .basis
            .iter()
            .map(|b| b.value.exp() * b.sigma)
            .fold(0.0f64, f64::max)
    });
    let region = feasible_region(&estimates, &graph, &gates, eps, grid)
        .map_err(|e| CliError::validation(e.to_string()))?;
    let dir = Path::new(out);
    let wanted = formats(format);
    if wanted.contains(&"json") {
        write_out(
            dir,
            "region.json",
            &serde_json::to_string_pretty(&region).expect("serialize"),
        )?;
    }
    if let Some(min_eps) = region.min_feasible_eps {
        return Err(CliError::infeasible(format!(
            "feasible region is empty at eps = {eps:.3e}; smallest feasible eps ~ {min_eps:.3e}"
        )));
    }
    if wanted.contains(&"csv") {
        let mut boundary = String::from("y,lo,hi\n");
        for row in &region.rows {
            boundary.push_str(&format!("{:.12e},{:.12e},{:.12e}\n", row.y, row.lo, row.hi));
        }
        write_out(dir, "region_boundary.csv", &boundary)?;
        let mut intervals = String::from("kind,gate,pauli,lo,hi\n");
        for iv in &region.lambda_intervals {
            intervals.push_str(&format!(
                "lambda,{},{},{:.12e},{:.12e}\n",
                iv.gate, iv.pauli, iv.lo, iv.hi
            ));
        }
        for iv in &region.p_intervals {
            intervals
                .push_str(&format!("p,{},{},{:.12e},{:.12e}\n", iv.gate, iv.pauli, iv.lo, iv.hi));
        }
        write_out(dir, "intervals.csv", &intervals)?;
    }
    if wanted.contains(&"svg") {
        write_out(dir, "region.svg", &svg::region_chart(&region))?;
    }
    let coord_names: Vec<String> =
        region.coords.iter().map(|c| format!("lambda_{}", c.pauli)).collect();
    println!(
        "region over ({}) with eps = {:.3e}: {} feasible grid points, interval product: {}",
        coord_names.join(", "),
        eps,
        region.feasible_points,
        region.is_interval_product
    );
    Ok(())
}

pub fn gauge_check(
    gateset: &str,
    noise: &str,
    gauge: Option<&str>,
    noise2: Option<&str>,
    trials: usize,
    seed: u64,
    out: &str,
) -> Result<(), CliError> {
    let gates = load_gateset(gateset)?;
    let m1 = load_model(noise)?;
    let m2 = match (gauge, noise2) {
        (Some(path), None) => {
            let transform = GaugeTransform::from_json(&read_file(path)?)
                .map_err(|e| CliError::parse(format!("{path}: {e}")))?;
            apply_gauge(&m1, &transform, &gates)
                .map_err(|e| CliError::validation(e.to_string()))?
        }
        (None, Some(path)) => load_model(path)?,
        _ => {
            return Err(CliError::validation(
                "exactly one of --gauge or --noise2 is required",
            ))
        }
    };
    let report = certify_indistinguishable(&m1, &m2, &gates, trials, seed)
        .map_err(|e| CliError::validation(e.to_string()))?;
    write_out(
        Path::new(out),
        "gauge_check.json",
        &serde_json::to_string_pretty(&report).expect("serialize"),
    )?;
    println!(
        "{} over {} experiments (max deviation {:.3e})",
        if report.indistinguishable { "indistinguishable" } else { "DISTINGUISHABLE" },
        report.trials,
        report.max_deviation
    );
    Ok(())
}

pub fn report(
    gateset: &str,
    noise: Option<&str>,
    cptp: Option<&str>,
    circuits: Option<u32>,
    shots: Option<u32>,
    seed: u64,
    out: &str,
) -> Result<(), CliError> {
    let dir = Path::new(out);
    analyze(gateset, out, "json,md,dot")?;
    let sim_out = dir.join("sim");
    simulate(SimulateArgs {
        gateset: gateset.to_string(),
        noise: noise.map(String::from),
        cptp: cptp.map(String::from),
        config: None,
        protocol: Some("suite".into()),
        gate: None,
        paulis: None,
        depths: None,
        l_values: None,
        circuits,
        shots,
        seed: Some(seed),
        engine: cptp.is_some().then(|| "ptm_dense".to_string()),
        out: sim_out.display().to_string(),
    })?;
    let fit_out = dir.join("fit");
    fit(
        gateset,
        &sim_out.join("dataset.json").display().to_string(),
        None,
        Some(seed),
        "json,csv,svg",
        &fit_out.display().to_string(),
    )?;
    let feas_out = dir.join("feasible");
    feasible(
        gateset,
        &fit_out.join("learnable.json").display().to_string(),
        None,
        401,
        "json,csv,svg",
        &feas_out.display().to_string(),
    )?;
    let summary = format!(
        "# Study summary\n\nInputs: gate set `{gateset}`, noise `{}`, seed {seed}.\n\n\
         - `report.json` / `report.md`: learnability analysis\n\
         - `sim/`: simulated cycle-benchmarking datasets\n\
         - `fit/`: decay fits and learnable-functional estimates\n\
         - `feasible/`: physical feasibility region of the gauge freedom\n",
        noise.or(cptp).unwrap_or("-"),
    );
    write_out(dir, "summary.md", &summary)?;
    println!("study written to {}", dir.display());
    Ok(())
}
