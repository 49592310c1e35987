use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use planspace::distance::{read_features, write_features, FEATURE_LEN};
use planspace::prune::{redundant_count, write_groups};
use planspace::synth::{duplicate_corpus, random_dataset};
use planspace::workspace::{CLUSTERS, DISTANCES, EMBEDDING, FEATURES, PLANS, REDUNDANT};
use planspace::{
    build_distance_table, check_plan, cosine_distance, insert_point, kmeans, load_dataset,
    plan_iou_distance, prune_redundant, rasterize, read_embedding, read_table, save_dataset,
    select_triples, solve_embedding, stress, write_embedding, write_table, Dataset,
    FeatureVector, FloorPlan, IouMode, Room, SolverConfig, SpatialIndex, Workspace,
};

use crate::{
    ClusterArgs, Command, Corpus, CliError, EncodeArgs, GenerateArgs, InsertArgs, IouKind, Oracle,
    Pairs, PruneArgs, QueryArgs, ServeArgs, SolveArgs,
};

/// All-pairs encoding above this many plans needs `--yes`.
const ALL_PAIRS_CONFIRM: usize = 5000;

type Outcome = Result<String, CliError>;

pub fn run(command: Command, ws: &Workspace) -> Outcome {
    let summary = match command {
        Command::Encode(a) => encode(a, ws)?,
        Command::Solve(a) => solve(a, ws)?,
        Command::Insert(a) => insert(a, ws)?,
        Command::Query(a) => query(a, ws)?,
        Command::Cluster(a) => cluster(a, ws)?,
        Command::Prune(a) => prune(a, ws)?,
        Command::Stats => stats(ws)?,
        Command::Serve(a) => serve(a, ws)?,
        Command::Generate(a) => generate(a, ws)?,
    };
    Ok(summary.to_string())
}

/// Path of a workspace file that must already exist.
fn require(ws: &Workspace, file: &str) -> Result<PathBuf, CliError> {
    let path = ws.path(file);
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::Data(format!("{file} not found in {}", ws.dir().display())))
    }
}

fn require_path(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{} not found", path.display())))
    }
}

fn iou_mode(kind: IouKind) -> IouMode {
    match kind {
        IouKind::Category => IouMode::Category,
        IouKind::Occupancy => IouMode::Occupancy,
    }
}

fn encode(args: EncodeArgs, ws: &Workspace) -> Result<Value, CliError> {
    let mode = iou_mode(args.iou_mode);
    let needs_plans = args.oracle == Oracle::Iou || args.pairs == Pairs::Triples || ws.has(PLANS);
    let dataset = if needs_plans {
        Some(load_dataset(require(ws, PLANS)?)?)
    } else {
        None
    };
    let features: HashMap<String, FeatureVector> = if args.oracle == Oracle::Cosine {
        read_features(require(ws, FEATURES)?)?
            .into_iter()
            .map(|f| (f.id.clone(), f))
            .collect()
    } else {
        HashMap::new()
    };
    let universe: BTreeSet<String> = match &dataset {
        Some(ds) => ds.plans().iter().map(|p| p.id.clone()).collect(),
        None => features.keys().cloned().collect(),
    };
    let ids: Vec<&str> = universe.iter().map(String::as_str).collect();

    let pairs: Vec<(String, String)> = match args.pairs {
        Pairs::All => {
            if ids.len() > ALL_PAIRS_CONFIRM && !args.yes {
                return Err(CliError::Usage(format!(
                    "--pairs all over {} plans computes {} distances; pass --yes to confirm",
                    ids.len(),
                    ids.len() * (ids.len() - 1) / 2
                )));
            }
            let mut out = Vec::with_capacity(ids.len() * ids.len().saturating_sub(1) / 2);
            for a in 0..ids.len() {
                for b in a + 1..ids.len() {
                    out.push((ids[a].to_string(), ids[b].to_string()));
                }
            }
            out
        }
        Pairs::Triples => {
            let ds = dataset.as_ref().expect("triples load plans");
            select_triples(ds, args.per_anchor, args.seed, mode)?
                .iter()
                .flat_map(|t| t.pairs())
                .collect()
        }
    };

    let table = build_distance_table(
        &universe,
        pairs.iter().map(|(i, j)| (i.as_str(), j.as_str())),
        |i, j| match args.oracle {
            Oracle::Iou => {
                let ds = dataset.as_ref().expect("iou loads plans");
                let plan = |id: &str| ds.get(id).ok_or_else(|| planspace::Error::UnknownId(id.into()));
                Ok(plan_iou_distance(plan(i)?, plan(j)?, mode))
            }
            Oracle::Cosine => {
                let vector = |id: &str| {
                    features
                        .get(id)
                        .map(|f| f.values.as_slice())
                        .ok_or_else(|| planspace::Error::UnknownId(id.into()))
                };
                cosine_distance(vector(i)?, vector(j)?)
            }
        },
    )?;
    let out = args.out.unwrap_or_else(|| ws.path(DISTANCES));
    write_table(&table, &out)?;
    Ok(json!({
        "command": "encode",
        "oracle": format!("{:?}", args.oracle).to_lowercase(),
        "pairs": format!("{:?}", args.pairs).to_lowercase(),
        "plans": universe.len(),
        "entries": table.len(),
        "mean_distance": table.mean_distance(),
        "output": out,
    }))
}

fn solve(args: SolveArgs, ws: &Workspace) -> Result<Value, CliError> {
    let path = match args.distances {
        Some(p) => {
            require_path(&p)?;
            p
        }
        None => require(ws, DISTANCES)?,
    };
    let table = read_table(&path)?;
    let config = SolverConfig {
        max_iterations: args.max_iters,
        rel_tolerance: args.tol,
        grad_tolerance: args.grad_tol,
        restarts: args.restarts,
        init_scale: args.init_scale,
        seed: args.seed,
        ..SolverConfig::default()
    };
    let (embedding, report) = solve_embedding(&table, args.dim, &config)?;
    let out = ws.path(EMBEDDING);
    write_embedding(&embedding, &out)?;
    for id in &report.isolated {
        eprintln!("warning: \"{id}\" has no distances; it keeps its random start");
    }
    if !report.converged() {
        return Err(CliError::Convergence(format!(
            "no restart converged within {} iterations (best final stress {}); wrote {}",
            args.max_iters,
            report.final_stress,
            out.display()
        )));
    }
    let mut summary = json!({
        "command": "solve",
        "points": embedding.len(),
        "entries": table.len(),
        "dim": args.dim,
        "seed": args.seed,
        "output": out,
    });
    merge(&mut summary, serde_json::to_value(&report).expect("report serializes"));
    Ok(summary)
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

#[derive(serde::Deserialize)]
struct PlanDocument {
    id: Option<String>,
    rooms: Vec<Room>,
}

fn read_new_distances(path: &Path) -> Result<BTreeMap<String, f64>, CliError> {
    require_path(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || CliError::Data(format!("{}:{}: expected id<TAB>distance", path.display(), n + 1));
        let (id, dist) = line.split_once('\t').ok_or_else(bad)?;
        let dist: f64 = dist.trim().parse().map_err(|_| bad())?;
        if out.insert(id.to_string(), dist).is_some() {
            return Err(CliError::Data(format!("{}:{}: duplicate id \"{id}\"", path.display(), n + 1)));
        }
    }
    Ok(out)
}

fn insert(args: InsertArgs, ws: &Workspace) -> Result<Value, CliError> {
    let mut embedding = read_embedding(require(ws, EMBEDDING)?)?;
    let mut new_plan = None;
    let mut dataset = None;
    let targets = match (&args.plan, &args.distances) {
        (Some(path), _) => {
            require_path(path)?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let doc: PlanDocument = serde_json::from_str(&text)
                .map_err(|e| CliError::Data(format!("{}: malformed plan document: {e}", path.display())))?;
            let id = args.id.clone().or(doc.id).unwrap_or_else(|| "new".into());
            let plan = FloorPlan::new(id, doc.rooms);
            check_plan(&plan)?;
            let ds = load_dataset(require(ws, PLANS)?)?;
            let mut targets = BTreeMap::new();
            for anchor in embedding.ids() {
                let other = ds
                    .get(anchor)
                    .ok_or_else(|| CliError::Data(format!("embedded id \"{anchor}\" is not in {PLANS}")))?;
                targets.insert(anchor.clone(), plan_iou_distance(&plan, other, IouMode::Category));
            }
            new_plan = Some(plan);
            dataset = Some(ds);
            targets
        }
        (None, Some(path)) => read_new_distances(path)?,
        (None, None) => return Err(CliError::Usage("one of --plan or --distances is required".into())),
    };
    let id = match &new_plan {
        Some(p) => p.id.clone(),
        None => args.id.clone().unwrap_or_else(|| "new".into()),
    };
    let config = SolverConfig {
        restarts: args.restarts,
        seed: args.seed,
        ..SolverConfig::default()
    };
    let (coordinate, report) = insert_point(&embedding, &targets, &config)?;

    if args.save {
        if embedding.get(&id).is_some() {
            return Err(CliError::Data(format!("id \"{id}\" is already embedded")));
        }
        if let (Some(plan), Some(mut ds)) = (new_plan, dataset) {
            ds.push(plan)?;
            save_dataset(&ds, ws.path(PLANS))?;
        }
        embedding.push(id.clone(), &coordinate)?;
        write_embedding(&embedding, ws.path(EMBEDDING))?;
    }
    Ok(json!({
        "command": "insert",
        "id": id,
        "coordinate": coordinate,
        "anchors": targets.len(),
        "initial_stress": report.initial_stress,
        "final_stress": report.final_stress,
        "iterations": report.iterations,
        "termination": report.termination,
        "saved": args.save,
    }))
}

fn parse_coord(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|f| f.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::Usage(format!("--coord expects comma-separated numbers, got \"{text}\"")))
}

fn query(args: QueryArgs, ws: &Workspace) -> Result<Value, CliError> {
    let embedding = read_embedding(require(ws, EMBEDDING)?)?;
    let (point, exclude) = match (&args.id, &args.coord) {
        (Some(id), _) => {
            let p = embedding
                .get(id)
                .ok_or_else(|| CliError::Data(format!("unknown plan id \"{id}\"")))?;
            (p.to_vec(), Some(id.as_str()))
        }
        (None, Some(c)) => (parse_coord(c)?, None),
        (None, None) => return Err(CliError::Usage("one of --id or --coord is required".into())),
    };
    if args.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    let index = SpatialIndex::build(&embedding);
    let results = index.query(&point, args.k, args.order, exclude)?;
    Ok(json!({
        "command": "query",
        "id": args.id,
        "coordinate": point,
        "k": args.k,
        "order": args.order,
        "results": results,
    }))
}

fn cluster(args: ClusterArgs, ws: &Workspace) -> Result<Value, CliError> {
    let embedding = read_embedding(require(ws, EMBEDDING)?)?;
    if args.k == 0 || args.k > embedding.len() {
        return Err(CliError::Usage(format!(
            "--k must be between 1 and {} (the number of embedded plans)",
            embedding.len()
        )));
    }
    let assignment = kmeans(&embedding, args.k, args.seed, args.max_iters)?;
    let out = ws.path(CLUSTERS);
    assignment.write_tsv(&out)?;
    let mut sizes = vec![0usize; args.k];
    for &l in &assignment.labels {
        sizes[l] += 1;
    }
    Ok(json!({
        "command": "cluster",
        "k": args.k,
        "seed": args.seed,
        "iterations": assignment.iterations,
        "inertia": assignment.inertia(),
        "sizes": sizes,
        "output": out,
    }))
}

fn prune(args: PruneArgs, ws: &Workspace) -> Result<Value, CliError> {
    if args.resolution == 0 {
        return Err(CliError::Usage("--resolution must be at least 1".into()));
    }
    let dataset = load_dataset(require(ws, PLANS)?)?;
    let groups = prune_redundant(&dataset, args.threshold, args.resolution)?;
    let out = ws.path(REDUNDANT);
    write_groups(&groups, &out)?;
    Ok(json!({
        "command": "prune",
        "plans": dataset.len(),
        "threshold": args.threshold,
        "resolution": args.resolution,
        "groups": groups.len(),
        "redundant_count": redundant_count(&groups),
        "output": out,
    }))
}

fn stats(ws: &Workspace) -> Result<Value, CliError> {
    let embedding = read_embedding(require(ws, EMBEDDING)?)?;
    let table = read_table(require(ws, DISTANCES)?)?;
    let s = stress(&embedding, &table)?;
    let rms = if table.is_empty() { 0.0 } else { (s / table.len() as f64).sqrt() };
    Ok(json!({
        "command": "stats",
        "points": embedding.len(),
        "dim": embedding.dim(),
        "entries": table.len(),
        "stress": s,
        "rms_residual": rms,
    }))
}

fn serve(args: ServeArgs, ws: &Workspace) -> Result<Value, CliError> {
    require(ws, PLANS)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Data(e.to_string()))?;
    let config = planspace_server::ServeConfig {
        workspace: ws.clone(),
        host: args.host,
        port: args.port,
        ui_dir: args.ui,
    };
    runtime
        .block_on(planspace_server::serve(config))
        .map_err(|e| CliError::Data(e.to_string()))?;
    Ok(json!({ "command": "serve", "port": args.port }))
}

fn generate(args: GenerateArgs, ws: &Workspace) -> Result<Value, CliError> {
    let out = ws.path(PLANS);
    if out.exists() && !args.force {
        return Err(CliError::Usage(format!("{} exists; pass --force to overwrite", out.display())));
    }
    std::fs::create_dir_all(ws.dir()).map_err(|e| CliError::Data(format!("{}: {e}", ws.dir().display())))?;
    let (dataset, copies) = match args.kind {
        Corpus::Random => (random_dataset(args.n, args.seed), None),
        Corpus::Duplicates => {
            if args.bases > 100 || args.copies > args.bases {
                return Err(CliError::Usage("duplicates corpus needs copies <= bases <= 100".into()));
            }
            let (ds, truth) = duplicate_corpus(args.bases, args.copies);
            (ds, Some(truth.len()))
        }
    };
    save_dataset(&dataset, &out)?;
    let features = if args.features {
        let path = ws.path(FEATURES);
        write_features(&synthetic_features(&dataset, args.seed)?, &path)?;
        Some(path)
    } else {
        None
    };
    Ok(json!({
        "command": "generate",
        "plans": dataset.len(),
        "copies": copies,
        "output": out,
        "features": features,
    }))
}

/// A 32×32 grid of room labels per plan plus a little seeded noise, so cosine
/// distance tracks layout similarity.
fn synthetic_features(dataset: &Dataset, seed: u64) -> Result<Vec<FeatureVector>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = (FEATURE_LEN as f64).sqrt() as usize;
    dataset
        .plans()
        .iter()
        .map(|p| {
            let grid = rasterize(p, side);
            let values = grid
                .cells()
                .iter()
                .map(|&c| f64::from(c) + rng.gen_range(0.0..0.1))
                .collect();
            FeatureVector::new(p.id.clone(), values).map_err(CliError::from)
        })
        .collect()
}
