use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use mvrbm::analytics::{average_precision, hamming_kmeans, ndcg, rand_index, RetrievalResult};
use mvrbm::gradcheck::check_all;
use mvrbm::inference::{predict_unseen, project, Normalization};
use mvrbm::io::dataset::{read_dataset, write_dataset, Dataset};
use mvrbm::io::text::{read_model, read_schema, write_model, write_schema, Model};
use mvrbm::io::tsv::{fmt6, write_log};
use mvrbm::rng::{stream_rng, Stream};
use mvrbm::synth::{generate, random_records, SynthSpec};
use mvrbm::training::{fit, TrainConfig};
use mvrbm::{Error, ModelParams, Result, VisibleVector};

use crate::{ClusterArgs, Command, EvalArgs, GradcheckArgs, PredictArgs, ProjectArgs, RetrieveArgs, SynthArgs, TrainArgs};

pub fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Project(a) => project_cmd(a),
        Command::Predict(a) => predict(a),
        Command::Retrieve(a) => retrieve(a),
        Command::Cluster(a) => cluster(a),
        Command::Eval(a) => eval(a),
        Command::Gradcheck(a) => gradcheck(a),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))
}

fn synth(a: SynthArgs) -> Result<u8> {
    let mut spec = match &a.spec {
        Some(p) => SynthSpec::from_toml(&read_text(p)?)?,
        None => SynthSpec::default(),
    };
    if let Some(c) = a.concepts {
        spec.concepts = c;
    }
    if let Some(n) = a.per_concept {
        spec.records_per_concept = n;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    let (schema, data) = generate(&spec)?;
    write_schema(&a.schema, &schema)?;
    write_dataset(&a.out, &schema, &data)?;
    Ok(0)
}

fn train(a: TrainArgs) -> Result<u8> {
    let schema = read_schema(&a.schema)?;
    let data = read_dataset(&a.data, &schema)?;
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::from_toml(&read_text(p)?)?,
        None => TrainConfig::default(),
    };
    if let Some(v) = a.hidden {
        cfg.hidden = v;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.batch {
        cfg.batch_size = v;
    }
    if let Some(v) = a.cd_steps {
        cfg.cd_steps = v;
    }
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = a.groups {
        cfg.groups = v;
    }
    if let Some(v) = a.beta {
        cfg.beta = v;
    }
    if let Some(v) = a.rho1 {
        cfg.rho1 = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    cfg.persistent |= a.persistent;
    cfg.exact_gradient |= a.oracle_exact_gradient;
    cfg.validate()?;

    let labels = data.has_labels().then_some(data.labels.as_slice());
    match fit(&schema, &data.encoded, labels, &cfg) {
        Ok((params, log)) => {
            write_model(&a.out, &Model { schema, params })?;
            let mut out = output(a.log.as_deref())?;
            write_log(&mut out, &log)?;
            out.flush()?;
            Ok(0)
        }
        Err(Error::Diverged { epoch, checkpoint }) => {
            let path = checkpoint_path(&a.out);
            write_model(&path, &Model { schema, params: *checkpoint.clone() })?;
            eprintln!("last finite parameters written to {}", path.display());
            Err(Error::Diverged { epoch, checkpoint })
        }
        Err(e) => Err(e),
    }
}

fn checkpoint_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".checkpoint");
    out.with_file_name(name)
}

fn load(model: &Path, data: &Path) -> Result<(Model, Dataset)> {
    let m = read_model(model)?;
    let d = read_dataset(data, &m.schema)?;
    Ok((m, d))
}

fn project_cmd(a: ProjectArgs) -> Result<u8> {
    let (m, d) = load(&a.model, &a.data)?;
    let k = m.params.num_hidden();
    let mut out = output(a.out.as_deref())?;
    write!(out, "id")?;
    for j in 1..=k {
        write!(out, "\tp{j}")?;
    }
    for j in 1..=k {
        write!(out, "\tc{j}")?;
    }
    writeln!(out)?;
    for (i, v) in d.encoded.iter().enumerate() {
        let prof = project(&m.schema, &m.params, v, a.rho1)?;
        write!(out, "{i}")?;
        for p in &prof.posteriors {
            write!(out, "\t{}", fmt6(*p))?;
        }
        for b in &prof.code {
            write!(out, "\t{}", u8::from(*b))?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(0)
}

fn predict(a: PredictArgs) -> Result<u8> {
    let (m, d) = load(&a.model, &a.data)?;
    let unit = m
        .schema
        .index_of(&a.unit)
        .ok_or_else(|| Error::Usage(format!("model has no unit named {:?}", a.unit)))?;
    let v = d
        .encoded
        .get(a.record)
        .ok_or_else(|| Error::Usage(format!("record {} out of range (data has {})", a.record, d.len())))?;
    let v = if a.mask { v.without_unit(&m.schema, unit) } else { v.clone() };
    let norm = if a.full_vocabulary { Normalization::FullVocabulary } else { Normalization::Renormalized };
    let ranking = predict_unseen(&m.schema, &m.params, &v, unit, a.candidates.as_deref(), norm)?;
    let mut out = output(a.out.as_deref())?;
    writeln!(out, "token\tprobability")?;
    for (t, p) in ranking.entries {
        writeln!(out, "{t}\t{}", fmt6(p))?;
    }
    out.flush()?;
    Ok(0)
}

/// Rank the corpus for every query; queries default to the corpus itself.
fn rankings(model: &Path, data: &Path, queries: Option<&Path>, exclude_self: bool) -> Result<Vec<RetrievalResult>> {
    let (m, corpus) = load(model, data)?;
    let posteriors = |d: &Dataset| -> Vec<ndarray::Array1<f64>> {
        d.encoded.iter().map(|v| mvrbm::hidden_conditional(&m.schema, &m.params, v)).collect()
    };
    let corpus_post = posteriors(&corpus);
    let (query_post, query_labels, same) = match queries {
        Some(q) => {
            let qd = read_dataset(q, &m.schema)?;
            (posteriors(&qd), qd.labels, false)
        }
        None => (corpus_post.clone(), corpus.labels.clone(), true),
    };
    query_post
        .iter()
        .zip(&query_labels)
        .enumerate()
        .map(|(i, (p, l))| {
            let mut r = RetrievalResult::by_label(i, p, *l, &corpus_post, &corpus.labels)?;
            if same && exclude_self {
                let keep: Vec<bool> = r.ranked.iter().map(|e| e.0 != i).collect();
                r.relevant = r.relevant.iter().zip(&keep).filter(|(_, k)| **k).map(|(x, _)| *x).collect();
                r.ranked.retain(|e| e.0 != i);
            }
            Ok(r)
        })
        .collect()
}

fn retrieve(a: RetrieveArgs) -> Result<u8> {
    if a.k == Some(0) {
        return Err(Error::Usage("--k must be at least 1".into()));
    }
    let results = rankings(&a.model, &a.data, a.queries.as_deref(), a.exclude_self)?;
    let mut out = output(a.out.as_deref())?;
    writeln!(out, "query\trank\tid\tdistance\trelevant")?;
    for r in &results {
        let k = a.k.unwrap_or(r.ranked.len());
        for (rank, ((id, dist), rel)) in r.ranked.iter().zip(&r.relevant).take(k).enumerate() {
            writeln!(out, "{}\t{}\t{id}\t{}\t{}", r.query, rank + 1, fmt6(*dist), u8::from(*rel))?;
        }
    }
    out.flush()?;
    Ok(0)
}

fn cluster(a: ClusterArgs) -> Result<u8> {
    let (m, d) = load(&a.model, &a.data)?;
    let codes: Vec<Vec<bool>> = d
        .encoded
        .iter()
        .map(|v| project(&m.schema, &m.params, v, a.rho1).map(|p| p.code))
        .collect::<Result<_>>()?;
    let assignment = hamming_kmeans(&codes, a.clusters, a.seed, a.max_iter)?;
    let mut out = output(a.out.as_deref())?;
    writeln!(out, "id\tcluster")?;
    for (i, c) in assignment.labels.iter().enumerate() {
        writeln!(out, "{i}\t{c}")?;
    }
    out.flush()?;
    if let Some(path) = &a.report {
        let mut rep = output(Some(path))?;
        writeln!(rep, "method\tmetric\tvalue\tstd")?;
        let labeled: Vec<usize> = (0..d.len()).filter(|&i| d.labels[i].is_some()).collect();
        let value = if labeled.is_empty() {
            "NA".to_string()
        } else {
            let ours: Vec<usize> = labeled.iter().map(|&i| assignment.labels[i]).collect();
            let truth: Vec<usize> = labeled.iter().map(|&i| d.labels[i].expect("labeled") as usize).collect();
            fmt6(rand_index(&ours, &truth)?)
        };
        writeln!(rep, "hamming_kmeans\trand_index\t{value}\tNA")?;
        rep.flush()?;
    }
    Ok(0)
}

fn parse_rankings(path: &Path) -> Result<Vec<RetrievalResult>> {
    let file = BufReader::new(File::open(path)?);
    let mut results: Vec<RetrievalResult> = Vec::new();
    for (n, line) in file.lines().enumerate() {
        let line = line?;
        if n == 0 || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let bad = || Error::Parse { line: n + 1, msg: "expected query, rank, id, distance, relevant".into() };
        if f.len() != 5 {
            return Err(bad());
        }
        let query: usize = f[0].parse().map_err(|_| bad())?;
        let id: usize = f[2].parse().map_err(|_| bad())?;
        let dist: f64 = f[3].parse().map_err(|_| bad())?;
        let rel = match f[4] {
            "1" => true,
            "0" => false,
            _ => return Err(bad()),
        };
        match results.last_mut() {
            Some(r) if r.query == query => {
                r.ranked.push((id, dist));
                r.relevant.push(rel);
            }
            _ => results.push(RetrievalResult { query, ranked: vec![(id, dist)], relevant: vec![rel] }),
        }
    }
    Ok(results)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn eval(a: EvalArgs) -> Result<u8> {
    if a.k == 0 {
        return Err(Error::Usage("--k must be at least 1".into()));
    }
    let results = match (&a.rankings, &a.model, &a.data) {
        (Some(r), _, _) => parse_rankings(r)?,
        (None, Some(m), Some(d)) => rankings(m, d, a.queries.as_deref(), a.queries.is_none())?,
        _ => return Err(Error::Usage("eval needs --rankings, or --model and --data".into())),
    };
    let ap: Vec<f64> = results.iter().map(|r| average_precision(&r.relevant, a.k)).collect();
    let nd: Vec<f64> = results.iter().map(|r| ndcg(&r.relevant, a.k)).collect();
    let mut out = output(a.out.as_deref())?;
    writeln!(out, "method\tmetric\tvalue\tstd")?;
    for (name, xs) in [(format!("MAP@{}", a.k), &ap), (format!("NDCG@{}", a.k), &nd)] {
        let (m, s) = mean_std(xs);
        writeln!(out, "{}\t{name}\t{}\t{}", a.method, fmt6(m), fmt6(s))?;
    }
    out.flush()?;
    Ok(0)
}

fn gradcheck(a: GradcheckArgs) -> Result<u8> {
    let (schema, params) = match (&a.model, &a.schema) {
        (Some(m), _) => {
            let m = read_model(m)?;
            (m.schema, m.params)
        }
        (None, Some(s)) => {
            let schema = read_schema(s)?;
            let mut rng = stream_rng(a.seed, Stream::Init);
            let params = ModelParams::random(schema.total_columns(), a.hidden, 0.5, &mut rng);
            (schema, params)
        }
        (None, None) => return Err(Error::Usage("gradcheck needs --model or --schema".into())),
    };
    let data: Vec<VisibleVector> = match &a.data {
        Some(d) => read_dataset(d, &schema)?.encoded,
        None => {
            let mut rng = stream_rng(a.seed, Stream::Synth);
            random_records(&schema, a.records, 3, &mut rng)
                .iter()
                .map(|r| schema.encode(r))
                .collect::<Result<_>>()?
        }
    };
    let results = check_all(&schema, &params, &data, a.groups)?;
    let mut out = output(None)?;
    writeln!(out, "check\trelative_error\tstatus")?;
    let mut failed = false;
    for r in &results {
        let ok = r.relative_error <= a.tolerance;
        failed |= !ok;
        writeln!(out, "{}\t{}\t{}", r.name, fmt6(r.relative_error), if ok { "pass" } else { "FAIL" })?;
    }
    out.flush()?;
    if failed {
        eprintln!("gradient check failed at tolerance {}", a.tolerance);
        return Ok(3);
    }
    Ok(0)
}
