use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use morphkit::calibration::{calibrate as run_calibration, Orientation};
use morphkit::dataset::{
    chronological, filter_min_samples, group_by_subject, load_dataset, load_morphs, write_morphs, write_records,
};
use morphkit::dmad::{
    bona_fide_differentials, bpcer, bpcer_at_macer, build_training_sets, dmad_det, macer, morph_differentials,
    DmadModel, SvmParams, TrainingSetConfig,
};
use morphkit::formats::{self, EcdfRow};
use morphkit::pair_selection::{random_pairs, select_pairs};
use morphkit::similarity::{build_score_matrix, mated_scores, nonmated_scores, sample_subjects};
use morphkit::synthgen::{generate_morphs, generate_population};
use morphkit::vulnerability::{
    default_map_weights, ecdf_points, map_avg, map_matrix, mmpmr, morph_comparisons, prod_avg_mmpmr, rmmr,
    AttemptRule, ComparisonRow, ComparisonTable, MorphScores,
};
use morphkit::{EmbeddingRecord, MorphPair, ScoreLabel, ScoreSample, SubjectRule, SynthConfig};

use crate::output::{announce, artifact, ensure_dir, write_csv, write_json, write_jsonl, Provenance};
use crate::{
    CalibrateArgs, CompareArgs, DatasetArgs, DmadEvalArgs, DmadTrainArgs, EvalScope, MapArgs, MorphArgs, PairArgs,
    PairMode, RuleArg, ScoreOrientation, SimulateArgs, ThresholdArgs, VulnArgs,
};

const PAIR_HEADER: &[&str] = &["subject_a", "subject_b", "distance", "method"];
const SCORE_HEADER: &[&str] = &["label", "score", "id_a", "id_b"];
const COMPARISON_HEADER: &[&str] = &["morph_id", "frs_id", "subject_slot", "probe_index", "distance"];
const ECDF_HEADER: &[&str] = &["series", "score", "fraction"];

fn load(data: &DatasetArgs) -> Result<Vec<EmbeddingRecord>> {
    ensure!(data.min_samples >= 1, "--min-samples must be at least 1");
    let records = load_dataset(&data.embeddings, data.dim)?;
    let kept = filter_min_samples(&records, data.min_samples);
    ensure!(
        !kept.is_empty(),
        "no subject in {} has at least {} samples",
        data.embeddings.display(),
        data.min_samples
    );
    Ok(kept)
}

/// FRS ids end up in file names.
fn check_id(id: &str) -> Result<()> {
    ensure!(
        !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)),
        "FRS id {id:?} must be non-empty and use only letters, digits, '-', '_' or '.'"
    );
    Ok(())
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let config = SynthConfig {
        n_subjects: a.subjects,
        samples_per_subject: a.samples,
        dim: a.dim,
        intra_class_noise: a.noise,
        magnitude_min: a.magnitude_min,
        magnitude_max: a.magnitude_max,
        genders: a.genders,
        ethnicities: a.ethnicities,
        age_min: a.age_min,
        age_max: a.age_max,
        seed: a.seed,
    };
    let records = generate_population(&config)?;
    let prov = Provenance::new("simulate", a)?;
    ensure_dir(&a.out.out_dir)?;
    let path = artifact(&a.out.out_dir, "embeddings.jsonl");
    write_jsonl(&path, &prov, |w| write_records(w, &records))?;
    announce(&[&path]);
    Ok(())
}

pub fn pair(a: &PairArgs) -> Result<()> {
    let records = load(&a.data)?;
    let sources: Vec<&EmbeddingRecord> = group_by_subject(&records)
        .into_iter()
        .map(|(_, samples)| chronological(&samples)[0])
        .collect();
    let ids: Vec<String> = sources.iter().map(|r| r.subject_id.clone()).collect();
    let metadata: Vec<_> = sources.iter().map(|r| r.demographics()).collect();
    let pairs = match a.mode {
        PairMode::Embedding => {
            let embeddings: Vec<&[f64]> = sources.iter().map(|r| r.embedding.as_slice()).collect();
            let matrix = build_score_matrix(ids, &embeddings)?;
            select_pairs(&matrix, &metadata, a.max_age_gap)?
        }
        PairMode::Random => random_pairs(&ids, &metadata, a.max_age_gap, a.seed)?,
    };
    let prov = Provenance::new("pair", a)?;
    ensure_dir(&a.out.out_dir)?;
    let path = artifact(&a.out.out_dir, "pairs.csv");
    write_csv(&path, PAIR_HEADER, &pairs, &prov)?;
    eprintln!("{} pairs from {} subjects", pairs.len(), sources.len());
    announce(&[&path]);
    Ok(())
}

pub fn morph(a: &MorphArgs) -> Result<()> {
    let records = load(&a.data)?;
    let pairs: Vec<MorphPair> = formats::read_csv_file(&a.pairs).with_context(|| format!("reading {}", a.pairs.display()))?;
    ensure!(!pairs.is_empty(), "{} contains no pairs", a.pairs.display());
    let morphs = generate_morphs(&records, &pairs, a.noise, &a.morpher, a.seed)?;
    let prov = Provenance::new("morph", a)?;
    ensure_dir(&a.out.out_dir)?;
    let path = artifact(&a.out.out_dir, "morphs.jsonl");
    write_jsonl(&path, &prov, |w| write_morphs(w, &morphs))?;
    announce(&[&path]);
    Ok(())
}

pub fn compare(a: &CompareArgs) -> Result<()> {
    check_id(&a.frs_id)?;
    let records = load(&a.data)?;
    let morphs = load_morphs(&a.morphs, a.data.dim)?;
    ensure!(!morphs.is_empty(), "{} contains no morphs", a.morphs.display());
    let rows = morph_comparisons(&records, &morphs, &a.frs_id)?;
    let prov = Provenance::new("compare", a)?;
    ensure_dir(&a.out.out_dir)?;
    let path = artifact(&a.out.out_dir, &format!("comparisons-{}.csv", a.frs_id));
    write_csv(&path, COMPARISON_HEADER, &rows, &prov)?;
    announce(&[&path]);
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct CalibrationReport {
    frs_id: String,
    tau: f64,
    target_fmr: f64,
    achieved_fmr: f64,
    fnmr_at_tau: f64,
    mated_count: usize,
    nonmated_count: usize,
    /// Scores and thresholds are distances (lower means more similar).
    orientation: String,
}

pub fn calibrate(a: &CalibrateArgs) -> Result<()> {
    check_id(&a.frs_id)?;
    let scores: Vec<ScoreSample> = match (&a.embeddings, &a.scores_in) {
        (Some(path), None) => {
            let dim = a.dim.context("--dim is required with --embeddings")?;
            let data = DatasetArgs {
                embeddings: path.clone(),
                dim,
                min_samples: a.min_samples,
            };
            let mut records = load(&data)?;
            if let Some(subset) = a.subset {
                ensure!(subset >= 2, "--subset must be at least 2");
                records = sample_subjects(&records, subset, a.seed);
            }
            let mut scores = mated_scores(&records)?;
            let count = a.nonmated.unwrap_or(scores.len());
            scores.extend(nonmated_scores(&records, count, a.seed)?);
            scores
        }
        (None, Some(path)) => {
            let orientation = match a.orientation {
                ScoreOrientation::Distance => Orientation::Distance,
                ScoreOrientation::Similarity => Orientation::Similarity,
            };
            let mut rows: Vec<ScoreSample> =
                formats::read_csv_file(path).with_context(|| format!("reading {}", path.display()))?;
            rows.retain(|s| s.label != ScoreLabel::MatedMorph);
            for s in &mut rows {
                ensure!(s.score.is_finite(), "non-finite score for {} / {}", s.id_a, s.id_b);
                s.score = orientation.to_distance(s.score);
            }
            rows
        }
        _ => bail!("exactly one of --embeddings or --scores-in is required"),
    };
    let pick = |label| -> Vec<f64> { scores.iter().filter(|s| s.label == label).map(|s| s.score).collect() };
    let (mated, nonmated) = (pick(ScoreLabel::Mated), pick(ScoreLabel::NonMated));
    ensure!(!mated.is_empty(), "no mated scores available for calibration");
    ensure!(!nonmated.is_empty(), "no non-mated scores available for calibration");
    let result = run_calibration(&a.frs_id, &mated, &nonmated, a.fmr)?;

    let report = CalibrationReport {
        frs_id: result.frs_id.clone(),
        tau: result.tau,
        target_fmr: result.target_fmr,
        achieved_fmr: result.achieved_fmr,
        fnmr_at_tau: result.fnmr_at_tau,
        mated_count: mated.len(),
        nonmated_count: nonmated.len(),
        orientation: "distance".into(),
    };
    let prov = Provenance::new("calibrate", a)?;
    let dir = &a.out.out_dir;
    ensure_dir(dir)?;
    let json = artifact(dir, &format!("calibration-{}.json", a.frs_id));
    let det = artifact(dir, &format!("det-{}.csv", a.frs_id));
    let scores_csv = artifact(dir, &format!("scores-{}.csv", a.frs_id));
    write_json(&json, &report, &prov)?;
    write_csv(&det, &["threshold", "fmr", "fnmr"], &result.det_points, &prov)?;
    write_csv(&scores_csv, SCORE_HEADER, &scores, &prov)?;
    eprintln!(
        "{}: tau {} (FMR {}, FNMR {})",
        a.frs_id, report.tau, report.achieved_fmr, report.fnmr_at_tau
    );
    announce(&[&json, &det, &scores_csv]);
    Ok(())
}

#[derive(Debug, Deserialize)]
struct CalibrationFile {
    frs_id: String,
    tau: f64,
    fnmr_at_tau: f64,
}

struct Threshold {
    tau: f64,
    fnmr: Option<f64>,
}

fn resolve_thresholds(args: &ThresholdArgs) -> Result<BTreeMap<String, Threshold>> {
    let mut out = BTreeMap::new();
    for path in &args.calibrations {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: CalibrationFile =
            serde_json::from_str(&text).with_context(|| format!("parsing calibration {}", path.display()))?;
        out.insert(
            file.frs_id,
            Threshold {
                tau: file.tau,
                fnmr: Some(file.fnmr_at_tau),
            },
        );
    }
    for (frs, tau) in &args.taus {
        let entry = out.entry(frs.clone()).or_insert(Threshold { tau: *tau, fnmr: None });
        entry.tau = *tau;
    }
    for (frs, fnmr) in &args.fnmrs {
        ensure!((0.0..=1.0).contains(fnmr), "FNMR for {frs} must lie in [0, 1]");
        let entry = out
            .get_mut(frs)
            .with_context(|| format!("--fnmr given for {frs} without a threshold"))?;
        entry.fnmr = Some(*fnmr);
    }
    Ok(out)
}

fn load_comparisons(paths: &[impl AsRef<Path>]) -> Result<ComparisonTable> {
    let mut rows: Vec<ComparisonRow> = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let mut part: Vec<ComparisonRow> =
            formats::read_csv_file(path).with_context(|| format!("reading {}", path.display()))?;
        rows.append(&mut part);
    }
    ensure!(!rows.is_empty(), "no comparison rows");
    Ok(ComparisonTable::from_rows(&rows)?)
}

fn threshold_for<'a>(thresholds: &'a BTreeMap<String, Threshold>, frs: &str) -> Result<&'a Threshold> {
    thresholds
        .get(frs)
        .with_context(|| format!("no threshold for FRS {frs}; pass --calibration or --tau {frs}=VALUE"))
}

#[derive(Debug, Serialize)]
struct MetricsRow {
    selection: String,
    morpher: String,
    frs_id: String,
    morphs: usize,
    tau: f64,
    mmpmr_all: f64,
    mmpmr_any: f64,
    prod_avg_mmpmr: f64,
    fnmr: Option<f64>,
    rmmr: Option<f64>,
}

fn ecdf_rows(series: &str, scores: &[f64]) -> Result<Vec<EcdfRow>> {
    Ok(ecdf_points(scores)?
        .into_iter()
        .map(|(score, fraction)| EcdfRow {
            series: series.to_string(),
            score,
            fraction,
        })
        .collect())
}

/// Per morph, the larger of the subjects' best probe distances: the score
/// that decides success when every subject has to verify.
fn worst_subject_scores(set: &[MorphScores]) -> Vec<f64> {
    set.iter()
        .map(|m| {
            m.subjects
                .iter()
                .map(|p| p.iter().copied().fold(f64::INFINITY, f64::min))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

pub fn vuln(a: &VulnArgs) -> Result<()> {
    let table = load_comparisons(&a.comparisons)?;
    let thresholds = resolve_thresholds(&a.thresholds)?;
    let rule = match a.rule {
        RuleArg::Any => SubjectRule::Any,
        RuleArg::All => SubjectRule::All,
    };
    let prov = Provenance::new("vuln", a)?;
    let dir = &a.out.out_dir;
    ensure_dir(dir)?;

    let mut metrics = Vec::new();
    let mut written = Vec::new();
    for (f, frs) in table.frs_ids.iter().enumerate() {
        let t = threshold_for(&thresholds, frs)?;
        let set = table.for_frs(f);
        let all = mmpmr(&set, t.tau, SubjectRule::All)?;
        let any = mmpmr(&set, t.tau, SubjectRule::Any)?;
        let chosen = if rule == SubjectRule::All { all } else { any };
        metrics.push(MetricsRow {
            selection: a.selection.clone(),
            morpher: a.morpher.clone(),
            frs_id: frs.clone(),
            morphs: set.len(),
            tau: t.tau,
            mmpmr_all: all,
            mmpmr_any: any,
            prod_avg_mmpmr: prod_avg_mmpmr(&set, t.tau)?,
            fnmr: t.fnmr,
            rmmr: t.fnmr.map(|fnmr| rmmr(chosen, fnmr)),
        });

        let probes: Vec<f64> = set.iter().flat_map(|m| m.subjects.iter().flatten().copied()).collect();
        let mut rows = ecdf_rows("mated-morph", &probes)?;
        rows.extend(ecdf_rows("worst-subject-best-probe", &worst_subject_scores(&set))?);
        check_id(frs)?;
        let path = artifact(dir, &format!("ecdf-{frs}.csv"));
        write_csv(&path, ECDF_HEADER, &rows, &prov)?;
        written.push(path);
    }
    let path = artifact(dir, "metrics.csv");
    write_csv(
        &path,
        &[
            "selection", "morpher", "frs_id", "morphs", "tau", "mmpmr_all", "mmpmr_any", "prod_avg_mmpmr", "fnmr",
            "rmmr",
        ],
        &metrics,
        &prov,
    )?;
    written.insert(0, path);
    announce(&written.iter().map(|p| p.as_path()).collect::<Vec<_>>());
    Ok(())
}

#[derive(Debug, Serialize)]
struct MapReport {
    attempts: usize,
    rule: &'static str,
    frs_ids: Vec<String>,
    thresholds: Vec<f64>,
    morphs: usize,
    /// Rows: at least i successful attempts; columns: at least j systems.
    matrix: Vec<Vec<f64>>,
    map_avg: f64,
    weights: Vec<Vec<f64>>,
}

pub fn map(a: &MapArgs) -> Result<()> {
    let table = load_comparisons(&a.comparisons)?;
    let thresholds = resolve_thresholds(&a.thresholds)?;
    let taus = table
        .frs_ids
        .iter()
        .map(|frs| threshold_for(&thresholds, frs).map(|t| t.tau))
        .collect::<Result<Vec<_>>>()?;
    let rule = if a.map_paired { AttemptRule::Paired } else { AttemptRule::Count };
    let matrix = map_matrix(&table, &taus, a.attempts, rule)?;
    let weights = match &a.weights {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing weights {}", path.display()))?
        }
        None => default_map_weights(a.attempts, table.frs_ids.len()),
    };
    let avg = map_avg(&matrix, &weights)?;
    let report = MapReport {
        attempts: a.attempts,
        rule: if a.map_paired { "paired" } else { "count" },
        frs_ids: table.frs_ids.clone(),
        thresholds: taus,
        morphs: table.morphs.len(),
        matrix: matrix.values.clone(),
        map_avg: avg,
        weights,
    };
    let prov = Provenance::new("map", a)?;
    ensure_dir(&a.out.out_dir)?;
    let path = artifact(&a.out.out_dir, "map.json");
    write_json(&path, &report, &prov)?;
    eprintln!("MAPavg {avg}");
    announce(&[&path]);
    Ok(())
}

#[derive(Debug, Serialize)]
struct TrainReport {
    balance: morphkit::dmad::ClassBalance,
    train_subjects: usize,
    test_subjects: usize,
    gamma: f64,
    support_vectors: usize,
    iterations: usize,
    converged: bool,
    kkt_gap: f64,
    training_macer: f64,
    training_bpcer: f64,
}

pub fn dmad_train(a: &DmadTrainArgs) -> Result<()> {
    let records = load(&a.data)?;
    let morphs = load_morphs(&a.morphs, a.data.dim)?;
    ensure!(!morphs.is_empty(), "{} contains no morphs", a.morphs.display());
    let sets = build_training_sets(
        &records,
        &morphs,
        &TrainingSetConfig {
            split_fraction: a.split,
            seed: a.seed,
            bona_fide_pairs_per_subject: a.bona_fide_pairs,
        },
    )?;
    let params = SvmParams {
        c: a.svm.c,
        gamma: a.svm.gamma,
        tol: a.svm.tol,
        max_iterations: a.svm.max_iterations,
        seed: a.seed,
        cache_mib: a.svm.cache_mib,
    };
    let fit = DmadModel::fit(&sets.train, &params)?;
    let svm = &fit.model.svm;
    if !svm.converged {
        eprintln!("warning: solver stopped after {} iterations without converging", svm.iterations);
    }
    let (mut attack, mut bona) = (Vec::new(), Vec::new());
    for (sample, z) in sets.train.iter().zip(&fit.standardized) {
        let score = svm.decision(z);
        match sample.label {
            morphkit::SampleLabel::Morph => attack.push(score),
            morphkit::SampleLabel::BonaFide => bona.push(score),
        }
    }
    let report = TrainReport {
        balance: sets.balance.clone(),
        train_subjects: sets.train_subjects.len(),
        test_subjects: sets.test_subjects.len(),
        gamma: svm.kernel.gamma,
        support_vectors: svm.support_vectors.len(),
        iterations: svm.iterations,
        converged: svm.converged,
        kkt_gap: fit.training.kkt_gap,
        training_macer: macer(&attack, 0.0)?,
        training_bpcer: bpcer(&bona, 0.0)?,
    };
    let prov = Provenance::new("dmad-train", a)?;
    let mut model = fit.model;
    model.holdout_subjects = sets.test_subjects.clone();
    model.metadata = prov.value().clone();

    let dir = &a.out.out_dir;
    ensure_dir(dir)?;
    let model_path = artifact(dir, "dmad-model.json");
    let report_path = artifact(dir, "dmad-train.json");
    model.save(&model_path)?;
    write_json(&report_path, &report, &prov)?;
    eprintln!(
        "train {} bona fide / {} morph, test {} / {}",
        report.balance.train_bona_fide, report.balance.train_morph, report.balance.test_bona_fide, report.balance.test_morph
    );
    announce(&[&model_path, &report_path]);
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvalScoreRow {
    label: &'static str,
    score: f64,
    source: String,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    scope: &'static str,
    bona_fide_count: usize,
    morph_count: usize,
    macer_at_zero: f64,
    bpcer_at_zero: f64,
    bpcer10: f64,
    bpcer20: f64,
    bpcer100: f64,
}

pub fn dmad_eval(a: &DmadEvalArgs) -> Result<()> {
    let model = DmadModel::load(&a.model)?;
    ensure!(
        model.dim == a.data.dim,
        "model expects dimension {}, --dim is {}",
        model.dim,
        a.data.dim
    );
    let records = load(&a.data)?;
    let morphs = load_morphs(&a.morphs, a.data.dim)?;
    let holdout: BTreeSet<&str> = model.holdout_subjects.iter().map(String::as_str).collect();
    let scope = match a.scope {
        EvalScope::Holdout => {
            ensure!(!holdout.is_empty(), "model records no held-out subjects; use --scope all");
            "holdout"
        }
        EvalScope::All => "all",
    };
    let keep = |s: &str| matches!(a.scope, EvalScope::All) || holdout.contains(s);
    let mut samples = bona_fide_differentials(&records, a.bona_fide_pairs, keep)?;
    samples.extend(morph_differentials(&records, &morphs, |m| {
        keep(&m.subject_a) && keep(&m.subject_b)
    })?);

    let mut rows = Vec::with_capacity(samples.len());
    let (mut attack, mut bona) = (Vec::new(), Vec::new());
    for sample in &samples {
        let score = model.score(&sample.features)?;
        match sample.label {
            morphkit::SampleLabel::Morph => attack.push(score),
            morphkit::SampleLabel::BonaFide => bona.push(score),
        }
        rows.push(EvalScoreRow {
            label: sample.label.as_str(),
            score,
            source: sample.source.clone(),
        });
    }
    ensure!(!bona.is_empty(), "no bona fide samples in scope {scope}");
    ensure!(!attack.is_empty(), "no morph samples in scope {scope}");
    let report = EvalReport {
        scope,
        bona_fide_count: bona.len(),
        morph_count: attack.len(),
        macer_at_zero: macer(&attack, 0.0)?,
        bpcer_at_zero: bpcer(&bona, 0.0)?,
        bpcer10: bpcer_at_macer(&bona, &attack, 0.10)?,
        bpcer20: bpcer_at_macer(&bona, &attack, 0.05)?,
        bpcer100: bpcer_at_macer(&bona, &attack, 0.01)?,
    };
    let det = dmad_det(&bona, &attack)?;

    let prov = Provenance::new("dmad-eval", a)?;
    let dir = &a.out.out_dir;
    ensure_dir(dir)?;
    let scores_path = artifact(dir, "dmad-scores.csv");
    let det_path = artifact(dir, "dmad-det.csv");
    let report_path = artifact(dir, "dmad-report.json");
    write_csv(&scores_path, &["label", "score", "source"], &rows, &prov)?;
    write_csv(&det_path, &["threshold", "macer", "bpcer"], &det, &prov)?;
    write_json(&report_path, &report, &prov)?;
    eprintln!(
        "BPCER10 {} BPCER20 {} BPCER100 {}",
        report.bpcer10, report.bpcer20, report.bpcer100
    );
    announce(&[&scores_path, &det_path, &report_path]);
    Ok(())
}
