use std::fs;
use std::path::Path;

use inforefine::generators::CorpusTemplate;
use inforefine::harness::{
    cmd_control, cmd_fit, cmd_generate, cmd_predict, cmd_refine, cmd_report, cmd_solve, ExperimentConfig, RefineTarget,
    Report, Split, Stat, SERIES_HEADER,
};
use inforefine::metamodel::{CostModel, TRACE_HEADER};
use inforefine::refinement::PROFILE_HEADER;
use inforefine::Error;

fn small_config(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig { seed: 11, out: out.to_path_buf(), parallelism: 3, ..Default::default() };
    cfg.training.count = 10;
    cfg.training.template = CorpusTemplate::OneId { n: 4, b: 0.7794 };
    cfg.test.count = 2;
    cfg.test.template = CorpusTemplate::Maze { width: 2, height: 2, stages: 2, noise: vec![0.0, 0.1] };
    cfg.refine.budget = 20;
    cfg.refine.test_budget = 6;
    cfg.fit.step = 2;
    cfg
}

fn header(path: &Path) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().map(String::from).collect()
}

fn rows(path: &Path) -> usize {
    csv::Reader::from_path(path).unwrap().records().inspect(|r| assert!(r.is_ok())).count()
}

fn pipeline(cfg: &ExperimentConfig) -> Report {
    cmd_generate(cfg, &[Split::Training, Split::Test]).unwrap();
    cmd_refine(cfg, &RefineTarget::Corpus(Split::Training), None).unwrap();
    cmd_refine(cfg, &RefineTarget::Corpus(Split::Test), None).unwrap();
    for &d in &cfg.fit.degrees {
        cmd_fit(&cfg.profile_dir(Split::Training), d, cfg.fit.step, &cfg.model_path(d)).unwrap();
    }
    cmd_predict(&cfg.model_paths(), &cfg.profile_dir(Split::Test), &cfg.prediction_dir(Split::Test)).unwrap();
    cmd_report(&cfg.prediction_dir(Split::Test), &cfg.out.join("profiles"), &cfg.out).unwrap()
}

#[test]
fn generate_writes_corpus_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let m = cmd_generate(&cfg, &[Split::Training]).unwrap();
    assert_eq!(m[0].entries.len(), 10);
    let corpus = cfg.corpus_dir(Split::Training);
    assert_eq!(fs::read_dir(&corpus).unwrap().count(), 11);
    let first = fs::read(corpus.join("manifest.json")).unwrap();
    let file = corpus.join(&m[0].entries[3].path);
    let before = fs::read(&file).unwrap();
    cmd_generate(&cfg, &[Split::Training]).unwrap();
    assert_eq!(fs::read(corpus.join("manifest.json")).unwrap(), first);
    assert_eq!(fs::read(&file).unwrap(), before);
}

#[test]
fn empty_corpus_writes_only_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.training.count = 0;
    cmd_generate(&cfg, &[Split::Training]).unwrap();
    let names: Vec<_> = fs::read_dir(cfg.corpus_dir(Split::Training)).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, ["manifest.json"]);
}

#[test]
fn refine_outputs_follow_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    cmd_generate(&cfg, &[Split::Training, Split::Test]).unwrap();
    let train = cmd_refine(&cfg, &RefineTarget::Corpus(Split::Training), None).unwrap();
    for o in &train {
        let star = o.ev_star.expect("small 1-ID problems are solved");
        assert!(o.final_ev <= star + 1e-9);
        assert_eq!(header(&o.csv), PROFILE_HEADER);
        assert_eq!(rows(&o.csv), o.refinements + 1);
    }
    let test = cmd_refine(&cfg, &RefineTarget::Corpus(Split::Test), None).unwrap();
    assert!(test.iter().all(|o| o.refinements <= 6));

    let problem = cfg.corpus_dir(Split::Training).join("train-0000.json");
    let single = cmd_refine(&cfg, &RefineTarget::Problem(problem), Some(0)).unwrap();
    assert_eq!(single[0].refinements, 0);
    assert_eq!(rows(&single[0].csv), 1);
}

#[test]
fn fit_rejects_short_profiles_and_missing_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    cmd_generate(&cfg, &[Split::Training]).unwrap();
    cmd_refine(&cfg, &RefineTarget::Corpus(Split::Training), Some(1)).unwrap();
    let out = dir.path().join("m.json");
    let err = cmd_fit(&cfg.profile_dir(Split::Training), 1, 5, &out).unwrap_err();
    assert!(matches!(err, Error::ProfileTooShort { step: 5, .. }), "{err}");
    let err = cmd_fit(&dir.path().join("absent"), 1, 0, &out).unwrap_err();
    assert!(err.to_string().contains("absent"), "{err}");
    for i in 5..10 {
        fs::remove_file(cfg.profile_dir(Split::Training).join(format!("train-{i:04}.profile.json"))).unwrap();
    }
    let err = cmd_fit(&cfg.profile_dir(Split::Training), 3, 0, &out).unwrap_err();
    assert!(matches!(err, Error::TooFewPoints { got: 5, .. }), "{err}");
}

#[test]
fn pipeline_is_deterministic_and_report_recomputes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (ca, cb) = (small_config(a.path()), small_config(b.path()));
    let ra = pipeline(&ca);
    let rb = pipeline(&cb);
    for d in &ca.fit.degrees {
        assert_eq!(fs::read(ca.model_path(*d)).unwrap(), fs::read(cb.model_path(*d)).unwrap());
    }
    assert_eq!(ra, rb);

    let model = fs::read_to_string(ca.model_path(1)).unwrap();
    let manifest = fs::read(ca.corpus_dir(Split::Training).join("manifest.json")).unwrap();
    assert!(model.contains(&inforefine::harness::sha256_hex(&manifest)));

    assert_eq!(ra.problems.len(), 2);
    assert_eq!(ra.table().lines().count(), 1 + 2 + 1 + ra.models.len());
    for (k, agg) in ra.aggregate.iter().enumerate() {
        let mut cur = Vec::new();
        let mut best = Vec::new();
        for p in &ra.problems {
            let col = &p.models[k];
            let pred: Vec<f64> = fs::read_to_string(ca.prediction_dir(Split::Test).join(format!("{}.prediction.json", p.problem)))
                .map(|t| serde_json::from_str::<serde_json::Value>(&t).unwrap())
                .map(|v| v["rows"].as_array().unwrap().iter().map(|r| r["ev_i"].as_f64().unwrap()).collect())
                .unwrap();
            cur.extend(col.trajectory.iter().zip(&pred).map(|(e, x)| e - x));
            best.extend(col.trajectory.iter().map(|e| e - p.best_known));
        }
        let (c, b) = (Stat::of(&cur), Stat::of(&best));
        assert!((agg.gap_current.mean - c.mean).abs() < 1e-12 && (agg.gap_current.std - c.std).abs() < 1e-12);
        assert!((agg.gap_best.mean - b.mean).abs() < 1e-12 && (agg.gap_best.std - b.std).abs() < 1e-12);
        let est: Vec<f64> = ra.problems.iter().map(|p| p.models[k].estimate).collect();
        assert!((agg.estimate.mean - Stat::of(&est).mean).abs() < 1e-12);
    }
    assert!(a.path().join("report.json").exists() && a.path().join("report.txt").exists());
}

#[test]
fn report_handles_empty_and_missing_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let preds = dir.path().join("preds");
    fs::create_dir(&preds).unwrap();
    let r = cmd_report(&preds, &dir.path().join("profiles"), dir.path()).unwrap();
    assert!(r.problems.is_empty());
    let err = cmd_report(&dir.path().join("nope"), dir.path(), dir.path()).unwrap_err();
    assert!(err.to_string().contains("nope"));
}

#[test]
fn single_model_report_has_two_columns() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.fit.degrees = vec![1];
    cfg.test.count = 1;
    let r = pipeline(&cfg);
    assert_eq!(r.problems.len(), 1);
    let line = r.table().lines().nth(1).unwrap().to_string();
    assert_eq!(line.split_whitespace().count(), 3);
}

#[test]
fn control_writes_trace_series_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    pipeline(&cfg);
    let problem = cfg.corpus_dir(Split::Test).join("mazes-0001.json");
    cfg.control.cost = CostModel::Exponential { a: 0.001, r: 1.5 };
    let out = cmd_control(&problem, &cfg.model_paths(), &cfg.control, &cfg.control_dir()).unwrap();
    let trace = cfg.control_dir().join("mazes-0001.trace.csv");
    assert_eq!(header(&trace), TRACE_HEADER);
    assert_eq!(rows(&trace), out.trace.rows.len());
    let series = header(&cfg.control_dir().join("mazes-0001.series.csv"));
    assert_eq!(series.len(), SERIES_HEADER.len() + cfg.fit.degrees.len());
    let summary = fs::read_to_string(cfg.control_dir().join("mazes-0001.summary.txt")).unwrap();
    assert!(summary.contains("stop step") && summary.contains("EV_II maximized at step"));
    assert!(cfg.control_dir().join("mazes-0001.svg").exists());

    cfg.control.budget = 0;
    cfg.control.cost = CostModel::Zero;
    let zero = cmd_control(&problem, &cfg.model_paths(), &cfg.control, &cfg.control_dir()).unwrap();
    assert_eq!(zero.trace.rows.len(), 1);
}

#[test]
fn solve_writes_the_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    cmd_generate(&cfg, &[Split::Training]).unwrap();
    let (s, path) = cmd_solve(&cfg, &cfg.corpus_dir(Split::Training).join("train-0002.json"), None).unwrap();
    assert!(path.exists());
    assert!(s.value > 0.0 && s.value <= 1.0);
}

#[test]
fn malformed_problem_is_a_parse_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"variables": [], "parents": {}, "decisions": {"order": [], "info_sets": {}}, "value_tree": {"value": 0.0}}"#).unwrap();
    let err = cmd_refine(&cfg, &RefineTarget::Problem(bad), None).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("cpts"), "{err}");
}
