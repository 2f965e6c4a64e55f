use std::fs;
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use rastro_core::capture::{self, RunSpec};
use rastro_core::query::{self, FieldSelector, Predicate};
use rastro_core::record::{ActionStatus, LessonOrigin};
use rastro_core::report;
use rastro_core::synthesis::{self, LessonCandidate};
use rastro_core::{
    ActionDefinition, Error, EvaluationProcedure, HyperValue, Lesson, RecordKind, Result,
    Timestamp, TrailStore, TrainingRecord, TrainingStatus,
};

use crate::cli::{
    ActionCmd, Cli, Command, LessonCmd, ReportArgs, RunArgs, SynthArgs, SynthKind, TrainingCmd,
};

fn open(dir: Option<PathBuf>) -> Result<TrailStore> {
    TrailStore::open(capture::resolve_dir(dir)?)
}

fn timestamp(at: Option<&str>) -> Result<Option<Timestamp>> {
    at.map(str::parse).transpose()
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("output serializes")
    );
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    let dir = cli.dir;
    match cli.command {
        Command::Init { name } => {
            let root = dir.unwrap_or_else(|| PathBuf::from("."));
            let name = name.unwrap_or_else(|| {
                root.canonicalize()
                    .ok()
                    .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
                    .unwrap_or_else(|| "project".into())
            });
            let store = TrailStore::open_or_init(&root, &name)?;
            println!(
                "trail {:?} at {}",
                store.meta().name,
                store.root().display()
            );
        }
        Command::Action(ActionCmd::Add {
            message,
            task,
            resources,
            status,
            at,
            strict,
        }) => {
            let mut store = open(dir)?;
            let mut action = ActionDefinition::new(message);
            action.task = task.map(|t| store.taxonomy().canonical(&t)).transpose()?;
            action.resources = resources;
            action.status = status.parse::<ActionStatus>()?;
            action.registered_at = timestamp(at.as_deref())?;

            let threshold = store.settings().similarity_threshold;
            let similar = synthesis::redundancy_warning(&store, &action.description, threshold)?;
            for m in &similar {
                eprintln!(
                    "warning: similar to {} {} ({:.2}): {}",
                    m.kind, m.code, m.similarity, m.description
                );
            }
            if strict && !similar.is_empty() {
                return Err(Error::Invalid(
                    "similar records exist; not registered (--strict)".into(),
                ));
            }
            println!("{}", store.append(action)?);
        }
        Command::Lesson(LessonCmd::Add {
            message,
            task,
            origin,
            related,
            at,
        }) => {
            let mut store = open(dir)?;
            let mut lesson = Lesson::new(message);
            lesson.task = task.map(|t| store.taxonomy().canonical(&t)).transpose()?;
            lesson.origin = origin.parse::<LessonOrigin>()?;
            lesson.related_training_codes = related;
            lesson.registered_at = timestamp(at.as_deref())?;
            println!("{}", store.append(lesson)?);
        }
        Command::Training(TrainingCmd::Add { file }) => {
            let mut store = open(dir)?;
            let text = if file.as_os_str() == "-" {
                let mut s = String::new();
                std::io::stdin()
                    .read_to_string(&mut s)
                    .map_err(|e| Error::Io {
                        path: file.clone(),
                        source: e,
                    })?;
                s
            } else {
                fs::read_to_string(&file).map_err(|e| Error::Io {
                    path: file.clone(),
                    source: e,
                })?
            };
            let record: TrainingRecord = serde_json::from_str(&text)
                .map_err(|e| Error::Invalid(format!("{}: {e}", file.display())))?;
            println!("{}", store.append(record)?);
        }
        Command::Run(args) => return run_command(dir, args),
        Command::Query {
            kind,
            predicate,
            json,
        } => {
            let store = open(dir)?;
            let kind: RecordKind = kind.parse()?;
            let predicate = parse_predicate(&predicate)?;
            for r in query::filter(&store, kind, &predicate)? {
                if json {
                    println!("{}", r.to_json_line());
                } else {
                    println!("{}", report::chronology_line(&r));
                }
            }
        }
        Command::Stats {
            group_by,
            metric,
            filter,
            json,
        } => {
            let store = open(dir)?;
            let key: FieldSelector = group_by.parse()?;
            let metric: FieldSelector = metric.parse()?;
            let predicate = filter
                .as_deref()
                .map(str::parse::<Predicate>)
                .transpose()?
                .unwrap_or_default();
            let records = query::filter_records(&store.scan::<TrainingRecord>()?, &predicate);
            let stats = query::group_stats(&records, &key, &metric);
            if json {
                print_json(&serde_json::json!({
                    "group_by": key.as_str(),
                    "metric": metric.as_str(),
                    "groups": stats.groups,
                    "skipped": stats.skipped,
                }));
            } else {
                println!(
                    "{:<24} {:>5} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
                    key.as_str(),
                    "n",
                    "mean",
                    "std",
                    "min",
                    "q1",
                    "median",
                    "q3",
                    "max"
                );
                for (group, s) in &stats.groups {
                    println!(
                        "{group:<24} {:>5} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                        s.n, s.mean, s.sample_std, s.min, s.q1, s.median, s.q3, s.max
                    );
                }
                if stats.skipped > 0 {
                    println!(
                        "skipped {} records without {}",
                        stats.skipped,
                        metric.as_str()
                    );
                }
            }
        }
        Command::Top { metric, k, json } => {
            let store = open(dir)?;
            let metric: FieldSelector = metric.parse()?;
            let best = query::top_k(&store.scan::<TrainingRecord>()?, &metric, k.max(1));
            if json {
                let rows: Vec<_> = best
                    .iter()
                    .map(|r| serde_json::json!({"code": r.record.code, "score": r.score}))
                    .collect();
                print_json(&rows);
            } else {
                for r in best {
                    println!(
                        "{} {} {:.4}",
                        r.record.code, r.record.training_params.algorithm, r.score
                    );
                }
            }
        }
        Command::Report(ReportArgs { task, chronology }) => {
            let store = open(dir)?;
            let doc = match task {
                Some(t) => report::task_report(&store, &store.taxonomy().canonical(&t)?)?,
                None => {
                    debug_assert!(chronology);
                    report::chronology(&store)?
                }
            };
            print!("{doc}");
        }
        Command::Synthesize(args) => synthesize(dir, args)?,
        Command::Monitor {
            baseline,
            threshold,
            series,
            json,
        } => {
            let text = fs::read_to_string(&series).map_err(|e| Error::Io {
                path: series.clone(),
                source: e,
            })?;
            let points = synthesis::parse_series(&text)?;
            let report = synthesis::monitor_performance(&points, baseline, threshold)?;
            if json {
                print_json(&report);
            } else {
                println!("{}", report.message);
                for p in &report.flagged {
                    println!("flagged {} {:.1}%", p.timestamp, p.accuracy * 100.0);
                }
            }
        }
        Command::Export { mlschema } => {
            let store = open(dir)?;
            let record: TrainingRecord = store.read(mlschema)?;
            print!(
                "{}",
                report::render_mlschema(&report::export_mlschema(&record)?)
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_predicate(tokens: &[String]) -> Result<Predicate> {
    // a single quoted argument holding the whole predicate
    if let [only] = tokens {
        if only.contains(char::is_whitespace) {
            return only.parse();
        }
    }
    Predicate::parse_tokens(tokens)
}

fn run_command(dir: Option<PathBuf>, args: RunArgs) -> Result<ExitCode> {
    let mut store = open(dir)?;
    let mut spec = RunSpec::default();
    spec.training_params.algorithm = args.algorithm.unwrap_or_default();
    for p in &args.params {
        let (name, value) = p
            .split_once('=')
            .ok_or_else(|| Error::Invalid(format!("--param {p:?} is not NAME=VALUE")))?;
        spec.training_params.hyperparameters.insert(
            name.trim().to_string(),
            HyperValue::parse_literal(value.trim()),
        );
    }
    spec.data_used.dataset_description = args.dataset.unwrap_or_default();
    spec.data_used.selection_criteria = args.selection;
    spec.data_used.feature_names = args.features;
    spec.test_params.evaluation_procedure = match (args.cv, args.holdout) {
        (Some(cv), _) => {
            let bad = || Error::Invalid(format!("--cv {cv:?} is not PARTITIONS,REPETITIONS"));
            let (p, r) = cv.split_once(',').ok_or_else(bad)?;
            Some(EvaluationProcedure::CrossValidation {
                partitions: p.trim().parse().map_err(|_| bad())?,
                repetitions: r.trim().parse().map_err(|_| bad())?,
            })
        }
        (None, Some(h)) => {
            let (fraction, rest) = h.split_once(',').unwrap_or((h.as_str(), ""));
            Some(EvaluationProcedure::Holdout {
                fraction: fraction
                    .trim()
                    .parse()
                    .map_err(|_| Error::Invalid(format!("--holdout {h:?} is not a fraction")))?,
                stratified: rest.trim() == "stratified",
            })
        }
        (None, None) => None,
    };

    let outcome = capture::wrap_command(&mut store, &args.command, spec)?;
    println!("{}", outcome.code);
    Ok(if outcome.status == TrainingStatus::Succeeded {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn synthesize(dir: Option<PathBuf>, args: SynthArgs) -> Result<()> {
    let store = open(dir)?;
    let settings = store.settings().clone();
    let trainings = store.scan::<TrainingRecord>()?;
    let metric: FieldSelector = args.metric.parse()?;
    let wanted = |k: SynthKind| args.kind.is_empty() || args.kind.contains(&k);

    let mut candidates: Vec<LessonCandidate> = Vec::new();
    if wanted(SynthKind::EqualMetrics) {
        candidates.extend(synthesis::detect_equal_metrics(
            &trainings,
            settings.equality_tolerance,
        ));
    }
    if wanted(SynthKind::Improvement) {
        match &args.varied_key {
            Some(key) => candidates.extend(synthesis::attribute_improvement(
                &trainings,
                &key.parse()?,
                &metric,
                settings.min_improvement_points,
            )),
            None if !args.kind.is_empty() => {
                return Err(Error::Invalid("improvement needs --varied-key".into()))
            }
            None => {}
        }
    }
    if wanted(SynthKind::BestSetting) {
        match &args.param {
            Some(param) => candidates.extend(synthesis::best_setting(
                &trainings,
                &param.parse()?,
                &metric,
                settings.equality_tolerance,
            )),
            None if !args.kind.is_empty() => {
                return Err(Error::Invalid("best-setting needs --param".into()))
            }
            None => {}
        }
    }
    if wanted(SynthKind::Redundancy) {
        match &args.draft {
            Some(draft) => candidates.extend(
                synthesis::redundancy_warning(&store, draft, settings.similarity_threshold)?
                    .iter()
                    .map(|m| m.to_candidate()),
            ),
            None if !args.kind.is_empty() => {
                return Err(Error::Invalid("redundancy needs --draft".into()))
            }
            None => {}
        }
    }

    if args.json {
        print_json(&candidates);
        return Ok(());
    }
    if candidates.is_empty() {
        println!("no candidates");
    }
    for (i, c) in candidates.iter().enumerate() {
        let evidence = if c.evidence.is_empty() {
            String::new()
        } else {
            let codes: Vec<String> = c.evidence.iter().map(u64::to_string).collect();
            format!(" [trainings {}]", codes.join(", "))
        };
        println!("{}. ({}) {}{evidence}", i + 1, c.kind, c.description);
    }
    Ok(())
}
