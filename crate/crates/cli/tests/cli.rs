use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn pratyaya(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_pratyaya"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn tiny_corpus(dir: &Path) -> PathBuf {
    let stems = ["tul", "paW", "gam", "kar", "BU", "pac", "nI", "vad", "likh", "sev"];
    let suffixes = [("lyuw", "anam"), ("tavya", "tavyam"), ("tfc", "tf"), ("Satf~", "at")];
    let mut text = String::from("# stem\tsuffix\tpada\tcategory\n");
    for stem in stems {
        for (suffix, ending) in suffixes {
            text.push_str(&format!("{stem}\t{suffix}\t{stem}{ending}\tkrit\n"));
        }
    }
    text.push_str("Dana\tvatup\tDanavat\ttaddhit\n");
    let path = dir.join("corpus.tsv");
    std::fs::write(&path, text).unwrap();
    path
}

const FAST: [&str; 8] = ["--epochs", "2", "--latent-dim", "8", "--batch-size", "4", "--init-scale", "0.3"];

#[test]
fn missing_corpus_is_a_usage_error_naming_the_path() {
    let o = pratyaya(&["stats", "--corpus", "/no/such/corpus.tsv"], "");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/corpus.tsv"), "{}", stderr(&o));
}

#[test]
fn stats_on_empty_file_reports_zero_totals() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.tsv");
    std::fs::write(&path, "").unwrap();
    let o = pratyaya(&["stats", "--corpus", path.to_str().unwrap(), "--format", "kv"], "");
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "total.krit=0\ntotal.taddhit=0\nduplicates=0\n");
}

#[test]
fn stats_counts_suffixes() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = tiny_corpus(dir.path());
    let o = pratyaya(&["stats", "--corpus", corpus.to_str().unwrap(), "--format", "kv"], "");
    let out = stdout(&o);
    assert!(out.contains("krit.lyuw=10\n"), "{out}");
    assert!(out.contains("taddhit.vatup=1\n"));
    assert!(out.contains("total.krit=40\n"));
}

#[test]
fn translit_both_ways() {
    let o = pratyaya(&["translit"], "shiva\npaTh\n");
    assert!(o.status.success());
    assert_eq!(stdout(&o), "Siva\npaW\n");
    let o = pratyaya(&["translit", "--from", "slp1"], "Endra\n");
    assert_eq!(stdout(&o), "aindra\n");
    let o = pratyaya(&["translit", "--from", "slp1"], "a1\n");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 1"));
}

#[test]
fn bad_flag_value_exits_2() {
    let o = pratyaya(&["train", "--corpus", "x.tsv", "--epochs", "many"], "");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("epochs"));
}

#[test]
fn train_predict_evaluate_round() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = tiny_corpus(dir.path());
    let corpus = corpus.to_str().unwrap();
    let ckpt = dir.path().join("m.ckpt");
    let ckpt = ckpt.to_str().unwrap();

    let mut args = vec!["train", "--corpus", corpus, "--checkpoint", ckpt];
    args.extend(FAST);
    let o = pratyaya(&args, "");
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(o.stdout.is_empty(), "progress goes to stderr only");
    assert!(stderr(&o).contains("24 training records, 6 test records"), "{}", stderr(&o));
    let history = std::fs::read_to_string(format!("{ckpt}.history.tsv")).unwrap();
    assert_eq!(history.lines().count(), 3);
    assert!(history.starts_with("epoch\ttrain_loss\tvalidation_loss\n"));

    // empty stdin, empty output
    let o = pratyaya(&["predict", "--checkpoint", ckpt], "");
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "");

    let o = pratyaya(&["predict", "--checkpoint", ckpt], "tul+lyuw\n\ngam+tfc\n");
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 3);
    assert_eq!(stdout(&o).lines().nth(1), Some(""));

    let o = pratyaya(&["predict", "--checkpoint", ckpt, "--itrans", "tul+lyuw"], "");
    assert!(o.status.success(), "{}", stderr(&o));

    let o = pratyaya(&["predict", "--checkpoint", ckpt, "zzz+lyuw", "tul+lyuw"], "");
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with('\n'));
    assert!(stderr(&o).contains("input 1"));

    let o = pratyaya(&["predict", "--checkpoint", ckpt, "--direction", "split", "tulanam"], "");
    assert_eq!(o.status.code(), Some(2));

    let report = dir.path().join("report.txt");
    let tsv = dir.path().join("report.tsv");
    let o = pratyaya(
        &[
            "evaluate",
            "--corpus",
            corpus,
            "--checkpoint",
            ckpt,
            "--report",
            report.to_str().unwrap(),
            "--report-tsv",
            tsv.to_str().unwrap(),
        ],
        "",
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("task"), "{out}");
    assert!(out.contains("/ 6 ("), "{out}");
    assert!(out.contains("3718 / 4396 (84.58 %)"), "published row shown verbatim: {out}");
    assert_eq!(std::fs::read_to_string(&report).unwrap(), out);
    assert!(std::fs::read_to_string(&tsv).unwrap().lines().count() >= 2);

    // same config, same bytes
    let again = pratyaya(&["evaluate", "--corpus", corpus, "--checkpoint", ckpt], "");
    assert_eq!(stdout(&again), out);

    let o = pratyaya(&["evaluate", "--corpus", corpus, "--checkpoint", ckpt, "--split-seed", "5"], "");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("split mismatch"), "{}", stderr(&o));

    let o = pratyaya(&["evaluate", "--corpus", corpus, "--checkpoint", ckpt, "--min-accuracy", "1.01"], "");
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn training_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = tiny_corpus(dir.path());
    let run = |name: &str| {
        let ckpt = dir.path().join(name);
        let mut args = vec!["train", "--corpus", corpus.to_str().unwrap(), "--checkpoint", ckpt.to_str().unwrap()];
        args.extend(FAST);
        assert!(pratyaya(&args, "").status.success());
        std::fs::read(&ckpt).unwrap()
    };
    assert_eq!(run("a.ckpt"), run("b.ckpt"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = tiny_corpus(dir.path());
    let ckpt = dir.path().join("m.ckpt");
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        format!(
            "corpus = {}\ncheckpoint = {}\nepochs = 3\nlatent_dim = 8\nbatch_size = 4\ninit_scale = 0.3\n",
            corpus.display(),
            ckpt.display()
        ),
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    assert!(pratyaya(&["--config", cfg, "train"], "").status.success());
    let history = std::fs::read_to_string(format!("{}.history.tsv", ckpt.display())).unwrap();
    assert_eq!(history.lines().count(), 4);
    assert!(pratyaya(&["--config", cfg, "train", "--epochs", "1"], "").status.success());
    let history = std::fs::read_to_string(format!("{}.history.tsv", ckpt.display())).unwrap();
    assert_eq!(history.lines().count(), 2);

    std::fs::write(dir.path().join("bad.cfg"), "epochs 3\n").unwrap();
    let o = pratyaya(&["--config", dir.path().join("bad.cfg").to_str().unwrap(), "train"], "");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.cfg:1"));
}

#[test]
fn pinned_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = tiny_corpus(dir.path());
    let ckpt = dir.path().join("m.ckpt");
    let base = ["train", "--corpus", corpus.to_str().unwrap(), "--checkpoint", ckpt.to_str().unwrap()];
    let mut args = base.to_vec();
    args.extend(FAST);
    args.extend(["--source-max", "17", "--target-max", "18"]);
    let o = pratyaya(&args, "");
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("lengths 17/18"), "{}", stderr(&o));
    let mut args = base.to_vec();
    args.extend(FAST);
    args.extend(["--source-max", "3"]);
    let o = pratyaya(&args, "");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("shorter than the corpus needs"));
}
