use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

const CORPUS: &str = "the lower lowest newer wider\n\
hello world! the newest widest\n\
中文2019年。 привет мир\n\
the low new wide lowest newest\n";

fn bbpe(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_bbpe"))
        .args(args)
        .env_remove("BBPE_VOCAB_SIZE")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(stdin.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn train(dir: &Path, threads: &str) -> (String, String) {
    let corpus = dir.join("c.txt");
    fs::write(&corpus, CORPUS).unwrap();
    let vocab = dir.join(format!("v{threads}.txt"));
    let merges = dir.join(format!("m{threads}.tsv"));
    let o = bbpe(
        &[
            "--threads",
            threads,
            "train",
            "--input",
            corpus.to_str().unwrap(),
            "--vocab-size",
            "540",
            "--out",
            vocab.to_str().unwrap(),
            "--merges",
            merges.to_str().unwrap(),
        ],
        "",
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    (
        vocab.to_str().unwrap().to_string(),
        merges.to_str().unwrap().to_string(),
    )
}

#[test]
fn trained_vocab_has_one_line_per_entry() {
    let dir = tempfile::tempdir().unwrap();
    let (vocab, _) = train(dir.path(), "1");
    let text = fs::read_to_string(&vocab).unwrap();
    assert!(text.lines().count() <= 540);
    assert!(text.lines().count() > 517);
    assert!(text.ends_with('\n'));
    assert!(Path::new(&format!("{vocab}.meta")).exists());
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let (v1, m1) = train(dir.path(), "1");
    let (v8, m8) = train(dir.path(), "8");
    assert_eq!(fs::read(v1).unwrap(), fs::read(v8).unwrap());
    assert_eq!(fs::read(m1).unwrap(), fs::read(m8).unwrap());
}

#[test]
fn tokenize_round_trips_through_detokenize() {
    let dir = tempfile::tempdir().unwrap();
    let (vocab, merges) = train(dir.path(), "2");
    let input = "the lowest widest\n中文2019年。\nunseen Ωmega\n";
    let expect = "the lowest widest\n中 文 2019 年 。\nunseen Ωmega\n";

    let toks = bbpe(&["tokenize", "--vocab", &vocab], input);
    assert!(toks.status.success());
    let back = bbpe(&["detokenize", "--vocab", &vocab], &stdout(&toks));
    assert_eq!(stdout(&back), expect);

    let ids = bbpe(&["tokenize", "--vocab", &vocab, "--ids"], input);
    let back = bbpe(&["detokenize", "--vocab", &vocab, "--ids"], &stdout(&ids));
    assert_eq!(stdout(&back), expect);

    let replay = bbpe(
        &[
            "tokenize",
            "--vocab",
            &vocab,
            "--merge-replay",
            "--merges",
            &merges,
        ],
        input,
    );
    assert!(replay.status.success());
    let back = bbpe(&["detokenize", "--vocab", &vocab], &stdout(&replay));
    assert_eq!(stdout(&back), expect);
}

#[test]
fn empty_stdin_gives_empty_output() {
    let dir = tempfile::tempdir().unwrap();
    let (vocab, _) = train(dir.path(), "1");
    for args in [
        vec!["tokenize", "--vocab", vocab.as_str()],
        vec!["detokenize", "--vocab", vocab.as_str()],
        vec!["detokenize"],
    ] {
        let o = bbpe(&args, "");
        assert!(o.status.success());
        assert!(o.stdout.is_empty());
    }
}

#[test]
fn exit_codes() {
    assert_eq!(bbpe(&["no-such-command"], "").status.code(), Some(1));
    assert_eq!(bbpe(&["train", "--out", "x"], "").status.code(), Some(1));
    assert_eq!(bbpe(&["--help"], "").status.code(), Some(0));

    let bad = bbpe(&["detokenize"], "##41 42\n");
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("line 1"));

    let bad = bbpe(&["detokenize"], "E4 ##B8\n");
    assert_eq!(bad.status.code(), Some(2));

    let missing = bbpe(&["tokenize", "--vocab", "/nonexistent/vocab.txt"], "x\n");
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn vocab_diff_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (vocab, _) = train(dir.path(), "1");
    let external = dir.path().join("wp.txt");
    fs::write(&external, "[PAD]\n[UNK]\nthe\n##st\nмир\n中\n").unwrap();
    let o = bbpe(
        &[
            "vocab-diff",
            "--a",
            &vocab,
            "--b",
            external.to_str().unwrap(),
        ],
        "",
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = stdout(&o);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("label,countA,countB,rel_diff"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(rows.iter().all(|r| r.len() == 4));
    let latin = rows.iter().find(|r| r[0] == "latin").unwrap();
    assert_eq!(latin[2], "2");
    let a: f64 = latin[1].parse().unwrap();
    let rel: f64 = latin[3].parse().unwrap();
    assert!((rel - (a - 2.0) / a).abs() < 1e-9);
}

#[test]
fn analyze_freq_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let (vocab, _) = train(dir.path(), "1");
    let corpus = dir.path().join("c.txt");
    let svg = dir.path().join("f.svg");
    let o = bbpe(
        &[
            "analyze-freq",
            "--vocab",
            &vocab,
            "--corpus",
            corpus.to_str().unwrap(),
            "--svg",
            svg.to_str().unwrap(),
        ],
        "",
    );
    assert!(o.status.success());
    let csv = stdout(&o);
    assert!(csv.starts_with("token,count\n"));
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("below 1:"));

    let o = bbpe(
        &["compare", "--a", &vocab, "--b", &vocab, "--text", "lowest"],
        "",
    );
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("A [")).count(), 1);
}
