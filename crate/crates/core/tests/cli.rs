use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sidecode::linalg::SparseMatrix;
use sidecode::polar::PolarCode;
use sidecode::source::JointSourceLaw;

fn sidecode(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sidecode"))
        .args(args)
        .current_dir(dir)
        .env_remove("SIDECODE_THREADS")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = sidecode(dir, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

/// Rank over GF(p) by plain row reduction.
fn rank_mod(mut rows: Vec<Vec<u32>>, p: u32) -> usize {
    let cols = rows.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..rows.len()).find(|&r| rows[r][c] != 0) else { continue };
        rows.swap(rank, piv);
        let inv = (1..p).find(|v| v * rows[rank][c] % p == 1).unwrap();
        let pivot: Vec<u32> = rows[rank].iter().map(|v| v * inv % p).collect();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && row[c] != 0 {
                let f = row[c];
                for (x, y) in row.iter_mut().zip(&pivot) {
                    *x = (*x + p * p - f * y) % p;
                }
            }
        }
        rows[rank] = pivot;
        rank += 1;
    }
    rank
}

#[test]
fn gen_matrix_is_full_rank_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(dir.path(), &["gen", "matrix", "--p", "2", "--n", "8", "--l", "4", "--w", "3", "--seed", "1"]);
    let a: SparseMatrix = text.parse().unwrap();
    assert_eq!(a.to_string(), text);
    let dense: Vec<Vec<u32>> = (0..a.rows()).map(|i| (0..a.cols()).map(|j| a.get(i, j) as u32).collect()).collect();
    assert_eq!(rank_mod(dense, 2), 4);
    assert!((0..4).all(|i| a.row(i).len() <= 3));
}

#[test]
fn gen_law_bsc_entries() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(dir.path(), &["gen", "law", "--p", "2", "--bsc", "0.11"]);
    let law: JointSourceLaw = text.parse().unwrap();
    assert_eq!(law.to_string(), text);
    for (x, y, want) in [(0, 0, 0.445), (0, 1, 0.055), (1, 0, 0.055), (1, 1, 0.445)] {
        assert!((law.prob(x, y) - want).abs() < 1e-15);
    }
}

#[test]
fn non_prime_field_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = sidecode(dir.path(), &["gen", "law", "--p", "4", "--bsc", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("prime"));
    let o = sidecode(dir.path(), &["gen", "law", "--p", "2", "--bsc", "0.1", "--threads", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn noiseless_round_trip_for_every_method() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "matrix", "--p", "3", "--n", "6", "--l", "3", "--seed", "2", "-o", "a.txt"]);
    ok(d, &["gen", "law", "--p", "3", "--noiseless", "-o", "law.txt"]);
    ok(d, &["gen", "sample", "--law", "law.txt", "--n", "6", "--seed", "5", "-o", "s.txt"]);
    ok(d, &["encode", "--matrix", "a.txt", "--input", "s.txt", "-o", "c.txt"]);
    let x = fs::read_to_string(d.join("s.txt")).unwrap().lines().next().unwrap().to_string();
    for m in ["map", "typical", "smap", "sc", "ssc"] {
        let out = ok(d, &["decode", "--method", m, "--matrix", "a.txt", "--law", "law.txt", "--codeword", "c.txt", "--side", "s.txt"]);
        assert!(out.contains("success true"), "{m}: {out}");
        assert!(out.lines().any(|l| l == x), "{m}: {out}");
    }
    ok(d, &["polar", "construct", "--law", "law.txt", "--k", "3", "-o", "p.txt"]);
    ok(d, &["gen", "sample", "--law", "law.txt", "--n", "8", "--seed", "5", "-o", "s8.txt"]);
    ok(d, &["encode", "--code", "p.txt", "--input", "s8.txt", "-o", "c8.txt"]);
    let x8 = fs::read_to_string(d.join("s8.txt")).unwrap().lines().next().unwrap().to_string();
    for m in ["polar-sc", "polar-ssc"] {
        let out = ok(d, &["decode", "--method", m, "--code", "p.txt", "--law", "law.txt", "--codeword", "c8.txt", "--side", "s8.txt"]);
        assert!(out.lines().any(|l| l == x8), "{m}: {out}");
    }
}

#[test]
fn decode_echoes_method_seed_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "decode", "--method", "ssc", "--seed", "7", "--trace",
        "--matrix", &fixture("map_a.txt"), "--law", &fixture("map_law.txt"),
        "--codeword", &fixture("map_c.txt"), "--side", &fixture("map_y.txt"),
    ];
    let first = ok(dir.path(), &args);
    assert_eq!(first, ok(dir.path(), &args));
    let lines: Vec<&str> = first.lines().collect();
    assert_eq!(lines[0], "method ssc");
    assert_eq!(lines[1], "seed 7");
    assert!(lines[2].starts_with("success "));
    // two free coordinates, one trace line each after the header
    let header = lines.iter().position(|l| l.starts_with("trace")).unwrap();
    assert_eq!(lines.len() - header - 1, 2);
}

#[test]
fn map_fixture_matches_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(
        dir.path(),
        &["decode", "--method", "map", "--matrix", &fixture("map_a.txt"), "--law", &fixture("map_law.txt"),
          "--codeword", &fixture("map_c.txt"), "--side", &fixture("map_y.txt")],
    );
    let expected = fs::read_to_string(fixture("map_expected.txt")).unwrap();
    assert!(out.lines().any(|l| l == expected.trim()), "{out}");

    // brute force: the heaviest x with A x = c1
    let a: SparseMatrix = fs::read_to_string(fixture("map_a.txt")).unwrap().parse().unwrap();
    let law: JointSourceLaw = fs::read_to_string(fixture("map_law.txt")).unwrap().parse().unwrap();
    let (c1, y) = ([1u8, 0], [0u8, 1, 1, 0]);
    let mut best = (0.0, vec![]);
    for r in 0..16u8 {
        let x: Vec<u8> = (0..4).map(|j| (r >> (3 - j)) & 1).collect();
        let cx: Vec<u8> = (0..2).map(|i| a.row(i).iter().map(|&(j, v)| v * x[j]).sum::<u8>() % 2).collect();
        let w: f64 = x.iter().zip(&y).map(|(&a, &b)| law.prob(a, b)).product();
        if cx == c1 && w > best.0 {
            best = (w, x);
        }
    }
    let want: String = std::iter::once("x".to_string()).chain(best.1.iter().map(|v| v.to_string())).collect::<Vec<_>>().join(" ");
    assert_eq!(expected.trim(), want);
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = sidecode(dir.path(), &["verify", "--instances", "8", "--seed", "11"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(csv.starts_with("bound_id,lhs,rhs,satisfied,method,trials,ci_low,ci_high\n"));
    let o = sidecode(dir.path(), &["verify", "--instances", "8", "--seed", "11", "--corrupt-decoder"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("VIOLATION"));
    let o = sidecode(
        dir.path(),
        &["verify", "--matrix", &fixture("map_a.txt"), "--law", &fixture("map_law.txt")],
    );
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn oversized_exact_model_is_a_budget_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "matrix", "--p", "2", "--n", "40", "--l", "20", "--seed", "1", "-o", "a.txt"]);
    ok(d, &["gen", "law", "--p", "2", "--bsc", "0.1", "-o", "law.txt"]);
    ok(d, &["gen", "sample", "--law", "law.txt", "--n", "40", "--seed", "1", "-o", "s.txt"]);
    ok(d, &["encode", "--matrix", "a.txt", "--input", "s.txt", "-o", "c.txt"]);
    let o = sidecode(d, &["decode", "--method", "map", "--matrix", "a.txt", "--law", "law.txt", "--codeword", "c.txt", "--side", "s.txt"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    // sum-product evaluation has no enumeration budget
    let o = sidecode(
        d,
        &["decode", "--method", "sc", "--iterations", "10", "--matrix", "a.txt", "--law", "law.txt", "--codeword", "c.txt", "--side", "s.txt"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn polar_construct_matches_exhaustive_z() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let theta = 0.11;
    ok(d, &["gen", "law", "--p", "2", "--bsc", "0.11", "-o", "law.txt"]);
    let text = ok(d, &["polar", "construct", "--law", "law.txt", "--k", "4", "--beta", "0.3"]);
    let code: PolarCode = text.parse().unwrap();
    assert_eq!(code.to_string(), text);

    // By symmetry the statistics do not depend on y, so condition on y = 0:
    // x is i.i.d. Bernoulli(theta) and c_i sums x_j over the j containing i.
    let n = 16usize;
    let mut z = vec![0.0; n];
    for (i, zi) in z.iter_mut().enumerate() {
        let mut mass: std::collections::HashMap<u32, [f64; 2]> = Default::default();
        for r in 0u32..1 << n {
            let w: f64 = (0..n).map(|j| if r >> j & 1 == 1 { theta } else { 1.0 - theta }).product();
            let c = |k: usize| (0..n).filter(|&j| j & k == k).map(|j| r >> j & 1).sum::<u32>() % 2;
            let prefix = (0..i).fold(0u32, |acc, k| acc | c(k) << k);
            mass.entry(prefix).or_default()[c(i) as usize] += w;
        }
        *zi = mass.values().map(|m| 2.0 * (m[0] * m[1]).sqrt()).sum();
    }
    for (i, (&got, want)) in code.z().iter().zip(&z).enumerate() {
        assert!((got - want).abs() < 1e-12, "index {i}: {got} vs {want}");
    }
    let threshold = 2f64.powf(-(16f64).powf(0.3));
    for (&frozen, &zi) in code.frozen().iter().zip(&z) {
        assert_eq!(frozen, zi > threshold);
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let one = ok(d, &["--threads", "1", "verify", "--instances", "6", "--seed", "4"]);
    let four = ok(d, &["--threads", "4", "verify", "--instances", "6", "--seed", "4"]);
    assert_eq!(one, four);
    let env = Command::new(env!("CARGO_BIN_EXE_sidecode"))
        .args(["verify", "--instances", "6", "--seed", "4"])
        .env("SIDECODE_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(env.stdout).unwrap(), one);
}
