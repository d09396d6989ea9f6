use std::process::Command;

fn curvatur(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_curvatur")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn surface_report_document() {
    let (code, out, _) = curvatur(&["surface", "report", "--builtin", "sphere", "--param", "R=1", "--param", "flip=1", "--at", "1.0,0.5"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    for key in ["command", "geometry", "inputs", "results", "diagnostics"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let p = &v["results"]["principal"];
    for (k, want) in [("lambda_plus", 1.0), ("lambda_minus", 1.0), ("gaussian", 1.0), ("scalar", 2.0)] {
        assert!((p[k].as_f64().unwrap() - want).abs() < 1e-12, "{k}");
    }
}

#[test]
fn output_is_deterministic() {
    let args = ["geodesic", "trace", "--builtin", "torus", "--param", "R=2", "--param", "r=1", "--from", "0,0", "--dir", "1,1", "--length", "20"];
    let (c1, a, _) = curvatur(&args);
    let (c2, b, _) = curvatur(&args);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(a, b);
    let mut csv_args = args.to_vec();
    csv_args.extend(["--format", "csv"]);
    let (code, csv, _) = curvatur(&csv_args);
    assert_eq!(code, 0);
    assert!(csv.starts_with("t,x0,x1,x,y,z\n"));
    let (_, threaded, _) = curvatur(&[&args[..], &["--threads", "3"]].concat());
    assert_eq!(a, threaded);
}

#[test]
fn exit_codes() {
    assert_eq!(curvatur(&["surface", "report", "--builtin", "sphere"]).0, 2);
    let (code, _, err) = curvatur(&["surface", "report", "--builtin", "sphere", "--param", "R=-1", "--at", "1,1"]);
    assert_eq!(code, 2);
    assert!(serde_json::from_str::<serde_json::Value>(&err).unwrap()["error"]["kind"] == "usage");
    // the pole is outside the sphere's chart
    let (code, _, err) = curvatur(&["curvature", "scalar", "--builtin", "sphere", "--at", "0.0,1.0"]);
    assert_eq!(code, 1, "{err}");
    let (code, out, _) = curvatur(&["verify", "--suite", "curves", "--seed", "7"]);
    assert_eq!(code, 0);
    assert!(out.contains("\"passed\": true"));
}

#[test]
fn parse_check_reports_positions() {
    let dir = std::env::temp_dir().join(format!("curvatur-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.geo");
    std::fs::write(&bad, "# header\nmetric m (x,y in [0,1]x[1,2]) = [[1,0],[0 1]]\n").unwrap();
    let (code, _, err) = curvatur(&["parse", "--check", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    let v: serde_json::Value = serde_json::from_str(&err).unwrap();
    assert_eq!(v["error"]["details"]["line"], 2);
    assert_eq!(v["error"]["details"]["column"], 43);
    let good = dir.join("good.geo");
    std::fs::write(&good, "surface s (u,v in [0,1]x[0,1]) = (u, v, u*v)\n").unwrap();
    assert_eq!(curvatur(&["parse", "--check", good.to_str().unwrap()]).0, 0);
}
