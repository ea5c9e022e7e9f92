use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use geolatnet::data::{florentine, format_edge_list};
use tempfile::TempDir;

fn geolatnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geolatnet")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn edge_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty()).collect()
}

#[test]
fn generate_with_very_negative_alpha_writes_header_only() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "gen.cfg", "geometry = hyperbolic\nnodes = 20\nalpha = -50\nseed = 4\n");
    let out = tmp.path().join("g");
    let o = geolatnet(&["generate", "--config", &cfg, "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("edges.txt")).unwrap();
    assert!(edge_lines(&text).is_empty(), "{text}");
    assert!(text.starts_with('#'));
}

#[test]
fn generate_is_byte_identical_for_a_fixed_seed() {
    let tmp = TempDir::new().unwrap();
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o =
            geolatnet(&["generate", "--geometry", "hyperbolic", "--nodes", "25", "--seed", "17", "--out", path(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["edges.txt", "truth.json", "truth_latent.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn generated_spherical_density_is_moderate() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "gen.cfg", "geometry = spherical\nnodes = 30\ntheta_spread = 5\nalpha = 1\n");
    for seed in ["1", "2", "3"] {
        let out = tmp.path().join(seed);
        let o = geolatnet(&["generate", "--config", &cfg, "--seed", seed, "--out", path(&out)]);
        assert!(o.status.success());
        let text = fs::read_to_string(out.join("edges.txt")).unwrap();
        let density = edge_lines(&text).len() as f64 / (30.0 * 29.0 / 2.0);
        assert!(density > 0.05 && density < 0.95, "density {density}");
    }
}

#[test]
fn malformed_edge_line_is_a_data_error_naming_the_line() {
    let tmp = TempDir::new().unwrap();
    let edges = tmp.path().join("bad.txt");
    fs::write(&edges, "1 2\n2 3\na b c\n").unwrap();
    let o = geolatnet(&[
        "fit",
        "mcmc",
        "--geometry",
        "spherical",
        "--edges",
        path(&edges),
        "--out",
        path(&tmp.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn usage_and_config_errors_exit_with_code_2() {
    let tmp = TempDir::new().unwrap();
    let edges = tmp.path().join("e.txt");
    fs::write(&edges, format_edge_list(&florentine())).unwrap();
    let out = tmp.path().join("o");
    let o = geolatnet(&["fit", "mcmc", "--edges", path(&edges), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2), "missing geometry");
    let cfg = write_config(tmp.path(), "c.cfg", "geometry = spherical\niterations = 10\nstep = 3\n");
    let o = geolatnet(&["fit", "mcmc", "--edges", path(&edges), "--config", &cfg, "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3") && err.contains("step"), "{err}");
    let o = geolatnet(&["fit", "sgd", "--edges", path(&edges)]);
    assert_eq!(o.status.code(), Some(2));
    let o = geolatnet(&["predict", "--fit", path(&tmp.path().join("missing")), "--edges", path(&edges)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn mcmc_fit_and_predict_round_trip() {
    let tmp = TempDir::new().unwrap();
    let edges = tmp.path().join("florentine.txt");
    fs::write(&edges, format_edge_list(&florentine())).unwrap();
    let fit = tmp.path().join("fit");
    let o = geolatnet(&[
        "fit",
        "mcmc",
        "--geometry",
        "spherical",
        "--edges",
        path(&edges),
        "--out",
        path(&fit),
        "--iterations",
        "2000",
        "--thin",
        "10",
        "--burnin",
        "500",
        "--seed",
        "9",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let mut trace = csv::Reader::from_path(fit.join("trace.csv")).unwrap();
    assert_eq!(trace.headers().unwrap(), vec!["iter", "alpha", "loglik"]);
    let rows: Vec<(usize, f64, f64)> = trace.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 200);
    assert_eq!(rows[0].0, 10);
    let mut latent = csv::Reader::from_path(fit.join("latent.csv")).unwrap();
    assert_eq!(latent.headers().unwrap(), vec!["iter", "node", "c1", "c2", "c3"]);
    let latent_rows: Vec<(usize, usize, f64, f64, f64)> = latent.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(latent_rows.len(), 200 * 15);
    assert!(latent_rows.iter().all(|r| (1..=15).contains(&r.1)));

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fit.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["input"]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["config"]["iterations"], "2000");
    let state: serde_json::Value = serde_json::from_str(&fs::read_to_string(fit.join("state.json")).unwrap()).unwrap();
    assert_eq!(state["retained_samples"], 150);
    assert!(state["alpha_mean"].as_f64().unwrap().is_finite());

    let o = geolatnet(&["predict", "--fit", path(&fit), "--edges", path(&edges)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut pred = csv::Reader::from_path(fit.join("predictive.csv")).unwrap();
    assert_eq!(pred.headers().unwrap(), vec!["i", "j", "y", "mean_p"]);
    let rows: Vec<(usize, usize, u8, f64)> = pred.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 15 * 14 / 2);
    assert!(rows.iter().all(|&(i, j, y, p)| i < j && j <= 15 && y <= 1 && p > 0.0 && p < 1.0));
    assert_eq!(rows.iter().filter(|r| r.2 == 1).count(), 20);
}

#[test]
fn mcmc_chains_get_their_own_directories() {
    let tmp = TempDir::new().unwrap();
    let edges = tmp.path().join("florentine.txt");
    fs::write(&edges, format_edge_list(&florentine())).unwrap();
    let fit = tmp.path().join("fit");
    let o = geolatnet(&[
        "fit",
        "mcmc",
        "--geometry",
        "hyperbolic",
        "--edges",
        path(&edges),
        "--out",
        path(&fit),
        "--iterations",
        "500",
        "--chains",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let a = fs::read(fit.join("chain-1/trace.csv")).unwrap();
    let b = fs::read(fit.join("chain-2/trace.csv")).unwrap();
    assert_ne!(a, b);
    let o = geolatnet(&["predict", "--fit", path(&fit), "--edges", path(&edges), "--out", path(&tmp.path().join("p"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("p/predictive.csv").exists());
}

#[test]
fn bbvi_state_records_alpha_factor() {
    let tmp = TempDir::new().unwrap();
    let edges = tmp.path().join("florentine.txt");
    fs::write(&edges, format_edge_list(&florentine())).unwrap();
    let cfg =
        write_config(tmp.path(), "vi.cfg", "geometry = hyperbolic\niterations = 100\nsamples = 10\nanchors = 9,3,2\n");
    let fit = tmp.path().join("fit");
    let o = geolatnet(&["fit", "bbvi", "--edges", path(&edges), "--config", &cfg, "--out", path(&fit)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let state: serde_json::Value = serde_json::from_str(&fs::read_to_string(fit.join("state.json")).unwrap()).unwrap();
    assert!(state["m_tilde"].as_f64().unwrap().is_finite());
    assert!(state["sigma_tilde"].as_f64().unwrap() > 0.0);
    assert_eq!(state["anchors"], serde_json::json!([9, 3, 2]));
    assert_eq!(state["nodes"].as_array().unwrap().len(), 15);
    let mut elbo = csv::Reader::from_path(fit.join("elbo.csv")).unwrap();
    assert_eq!(elbo.headers().unwrap(), vec!["iter", "elbo", "loglik", "m_tilde", "sigma_tilde"]);
    assert_eq!(elbo.records().count(), 100);

    let o = geolatnet(&["predict", "--fit", path(&fit), "--edges", path(&edges)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let n_rows = csv::Reader::from_path(fit.join("predictive.csv")).unwrap().records().count();
    assert_eq!(n_rows, 105);
    let sep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fit.join("separation.json")).unwrap()).unwrap();
    assert!(sep["auc"].as_f64().unwrap() > 0.5);
}
