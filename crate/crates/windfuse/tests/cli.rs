//! End-to-end runs of the binary on a synthetic fixture.

mod common;

use std::path::Path;
use std::process::Command;

use windfuse::artifact::FitArtifact;
use windfuse::io::{read_json, read_observations, read_predictions, read_scores};

fn windfuse(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_windfuse"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs");
    out
}

fn ok(args: &[&str]) {
    let out = windfuse(args);
    assert!(
        out.status.success(),
        "windfuse {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn full_pipeline_on_synthetic_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = common::write_fixture(tmp.path(), 72, 3);
    let d = |name: &str| tmp.path().join(name);

    ok(&["fit-dist", "--observations", p(&fx.observations), "--out", p(&d("fits.csv"))]);
    assert_eq!(header(&d("fits.csv")), "station_id,family,param1,param2,loglik,ks,p95diff");
    let n_fit_rows = std::fs::read_to_string(d("fits.csv")).unwrap().lines().count() - 1;
    assert_eq!(n_fit_rows, 3 * fx.dataset.stations.len());

    ok(&["qc", "--stations", p(&fx.stations), "--observations", p(&fx.observations), "--out", p(&d("qc.csv"))]);
    assert_eq!(header(&d("qc.csv")), "station_id,frac_present,n_good_neighbours,passed,fail_reasons");

    ok(&[
        "bias-correct",
        "--stations",
        p(&fx.stations),
        "--observations",
        p(&fx.observations),
        "--grid",
        p(&fx.grid),
        "--coastline",
        p(&fx.coastline),
        "--out",
        p(&d("corrected.csv")),
        "--calib-report",
        p(&d("calib.csv")),
    ]);
    assert_eq!(header(&d("corrected.csv")), "station_id,timestamp,wind_speed_ms,corrected_ms");
    assert!(d("calib_validation.csv").exists());
    let table = read_observations(&d("corrected.csv")).unwrap();
    let corrected = table.corrected.unwrap();
    for (raw, cor) in table.raw.iter().zip(&corrected) {
        assert_eq!(raw.station_id, cor.station_id);
        if raw.station_id.starts_with("MET") {
            assert_eq!(raw.values, cor.values, "Met series must pass through unchanged");
        }
    }

    std::fs::write(d("model.toml"), "model = \"igp+grouped+cov+diurnal\"\n[fit]\nstart_factors = [1.0]\n").unwrap();
    ok(&[
        "fit",
        "--variant",
        "igp",
        "--corrected",
        p(&d("corrected.csv")),
        "--stations",
        p(&fx.stations),
        "--grid",
        p(&fx.grid),
        "--coastline",
        p(&fx.coastline),
        "--config",
        p(&d("model.toml")),
        "--out",
        p(&d("fit.json")),
    ]);
    let art: FitArtifact = read_json(&d("fit.json")).unwrap();
    assert_eq!(art.config_hash, art.config.hash());
    assert_eq!(art.config_hash.len(), 64);
    assert!(art.model_fit.fixed.diurnal.is_some());
    assert!(art.model_fit.laplace_cov.is_some());

    // hold-out targets: two hours at a new location and at a Met station
    let met = &fx.dataset.stations[0];
    let targets = format!(
        "site_id,lat,lon,timestamp,class\nnew,53.1,-8.2,2024-06-01T05:00:00Z,\n{},{},{},2024-06-01T05:00:00Z,MET\n{},{},{},2024-06-01T06:00:00Z,MET\n",
        met.id, met.lat, met.lon, met.id, met.lat, met.lon
    );
    std::fs::write(d("targets.csv"), targets).unwrap();
    ok(&["predict", "--fit", p(&d("fit.json")), "--targets", p(&d("targets.csv")), "--out", p(&d("pred.csv"))]);
    let preds = read_predictions(&d("pred.csv")).unwrap();
    assert_eq!(preds.len(), 3);
    for r in &preds {
        assert!(r.sd_sqrt > 0.0 && r.mean_ms > 0.0);
        assert!((r.mean_ms - (r.mean_sqrt.powi(2) + r.sd_sqrt.powi(2))).abs() < 1e-9);
    }

    ok(&["evaluate", "--pred", p(&d("pred.csv")), "--truth", p(&fx.observations), "--out", p(&d("report.csv"))]);
    let rep = read_scores(&d("report.csv")).unwrap();
    let overall = rep.iter().find(|r| r.scope == "overall").unwrap();
    assert_eq!(overall.n, 2, "only the Met rows have truth");
    assert!(overall.rmse.is_finite());

    ok(&[
        "predict-grid",
        "--fit",
        p(&d("fit.json")),
        "--lat-min",
        "52",
        "--lat-max",
        "53",
        "--lon-min",
        "-9",
        "--lon-max",
        "-8",
        "--step",
        "0.5",
        "--times",
        "2024-06-01T00:00:00Z,2024-06-01T12:00:00Z",
        "--out",
        p(&d("grid_pred.csv")),
    ]);
    let n = std::fs::read_to_string(d("grid_pred.csv")).unwrap().lines().count() - 1;
    assert_eq!(n, 9 * 2);

    ok(&[
        "losocv",
        "--corrected",
        p(&d("corrected.csv")),
        "--stations",
        p(&fx.stations),
        "--grid",
        p(&fx.grid),
        "--coastline",
        p(&fx.coastline),
        "--models",
        "igp+grouped+cov,igp+pooled+cov",
        "--config",
        p(&d("model.toml")),
        "--out",
        p(&d("scores.csv")),
    ]);
    let scores = read_scores(&d("scores.csv")).unwrap();
    let models: Vec<&str> = scores.iter().filter(|r| r.scope == "overall").map(|r| r.model_id.as_str()).collect();
    assert_eq!(models, ["igp+grouped+cov", "igp+pooled+cov"]);
    assert_eq!(scores.iter().filter(|r| r.scope == "station").count(), 2 * 8);
}

#[test]
fn simulate_and_small_study() {
    let tmp = tempfile::tempdir().unwrap();
    let d = |name: &str| tmp.path().join(name);
    std::fs::write(
        d("sim.toml"),
        "n_times = 12\nseed = 5\n[layout]\nn_met = 5\nn_pws1 = 5\nn_pws2 = 2\n",
    )
    .unwrap();
    ok(&["simulate", "--config", p(&d("sim.toml")), "--out", p(&d("obs.csv")), p(&d("st.csv"))]);
    assert_eq!(header(&d("obs.csv")), "station_id,timestamp,value,latent,junk");
    let rows = std::fs::read_to_string(d("obs.csv")).unwrap().lines().count() - 1;
    assert_eq!(rows, 12 * 12);
    let st = windfuse::io::read_stations(&d("st.csv")).unwrap();
    assert_eq!(st.len(), 12);

    // deterministic: a second run is byte-identical
    ok(&["simulate", "--config", p(&d("sim.toml")), "--out", p(&d("obs2.csv")), p(&d("st2.csv"))]);
    assert_eq!(std::fs::read(d("obs.csv")).unwrap(), std::fs::read(d("obs2.csv")).unwrap());

    std::fs::write(
        d("study.toml"),
        "noise_levels = [0.5]\nvariants = [\"igp\"]\nreplications = 1\n[simulation]\nn_times = 8\n[simulation.layout]\nn_met = 4\nn_pws1 = 4\nn_pws2 = 2\n[fit]\nstart_factors = [1.0]\n",
    )
    .unwrap();
    ok(&[
        "--threads",
        "2",
        "sim-study",
        "--config",
        p(&d("study.toml")),
        "--out",
        p(&d("t9.csv")),
        p(&d("t10.csv")),
        "--cells",
        p(&d("cells.csv")),
    ]);
    let t9 = std::fs::read_to_string(d("t9.csv")).unwrap();
    assert_eq!(t9.lines().next().unwrap(), "noise,variant,strategy,n_ok,n_failed,rmse,crps");
    assert_eq!(t9.lines().count(), 1 + 3);
    assert!(header(&d("t10.csv")).starts_with("noise,variant,strategy,phi,sigma_z,rho,sigma_met"));
}

#[test]
fn errors_are_reported_not_panicked() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.csv");
    let out = windfuse(&["fit-dist", "--observations", p(&missing), "--out", p(&tmp.path().join("x.csv"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));

    std::fs::write(tmp.path().join("bad.csv"), "station_id,timestamp\na,2024-06-01T00:00:00Z\n").unwrap();
    let out = windfuse(&["fit-dist", "--observations", p(&tmp.path().join("bad.csv")), "--out", p(&tmp.path().join("x.csv"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("wind_speed_ms"));

    std::fs::write(tmp.path().join("bad.toml"), "modle = \"igp\"\n").unwrap();
    let out = windfuse(&["simulate", "--config", p(&tmp.path().join("bad.toml")), "--out", "a", "b"]);
    assert!(!out.status.success());
}
