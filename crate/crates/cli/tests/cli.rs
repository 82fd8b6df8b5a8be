use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use tempfile::TempDir;

use zoneflex::disaggregation::flags;
use zoneflex::io::{
    from_json, parse_timestamp, read_catalog, read_fan_points, read_readings, read_zone_loads, to_json,
};
use zoneflex::metrics::{lorenz, FlexReport};
use zoneflex::model::{ChannelKey, Topology, Variable};
use zoneflex::regression::FittedModels;
use zoneflex::synth::{default_topology, GroundTruth};
use zoneflex_cli::plots;

fn small_topology() -> Topology {
    let mut t = default_topology();
    for b in &mut t.buildings {
        for a in &mut b.ahus {
            a.zones.truncate(3);
        }
    }
    t
}

/// Temp dir with a config pointing at a small topology; outputs land in
/// the same directory.
fn fixture(days: usize) -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("topology.json"), to_json(&small_topology()).unwrap()).unwrap();
    let cfg = dir.path().join("config.json");
    let body = format!(
        r#"{{"output_dir": ".", "topology": "topology.json", "utc_offset": "+08:00", "simulate": {{"days": {days}, "seed": 42}}}}"#
    );
    fs::write(&cfg, body).unwrap();
    (dir, cfg)
}

fn run(cmd: &str, cfg: &Path, sets: &[&str]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_zoneflex"));
    c.arg(cmd).arg("--config").arg(cfg);
    for s in sets {
        c.arg("--set").arg(s);
    }
    c.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> Output {
    assert_eq!(code(&o), 0, "stderr: {}", stderr(&o));
    o
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn digest(files: &BTreeMap<String, Vec<u8>>) -> Vec<u8> {
    let mut h = Sha256::new();
    for (name, bytes) in files {
        h.update(name.as_bytes());
        h.update(bytes);
    }
    h.finalize().to_vec()
}

#[test]
fn empty_data_csv_is_a_schema_error() {
    let (dir, cfg) = fixture(4);
    fs::write(dir.path().join("data.csv"), "").unwrap();
    fs::write(dir.path().join("catalog.csv"), "point_id,building,ahu,zone,variable,unit\n").unwrap();
    fs::write(dir.path().join("fan_points.csv"), "building,ahu,flow,flow_unit,power,power_unit\n").unwrap();
    assert_eq!(code(&run("fit", &cfg, &[])), 2);
    fs::write(dir.path().join("data.csv"), "timestamp,point_id,value\n").unwrap();
    assert_eq!(code(&run("fit", &cfg, &[])), 2);
}

#[test]
fn unknown_config_key_is_an_input_error() {
    let (_dir, cfg) = fixture(4);
    let o = run("simulate", &cfg, &["no_such_key=1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn constant_regressor_ahu_fails_fit_by_name() {
    let (dir, cfg) = fixture(4);
    ok(run("simulate", &cfg, &[]));
    // Pin every zone of A/AHU1 at OAT − 2 so OAT − RAT is constant.
    let data = dir.path().join("data.csv");
    let (readings, offset) = read_readings(fs::File::open(&data).unwrap()).unwrap();
    let catalog = read_catalog(fs::File::open(dir.path().join("catalog.csv")).unwrap()).unwrap();
    let oat_id = &catalog.point_ids_by_key()[&ChannelKey::global(Variable::Oat)];
    let oat: BTreeMap<_, _> = readings
        .iter()
        .filter(|r| &r.point_id == oat_id)
        .map(|r| (r.timestamp, r.value))
        .collect();
    let mut out = String::from("timestamp,point_id,value\n");
    for r in &readings {
        let e = catalog.get(&r.point_id).unwrap();
        let pinned = e.key.variable == Variable::Iat
            && e.key.building.as_deref() == Some("A")
            && e.key.ahu.as_deref() == Some("AHU1");
        let v = if pinned { oat[&r.timestamp] - 2.0 } else { r.value };
        out.push_str(&format!("{},{},{}\n", zoneflex::io::format_timestamp(r.timestamp, offset), r.point_id, v));
    }
    fs::write(&data, out).unwrap();
    let o = run("fit", &cfg, &[]);
    assert_eq!(code(&o), 3, "stderr: {}", stderr(&o));
    assert!(stderr(&o).contains("A/AHU1"), "{}", stderr(&o));
}

#[test]
fn report_without_hsp_days_exits_4() {
    let (_dir, cfg) = fixture(4);
    ok(run("pipeline", &cfg, &[]));
    // Every afternoon set-point now sits nearer the LSP value.
    let o = run("report", &cfg, &["hsp_setpoint=30"]);
    assert_eq!(code(&o), 4, "stderr: {}", stderr(&o));
}

#[test]
fn simulate_rejects_three_days_and_accepts_four() {
    let (_dir, cfg) = fixture(4);
    assert_eq!(code(&run("simulate", &cfg, &["simulate.days=3"])), 5);
    ok(run("simulate", &cfg, &["simulate.days=4"]));
}

#[test]
fn simulate_is_deterministic_under_seed() {
    let (a, cfg_a) = fixture(4);
    let (b, cfg_b) = fixture(4);
    ok(run("simulate", &cfg_a, &[]));
    ok(run("simulate", &cfg_b, &[]));
    let fa = files(a.path());
    let fb = files(b.path());
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    assert_eq!(digest(&fa), digest(&fb));

    let (c, cfg_c) = fixture(4);
    ok(run("simulate", &cfg_c, &["simulate.seed=43"]));
    assert_ne!(digest(&fa), digest(&files(c.path())));
}

#[test]
fn zone_load_rows_cover_every_timestamp_and_zone() {
    let (dir, cfg) = fixture(4);
    ok(run("simulate", &cfg, &[]));
    ok(run("fit", &cfg, &[]));
    let o = ok(run("disaggregate", &cfg, &[]));
    assert!(String::from_utf8_lossy(&o.stdout).contains("coverage"));
    let topo = small_topology();
    for b in &topo.buildings {
        let text = fs::read_to_string(dir.path().join(format!("zone_loads_{}.csv", b.id))).unwrap();
        let zones: usize = b.ahus.iter().map(|a| a.zones.len()).sum();
        assert_eq!(text.lines().count() - 1, 4 * 96 * zones);
    }
}

#[test]
fn model_missing_for_topology_entity_exits_3() {
    let (dir, cfg) = fixture(4);
    ok(run("simulate", &cfg, &[]));
    ok(run("fit", &cfg, &[]));
    let path = dir.path().join("models.json");
    let mut m: FittedModels = from_json(fs::File::open(&path).unwrap()).unwrap();
    m.fans.retain(|f| !(f.building == "B" && f.ahu == "AHU2"));
    fs::write(&path, to_json(&m).unwrap()).unwrap();
    let o = run("disaggregate", &cfg, &[]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("B/AHU2"), "{}", stderr(&o));
}

#[test]
fn uniform_lorenz_plot_lies_on_diagonal() {
    let curve: Vec<[f64; 2]> = lorenz(&[2.5; 8]).unwrap().into_iter().map(|(x, y)| [x, y]).collect();
    let svg = plots::lorenz("U", &curve, &curve);
    for id in ["lorenz-eu", "lorenz-ef"] {
        let marker = format!(r#"id="{id}" points=""#);
        let start = svg.find(&marker).unwrap() + marker.len();
        let pts = &svg[start..start + svg[start..].find('"').unwrap()];
        let pts: Vec<(f64, f64)> = pts
            .split(' ')
            .map(|p| {
                let (x, y) = p.split_once(',').unwrap();
                (x.parse().unwrap(), y.parse().unwrap())
            })
            .collect();
        assert_eq!(pts.len(), 9);
        let (x0, y0) = plots::lorenz_px(0.0, 0.0);
        let (x1, y1) = plots::lorenz_px(1.0, 1.0);
        for (x, y) in pts {
            let want = y0 + (x - x0) / (x1 - x0) * (y1 - y0);
            assert!((y - want).abs() <= 0.01, "({x}, {y}) off diagonal");
        }
    }
}

fn check_csv(path: &Path, header: &[&str], mut row: impl FnMut(&[&str])) -> usize {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), header.join(","), "{}", path.display());
    let mut n = 0;
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!(f.len(), header.len(), "{}: {l}", path.display());
        row(&f);
        n += 1;
    }
    n
}

fn opt_num(s: &str) {
    if !s.is_empty() {
        s.parse::<f64>().unwrap();
    }
}

#[test]
fn every_output_file_parses_back() {
    let (dir, cfg) = fixture(4);
    ok(run("pipeline", &cfg, &[]));
    let p = |name: &str| dir.path().join(name);
    let open = |name: &str| fs::File::open(p(name)).unwrap();

    let (readings, _) = read_readings(open("data.csv")).unwrap();
    let catalog = read_catalog(open("catalog.csv")).unwrap();
    assert!(readings.iter().all(|r| catalog.get(&r.point_id).is_some()));
    assert_eq!(read_fan_points(open("fan_points.csv")).unwrap().len(), 4);
    let topo: Topology = from_json(open("topology.json")).unwrap();
    let _: GroundTruth = from_json(open("truth.json")).unwrap();
    let _: FittedModels = from_json(open("truth_models.json")).unwrap();
    let _: FittedModels = from_json(open("models.json")).unwrap();
    let report: FlexReport = from_json(open("report.json")).unwrap();
    assert_eq!(report.buildings.len(), 3);

    for b in &topo.buildings {
        for prefix in ["zone_loads", "truth_zone_loads"] {
            let t = read_zone_loads(open(&format!("{prefix}_{}.csv", b.id)), &b.id, &topo).unwrap();
            assert_eq!(t.timestamps.len(), 4 * 96);
        }
    }
    for name in ["diagnostics.csv", "truth_diagnostics.csv"] {
        let n = check_csv(&p(name), &["timestamp", "building_id", "residual_kw", "cop", "coverage_flags"], |f| {
            parse_timestamp(f[0]).unwrap();
            opt_num(f[2]);
            opt_num(f[3]);
            assert!(flags::parse(f[4]).is_some());
        });
        assert_eq!(n, 4 * 96 * 3);
    }
    let n = check_csv(
        &p("thermal.csv"),
        &["zone_id", "mean_iat_lsp_c", "mean_iat_hsp_c", "delta_t_c", "overcooling_c"],
        |f| f[1..].iter().for_each(|s| opt_num(s)),
    );
    assert_eq!(n, topo.zone_count());
    assert!(fs::read_to_string(p("fit_report.txt")).unwrap().contains("Std. Err"));

    let plots: Vec<_> = fs::read_dir(p("plots")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(plots.len(), 3 * 3 + 1);
    for svg in plots {
        let s = fs::read_to_string(&svg).unwrap();
        assert!(s.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
        assert!(s.ends_with("</svg>\n"));
        assert_eq!(s.matches('<').count(), s.matches('>').count(), "{}", svg.display());
        assert!(!s.contains("NaN") && !s.contains("inf"), "{}", svg.display());
    }
}
