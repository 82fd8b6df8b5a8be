//! The `simulate`, `fit`, `disaggregate`, `report` and `pipeline` commands.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use zoneflex::disaggregation::{run_cascade, ZoneLoadSeries, ZoneStatus};
use zoneflex::io::{
    frame_catalog, from_json, read_catalog, read_fan_points, read_readings, read_zone_loads, to_json,
    write_catalog, write_diagnostics, write_fan_points, write_readings, write_thermal, write_zone_loads,
};
use zoneflex::metrics::{build_report, FlexReport, ZoneLoads};
use zoneflex::model::{align_channels, label_days, AhuRef, ChannelFrame, Topology};
use zoneflex::regression::{fit_models, FittedModels};
use zoneflex::synth::{default_topology, default_uncommissioned, simulate, GroundTruth};
use zoneflex::Error;

use crate::config::RunConfig;
use crate::plots;
use crate::{write_atomic, write_text, CliError, CliResult};

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Core(Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    from_json(open(path)?).map_err(|e| match e {
        Error::Json(j) => CliError::Core(Error::Schema(format!("{}: {j}", path.display()))),
        e => e.into(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_text(path, &to_json(value)?)
}

fn zone_loads_path(dir: &Path, building: &str) -> PathBuf {
    dir.join(format!("zone_loads_{building}.csv"))
}

/// Reads the data CSV and point catalog into an aligned frame.
pub fn load_frame(cfg: &RunConfig) -> CliResult<ChannelFrame> {
    let data = cfg.data_path();
    let (raw, offset) = read_readings(open(&data)?)?;
    let catalog = read_catalog(open(&cfg.catalog_path())?)?;
    let frame = align_channels(&raw, &catalog, cfg.interval())?.with_offset(offset);
    if frame.is_empty() {
        return Err(Error::Schema(format!("{} holds no readings", data.display())).into());
    }
    Ok(frame)
}

pub fn load_topology(cfg: &RunConfig) -> CliResult<Topology> {
    let mut t: Topology = read_json(&cfg.topology_path())?;
    t.validate()?;
    cfg.apply_exclusions(&mut t)?;
    Ok(t)
}

fn parse_ahus(list: &[String]) -> CliResult<Vec<AhuRef>> {
    list.iter()
        .map(|s| AhuRef::parse(s).ok_or_else(|| Error::Config(format!("`{s}` is not building/ahu")).into()))
        .collect()
}

pub fn cmd_simulate(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let sc = &cfg.simulate;
    let topology = match &cfg.topology {
        Some(p) => {
            let t: Topology = read_json(p)?;
            t.validate()?;
            t
        }
        None => default_topology(),
    };
    let explicit = sc.uncommissioned.as_deref().map(parse_ahus).transpose()?;
    let (mut truth, uncommissioned) = match &sc.truth {
        Some(p) => (read_json::<GroundTruth>(p)?, explicit),
        None => {
            let mut t = GroundTruth::generate(&topology, sc.seed).map_err(CliError::Simulation)?;
            t.air = cfg.air;
            t.lsp_setpoint = cfg.lsp_setpoint;
            t.hsp_setpoint = cfg.hsp_setpoint;
            let list = explicit.unwrap_or_else(|| {
                default_uncommissioned()
                    .into_iter()
                    .filter(|r| topology.ahu(r).is_some())
                    .collect()
            });
            (t, Some(list))
        }
    };
    if let Some(n) = sc.noise {
        truth.noise.relative = n;
    }
    if let Some(list) = uncommissioned {
        for r in &list {
            if topology.ahu(r).is_none() {
                return Err(Error::Config(format!("uncommissioned AHU {r} is not in the topology")).into());
            }
        }
        for a in &mut truth.ahus {
            a.commissioned = !list.contains(&AhuRef::new(a.building.clone(), a.ahu.clone()));
        }
    }

    let sim = simulate(&topology, &truth, sc.days, cfg.interval(), sc.seed).map_err(CliError::Simulation)?;
    let offset = cfg.offset()?;
    let dir = &cfg.output_dir;

    let (catalog, ids) = frame_catalog(&sim.frame)?;
    let readings = sim.frame.to_readings(&ids)?;
    write_atomic(&cfg.data_path(), |w| write_readings(w, &readings, offset))?;
    write_atomic(&cfg.catalog_path(), |w| write_catalog(w, &catalog))?;
    write_atomic(&cfg.fan_points_path(), |w| write_fan_points(w, &sim.fan_points))?;
    if cfg.topology.is_none() {
        write_json(&dir.join("topology.json"), &topology)?;
    }
    write_json(&dir.join("truth.json"), &truth)?;
    write_json(&dir.join("truth_models.json"), &sim.truth_models)?;
    let truth_loads = &sim.truth_loads;
    for b in &topology.buildings {
        let zones: Vec<&ZoneLoadSeries> = truth_loads.zones_of(&b.id).collect();
        write_atomic(&dir.join(format!("truth_zone_loads_{}.csv", b.id)), |w| {
            write_zone_loads(w, &truth_loads.timestamps, offset, &zones)
        })?;
    }
    write_atomic(&dir.join("truth_diagnostics.csv"), |w| write_diagnostics(w, truth_loads, offset))?;

    writeln!(
        out,
        "simulated {} days at {} min: {} buildings, {} AHUs, {} zones, {} readings",
        sc.days,
        cfg.interval_minutes,
        topology.buildings.len(),
        topology.ahu_refs().count(),
        topology.zone_count(),
        readings.len()
    )?;
    writeln!(out, "wrote {}", dir.display())?;
    Ok(())
}

/// Fixed-point for moderate magnitudes, scientific otherwise.
fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-3..1e6).contains(&a) {
        format!("{x:.4}")
    } else {
        format!("{x:.4e}")
    }
}

fn prob(p: f64) -> String {
    if p >= 0.01 {
        format!("{p:.3}")
    } else {
        format!("{p:.2e}")
    }
}

fn coef_table(s: &mut String, header: (&str, &str), n: usize, r2: f64, f_p: f64, rows: [(&str, f64, f64, f64); 2]) {
    let _ = writeln!(s, "{}", header.0);
    let _ = writeln!(s, "  {}", header.1);
    let _ = writeln!(s, "  {:<24}{:>14}", "Number of observations", n);
    let _ = writeln!(s, "  {:<24}{:>14}", "R^2", format!("{r2:.4}"));
    let _ = writeln!(s, "  {:<24}{:>14}", "Prob (F-statistic)", prob(f_p));
    let _ = writeln!(s, "  {:<12}{:>14}{:>14}{:>14}", "", "Value", "Std. Err", "P-Value");
    for (name, v, se, p) in rows {
        let _ = writeln!(s, "  {:<12}{:>14}{:>14}{:>14}", name, num(v), num(se), prob(p));
    }
    s.push('\n');
}

/// Regression summary tables for every fitted model.
pub fn fit_report(models: &FittedModels) -> String {
    let mut s = String::new();
    for m in &models.fresh_air {
        coef_table(
            &mut s,
            (
                &format!("Fresh-air model, AHU {}/{}", m.building, m.ahu),
                "MAT - RAT ~ OAT - RAT",
            ),
            m.n_obs,
            m.r2,
            m.f_statistic_p,
            [
                ("Intercept", m.alpha, m.std_err.alpha, m.p_values.alpha),
                ("Slope", m.k, m.std_err.k, m.p_values.k),
            ],
        );
        if m.k_out_of_range {
            let _ = writeln!(s, "  warning: fresh-air ratio {:.4} outside [0, 1]\n", m.k);
        }
    }
    for m in &models.buildings {
        coef_table(
            &mut s,
            (&format!("Building-coils model, building {}", m.building), "q_b ~ sum q_c"),
            m.n_obs,
            m.r2,
            m.f_statistic_p,
            [
                ("Intercept", m.beta, m.std_err.beta, m.p_values.beta),
                ("Slope", m.l, m.std_err.l, m.p_values.l),
            ],
        );
    }
    for f in &models.fans {
        let m = &f.model;
        let _ = writeln!(s, "Fan model, AHU {}/{}", f.building, f.ahu);
        match (&f.donor, f.scale) {
            (Some(d), Some(r)) => {
                let _ = writeln!(s, "  scaled from {d} by rated-power ratio {r:.4}");
            }
            _ => {
                let _ = writeln!(s, "  {:<24}{:>14}", "R^2", format!("{:.6}", m.r2));
            }
        }
        let _ = writeln!(
            s,
            "  flow range {} to {} {:?}, power {:?}",
            num(m.flow_range[0]),
            num(m.flow_range[1]),
            m.flow_unit,
            m.power_unit
        );
        let _ = writeln!(s, "  {:<12}{:>14}{:>14}", "", "Value", "Std. Err");
        let se = m.std_err.unwrap_or([f64::NAN; 4]);
        for (i, c) in m.coefficients().iter().enumerate() {
            let e = if se[i].is_nan() { "-".to_string() } else { num(se[i]) };
            let _ = writeln!(s, "  {:<12}{:>14}{:>14}", format!("a{i}"), num(*c), e);
        }
        if m.negative_in_range {
            let _ = writeln!(s, "  warning: curve is negative inside the flow range");
        }
        s.push('\n');
    }
    s
}

pub fn cmd_fit(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let frame = load_frame(cfg)?;
    let topology = load_topology(cfg)?;
    let fans = read_fan_points(open(&cfg.fan_points_path())?)?;
    let models = fit_models(&frame, &topology, &cfg.air, &fans, &cfg.fit_options()?)?;
    let report = fit_report(&models);
    write_json(&cfg.models_path(), &models)?;
    write_text(&cfg.output_dir.join("fit_report.txt"), &report)?;
    out.write_all(report.as_bytes())?;
    Ok(())
}

pub fn cmd_disaggregate(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let frame = load_frame(cfg)?;
    let topology = load_topology(cfg)?;
    let models: FittedModels = read_json(&cfg.models_path())?;
    let result = run_cascade(&frame, &topology, &models, &cfg.cascade_options())?;
    let offset = frame.offset();
    for b in &topology.buildings {
        let zones: Vec<&ZoneLoadSeries> = result.zones_of(&b.id).collect();
        write_atomic(&zone_loads_path(&cfg.output_dir, &b.id), |w| {
            write_zone_loads(w, &result.timestamps, offset, &zones)
        })?;
    }
    write_atomic(&cfg.output_dir.join("diagnostics.csv"), |w| write_diagnostics(w, &result, offset))?;

    writeln!(out, "{:<10}{:>7}{:>12}{:>12}{:>10}{:>10}", "building", "zones", "timestamps", "coverage", "off", "flagged")?;
    for d in &result.diagnostics {
        let zones: Vec<&ZoneLoadSeries> = result.zones_of(&d.building).collect();
        let cells = (zones.len() * result.timestamps.len()).max(1) as f64;
        let ok = zones.iter().flat_map(|z| &z.status).filter(|s| **s != ZoneStatus::Missing).count();
        let off = zones.iter().flat_map(|z| &z.status).filter(|s| **s == ZoneStatus::Off).count();
        let flagged = d.flags.iter().filter(|f| **f != 0).count();
        writeln!(
            out,
            "{:<10}{:>7}{:>12}{:>12.4}{:>10.4}{:>10}",
            d.building,
            zones.len(),
            result.timestamps.len(),
            ok as f64 / cells,
            off as f64 / cells,
            flagged
        )?;
    }
    writeln!(out, "cop floor {:.4} kW", result.cop_floor)?;
    Ok(())
}

fn write_plots(dir: &Path, report: &FlexReport) -> CliResult<()> {
    let plot_dir = dir.join("plots");
    for b in &report.buildings {
        let id = &b.entity.id;
        write_text(&plot_dir.join(format!("lorenz_{id}.svg")), &plots::lorenz(id, &b.lorenz_eu, &b.lorenz_ef))?;

        let prefix = format!("{id}/");
        let zones: Vec<_> = report.zones.iter().filter(|z| z.id.starts_with(&prefix)).collect();
        let total: f64 = zones.iter().filter_map(|z| z.e_lsp_kwh).sum();
        let rows: Vec<(String, Option<f64>, Option<f64>)> = zones
            .iter()
            .map(|z| {
                let eu = z.e_lsp_kwh.filter(|_| total > 0.0).map(|e| e / total);
                (z.id[prefix.len()..].to_string(), eu, z.efs)
            })
            .collect();
        write_text(&plot_dir.join(format!("shares_{id}.svg")), &plots::share_heatmap(id, &rows))?;

        let mut bars: Vec<(String, f64)> = zones.iter().filter_map(|z| Some((z.id.clone(), z.ef?))).collect();
        bars.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        write_text(
            &plot_dir.join(format!("ef_{id}.svg")),
            &plots::bar_chart(&format!("Zone energy flexibility, building {id}"), "EF", &bars),
        )?;
    }
    let delta: Vec<f64> = report.thermal.iter().filter_map(|t| t.stats.map(|s| s.delta_t)).collect();
    write_text(
        &plot_dir.join("delta_t.svg"),
        &plots::histogram("Zone temperature rise, HSP vs LSP", "delta T (degC)", &delta, 12),
    )?;
    Ok(())
}

pub fn cmd_report(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let frame = load_frame(cfg)?;
    let topology = load_topology(cfg)?;
    let calendar = label_days(&frame, cfg.lsp_setpoint, cfg.hsp_setpoint)?;

    let mut timestamps = None;
    let mut zones = Vec::new();
    for b in &topology.buildings {
        let table = read_zone_loads(open(&zone_loads_path(&cfg.output_dir, &b.id))?, &b.id, &topology)?;
        match &timestamps {
            None => timestamps = Some(table.timestamps),
            Some(t) if *t != table.timestamps => {
                return Err(Error::Schema(format!("zone loads for building {} use a different time index", b.id)).into())
            }
            Some(_) => {}
        }
        zones.extend(table.zones);
    }
    let timestamps = timestamps.unwrap_or_default();
    let loads = ZoneLoads {
        timestamps: &timestamps,
        interval_hours: frame.interval_hours(),
        zones: &zones,
    };
    let report = build_report(loads, Some(&frame), &topology, &calendar, &cfg.report_options())?;

    write_json(&cfg.output_dir.join("report.json"), &report)?;
    write_atomic(&cfg.output_dir.join("thermal.csv"), |w| write_thermal(w, &report))?;
    write_plots(&cfg.output_dir, &report)?;

    let opt = |v: Option<f64>, scale: f64| v.map_or("-".to_string(), |x| format!("{:.4}", x * scale));
    writeln!(out, "{} LSP days, {} HSP days", report.lsp_days, report.hsp_days)?;
    writeln!(
        out,
        "{:<10}{:>12}{:>12}{:>10}{:>10}{:>10}{:>12}",
        "building", "E_lsp kWh", "E_hsp kWh", "EF %", "Gini EU", "Gini EF", "top share"
    )?;
    for b in &report.buildings {
        writeln!(
            out,
            "{:<10}{:>12}{:>12}{:>10}{:>10}{:>10}{:>12}",
            b.entity.id,
            opt(b.entity.e_lsp_kwh, 1.0),
            opt(b.entity.e_hsp_kwh, 1.0),
            opt(b.entity.ef, 100.0),
            opt(b.gini_eu, 1.0),
            opt(b.gini_ef, 1.0),
            opt(b.concentration.map(|c| c.share_of_use), 1.0),
        )?;
    }
    Ok(())
}

/// `simulate`, `fit`, `disaggregate` and `report` in sequence.
pub fn cmd_pipeline(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    cmd_simulate(cfg, out)?;
    cmd_fit(cfg, out)?;
    cmd_disaggregate(cfg, out)?;
    cmd_report(cfg, out)
}
