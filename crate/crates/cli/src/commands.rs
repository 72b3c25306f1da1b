use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use geoequiv::geodesic::{grid_targets, sample_family, FamilyOptions, GeodesicFamily, JetMode};
use geoequiv::gluing::{self, BlockFile, GlueOptions, PairData};
use geoequiv::io::{family_to_jsonl, parse_grid_spec, read_family, to_json, GridFieldFile};
use geoequiv::metris::{is_affinely_equivalent, is_geodesically_equivalent};
use geoequiv::recon::{reconstruct, ReconVerdict};
use geoequiv::recovery::{recover_metric, RecoveryOptions, Stage};
use geoequiv::report::{sha256_hex, GenerateResult, GlueResult, Manifest, Report, Status, Timing, VerifyResult, SCHEMA_VERSION};
use geoequiv::rigidity::rigidity_scan;
use geoequiv::tensor::christoffel;
use geoequiv::{ChartGrid, ConnectionField, Error, MetricField, Params, Result};
use serde::Serialize;

use crate::{Command, Common, Jets};

struct Input {
    path: String,
    bytes: Vec<u8>,
}

fn read_input(path: &Path) -> Result<Input> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(Input {
        path: path.display().to_string(),
        bytes,
    })
}

fn parse_json<T: for<'de> serde::Deserialize<'de>>(input: &Input) -> Result<T> {
    serde_json::from_slice(&input.bytes).map_err(|e| Error::Format(format!("{}: {e}", input.path)))
}

fn regrid(grid: &ChartGrid, spec: Option<&str>) -> Result<Option<ChartGrid>> {
    spec.map(|s| parse_grid_spec(s, Some(grid))).transpose()
}

fn load_metric(path: &Path, grid: Option<&str>) -> Result<(MetricField, Input)> {
    let input = read_input(path)?;
    let g = parse_json::<GridFieldFile>(&input)?.to_metric()?;
    let g = match regrid(g.grid(), grid)? {
        Some(new) => g.with_grid(new)?,
        None => g,
    };
    Ok((g, input))
}

fn load_connection(path: &Path, grid: Option<&str>) -> Result<(ConnectionField, Input)> {
    let input = read_input(path)?;
    let c = parse_json::<GridFieldFile>(&input)?.to_connection()?;
    let c = match (regrid(c.grid(), grid)?, c.model()) {
        (Some(new), Some(m)) => ConnectionField::from_model(new, m.clone())?,
        (Some(_), None) => return Err(Error::InvalidArgument("cannot move a sampled connection to another grid".into())),
        (None, _) => c,
    };
    Ok((c, input))
}

fn parse_targets(spec: &str, n: usize) -> Result<Vec<Vec<f64>>> {
    spec.split(';')
        .map(|p| {
            let x = p
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidArgument(format!("bad coordinate `{s}` in targets")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if x.len() != n {
                return Err(Error::InvalidArgument(format!("target `{p}` needs {n} coordinates")));
            }
            Ok(x)
        })
        .collect()
}

/// Outcome of a command before it is written out.
struct Output<T: Serialize> {
    report: Report<T>,
    files: Vec<(String, String)>,
}

fn emit<T: Serialize>(out: Option<&Path>, o: Output<T>, started: Instant) -> Result<i32> {
    let code = o.report.status.exit_code();
    let text = to_json(&o.report)?;
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            for (name, body) in &o.files {
                fs::write(dir.join(name), body)?;
            }
            fs::write(dir.join("report.json"), &text)?;
            let timing = Timing {
                command: o.report.command.clone(),
                seconds: started.elapsed().as_secs_f64(),
            };
            fs::write(dir.join("timing.json"), to_json(&timing)?)?;
        }
        // files are only written with --out
        None => print!("{text}"),
    }
    Ok(code)
}

fn with_common<T: Serialize>(r: Report<T>, c: &Common, tol: f64) -> Report<T> {
    let r = r.config("tol", tol).config("seed", c.seed);
    match &c.grid {
        Some(g) => r.config("grid", g),
        None => r,
    }
}

pub fn run(cmd: Command) -> Result<i32> {
    let started = Instant::now();
    match cmd {
        Command::Generate {
            metric,
            targets,
            n_curves,
            jets,
            common,
        } => {
            if common.out.is_none() {
                return Err(Error::InvalidArgument("generate needs --out".into()));
            }
            let (g, input) = load_metric(&metric, common.grid.as_deref())?;
            let gamma = christoffel(&g)?;
            let targets = match &targets {
                Some(s) => parse_targets(s, g.dim())?,
                None => grid_targets(g.grid()),
            };
            let mode = match jets {
                Jets::Exact => JetMode::Exact,
                Jets::Fit => JetMode::Fit,
            };
            let opts = FamilyOptions {
                per_point: n_curves,
                seed: common.seed,
                mode,
                ..Default::default()
            };
            let fam = sample_family(&gamma, &targets, &opts)?;
            let mut files = vec![("family.jsonl".to_string(), family_to_jsonl(&fam)?)];
            if !fam.curves.is_empty() {
                let samples = GeodesicFamily {
                    dim: fam.dim,
                    curves: fam.curves.clone(),
                    jets: Vec::new(),
                };
                files.push(("curves.jsonl".to_string(), family_to_jsonl(&samples)?));
            }
            let mode_name = format!("{jets:?}").to_lowercase();
            let manifest = Manifest {
                schema_version: SCHEMA_VERSION,
                seed: common.seed,
                metric_sha256: sha256_hex(&input.bytes),
                mode: mode_name.clone(),
                targets: targets.len(),
                per_point: n_curves,
                curves: fam.jets.len(),
                jets: fam.jets.len(),
                outputs: digests(&files),
            };
            files.push(("manifest.json".to_string(), to_json(&manifest)?));
            let result = GenerateResult {
                targets: targets.len(),
                curves: fam.jets.len(),
                jets: fam.jets.len(),
                family: "family.jsonl".into(),
            };
            let report = Report::new("generate", Status::Ok, result)
                .input("metric", Path::new(&input.path), &input.bytes)
                .config("n_curves", n_curves)
                .config("jets", mode_name)
                .config("seed", common.seed);
            let report = match &common.grid {
                Some(s) => report.config("grid", s),
                None => report,
            };
            emit(common.out.as_deref(), Output { report, files }, started)
        }
        Command::Reconstruct { family, common } => {
            let spec = common
                .grid
                .as_deref()
                .ok_or_else(|| Error::InvalidArgument("reconstruct needs --grid lo:hi:count,...".into()))?;
            let grid = parse_grid_spec(spec, None)?;
            let input = read_input(&family)?;
            let fam = read_family(&family)?;
            let tol = common.tol.unwrap_or(1e-6);
            let (gamma, rep) = reconstruct(&fam, &grid, tol)?;
            let status = Status::from_bool(rep.verdict == ReconVerdict::Geodesible);
            let files = vec![("connection.json".to_string(), to_json(&GridFieldFile::from_connection(&gamma)?)?)];
            let report = with_common(Report::new("reconstruct", status, rep), &common, tol)
                .input("family", Path::new(&input.path), &input.bytes);
            emit(common.out.as_deref(), Output { report, files }, started)
        }
        Command::Recover {
            connection,
            metric,
            common,
        } => {
            let (gamma, input, name) = match (connection, metric) {
                (Some(c), _) => {
                    let (g, i) = load_connection(&c, common.grid.as_deref())?;
                    (g, i, "connection")
                }
                (None, Some(m)) => {
                    let (g, i) = load_metric(&m, common.grid.as_deref())?;
                    (christoffel(&g)?, i, "metric")
                }
                (None, None) => return Err(Error::InvalidArgument("recover needs --connection or --metric".into())),
            };
            let opts = RecoveryOptions {
                tol: common.tol,
                seed: common.seed,
                ..Default::default()
            };
            let rec = recover_metric(&gamma, &opts)?;
            let status = Status::from_bool(rec.report.stage == Stage::Verified);
            let files = match &rec.metric {
                Some(g) => vec![("metric.json".to_string(), to_json(&GridFieldFile::from_metric(g)?)?)],
                None => Vec::new(),
            };
            let tol = rec.report.tol;
            let report = with_common(Report::new("recover", status, rec.report), &common, tol)
                .input(name, Path::new(&input.path), &input.bytes);
            emit(common.out.as_deref(), Output { report, files }, started)
        }
        Command::Rigidity { metric, common } => {
            let (g, input) = load_metric(&metric, common.grid.as_deref())?;
            let tol = common.tol.unwrap_or(1e-8);
            let scan = rigidity_scan(&g, tol)?;
            let report = with_common(Report::new("rigidity", Status::Ok, scan), &common, tol)
                .input("metric", Path::new(&input.path), &input.bytes);
            emit(common.out.as_deref(), Output { report, files: Vec::new() }, started)
        }
        Command::Glue { blocks, common } => {
            let input = read_input(&blocks)?;
            let recipe: Vec<BlockFile> = parse_json(&input)?;
            let built = recipe.iter().map(BlockFile::build).collect::<Result<Vec<_>>>()?;
            let opts = GlueOptions {
                seed: common.seed,
                ..Default::default()
            };
            let pair = gluing::glue_all(&built, &opts)?;
            let base = gluing::domain_grid(&pair, gluing::default_count(pair.dim()))?;
            let grid = regrid(&base, common.grid.as_deref())?.unwrap_or(base);
            let tol = common.tol.unwrap_or(1e-6);
            let (g, gb) = gluing::metric_fields(&pair, &grid)?;
            let equivalence = is_geodesically_equivalent(&g, &gb, tol)?;
            let status = Status::from_bool(equivalence.equivalent);
            let e = Params::new();
            let files = vec![
                ("g.json".to_string(), to_json(&GridFieldFile::from_metric_expressions(&grid, pair.g(), &e))?),
                ("gbar.json".to_string(), to_json(&GridFieldFile::from_metric_expressions(&grid, pair.gbar(), &e))?),
            ];
            let result = GlueResult {
                dim: pair.dim(),
                parts: pair.parts(),
                signature: gluing::signature_at_center(&pair)?,
                equivalence,
                l_consistency: gluing::l_consistency(&pair, 5)?,
                outputs: files.iter().map(|(n, _)| n.clone()).collect(),
            };
            let report = with_common(Report::new("glue", status, result), &common, tol)
                .input("blocks", Path::new(&input.path), &input.bytes);
            emit(common.out.as_deref(), Output { report, files }, started)
        }
        Command::Verify {
            metric,
            partner,
            common,
        } => {
            let (g, a) = load_metric(&metric, common.grid.as_deref())?;
            let (gb, b) = load_metric(&partner, None)?;
            let gb = if gb.grid() == g.grid() { gb } else { gb.with_grid(g.grid().clone())? };
            let tol = common.tol.unwrap_or(1e-6);
            let equivalence = is_geodesically_equivalent(&g, &gb, tol)?;
            let (affinely_equivalent, connection_difference) = is_affinely_equivalent(&g, &gb, tol)?;
            let status = Status::from_bool(equivalence.equivalent);
            let result = VerifyResult {
                tol,
                equivalence,
                connection_difference,
                affinely_equivalent,
            };
            let report = with_common(Report::new("verify", status, result), &common, tol)
                .input("metric", Path::new(&a.path), &a.bytes)
                .input("partner", Path::new(&b.path), &b.bytes);
            emit(common.out.as_deref(), Output { report, files: Vec::new() }, started)
        }
    }
}

fn digests(files: &[(String, String)]) -> BTreeMap<String, String> {
    files.iter().map(|(n, b)| (n.clone(), sha256_hex(b.as_bytes()))).collect()
}
