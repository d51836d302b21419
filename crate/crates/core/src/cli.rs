//! Batch front-end: `l2torsion <command> [flags]`.
//!
//! Exit codes: 0 success, 1 a check suite failed, 2 invalid input, 3 the
//! requested scalar torsion is unavailable (report still written).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::category::RANK_TOL;
use crate::cellular::{self, CellComplex, Representation};
use crate::checks;
use crate::error::{Error, Result};
use crate::extcoh;
use crate::spectral::{self, LadderConfig};
use crate::torsion::TorsionOptions;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECKS_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NO_SCALAR: i32 = 3;

pub const DEFAULT_SEED: u64 = 7;

#[derive(Parser, Debug)]
#[command(name = "l2torsion", version, about = "L2-torsion of cochain complexes of CW complexes with coefficients")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandKind,
    /// Cell complex JSON, or a bundle `{"complex": ..., "representation": ...}`.
    #[arg(long, global = true)]
    pub complex: Option<PathBuf>,
    /// Representation JSON (overrides a bundled one).
    #[arg(long, global = true)]
    pub rep: Option<PathBuf>,
    /// Backend block replacing the representation's backend (JSON text or file).
    #[arg(long, global = true)]
    pub backend: Option<String>,
    /// Grid size for circle-grid family backends.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Spectral split point for the torsion (default: chosen in a spectral gap).
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Relative threshold below which singular values count as zero.
    #[arg(long, global = true, default_value_t = RANK_TOL)]
    pub tol_rank: f64,
    /// Tolerance for internal consistency checks (epsilon independence, formulas).
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol_agree: f64,
    /// Seed for the randomized check suites.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output directory for reports and CSV densities.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Check suite: all, fk, spectral, torsion, epsilon, exact, cone, oracles, subdivision.
    #[arg(long, global = true, default_value = "all")]
    pub suite: String,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    /// Combinatorial torsion of a complex with coefficients.
    Torsion,
    /// Fuglede-Kadison determinants of the differentials.
    Fkdet,
    /// Spectral densities of the differentials as CSV.
    Density,
    /// Extended cohomology and determinant-class verdicts per degree.
    Detclass,
    /// Randomized and closed-form check suites.
    Checks,
    /// Writes the bundled example inputs.
    Examples,
}

/// Validated run configuration.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub complex: Option<PathBuf>,
    pub rep: Option<PathBuf>,
    pub backend: Option<String>,
    pub grid: Option<usize>,
    pub epsilon: Option<f64>,
    pub tol_rank: f64,
    pub tol_agree: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub suite: String,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self> {
        let cfg = Self {
            command: cli.command,
            complex: cli.complex,
            rep: cli.rep,
            backend: cli.backend,
            grid: cli.grid,
            epsilon: cli.epsilon,
            tol_rank: cli.tol_rank,
            tol_agree: cli.tol_agree,
            seed: cli.seed,
            out: cli.out,
            suite: cli.suite,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tol-rank", self.tol_rank), ("tol-agree", self.tol_agree)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Parse(format!("--{name} must be positive, got {v}")));
            }
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::InvalidEpsilon(format!("--epsilon must be positive, got {e}")));
            }
        }
        if let Some(g) = self.grid {
            if g < 8 {
                return Err(Error::Parse(format!("--grid must be at least 8, got {g}")));
            }
        }
        if self.command == CommandKind::Examples && self.out.is_none() {
            return Err(Error::Parse("examples needs --out".into()));
        }
        Ok(())
    }

    fn ladder(&self) -> LadderConfig {
        LadderConfig { rank_tol: self.tol_rank, ..LadderConfig::default() }
    }

    fn torsion_options(&self) -> TorsionOptions {
        TorsionOptions { epsilon: self.epsilon, tol_agree: self.tol_agree, ladder: self.ladder() }
    }

    /// Reproducibility header embedded in every report.
    fn header(&self) -> Value {
        json!({
            "tool": "l2torsion",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "inputs": {
                "complex": self.complex.as_ref().map(|p| p.display().to_string()),
                "rep": self.rep.as_ref().map(|p| p.display().to_string()),
                "backend": self.backend,
            },
            "grid": self.grid,
            "epsilon": self.epsilon,
            "seed": self.seed,
            "tolerances": {
                "rank": self.tol_rank,
                "agree": self.tol_agree,
                "ladder": self.ladder(),
            },
        })
    }
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match RunConfig::from_cli(cli) {
        Ok(cfg) => run(&cfg),
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}

pub fn run(cfg: &RunConfig) -> i32 {
    let result = match cfg.command {
        CommandKind::Torsion => run_torsion(cfg),
        CommandKind::Fkdet => run_fkdet(cfg),
        CommandKind::Density => run_density(cfg),
        CommandKind::Detclass => run_detclass(cfg),
        CommandKind::Checks => run_checks(cfg),
        CommandKind::Examples => cfg.out.as_deref().map_or(Err(Error::Parse("examples needs --out".into())), |dir| {
            emit_examples(dir).map(|files| {
                eprintln!("wrote {} example files to {}", files.len(), dir.display());
                EXIT_OK
            })
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        EXIT_INVALID
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Reads the complex and resolves the representation (flag, then bundle),
/// applying `--backend` and `--grid` overrides.
fn load_inputs(cfg: &RunConfig) -> Result<(CellComplex, Representation)> {
    let path = cfg.complex.as_ref().ok_or_else(|| Error::Parse("--complex is required".into()))?;
    let text = read(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let (k, bundled) = match value.get("complex") {
        Some(inner) => (
            CellComplex::from_json(&inner.to_string()).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?,
            value.get("representation").map(|r| r.to_string()),
        ),
        None => (CellComplex::from_json(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?, None),
    };
    let mut rep = match (&cfg.rep, bundled) {
        (Some(p), _) => Representation::from_json(&read(p)?).map_err(|e| Error::Parse(format!("{}: {e}", p.display())))?,
        (None, Some(r)) => Representation::from_json(&r)?,
        (None, None) => return Err(Error::Parse("no representation: pass --rep or bundle one with the complex".into())),
    };
    if let Some(b) = &cfg.backend {
        let text = if Path::new(b).is_file() { read(Path::new(b))? } else { b.clone() };
        rep = rep.with_backend_json(&text)?;
    }
    if let Some(n) = cfg.grid {
        rep = rep.with_grid(n)?;
    }
    Ok((k, rep))
}

/// Prints the report to stdout and writes it to `--out/<name>` if given.
fn emit_report(cfg: &RunConfig, name: &str, body: Value) -> Result<()> {
    let mut report = json!({ "header": cfg.header() });
    if let (Value::Object(r), Value::Object(b)) = (&mut report, body) {
        r.extend(b);
    }
    let text = serde_json::to_string_pretty(&report).expect("serializable") + "\n";
    if let Some(dir) = &cfg.out {
        write(&dir.join(name), &text)?;
    }
    print!("{text}");
    Ok(())
}

fn complex_summary(k: &CellComplex, rep: &Representation) -> Value {
    json!({
        "cells": k.cell_counts(),
        "euler_characteristic": k.euler_characteristic(),
        "backend": rep.backend().kind_name(),
        "fibers": rep.backend().fiber_count(),
        "unimodular": rep.is_unimodular(),
    })
}

fn run_torsion(cfg: &RunConfig) -> Result<i32> {
    let (k, rep) = load_inputs(cfg)?;
    let report = cellular::combinatorial_torsion(&k, &rep, &cellular::standard_sigma(), &cfg.torsion_options())?;
    let unavailable = report.log_scalar.is_none() && (report.has_inconclusive() || !report.is_determinant_class());
    emit_report(cfg, "torsion.json", json!({ "complex": complex_summary(&k, &rep), "torsion": report }))?;
    if unavailable {
        eprintln!("scalar torsion unavailable: determinant-class verdict is not Convergent in every degree");
        return Ok(EXIT_NO_SCALAR);
    }
    Ok(EXIT_OK)
}

fn run_fkdet(cfg: &RunConfig) -> Result<i32> {
    let (k, rep) = load_inputs(cfg)?;
    let c = cellular::cochain_complex(&k, &rep)?;
    let ladder = cfg.ladder();
    let degrees: Vec<Value> = c
        .differentials()
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let density = spectral::singular_density(d, cfg.tol_rank);
            let verdict = spectral::classify(&density, &ladder);
            json!({
                "degree": i,
                "kernel_dim": density.zero_mass,
                "rank_dim": density.positive_mass(),
                "log_det": verdict.log_integral,
                "verdict": verdict,
            })
        })
        .collect();
    emit_report(cfg, "fkdet.json", json!({ "complex": complex_summary(&k, &rep), "differentials": degrees }))?;
    Ok(EXIT_OK)
}

fn run_density(cfg: &RunConfig) -> Result<i32> {
    let (k, rep) = load_inputs(cfg)?;
    let c = cellular::cochain_complex(&k, &rep)?;
    let mut files = Vec::new();
    for (i, d) in c.differentials().iter().enumerate() {
        let csv = spectral::singular_density(d, cfg.tol_rank).to_csv();
        let name = format!("density_d{i}.csv");
        match &cfg.out {
            Some(dir) => write(&dir.join(&name), &csv)?,
            None => eprint!("# {name}\n{csv}"),
        }
        files.push(name);
    }
    emit_report(cfg, "density.json", json!({ "complex": complex_summary(&k, &rep), "csv": files }))?;
    Ok(EXIT_OK)
}

fn run_detclass(cfg: &RunConfig) -> Result<i32> {
    let (k, rep) = load_inputs(cfg)?;
    let c = cellular::cochain_complex(&k, &rep)?;
    let mut profile = extcoh::cohomology_with(&c, &cfg.ladder());
    if let Some(dir) = &cfg.out {
        for d in profile.degrees.iter_mut() {
            let name = format!("torsion_density_h{}.csv", d.degree);
            write(&dir.join(&name), &d.torsion_density.to_csv())?;
            d.density_csv_ref = Some(name);
        }
    }
    let det_class = profile.is_determinant_class();
    emit_report(
        cfg,
        "detclass.json",
        json!({ "complex": complex_summary(&k, &rep), "determinant_class": det_class, "degrees": profile.degrees }),
    )?;
    Ok(EXIT_OK)
}

fn run_checks(cfg: &RunConfig) -> Result<i32> {
    let results = checks::run_suite(&cfg.suite, cfg.seed)?;
    for r in &results {
        eprintln!("{} {} ({} cases, worst {:.3e}, tol {:.0e})", if r.pass { "PASS" } else { "FAIL" }, r.name, r.cases, r.worst, r.tol);
    }
    let pass = results.iter().all(|r| r.pass);
    emit_report(cfg, "checks.json", json!({ "suite": cfg.suite, "pass": pass, "results": results }))?;
    Ok(if pass { EXIT_OK } else { EXIT_CHECKS_FAILED })
}

/// The bundled inputs as `(file name, contents)`.
pub fn example_files() -> Result<Vec<(String, String)>> {
    use crate::linalg::c;
    let lens51 = cellular::lens(5, 1)?;
    let regrep = Representation::regular_circle(4096)?;
    let bundle = |k: &CellComplex, r: &Representation| -> Result<String> {
        let v = json!({
            "complex": serde_json::from_str::<Value>(&k.to_json()).expect("valid json"),
            "representation": serde_json::from_str::<Value>(&r.to_json()?).expect("valid json"),
        });
        Ok(serde_json::to_string_pretty(&v).expect("serializable") + "\n")
    };
    Ok(vec![
        ("circle.json".into(), cellular::circle().to_json()),
        ("circle_two_cells.json".into(), cellular::circle_two_cells().to_json()),
        ("torus.json".into(), cellular::torus().to_json()),
        ("lens_5_1.json".into(), lens51.to_json()),
        ("lens_5_2.json".into(), cellular::lens(5, 2)?.to_json()),
        ("lambda_minus1.json".into(), Representation::circle_character(c(-1.0, 0.0))?.to_json()?),
        ("lambda_one.json".into(), Representation::circle_character(c(1.0, 0.0))?.to_json()?),
        ("regrep.json".into(), regrep.to_json()?),
        ("circle_regrep.json".into(), bundle(&cellular::circle(), &regrep)?),
        ("zeta5.json".into(), Representation::cyclic_character(5, 1)?.to_json()?),
        ("z5_regular.json".into(), Representation::finite_regular(crate::category::GroupTable::cyclic(5))?.to_json()?),
        ("torus_character.json".into(), Representation::torus_character(c(0.0, 1.0), c(-1.0, 0.0))?.to_json()?),
    ])
}

/// Writes the bundled inputs; re-emitting produces identical bytes.
pub fn emit_examples(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for (name, contents) in example_files()? {
        let p = dir.join(name);
        write(&p, &contents)?;
        out.push(p);
    }
    Ok(out)
}
