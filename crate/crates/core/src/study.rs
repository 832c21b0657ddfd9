//! Convergence studies over mesh levels, contrast sweeps at a fixed level,
//! and their CSV, Markdown and field outputs.
//!
//! A [`StudyConfig`] is read from flat `key = value` text. Every output file
//! starts with the fully resolved configuration as `#` comment lines. Outputs
//! carry no timings, so identical configurations give identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::assembly::{
    solve_problem, Discretization, DiscretizationOptions, SolverOptions, SparseSystem,
};
use crate::dofs::DofLayout;
use crate::error::{Error, Result};
use crate::forms::{radial_problem, Affine, Diffusion, Method, MethodVariant, ProblemSpec};
use crate::geometry::{Side, Vec2};
use crate::ife::BasisVariant;
use crate::interface::{Interface, RegionRule};
use crate::mesh::{estimated_bytes, TriMesh};
use crate::norms::{compute_errors, eoc, ErrorReport};

/// Finest level run without `allow_large`.
pub const DESK_MAX_LEVEL: u32 = 5;
/// Finest level accepted at all.
pub const MAX_LEVEL: u32 = 7;

/// Errors at or below this are roundoff and get no e.o.c.
pub const EOC_FLOOR: f64 = 1e-11;

/// Exact CSV header of a convergence table.
pub const CSV_HEADER: &str =
    "level,h,dofs,e0,eoc0,einf,eocinf,e1,eoc1,e1inf,eoc1inf,ebar1,eocbar1,\
                              ebar1inf,eocbar1inf,etilde1inf,eoctilde1inf,enrm,eocn";

/// Exact CSV header of a contrast sweep.
pub const SWEEP_HEADER: &str = "rho_plus,level,dofs,e0,ebar1inf,e1";

/// Reference solution used by a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolutionKind {
    /// Radial power law matching value and flux across the circle.
    #[default]
    Radial,
    /// `u = x₁` on both sides; only an interface solution when `ρ⁺ = ρ⁻`.
    Linear,
}

impl SolutionKind {
    pub fn name(self) -> &'static str {
        match self {
            SolutionKind::Radial => "radial",
            SolutionKind::Linear => "linear",
        }
    }
}

impl std::str::FromStr for SolutionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "radial" => Ok(SolutionKind::Radial),
            "linear" => Ok(SolutionKind::Linear),
            other => Err(Error::Config(format!(
                "unknown solution '{other}' (expected radial or linear)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub l_min: u32,
    pub l_max: u32,
    pub rho_minus: f64,
    pub rho_plus: f64,
    /// `ρ⁺` values of a contrast sweep.
    pub sweep: Vec<f64>,
    /// Level of a contrast sweep.
    pub sweep_level: u32,
    pub gamma: f64,
    pub gamma_f: f64,
    pub method: Method,
    pub basis: BasisVariant,
    pub layout: DofLayout,
    pub regions: RegionRule,
    pub solution: SolutionKind,
    /// Side enclosed by the circle.
    pub inclusion: Side,
    pub r0: f64,
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub out_dir: PathBuf,
    pub emit_csv: bool,
    pub emit_markdown: bool,
    pub emit_mesh: bool,
    pub emit_matrix: bool,
    pub emit_field: bool,
    pub allow_large: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            l_min: 1,
            l_max: DESK_MAX_LEVEL,
            rho_minus: 1.0,
            rho_plus: 1e4,
            sweep: vec![1e1, 1e2, 1e3, 1e4, 1e5, 1e6],
            sweep_level: 4,
            gamma: 10.0,
            gamma_f: 10.0,
            method: Method::E5,
            basis: BasisVariant::default(),
            layout: DofLayout::default(),
            regions: RegionRule::default(),
            solution: SolutionKind::default(),
            inclusion: Side::Minus,
            r0: 1.0 / 3.0,
            alpha: 2.0,
            tol: 1e-12,
            max_iter: 100_000,
            out_dir: PathBuf::from("out"),
            emit_csv: true,
            emit_markdown: true,
            emit_mesh: false,
            emit_matrix: false,
            emit_field: false,
            allow_large: false,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: expected a number, got '{v}'")))
}

fn parse_int<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got '{v}'")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected true or false, got '{v}'"
        ))),
    }
}

fn parse_side(key: &str, v: &str) -> Result<Side> {
    match v.trim().to_ascii_lowercase().as_str() {
        "minus" | "-" => Ok(Side::Minus),
        "plus" | "+" => Ok(Side::Plus),
        _ => Err(Error::Config(format!(
            "{key}: expected minus or plus, got '{v}'"
        ))),
    }
}

/// `A..B` (inclusive) or a single level `A`.
pub fn parse_levels(v: &str) -> Result<(u32, u32)> {
    let v = v.trim();
    match v.split_once("..") {
        Some((a, b)) => Ok((
            parse_int("levels", a)?,
            parse_int("levels", b.trim_start_matches('='))?,
        )),
        None => {
            let l = parse_int("levels", v)?;
            Ok((l, l))
        }
    }
}

fn join_f64(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| format!("{x:e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl StudyConfig {
    /// Defaults overridden by the `key = value` lines of `text`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected 'key = value', got '{raw}'",
                    n + 1
                ))
            })?;
            self.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "levels" => (self.l_min, self.l_max) = parse_levels(v)?,
            "l_min" => self.l_min = parse_int(key, v)?,
            "l_max" => self.l_max = parse_int(key, v)?,
            "rho_minus" => self.rho_minus = parse_f64(key, v)?,
            "rho_plus" => self.rho_plus = parse_f64(key, v)?,
            "sweep" => {
                self.sweep = v
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse_f64(key, s))
                    .collect::<Result<_>>()?
            }
            "sweep_level" => self.sweep_level = parse_int(key, v)?,
            "gamma" => self.gamma = parse_f64(key, v)?,
            "gamma_f" => self.gamma_f = parse_f64(key, v)?,
            "method" => self.method = v.parse()?,
            "basis" => self.basis = v.parse()?,
            "layout" => self.layout = v.parse()?,
            "regions" => self.regions = v.parse()?,
            "solution" => self.solution = v.parse()?,
            "inclusion" => self.inclusion = parse_side(key, v)?,
            "r0" => self.r0 = parse_f64(key, v)?,
            "alpha" => self.alpha = parse_f64(key, v)?,
            "tol" => self.tol = parse_f64(key, v)?,
            "max_iter" => self.max_iter = parse_int(key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            "emit_csv" => self.emit_csv = parse_bool(key, v)?,
            "emit_markdown" => self.emit_markdown = parse_bool(key, v)?,
            "emit_mesh" => self.emit_mesh = parse_bool(key, v)?,
            "emit_matrix" => self.emit_matrix = parse_bool(key, v)?,
            "emit_field" => self.emit_field = parse_bool(key, v)?,
            "allow_large" => self.allow_large = parse_bool(key, v)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Every setting as `(key, value)`, in a form [`StudyConfig::set`] reads back.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("l_min", self.l_min.to_string()),
            ("l_max", self.l_max.to_string()),
            ("rho_minus", format!("{:e}", self.rho_minus)),
            ("rho_plus", format!("{:e}", self.rho_plus)),
            ("sweep", join_f64(&self.sweep)),
            ("sweep_level", self.sweep_level.to_string()),
            ("gamma", format!("{:e}", self.gamma)),
            ("gamma_f", format!("{:e}", self.gamma_f)),
            ("method", self.method.name().into()),
            ("basis", self.basis.name().into()),
            ("layout", self.layout.name().into()),
            ("regions", self.regions.name().into()),
            ("solution", self.solution.name().into()),
            ("inclusion", self.inclusion.label().into()),
            ("r0", format!("{:e}", self.r0)),
            ("alpha", format!("{:e}", self.alpha)),
            ("tol", format!("{:e}", self.tol)),
            ("max_iter", self.max_iter.to_string()),
            ("out_dir", self.out_dir.display().to_string()),
            ("emit_csv", self.emit_csv.to_string()),
            ("emit_markdown", self.emit_markdown.to_string()),
            ("emit_mesh", self.emit_mesh.to_string()),
            ("emit_matrix", self.emit_matrix.to_string()),
            ("emit_field", self.emit_field.to_string()),
            ("allow_large", self.allow_large.to_string()),
        ]
    }

    /// The resolved configuration as `# key = value` lines.
    pub fn echo(&self) -> String {
        self.entries()
            .iter()
            .map(|(k, v)| format!("# {k} = {v}\n"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(1 <= self.l_min && self.l_min <= self.l_max) {
            return Err(Error::Config(format!(
                "need 1 <= l_min <= l_max, got {}..{}",
                self.l_min, self.l_max
            )));
        }
        if !(self.rho_minus > 0.0 && self.rho_minus.is_finite()) {
            return Err(Error::Config(format!(
                "rho_minus must be positive, got {}",
                self.rho_minus
            )));
        }
        for &rp in std::iter::once(&self.rho_plus).chain(&self.sweep) {
            if !(rp >= self.rho_minus && rp.is_finite()) {
                return Err(Error::Config(format!(
                    "need rho_plus >= rho_minus, got {rp}"
                )));
            }
        }
        if !(self.gamma > 0.0 && self.gamma_f > 0.0) {
            return Err(Error::Config(format!(
                "gamma and gamma_f must be positive, got {} and {}",
                self.gamma, self.gamma_f
            )));
        }
        if !(self.r0 > 0.0 && self.r0 < 1.0) {
            return Err(Error::Config(format!(
                "r0 must lie in (0, 1), got {}",
                self.r0
            )));
        }
        if self.sweep_level == 0 {
            return Err(Error::Config("sweep_level must be at least 1".into()));
        }
        Ok(())
    }

    /// The bilinear form selected by the configuration.
    pub fn variant(&self) -> Result<MethodVariant> {
        MethodVariant::new(self.method, self.gamma, self.gamma_f)
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            ..Default::default()
        }
    }

    pub fn options(&self) -> DiscretizationOptions {
        DiscretizationOptions {
            basis: self.basis,
            layout: self.layout,
            regions: self.regions,
        }
    }

    /// The model problem at contrast `rho_plus`.
    pub fn problem(&self, rho_plus: f64) -> Result<ProblemSpec> {
        let problem = match self.solution {
            SolutionKind::Radial => radial_problem(
                self.rho_minus,
                rho_plus,
                self.alpha,
                self.r0,
                self.inclusion,
            )?,
            SolutionKind::Linear => ProblemSpec {
                rho: Diffusion::new(self.rho_minus, rho_plus)?,
                interface: Interface::circle(Vec2::zeros(), self.r0)?
                    .with_inclusion(self.inclusion),
                solution: std::sync::Arc::new(Affine {
                    value: 0.0,
                    gradient: Vec2::new(1.0, 0.0),
                }),
            },
        };
        problem.validate()?;
        Ok(problem)
    }
}

/// Checks `levels` against the desk-scale limit and returns the memory
/// estimate of every level above it.
pub fn level_guard(
    levels: impl IntoIterator<Item = u32>,
    allow_large: bool,
) -> Result<Vec<(u32, u64)>> {
    let mut large = Vec::new();
    for l in levels {
        if l > MAX_LEVEL {
            return Err(Error::Config(format!(
                "level {l} exceeds the supported maximum {MAX_LEVEL}"
            )));
        }
        if l > DESK_MAX_LEVEL {
            if !allow_large {
                return Err(Error::Config(format!(
                    "level {l} needs about {:.1} GiB; pass allow_large to run it",
                    estimated_bytes(l) as f64 / (1u64 << 30) as f64
                )));
            }
            large.push((l, estimated_bytes(l)));
        }
    }
    Ok(large)
}

/// Everything produced by one solve.
#[derive(Debug)]
pub struct LevelRun {
    pub disc: Discretization,
    pub uh: Vec<f64>,
    pub system: SparseSystem,
    pub report: ErrorReport,
}

/// Mesh, discretize, assemble and solve at one level, then measure errors.
/// Failures are tagged with the level and stage.
pub fn run_level(cfg: &StudyConfig, level: u32, rho_plus: f64) -> Result<LevelRun> {
    let problem = cfg.problem(rho_plus)?;
    let variant = cfg.variant()?;
    let mesh = TriMesh::uniform(level).map_err(|e| e.at_stage(level, "mesh"))?;
    let disc = Discretization::with_options(mesh, problem, cfg.options())
        .map_err(|e| e.at_stage(level, "discretize"))?;
    let (uh, system, solve) =
        solve_problem(&disc, &variant, &cfg.solver()).map_err(|e| e.at_stage(level, "solve"))?;
    let report = compute_errors(&disc, &uh, disc.n_dofs(), solve)
        .map_err(|e| e.at_stage(level, "errors"))?;
    Ok(LevelRun {
        disc,
        uh,
        system,
        report,
    })
}

/// Rows of a convergence study in level order.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyTable {
    pub rows: Vec<ErrorReport>,
}

impl StudyTable {
    /// e.o.c. of each error column, one entry per consecutive level pair;
    /// `None` where either error is at roundoff level.
    pub fn eocs(&self) -> [Vec<Option<f64>>; 8] {
        let hs: Vec<f64> = self.rows.iter().map(|r| r.h).collect();
        std::array::from_fn(|k| {
            let col: Vec<f64> = self.rows.iter().map(|r| r.columns()[k]).collect();
            eoc(&col, &hs)
                .into_iter()
                .zip(col.windows(2))
                .map(|(o, e)| o.filter(|_| e[0] > EOC_FLOOR && e[1] > EOC_FLOOR))
                .collect()
        })
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.columns()[k]).collect()
    }

    pub fn to_csv(&self, cfg: &StudyConfig) -> String {
        let eocs = self.eocs();
        let mut out = cfg.echo();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for (i, r) in self.rows.iter().enumerate() {
            write!(out, "{},{:e},{}", r.level, r.h, r.dofs).unwrap();
            for (k, e) in r.columns().iter().enumerate() {
                let o = if i == 0 { None } else { eocs[k][i - 1] };
                write!(
                    out,
                    ",{e:e},{}",
                    o.map(|o| format!("{o:.4}")).unwrap_or_default()
                )
                .unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self, cfg: &StudyConfig) -> String {
        const NAMES: [&str; 8] = [
            "e0",
            "einf",
            "e1",
            "e1inf",
            "ebar1",
            "ebar1inf",
            "etilde1inf",
            "en",
        ];
        let eocs = self.eocs();
        let mut out = String::from("<!--\n");
        out.push_str(&cfg.echo());
        out.push_str("-->\n\n| l | dofs |");
        for n in NAMES {
            write!(out, " {n} | eoc |").unwrap();
        }
        out.push_str("\n|---|---|");
        out.push_str(&"---|---|".repeat(NAMES.len()));
        out.push('\n');
        for (i, r) in self.rows.iter().enumerate() {
            write!(out, "| {} | {} |", r.level, r.dofs).unwrap();
            for (k, e) in r.columns().iter().enumerate() {
                let o = if i == 0 { None } else { eocs[k][i - 1] };
                write!(
                    out,
                    " {e:.2e} | {} |",
                    o.map(|o| format!("{o:.2}")).unwrap_or_default()
                )
                .unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Per-level side outputs requested by the emit flags.
fn emit_level_files(cfg: &StudyConfig, run: &LevelRun, tag: &str) -> Result<()> {
    let level = run.report.level;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    if cfg.emit_mesh {
        run.disc
            .mesh
            .write_dump(&cfg.out_dir.join(format!("mesh_l{level}.txt")))?;
    }
    if cfg.emit_matrix {
        run.system
            .matrix
            .write_matrix_market(&cfg.out_dir.join(format!("matrix_{tag}_l{level}.mtx")))?;
    }
    if cfg.emit_field {
        emit_solution_field(
            &run.disc,
            &run.uh,
            &cfg.out_dir.join(format!("field_{tag}_l{level}.csv")),
        )?;
    }
    Ok(())
}

/// Runs levels `l_min..=l_max` in order.
pub fn run_convergence_study(cfg: &StudyConfig) -> Result<StudyTable> {
    cfg.validate()?;
    level_guard(cfg.l_min..=cfg.l_max, cfg.allow_large)?;
    let mut rows = Vec::new();
    for level in cfg.l_min..=cfg.l_max {
        let run = run_level(cfg, level, cfg.rho_plus)?;
        emit_level_files(cfg, &run, cfg.method.name())?;
        rows.push(run.report);
    }
    Ok(StudyTable { rows })
}

/// One contrast of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub rho_plus: f64,
    pub report: ErrorReport,
}

/// Runs `cfg.sweep` at `cfg.sweep_level`.
pub fn run_contrast_sweep(cfg: &StudyConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    level_guard([cfg.sweep_level], cfg.allow_large)?;
    cfg.sweep
        .iter()
        .map(|&rho_plus| {
            let run = run_level(cfg, cfg.sweep_level, rho_plus)?;
            emit_level_files(cfg, &run, &format!("{}_rho{rho_plus:e}", cfg.method.name()))?;
            Ok(SweepRow {
                rho_plus,
                report: run.report,
            })
        })
        .collect()
}

pub fn sweep_csv(cfg: &StudyConfig, rows: &[SweepRow]) -> String {
    let mut out = cfg.echo();
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let e = &r.report;
        writeln!(
            out,
            "{:e},{},{},{:e},{:e},{:e}",
            r.rho_plus, e.level, e.dofs, e.e0, e.ebar1inf, e.e1
        )
        .unwrap();
    }
    out
}

pub fn sweep_markdown(cfg: &StudyConfig, rows: &[SweepRow]) -> String {
    let mut out = String::from("<!--\n");
    out.push_str(&cfg.echo());
    out.push_str("-->\n\n| rho+ | e0 | ebar1inf | e1 |\n|---|---|---|---|\n");
    for r in rows {
        let e = &r.report;
        writeln!(
            out,
            "| {:.0e} | {:.2e} | {:.2e} | {:.2e} |",
            r.rho_plus, e.e0, e.ebar1inf, e.e1
        )
        .unwrap();
    }
    out
}

/// Writes the CSV and Markdown files of a convergence study; returns the
/// paths written.
pub fn write_study(cfg: &StudyConfig, table: &StudyTable) -> Result<Vec<PathBuf>> {
    let stem = format!("convergence_{}", cfg.method.name());
    let mut written = Vec::new();
    if cfg.emit_csv {
        let p = cfg.out_dir.join(format!("{stem}.csv"));
        write_file(&p, &table.to_csv(cfg))?;
        written.push(p);
    }
    if cfg.emit_markdown {
        let p = cfg.out_dir.join(format!("{stem}.md"));
        write_file(&p, &table.to_markdown(cfg))?;
        written.push(p);
    }
    Ok(written)
}

pub fn write_sweep(cfg: &StudyConfig, rows: &[SweepRow]) -> Result<Vec<PathBuf>> {
    let stem = format!("sweep_{}_l{}", cfg.method.name(), cfg.sweep_level);
    let mut written = Vec::new();
    if cfg.emit_csv {
        let p = cfg.out_dir.join(format!("{stem}.csv"));
        write_file(&p, &sweep_csv(cfg, rows))?;
        written.push(p);
    }
    if cfg.emit_markdown {
        let p = cfg.out_dir.join(format!("{stem}.md"));
        write_file(&p, &sweep_markdown(cfg, rows))?;
        written.push(p);
    }
    Ok(written)
}

/// Sample points of the field dump: the vertices of every cell on their own
/// side, plus both crossings of a cut cell on both sides.
pub fn field_points(disc: &Discretization, cell: usize) -> Vec<(Vec2, Side)> {
    let elem = &disc.geometry.elements[cell];
    let mut pts: Vec<(Vec2, Side)> = (0..3)
        .map(|k| (elem.vertices[k], elem.vertex_sides[k]))
        .collect();
    if let Some(cut) = &elem.cut {
        for c in &cut.crossings {
            pts.extend(Side::BOTH.map(|s| (c.point, s)));
        }
    }
    pts
}

/// The `x,y,side,value` rows of the field dump, cells in order.
pub fn solution_field(disc: &Discretization, uh: &[f64]) -> String {
    let mut out = String::from("x,y,side,value\n");
    for cell in 0..disc.mesh.n_cells() {
        for (x, s) in field_points(disc, cell) {
            writeln!(
                out,
                "{},{},{},{}",
                x.x,
                x.y,
                s.label(),
                disc.eval(uh, cell, x, s)
            )
            .unwrap();
        }
    }
    out
}

/// Writes [`solution_field`] to `path`.
pub fn emit_solution_field(disc: &Discretization, uh: &[f64], path: &Path) -> Result<()> {
    write_file(path, &solution_field(disc, uh))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_echo() {
        let mut cfg = StudyConfig::default();
        cfg.set("levels", "2..3").unwrap();
        cfg.set("method", "e4").unwrap();
        cfg.set("sweep", "10, 1e6").unwrap();
        cfg.set("inclusion", "plus").unwrap();
        let echoed = cfg.echo();
        assert_eq!(StudyConfig::parse(&echoed.replace("# ", "")).unwrap(), cfg);
        assert!(echoed.contains("# layout = broken\n"));
    }

    #[test]
    fn config_parse_errors() {
        assert!(StudyConfig::parse("gamma = x").is_err());
        assert!(StudyConfig::parse("nope = 1").is_err());
        assert!(StudyConfig::parse("just text").is_err());
        let c = StudyConfig::parse("# comment\nlevels = 1..2 # trailing\n\n").unwrap();
        assert_eq!((c.l_min, c.l_max), (1, 2));
        let bad = StudyConfig::parse("levels = 3..2").unwrap();
        assert!(bad.validate().is_err());
        let bad = StudyConfig::parse("rho_plus = 0.5").unwrap();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn levels_syntax() {
        assert_eq!(parse_levels("1..5").unwrap(), (1, 5));
        assert_eq!(parse_levels("2..=4").unwrap(), (2, 4));
        assert_eq!(parse_levels("3").unwrap(), (3, 3));
        assert!(parse_levels("a..b").is_err());
    }

    #[test]
    fn large_levels_need_permission() {
        assert!(level_guard(1..=5, false).unwrap().is_empty());
        assert!(level_guard(1..=6, false).is_err());
        let est = level_guard(5..=7, true).unwrap();
        assert_eq!(est.iter().map(|e| e.0).collect::<Vec<_>>(), vec![6, 7]);
        assert!(est[1].1 > est[0].1);
        assert!(level_guard([8], true).is_err());
    }

    #[test]
    fn csv_first_eoc_row_is_empty() {
        let rows = (1..=2)
            .map(|l| ErrorReport {
                level: l,
                h: 2f64.powf(-(l as f64 + 1.5)),
                e0: 4f64.powi(-(l as i32)),
                e1: 1.0,
                ..Default::default()
            })
            .collect();
        let csv = StudyTable { rows }.to_csv(&StudyConfig::default());
        let body: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body[0], CSV_HEADER);
        let first: Vec<&str> = body[1].split(',').collect();
        let second: Vec<&str> = body[2].split(',').collect();
        assert_eq!(first.len(), 19);
        assert!(first[4].is_empty() && first[18].is_empty());
        assert_eq!(second[4], "2.0000");
        assert_eq!(second[8], "0.0000");
        // zero errors have no order
        assert!(second[6].is_empty());
    }
}
