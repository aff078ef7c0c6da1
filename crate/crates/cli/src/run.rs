use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use serde::Serialize;

use brownflag::brown::{
    brown_density_grid, counting_cell_masses, default_eps, region_count, PointMeasure, DEFAULT_GRID,
};
use brownflag::curve::CurveSpec;
use brownflag::ensemble::{corpus, EnsembleSpec};
use brownflag::grid::Square;
use brownflag::projection::{hs_projection_in, hyperinvariance_check};
use brownflag::region::Region;
use brownflag::schur::Spectrum;
use brownflag::spectral::{decompose_table, SpectralTable};
use brownflag::verify::{
    inputs_digest, verify_decomposition_core, verify_selected, CheckReport, Tolerances, Verdict, VerifyOptions,
    CHECK_IDS,
};
use brownflag::ComplexMatrix;

use crate::config::{Command, RunConfig};

const DEFAULT_LEVEL: u32 = 3;
const DEFAULT_DENSITY_TOL: f64 = 0.05;

/// Runs `cfg`, writing `config.json` and `report.json` into `cfg.out`.
/// Returns 0 when every check passed, 1 on a failed check and 2 on invalid input.
pub fn execute(cfg: &RunConfig) -> u8 {
    let result = fs::create_dir_all(&cfg.out)
        .with_context(|| format!("creating {}", cfg.out.display()))
        .and_then(|_| write_json(&cfg.out.join("config.json"), cfg))
        .and_then(|_| run(cfg));
    match result {
        Ok(reports) => {
            if let Err(e) = write_json(&cfg.out.join("report.json"), &reports) {
                eprintln!("error: {e:#}");
                return 2;
            }
            let failed: Vec<&CheckReport> = reports.iter().filter(|r| r.verdict == Verdict::Fail).collect();
            let skipped = reports.iter().filter(|r| r.verdict == Verdict::Skipped).count();
            for r in &failed {
                eprintln!("FAIL {} ({})", r.id, r.note.as_deref().unwrap_or(&r.inputs_digest[..12]));
            }
            eprintln!("{} checks, {} failed, {} skipped", reports.len(), failed.len(), skipped);
            u8::from(!failed.is_empty())
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> anyhow::Result<()> {
    fs::write(path, brownflag::json::to_string(value)?).with_context(|| format!("writing {}", path.display()))
}

fn run(cfg: &RunConfig) -> anyhow::Result<Vec<CheckReport>> {
    match cfg.command {
        Command::Decompose => decompose(cfg),
        Command::Brown => brown(cfg),
        Command::Project => project(cfg),
        Command::Verify => verify(cfg),
        Command::Curve => curve(cfg),
    }
}

/// The single input matrix of `cfg`, with a display name.
fn input(cfg: &RunConfig) -> anyhow::Result<Option<(String, ComplexMatrix)>> {
    match (&cfg.matrix, &cfg.ensemble) {
        (Some(_), Some(_)) => bail!("--matrix and --ensemble are exclusive"),
        (Some(path), None) => {
            let s = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let t = ComplexMatrix::from_json(&s).with_context(|| format!("matrix {}", path.display()))?;
            Ok(Some((path.display().to_string(), t)))
        }
        (None, Some(spec)) => {
            let spec: EnsembleSpec = spec.parse()?;
            Ok(Some((spec.to_string(), spec.sample()?)))
        }
        (None, None) => Ok(None),
    }
}

fn required_input(cfg: &RunConfig) -> anyhow::Result<(String, ComplexMatrix)> {
    input(cfg)?.context("one of --matrix or --ensemble is required")
}

fn curves(cfg: &RunConfig, default: &[&str]) -> anyhow::Result<Vec<CurveSpec>> {
    let specs: Vec<&str> =
        if cfg.curves.is_empty() { default.to_vec() } else { cfg.curves.iter().map(String::as_str).collect() };
    specs.into_iter().map(|s| Ok(s.parse()?)).collect()
}

fn single_curve(cfg: &RunConfig) -> anyhow::Result<CurveSpec> {
    let mut c = curves(cfg, &["hilbert"])?;
    if c.len() != 1 {
        bail!("exactly one --curve is expected");
    }
    Ok(c.remove(0))
}

fn options(cfg: &RunConfig) -> VerifyOptions {
    let d = Tolerances::default();
    let tol = Tolerances {
        normality: cfg.tol.normality.unwrap_or(d.normality),
        measure: cfg.tol.measure.unwrap_or(d.measure),
        quasinilpotent: cfg.tol.quasinilpotent.unwrap_or(d.quasinilpotent),
    };
    VerifyOptions { seed: cfg.seed, tol, ..VerifyOptions::default() }
}

fn decompose(cfg: &RunConfig) -> anyhow::Result<Vec<CheckReport>> {
    let (_, t) = required_input(cfg)?;
    let curve = single_curve(cfg)?;
    let mut table = SpectralTable::build(&t, curve)?;
    if let Some(level) = cfg.level {
        table = table.with_grid_level(level);
    }
    let reports = verify_decomposition_core(&table, &options(cfg))?;
    let d = decompose_table(table)?;
    d.write_bundle(&cfg.out)?;
    write_json(&cfg.out.join("summary.json"), &d.summary)?;
    Ok(reports)
}

fn brown(cfg: &RunConfig) -> anyhow::Result<Vec<CheckReport>> {
    let (_, t) = required_input(cfg)?;
    let spec = Spectrum::of(&t)?;
    let level = cfg.level.unwrap_or(DEFAULT_LEVEL);
    if level > 8 {
        bail!("--level must be at most 8 for brown");
    }
    let g = cfg.grid.unwrap_or(DEFAULT_GRID);
    if g == 0 || g > 4096 {
        bail!("--grid must lie in 1..=4096");
    }
    if !g.is_multiple_of(1 << level) {
        bail!("--grid must be a multiple of 2^level");
    }
    let eps = cfg.eps.unwrap_or_else(|| default_eps(spec.norm));
    if !(eps > 0.0 && eps.is_finite()) {
        bail!("--eps must be positive and finite");
    }
    let atoms = PointMeasure::from_spectrum(&spec);
    let grid = brown_density_grid(&t, g, eps)?;
    fs::write(cfg.out.join("atoms.csv"), atoms.to_csv())?;
    fs::write(cfg.out.join("density.csv"), grid.to_csv())?;
    fs::write(cfg.out.join("density.pgm"), grid.to_pgm())?;

    let tol = cfg.tol.density.unwrap_or(DEFAULT_DENSITY_TOL);
    let digest = inputs_digest(&["brown", &t.digest(), &format!("g={g}"), &format!("eps={eps:e}"), &format!("level={level}")]);
    let counting = counting_cell_masses(&atoms, grid.square, level);
    let gap = grid.cell_masses(level).iter().zip(&counting).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mut agreement = CheckReport::new(
        "brown.density",
        "cell masses of the regularized density match the eigenvalue counting measure",
        &digest,
        tol,
    );
    agreement.at_most(format!("max level-{level} cell gap"), gap, tol);
    agreement.at_least("total mass", grid.total_mass(), 0.9);
    agreement.at_most("total mass", grid.total_mass(), 1.02);
    let agreement = agreement.with_note(format!(
        "most negative cell before clamping {:e}, clamped mass {:e}",
        grid.min_before_clamp, grid.negative_mass
    ));
    Ok(vec![agreement])
}

#[derive(Serialize)]
struct ProjectionFile<'a> {
    region: &'a str,
    rank: usize,
    trace: f64,
    matrix: &'a ComplexMatrix,
}

fn project(cfg: &RunConfig) -> anyhow::Result<Vec<CheckReport>> {
    let (_, t) = required_input(cfg)?;
    if cfg.regions.is_empty() {
        bail!("at least one --region is required");
    }
    let spec = Spectrum::of(&t)?;
    let square = Square::for_norm(spec.norm);
    let regions: Vec<Region> = cfg.regions.iter().map(|r| Region::parse(r, square)).collect::<Result<_, _>>()?;
    let nu = PointMeasure::from_counts(spec.schur.diag_order.iter().map(|&z| (z, 1)));
    let scale = spec.norm.max(1.0);
    let mut reports = Vec::new();
    for (i, (text, region)) in cfg.regions.iter().zip(&regions).enumerate() {
        let p = hs_projection_in(&spec, region)?;
        write_json(
            &cfg.out.join(format!("projection_{i}.json")),
            &ProjectionFile { region: text, rank: p.rank, trace: p.trace(), matrix: &p.matrix },
        )?;
        let digest = inputs_digest(&["project", &t.digest(), text]);
        let mut r = CheckReport::new(
            "project.properties",
            "P_T(B) is an invariant orthogonal projection with trace nu_T(B)",
            &digest,
            1e-9,
        );
        r.at_most("|(I - P) T P|_F / max(1, |T|)", p.invariance_residual(&t) / scale, 1e-9);
        r.at_most("|P^2 - P|_F", p.idempotence_error(), 1e-9);
        r.at_most("|P - P*|_F", p.selfadjointness_error(), 1e-9);
        r.at_most("|rank P - n nu_T(B)|", p.rank.abs_diff(region_count(&nu, region)) as f64, 0.0);
        let label = format!("region {i}: {text}");
        reports.push(annotate(r, &label));
        reports.push(annotate(hyperinvariance_check(&t, &p, 10, cfg.seed)?, &label));
    }
    Ok(reports)
}

fn verify(cfg: &RunConfig) -> anyhow::Result<Vec<CheckReport>> {
    if let Some(bad) = cfg.checks.iter().find(|c| !CHECK_IDS.contains(&c.as_str())) {
        bail!("unknown check id {bad:?}; known ids: {}", CHECK_IDS.join(", "));
    }
    let inputs: Vec<(String, ComplexMatrix)> = match input(cfg)? {
        Some(one) => vec![one],
        None => corpus().into_iter().map(|s| Ok((s.to_string(), s.sample()?))).collect::<anyhow::Result<_>>()?,
    };
    let curves = curves(cfg, &["hilbert", "morton", "lex"])?;
    let opts = options(cfg);
    let wanted = |id: &str| cfg.checks.is_empty() || cfg.checks.iter().any(|c| c == id);
    let mut reports = Vec::new();
    for (name, t) in &inputs {
        for &curve in &curves {
            let rs = verify_selected(t, curve, &opts, wanted).with_context(|| format!("{name} with {curve}"))?;
            let label = format!("{name} / {curve}");
            reports.extend(rs.into_iter().map(|r| annotate(r, &label)));
        }
    }
    Ok(reports)
}

/// Prefixes the note of `r` with `label`.
fn annotate(r: CheckReport, label: &str) -> CheckReport {
    let note = match &r.note {
        Some(n) => format!("{label}: {n}"),
        None => label.to_string(),
    };
    r.with_note(note)
}

#[derive(Serialize)]
struct OrderRow {
    value: [f64; 2],
    multiplicity: usize,
    /// Position of the cluster under each curve, in `--curve` order.
    positions: Vec<usize>,
    params: Vec<String>,
}

fn curve(cfg: &RunConfig) -> anyhow::Result<Vec<CheckReport>> {
    let curves = curves(cfg, &["hilbert", "morton", "lex"])?;
    let Some((_, t)) = input(cfg)? else {
        // No matrix: tabulate the cell sequence of each curve.
        let level = cfg.level.unwrap_or(2);
        if level == 0 || level > 8 {
            bail!("--level must lie in 1..=8");
        }
        let mut csv = String::from("curve,position,cell\n");
        for c in &curves {
            let c = CurveSpec::new(c.kind, level)?.bind(Square::new(1.0));
            let m = 1u64 << level;
            let mut cells: Vec<(u64, u64)> = (0..m * m)
                .map(|k| {
                    let coord = Square::cell_coord(k + 1, level);
                    let z = c.square.cell_center(coord, level);
                    Ok((c.cell_index_of(z)?, k + 1))
                })
                .collect::<anyhow::Result<_>>()?;
            cells.sort();
            for (pos, (_, k)) in cells.into_iter().enumerate() {
                csv.push_str(&format!("{},{pos},{k}\n", c.spec()));
            }
        }
        fs::write(cfg.out.join("curve_cells.csv"), csv)?;
        return Ok(vec![]);
    };
    let tables: Vec<SpectralTable> =
        curves.iter().map(|&c| SpectralTable::build(&t, c)).collect::<Result<_, _>>()?;
    let base = &tables[0];
    let mut rows = Vec::with_capacity(base.clusters.len());
    for c in &base.clusters {
        let mut positions = Vec::new();
        let mut params = Vec::new();
        for tb in &tables {
            let j = tb.clusters.iter().position(|d| d.value == c.value).context("cluster lost between tables")?;
            positions.push(j);
            params.push(tb.params[j].to_string());
        }
        rows.push(OrderRow { value: [c.value.re, c.value.im], multiplicity: c.multiplicity, positions, params });
    }
    let names: Vec<String> = curves.iter().map(ToString::to_string).collect();
    let mut csv = format!("re,im,multiplicity,{}\n", names.join(","));
    for r in &rows {
        let pos: Vec<String> = r.positions.iter().map(ToString::to_string).collect();
        csv.push_str(&format!(
            "{},{},{},{}\n",
            brownflag::json::format_f64(r.value[0]),
            brownflag::json::format_f64(r.value[1]),
            r.multiplicity,
            pos.join(",")
        ));
    }
    fs::write(cfg.out.join("order.csv"), csv)?;
    write_json(&cfg.out.join("order.json"), &serde_json::json!({ "curves": names, "clusters": rows }))?;

    let mut reports = Vec::new();
    for tb in &tables {
        let digest = inputs_digest(&["curve", &t.digest(), &tb.curve.spec().to_string()]);
        let mut r = CheckReport::new("curve.separation", "distinct clusters receive distinct parameters", &digest, 0.0);
        let collisions = tb.params.windows(2).filter(|w| w[0] >= w[1]).count();
        r.at_most("non-increasing adjacent parameters", collisions as f64, 0.0);
        reports.push(r.with_note(tb.curve.spec().to_string()));
    }
    Ok(reports)
}
