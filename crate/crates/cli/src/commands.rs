//! Subcommand bodies. Every command builds a numeric table, persists it
//! through the cache, and prints a one-line summary; `check` runs the
//! reduced invariant suite instead and fails the process on any violation.

use crate::cache;
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output::{table_json, write_atomic, Table};
use polaron_core::diagnostics::{
    check_gross_convexity, default_eps_crit, estimate_pstar, hvz_gap, mean_phonons,
    pstar_bare_threshold, pt2_energy, pullthrough_envelope, richardson_extrapolate, scan_ir,
    scan_momentum, scan_uv, vacuum_weight,
};
use polaron_core::fock::{assemble, enumerate_basis, FockBasis};
use polaron_core::grid::{build_grid, Grid, GridKind, GridSpec};
use polaron_core::model::ModelParams;
use polaron_core::renorm::{fit_divergence, sigma1, sigma2, FitForm};
use polaron_core::solver::{dense_ground_oracle, lanczos_ground, random_sparse, GroundState};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Resolved invocation context shared by all commands.
pub struct Ctx {
    pub cfg: RunConfig,
    pub out_dir: PathBuf,
    pub format: Format,
    pub no_cache: bool,
}

/// One rendered output file plus the summary line describing it.
struct Rendered {
    files: Vec<(String, Vec<u8>)>,
    summary: String,
}

fn json_bytes(v: serde_json::Value) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(&v).expect("json serializes");
    bytes.push(b'\n');
    bytes
}

/// Order-sensitive digest of the discretized field: mode momenta, weights,
/// and stored couplings, so artifacts record exactly which grid they used.
fn grid_fingerprint(grid: &Grid) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for m in &grid.modes {
        for v in [m.k[0], m.k[1], m.k[2], m.weight, m.coupling] {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

impl Ctx {
    fn use_cache(&self) -> bool {
        self.cfg.cache.enabled && !self.no_cache
    }

    /// Cache-aware driver: serve every requested file from the cache when
    /// all are present, otherwise compute once and store the results.
    fn run_cached(
        &self,
        command: &str,
        names: &[String],
        compute: impl FnOnce() -> Result<Rendered>,
    ) -> Result<()> {
        let root = cache::cache_root(&self.cfg);
        if self.use_cache() {
            let mut hits = Vec::new();
            for name in names {
                match cache::get(&root, name)? {
                    Some(bytes) => hits.push((name.clone(), bytes)),
                    None => {
                        hits.clear();
                        break;
                    }
                }
            }
            if hits.len() == names.len() {
                for (name, bytes) in &hits {
                    write_atomic(&self.out_dir.join(name), bytes)?;
                }
                println!(
                    "{command}: cache hit -> {}",
                    self.out_dir.join(&names[0]).display()
                );
                return Ok(());
            }
        }
        let rendered = compute()?;
        for (name, bytes) in &rendered.files {
            write_atomic(&self.out_dir.join(name), bytes)?;
            if self.use_cache() {
                cache::put(&root, name, bytes)?;
            }
        }
        println!("{}", rendered.summary);
        Ok(())
    }

    /// Names of the files one table-producing command writes: the table in
    /// the chosen format, plus the metadata sidecar when the table is csv.
    fn artifact_names(&self, base: &str) -> Vec<String> {
        match self.format {
            Format::Csv => vec![format!("{base}.csv"), format!("{base}.json")],
            Format::Json => vec![format!("{base}.json")],
        }
    }

    /// Attach the reproducibility metadata every artifact carries: crate
    /// version and the exact canonical configuration the cache key hashes.
    fn stamp(&self, extras: &mut serde_json::Value) {
        let obj = extras.as_object_mut().expect("extras is an object");
        obj.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        obj.insert("config".into(), self.cfg.canonical().into());
    }

    /// Render one table to the artifact set of `artifact_names`: csv table
    /// plus a json sidecar (columns, units, metadata), or a single json
    /// document with the rows inline.
    fn emit_table(
        &self,
        base: &str,
        table: &Table,
        mut extras: serde_json::Value,
    ) -> Result<Vec<(String, Vec<u8>)>> {
        self.stamp(&mut extras);
        let columns: Vec<&str> = table.columns.iter().map(|(n, _)| n.as_str()).collect();
        let units: Vec<&str> = table.columns.iter().map(|(_, u)| u.as_str()).collect();
        match self.format {
            Format::Csv => Ok(vec![
                (format!("{base}.csv"), table.render(',')?.into_bytes()),
                (
                    format!("{base}.json"),
                    json_bytes(serde_json::json!({
                        "columns": columns,
                        "units": units,
                        "extras": extras,
                    })),
                ),
            ]),
            Format::Json => Ok(vec![(
                format!("{base}.json"),
                json_bytes(table_json(table, extras)?),
            )]),
        }
    }

    fn solve_ground(
        &self,
        grid: &Grid,
        basis: &FockBasis,
        params: &ModelParams,
    ) -> Result<GroundState> {
        let h = assemble(grid, basis, params)?;
        let gs = lanczos_ground(&h, &self.cfg.lanczos_opts())?;
        if !gs.converged {
            return Err(CliError::NonConvergence(format!(
                "ground state residual {:.3e} after {} matvecs (dim {})",
                gs.residual, gs.matvecs, h.dim
            )));
        }
        Ok(gs)
    }
}

pub fn solve(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let key = cfg.cache_key("solve");
    let base = format!("solve-{key}");
    let names = ctx.artifact_names(&base);
    ctx.run_cached("solve", &names, || {
        let p = [0.0, 0.0, cfg.solve.p];
        let params = cfg.model_params()?.with_momentum(p);
        let grid = build_grid(&cfg.grid_spec()?, &params)?;
        let basis = enumerate_basis(grid.len(), cfg.fock.nmax, cfg.state_budget())?;
        eprintln!("solve: {} modes, {} states", grid.len(), basis.dim());
        let gs = ctx.solve_ground(&grid, &basis, &params)?;
        let z = vacuum_weight(&gs.vector);
        let n_mean = mean_phonons(&basis, &gs.vector);
        let mut table = Table::new(&[
            ("p", "c"),
            ("energy", "c^2"),
            ("residual", "c^2"),
            ("z", ""),
            ("n_mean", ""),
        ]);
        table.push(vec![cfg.solve.p, gs.energy, gs.residual, z, n_mean]);
        let extras = serde_json::json!({
            "dim": basis.dim(),
            "matvecs": gs.matvecs,
            "cache_key": key,
            "grid_hash": grid_fingerprint(&grid),
        });
        Ok(Rendered {
            files: ctx.emit_table(&base, &table, extras)?,
            summary: format!(
                "solve[{key}]: E({:.4}) = {:.16e}  z = {:.6}  (dim {})",
                cfg.solve.p,
                gs.energy,
                z,
                basis.dim()
            ),
        })
    })
}

pub fn scan_p(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let key = cfg.cache_key("scan-p");
    let base = format!("scan-p-{key}");
    let names = ctx.artifact_names(&base);
    ctx.run_cached("scan-p", &names, || {
        let params = cfg.model_params()?;
        let grid = build_grid(&cfg.grid_spec()?, &params)?;
        let sched = RunConfig::linspace(cfg.scan.p_start, cfg.scan.p_stop, cfg.scan.p_count)?;
        eprintln!("scan-p: {} schedule points, {} modes", sched.len(), grid.len());
        let table =
            scan_momentum(&grid, &params, &sched, cfg.fock.nmax, &cfg.lanczos_opts())?;
        if let Some(bad) = table.rows.iter().find(|r| !r.converged) {
            return Err(CliError::NonConvergence(format!(
                "solve at p = {} missed the residual target",
                bad.p
            )));
        }
        let mut out = Table::new(&[
            ("p", "c"),
            ("energy", "c^2"),
            ("residual", "c^2"),
            ("z", ""),
            ("n_mean", ""),
            ("dgamma_p_z", "c"),
        ]);
        for r in &table.rows {
            out.push(vec![r.p, r.energy, r.residual, r.z, r.n_mean, r.dgamma_p_z]);
        }
        let extras = serde_json::json!({
            "n_max": table.n_max,
            "cache_key": key,
            "grid_hash": grid_fingerprint(&grid),
        });
        Ok(Rendered {
            files: ctx.emit_table(&base, &out, extras)?,
            summary: format!(
                "scan-p[{key}]: {} points, E({}) = {:.16e} .. E({}) = {:.16e}",
                out.rows.len(),
                cfg.scan.p_start,
                out.rows[0][1],
                cfg.scan.p_stop,
                out.rows.last().unwrap()[1]
            ),
        })
    })
}

pub fn counterterm(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let key = cfg.cache_key("counterterm");
    let base = format!("counterterm-{key}");
    let names = vec![format!("{base}.csv"), format!("{base}.json")];
    ctx.run_cached("counterterm", &names, || {
        let params = cfg.model_params()?;
        let lambdas = &cfg.counterterm.lambdas;
        if lambdas.is_empty() || lambdas.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(CliError::Config(
                "counterterm.lambdas must be a nonempty list of positive finite cutoffs".into(),
            ));
        }
        let qopts = cfg.quad_opts();
        let mut table = Table::new(&[
            ("lambda", "1/xi"),
            ("sigma1", "c^2"),
            ("sigma1_err", "c^2"),
            ("sigma2", "c^2"),
            ("sigma2_err", "c^2"),
        ]);
        let mut s1 = Vec::new();
        let mut s2 = Vec::new();
        for &l in lambdas {
            let a = sigma1(&params, l, &qopts)?;
            let b = sigma2(&params, l, &qopts)?.total();
            if !a.converged || !b.converged {
                return Err(CliError::NonConvergence(format!(
                    "counterterm quadrature at cutoff {l} missed its tolerance"
                )));
            }
            eprintln!("counterterm: L = {l}  sigma1 = {:.8e}  sigma2 = {:.8e}", a.value, b.value);
            table.push(vec![l, a.value, a.error, b.value, b.error]);
            s1.push((l, a.value));
            s2.push((l, b.value));
        }
        let fits = if lambdas.len() >= 4 {
            let f1 = fit_divergence(&s1, FitForm::LinearInL)?;
            let f2 = fit_divergence(&s2, FitForm::LogInL)?;
            serde_json::json!({
                "e1": f1.e, "e1_offset": f1.offset, "e1_residual": f1.residual,
                "e2": f2.e, "e2_offset": f2.offset, "e2_residual": f2.residual,
            })
        } else {
            serde_json::json!(null)
        };
        let summary = match &fits {
            serde_json::Value::Null => format!("counterterm[{key}]: {} cutoffs, no fit (need 4)", lambdas.len()),
            v => format!(
                "counterterm[{key}]: e1 = {:.10e}  e2 = {:.10e}",
                v["e1"].as_f64().unwrap(),
                v["e2"].as_f64().unwrap()
            ),
        };
        let mut extras = serde_json::json!({"fits": fits, "cache_key": key});
        ctx.stamp(&mut extras);
        let csv = (format!("{base}.csv"), table.render(',')?.into_bytes());
        let json = (format!("{base}.json"), json_bytes(table_json(&table, extras)?));
        Ok(Rendered { files: vec![csv, json], summary })
    })
}

pub fn uv_scan(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let key = cfg.cache_key("uv-scan");
    let base = format!("uv-scan-{key}");
    let names = ctx.artifact_names(&base);
    ctx.run_cached("uv-scan", &names, || {
        let params = cfg.model_params()?;
        let spec = cfg.grid_spec()?;
        let lambdas = &cfg.uv.lambdas;
        if lambdas.is_empty() || lambdas.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(CliError::Config(
                "uv.lambdas must be a nonempty list of positive finite cutoffs".into(),
            ));
        }
        eprintln!("uv-scan: {} cutoffs at p = {}", lambdas.len(), cfg.uv.p);
        let table = scan_uv(
            &spec,
            &params,
            [0.0, 0.0, cfg.uv.p],
            lambdas,
            cfg.fock.nmax,
            &cfg.lanczos_opts(),
            &cfg.quad_opts(),
        )?;
        if let Some(bad) = table.rows.iter().find(|r| !r.converged) {
            return Err(CliError::NonConvergence(format!(
                "solve at cutoff {} missed the residual target",
                bad.lambda
            )));
        }
        let mut out = Table::new(&[
            ("lambda", "1/xi"),
            ("energy", "c^2"),
            ("sigma1_disc", "c^2"),
            ("sigma2", "c^2"),
            ("subtracted1", "c^2"),
            ("subtracted2", "c^2"),
            ("residual", "c^2"),
        ]);
        for r in &table.rows {
            out.push(vec![
                r.lambda,
                r.energy,
                r.sigma1_disc,
                r.sigma2,
                r.subtracted1,
                r.subtracted2,
                r.residual,
            ]);
        }
        // the grid is rebuilt per cutoff inside the scan, so no single
        // fingerprint applies
        let extras = serde_json::json!({"p": cfg.uv.p, "cache_key": key, "grid_hash": null});
        let last = out.rows.last().unwrap();
        Ok(Rendered {
            files: ctx.emit_table(&base, &out, extras)?,
            summary: format!(
                "uv-scan[{key}]: {} cutoffs, E - Sigma1 - Sigma2 at L = {} is {:.10e}",
                out.rows.len(),
                last[0],
                last[5]
            ),
        })
    })
}

pub fn ir_scan(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let key = cfg.cache_key("ir-scan");
    let base = format!("ir-scan-{key}");
    let names = ctx.artifact_names(&base);
    ctx.run_cached("ir-scan", &names, || {
        let params = cfg.model_params()?;
        let kappas = &cfg.ir.kappas;
        if kappas.is_empty() || kappas.iter().any(|k| !(*k > 0.0) || !k.is_finite()) {
            return Err(CliError::Config(
                "ir.kappas must be a nonempty list of positive finite masses".into(),
            ));
        }
        let grid = build_grid(&cfg.grid_spec()?, &params)?;
        eprintln!("ir-scan: {} masses at p = {}", kappas.len(), cfg.ir.p);
        let rows = scan_ir(
            &grid,
            &params,
            [0.0, 0.0, cfg.ir.p],
            kappas,
            cfg.fock.nmax,
            &cfg.lanczos_opts(),
        )?;
        if let Some(bad) = rows.iter().find(|r| !r.converged) {
            return Err(CliError::NonConvergence(format!(
                "solve at kappa = {} missed the residual target",
                bad.kappa
            )));
        }
        let mut out = Table::new(&[
            ("kappa", "c^2"),
            ("energy", "c^2"),
            ("n_mean", ""),
            ("z", ""),
            ("residual", "c^2"),
        ]);
        for r in &rows {
            out.push(vec![r.kappa, r.energy, r.n_mean, r.z, r.residual]);
        }
        let extras = if rows.len() >= 3 {
            let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.kappa, r.energy)).collect();
            let (e0, err) = richardson_extrapolate(&pts)?;
            serde_json::json!({
                "e_extrapolated": e0,
                "richardson_error": err,
                "cache_key": key,
                "grid_hash": grid_fingerprint(&grid),
            })
        } else {
            serde_json::json!({"cache_key": key, "grid_hash": grid_fingerprint(&grid)})
        };
        let summary = match extras.get("e_extrapolated").and_then(|v| v.as_f64()) {
            Some(e0) => format!(
                "ir-scan[{key}]: {} masses, E(kappa -> 0) = {:.10e}",
                rows.len(),
                e0
            ),
            None => format!("ir-scan[{key}]: {} masses (need 3 for extrapolation)", rows.len()),
        };
        Ok(Rendered { files: ctx.emit_table(&base, &out, extras)?, summary })
    })
}

pub fn gap(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let key = cfg.cache_key("gap");
    let base = format!("gap-{key}");
    let names = ctx.artifact_names(&base);
    ctx.run_cached("gap", &names, || {
        let params = cfg.model_params()?;
        let grid = build_grid(&cfg.grid_spec()?, &params)?;
        let radius = cfg.gap.sample_radius.unwrap_or(cfg.grid.kmax / 2.0);
        let opts = cfg.lanczos_opts();
        let mut out = Table::new(&[
            ("p", "c"),
            ("energy", "c^2"),
            ("threshold", "c^2"),
            ("gap", "c^2"),
        ]);
        let bound = params.kappa - 4.0 * opts.tol;
        let mut all_meet = true;
        let mut worst = f64::INFINITY;
        for &p in &cfg.gap.p_values {
            let rep = hvz_gap(&grid, &params, [0.0, 0.0, p], cfg.fock.nmax, radius, &opts)?;
            if !rep.converged {
                return Err(CliError::NonConvergence(format!(
                    "gap solve at p = {p} missed the residual target"
                )));
            }
            eprintln!("gap: p = {p}  gap = {:.8e}  bound = {bound:.8e}", rep.gap);
            all_meet &= rep.gap >= bound;
            worst = worst.min(rep.gap - bound);
            out.push(vec![p, rep.energy, rep.threshold, rep.gap]);
        }
        let extras = serde_json::json!({
            "kappa": params.kappa,
            "bound": bound,
            "all_meet": all_meet,
            "cache_key": key,
            "grid_hash": grid_fingerprint(&grid),
        });
        Ok(Rendered {
            files: ctx.emit_table(&base, &out, extras)?,
            summary: format!(
                "gap[{key}]: {} momenta, worst margin over kappa bound = {worst:.6e} ({})",
                out.rows.len(),
                if all_meet { "ok" } else { "VIOLATED" }
            ),
        })
    })
}

pub fn pstar(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let key = cfg.cache_key("pstar");
    let base = format!("pstar-{key}");
    let names = ctx.artifact_names(&base);
    ctx.run_cached("pstar", &names, || {
        let params = cfg.model_params()?;
        let grid = build_grid(&cfg.grid_spec()?, &params)?;
        let sched =
            RunConfig::linspace(cfg.pstar.p_start, cfg.pstar.p_stop, cfg.pstar.p_count)?;
        let eps = cfg.pstar.eps_crit.unwrap_or_else(|| default_eps_crit(params.c));
        eprintln!("pstar: {} schedule points, eps_crit = {eps:.3e}", sched.len());
        let rep = estimate_pstar(
            &grid,
            &params,
            &sched,
            cfg.fock.nmax,
            eps,
            cfg.pstar.z_crit,
            &cfg.lanczos_opts(),
        )?;
        if let Some(bad) = rep.curve.iter().find(|r| !r.converged) {
            return Err(CliError::NonConvergence(format!(
                "solve at p = {} missed the residual target",
                bad.p
            )));
        }
        let mut out = Table::new(&[
            ("p", "c"),
            ("energy", "c^2"),
            ("z", ""),
            ("delta", "c^2"),
        ]);
        for r in &rep.curve {
            out.push(vec![r.p, r.energy, r.z, r.delta]);
        }
        let bare = pstar_bare_threshold(&grid, &params, eps);
        let extras = serde_json::json!({
            "p_star_delta": rep.p_star_delta,
            "p_star_z": rep.p_star_z,
            "eps_crit": rep.eps_crit,
            "z_crit": rep.z_crit,
            "c": rep.c,
            "bare_threshold": bare,
            "cache_key": key,
            "grid_hash": grid_fingerprint(&grid),
        });
        let files = ctx.emit_table(&base, &out, extras)?;
        let fmt = |v: Option<f64>| match v {
            Some(x) => format!("{x:.6}"),
            None => "none".into(),
        };
        Ok(Rendered {
            files,
            summary: format!(
                "pstar[{key}]: p*_delta = {}  p*_z = {}  (c = {})",
                fmt(rep.p_star_delta),
                fmt(rep.p_star_z),
                rep.c
            ),
        })
    })
}


/// Outcome of one named check inside `check`.
fn report(name: &str, pass: bool, detail: &str) -> bool {
    println!("check {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    pass
}

/// Reduced end-to-end invariant suite. Writes no files and ignores the
/// cache; exits nonzero if any property fails. Sizes are chosen so the
/// whole run finishes in well under a minute on one core.
pub fn check(ctx: &Ctx) -> Result<()> {
    let lopts = ctx.cfg.lanczos_opts();
    let budget = ctx.cfg.state_budget();
    let mut failures = 0usize;

    // perturbative oracle: the Lanczos ground energy has to approach the
    // second-order value quartically in g, so halving g inside the
    // asymptotic window shrinks the difference by about 16, and 12 is a
    // safe floor. Couplings sit well below the point where the g^4 and
    // g^6 coefficients of this truncation trade places.
    {
        let spec = GridSpec { kind: GridKind::Cartesian { n: 4 }, kmax: 2.0, exclude_origin: true };
        let p = [0.0, 0.0, 0.3];
        let mut diff = Vec::new();
        for &g in &[0.025, 0.0125] {
            let params = ModelParams {
                g,
                kappa: 0.05,
                lambda: 2.0,
                p_total: p,
                ..ModelParams::default()
            };
            let grid = build_grid(&spec, &params)?;
            let basis = enumerate_basis(grid.len(), 2, budget)?;
            let gs = lanczos_ground(&assemble(&grid, &basis, &params)?, &lopts)?;
            let e2 = pt2_energy(&grid, &params, p)?;
            if !gs.converged {
                return Err(CliError::NonConvergence("pt2 check solve".into()));
            }
            diff.push((gs.energy - e2).abs());
        }
        let ratio = diff[0] / diff[1];
        failures += !report(
            "pt2-oracle",
            ratio >= 12.0,
            &format!("error ratio under g halving = {ratio:.2}, need >= 12"),
        ) as usize;
    }

    // shared desk-scale grid for the spectral checks
    let spec = GridSpec { kind: GridKind::Cartesian { n: 3 }, kmax: 2.0, exclude_origin: true };

    // Gross bounds and convexity of p -> E(p)
    {
        let params = ModelParams {
            g: 0.2,
            kappa: 0.1,
            lambda: 2.0,
            ..ModelParams::default()
        };
        let grid = build_grid(&spec, &params)?;
        let sched = [0.0, 0.2, 0.4, 0.6, 0.8];
        let table = scan_momentum(&grid, &params, &sched, 2, &lopts)?;
        let rep = check_gross_convexity(&table, 1e-8)?;
        failures += !report(
            "gross-convexity",
            rep.pass(),
            &format!(
                "lower {:.3e}  upper {:.3e}  convexity {:.3e}  lipschitz {:.3e}",
                rep.lower.worst, rep.upper.worst, rep.convexity.worst, rep.lipschitz.worst
            ),
        ) as usize;
    }

    // HVZ gap at three momenta. The n = 3 grid keeps its innermost shell
    // at 4/3 kmax/2, outside the sample radius, so this one runs at n = 4.
    {
        let params = ModelParams {
            g: 0.2,
            kappa: 0.1,
            lambda: 2.0,
            ..ModelParams::default()
        };
        let spec = GridSpec { kind: GridKind::Cartesian { n: 4 }, kmax: 2.0, exclude_origin: true };
        let grid = build_grid(&spec, &params)?;
        let mut worst = f64::INFINITY;
        let mut ok = true;
        for &p in &[0.0, 0.5, 1.0] {
            let rep = hvz_gap(&grid, &params, [0.0, 0.0, p], 2, 1.0, &lopts)?;
            ok &= rep.converged && rep.meets(params.kappa, lopts.tol);
            worst = worst.min(rep.gap - (params.kappa - 4.0 * lopts.tol));
        }
        failures += !report(
            "hvz-gap",
            ok,
            &format!("worst margin over kappa bound = {worst:.3e}"),
        ) as usize;
    }

    // pull-through decay of the per-mode amplitudes, plus stability of the
    // envelope maximum under grid refinement at fixed cutoff
    {
        let params = ModelParams {
            g: 0.2,
            kappa: 0.1,
            lambda: 2.0,
            p_total: [0.0, 0.0, 0.5],
            ..ModelParams::default()
        };
        let mut r = Vec::new();
        let mut within = true;
        for n in [4usize, 6] {
            let spec = GridSpec { kind: GridKind::Cartesian { n }, kmax: 2.0, exclude_origin: true };
            let grid = build_grid(&spec, &params)?;
            let basis = enumerate_basis(grid.len(), 2, budget)?;
            let gs = lanczos_ground(&assemble(&grid, &basis, &params)?, &lopts)?;
            if !gs.converged {
                return Err(CliError::NonConvergence("pull-through check solve".into()));
            }
            let env = pullthrough_envelope(&gs, &grid, &basis, &params, [0.0, 0.0, 0.5], 0.25)?;
            within &= env.all_within;
            r.push(env.r_max);
        }
        let drift = (r[1] - r[0]).abs() / r[0];
        failures += !report(
            "pull-through",
            within && drift <= 0.05,
            &format!("bounds hold = {within}, envelope drift under refinement = {:.2}%", 100.0 * drift),
        ) as usize;
    }

    // critical momentum stays at or above c up to the grid offset
    {
        let sched = RunConfig::linspace(1.58, 2.70, 15)?;
        let mut ok = true;
        let mut detail = String::new();
        for &g in &[0.0, 0.1] {
            let params = ModelParams {
                g,
                kappa: 0.1,
                lambda: 2.0,
                ..ModelParams::default()
            };
            let spec = GridSpec { kind: GridKind::Cartesian { n: 5 }, kmax: 2.0, exclude_origin: true };
            let grid = build_grid(&spec, &params)?;
            let eps = default_eps_crit(params.c);
            let rep = estimate_pstar(&grid, &params, &sched, 2, eps, 0.1, &lopts)?;
            let bare = pstar_bare_threshold(&grid, &params, eps)
                .ok_or_else(|| CliError::NonConvergence("bare threshold off-schedule".into()))?;
            let eps_grid = bare - params.c;
            let p_star = rep.p_star_delta.unwrap_or(f64::NEG_INFINITY);
            ok &= p_star >= params.c - eps_grid;
            detail.push_str(&format!("g = {g}: p* = {p_star:.3} vs c - eps_grid = {:.3}  ", params.c - eps_grid));
        }
        failures += !report("pstar", ok, detail.trim_end()) as usize;
    }

    // infrared limit: energies decrease with the mass and Richardson
    // extrapolation lands within a grid tolerance of the smallest mass
    {
        let params = ModelParams {
            g: 0.2,
            kappa: 0.1,
            lambda: 2.0,
            ..ModelParams::default()
        };
        let grid = build_grid(&spec, &params)?;
        let kappas = [0.08, 0.04, 0.02, 0.01];
        let rows = scan_ir(&grid, &params, [0.0, 0.0, 0.0], &kappas, 2, &lopts)?;
        let monotone = rows.windows(2).all(|w| w[1].energy <= w[0].energy + 1e-12);
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.kappa, r.energy)).collect();
        let (e0, _) = richardson_extrapolate(&pts)?;
        let margin = (e0 - rows.last().unwrap().energy).abs();
        failures += !report(
            "ir-limit",
            monotone && margin <= 1e-3,
            &format!("monotone = {monotone}, |E_extrap - E(0.01)| = {margin:.3e}"),
        ) as usize;
    }

    // Lanczos against the dense oracle on random sparse matrices
    {
        let mut worst = 0.0f64;
        for s in 0..12u64 {
            let n = 40 + (s as usize) * 13;
            let h = random_sparse(n, 1000 + s);
            let gs = lanczos_ground(&h, &lopts)?;
            let dense = dense_ground_oracle(&h)?;
            worst = worst.max((gs.energy - dense).abs());
        }
        failures += !report(
            "solver-oracle",
            worst <= 1e-9,
            &format!("worst |lanczos - dense| over 12 matrices = {worst:.3e}"),
        ) as usize;
    }

    if failures > 0 {
        return Err(CliError::CheckFailed(failures));
    }
    println!("check: all properties hold");
    Ok(())
}
