//! Run configuration: a sectioned TOML file in which every field has a
//! default, unknown keys are rejected, and the canonical serialization of
//! the parsed struct feeds the cache key.

use crate::error::{CliError, Result};
use polaron_core::fock::DEFAULT_STATE_BUDGET;
use polaron_core::grid::GridSpec;
use polaron_core::model::ModelParams;
use polaron_core::quad::QuadOpts;
use polaron_core::solver::LanczosOpts;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub fock: FockSection,
    pub solver: SolverSection,
    pub quad: QuadSection,
    pub solve: SolveSection,
    pub scan: ScanSection,
    pub counterterm: CountertermSection,
    pub uv: UvSection,
    pub ir: IrSection,
    pub gap: GapSection,
    pub pstar: PstarSection,
    pub output: OutputSection,
    pub cache: CacheSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelSection::default(),
            grid: GridSection::default(),
            fock: FockSection::default(),
            solver: SolverSection::default(),
            quad: QuadSection::default(),
            solve: SolveSection::default(),
            scan: ScanSection::default(),
            counterterm: CountertermSection::default(),
            uv: UvSection::default(),
            ir: IrSection::default(),
            gap: GapSection::default(),
            pstar: PstarSection::default(),
            output: OutputSection::default(),
            cache: CacheSection::default(),
        }
    }
}

/// Physical constants of the Hamiltonian. `lambda` is the form-factor
/// cutoff; `inf` is a valid TOML float and disables it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub c: f64,
    pub xi: f64,
    pub g: f64,
    pub kappa: f64,
    pub lambda: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { c: 1.0, xi: 1.0, g: 0.2, kappa: 0.1, lambda: 2.0 }
    }
}

/// Momentum discretization. `kind` is `cartesian` or `spherical`; `n` is the
/// points per axis (cartesian) or radial shells (spherical); `n_angular`
/// applies to spherical grids only. `exclude_origin` overrides the default
/// rule (drop the origin exactly when the grid would place a point there).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub kind: String,
    pub kmax: f64,
    pub n: usize,
    pub n_angular: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exclude_origin: Option<bool>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { kind: "cartesian".into(), kmax: 2.0, n: 4, n_angular: 6, exclude_origin: None }
    }
}

/// Fock truncation: keep states with at most `nmax` phonons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FockSection {
    pub nmax: usize,
}

impl Default for FockSection {
    fn default() -> Self {
        FockSection { nmax: 2 }
    }
}

/// Lanczos controls; `max_iter` caps the total matrix applications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub block: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let o = LanczosOpts::default();
        SolverSection { tol: o.tol, max_iter: o.max_iter, seed: o.seed, block: o.block }
    }
}

/// Adaptive quadrature controls for the counterterm integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadSection {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_regions: usize,
}

impl Default for QuadSection {
    fn default() -> Self {
        let o = QuadOpts::default();
        QuadSection { rel_tol: o.rel_tol, abs_tol: o.abs_tol, max_regions: o.max_regions }
    }
}

/// `solve`: total momentum along +z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveSection {
    pub p: f64,
}

impl Default for SolveSection {
    fn default() -> Self {
        SolveSection { p: 0.0 }
    }
}

/// `scan-p`: evenly spaced momentum schedule, inclusive of both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    pub p_start: f64,
    pub p_stop: f64,
    pub p_count: usize,
}

impl Default for ScanSection {
    fn default() -> Self {
        ScanSection { p_start: 0.0, p_stop: 0.9, p_count: 10 }
    }
}

/// `counterterm`: cutoffs at which both counterterms are evaluated. Fits of
/// the divergence rates are produced when at least 4 cutoffs are given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CountertermSection {
    pub lambdas: Vec<f64>,
}

impl Default for CountertermSection {
    fn default() -> Self {
        CountertermSection { lambdas: vec![4.0, 8.0, 16.0, 32.0] }
    }
}

/// `uv-scan`: energies with counterterm subtraction across form-factor
/// cutoffs on a fixed grid; every cutoff must fit inside the grid box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UvSection {
    pub lambdas: Vec<f64>,
    pub p: f64,
}

impl Default for UvSection {
    fn default() -> Self {
        UvSection { lambdas: vec![1.0, 1.5, 2.0], p: 0.3 }
    }
}

/// `ir-scan`: strictly decreasing mass schedule; the limit is estimated by
/// Richardson extrapolation over the last three points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IrSection {
    pub kappas: Vec<f64>,
    pub p: f64,
}

impl Default for IrSection {
    fn default() -> Self {
        IrSection { kappas: vec![0.08, 0.04, 0.02, 0.01], p: 0.0 }
    }
}

/// `gap`: momenta at which the distance to the one-phonon threshold is
/// measured; `sample_radius` defaults to `kmax/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GapSection {
    pub p_values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_radius: Option<f64>,
}

impl Default for GapSection {
    fn default() -> Self {
        GapSection { p_values: vec![0.0, 0.5, 1.0], sample_radius: None }
    }
}

/// `pstar`: ascending momentum schedule with the two crossing criteria.
/// `eps_crit` defaults to `1e-3 c^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PstarSection {
    pub p_start: f64,
    pub p_stop: f64,
    pub p_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_crit: Option<f64>,
    pub z_crit: f64,
}

impl Default for PstarSection {
    fn default() -> Self {
        PstarSection { p_start: 1.0, p_stop: 2.0, p_count: 11, eps_crit: None, z_crit: 0.1 }
    }
}

/// Output directory and table format (`csv` or `json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: String,
    pub format: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { directory: "out".into(), format: "csv".into() }
    }
}

/// Result cache. An empty `directory` falls back to `POLARON_CACHE_DIR`,
/// then to `.polaron-cache` under the working directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CacheSection {
    pub enabled: bool,
    pub directory: String,
}

impl Default for CacheSection {
    fn default() -> Self {
        CacheSection { enabled: true, directory: String::new() }
    }
}

/// Parses config text plus `--set key=value` overrides. Overrides are
/// applied on the TOML tree before deserialization so an unknown key is
/// reported exactly like one written in the file.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut root: toml::Table =
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set needs key=value, got `{item}`")))?;
        let value = parse_override_value(raw);
        insert_path(&mut root, key.trim(), value)?;
    }
    toml::Value::Table(root)
        .try_into()
        .map_err(|e| CliError::Config(e.to_string()))
}

/// The value side of an override is parsed as TOML; anything that fails to
/// parse (say `cartesian`) is taken as a bare string.
fn parse_override_value(raw: &str) -> toml::Value {
    let doc = format!("v = {}", raw.trim());
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    }
}

fn insert_path(root: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|s| s.is_empty()) {
        return Err(CliError::Config(format!("malformed key `{path}`")));
    }
    let mut table = root;
    for part in &parts[..parts.len() - 1] {
        table = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("key `{path}`: `{part}` is not a section")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Canonical serialization: fixed section order, shortest round-trip
    /// float formatting. Identical configs produce identical text.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 8 hex digits of a hash over the canonical config, the
    /// subcommand, and the crate version.
    pub fn cache_key(&self, command: &str) -> String {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update(b"\n");
        h.update(self.canonical().as_bytes());
        h.update(b"\nversion=");
        h.update(env!("CARGO_PKG_VERSION").as_bytes());
        let digest = h.finalize();
        let mut out = String::with_capacity(8);
        for b in &digest[..4] {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        let m = ModelParams {
            c: self.model.c,
            xi: self.model.xi,
            g: self.model.g,
            kappa: self.model.kappa,
            lambda: self.model.lambda,
            ..ModelParams::default()
        };
        m.validate()?;
        Ok(m)
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        let mut spec = match self.grid.kind.as_str() {
            "cartesian" => GridSpec::cartesian(self.grid.kmax, self.grid.n),
            "spherical" => GridSpec::spherical_m0(self.grid.kmax, self.grid.n, self.grid.n_angular),
            other => {
                return Err(CliError::Config(format!(
                    "grid.kind must be `cartesian` or `spherical`, got `{other}`"
                )))
            }
        };
        if let Some(x) = self.grid.exclude_origin {
            spec.exclude_origin = x;
        }
        Ok(spec)
    }

    pub fn lanczos_opts(&self) -> LanczosOpts {
        LanczosOpts {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            seed: self.solver.seed,
            block: self.solver.block,
        }
    }

    pub fn quad_opts(&self) -> QuadOpts {
        QuadOpts {
            rel_tol: self.quad.rel_tol,
            abs_tol: self.quad.abs_tol,
            max_regions: self.quad.max_regions,
        }
    }

    pub fn state_budget(&self) -> usize {
        DEFAULT_STATE_BUDGET
    }

    /// Inclusive evenly spaced schedule used by `scan-p` and `pstar`.
    pub fn linspace(start: f64, stop: f64, count: usize) -> Result<Vec<f64>> {
        if count == 0 {
            return Err(CliError::Config("schedule count must be positive".into()));
        }
        if count == 1 {
            return Ok(vec![start]);
        }
        if !(stop > start) {
            return Err(CliError::Config(format!(
                "schedule needs stop > start, got [{start}, {stop}]"
            )));
        }
        let step = (stop - start) / (count - 1) as f64;
        Ok((0..count).map(|i| start + step * i as f64).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_reject_unknown_keys() {
        let cfg = RunConfig::default();
        let text = cfg.canonical();
        let back = parse_config(&text, &[]).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.canonical(), text, "serialize(parse(text)) is idempotent");

        let err = parse_config("[model]\ngg = 0.3\n", &[]).unwrap_err();
        assert!(err.to_string().contains("gg"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn overrides_reach_nested_keys_and_keep_types() {
        let cfg = parse_config(
            "",
            &[
                "model.g=0.35".into(),
                "model.lambda=inf".into(),
                "grid.kind=spherical".into(),
                "counterterm.lambdas=[1.0, 2.0]".into(),
                "fock.nmax=3".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.model.g, 0.35);
        assert!(cfg.model.lambda.is_infinite());
        assert_eq!(cfg.grid.kind, "spherical");
        assert_eq!(cfg.counterterm.lambdas, vec![1.0, 2.0]);
        assert_eq!(cfg.fock.nmax, 3);
    }

    #[test]
    fn override_with_unknown_key_is_a_config_error() {
        let err = parse_config("", &["model.mass=1.0".into()]).unwrap_err();
        assert!(err.to_string().contains("mass"), "{err}");
        let err = parse_config("", &["model.g".into()]).unwrap_err();
        assert!(err.to_string().contains("key=value"), "{err}");
    }

    #[test]
    fn cache_key_separates_configs_and_commands() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        b.model.g = 0.25;
        assert_eq!(a.cache_key("solve").len(), 8);
        assert_ne!(a.cache_key("solve"), b.cache_key("solve"));
        assert_ne!(a.cache_key("solve"), a.cache_key("scan-p"));
        assert_eq!(a.cache_key("solve"), RunConfig::default().cache_key("solve"));
    }

    #[test]
    fn infinite_cutoff_survives_the_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.model.lambda = f64::INFINITY;
        let text = cfg.canonical();
        let back = parse_config(&text, &[]).unwrap();
        assert!(back.model.lambda.is_infinite());
    }

    #[test]
    fn linspace_covers_both_ends() {
        let s = RunConfig::linspace(0.0, 0.9, 10).unwrap();
        assert_eq!(s.len(), 10);
        assert!((s[0] - 0.0).abs() < 1e-15);
        assert!((s[9] - 0.9).abs() < 1e-15);
        assert!(RunConfig::linspace(1.0, 1.0, 3).is_err());
        assert!(RunConfig::linspace(0.0, 1.0, 0).is_err());
    }
}
