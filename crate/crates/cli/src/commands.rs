//! Subcommand implementations. Each `*_data` function computes in memory;
//! the `cmd_*` wrappers write files under the configured output directory.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use relwave_core::coeffs::{coeff_oracle, coeff_printed, discrepancy_scan, uniform_grid};
use relwave_core::dynamics::{self, discrepancy_report, period_grid, scaling_functions, secular_fit};
use relwave_core::fock::{commutator_check, richardson_tables, RichardsonRow};
use relwave_core::{
    eta_e, ground_packet, CoeffChannel, CoeffSource, FockConfig, GaussianPacket, MomentSeries,
    OscillatorParams,
};
use serde::Serialize;

use crate::config::{electron_rest_energy_ev, Resolved, RunConfig, Scenario};
use crate::error::{CliError, Result};
use crate::output::{write_atomic, write_json, write_table, Table};
use crate::svg::{line_chart, Series};

/// Quadrature tolerance for coefficient oracles.
const COEFF_TOL: f64 = 1e-12;
/// Basis size for the commutator identity check.
pub const COMMUTATOR_DIM: usize = 64;

/// Files written and warnings raised by one command.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl Outcome {
    fn merge(&mut self, other: Outcome) {
        self.files.extend(other.files);
        for w in other.warnings {
            if !self.warnings.contains(&w) {
                self.warnings.push(w);
            }
        }
    }
}

/// Parameters the coefficient tables are evaluated with: the custom
/// scenario keeps its own units, presets use oscillator units.
fn coefficient_params(r: &Resolved) -> OscillatorParams {
    match r.scenario {
        Scenario::Custom => r.params,
        _ => r.natural,
    }
}

pub fn coeff_table(cfg: &RunConfig) -> Result<Table> {
    let r = cfg.resolve()?;
    let params = coefficient_params(&r);
    let grid = period_grid(&params, cfg.periods, cfg.points_per_period)?;
    let names: Vec<String> = CoeffChannel::ALL.iter().map(ToString::to_string).collect();
    let mut columns = vec!["omega_t".to_string()];
    for prefix in ["printed", "oracle", "dev"] {
        columns.extend(names.iter().map(|n| format!("{prefix}_{n}")));
    }
    let mut table = Table::new(columns);
    for &t in &grid {
        let mut row = Vec::with_capacity(25);
        row.push(params.omega * t);
        let printed: Vec<f64> = CoeffChannel::ALL.iter().map(|&ch| coeff_printed(ch, t, &params)).collect();
        let oracle = CoeffChannel::ALL
            .iter()
            .map(|&ch| coeff_oracle(ch, t, &params, COEFF_TOL))
            .collect::<relwave_core::Result<Vec<f64>>>()?;
        row.extend(&printed);
        row.extend(&oracle);
        row.extend(oracle.iter().zip(&printed).map(|(o, p)| (o - p).abs()));
        table.push(row);
    }
    Ok(table)
}

pub fn cmd_coeffs(cfg: &RunConfig) -> Result<Outcome> {
    let table = coeff_table(cfg)?;
    let path = cfg.out_dir.join("coeffs.csv");
    write_table(&path, &table)?;
    Ok(Outcome {
        files: vec![path],
        warnings: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scenario: Scenario,
    pub coeff_source: CoeffSource,
    pub eta_e: f64,
    pub v_rms_over_c: f64,
    pub warnings: Vec<String>,
    pub periods: f64,
    pub points: usize,
    pub max_rel_width_shift: f64,
    pub max_rel_momentum_shift: f64,
    pub max_rel_product_shift: f64,
    pub max_abs_f1: f64,
    pub max_abs_f2: f64,
    /// Per-period growth of the |δσ_q²| envelope relative to σ_q²(0); only
    /// with at least 10 periods.
    pub secular_slope: Option<f64>,
    pub secular_r_squared: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EvolveData {
    pub series: Table,
    pub scaling: Table,
    pub summary: Summary,
    /// The run in oscillator units.
    pub natural: MomentSeries,
}

struct Shifts {
    width: f64,
    momentum: f64,
    product: f64,
}

fn max_rel_shifts(s: &MomentSeries) -> Shifts {
    let mut out = Shifts {
        width: 0.0,
        momentum: 0.0,
        product: 0.0,
    };
    for i in 0..s.len() {
        out.width = out.width.max((s.corr_q2[i] / s.sigma_q2_nr[i]).abs());
        out.momentum = out.momentum.max((s.corr_p2[i] / s.sigma_p2_nr[i]).abs());
        let nr_product = s.product_rel[i] - s.corr_product[i];
        out.product = out.product.max((s.corr_product[i] / nr_product).abs());
    }
    out
}

fn secular(s: &MomentSeries) -> (Option<f64>, Option<f64>) {
    match secular_fit(s) {
        Ok(fit) => {
            let r2 = fit.r_squared.is_finite().then_some(fit.r_squared);
            (Some(fit.slope / s.sigma_q2_nr[0]), r2)
        }
        Err(_) => (None, None),
    }
}

/// Scaling functions of the ground packet; they do not depend on ε, so the
/// nonrelativistic limit evaluates them at ε = 1.
fn scaling_table(omega_t: &[f64], eta: f64, source: CoeffSource) -> Result<Table> {
    let eps = if eta > 0.0 { eta } else { 1.0 };
    let mut table = Table::new(["omega_t", "f1", "f2"]);
    for &wt in omega_t {
        let s = scaling_functions(wt, eps, source)?;
        table.push(vec![s.omega_t, s.f1, s.f2]);
    }
    Ok(table)
}

fn natural_series(r: &Resolved, cfg: &RunConfig) -> Result<MomentSeries> {
    let grid = period_grid(&r.natural, cfg.periods, cfg.points_per_period)?;
    Ok(dynamics::series(&r.natural_packet, &r.natural, &grid, cfg.coeff_source)?)
}

pub fn evolve_data(cfg: &RunConfig) -> Result<EvolveData> {
    let r = cfg.resolve()?;
    let natural = natural_series(&r, cfg)?;
    let phys = natural.denormalize(&r.scales);
    let mut series = Table::new([
        "t",
        "omega_t",
        "sigma_q2_nr",
        "sigma_p2_nr",
        "sigma_q2_rel",
        "sigma_p2_rel",
        "product_rel",
        "corr_q2",
        "corr_p2",
        "corr_product",
    ]);
    for (i, wt) in natural.times.iter().enumerate() {
        series.push(vec![
            phys.times[i],
            *wt,
            phys.sigma_q2_nr[i],
            phys.sigma_p2_nr[i],
            phys.sigma_q2_rel[i],
            phys.sigma_p2_rel[i],
            phys.product_rel[i],
            phys.corr_q2[i],
            phys.corr_p2[i],
            phys.corr_product[i],
        ]);
    }
    let scaling = scaling_table(&natural.times, r.eta_e(), cfg.coeff_source)?;
    let max_abs = |col: &str| {
        scaling
            .column(col)
            .unwrap_or_default()
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    };
    let shifts = max_rel_shifts(&natural);
    let (secular_slope, secular_r_squared) = secular(&natural);
    let summary = Summary {
        scenario: r.scenario,
        coeff_source: cfg.coeff_source,
        eta_e: r.eta_e(),
        v_rms_over_c: r.diagnostics.v_rms_over_c,
        warnings: r.diagnostics.warnings.clone(),
        periods: cfg.periods,
        points: natural.len(),
        max_rel_width_shift: shifts.width,
        max_rel_momentum_shift: shifts.momentum,
        max_rel_product_shift: shifts.product,
        max_abs_f1: max_abs("f1"),
        max_abs_f2: max_abs("f2"),
        secular_slope,
        secular_r_squared,
    };
    Ok(EvolveData {
        series,
        scaling,
        summary,
        natural,
    })
}

fn write_svgs(out: &Path, data: &EvolveData) -> Result<Vec<PathBuf>> {
    let s = &data.natural;
    let rel = |num: &[f64], den: &[f64]| num.iter().zip(den).map(|(a, b)| a / b).collect::<Vec<_>>();
    let dq = rel(&s.corr_q2, &s.sigma_q2_nr);
    let dp = rel(&s.corr_p2, &s.sigma_p2_nr);
    let widths = line_chart(
        "relative width corrections",
        "omega t",
        &s.times,
        &[
            Series { label: "d sigma_q^2 / sigma_q^2", values: &dq },
            Series { label: "d sigma_p^2 / sigma_p^2", values: &dp },
        ],
    );
    let wt = data.scaling.column("omega_t").unwrap_or_default();
    let f1 = data.scaling.column("f1").unwrap_or_default();
    let f2 = data.scaling.column("f2").unwrap_or_default();
    let scaling = line_chart(
        "scaling functions",
        "omega t",
        &wt,
        &[Series { label: "f1", values: &f1 }, Series { label: "f2", values: &f2 }],
    );
    let paths = vec![out.join("widths.svg"), out.join("scaling.svg")];
    write_atomic(&paths[0], widths.as_bytes())?;
    write_atomic(&paths[1], scaling.as_bytes())?;
    Ok(paths)
}

pub fn cmd_evolve(cfg: &RunConfig) -> Result<Outcome> {
    let data = evolve_data(cfg)?;
    let out = &cfg.out_dir;
    let mut files = vec![out.join("series.csv"), out.join("scaling.csv"), out.join("summary.json")];
    write_table(&files[0], &data.series)?;
    write_table(&files[1], &data.scaling)?;
    write_json(&files[2], &data.summary)?;
    if cfg.svg {
        files.extend(write_svgs(out, &data)?);
    }
    Ok(Outcome {
        files,
        warnings: data.summary.warnings.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormulaRow {
    pub name: String,
    pub reference: String,
    pub max_abs_dev: f64,
    pub max_rel_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoeffRow {
    pub channel: String,
    pub max_abs_dev: f64,
    pub fitted_ratio: Option<f64>,
    pub ratio_fit_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommutatorRow {
    pub omega_t: f64,
    pub residual_p: f64,
    pub residual_q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommutatorSummary {
    pub dim: usize,
    pub source: CoeffSource,
    pub max_residual: f64,
    pub rows: Vec<CommutatorRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RichardsonSummary {
    pub observable: String,
    pub tested: usize,
    /// Tested rows with ratio R(ε/2)/R(ε) in [0.2, 0.3].
    pub passing: usize,
    pub min_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
    pub rows: Vec<RichardsonRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RichardsonReport {
    pub epsilon: f64,
    pub fock_dim: usize,
    /// max |exact(ε = 0) − NR| over the grid.
    pub nr_sanity: f64,
    pub tables: Vec<RichardsonSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub scenario: Scenario,
    pub eta_e: f64,
    pub formulas: Vec<FormulaRow>,
    pub coefficients: Vec<CoeffRow>,
    pub commutator: CommutatorSummary,
    /// Absent in the nonrelativistic limit, where there is nothing to extrapolate.
    pub richardson: Option<RichardsonReport>,
}

pub fn compare_data(cfg: &RunConfig) -> Result<CompareReport> {
    let r = cfg.resolve()?;
    let grid = period_grid(&r.natural, cfg.periods, cfg.points_per_period)?;
    let formulas = discrepancy_report(&r.natural_packet, &r.natural, &grid)
        .entries
        .into_iter()
        .map(|e| FormulaRow {
            name: e.name,
            reference: e.reference,
            max_abs_dev: e.max_abs_dev,
            max_rel_dev: e.max_rel_dev,
        })
        .collect();

    let cparams = coefficient_params(&r);
    let coefficients = discrepancy_scan(&uniform_grid(&cparams, 2.0 * TAU, 100), &cparams, COEFF_TOL)?
        .into_iter()
        .map(|d| CoeffRow {
            channel: d.channel,
            max_abs_dev: d.max_abs_dev,
            fitted_ratio: d.fitted_ratio,
            ratio_fit_residual: d.ratio_fit_residual,
        })
        .collect();

    let span = cfg.periods * TAU;
    let ccfg = FockConfig::new(COMMUTATOR_DIM)?;
    let rows = (1..=10)
        .map(|k| {
            let wt = span * k as f64 / 10.0;
            let (rp, rq) = commutator_check(wt, &ccfg, &r.natural, cfg.coeff_source)?;
            Ok(CommutatorRow {
                omega_t: wt,
                residual_p: rp,
                residual_q: rq,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_residual = rows
        .iter()
        .fold(0.0_f64, |m, row| m.max(row.residual_p).max(row.residual_q));
    let commutator = CommutatorSummary {
        dim: COMMUTATOR_DIM,
        source: cfg.coeff_source,
        max_residual,
        rows,
    };

    let richardson = if r.eta_e() > 0.0 {
        let dim = cfg.fock_dim_for(&r.natural_packet, &r.natural);
        let fcfg = FockConfig::new(dim)?;
        let tables = richardson_tables(&r.natural_packet, r.eta_e(), &grid, &fcfg, cfg.coeff_source)?;
        let nr_sanity = tables.first().map_or(0.0, |t| t.noise);
        let tables = tables
            .into_iter()
            .map(|t| {
                let ratios: Vec<f64> = t.tested().map(|row| row.ratio).collect();
                RichardsonSummary {
                    observable: t.observable.name().to_string(),
                    tested: ratios.len(),
                    passing: t.passing(0.25, 0.05),
                    min_ratio: ratios.iter().copied().reduce(f64::min),
                    max_ratio: ratios.iter().copied().reduce(f64::max),
                    rows: t.rows,
                }
            })
            .collect();
        Some(RichardsonReport {
            epsilon: r.eta_e(),
            fock_dim: dim,
            nr_sanity,
            tables,
        })
    } else {
        None
    };

    Ok(CompareReport {
        scenario: r.scenario,
        eta_e: r.eta_e(),
        formulas,
        coefficients,
        commutator,
        richardson,
    })
}

pub fn cmd_compare(cfg: &RunConfig) -> Result<Outcome> {
    let report = compare_data(cfg)?;
    let path = cfg.out_dir.join("compare.json");
    write_json(&path, &report)?;
    Ok(Outcome {
        files: vec![path],
        warnings: Vec::new(),
    })
}

pub const SWEEP_COLUMNS: [&str; 8] = [
    "index",
    "omega",
    "eta_e",
    "max_abs_f1",
    "max_abs_f2",
    "max_rel_width_shift",
    "max_rel_product_shift",
    "secular_slope",
];

/// Electron-trap sweep over η_E or ω (log-spaced), ground packet at every
/// point. Rows come back in sweep order whatever the worker count.
pub fn sweep_data(cfg: &RunConfig) -> Result<Table> {
    cfg.validate()?;
    let traps: Vec<OscillatorParams> = match (cfg.eta_range, cfg.omega_range) {
        (Some(eta), None) => eta
            .points()
            .into_iter()
            .map(|e| OscillatorParams::electron_trap(e * electron_rest_energy_ev()))
            .collect::<relwave_core::Result<_>>()?,
        (None, Some(om)) => om
            .points()
            .into_iter()
            .map(OscillatorParams::electron_at_omega)
            .collect::<relwave_core::Result<_>>()?,
        _ => {
            return Err(CliError::Config(
                "sweep needs exactly one of --eta-range or --omega-range".into(),
            ))
        }
    };
    let nat1 = OscillatorParams::natural(1.0)?;
    let grid = period_grid(&nat1, cfg.periods, cfg.points_per_period)?;
    let scaling = scaling_table(&grid, 1.0, cfg.coeff_source)?;
    let fmax = |col: &str| {
        scaling
            .column(col)
            .unwrap_or_default()
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    };
    let (f1, f2) = (fmax("f1"), fmax("f2"));

    let point = |(i, trap): (usize, &OscillatorParams)| -> Result<Vec<f64>> {
        let eta = eta_e(trap);
        let nat = OscillatorParams::natural(eta)?;
        let packet: GaussianPacket = ground_packet(&nat);
        let s = dynamics::series(&packet, &nat, &grid, cfg.coeff_source)?;
        let shifts = max_rel_shifts(&s);
        let (slope, _) = secular(&s);
        Ok(vec![
            i as f64,
            trap.omega,
            eta,
            f1,
            f2,
            shifts.width,
            shifts.product,
            slope.unwrap_or(f64::NAN),
        ])
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    let rows = pool.install(|| {
        traps
            .par_iter()
            .enumerate()
            .map(point)
            .collect::<Result<Vec<_>>>()
    })?;
    let mut table = Table::new(SWEEP_COLUMNS);
    for row in rows {
        table.push(row);
    }
    Ok(table)
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<Outcome> {
    let table = sweep_data(cfg)?;
    let path = cfg.out_dir.join("sweep.csv");
    write_table(&path, &table)?;
    Ok(Outcome {
        files: vec![path],
        warnings: Vec::new(),
    })
}

/// Index of the files a full report run produced, relative to its directory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBundle {
    pub series_csv: String,
    pub scaling_csv: String,
    pub coeffs_csv: String,
    pub discrepancy_json: String,
    pub summary_json: String,
    pub summary: Summary,
}

pub fn cmd_report(cfg: &RunConfig) -> Result<Outcome> {
    let mut outcome = cmd_coeffs(cfg)?;
    outcome.merge(cmd_evolve(cfg)?);
    outcome.merge(cmd_compare(cfg)?);
    let summary = evolve_data(cfg)?.summary;
    let bundle = ReportBundle {
        series_csv: "series.csv".into(),
        scaling_csv: "scaling.csv".into(),
        coeffs_csv: "coeffs.csv".into(),
        discrepancy_json: "compare.json".into(),
        summary_json: "summary.json".into(),
        summary,
    };
    let path = cfg.out_dir.join("bundle.json");
    write_json(&path, &bundle)?;
    outcome.files.push(path);
    Ok(outcome)
}
