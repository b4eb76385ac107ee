//! The experiments behind each subcommand. Every function computes a report from an
//! [`ExperimentConfig`]; the `write_*` companions turn reports into CSV and SVG files.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use sosub_core::bounds::{bound_sequence, compute_ub, compute_ubpf, BoundKind, BoundResult, SolverOptions};
use sosub_core::measures::{gamma_alpha_normalizer, MeasureSpec};
use sosub_core::numerics::quadrature::{tanh_sinh_panels, TanhSinhOptions};
use sosub_core::numerics::{bisect_root, BigReal};
use sosub_core::polyring::Polynomial;
use sosub_core::pushforward::{
    density_compare_report, lemma_bracket_check, lemma_density_compare, DensityCompareReport, EvenPolyDensity,
    LemmaBracketCheck, PushforwardError,
};

use crate::config::ExperimentConfig;
use crate::output::{write_chart, write_table, Cell, Chart, Series, Table};
use crate::CliError;

fn opts(cfg: &ExperimentConfig) -> SolverOptions {
    SolverOptions::with_precision(cfg.precision_bits)
}

/// A decimal parameter such as `0.95` read at working precision from its shortest decimal form.
pub fn decimal(x: f64, precision: usize) -> Result<BigReal, CliError> {
    BigReal::parse(&x.to_string(), precision).map_err(|e| CliError::Usage(e.to_string()))
}

fn gamma_measure(alpha: &BigReal, n: usize) -> Result<MeasureSpec, CliError> {
    MeasureSpec::gamma(alpha.clone(), n).map_err(|e| CliError::Usage(e.to_string()))
}

fn univariate(text: &str, precision: usize) -> Result<Polynomial, CliError> {
    Polynomial::parse(text, 1, precision).map_err(|e| CliError::Usage(format!("{text:?}: {e}")))
}

fn pushforward_error(e: PushforwardError) -> CliError {
    match e {
        PushforwardError::Invalid(msg) => CliError::Usage(msg),
        other => CliError::Solver(other.to_string()),
    }
}

fn solve(
    f: &Polynomial,
    mu: &MeasureSpec,
    r: u32,
    kind: BoundKind,
    cfg: &ExperimentConfig,
) -> Result<BoundResult, CliError> {
    let res = match kind {
        BoundKind::Standard => compute_ub(f, mu, r, &opts(cfg)),
        BoundKind::Pushforward => compute_ubpf(f, mu, r, &opts(cfg)),
    };
    res.map_err(|e| CliError::Solver(format!("{} of {f} at r = {r}: {e}", kind.label())))
}

/// Columns of the published table.
pub const TABLE1_LEVELS: [u32; 6] = [4, 6, 8, 10, 12, 14];

#[derive(Clone, Debug)]
pub struct Table1Row {
    pub label: String,
    pub f: String,
    pub kind: BoundKind,
    /// One value per entry of [`TABLE1_LEVELS`].
    pub values: Vec<BigReal>,
}

impl Table1Row {
    /// Solver level for column `r`: `r` for push-forward bounds, `2r` for standard ones.
    pub fn level(kind: BoundKind, r: u32) -> u32 {
        match kind {
            BoundKind::Pushforward => r,
            BoundKind::Standard => 2 * r,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Table1 {
    pub precision_bits: usize,
    pub rows: Vec<Table1Row>,
    pub elapsed: Duration,
}

const TABLE1_ROWS: [(&str, &str, BoundKind); 4] = [
    ("ub-pf x^2+x^6", "x1^2+x1^6", BoundKind::Pushforward),
    ("ub(2r) x^2+x^6", "x1^2+x1^6", BoundKind::Standard),
    ("ub-pf x^6", "x1^6", BoundKind::Pushforward),
    ("ub(2r) x^6", "x1^6", BoundKind::Standard),
];

/// Standard and push-forward bounds for `x²+x⁶` and `x⁶` under `Γ₂`.
pub fn table1(cfg: &ExperimentConfig) -> Result<Table1, CliError> {
    let start = Instant::now();
    let p = cfg.precision_bits;
    let mu = gamma_measure(&BigReal::from_i64(2, p), 1)?;
    let cells: Vec<(usize, u32)> =
        (0..TABLE1_ROWS.len()).flat_map(|i| TABLE1_LEVELS.iter().map(move |&r| (i, r))).collect();
    let values: Vec<BigReal> = cells
        .par_iter()
        .map(|&(i, r)| {
            let (label, f, kind) = TABLE1_ROWS[i];
            let f = univariate(f, p)?;
            solve(&f, &mu, Table1Row::level(kind, r), kind, cfg)
                .map(|b| b.value)
                .map_err(|e| CliError::Solver(format!("cell ({label}, r = {r}): {e}")))
        })
        .collect::<Result<_, _>>()?;
    let rows = TABLE1_ROWS
        .iter()
        .enumerate()
        .map(|(i, &(label, f, kind))| Table1Row {
            label: label.to_string(),
            f: f.to_string(),
            kind,
            values: values[i * TABLE1_LEVELS.len()..(i + 1) * TABLE1_LEVELS.len()].to_vec(),
        })
        .collect();
    Ok(Table1 { precision_bits: p, rows, elapsed: start.elapsed() })
}

pub fn write_table1(cfg: &ExperimentConfig, t: &Table1) -> Result<Vec<PathBuf>, CliError> {
    let mut header = vec!["row".to_string()];
    header.extend(TABLE1_LEVELS.iter().map(|r| format!("r={r}")));
    let mut table = Table { header, rows: Vec::new() };
    for row in &t.rows {
        let mut cells = vec![Cell::Text(row.label.clone())];
        cells.extend(row.values.iter().map(Cell::from));
        table.push(cells);
    }
    let mut paths = write_table(&cfg.output_dir, "table1", &table, t.precision_bits)?;
    if cfg.format.with_svg() {
        let series = t
            .rows
            .iter()
            .map(|row| Series {
                name: row.label.clone(),
                points: TABLE1_LEVELS.iter().zip(&row.values).map(|(&r, v)| (r as f64, v.to_f64())).collect(),
            })
            .collect();
        let chart = Chart {
            title: "Bounds for x^2+x^6 and x^6 under Gamma_2".into(),
            x_label: "r".into(),
            y_label: "bound".into(),
            log_x: false,
            log_y: false,
            series,
        };
        paths.push(write_chart(&cfg.output_dir, "table1", &chart)?);
    }
    Ok(paths)
}

#[derive(Clone, Debug)]
pub struct PlateauRow {
    pub r: u32,
    pub value: BigReal,
    pub control: BigReal,
    /// `(value(r−1) − value(r)) / value(r−1)`; absent at the first level.
    pub relative_decrease: Option<f64>,
    pub plateau: bool,
}

#[derive(Clone, Debug)]
pub struct LslReport {
    pub alpha: f64,
    pub precision_bits: usize,
    pub threshold: f64,
    pub rows: Vec<PlateauRow>,
}

impl LslReport {
    pub fn value_at(&self, r: u32) -> Option<&BigReal> {
        self.rows.iter().find(|row| row.r == r).map(|row| &row.value)
    }

    pub fn control_at(&self, r: u32) -> Option<&BigReal> {
        self.rows.iter().find(|row| row.r == r).map(|row| &row.control)
    }
}

fn sequence_values(
    f: &Polynomial,
    mu: &MeasureSpec,
    levels: &[u32],
    kind: BoundKind,
    cfg: &ExperimentConfig,
) -> Result<Vec<BigReal>, CliError> {
    let results = bound_sequence(f, mu, levels, kind, &opts(cfg)).map_err(|e| CliError::Solver(e.to_string()))?;
    levels
        .iter()
        .zip(results)
        .map(|(r, res)| {
            res.map(|b| b.value).map_err(|e| CliError::Solver(format!("{} of {f} at r = {r}: {e}", kind.label())))
        })
        .collect()
}

/// `ub(x², Γ_α, r)` for `r = 0..=r_max` with `ub(x², Γ₂, r)` alongside as a converging control.
pub fn nonconv_lsl(cfg: &ExperimentConfig, alpha: f64, r_max: u32) -> Result<LslReport, CliError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::Usage(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let p = cfg.precision_bits;
    let f = univariate("x1^2", p)?;
    let levels: Vec<u32> = (0..=r_max).collect();
    let values = sequence_values(&f, &gamma_measure(&decimal(alpha, p)?, 1)?, &levels, BoundKind::Standard, cfg)?;
    let controls =
        sequence_values(&f, &gamma_measure(&BigReal::from_i64(2, p), 1)?, &levels, BoundKind::Standard, cfg)?;
    let mut rows = Vec::with_capacity(levels.len());
    for (i, &r) in levels.iter().enumerate() {
        let relative_decrease = (i > 0).then(|| ((&values[i - 1] - &values[i]) / &values[i - 1]).to_f64());
        rows.push(PlateauRow {
            r,
            value: values[i].clone(),
            control: controls[i].clone(),
            relative_decrease,
            plateau: relative_decrease.is_some_and(|d| d < cfg.plateau_threshold),
        });
    }
    Ok(LslReport { alpha, precision_bits: p, threshold: cfg.plateau_threshold, rows })
}

pub fn write_lsl(cfg: &ExperimentConfig, rep: &LslReport) -> Result<Vec<PathBuf>, CliError> {
    let mut table = Table::new(&["alpha", "r", "ub", "ub_control_alpha2", "relative_decrease", "plateau"]);
    for row in &rep.rows {
        table.push(vec![
            Cell::Param(rep.alpha),
            Cell::Int(row.r as i64),
            Cell::from(&row.value),
            Cell::from(&row.control),
            row.relative_decrease.map_or(Cell::Empty, Cell::Float),
            Cell::Bool(row.plateau),
        ]);
    }
    let mut paths = write_table(&cfg.output_dir, "nonconv_lsl", &table, rep.precision_bits)?;
    if cfg.format.with_svg() {
        let chart = Chart {
            title: format!("ub(x^2) under Gamma_{} and Gamma_2", rep.alpha),
            x_label: "r".into(),
            y_label: "bound".into(),
            log_x: false,
            log_y: true,
            series: vec![
                Series {
                    name: format!("alpha = {}", rep.alpha),
                    points: rep.rows.iter().map(|row| (row.r as f64, row.value.to_f64())).collect(),
                },
                Series {
                    name: "alpha = 2".into(),
                    points: rep.rows.iter().map(|row| (row.r as f64, row.control.to_f64())).collect(),
                },
            ],
        };
        paths.push(write_chart(&cfg.output_dir, "nonconv_lsl", &chart)?);
    }
    Ok(paths)
}

#[derive(Clone, Debug)]
pub struct PfRow {
    pub r: u32,
    pub ubpf: BigReal,
    /// `ub` at level `2r`.
    pub ub: BigReal,
}

#[derive(Clone, Debug)]
pub struct PfBlock {
    pub f: String,
    pub rows: Vec<PfRow>,
}

impl PfBlock {
    pub fn sandwich_holds(&self) -> bool {
        self.rows.iter().all(|row| row.ubpf >= row.ub)
    }
}

#[derive(Clone, Debug)]
pub struct PfReport {
    pub alpha: f64,
    pub precision_bits: usize,
    /// `x² + x^{2(⌈α⌉+1)}` first, then the pure power `x^{2(⌈α⌉+1)}`.
    pub blocks: Vec<PfBlock>,
}

/// `ub-pf(g, Γ_α, r)` and `ub(g, Γ_α, 2r)` for `g = x² + x^{2(⌈α⌉+1)}` and for the pure power.
pub fn nonconv_pf(cfg: &ExperimentConfig, alpha: f64, r_max: u32) -> Result<PfReport, CliError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(CliError::Usage(format!("alpha must be positive, got {alpha}")));
    }
    let p = cfg.precision_bits;
    let mu = gamma_measure(&decimal(alpha, p)?, 1)?;
    let e = 2 * (alpha.ceil() as u32 + 1);
    let texts = [format!("x1^2+x1^{e}"), format!("x1^{e}")];
    let levels: Vec<u32> = (1..=r_max).collect();
    let mut blocks = Vec::new();
    for text in texts {
        let f = univariate(&text, p)?;
        let cells: Vec<(u32, BoundKind)> =
            levels.iter().flat_map(|&r| [(r, BoundKind::Pushforward), (r, BoundKind::Standard)]).collect();
        let values: Vec<BigReal> = cells
            .par_iter()
            .map(|&(r, kind)| solve(&f, &mu, Table1Row::level(kind, r), kind, cfg).map(|b| b.value))
            .collect::<Result<_, _>>()?;
        let rows = levels
            .iter()
            .enumerate()
            .map(|(i, &r)| PfRow { r, ubpf: values[2 * i].clone(), ub: values[2 * i + 1].clone() })
            .collect();
        blocks.push(PfBlock { f: text.replace("x1", "x"), rows });
    }
    Ok(PfReport { alpha, precision_bits: p, blocks })
}

pub fn write_pf(cfg: &ExperimentConfig, rep: &PfReport) -> Result<Vec<PathBuf>, CliError> {
    let mut table = Table::new(&["alpha", "f", "r", "ubpf_r", "ub_2r", "ubpf_ge_ub"]);
    for block in &rep.blocks {
        for row in &block.rows {
            table.push(vec![
                Cell::Param(rep.alpha),
                Cell::Text(block.f.clone()),
                Cell::Int(row.r as i64),
                Cell::from(&row.ubpf),
                Cell::from(&row.ub),
                Cell::Bool(row.ubpf >= row.ub),
            ]);
        }
    }
    let mut paths = write_table(&cfg.output_dir, "nonconv_pf", &table, rep.precision_bits)?;
    if cfg.format.with_svg() {
        let mut series = Vec::new();
        for block in &rep.blocks {
            series.push(Series {
                name: format!("ub-pf {}", block.f),
                points: block.rows.iter().map(|row| (row.r as f64, row.ubpf.to_f64())).collect(),
            });
            series.push(Series {
                name: format!("ub(2r) {}", block.f),
                points: block.rows.iter().map(|row| (row.r as f64, row.ub.to_f64())).collect(),
            });
        }
        let chart = Chart {
            title: format!("Push-forward and standard bounds under Gamma_{}", rep.alpha),
            x_label: "r".into(),
            y_label: "bound".into(),
            log_x: false,
            log_y: false,
            series,
        };
        paths.push(write_chart(&cfg.output_dir, "nonconv_pf", &chart)?);
    }
    Ok(paths)
}

#[derive(Clone, Debug)]
pub struct DensityCompareOutcome {
    pub report: DensityCompareReport,
    /// Present when `g = x² + x^{2d}` with `d ≥ 2`.
    pub brackets: Option<LemmaBracketCheck>,
    pub elapsed: Duration,
}

/// Compares `g_#Γ_α` with `(x²)_#Γ_β` on the configured grid. Without `g_override`,
/// `g = x² + x^{2d}` (or `x²` when `d = 1`) and the intermediate brackets are checked too.
pub fn density_compare(
    cfg: &ExperimentConfig,
    alpha: f64,
    d: u32,
    beta: f64,
    g_override: Option<&str>,
) -> Result<DensityCompareOutcome, CliError> {
    let start = Instant::now();
    let p = cfg.precision_bits;
    let alpha_big = decimal(alpha, p)?;
    let beta_big = decimal(beta, p)?;
    let (report, brackets) = match g_override {
        Some(text) => {
            let pd = EvenPolyDensity::new(univariate(text, p)?, alpha_big).map_err(pushforward_error)?;
            (density_compare_report(&pd, &beta_big, &cfg.grid).map_err(pushforward_error)?, None)
        }
        None => {
            let rep = lemma_density_compare(&alpha_big, d, &beta_big, &cfg.grid).map_err(pushforward_error)?;
            let brackets = if d >= 2 { Some(lemma_bracket_check(&rep, d).map_err(pushforward_error)?) } else { None };
            (rep, brackets)
        }
    };
    Ok(DensityCompareOutcome { report, brackets, elapsed: start.elapsed() })
}

pub fn write_density_compare(cfg: &ExperimentConfig, out: &DensityCompareOutcome) -> Result<Vec<PathBuf>, CliError> {
    let rep = &out.report;
    let p = rep.alpha.precision();
    let mut samples = Table::new(&[
        "x",
        "f_density",
        "g_density",
        "ratio_f_over_g",
        "ratio_g_over_f",
        "g_inverse",
        "g_prime_at_inverse",
    ]);
    for s in &rep.samples {
        samples.push(vec![
            Cell::from(&s.x),
            Cell::from(&s.f_density),
            Cell::from(&s.g_density),
            Cell::Real(s.ratio_f_over_g()),
            Cell::Real(s.ratio_g_over_f()),
            Cell::from(&s.g_inverse),
            Cell::from(&s.g_prime_at_inverse),
        ]);
    }
    let mut summary = Table::new(&[
        "alpha",
        "beta",
        "d",
        "g",
        "grid_lo",
        "grid_hi",
        "grid_points",
        "grid_spacing",
        "c1",
        "c1_at",
        "c2",
        "c2_at",
        "r2_tail_increasing",
        "interval_points",
        "inverse_violations",
        "derivative_violations",
        "density_violations",
        "outer_points",
        "outer_violations",
    ]);
    let b = out.brackets.as_ref();
    let count = |f: fn(&LemmaBracketCheck) -> usize| b.map_or(Cell::Empty, |b| Cell::Int(f(b) as i64));
    summary.push(vec![
        Cell::from(&rep.alpha),
        Cell::from(&rep.beta),
        rep.d.map_or(Cell::Empty, |d| Cell::Int(d as i64)),
        Cell::Text(rep.g.to_string()),
        Cell::Param(rep.grid.lo),
        Cell::Param(rep.grid.hi),
        Cell::Int(rep.grid.points as i64),
        Cell::Text(format!("{:?}", rep.grid.spacing).to_lowercase()),
        Cell::from(&rep.c1),
        Cell::from(&rep.c1_at),
        Cell::from(&rep.c2),
        Cell::from(&rep.c2_at),
        Cell::Bool(rep.r2_tail_increasing),
        count(|b| b.interval_points),
        count(|b| b.inverse_violations),
        count(|b| b.derivative_violations),
        count(|b| b.density_violations),
        count(|b| b.outer_points),
        count(|b| b.outer_violations),
    ]);
    let mut paths = write_table(&cfg.output_dir, "density_compare", &samples, p)?;
    paths.extend(write_table(&cfg.output_dir, "density_compare_summary", &summary, p)?);
    if cfg.format.with_svg() {
        let chart = Chart {
            title: format!(
                "Densities: g = {} under Gamma_{}, x^2 under Gamma_{}",
                rep.g,
                rep.alpha.to_f64(),
                rep.beta.to_f64()
            ),
            x_label: "x".into(),
            y_label: "density".into(),
            log_x: true,
            log_y: true,
            series: vec![
                Series {
                    name: "g-push-forward".into(),
                    points: rep.samples.iter().map(|s| (s.x.to_f64(), s.g_density.to_f64())).collect(),
                },
                Series {
                    name: "x^2-push-forward".into(),
                    points: rep.samples.iter().map(|s| (s.x.to_f64(), s.f_density.to_f64())).collect(),
                },
            ],
        };
        paths.push(write_chart(&cfg.output_dir, "density_compare", &chart)?);
    }
    Ok(paths)
}

#[derive(Clone, Debug)]
pub struct DerivRatioRecord {
    pub r: u32,
    pub ub_value: BigReal,
    /// `sup |p′| w_α / ∫ |p| w_α` over the evaluation grid.
    pub sup_ratio: BigReal,
    pub sup_at: f64,
}

#[derive(Clone, Debug)]
pub struct DerivRatioReport {
    pub alpha: f64,
    pub records: Vec<DerivRatioRecord>,
    /// Grid points on each side of the origin (the origin is included as well).
    pub grid_points_per_side: usize,
    pub eval_precision_bits: usize,
    pub quad_rel_tol: f64,
}

/// Evaluation grid per side: log-spaced from `10⁻⁴` to the truncation point.
pub const DERIV_GRID_POINTS: usize = 1500;
/// Precision for evaluating `p` off the solver's grid; the ratio is a diagnostic.
pub const DERIV_EVAL_BITS: usize = 192;
pub const DERIV_QUAD_TOL: f64 = 1e-20;

/// Point beyond which `|x|^k e^{-|x|^α}` is below `e^{-120}` of its peak.
fn truncation(k: u32, alpha: f64) -> f64 {
    let log_f = |x: f64| k as f64 * x.ln() - x.powf(alpha);
    let peak_x = (k.max(1) as f64 / alpha).powf(1.0 / alpha);
    let peak = log_f(peak_x);
    let mut x = peak_x.max(1.0);
    while log_f(x) > peak - 120.0 {
        x *= 1.25;
    }
    x
}

/// `sup |p′| w_α / ∫ |p| w_α` for the square root `p` of the optimal density of
/// `ub(x², Γ_α, r)`, for `r = 0..=r_max`.
pub fn deriv_ratio(cfg: &ExperimentConfig, alpha: f64, r_max: u32) -> Result<DerivRatioReport, CliError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(CliError::Usage(format!("alpha must be positive, got {alpha}")));
    }
    let p = cfg.precision_bits;
    let mu = gamma_measure(&decimal(alpha, p)?, 1)?;
    let f = univariate("x1^2", p)?;
    let levels: Vec<u32> = (0..=r_max).collect();
    let results = bound_sequence(&f, &mu, &levels, BoundKind::Standard, &opts(cfg))
        .map_err(|e| CliError::Solver(e.to_string()))?;
    let mut records = Vec::new();
    for (&r, res) in levels.iter().zip(results) {
        let res = res.map_err(|e| CliError::Solver(format!("ub of x^2 at r = {r}: {e}")))?;
        let (sup_ratio, sup_at) = lemma_ratio(&res.sqrt_density, alpha, r)?;
        records.push(DerivRatioRecord { r, ub_value: res.value, sup_ratio, sup_at });
    }
    Ok(DerivRatioReport {
        alpha,
        records,
        grid_points_per_side: DERIV_GRID_POINTS,
        eval_precision_bits: DERIV_EVAL_BITS,
        quad_rel_tol: DERIV_QUAD_TOL,
    })
}

fn lemma_ratio(p: &Polynomial, alpha: f64, r: u32) -> Result<(BigReal, f64), CliError> {
    let e = DERIV_EVAL_BITS;
    let p = p.with_precision(e);
    let dp = p.derivative(0);
    let a = decimal(alpha, e)?;
    let c = gamma_alpha_normalizer(&a).map_err(|err| CliError::Solver(err.to_string()))?;
    let w = |x: &BigReal| &c * (-x.abs().powf(&a)).exp();
    let x_max = truncation(r, alpha);

    // Symmetric grid: 0 and ±x_i, log-spaced from 1e-4 to x_max.
    let (lo, hi) = (1e-4f64.ln(), x_max.ln());
    let positive: Vec<f64> =
        (0..DERIV_GRID_POINTS).map(|i| (lo + (hi - lo) * i as f64 / (DERIV_GRID_POINTS - 1) as f64).exp()).collect();
    let mut grid: Vec<f64> = positive.iter().rev().map(|x| -x).collect();
    grid.push(0.0);
    grid.extend(&positive);

    let mut sup = BigReal::zero(e);
    let mut sup_at = 0.0;
    for &x in &grid {
        let xb = BigReal::from_f64(x, e);
        let v = dp.eval_univariate(&xb).abs() * w(&xb);
        if v > sup {
            sup = v;
            sup_at = x;
        }
    }

    // Panels split at sign changes of p (where |p| has kinks) and geometrically towards the tails.
    let mut breaks: Vec<BigReal> = Vec::new();
    let tol = BigReal::pow2(-((e / 2) as i64), e);
    let values: Vec<BigReal> = grid.iter().map(|&x| p.eval_univariate(&BigReal::from_f64(x, e))).collect();
    for i in 1..grid.len() {
        if values[i - 1].is_negative() != values[i].is_negative() && !values[i - 1].is_zero() && !values[i].is_zero() {
            let root = bisect_root(
                |y| p.eval_univariate(y),
                &BigReal::from_f64(grid[i - 1], e),
                &BigReal::from_f64(grid[i], e),
                &tol,
            )
            .map_err(|err| CliError::Solver(err.to_string()))?;
            breaks.push(root);
        }
    }
    let mut k = -4i64;
    loop {
        let b = 2f64.powi(k as i32);
        breaks.push(BigReal::from_f64(b, e));
        breaks.push(BigReal::from_f64(-b, e));
        if b >= x_max {
            break;
        }
        k += 1;
    }
    breaks.push(BigReal::zero(e));
    breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    breaks.dedup();
    let opts = TanhSinhOptions { rel_tol: DERIV_QUAD_TOL, abs_tol: 0.0, max_level: 10, min_level: 3 };
    let integral = tanh_sinh_panels(|x| p.eval_univariate(x).abs() * w(x), &breaks, &opts).value;
    if !integral.is_positive() {
        return Err(CliError::Solver(format!("∫|p| w vanished at r = {r}")));
    }
    Ok((sup / integral, sup_at))
}

pub fn write_deriv_ratio(cfg: &ExperimentConfig, reports: &[DerivRatioReport]) -> Result<Vec<PathBuf>, CliError> {
    let mut table = Table::new(&[
        "alpha",
        "r",
        "ub_value",
        "sup_ratio",
        "sup_at",
        "grid_points_per_side",
        "eval_precision_bits",
        "quad_rel_tol",
    ]);
    for rep in reports {
        for rec in &rep.records {
            table.push(vec![
                Cell::Param(rep.alpha),
                Cell::Int(rec.r as i64),
                Cell::from(&rec.ub_value),
                Cell::from(&rec.sup_ratio),
                Cell::Float(rec.sup_at),
                Cell::Int(rep.grid_points_per_side as i64),
                Cell::Int(rep.eval_precision_bits as i64),
                Cell::Param(rep.quad_rel_tol),
            ]);
        }
    }
    let mut paths = write_table(&cfg.output_dir, "deriv_ratio", &table, cfg.precision_bits)?;
    if cfg.format.with_svg() {
        let series = reports
            .iter()
            .map(|rep| Series {
                name: format!("alpha = {}", rep.alpha),
                points: rep.records.iter().map(|rec| (rec.r as f64, rec.sup_ratio.to_f64())).collect(),
            })
            .collect();
        let chart = Chart {
            title: "sup |p'| w / integral |p| w for the optimal density of ub(x^2)".into(),
            x_label: "r".into(),
            y_label: "ratio".into(),
            log_x: false,
            log_y: false,
            series,
        };
        paths.push(write_chart(&cfg.output_dir, "deriv_ratio", &chart)?);
    }
    Ok(paths)
}

#[derive(Clone, Debug)]
pub struct RateRow {
    pub r: u32,
    pub ub: BigReal,
    pub ubpf: BigReal,
}

#[derive(Clone, Debug)]
pub struct CompactRateReport {
    pub f: String,
    pub measure: String,
    pub f_min: BigReal,
    pub precision_bits: usize,
    pub rows: Vec<RateRow>,
    /// Least-squares slope of `log(value − f_min)` against `log r` over the fitted levels.
    pub slope_ub: Option<f64>,
    pub slope_ubpf: Option<f64>,
    pub fit_from: u32,
    pub fit_to: u32,
}

/// Slope of the least-squares line through `(ln r, ln gap)`, over points with a positive gap.
pub fn log_log_slope(points: &[(u32, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(r, g)| *r > 0 && *g > 0.0).map(|&(r, g)| ((r as f64).ln(), g.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Both bounds for `f` on `mu` at `r = 1..=r_max`, with log-log slopes of the gap to `f_min`
/// fitted over the upper half of the levels.
pub fn compact_rate_for(
    cfg: &ExperimentConfig,
    f: &Polynomial,
    mu: &MeasureSpec,
    f_min: &BigReal,
    r_max: u32,
) -> Result<CompactRateReport, CliError> {
    if r_max < 4 {
        return Err(CliError::Usage(format!("compact-rate needs r_max ≥ 4, got {r_max}")));
    }
    let levels: Vec<u32> = (1..=r_max).collect();
    let ub = sequence_values(f, mu, &levels, BoundKind::Standard, cfg)?;
    let ubpf = sequence_values(f, mu, &levels, BoundKind::Pushforward, cfg)?;
    let rows: Vec<RateRow> =
        levels.iter().zip(ub.into_iter().zip(ubpf)).map(|(&r, (ub, ubpf))| RateRow { r, ub, ubpf }).collect();
    let fit_from = r_max.div_ceil(2);
    let gaps = |pick: fn(&RateRow) -> &BigReal| -> Vec<(u32, f64)> {
        rows.iter().filter(|row| row.r >= fit_from).map(|row| (row.r, (pick(row) - f_min).to_f64())).collect()
    };
    Ok(CompactRateReport {
        f: f.to_string(),
        measure: mu.to_string(),
        f_min: f_min.clone(),
        precision_bits: cfg.precision_bits,
        slope_ub: log_log_slope(&gaps(|row| &row.ub)),
        slope_ubpf: log_log_slope(&gaps(|row| &row.ubpf)),
        rows,
        fit_from,
        fit_to: r_max,
    })
}

/// `f = x₁` on the box `[−1, 1]`, where `f_min = −1`.
pub fn compact_rate(cfg: &ExperimentConfig, r_max: u32) -> Result<CompactRateReport, CliError> {
    let p = cfg.precision_bits;
    let mu = MeasureSpec::parse("box:-1..1", p).map_err(|e| CliError::Usage(e.to_string()))?;
    compact_rate_for(cfg, &univariate("x1", p)?, &mu, &BigReal::from_i64(-1, p), r_max)
}

pub fn write_compact_rate(cfg: &ExperimentConfig, rep: &CompactRateReport) -> Result<Vec<PathBuf>, CliError> {
    let mut table = Table::new(&["r", "ub", "ubpf", "ub_gap", "ubpf_gap"]);
    for row in &rep.rows {
        table.push(vec![
            Cell::Int(row.r as i64),
            Cell::from(&row.ub),
            Cell::from(&row.ubpf),
            Cell::Real(&row.ub - &rep.f_min),
            Cell::Real(&row.ubpf - &rep.f_min),
        ]);
    }
    let mut fit = Table::new(&["f", "measure", "kind", "slope", "fit_from", "fit_to"]);
    for (kind, slope) in [("ub", rep.slope_ub), ("ubpf", rep.slope_ubpf)] {
        fit.push(vec![
            Cell::Text(rep.f.clone()),
            Cell::Text(rep.measure.clone()),
            Cell::Text(kind.into()),
            slope.map_or(Cell::Empty, Cell::Float),
            Cell::Int(rep.fit_from as i64),
            Cell::Int(rep.fit_to as i64),
        ]);
    }
    let mut paths = write_table(&cfg.output_dir, "compact_rate", &table, rep.precision_bits)?;
    paths.extend(write_table(&cfg.output_dir, "compact_rate_fit", &fit, rep.precision_bits)?);
    if cfg.format.with_svg() {
        let gap_series = |name: &str, pick: fn(&RateRow) -> &BigReal| Series {
            name: name.into(),
            points: rep.rows.iter().map(|row| (row.r as f64, (pick(row) - &rep.f_min).to_f64())).collect(),
        };
        let chart = Chart {
            title: format!("Gap to the minimum of {} on {}", rep.f, rep.measure),
            x_label: "r".into(),
            y_label: "bound - f_min".into(),
            log_x: true,
            log_y: true,
            series: vec![gap_series("ub", |row| &row.ub), gap_series("ub-pf", |row| &row.ubpf)],
        };
        paths.push(write_chart(&cfg.output_dir, "compact_rate", &chart)?);
    }
    Ok(paths)
}
