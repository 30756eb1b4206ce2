use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Subcommand, ValueEnum};
use nidid::dist::{norm_quantile, Reference};
use nidid::linmod::VcovKind;
use nidid::nicompare::{
    compare_step, compare_trends, ni_curve, stepwise, subgroup_compare, threshold_grid, ComparisonResult,
    EffectSummary, NiCurve, Sided, StepMethod, StepUpOptions, StepUpReport, SubgroupEffect,
};
use nidid::panelspec::{fit_did, DidModelSpec, PanelDataset, TrendSpec};
use nidid::power;
use nidid::simlab::{run_grid, write_csv, ResultSink, ScenarioResult};
use serde::Serialize;

use crate::ingest::{ingest_csv, ColumnMap};
use crate::report::{
    csv_bytes, fmt_opt, json_bytes, time_mapping, write_atomic, Envelope, Format, OutputArgs, UsageError,
};
use crate::simconfig::SimFile;

const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Panel CSV with a header row, one row per unit and time
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub map: ColumnMap,
    /// First intervention period, on the input's time scale
    #[arg(long)]
    pub t0: i64,
}

impl DataArgs {
    fn load(&self) -> Result<PanelDataset> {
        ingest_csv(&self.input, &self.map, self.t0)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VcovArg {
    Iid,
    Hc1,
    Cr1,
}

impl From<VcovArg> for VcovKind {
    fn from(v: VcovArg) -> Self {
        match v {
            VcovArg::Iid => VcovKind::Iid,
            VcovArg::Hc1 => VcovKind::Hc1,
            VcovArg::Cr1 => VcovKind::ClusterCr1,
        }
    }
}

fn emit<C: Serialize, R: Serialize, Row: Serialize>(
    command: &str,
    output: &OutputArgs,
    config: &C,
    seed: Option<u64>,
    labels: Option<&[i64]>,
    result: &R,
    rows: impl FnOnce() -> Vec<Row>,
) -> Result<()> {
    let Some(path) = &output.out else {
        return Ok(());
    };
    let bytes = match output.format() {
        Format::Json => json_bytes(&Envelope {
            schema_version: crate::report::SCHEMA_VERSION,
            command,
            library_version: LIBRARY_VERSION,
            seed,
            config,
            time_mapping: labels.map(time_mapping),
            result,
        })?,
        Format::Csv => csv_bytes(rows())?,
    };
    write_atomic(path, &bytes)
}

// ---- fit ----

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// none, linear, quad, cubic, rcs or pspline
    #[arg(long, default_value = "linear")]
    pub trend: TrendSpec,
    /// Estimate placebo effects from this pre-period label up to t0 - 1
    #[arg(long)]
    pub placebo_start: Option<i64>,
    #[arg(long, value_enum, default_value = "iid")]
    pub vcov: VcovArg,
    /// Also estimate the post-period shift of the subgroup
    #[arg(long)]
    pub subgroup_effect: bool,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Serialize)]
struct EventRow {
    term: String,
    time_index: Option<u32>,
    time_label: Option<i64>,
    estimate: f64,
    se: Option<f64>,
    ci_lower: Option<f64>,
    ci_upper: Option<f64>,
}

#[derive(Debug, Serialize)]
struct FitReport {
    spec: DidModelSpec,
    vcov: VcovKind,
    n_units: usize,
    n_treated: usize,
    n_obs: usize,
    sigma2: f64,
    lambda: Option<f64>,
    effects: EffectSummary,
    event_study: Vec<EventRow>,
    subgroup: Option<SubgroupEffect>,
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let data = args.data.load()?;
    let spec = match args.placebo_start {
        Some(label) => {
            let index = data
                .time_labels()
                .iter()
                .position(|&l| l == label)
                .ok_or_else(|| UsageError(format!("placebo start {label} is not an observed time")))?;
            DidModelSpec::placebo(args.trend.clone(), index as u32 + 1)
        }
        None => DidModelSpec::post(args.trend.clone()),
    };
    let vcov = VcovKind::from(args.vcov);
    let did = fit_did(&data, &spec, vcov)?;
    let effects = EffectSummary::from_fit(&did)?;
    let z = norm_quantile(1.0 - args.alpha / 2.0);
    let ci = |est: f64, se: Option<f64>| (se.map(|s| est - z * s), se.map(|s| est + z * s));
    let mut event_study: Vec<EventRow> = effects
        .per_period
        .iter()
        .map(|p| {
            let (lo, hi) = ci(p.estimate, p.se);
            EventRow {
                term: "effect".into(),
                time_index: Some(p.time),
                time_label: Some(data.time_label(p.time)),
                estimate: p.estimate,
                se: p.se,
                ci_lower: lo,
                ci_upper: hi,
            }
        })
        .collect();
    let (lo, hi) = ci(effects.average, effects.average_se);
    event_study.push(EventRow {
        term: "average".into(),
        time_index: None,
        time_label: None,
        estimate: effects.average,
        se: effects.average_se,
        ci_lower: lo,
        ci_upper: hi,
    });
    let subgroup = if args.subgroup_effect {
        Some(subgroup_compare(&data, &DidModelSpec::post(args.trend.clone()), vcov)?)
    } else {
        None
    };
    if let Some(s) = &subgroup {
        let (lo, hi) = ci(s.kappa, Some(s.se));
        event_study.push(EventRow {
            term: "subgroup".into(),
            time_index: None,
            time_label: None,
            estimate: s.kappa,
            se: Some(s.se),
            ci_lower: lo,
            ci_upper: hi,
        });
    }

    println!(
        "{} trend, {} units ({} treated), {} periods, intervention at {}",
        args.trend,
        data.n_units(),
        data.n_treated(),
        data.t_max(),
        data.time_label(data.t0())
    );
    if let Some(l) = did.lambda() {
        println!("smoothing parameter {l:.4e}; model-based standard errors are not reported for penalized fits");
    }
    println!("{:<10} {:>6} {:>8} {:>10} {:>10} {:>10} {:>10}", "term", "index", "label", "estimate", "se", "lower", "upper");
    for r in &event_study {
        println!(
            "{:<10} {:>6} {:>8} {:>10.4} {:>10} {:>10} {:>10}",
            r.term,
            r.time_index.map_or("-".into(), |v| v.to_string()),
            r.time_label.map_or("-".into(), |v| v.to_string()),
            r.estimate,
            fmt_opt(r.se),
            fmt_opt(r.ci_lower),
            fmt_opt(r.ci_upper)
        );
    }

    let report = FitReport {
        spec,
        vcov,
        n_units: data.n_units(),
        n_treated: data.n_treated(),
        n_obs: did.fit.n_obs,
        sigma2: did.fit.sigma2,
        lambda: did.lambda(),
        effects,
        event_study,
        subgroup,
    };
    emit("fit", &args.output, args, None, Some(data.time_labels()), &report, || {
        report.event_study.iter().collect()
    })
}

// ---- compare and ni-curve ----

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Richer trend model
    #[arg(long, default_value = "linear")]
    pub trend: TrendSpec,
    /// Simpler trend model
    #[arg(long, default_value = "none")]
    pub against: TrendSpec,
    /// After a linear-versus-none change, compare this trend with linear at half the level
    #[arg(long)]
    pub next_trend: Option<TrendSpec>,
    /// Threshold for the non-inferiority verdict; without it only the curve and interval are reported
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// one (non-inferiority) or two (equivalence)
    #[arg(long, default_value = "one")]
    pub sided: Sided,
    /// auto, scale, vardiff, boot or ri
    #[arg(long, default_value = "auto")]
    pub method: StepMethod,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Replications for boot and ri
    #[arg(long, default_value_t = 999)]
    pub reps: usize,
    /// Points on the threshold grid when no delta is given
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

impl CompareArgs {
    fn options(&self) -> StepUpOptions {
        StepUpOptions {
            alpha: self.alpha,
            sided: self.sided,
            method: self.method,
            replications: self.reps,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Serialize)]
struct CurveRow {
    delta: f64,
    p_value: f64,
    ruled_out: bool,
    kappa: f64,
    se_kappa: f64,
    crossing_delta: f64,
}

fn curve_rows(curve: &NiCurve) -> Vec<CurveRow> {
    curve
        .points
        .iter()
        .map(|&(delta, p)| CurveRow {
            delta,
            p_value: p,
            ruled_out: p < curve.alpha,
            kappa: curve.kappa,
            se_kappa: curve.se,
            crossing_delta: curve.crossing_delta,
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct StepRow {
    base_trend: String,
    simpler_trend: String,
    method: String,
    kappa: f64,
    se_kappa: f64,
    ci_lower: f64,
    ci_upper: f64,
    alpha: f64,
    delta: f64,
    sided: Sided,
    p_value: f64,
    reject_h0: bool,
    outcome: String,
    next_alpha: Option<f64>,
}

fn step_row(r: &StepUpReport) -> StepRow {
    StepRow {
        base_trend: r.base_trend.to_string(),
        simpler_trend: r.simpler_trend.to_string(),
        method: r.comparison.method.to_string(),
        kappa: r.comparison.kappa,
        se_kappa: r.comparison.se_kappa,
        ci_lower: r.comparison.ci.0,
        ci_upper: r.comparison.ci.1,
        alpha: r.alpha,
        delta: r.verdict.delta,
        sided: r.verdict.sided,
        p_value: r.verdict.p_value,
        reject_h0: r.verdict.reject_h0,
        outcome: serde_json::to_value(r.outcome)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default(),
        next_alpha: r.next_alpha,
    }
}

fn print_comparison(c: &ComparisonResult, base: &TrendSpec, simpler: &TrendSpec) {
    println!(
        "{simpler} minus {base} average effect: {:.4} (se {:.4}, {} method)",
        c.kappa, c.se_kappa, c.method
    );
    println!(
        "  average effects: {simpler} {:.4}, {base} {:.4}",
        c.reduced_average, c.expanded_average
    );
    println!(
        "  {:.0}% confidence interval: [{:.4}, {:.4}]",
        100.0 * (1.0 - c.alpha),
        c.ci.0,
        c.ci.1
    );
    if let Some(w) = c.scale_factor_w {
        println!("  scale factor W = {w:.4}");
    }
    for w in &c.warnings {
        println!("  note: {w}");
    }
}

fn default_curve(c: &ComparisonResult, points: usize) -> Result<NiCurve> {
    if points < 2 {
        return Err(UsageError("--points must be at least 2".into()).into());
    }
    let mut upper = c.kappa.abs() + 4.0 * c.se_kappa;
    if upper <= 0.0 {
        upper = 1.0;
    }
    Ok(ni_curve(c.kappa, c.se_kappa, &threshold_grid(0.0, upper, points), c.alpha)?)
}

#[derive(Debug, Serialize)]
struct CurveReport<'a> {
    comparison: &'a ComparisonResult,
    ni_curve: &'a NiCurve,
    note: &'static str,
}

const CURVE_NOTE: &str = "normal approximation with the comparison's standard error; \
crossing_delta is the smallest difference ruled out at level alpha";

pub fn compare(args: &CompareArgs) -> Result<()> {
    let data = args.data.load()?;
    let options = args.options();
    let labels = Some(data.time_labels());
    let Some(delta) = args.delta else {
        if args.next_trend.is_some() {
            return Err(UsageError("--next-trend needs --delta".into()).into());
        }
        let c = compare_trends(&data, &args.trend, &args.against, &options)?;
        let curve = default_curve(&c, args.points)?;
        print_comparison(&c, &args.trend, &args.against);
        println!(
            "no --delta given: differences of {:.4} or more are ruled out at level {}; no pass/fail verdict",
            curve.crossing_delta, c.alpha
        );
        let report = CurveReport {
            comparison: &c,
            ni_curve: &curve,
            note: CURVE_NOTE,
        };
        return emit("compare", &args.output, args, Some(args.seed), labels, &report, || curve_rows(&curve));
    };
    let reports = match &args.next_trend {
        Some(next) => {
            if args.trend != TrendSpec::linear() || args.against != TrendSpec::None {
                return Err(UsageError("--next-trend runs from the linear versus none comparison".into()).into());
            }
            stepwise(&data, delta, next, &options)?
        }
        None => vec![compare_step(&data, &args.trend, &args.against, delta, &options)?],
    };
    for r in &reports {
        print_comparison(&r.comparison, &r.base_trend, &r.simpler_trend);
        println!(
            "  H0: difference >= {delta}{}: p = {:.4} at level {} -> {}",
            if r.verdict.sided == Sided::Two { " in absolute value" } else { "" },
            r.verdict.p_value,
            r.alpha,
            if r.verdict.reject_h0 { "rejected" } else { "not rejected" }
        );
        println!("  {}", r.recommendation);
    }
    #[derive(Serialize)]
    struct Steps<'a> {
        steps: &'a [StepUpReport],
    }
    emit("compare", &args.output, args, Some(args.seed), labels, &Steps { steps: &reports }, || {
        reports.iter().map(step_row).collect()
    })
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NiCurveArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "linear")]
    pub trend: TrendSpec,
    #[arg(long, default_value = "none")]
    pub against: TrendSpec,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value = "auto")]
    pub method: StepMethod,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 999)]
    pub reps: usize,
    /// Largest threshold on the grid; defaults to |kappa| + 4 se
    #[arg(long)]
    pub delta_max: Option<f64>,
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn ni_curve_cmd(args: &NiCurveArgs) -> Result<()> {
    let data = args.data.load()?;
    let options = StepUpOptions {
        alpha: args.alpha,
        sided: Sided::One,
        method: args.method,
        replications: args.reps,
        seed: args.seed,
    };
    let c = compare_trends(&data, &args.trend, &args.against, &options)?;
    let curve = match args.delta_max {
        Some(max) => {
            if !(max > 0.0) || args.points < 2 {
                return Err(UsageError("--delta-max must be positive and --points at least 2".into()).into());
            }
            ni_curve(c.kappa, c.se_kappa, &threshold_grid(0.0, max, args.points), c.alpha)?
        }
        None => default_curve(&c, args.points)?,
    };
    print_comparison(&c, &args.trend, &args.against);
    println!("{:>10} {:>10}  ruled out", "delta", "p");
    for (d, p) in &curve.points {
        println!("{d:>10.4} {p:>10.4}  {}", if *p < curve.alpha { "yes" } else { "no" });
    }
    println!("smallest difference ruled out: {:.4}", curve.crossing_delta);
    let report = CurveReport {
        comparison: &c,
        ni_curve: &curve,
        note: CURVE_NOTE,
    };
    emit("ni-curve", &args.output, args, Some(args.seed), Some(data.time_labels()), &report, || {
        curve_rows(&curve)
    })
}

// ---- power ----

#[derive(Debug, Clone, Args, Serialize)]
pub struct PowerArgs {
    #[command(subcommand)]
    pub calc: PowerCalc,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "calculation", rename_all = "kebab-case")]
pub enum PowerCalc {
    /// Minimum detectable effect for sample size n and outcome sd sigma
    Mde {
        #[arg(long)]
        n: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0.8)]
        power: f64,
        #[arg(long, default_value = "one")]
        sided: Sided,
        /// Use a t reference distribution with these degrees of freedom
        #[arg(long)]
        df: Option<f64>,
    },
    /// Power to rule out differences of delta or more
    NiPower {
        #[arg(long)]
        delta: f64,
        /// True difference
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        #[arg(long)]
        se: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value = "one")]
        sided: Sided,
        #[arg(long)]
        df: Option<f64>,
    },
    /// Power to detect a true effect theta
    Detection {
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        se: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value = "one")]
        sided: Sided,
        #[arg(long)]
        df: Option<f64>,
    },
    /// Observed power implied by a two-sided p-value
    Empirical {
        #[arg(long)]
        p_value: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Approximate lower bound on the effect variance ratio without versus with a trend term (assumes additive R²)
    SeInflation {
        #[arg(long)]
        r2_trend: f64,
        #[arg(long)]
        r2_others: f64,
    },
    /// Standard error of a difference in two independent means
    TwoSampleSe {
        #[arg(long)]
        sigma1: f64,
        #[arg(long)]
        n1: f64,
        #[arg(long)]
        sigma2: f64,
        #[arg(long)]
        n2: f64,
    },
}

#[derive(Debug, Serialize)]
struct PowerRow {
    quantity: &'static str,
    value: f64,
}

fn reference(df: Option<f64>) -> Result<Reference> {
    match df {
        None => Ok(Reference::Normal),
        Some(df) => Ok(Reference::student_t(df)?),
    }
}

pub fn power_cmd(args: &PowerArgs) -> Result<()> {
    let mut caveat = None;
    let rows: Vec<PowerRow> = match &args.calc {
        PowerCalc::Mde {
            n,
            sigma,
            alpha,
            power: p,
            sided,
            df,
        } => vec![PowerRow {
            quantity: "mde",
            value: power::mde_with(*n, *sigma, *alpha, *p, *sided, reference(*df)?)?,
        }],
        PowerCalc::NiPower {
            delta,
            theta,
            se,
            alpha,
            sided,
            df,
        } => vec![PowerRow {
            quantity: "ni_power",
            value: power::ni_power_with(*delta, *theta, *se, *alpha, *sided, reference(*df)?)?,
        }],
        PowerCalc::Detection {
            theta,
            se,
            alpha,
            sided,
            df,
        } => vec![PowerRow {
            quantity: "detection_power",
            value: power::detection_power_with(*theta, *se, *alpha, *sided, reference(*df)?)?,
        }],
        PowerCalc::Empirical { p_value, alpha } => {
            let e = power::empirical_power(*p_value, *alpha)?;
            caveat = Some(e.caveat);
            vec![
                PowerRow {
                    quantity: "empirical_power",
                    value: e.power,
                },
                PowerRow {
                    quantity: "empirical_power_both_tails",
                    value: e.power_both_tails,
                },
            ]
        }
        PowerCalc::SeInflation { r2_trend, r2_others } => vec![PowerRow {
            quantity: "variance_ratio_bound",
            value: power::se_inflation_bound(*r2_trend, *r2_others)?,
        }],
        PowerCalc::TwoSampleSe { sigma1, n1, sigma2, n2 } => vec![PowerRow {
            quantity: "se",
            value: power::two_sample_se(*sigma1, *n1, *sigma2, *n2)?,
        }],
    };
    for r in &rows {
        println!("{}: {:.6}", r.quantity, r.value);
    }
    if let Some(c) = caveat {
        println!("note: {c}");
    }
    #[derive(Serialize)]
    struct PowerReport<'a> {
        values: &'a [PowerRow],
        caveat: Option<&'static str>,
    }
    let report = PowerReport {
        values: &rows,
        caveat,
    };
    emit("power", &args.output, args, None, None, &report, || rows.iter().collect())
}

// ---- simulate ----

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Scenario configuration file (TOML)
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the file's seed
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

struct ProgressSink {
    done: usize,
    total: usize,
}

impl ResultSink for ProgressSink {
    fn accept(&mut self, result: &ScenarioResult) -> std::io::Result<()> {
        self.done += 1;
        log::info!("[{}/{}] finished {}", self.done, self.total, result.key);
        Ok(())
    }
}

pub fn simulate(args: &SimulateArgs, threads: Option<usize>) -> Result<()> {
    let file = SimFile::read(&args.config)?;
    let scenarios = file.scenarios(args.seed)?;
    let options = file.options()?;
    let mut sink = ProgressSink {
        done: 0,
        total: scenarios.len(),
    };
    let results = run_grid(&scenarios, &options, threads, &mut sink)?;
    println!(
        "{:<44} {:<10} {:>7} {:>8} {:>8} {:>8}",
        "scenario", "model", "power", "bias", "mse", "rule-out"
    );
    for r in &results {
        for m in &r.models {
            println!(
                "{:<44} {:<10} {:>7.3} {:>8.4} {:>8.4} {:>8}",
                r.key,
                m.model,
                m.power,
                m.bias,
                m.mse,
                m.rule_out_power.map_or("-".into(), |v| format!("{v:.3}"))
            );
        }
    }
    let Some(path) = &args.output.out else {
        return Ok(());
    };
    let bytes = match args.output.format() {
        Format::Csv => {
            let mut buf = Vec::new();
            write_csv(&results, &mut buf)?;
            buf
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Config<'a> {
                file: &'a SimFile,
                args: &'a SimulateArgs,
            }
            json_bytes(&Envelope {
                schema_version: crate::report::SCHEMA_VERSION,
                command: "simulate",
                library_version: LIBRARY_VERSION,
                seed: Some(args.seed.unwrap_or(file.seed)),
                config: &Config { file: &file, args },
                time_mapping: None,
                result: &results,
            })
            .context("cannot encode simulation report")?
        }
    };
    write_atomic(path, &bytes)
}
