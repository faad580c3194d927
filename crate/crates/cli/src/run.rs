//! Subcommand drivers. Each returns whether every check it ran passed.

use std::sync::Arc;

use diffeq::analysis::{
    contraction_decay_test, falsification_suite_scalar, falsification_suite_vector, vitali_approximate, DecayCurve,
    DefectReport, SuiteBank, SuiteOutcome, Verdict,
};
use diffeq::linalg;
use diffeq::operators::{is_constant, lipschitz_estimate, m_zero_image, Accepts, OperatorKind, OperatorSpec, Rho};
use diffeq::transport::{operator_norm_estimate, FieldKind};
use diffeq::{ChartDomain, Error, Field, FieldSpec};
use serde::Serialize;

use crate::config::{BankKind, Expectation, ExperimentConfig, OperatorEntry};
use crate::output::{grid_label, num, table, OutDir};

pub struct Ctx {
    pub cfg: ExperimentConfig,
    pub out: OutDir,
    pub verbose: bool,
}

impl Ctx {
    pub fn new(cfg: ExperimentConfig, verbose: bool) -> Result<Self, Error> {
        let out = OutDir::create(&cfg.out_dir)?;
        Ok(Self { cfg, out, verbose })
    }

    pub fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }
}

/// Process exit status for a run result.
pub fn exit_code(r: &Result<bool, Error>) -> i32 {
    match r {
        Ok(true) => 0,
        Ok(false) | Err(Error::Budget { .. }) => 1,
        Err(Error::UnderResolved(_)) => 3,
        Err(_) => 2,
    }
}

fn verdict_name(v: &Verdict) -> &'static str {
    match v {
        Verdict::Consistent => "consistent",
        Verdict::Falsified { .. } => "falsified",
    }
}

#[derive(Serialize)]
struct ReportLine<'a> {
    #[serde(flatten)]
    report: &'a DefectReport,
    verdict: &'static str,
}

/// One operator's sweep at one exponent.
pub struct DefectRow {
    pub entry: OperatorEntry,
    pub p: f64,
    pub outcome: SuiteOutcome,
}

impl DefectRow {
    pub fn passed(&self) -> bool {
        let got = if self.outcome.verdict.is_falsified() { Expectation::Falsified } else { Expectation::Consistent };
        got == self.entry.expectation()
    }
}

/// Sweeps every configured operator over the bank matching its kind.
pub fn defect_rows(ctx: &Ctx) -> Result<Vec<DefectRow>, Error> {
    let sec = &ctx.cfg.defect;
    let needs = |k: BankKind| sec.operators.iter().any(|e| e.bank_kind() == k);
    let build = |k: BankKind| -> Result<Option<SuiteBank<f64>>, Error> {
        if !needs(k) {
            return Ok(None);
        }
        ctx.log(format!("building {k:?} bank at {:?}", sec.levels));
        let fields = match k {
            BankKind::Scalar => sec.scalar_fields.clone(),
            BankKind::Vector => sec.vector_fields.clone(),
        };
        SuiteBank::build(&sec.chart, &sec.levels, sec.diffeos.clone(), fields).map(Some)
    };
    let scalar = build(BankKind::Scalar)?;
    let vector = build(BankKind::Vector)?;
    let mut rows = Vec::new();
    for e in &sec.operators {
        e.operator.validate()?;
        for &p in &ctx.cfg.p {
            ctx.log(format!("sweeping {} at p = {p}", e.operator.label()));
            let outcome = match e.bank_kind() {
                BankKind::Scalar => falsification_suite_scalar(&e.operator, scalar.as_ref().unwrap(), sec.budget, p)?,
                BankKind::Vector => falsification_suite_vector(&e.operator, vector.as_ref().unwrap(), sec.budget, p)?,
            };
            rows.push(DefectRow { entry: e.clone(), p, outcome });
        }
    }
    Ok(rows)
}

pub fn run_defect(ctx: &Ctx) -> Result<bool, Error> {
    let rows = defect_rows(ctx)?;
    write_defect(ctx, &rows)?;
    Ok(rows.iter().all(DefectRow::passed))
}

pub fn write_defect(ctx: &Ctx, rows: &[DefectRow]) -> Result<(), Error> {
    let mut lines: Vec<ReportLine> = rows
        .iter()
        .flat_map(|r| {
            let v = verdict_name(&r.outcome.verdict);
            r.outcome.reports.iter().map(move |report| ReportLine { report, verdict: v })
        })
        .collect();
    lines.sort_by(|a, b| {
        let key = |l: &ReportLine| (l.report.operator_label.clone(), l.report.diffeo_label.clone(), l.report.field_label.clone());
        key(a)
            .cmp(&key(b))
            .then(a.report.p.total_cmp(&b.report.p))
            .then(a.report.grid.cmp(&b.report.grid))
    });
    ctx.out.write_jsonl("defect_reports.jsonl", &lines)?;
    let csv_rows: Vec<Vec<String>> = lines
        .iter()
        .map(|l| {
            vec![
                l.report.operator_label.clone(),
                l.report.diffeo_label.clone(),
                l.report.field_label.clone(),
                num(l.report.p),
                grid_label(&l.report.grid),
                num(l.report.defect_abs),
                num(l.report.defect_rel),
                l.verdict.to_string(),
            ]
        })
        .collect();
    ctx.out.write_csv(
        "defect_summary.csv",
        &["operator", "diffeo", "field", "p", "grid", "defect_abs", "defect_rel", "verdict"],
        &csv_rows,
    )?;
    let table_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let (witness, history) = match &r.outcome.verdict {
                Verdict::Falsified { witness, history, stable } => (
                    format!("{} / {}", witness.diffeo_label, witness.field_label),
                    format!(
                        "{}{}",
                        history.iter().map(|h| format!("{h:.3e}")).collect::<Vec<_>>().join(" -> "),
                        if *stable { " (stable)" } else { " (unstable)" }
                    ),
                ),
                Verdict::Consistent => ("-".into(), "-".into()),
            };
            let expected = match r.entry.expectation() {
                Expectation::Consistent => "consistent",
                Expectation::Falsified => "falsified",
            };
            vec![
                r.outcome.operator.clone(),
                num(r.p),
                expected.into(),
                verdict_name(&r.outcome.verdict).into(),
                format!("{:.3e}", r.outcome.max_defect_rel()),
                r.outcome.lambda.map(|l| format!("{:.12}", l.lambda)).unwrap_or_else(|| "-".into()),
                witness,
                history,
                if r.passed() { "PASS" } else { "FAIL" }.into(),
            ]
        })
        .collect();
    ctx.out.write_text(
        "verdicts.txt",
        &table(
            &["operator", "p", "expected", "verdict", "max_defect_rel", "lambda", "witness", "history", "status"],
            &table_rows,
        ),
    )
}

/// Vector bump centred at the origin of a `d`-dimensional box.
pub fn decay_field(chart: &Arc<ChartDomain<f64>>, radius: f64) -> Result<Field<f64>, Error> {
    let d = chart.dim();
    let mut dir = vec![0.0; d];
    dir[0] = 0.6;
    dir[d - 1] += 0.8;
    FieldSpec::VectorBump { center: vec![0.0; d], radius, amplitude: 1.0, direction: dir }.build(chart)
}

/// Decay curves for every configured dimension and exponent.
pub fn decay_curves(ctx: &Ctx, resolution: usize) -> Result<Vec<DecayCurve>, Error> {
    let sec = &ctx.cfg.decay;
    let mut out = Vec::new();
    for &d in &sec.dims {
        let chart = Arc::new(ChartDomain::cube(d, -sec.extent, sec.extent, resolution, 0.0)?);
        let f = decay_field(&chart, sec.field_radius)?;
        for &p in &sec.p {
            ctx.log(format!("decay d = {d}, p = {p} at {resolution}^{d}"));
            out.push(contraction_decay_test(&f, &linalg::zero(), &sec.n_values, p, sec.eps)?);
        }
    }
    Ok(out)
}

pub fn decay_passes(ctx: &Ctx, curves: &[DecayCurve]) -> bool {
    curves.iter().all(|c| c.worst_ratio() <= ctx.cfg.decay.tolerance)
}

pub fn run_decay(ctx: &Ctx) -> Result<bool, Error> {
    let curves = decay_curves(ctx, ctx.cfg.decay.resolution)?;
    let mut rows = Vec::new();
    for c in &curves {
        for (k, n) in c.n_values.iter().enumerate() {
            rows.push(vec![
                c.dim.to_string(),
                num(c.p),
                n.to_string(),
                num(c.norms[k]),
                num(c.bounds[k]),
                num(c.norms[k] / c.bounds[k]),
                num(c.baseline),
                num(c.fitted_rate),
            ]);
        }
    }
    ctx.out.write_csv("decay.csv", &["d", "p", "n", "norm_pow", "bound", "ratio", "baseline", "fitted_rate"], &rows)?;
    Ok(decay_passes(ctx, &curves))
}

#[derive(Clone, Debug, Serialize)]
pub struct NormRow {
    pub diffeo: String,
    pub estimate: f64,
    pub bound: f64,
    pub limit: f64,
}

impl NormRow {
    pub fn passed(&self) -> bool {
        self.estimate <= self.limit
    }
}

pub fn norm_rows(ctx: &Ctx, resolution: usize) -> Result<Vec<NormRow>, Error> {
    let sec = &ctx.cfg.norm_bound;
    let chart = Arc::new(ChartDomain::torus(2, 0.0, 1.0, resolution)?);
    sec.diffeos
        .iter()
        .map(|s| {
            let phi = s.build(&chart)?;
            ctx.log(format!("norm estimate for {}", phi.label()));
            let e = operator_norm_estimate(&phi, sec.trials, 2.0, FieldKind::Vector)?;
            let bound = e.bound.unwrap_or(f64::NAN);
            Ok(NormRow { diffeo: phi.label().to_string(), estimate: e.estimate, bound, limit: bound * sec.slack })
        })
        .collect()
}

pub fn run_norm_bound(ctx: &Ctx) -> Result<bool, Error> {
    let rows = norm_rows(ctx, ctx.cfg.norm_bound.resolution)?;
    let csv: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.diffeo.clone(), num(r.estimate), num(r.bound), num(r.limit), r.passed().to_string()])
        .collect();
    ctx.out.write_csv("norm_bound.csv", &["diffeo", "estimate", "bound", "limit", "pass"], &csv)?;
    Ok(rows.iter().all(NormRow::passed))
}

#[derive(Clone, Debug, Serialize)]
pub struct VitaliSummary {
    pub balls: usize,
    pub achieved_error: f64,
    pub target: f64,
    pub masked_norm: f64,
    pub relative_error: f64,
    pub local_tolerance: f64,
    pub bandlimit_ratio: f64,
}

pub fn vitali_run(ctx: &Ctx) -> Result<(VitaliSummary, diffeq::analysis::VitaliResult), Error> {
    let sec = &ctx.cfg.vitali;
    let chart = Arc::new(ChartDomain::torus(2, 0.0, 1.0, sec.resolution)?);
    let f = sec.field.build(&chart)?;
    let f = f.as_scalar()?;
    let u = diffeq::BallRegion::from_f64(&sec.center, sec.radius);
    let p = 2.0;
    let norm = Field::from(f.clone()).mask(&u).lp_norm(p)?;
    ctx.log(format!("vitali packing, target {:e}", sec.eps_rel * norm));
    let r = vitali_approximate(f, &u, sec.eps_rel * norm, sec.max_balls, p)?;
    let s = VitaliSummary {
        balls: r.pieces.len(),
        achieved_error: r.achieved_error,
        target: r.target,
        masked_norm: norm,
        relative_error: r.achieved_error / norm,
        local_tolerance: r.local_tolerance,
        bandlimit_ratio: r.bandlimit_ratio,
    };
    Ok((s, r))
}

pub fn run_vitali(ctx: &Ctx) -> Result<bool, Error> {
    let (s, r) = vitali_run(ctx)?;
    let rows: Vec<Vec<String>> = r
        .pieces
        .iter()
        .map(|p| {
            let mut row: Vec<String> = p.center.iter().map(|x| num(*x)).collect();
            row.push(num(p.radius));
            row.push(num(p.value));
            row
        })
        .collect();
    ctx.out.write_csv("vitali_pieces.csv", &["x", "y", "radius", "value"], &rows)?;
    ctx.out.write_json("vitali_summary.json", &s)?;
    Ok(s.achieved_error < s.target)
}

/// The operator zoo with its zero images and Lipschitz estimates.
pub fn zoo() -> Vec<OperatorSpec> {
    vec![
        OperatorSpec::pointwise(Rho::Relu),
        OperatorSpec::pointwise(Rho::Tanh),
        OperatorSpec::pointwise(Rho::Abs),
        OperatorSpec::pointwise(Rho::Sin),
        OperatorSpec::pointwise(Rho::Softplus),
        OperatorSpec::scalar_multiple(-1.5),
        OperatorSpec::scalar_multiple(2.0),
        OperatorSpec::vector_gain(Rho::Tanh),
        OperatorSpec::blur(0.05),
        OperatorSpec::local_average(0.1),
        OperatorSpec::new(OperatorKind::SupOperator),
        OperatorSpec::new(OperatorKind::ExpPhase),
        OperatorSpec::new(OperatorKind::SqrtPointwise),
    ]
}

pub fn run_zoo(ctx: &Ctx) -> Result<bool, Error> {
    let chart = Arc::new(ChartDomain::torus(2, 0.0, 1.0, 64)?);
    let mut rows = Vec::new();
    for m in zoo() {
        let z = m_zero_image(&m, &chart)?;
        let lip = lipschitz_estimate(&m, &chart, 2.0, 200)?;
        let accepts = match m.accepts() {
            Accepts::Scalar => "scalar",
            Accepts::Vector => "vector",
            Accepts::Both => "both",
        };
        let zero = match &z {
            Field::Complex(re, im) => format!("({}, {})", num(re.values()[0]), num(im.values()[0])),
            other => num(other.magnitudes().into_iter().fold(0.0, f64::max)),
        };
        rows.push(vec![
            m.label(),
            accepts.into(),
            m.is_pointwise().to_string(),
            is_constant(&z).to_string(),
            zero,
            num(lip),
            format!("{:?}", Expectation::predicted(&m)).to_lowercase(),
        ]);
    }
    let header = ["operator", "accepts", "pointwise", "zero_image_constant", "zero_image", "lipschitz_estimate", "predicted"];
    ctx.out.write_csv("zoo.csv", &header, &rows)?;
    ctx.out.write_text("zoo.txt", &table(&header, &rows))?;
    if ctx.verbose {
        eprint!("{}", table(&header, &rows));
    }
    Ok(true)
}
