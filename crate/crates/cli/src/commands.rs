use std::fs;
use std::path::Path;

use regstop_core::asymptotics::{
    convergence_table, limit_value_functions, monotone_convergence, threshold_limit,
    CONVERGENCE_THETAS,
};
use regstop_core::params_file;
use regstop_core::simulator::{estimate_value, DEFAULT_PATHS, DEFAULT_SEED};
use regstop_core::verifier::{
    check_boundary_conditions_over, parameter_sweep, pasting_check, DEFAULT_GRID_POINTS,
    DEFAULT_SPAN,
};
use regstop_core::vi::PASTING_TOL;
use regstop_core::{
    Mode, Model, Regime, SimConfig, SingleDiffusionParams, SweepConfig, ViSolution,
};

use crate::args::{Cli, Command, Format, GridSpec, Spacing, TableKind};
use crate::error::CliError;
use crate::output::{num, Document, Section, Table};

/// Whether every check a command performed held.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    ChecksFailed,
}

impl Status {
    fn from_pass(pass: bool) -> Self {
        if pass {
            Status::Ok
        } else {
            Status::ChecksFailed
        }
    }
}

pub fn run(cli: &Cli) -> Result<Status, CliError> {
    let mode = if cli.permissive {
        Mode::Permissive
    } else {
        Mode::Strict
    };
    let (doc, status, default_format) = match &cli.command {
        Command::Solve { params } => (solve(&load(params, mode)?)?, Status::Ok, Format::Record),
        Command::Eval { params } => {
            let grid = cli.grid.unwrap_or(GridSpec::PLOT);
            (eval(&load(params, mode)?, &grid)?, Status::Ok, Format::Csv)
        }
        Command::PlotData { params } => {
            let grid = cli.grid.unwrap_or(GridSpec::PLOT);
            (
                plot_data(&load(params, mode)?, &grid)?,
                Status::Ok,
                Format::Csv,
            )
        }
        Command::Verify { params, window } => {
            let (doc, pass) = verify(&load(params, mode)?, cli.grid, *window)?;
            (doc, Status::from_pass(pass), Format::Record)
        }
        Command::Sweep {
            mu_values,
            other_values,
            grid_points,
        } => {
            let mut config = SweepConfig::default();
            if let Some(v) = mu_values {
                config.mu_values = v.clone();
            }
            if let Some(v) = other_values {
                config.other_values = v.clone();
            }
            if let Some(n) = grid_points {
                config.grid_points = *n;
            }
            let (doc, pass) = sweep(&config)?;
            (doc, Status::from_pass(pass), Format::Csv)
        }
        Command::Simulate {
            params,
            x0,
            regime,
            threshold,
            horizon,
        } => {
            let regime = Regime::from_index(*regime as usize).expect("validated by clap");
            let model = load(params, mode)?;
            let sim = SimRequest {
                regime,
                x0: *x0,
                threshold: *threshold,
                horizon: *horizon,
                paths: cli.paths.unwrap_or(DEFAULT_PATHS),
                seed: cli.seed.unwrap_or(DEFAULT_SEED),
            };
            if sim.paths == 0 {
                return Err(CliError::Usage("--paths must be positive".into()));
            }
            let (doc, pass) = simulate(&model, &sim)?;
            (doc, Status::from_pass(pass), Format::Record)
        }
        Command::Asymptote {
            params,
            limit,
            table,
        } => {
            let p = match params {
                Some(path) => SingleDiffusionParams::from_model(&load(path, mode)?)?,
                None => SingleDiffusionParams::test_set(),
            };
            let (doc, pass) = asymptote(&p, *limit, *table, cli.grid.unwrap_or(GridSpec::PLOT))?;
            (doc, Status::from_pass(pass), Format::Record)
        }
    };
    let text = doc.render(cli.format.unwrap_or(default_format));
    match &cli.out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?,
        None => print!("{text}"),
    }
    Ok(status)
}

fn load(path: &Path, mode: Mode) -> Result<Model, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(params_file::parse(&text)?.validate(mode)?)
}

fn warnings_section(model: &Model) -> Section {
    let mut s = Section::new("warnings").text("count", model.warnings().len());
    for (i, w) in model.warnings().iter().enumerate() {
        s = s.text(&format!("warning{i}"), w);
    }
    s
}

fn mode_name(model: &Model) -> &'static str {
    match model.mode() {
        Mode::Strict => "strict",
        Mode::Permissive => "permissive",
    }
}

pub fn solve(model: &Model) -> Result<Document, CliError> {
    let sol = ViSolution::solve(model)?;
    let r = &sol.roots;
    let c = sol.coefficients();
    let (part, pq) = (&sol.part, &sol.pq);
    let mut coeffs = Section::new("coefficients");
    for (name, pair) in [
        ("a_l", c.a_l),
        ("b_l", c.b_l),
        ("a_u", c.a_u),
        ("b_u", c.b_u),
    ] {
        coeffs = coeffs
            .num(&format!("{name}0"), pair[0])
            .num(&format!("{name}1"), pair[1]);
    }
    let mut chain = Section::new("chain").text("holds", r.chain_holds());
    for (i, v) in r.chain_violations().iter().enumerate() {
        chain = chain.text(&format!("violation{i}"), v);
    }
    Ok(Document {
        sections: vec![
            Section::new("solution")
                .num("xstar", sol.xstar)
                .num("k_tilde", model.k_tilde())
                .text("mode", mode_name(model)),
            Section::new("roots")
                .num("beta_la", r.beta_la)
                .num("beta_lb", r.beta_lb)
                .num("beta_ua", r.beta_ua)
                .num("beta_ub", r.beta_ub),
            chain,
            Section::new("particular")
                .num("a0", part.a0)
                .num("a1", part.a1)
                .num("b0", part.b0)
                .num("b1", part.b1),
            coeffs,
            Section::new("pq")
                .num("p_la", pq.p_la)
                .num("q_la", pq.q_la)
                .num("p_lb", pq.p_lb)
                .num("q_lb", pq.q_lb)
                .num("p_ua", pq.p_ua)
                .num("q_ua", pq.q_ua)
                .num("p_ub", pq.p_ub)
                .num("q_ub", pq.q_ub),
            warnings_section(model),
            params_section(model),
        ],
        ..Document::default()
    })
}

/// The echo block, which parses back to the same parameters.
fn params_section(model: &Model) -> Section {
    let p = model.params();
    regstop_core::ModelParams::FIELD_NAMES
        .iter()
        .fold(Section::new("params"), |s, name| {
            s.num(name, p.field(name).expect("known field"))
        })
}

pub fn eval(model: &Model, grid: &GridSpec) -> Result<Document, CliError> {
    let sol = ViSolution::solve(model)?;
    let mut table = Table::new(&["x", "v0", "v1", "pi", "dv0", "dv1", "d2v0", "d2v1"]);
    table.comments.push(format!("xstar = {}", num(sol.xstar)));
    for x in grid.points() {
        let v = |regime, order| sol.eval(regime, x, order).expect("grid is positive");
        table.row(vec![
            num(x),
            num(v(Regime::Zero, 0)),
            num(v(Regime::One, 0)),
            num(model.payoff(x)),
            num(v(Regime::Zero, 1)),
            num(v(Regime::One, 1)),
            num(v(Regime::Zero, 2)),
            num(v(Regime::One, 2)),
        ]);
    }
    Ok(Document {
        sections: warning_sections(model),
        table: Some(table),
        summary: None,
    })
}

fn warning_sections(model: &Model) -> Vec<Section> {
    if model.warnings().is_empty() {
        Vec::new()
    } else {
        vec![warnings_section(model)]
    }
}

pub fn plot_data(model: &Model, grid: &GridSpec) -> Result<Document, CliError> {
    let sol = ViSolution::solve(model)?;
    let mut xs = grid.points();
    if !xs.contains(&sol.xstar) {
        xs.push(sol.xstar);
        xs.sort_by(f64::total_cmp);
    }
    let mut table = Table::new(&["x", "v0", "v1", "pi"]);
    table.comments.push(format!("xstar = {}", num(sol.xstar)));
    for w in model.warnings() {
        table.comments.push(format!("warning: {w}"));
    }
    for x in xs {
        table.row(vec![
            num(x),
            num(sol.eval(Regime::Zero, x, 0).expect("grid is positive")),
            num(sol.eval(Regime::One, x, 0).expect("grid is positive")),
            num(model.payoff(x)),
        ]);
    }
    Ok(Document {
        table: Some(table),
        ..Document::default()
    })
}

pub fn verify(
    model: &Model,
    grid: Option<GridSpec>,
    window: f64,
) -> Result<(Document, bool), CliError> {
    let (span, points) = match grid {
        None => (DEFAULT_SPAN, DEFAULT_GRID_POINTS),
        Some(g) => {
            if g.spacing != Spacing::Log || !(g.lo < 1.0 && g.hi > 1.0) || g.n < 100 {
                return Err(CliError::Usage(
                    "verify grid is LO:HI:N:log in multiples of x* with LO < 1 < HI and N >= 100"
                        .into(),
                ));
            }
            ((g.lo, g.hi), g.n)
        }
    };
    if !(0.0..1.0).contains(&window) {
        return Err(CliError::Usage("--window must lie in [0, 1)".into()));
    }
    let sol = ViSolution::solve(model)?;
    let b = check_boundary_conditions_over(&sol, span, points, window);
    let pasting = pasting_check(&sol);
    let pasting_ok = pasting.passes(PASTING_TOL);
    let mut gaps = Section::new("pasting").num("tolerance", PASTING_TOL);
    for regime in Regime::BOTH {
        for order in 0..3 {
            gaps = gaps.num(
                &format!("gap_v{}_d{order}", regime.index()),
                pasting.gaps[regime.index()][order],
            );
        }
    }
    gaps = gaps.text("pass", pasting_ok);
    let mut sections = vec![
        Section::new("boundary")
            .num("xstar", b.xstar)
            .text("grid_points", b.grid_points)
            .num("span_lo", b.span.0)
            .num("span_hi", b.span.1)
            .num("window", b.window)
            .num("lower_margin", b.lower_margin)
            .num("upper_margin", b.upper_margin)
            .num("tail_ratio", b.tail_ratio)
            .num("limit_ratio", b.limit_ratio)
            .text("lower_ok", b.lower_ok())
            .text("upper_ok", b.upper_ok())
            .text("tail_ok", b.tail_ok())
            .text("pass", b.pass),
        gaps,
    ];
    sections.extend(warning_sections(model));
    let pass = b.pass && pasting_ok;
    Ok((
        Document {
            sections,
            table: None,
            summary: Some(if pass { "pass" } else { "fail" }.into()),
        },
        pass,
    ))
}

pub fn sweep(config: &SweepConfig) -> Result<(Document, bool), CliError> {
    if config.is_empty() {
        return Err(CliError::Usage(
            "sweep value lists must be non-empty".into(),
        ));
    }
    if config.grid_points < 100 {
        return Err(CliError::Usage(
            "sweep grid needs at least 100 points".into(),
        ));
    }
    let result = parameter_sweep(config);
    let mut table = Table::new(&[
        "index",
        "mu0",
        "mu1",
        "sigma0",
        "sigma1",
        "lambda0",
        "lambda1",
        "eta",
        "status",
        "xstar",
        "lower_margin",
        "upper_margin",
        "tail_ratio",
        "max_pasting_gap",
        "detail",
    ]);
    for (i, row) in result.rows.iter().enumerate() {
        let p = &row.params;
        let mut cells = vec![i.to_string()];
        cells.extend(
            [
                p.mu0, p.mu1, p.sigma0, p.sigma1, p.lambda0, p.lambda1, p.eta,
            ]
            .map(|v| v.to_string()),
        );
        match &row.outcome {
            Ok(pt) => {
                cells.push(if pt.pass { "pass" } else { "fail" }.into());
                cells.extend(
                    [
                        pt.xstar,
                        pt.boundary.lower_margin,
                        pt.boundary.upper_margin,
                        pt.boundary.tail_ratio,
                        pt.max_pasting_gap,
                    ]
                    .map(num),
                );
                cells.push(String::new());
            }
            Err(e) => {
                cells.push("error".into());
                cells.extend(std::iter::repeat_n(String::new(), 5));
                cells.push(e.clone());
            }
        }
        table.row(cells);
    }
    let pass = result.passed == result.total;
    Ok((
        Document {
            sections: Vec::new(),
            table: Some(table),
            summary: Some(result.summary()),
        },
        pass,
    ))
}

pub struct SimRequest {
    pub regime: Regime,
    pub x0: f64,
    pub threshold: Option<f64>,
    pub horizon: Option<f64>,
    pub paths: usize,
    pub seed: u64,
}

/// Discrepancies beyond this many standard errors count as a failed check.
pub const Z_LIMIT: f64 = 3.0;

pub fn simulate(model: &Model, req: &SimRequest) -> Result<(Document, bool), CliError> {
    let sol = ViSolution::solve(model)?;
    let threshold = req.threshold.unwrap_or(sol.xstar);
    let mut config = SimConfig::new(req.regime, req.x0, threshold)
        .with_paths(req.paths)
        .with_seed(req.seed);
    if let Some(h) = req.horizon {
        config = config.with_horizon(h);
    }
    let est = estimate_value(model, config)?;
    let reference = sol
        .eval(req.regime, req.x0, 0)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let z = est.z_score(reference);
    let pass = z.abs() <= Z_LIMIT;
    let mut sections = vec![
        Section::new("simulation")
            .text("regime", req.regime.index())
            .num("x0", req.x0)
            .num("threshold", threshold)
            .text("paths", est.paths)
            .text("seed", est.seed)
            .num("horizon", est.horizon)
            .text("unstopped", est.unstopped),
        Section::new("estimate")
            .num("mean", est.mean)
            .num("std_error", est.std_error),
        Section::new("solver")
            .num("xstar", sol.xstar)
            .num("value", reference),
        Section::new("comparison")
            .num("z_score", z)
            .num("z_limit", Z_LIMIT)
            .text("pass", pass),
    ];
    sections.extend(warning_sections(model));
    Ok((
        Document {
            sections,
            ..Document::default()
        },
        pass,
    ))
}

pub fn asymptote(
    p: &SingleDiffusionParams,
    limit: regstop_core::Limit,
    table: Option<TableKind>,
    grid: GridSpec,
) -> Result<(Document, bool), CliError> {
    let res = threshold_limit(p, limit);
    let mut exps = Section::new("exponents");
    for (name, v) in &res.exponents {
        exps = exps.num(name, *v);
    }
    let pass = res.above_lower_bound();
    let mut doc = Document {
        sections: vec![
            Section::new("limit")
                .text("limit", limit)
                .num("xstar", res.xstar)
                .num("lower_bound", res.lower_bound)
                .num("k_tilde", res.k_tilde)
                .text("above_lower_bound", res.above_lower_bound())
                .text("above_k_tilde", res.above_k_tilde()),
            exps,
        ],
        ..Document::default()
    };
    match table {
        None => {}
        Some(TableKind::Convergence) => {
            let rows = convergence_table(p, limit, &CONVERGENCE_THETAS)?;
            let monotone = monotone_convergence(&rows);
            let mut t = Table::new(&["theta", "xstar", "rel_error", "value_gap"]);
            for r in &rows {
                t.row(vec![
                    num(r.theta),
                    num(r.xstar),
                    num(r.rel_error),
                    num(r.value_gap),
                ]);
            }
            doc.sections
                .push(Section::new("convergence").text("monotone", monotone));
            doc.table = Some(t);
        }
        Some(TableKind::Values) => {
            let lt = limit_value_functions(p, limit, &grid.points());
            let mut t = Table::new(&["x", "v0", "v1", "pi"]);
            t.comments.push(format!("xstar = {}", num(lt.xstar)));
            for r in &lt.rows {
                t.row(vec![num(r.x), num(r.v0), num(r.v1), num(r.pi)]);
            }
            doc.sections
                .push(Section::new("values").text("v1_dominates_payoff", lt.v1_dominates_payoff));
            doc.table = Some(t);
        }
    }
    doc.summary = Some(if pass { "pass" } else { "fail" }.into());
    Ok((doc, pass))
}
