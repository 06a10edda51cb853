use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use persuade_core::arrangement::{
    cell_has_interior, check_nondegeneracy, enumerate_cells, receiver_hyperplanes, solve_fpt, Extra,
};
use persuade_core::auction::{
    brute_force_auction, solve_auction, AuctionInstance, AuctionSolution,
};
use persuade_core::bicriteria::solve_bicriteria;
use persuade_core::cce::{crossvalidate_equivalence, solve_cce_cutting, ReductionSpec};
use persuade_core::exact::{solve_cce_exact, solve_persuasive_exact, SchemeSolution};
use persuade_core::generate::{
    self, random_coverage, random_cut, random_submodular_table, GenKind, GenParams,
};
use persuade_core::instance::{verify_scheme, Mode, PersuasionInstance, PublicScheme};
use persuade_core::profile::ActionProfile;
use persuade_core::setfn::{SetFunction, SetFunctionSpec};
use persuade_core::stability::verify_stability_bounds;
use serde_json::Value;

use crate::args::{CceMethod, Command, FunctionArg, Globals, ModeArg};
use crate::report::{
    read_json, read_value, to_value, CliError, CliResult, Output, Report, EXIT_NOT_PERSUASIVE,
    EXIT_VALIDATION,
};

/// Agreement tolerance between two solvers of the same LP.
const COMPARE_TOL: f64 = 1e-6;

impl Globals {
    fn mode(&self) -> Mode {
        match self.mode {
            ModeArg::Exact => Mode::Exact,
            ModeArg::Eps => Mode::Eps(self.eps),
            ModeArg::Cce => Mode::Cce,
        }
    }

    fn delta(&self) -> f64 {
        self.delta.unwrap_or(self.eps)
    }
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn json(mut r: Report, start: Instant) -> (Output, u8) {
    r.wall_time_ms = ms(start);
    (Output::Json(to_value(&r)), 0)
}

/// Adds the scheme's value and its persuasiveness check under `mode`.
fn with_scheme(
    r: Report,
    inst: &PersuasionInstance,
    sol: &SchemeSolution,
    mode: Mode,
) -> CliResult<Report> {
    let check = verify_scheme(inst, &sol.scheme, mode)?;
    Ok(Report {
        value: Some(sol.value),
        scheme: Some(to_value(&sol.scheme)),
        persuasiveness: Some(check),
        ..r
    }
    .extra("candidates", sol.candidates))
}

/// Accepts a bare scheme or any report carrying one under `scheme`.
fn load_scheme(path: &Path) -> CliResult<PublicScheme> {
    let mut v = read_value(path)?;
    if let Some(inner) = v.get_mut("scheme") {
        v = inner.take();
    }
    let raw: PublicScheme = serde_json::from_value(v).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(PublicScheme::new(raw.signals, raw.probs)?)
}

pub fn dispatch(g: &Globals, cmd: Command) -> CliResult<(Output, u8)> {
    let start = Instant::now();
    match cmd {
        Command::Gen {
            kind,
            n,
            states,
            types,
        } => {
            let kind: GenKind = kind
                .parse()
                .map_err(|e: persuade_core::Error| CliError::Usage(e.to_string()))?;
            let p = GenParams {
                n,
                states,
                types,
                seed: g.seed,
            };
            Ok((Output::Json(to_value(&generate::generate(kind, p)?)), 0))
        }
        Command::Validate { instance } => {
            let inst: PersuasionInstance = read_json(&instance)?;
            let eps_mode = g.mode == ModeArg::Eps;
            let res = inst.validate(eps_mode);
            let ok = res.is_ok();
            let r = Report::new("validate", g.seed)
                .param("eps_mode", eps_mode)
                .extra("valid", ok)
                .extra("violations", &res.violations);
            let (out, _) = json(r, start);
            Ok((out, if ok { 0 } else { EXIT_VALIDATION }))
        }
        Command::Verify { instance, scheme } => {
            let inst: PersuasionInstance = read_json(&instance)?;
            let scheme = load_scheme(&scheme)?;
            let mode = g.mode();
            let check = verify_scheme(&inst, &scheme, mode)?;
            let passed = check.passed;
            let r = Report {
                value: Some(check.sender_value),
                scheme: Some(to_value(&scheme)),
                persuasiveness: Some(check),
                ..Report::new("verify", g.seed).param("mode", mode)
            };
            let (out, _) = json(r, start);
            Ok((out, if passed { 0 } else { EXIT_NOT_PERSUASIVE }))
        }
        Command::SolveExact { instance } => {
            let inst: PersuasionInstance = read_json(&instance)?;
            let mode = g.mode();
            let sol = solve_persuasive_exact(&inst, mode)?;
            let r = with_scheme(
                Report::new("exact", g.seed).param("mode", mode),
                &inst,
                &sol,
                mode,
            )?;
            Ok(json(r, start))
        }
        Command::SolveFpt { instance, cell_cap } => {
            let inst: PersuasionInstance = read_json(&instance)?;
            let fpt = solve_fpt(&inst, cell_cap)?;
            let r = Report::new("fpt", g.seed).param("cell_cap", cell_cap);
            let r = with_scheme(r, &inst, &fpt.solution, Mode::Exact)?.extra("cells", fpt.cells);
            Ok(json(r, start))
        }
        Command::Cells { instance } => {
            cells_csv(&read_json(&instance)?).map(|s| (Output::Csv(s), 0))
        }
        Command::SolveBicriteria { instance } => {
            let inst: PersuasionInstance = read_json(&instance)?;
            let (eps, delta) = (g.eps, g.delta());
            let sol = solve_bicriteria(&inst, eps, delta, g.grid_cap)?;
            let scheme = sol.to_public_scheme()?;
            let check = verify_scheme(&inst, &scheme, Mode::Eps(eps))?;
            let r = Report {
                value: Some(sol.value),
                scheme: Some(to_value(&scheme)),
                persuasiveness: Some(check),
                ..Report::new("bicriteria", g.seed)
                    .param("eps", eps)
                    .param("delta", delta)
                    .param("grid_cap", g.grid_cap)
                    .extra("k", sol.k)
                    .extra("grid_size", sol.grid_size)
                    .extra("alpha", sol.alpha)
                    .extra("beta", sol.beta)
                    .extra("grid_signals", sol.grid_signals.len())
            };
            Ok(json(r, start))
        }
        Command::SolveCce {
            instance,
            method,
            max_rounds,
        } => {
            let inst: PersuasionInstance = read_json(&instance)?;
            let r = Report::new("cce", g.seed);
            let r = match method {
                CceMethod::Exact => {
                    let sol = solve_cce_exact(&inst)?;
                    with_scheme(r.param("method", "exact"), &inst, &sol, Mode::Cce)?
                }
                CceMethod::Cutting => {
                    let sol = solve_cce_cutting(&inst, max_rounds)?;
                    with_scheme(
                        r.param("method", "cutting"),
                        &inst,
                        &sol.solution,
                        Mode::Cce,
                    )?
                    .param("max_rounds", max_rounds)
                    .extra("dual_value", sol.dual_value)
                    .extra("gap", sol.gap)
                    .extra("rounds", sol.rounds)
                    .extra("cuts", sol.cuts.len())
                    .extra("round_cuts", &sol.round_cuts)
                    .extra("objective_history", &sol.objective_history)
                }
            };
            Ok(json(r, start))
        }
        Command::CceReduction { spec } => {
            let spec: ReductionSpec = read_json(&spec)?;
            let cv = crossvalidate_equivalence(&spec)?;
            let r = Report {
                value: Some(cv.cce_value),
                scheme: Some(to_value(&cv.scheme)),
                ..Report::new("cce-reduction", g.seed)
                    .param("n", spec.n())
                    .extra("passed", cv.passed)
                    .extra("unpinned_cce_value", cv.unpinned_cce_value)
                    .extra("wm_primal_value", cv.wm_primal_value)
                    .extra("half_wm_primal_value", 0.5 * cv.wm_primal_value)
                    .extra("row_violation", cv.row_violation)
            };
            let (out, _) = json(r, start);
            Ok((out, if cv.passed { 0 } else { EXIT_VALIDATION }))
        }
        Command::SolveAuction {
            auction,
            brute_force,
        } => {
            let inst: AuctionInstance = read_json(&auction)?;
            let literal = g.paper_literal_objective;
            let sol = solve_auction(&inst, literal)?;
            let mut r = Report {
                value: Some(sol.revenue),
                scheme: Some(auction_scheme(&sol)),
                ..Report::new("auction", g.seed)
                    .param("literal_objective", literal)
                    .param("brute_force", brute_force)
                    .extra("objective", sol.objective)
                    .extra("outcomes", sol.outcomes.len())
                    .extra("min_slack", sol.min_slack)
                    .extra("full_information", sol.full_information)
                    .extra("no_information", sol.no_information)
            };
            if brute_force {
                let b = brute_force_auction(&inst)?;
                r = r
                    .extra("brute_force_revenue", b.revenue)
                    .extra("brute_force_outcomes", b.outcomes.len());
            }
            Ok(json(r, start))
        }
        Command::Stability {
            function,
            function_file,
            n,
            trials,
        } => {
            let spec = match (function, function_file) {
                (_, Some(path)) => read_json::<SetFunctionSpec>(&path)?,
                (Some(kind), None) => stability_function(kind, n, g.seed)?,
                (None, None) => {
                    return Err(CliError::Usage(
                        "stability needs --function or --function-file".into(),
                    ))
                }
            };
            let f = SetFunction::new(spec)?;
            let rep = verify_stability_bounds(&f, trials, g.seed)?;
            let class = to_value(&rep.class);
            let class = class.as_str().unwrap_or_default();
            let mut csv = String::from("trial,set,eps,f_s,lp_min,bound,ratio,holds,class\n");
            for (k, row) in rep.rows.iter().enumerate() {
                let fs = f.eval_mask(row.set.mask());
                let ratio = row.ratio.map(|q| q.to_string()).unwrap_or_default();
                let _ = writeln!(
                    csv,
                    "{k},{},{},{fs},{},{},{ratio},{},{class}",
                    bits(&row.set),
                    row.eps,
                    row.lp_min,
                    row.bound,
                    row.holds
                );
            }
            Ok((Output::Csv(csv), 0))
        }
        Command::Compare { instance, cell_cap } => {
            let inst: PersuasionInstance = read_json(&instance)?;
            let t0 = Instant::now();
            let exact = solve_persuasive_exact(&inst, Mode::Exact)?;
            let exact_ms = ms(t0);
            let t1 = Instant::now();
            let fpt = solve_fpt(&inst, cell_cap)?;
            let fpt_ms = ms(t1);
            let diff = (exact.value - fpt.solution.value).abs();
            let agree = diff <= COMPARE_TOL * (1.0 + exact.value.abs());
            let r = with_scheme(
                Report::new("compare", g.seed).param("cell_cap", cell_cap),
                &inst,
                &fpt.solution,
                Mode::Exact,
            )?
            .extra("exact_value", exact.value)
            .extra("fpt_value", fpt.solution.value)
            .extra("difference", diff)
            .extra("agree", agree)
            .extra("exact_ms", exact_ms)
            .extra("fpt_ms", fpt_ms)
            .extra("exact_candidates", exact.candidates)
            .extra("fpt_candidates", fpt.candidates.len())
            .extra("cells", fpt.cells);
            let (out, _) = json(r, start);
            Ok((out, if agree { 0 } else { EXIT_VALIDATION }))
        }
    }
}

fn bits(s: &ActionProfile) -> String {
    s.bits().iter().map(|b| char::from(b'0' + b)).collect()
}

fn stability_function(kind: FunctionArg, n: usize, seed: u64) -> CliResult<SetFunctionSpec> {
    if n == 0 {
        return Err(CliError::Usage("--n must be positive".into()));
    }
    let mut rng = generate::rng(seed);
    Ok(match kind {
        FunctionArg::Coverage => random_coverage(n, &mut rng),
        FunctionArg::Cut => random_cut(n, &mut rng),
        FunctionArg::Submodular => random_submodular_table(n, &mut rng),
        FunctionArg::Indicator => generate::supermodular_indicator(n),
        FunctionArg::Linear => SetFunctionSpec::cardinality(n),
    })
}

/// Probabilities keyed by outcome, each outcome a ranking per bidder type.
fn auction_scheme(sol: &AuctionSolution) -> Value {
    serde_json::json!({ "outcomes": sol.outcomes, "probs": sol.probs })
}

/// One row per cell of the receivers' arrangement; `on_simplex` marks cells
/// whose interior meets the open simplex.
fn cells_csv(inst: &PersuasionInstance) -> CliResult<String> {
    inst.check(false)?;
    if let persuade_core::arrangement::Nondegeneracy::Violating(set) = check_nondegeneracy(inst)? {
        return Err(persuade_core::Error::Degenerate(format!(
            "receivers {set:?} have dependent payoff vectors"
        ))
        .into());
    }
    let hs = receiver_hyperplanes(inst)?;
    let d = inst.d();
    let mut extras = vec![Extra::Equality(vec![1.0; d], 1.0)];
    extras.extend((0..d).map(|t| {
        let mut e = vec![0.0; d];
        e[t] = 1.0;
        Extra::Margin(e, 0.0)
    }));
    let mut csv = String::from("cell,label,witness,on_simplex\n");
    for (c, cell) in enumerate_cells(&hs)?.into_iter().enumerate() {
        let label: String = cell
            .label
            .0
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect();
        let witness: Vec<String> = cell.witness.iter().map(f64::to_string).collect();
        let on = cell_has_interior(&hs, &cell.label, &extras)?.is_yes();
        let _ = writeln!(csv, "{c},{label},{},{on}", witness.join(";"));
    }
    Ok(csv)
}
