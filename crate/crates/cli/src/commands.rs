//! Command implementations. Every command produces certificate rows; a row
//! with pass=false makes the process exit with the assertion code.

use crate::csvout::Row;
use mechlab_core::buymany::{
    buy_many_closure, check_buy_many, profit_bound_report, ProfitBoundError,
};
use mechlab_core::instances::{
    gap_instance_eps, random_costs, random_instance, random_menu, read_instance,
    read_instance_raw, read_menu_infer, CorrelationStyle, InstancesError,
};
use mechlab_core::lp::LpError;
use mechlab_core::model::*;
use mechlab_core::opt::{
    convex_decompose, exante_global, exante_srev, opt_item_pricing, srev_subgradient,
    supergradient_holds, Guards, OptError,
};
use mechlab_core::rational::{
    format_rational, frac, parse_price, parse_rational, rat, rational_to_f64, Price, Rational,
};
use mechlab_core::sequential::{evaluate_sequential_mc, verify_half, SeqError};
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use std::path::Path;

#[derive(Debug)]
pub enum CliError {
    Parse(String),
    Guard(String),
    Assertion(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Guard(_) => 3,
            CliError::Assertion(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Parse(m) | CliError::Guard(m) | CliError::Assertion(m) => m,
        }
    }
}

impl From<InstancesError> for CliError {
    fn from(e: InstancesError) -> Self {
        match e {
            InstancesError::Invalid(_) => CliError::Assertion(e.to_string()),
            other => CliError::Parse(other.to_string()),
        }
    }
}

impl From<OptError> for CliError {
    fn from(e: OptError) -> Self {
        match e {
            OptError::Guard { .. } => CliError::Guard(e.to_string()),
            OptError::Model(m) => CliError::Parse(m.to_string()),
            other => CliError::Assertion(other.to_string()),
        }
    }
}

impl From<SeqError> for CliError {
    fn from(e: SeqError) -> Self {
        match e {
            SeqError::Guard { .. } => CliError::Guard(e.to_string()),
            SeqError::BadOrder => CliError::Parse(e.to_string()),
            SeqError::Opt(inner) => inner.into(),
            SeqError::Model(m) => CliError::Parse(m.to_string()),
            other => CliError::Assertion(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Parse(e.to_string())
    }
}

impl From<LpError> for CliError {
    fn from(e: LpError) -> Self {
        CliError::Assertion(e.to_string())
    }
}

fn parse_rational_list(what: &str, s: &str) -> Result<Vec<Rational>, CliError> {
    s.split(',')
        .map(|part| parse_rational(part).map_err(|e| CliError::Parse(format!("{what}: {e}"))))
        .collect()
}

fn parse_price_list(what: &str, s: &str) -> Result<Vec<Price>, CliError> {
    s.split(',')
        .map(|part| parse_price(part).map_err(|e| CliError::Parse(format!("{what}: {e}"))))
        .collect()
}

fn parse_order(s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|e| CliError::Parse(format!("order: {e}")))
        })
        .collect()
}

fn fmt_vec(v: &[Rational]) -> String {
    let parts: Vec<String> = v.iter().map(format_rational).collect();
    format!("({})", parts.join(","))
}

pub fn cmd_validate(instance: &Path) -> Result<Vec<Row>, CliError> {
    let inst = read_instance_raw(instance)?;
    match validate_instance(&inst) {
        Ok(()) => Ok(vec![Row::new(
            "validate",
            instance.display().to_string(),
            "",
            "ok",
            true,
        )]),
        Err(violations) => Ok(violations
            .iter()
            .map(|v| Row::new("invariant", v.location.clone(), v.message.clone(), "violated", false))
            .collect()),
    }
}

pub fn cmd_check_buy_many(menu_path: &Path) -> Result<Vec<Row>, CliError> {
    let menu = read_menu_infer(menu_path)?;
    match check_buy_many(&menu) {
        Ok(()) => Ok(vec![Row::new("buy-many", "menu", "", "ok", true)]),
        Err(w) => Ok(vec![Row::new(
            format!("buy-many-witness[option {}]", w.option),
            format_rational(&w.price),
            format_rational(&w.replication_cost),
            "<=",
            false,
        )]),
    }
}

pub fn cmd_opt_pricing(
    instance: &Path,
    costs: Option<&str>,
    guards: &Guards,
) -> Result<Vec<Row>, CliError> {
    let inst = read_instance(instance)?;
    let costs = match costs {
        Some(s) => Some(parse_rational_list("costs", s)?),
        None => inst.costs.clone(),
    };
    let mut rows = Vec::new();
    for (i, d) in inst.buyers.iter().enumerate() {
        let rev = opt_item_pricing(d, None, guards)?;
        rows.push(Row::new(
            format!("srev[buyer {i}]"),
            format_rational(&rev.revenue),
            rev.pricing.to_string(),
            "=",
            true,
        ));
        if let Some(c) = &costs {
            let pro = opt_item_pricing(d, Some(c), guards)?;
            rows.push(Row::new(
                format!("sprofit[buyer {i}]"),
                format_rational(pro.profit.as_ref().expect("profit mode")),
                pro.pricing.to_string(),
                "=",
                true,
            ));
        }
    }
    Ok(rows)
}

pub fn cmd_exante(instance: &Path, guards: &Guards) -> Result<Vec<Row>, CliError> {
    let inst = read_instance(instance)?;
    let sol = exante_global(&inst, guards)?;
    let mut rows = vec![Row::new(
        "ea-srev",
        format_rational(&sol.total_revenue),
        "",
        "=",
        true,
    )];
    for (i, b) in sol.buyers.iter().enumerate() {
        rows.push(Row::new(
            format!("buyer[{i}].revenue"),
            format_rational(&b.revenue),
            fmt_vec(&b.allocation.0),
            "alloc",
            true,
        ));
    }
    for j in 0..inst.m {
        let mass: Rational = sol.buyers.iter().map(|b| b.allocation.0[j].clone()).sum();
        rows.push(Row::new(
            format!("supply[item {j}]"),
            format_rational(&mass),
            "1",
            "<=",
            mass <= Rational::one(),
        ));
    }
    rows.push(Row::info("item-duals", fmt_vec(&sol.item_duals)));
    Ok(rows)
}

pub fn cmd_subgradient(
    instance: &Path,
    x: &str,
    seed: u64,
    guards: &Guards,
) -> Result<Vec<Row>, CliError> {
    let inst = read_instance(instance)?;
    let d = &inst.buyers[0];
    let x = AllocationVector(parse_rational_list("x", x)?);
    let c = srev_subgradient(d, &x, guards)?;
    let solution = exante_srev(d, &x, guards)?;
    let at_x = solution.buyer.revenue;
    let mut rows = vec![
        Row::new("subgradient", fmt_vec(&c), "0", ">=", c.iter().all(|v| !v.is_negative())),
        Row::info("srev-at-x", format_rational(&at_x)),
        Row::info("constraint-slack", fmt_vec(&solution.slack)),
    ];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for k in 0..5 {
        let y = AllocationVector(
            (0..inst.m)
                .map(|_| frac(rng.gen_range(0..=8), 8))
                .collect(),
        );
        let ok = supergradient_holds(d, &x, &at_x, &c, &y, guards)?;
        rows.push(Row::new(
            format!("supergradient[{k}]"),
            fmt_vec(&y.0),
            "srev(x)+c·(y-x)",
            "<=",
            ok,
        ));
    }
    Ok(rows)
}

pub fn cmd_profit_bound(
    instance: &Path,
    menu_path: &Path,
    costs: Option<&str>,
    guards: &Guards,
) -> Result<Vec<Row>, CliError> {
    let inst = read_instance(instance)?;
    let menu = read_menu_infer(menu_path)?;
    let d = &inst.buyers[0];
    let costs = match costs {
        Some(s) => parse_rational_list("costs", s)?,
        None => inst.costs_or_zero(),
    };
    let sprofit = opt_item_pricing(d, Some(&costs), guards)?
        .profit
        .expect("profit mode");
    let report = match profit_bound_report(d, &menu, &costs, &sprofit) {
        Ok(r) => r,
        Err(ProfitBoundError::NotBuyMany(w)) => {
            return Ok(vec![Row::new(
                format!("precondition[option {}]", w.option),
                format_rational(&w.price),
                format_rational(&w.replication_cost),
                "<=",
                false,
            )])
        }
        Err(e) => return Err(CliError::Assertion(e.to_string())),
    };
    let mut rows = Vec::new();
    for r in &report.rows {
        rows.push(Row::new(
            format!("type[{}]", r.type_index),
            format!(
                "u(-1)={};u(top)={}",
                format_rational(&r.u_low),
                format_rational(&r.u_high)
            ),
            format!(
                "qalpha-lncoeff={};profit2c={}",
                format_rational(&r.qalpha_profit_ln_coeff),
                format_rational(&r.menu_profit_2c)
            ),
            "info",
            true,
        ));
        rows.push(Row::new(
            format!("ub[type {}]", r.type_index),
            format_rational(&r.u_low),
            format_rational(&r.menu_utility),
            "<=",
            true,
        ));
        rows.push(Row::new(
            format!("lb[type {}]", r.type_index),
            format_rational(&r.u_high),
            format!(
                "{}+{}/2",
                format_rational(&r.menu_utility),
                format_rational(&r.menu_profit_2c)
            ),
            ">=",
            true,
        ));
        rows.push(Row::new(
            format!("envelope[type {}]", r.type_index),
            format_rational(&r.qalpha_profit_ln_coeff),
            "slope-sum",
            "=",
            true,
        ));
    }
    rows.push(Row::new(
        "profit-bound-2c",
        format_rational(&report.buy_many_profit_2c),
        format!("2·ln({})·{}", 4 * report.m, format_rational(&report.sprofit_oracle)),
        "<=",
        true,
    ));
    if let Some(ratio) = &report.ratio {
        rows.push(Row::new(
            "ratio",
            format_rational(ratio),
            format!("{:.6}", report.bound_factor),
            "<=",
            true,
        ));
    }
    Ok(rows)
}

pub fn cmd_decompose(
    instance: &Path,
    prices: &str,
    x: &str,
    guards: &Guards,
) -> Result<Vec<Row>, CliError> {
    let inst = read_instance(instance)?;
    let d = &inst.buyers[0];
    let p = ItemPricing(parse_price_list("prices", prices)?);
    let y = AllocationVector(parse_rational_list("x", x)?);
    let full = AvailabilityDistribution::full(inst.m);
    let dec = convex_decompose(&p, d, &full, &y, guards)?;
    let mut rows = Vec::new();
    for (k, (atom, w)) in dec.pricing.atoms.iter().enumerate() {
        rows.push(Row::info(
            format!("atom[{k}] weight {}", format_rational(w)),
            atom.to_string(),
        ));
    }
    rows.push(Row::new(
        "allocation",
        fmt_vec(&dec.allocation.0),
        fmt_vec(&y.0),
        "=",
        dec.allocation == y,
    ));
    let want = y.dot_prices(&p);
    rows.push(Row::new(
        "revenue",
        format_rational(&dec.revenue),
        format_rational(&want),
        "=",
        dec.revenue == want,
    ));
    Ok(rows)
}

pub fn cmd_sequential(
    instance: &Path,
    order: Option<&str>,
    mode: &str,
    trials: u64,
    seed: u64,
    guards: &Guards,
) -> Result<Vec<Row>, CliError> {
    if mode != "exact" && mode != "mc" {
        return Err(CliError::Parse(format!(
            "mode must be 'exact' or 'mc', got {mode:?}"
        )));
    }
    let inst = read_instance(instance)?;
    let order = match order {
        Some(s) => parse_order(s)?,
        None => (0..inst.n()).collect(),
    };
    let result = verify_half(&inst, &order, guards)?;
    let mut rows = Vec::new();
    let half = frac(1, 2);
    for cert in &result.certificates {
        let b = cert.buyer;
        let expect_alloc = result.exante.buyers[b].allocation.scale(&half);
        rows.push(Row::new(
            format!("alloc-half[buyer {b}]"),
            fmt_vec(&cert.allocation.0),
            fmt_vec(&expect_alloc.0),
            "=",
            cert.allocation == expect_alloc,
        ));
        let expect_rev = &result.exante.buyers[b].revenue * &half;
        rows.push(Row::new(
            format!("rev-half[buyer {b}]"),
            format_rational(&cert.revenue),
            format_rational(&expect_rev),
            "=",
            cert.revenue == expect_rev,
        ));
        let min_marg = cert.availability_marginals.iter().min();
        rows.push(Row::new(
            format!("availability[buyer {b}]"),
            min_marg.map(format_rational).unwrap_or_default(),
            "1/2",
            ">=",
            min_marg.is_none_or(|v| *v >= half),
        ));
    }
    rows.push(Row::new(
        "randomized-total",
        format_rational(&result.randomized_total),
        format_rational(&(&result.exante.total_revenue * &half)),
        "=",
        result.randomized_total == &result.exante.total_revenue * &half,
    ));
    rows.push(Row::new(
        "derandomized",
        format_rational(&result.deterministic_total),
        format_rational(&result.randomized_total),
        ">=",
        result.deterministic_total >= result.randomized_total,
    ));
    rows.push(Row::new(
        "ratio",
        format_rational(&result.ratio),
        "1/2",
        ">=",
        result.ratio >= half,
    ));
    if mode == "mc" {
        let mc = evaluate_sequential_mc(&inst, &result.deterministic, trials, seed)?;
        let exact = rational_to_f64(&result.deterministic_total);
        rows.push(Row::new(
            "mc-agreement",
            format!("{:.6}", (mc.mean - exact).abs()),
            format!("{:.6}", mc.half_width_99),
            "<=",
            (mc.mean - exact).abs() <= mc.half_width_99,
        ));
    }
    Ok(rows)
}

pub fn cmd_gap(m: usize, eps: Option<&str>, guards: &Guards) -> Result<Vec<Row>, CliError> {
    let eps = match eps {
        Some(s) => parse_rational(s).map_err(|e| CliError::Parse(format!("eps: {e}")))?,
        None => Rational::zero(),
    };
    let gap = gap_instance_eps(m, &eps).map_err(|e| CliError::Parse(e.to_string()))?;
    let d = &gap.instance.buyers[0];
    let costs = gap.instance.costs_or_zero();
    let full = AvailabilityDistribution::full(m);

    let mut rows = Vec::new();
    rows.push(Row::new(
        "buy-many",
        "menu",
        "",
        "ok",
        check_buy_many(&gap.menu).is_ok(),
    ));
    // Closed sum: (m-1)/2 minus the probability-weighted discount
    // eps * sum_{i=2..m} 2^-i = eps * (1/2 - 2^-m).
    let expect = Rational::new((m as i64 - 1).into(), 2.into())
        - (frac(1, 2) - mechlab_core::rational::pow2(-(m as i32))) * &eps;
    rows.push(Row::new(
        "analytic-profit",
        format_rational(&gap.analytic_buy_many_profit),
        format_rational(&expect),
        "=",
        gap.analytic_buy_many_profit == expect,
    ));
    let realized = expected_profit(d, &Pricing::Menu(gap.menu.clone()), &costs, &full)?;
    rows.push(Row::info("realized-profit", format_rational(&realized)));
    let sprofit = opt_item_pricing(d, Some(&costs), guards)?
        .profit
        .expect("profit mode");
    rows.push(Row::new(
        "sprofit",
        format_rational(&sprofit),
        "2",
        "<=",
        sprofit <= rat(2),
    ));
    let ratio = &gap.analytic_buy_many_profit / &sprofit;
    let target = Rational::new((m as i64 - 1).into(), 4.into());
    rows.push(Row::new(
        "ratio",
        format_rational(&ratio),
        format_rational(&target),
        ">=",
        ratio >= target,
    ));
    Ok(rows)
}

struct SweepOutcome {
    index: u64,
    rows: Vec<Row>,
}

pub fn cmd_sweep(
    seed: u64,
    trials: u64,
    n_max: usize,
    m_max: usize,
    support_max: usize,
    scale: i64,
    guards: &Guards,
) -> Result<Vec<Row>, CliError> {
    use rayon::prelude::*;
    let styles = [
        CorrelationStyle::Independent,
        CorrelationStyle::Comonotone,
        CorrelationStyle::Antithetic,
    ];
    let outcomes: Vec<SweepOutcome> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let base = seed.wrapping_add(1000 * t);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(base);
            let n = rng.gen_range(1..=n_max);
            let m = rng.gen_range(1..=m_max);
            let support = rng.gen_range(1..=support_max);
            let style = styles[rng.gen_range(0..styles.len())];
            let inst = random_instance(n, m, support, scale, style, base ^ 1);
            let mut rows = Vec::new();

            // Buy-many closure properties.
            let menu = buy_many_closure(&random_menu(m, 3, scale, base ^ 2));
            let closure_ok =
                check_buy_many(&menu).is_ok() && buy_many_closure(&menu) == menu;
            rows.push(Row::new(
                format!("sweep[{t}].closure"),
                "",
                "",
                "ok",
                closure_ok,
            ));

            // Profit bound against the oracle.
            let costs = random_costs(m, scale, base ^ 3);
            let d = &inst.buyers[0];
            let bound_ok = opt_item_pricing(d, Some(&costs), guards)
                .ok()
                .and_then(|v| v.profit)
                .map(|sprofit| profit_bound_report(d, &menu, &costs, &sprofit).is_ok())
                .unwrap_or(false);
            rows.push(Row::new(
                format!("sweep[{t}].profit-bound"),
                "",
                "",
                "ok",
                bound_ok,
            ));

            // Sequential half guarantee with a random order.
            let mut order: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                order.swap(i, rng.gen_range(0..=i));
            }
            let half_ok = verify_half(&inst, &order, guards)
                .map(|r| r.ratio >= frac(1, 2))
                .unwrap_or(false);
            rows.push(Row::new(
                format!("sweep[{t}].verify-half"),
                "",
                "",
                "ok",
                half_ok,
            ));

            // Decomposition equalities against a random target.
            let full = AvailabilityDistribution::full(m);
            let p = ItemPricing(
                (0..m)
                    .map(|_| {
                        if rng.gen_bool(0.25) {
                            Price::Infinite
                        } else {
                            Price::Finite(frac(rng.gen_range(0..=2 * scale), 2))
                        }
                    })
                    .collect(),
            );
            let dec_ok = allocation_vector(d, &RandomItemPricing::deterministic(p.clone()), &full)
                .ok()
                .map(|xstar| {
                    let k = frac(rng.gen_range(0..=8), 8);
                    let y = xstar.scale(&k);
                    convex_decompose(&p, d, &full, &y, guards).is_ok()
                })
                .unwrap_or(false);
            rows.push(Row::new(
                format!("sweep[{t}].decompose"),
                "",
                "",
                "ok",
                dec_ok,
            ));
            SweepOutcome { index: t, rows }
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = 0usize;
    let mut total = 0usize;
    let mut ordered = outcomes;
    ordered.sort_by_key(|o| o.index);
    for o in ordered {
        for r in o.rows {
            total += 1;
            if !r.pass {
                failures += 1;
            }
            rows.push(r);
        }
    }
    rows.push(Row::new(
        "sweep-summary",
        format!("{} passed", total - failures),
        format!("{failures} failed"),
        "counts",
        failures == 0,
    ));
    Ok(rows)
}
