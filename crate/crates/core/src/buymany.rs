//! Buy-many constraint checking and closure for lottery menus, and the
//! Lagrangian machinery over derived item pricings: per-item acquisition
//! prices, the cost-interpolated pricing family, exact utility envelopes and
//! the profit-bound report.
//!
//! For a finite menu, buy-many is the repeated-purchase criterion: no option
//! may cost more than acquiring its items one by one, where acquiring item i
//! means repeatedly buying the option minimizing price/probability for i.
//! A buyer facing a buy-many menu can therefore always purchase a single
//! item i outright at the acquisition price; best responses here range over
//! menu options plus these per-item purchases.

use crate::model::*;
use crate::rational::{
    cmp_rational_vs_ln, format_rational, frac, price_dot, rat, Price, Rational,
};
use num_traits::{Signed, Zero};
use std::cmp::Ordering;

/// Cheapest expected cost of acquiring each item by repeated purchases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HatPrices(pub Vec<Price>);

pub fn hat_prices(menu: &LotteryMenu) -> HatPrices {
    let m = menu.items();
    let mut out = vec![Price::Infinite; m];
    for (lottery, price) in &menu.options {
        for (slot, prob) in out.iter_mut().zip(&lottery.0) {
            if prob.is_positive() {
                slot.min_with(Price::Finite(price / prob));
            }
        }
    }
    HatPrices(out)
}

/// A menu option priced above its replication cost.
#[derive(Debug, Clone)]
pub struct BuyManyWitness {
    pub option: usize,
    pub price: Rational,
    pub replication_cost: Rational,
}

/// Verifies price(option) <= hat · lottery for every option.
#[allow(clippy::result_large_err)]
pub fn check_buy_many(menu: &LotteryMenu) -> Result<(), BuyManyWitness> {
    let hat = hat_prices(menu);
    for (k, (lottery, price)) in menu.options.iter().enumerate() {
        let replication = price_dot(&hat.0, &lottery.0);
        match replication {
            Price::Finite(r) => {
                if *price > r {
                    return Err(BuyManyWitness {
                        option: k,
                        price: price.clone(),
                        replication_cost: r,
                    });
                }
            }
            // An option's own items always have finite acquisition prices.
            Price::Infinite => unreachable!("replication of a listed option is finite"),
        }
    }
    Ok(())
}

/// Lowers every option price to min(price, hat · lottery) until a fixpoint.
/// Prices only decrease; the output passes `check_buy_many`.
///
/// Replication-derived prices never undercut the acquisition price of any
/// item they allocate (hat·lottery >= lottery_i · hat_i for every i), so the
/// acquisition prices are invariant under the pass and the fixpoint is
/// reached after a single improving round.
pub fn buy_many_closure(menu: &LotteryMenu) -> LotteryMenu {
    let mut menu = menu.clone();
    for _round in 0..100_000 {
        let hat = hat_prices(&menu);
        let mut changed = false;
        for (lottery, price) in menu.options.iter_mut() {
            if let Price::Finite(repl) = price_dot(&hat.0, &lottery.0) {
                if repl < *price {
                    *price = repl;
                    changed = true;
                }
            }
        }
        if !changed {
            debug_assert!(check_buy_many(&menu).is_ok());
            return menu;
        }
    }
    panic!("buy-many closure failed to reach a fixpoint");
}

/// Removes options priced below their production cost at costs `c2` and
/// re-closes, until every surviving option is both buy-many and covers its
/// cost. May return the empty (zero-only) menu.
pub fn strip_below_cost(menu: &LotteryMenu, c2: &[Rational]) -> LotteryMenu {
    let mut menu = menu.clone();
    loop {
        let before = menu.options.len();
        menu.options.retain(|(lottery, price)| {
            let cost: Rational = lottery.0.iter().zip(c2).map(|(l, c)| l * c).sum();
            *price >= cost
        });
        if menu.options.len() == before {
            return menu;
        }
        menu = buy_many_closure(&menu);
    }
}

/// Per-item price q_i = c_i + min over options of (price - c·lottery) /
/// lottery_i: the cheapest way to acquire item i net of production costs.
/// The menu must already be stripped at costs 2c so that q_i >= 2 c_i.
pub fn derived_item_pricing_q(menu: &LotteryMenu, c: &[Rational]) -> ItemPricing {
    let m = menu.items().max(c.len());
    let mut out = vec![Price::Infinite; m];
    for (lottery, price) in &menu.options {
        let cost: Rational = lottery.0.iter().zip(c).map(|(l, cc)| l * cc).sum();
        let net = price - cost;
        for (j, prob) in lottery.0.iter().enumerate() {
            if prob.is_positive() {
                out[j].min_with(Price::Finite(&net / prob + &c[j]));
            }
        }
    }
    ItemPricing(out)
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum BuyManyError {
    #[error("alpha {alpha} outside [-1, 1 - 1/(2m)] for m = {m}")]
    AlphaOutOfRange { alpha: String, m: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Upper endpoint of the interpolation interval: 1 - 1/(2m).
pub fn alpha_high(m: usize) -> Rational {
    rat(1) - Rational::new(1.into(), (2 * m as i64).into())
}

/// The interpolated pricing alpha·c + (1-alpha)·q; infinite entries stay
/// infinite.
pub fn q_alpha(q: &ItemPricing, c: &[Rational], alpha: &Rational) -> Result<ItemPricing, BuyManyError> {
    let m = q.len();
    check_dim("q_alpha costs", m, c.len())?;
    if *alpha < rat(-1) || *alpha > alpha_high(m) {
        return Err(BuyManyError::AlphaOutOfRange {
            alpha: format_rational(alpha),
            m,
        });
    }
    let one_minus = rat(1) - alpha;
    Ok(ItemPricing(
        q.0.iter()
            .zip(c)
            .map(|(qi, ci)| match qi {
                Price::Finite(v) => Price::Finite(alpha * ci + &one_minus * v),
                Price::Infinite => Price::Infinite,
            })
            .collect(),
    ))
}

/// Inverse-CDF sampler for the density 1/((1-alpha) ln 4m) on
/// [-1, 1 - 1/(2m)]: alpha = 1 - 2·(4m)^(-u).
pub fn sample_alpha(m: usize, u: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&u));
    1.0 - 2.0 * (4.0 * m as f64).powf(-u)
}

/// One linear piece of the utility envelope.
#[derive(Debug, Clone)]
pub struct CurvePiece {
    pub start: Rational,
    pub end: Rational,
    /// Item whose purchase defines the piece; None for the no-purchase line.
    pub item: Option<usize>,
    pub slope: Rational,
}

/// Piecewise-linear buyer utility alpha -> max(0, max_j v_j - q_alpha_j) on
/// [-1, 1 - 1/(2m)]. After stripping, slopes q_j - c_j are non-negative, so
/// the envelope is nondecreasing and convex.
#[derive(Debug, Clone)]
pub struct UtilityCurve {
    pub lo: Rational,
    pub hi: Rational,
    /// Candidate lines (item, intercept, slope): utility of buying the item
    /// as a function of alpha, plus the zero line.
    pub lines: Vec<(Option<usize>, Rational, Rational)>,
    pub pieces: Vec<CurvePiece>,
}

impl UtilityCurve {
    pub fn eval(&self, alpha: &Rational) -> Rational {
        self.lines
            .iter()
            .map(|(_, b, s)| b + s * alpha)
            .max()
            .expect("zero line always present")
    }

    /// Sum over pieces of slope times length: the coefficient k such that the
    /// expected profit of the interpolated pricing equals k / ln 4m.
    pub fn slope_length_sum(&self) -> Rational {
        self.pieces
            .iter()
            .map(|p| &p.slope * (&p.end - &p.start))
            .sum()
    }
}

/// Builds the exact upper envelope of the per-item utility lines.
pub fn utility_curve(v: &Valuation, q: &ItemPricing, c: &[Rational]) -> Result<UtilityCurve, BuyManyError> {
    let m = v.len();
    check_dim("utility_curve pricing", m, q.len())?;
    check_dim("utility_curve costs", m, c.len())?;
    let lo = rat(-1);
    let hi = alpha_high(m);

    let mut lines: Vec<(Option<usize>, Rational, Rational)> =
        vec![(None, Rational::zero(), Rational::zero())];
    for (j, price) in q.0.iter().enumerate() {
        if let Price::Finite(qj) = price {
            // v_j - q_alpha_j = (v_j - q_j) + alpha (q_j - c_j).
            lines.push((Some(j), &v.0[j] - qj, qj - &c[j]));
        }
    }

    // Upper envelope sweep: at each point pick the maximal (value, slope)
    // line and advance to the first strict overtake.
    let mut pieces = Vec::new();
    let mut alpha = lo.clone();
    let eval = |line: &(Option<usize>, Rational, Rational), a: &Rational| -> Rational {
        &line.1 + &line.2 * a
    };
    loop {
        let cur = lines
            .iter()
            .max_by(|x, y| {
                match eval(x, &alpha).cmp(&eval(y, &alpha)) {
                    Ordering::Equal => x.2.cmp(&y.2),
                    ord => ord,
                }
            })
            .expect("nonempty lines")
            .clone();
        let mut next = hi.clone();
        for other in &lines {
            if other.2 > cur.2 {
                // cur and other cross at (b_cur - b_other)/(s_other - s_cur).
                let cross = (&cur.1 - &other.1) / (&other.2 - &cur.2);
                if cross > alpha && cross < next {
                    next = cross;
                }
            }
        }
        pieces.push(CurvePiece {
            start: alpha.clone(),
            end: next.clone(),
            item: cur.0,
            slope: cur.2.clone(),
        });
        if next == hi {
            break;
        }
        alpha = next;
    }

    Ok(UtilityCurve {
        lo,
        hi,
        lines,
        pieces,
    })
}

/// What a buyer purchases when facing a buy-many menu: a listed option, a
/// single item at its acquisition price, or nothing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClosureChoice {
    Option(usize),
    Item(usize),
    Nothing,
}

#[derive(Debug, Clone)]
pub struct ClosurePurchase {
    pub choice: ClosureChoice,
    pub utility: Rational,
    pub payment: Rational,
    /// Allocation of the purchase (lottery, unit vector, or zero).
    pub allocation: Vec<Rational>,
}

/// Best response over the buy-many purchase surface: menu options and
/// hat-priced single items, with ties toward higher payment, then listed
/// options before item acquisitions, then lower index.
pub fn closure_best_response(
    v: &Valuation,
    menu: &LotteryMenu,
    hat: &HatPrices,
) -> Result<ClosurePurchase, BuyManyError> {
    let m = v.len();
    check_dim("closure_best_response hat", m, hat.0.len())?;
    let mut best = ClosurePurchase {
        choice: ClosureChoice::Nothing,
        utility: Rational::zero(),
        payment: Rational::zero(),
        allocation: vec![Rational::zero(); m],
    };
    let mut consider = |cand: ClosurePurchase| {
        if cand.utility.is_negative() {
            return;
        }
        let better = match cand.utility.cmp(&best.utility) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => cand.payment > best.payment,
        };
        if better {
            best = cand;
        }
    };
    for (k, (lottery, price)) in menu.options.iter().enumerate() {
        let value = lottery_value(v, lottery)?;
        consider(ClosurePurchase {
            choice: ClosureChoice::Option(k),
            utility: value - price,
            payment: price.clone(),
            allocation: lottery.0.clone(),
        });
    }
    for j in 0..m {
        if let Price::Finite(pj) = &hat.0[j] {
            let mut allocation = vec![Rational::zero(); m];
            allocation[j] = rat(1);
            consider(ClosurePurchase {
                choice: ClosureChoice::Item(j),
                utility: &v.0[j] - pj,
                payment: pj.clone(),
                allocation,
            });
        }
    }
    Ok(best)
}

/// Per-type row of the profit-bound report.
#[derive(Debug, Clone)]
pub struct ProfitBoundRow {
    pub type_index: usize,
    pub prob: Rational,
    /// Envelope utility at alpha = -1.
    pub u_low: Rational,
    /// Envelope utility at alpha = 1 - 1/(2m).
    pub u_high: Rational,
    /// Expected profit of the interpolated pricing, as the coefficient of
    /// 1/ln(4m): u_high - u_low.
    pub qalpha_profit_ln_coeff: Rational,
    /// Buyer utility against the stripped menu's purchase surface.
    pub menu_utility: Rational,
    pub menu_payment: Rational,
    /// Payment minus doubled production cost of the purchase.
    pub menu_profit_2c: Rational,
}

#[derive(Debug, Clone)]
pub struct ProfitBoundReport {
    pub m: usize,
    pub rows: Vec<ProfitBoundRow>,
    /// Expected profit of the stripped menu at doubled costs.
    pub buy_many_profit_2c: Rational,
    /// Probability-weighted sum of the per-type ln-coefficients.
    pub delta_ln_coeff: Rational,
    pub sprofit_oracle: Rational,
    /// buy_many_profit_2c / sprofit_oracle, when the oracle is positive.
    pub ratio: Option<Rational>,
    /// The bound factor 2 ln 4m, for display.
    pub bound_factor: f64,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum ProfitBoundError {
    #[error("menu is not buy-many: option {} priced {} above replication {}",
        .0.option, format_rational(&.0.price), format_rational(&.0.replication_cost))]
    NotBuyMany(BuyManyWitness),
    #[error("type {type_index}: envelope identity failed ({lhs} vs {rhs})")]
    EnvelopeIdentity {
        type_index: usize,
        lhs: String,
        rhs: String,
    },
    #[error("type {type_index}: utility at alpha=-1 exceeds the menu utility ({lhs} > {rhs})")]
    UpperBound {
        type_index: usize,
        lhs: String,
        rhs: String,
    },
    #[error("type {type_index}: top utility misses the half-profit bound ({lhs} < {rhs})")]
    LowerBound {
        type_index: usize,
        lhs: String,
        rhs: String,
    },
    #[error("type {type_index}: envelope slope negative after stripping")]
    NegativeSlope { type_index: usize },
    #[error("aggregate bound failed: profit {profit} vs 2 ln(4m) · {sprofit}")]
    Aggregate { profit: String, sprofit: String },
    #[error(transparent)]
    Inner(#[from] BuyManyError),
}

/// Verifies the whole profit-bound chain of a buy-many menu against the
/// item-pricing profit oracle: per-type endpoint inequalities, the exact
/// envelope identity, and the aggregate bound
/// profit at doubled costs <= 2 ln(4m) · oracle profit.
#[allow(clippy::result_large_err)]
pub fn profit_bound_report(
    d: &TypeDistribution,
    menu: &LotteryMenu,
    c: &[Rational],
    sprofit_oracle: &Rational,
) -> Result<ProfitBoundReport, ProfitBoundError> {
    check_buy_many(menu).map_err(ProfitBoundError::NotBuyMany)?;
    let m = d.items();
    check_dim("profit_bound costs", m, c.len()).map_err(BuyManyError::Model)?;

    let c2: Vec<Rational> = c.iter().map(|x| x * rat(2)).collect();
    let stripped = strip_below_cost(menu, &c2);
    // Stripping can empty the menu; everything is then withheld.
    let hat = if stripped.is_empty() {
        HatPrices(vec![Price::Infinite; m])
    } else {
        hat_prices(&stripped)
    };
    let q = derived_item_pricing_q(&stripped, c);
    let hi = alpha_high(m);
    let half = frac(1, 2);

    let mut rows = Vec::with_capacity(d.support.len());
    let mut profit_total = Rational::zero();
    let mut delta_total = Rational::zero();
    for (t, (v, prob)) in d.support.iter().enumerate() {
        let curve = utility_curve(v, &q, c)?;
        let u_low = curve.eval(&rat(-1));
        let u_high = curve.eval(&hi);
        let closed = &u_high - &u_low;
        let integral = curve.slope_length_sum();
        if closed != integral {
            return Err(ProfitBoundError::EnvelopeIdentity {
                type_index: t,
                lhs: format_rational(&closed),
                rhs: format_rational(&integral),
            });
        }
        if curve.pieces.iter().any(|p| p.slope.is_negative()) {
            return Err(ProfitBoundError::NegativeSlope { type_index: t });
        }

        let purchase = closure_best_response(v, &stripped, &hat)?;
        let cost2: Rational = purchase
            .allocation
            .iter()
            .zip(&c2)
            .map(|(l, cc)| l * cc)
            .sum();
        let profit2c = &purchase.payment - cost2;

        if u_low > purchase.utility {
            return Err(ProfitBoundError::UpperBound {
                type_index: t,
                lhs: format_rational(&u_low),
                rhs: format_rational(&purchase.utility),
            });
        }
        let lb_rhs = &purchase.utility + &half * &profit2c;
        if u_high < lb_rhs {
            return Err(ProfitBoundError::LowerBound {
                type_index: t,
                lhs: format_rational(&u_high),
                rhs: format_rational(&lb_rhs),
            });
        }

        profit_total += prob * &profit2c;
        delta_total += prob * &closed;
        rows.push(ProfitBoundRow {
            type_index: t,
            prob: prob.clone(),
            u_low,
            u_high,
            qalpha_profit_ln_coeff: closed,
            menu_utility: purchase.utility,
            menu_payment: purchase.payment,
            menu_profit_2c: profit2c,
        });
    }

    // Per-type bounds already give profit <= 2 delta; the aggregate bound
    // against the oracle uses the certified ln comparison.
    debug_assert!(profit_total <= rat(2) * &delta_total);
    let n_ln = 4 * m as u64;
    let pass = if !profit_total.is_positive() {
        true
    } else if !sprofit_oracle.is_positive() {
        false
    } else {
        let r = &profit_total / (rat(2) * sprofit_oracle);
        cmp_rational_vs_ln(&r, n_ln) == Ordering::Less
    };
    if !pass {
        return Err(ProfitBoundError::Aggregate {
            profit: format_rational(&profit_total),
            sprofit: format_rational(sprofit_oracle),
        });
    }
    let ratio = if sprofit_oracle.is_positive() {
        Some(&profit_total / sprofit_oracle)
    } else {
        None
    };
    Ok(ProfitBoundReport {
        m,
        rows,
        buy_many_profit_2c: profit_total,
        delta_ln_coeff: delta_total,
        sprofit_oracle: sprofit_oracle.clone(),
        ratio,
        bound_factor: 2.0 * (4.0 * m as f64).ln(),
    })
}
