//! Best responses and exact revenue / profit / allocation evaluation.

use super::*;
use crate::rational::{Price, Rational};
use num_traits::{Signed, Zero};

/// Outcome of a buyer's best response: chosen option (or none), achieved
/// utility and payment. Utility and payment are 0 when nothing is bought.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Choice {
    pub index: Option<usize>,
    pub utility: Rational,
    pub payment: Rational,
}

impl Choice {
    pub fn none() -> Self {
        Choice {
            index: None,
            utility: Rational::zero(),
            payment: Rational::zero(),
        }
    }
}

/// Expected value of a lottery for a unit-demand type: sum of v_j * lambda_j.
pub fn lottery_value(v: &Valuation, lottery: &Lottery) -> Result<Rational, ModelError> {
    check_dim("lottery_value", v.len(), lottery.len())?;
    Ok(v.0.iter().zip(&lottery.0).map(|(a, b)| a * b).sum())
}

/// Ties are broken toward the higher payment, then the lower option index,
/// with the implicit zero option losing all ties. A buyer with exactly zero
/// utility buys.
fn better(candidate: (&Rational, &Rational, usize), incumbent: (&Rational, &Rational, usize)) -> bool {
    match candidate.0.cmp(incumbent.0) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => match candidate.1.cmp(incumbent.1) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => candidate.2 < incumbent.2,
        },
    }
}

/// Utility-maximizing menu option, including the implicit zero option.
pub fn best_response_menu(v: &Valuation, menu: &LotteryMenu) -> Result<Choice, ModelError> {
    let mut best = Choice::none();
    let mut best_index = usize::MAX; // implicit zero option sorts last
    for (k, (lottery, price)) in menu.options.iter().enumerate() {
        let utility = lottery_value(v, lottery)? - price;
        if utility.is_negative() {
            continue;
        }
        if better((&utility, price, k), (&best.utility, &best.payment, best_index)) {
            best = Choice {
                index: Some(k),
                utility,
                payment: price.clone(),
            };
            best_index = k;
        }
    }
    Ok(best)
}

/// Utility-maximizing single item among the available set `mask`, with the
/// same tie-breaking as menus.
pub fn best_response_items(v: &Valuation, pricing: &ItemPricing, mask: u32) -> Result<Choice, ModelError> {
    check_dim("best_response_items", v.len(), pricing.len())?;
    let mut best = Choice::none();
    let mut best_index = usize::MAX;
    for j in 0..pricing.len() {
        if mask & (1 << j) == 0 {
            continue;
        }
        let price = match &pricing.0[j] {
            Price::Finite(p) => p,
            Price::Infinite => continue,
        };
        let utility = &v.0[j] - price;
        if utility.is_negative() {
            continue;
        }
        if better((&utility, price, j), (&best.utility, &best.payment, best_index)) {
            best = Choice {
                index: Some(j),
                utility,
                payment: price.clone(),
            };
            best_index = j;
        }
    }
    Ok(best)
}

/// A pricing mechanism a single buyer can face.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pricing {
    Menu(LotteryMenu),
    Items(RandomItemPricing),
}

impl Pricing {
    pub fn items(&self) -> usize {
        match self {
            Pricing::Menu(m) => m.items(),
            Pricing::Items(r) => r.items(),
        }
    }
}

fn for_each_item_outcome<F>(
    d: &TypeDistribution,
    pricing: &RandomItemPricing,
    avail: &AvailabilityDistribution,
    mut f: F,
) -> Result<(), ModelError>
where
    F: FnMut(&Rational, &Valuation, &ItemPricing, &Choice),
{
    for (p, weight) in &pricing.atoms {
        check_dim("expected value", d.items(), p.len())?;
        for (mask, pmask) in &avail.atoms {
            for (v, pv) in &d.support {
                let choice = best_response_items(v, p, *mask)?;
                let joint = weight * pmask * pv;
                f(&joint, v, p, &choice);
            }
        }
    }
    Ok(())
}

/// Exact expected payment over type, pricing randomness and availability.
/// Menus are evaluated under full availability only.
pub fn expected_revenue(
    d: &TypeDistribution,
    pricing: &Pricing,
    avail: &AvailabilityDistribution,
) -> Result<Rational, ModelError> {
    match pricing {
        Pricing::Menu(menu) => {
            if !avail.is_full() {
                return Err(ModelError::MenuWithAvailability);
            }
            let mut total = Rational::zero();
            for (v, pv) in &d.support {
                let choice = best_response_menu(v, menu)?;
                total += pv * &choice.payment;
            }
            Ok(total)
        }
        Pricing::Items(rip) => {
            let mut total = Rational::zero();
            for_each_item_outcome(d, rip, avail, |joint, _, _, choice| {
                total += joint * &choice.payment;
            })?;
            Ok(total)
        }
    }
}

/// Exact expected payment minus production cost of the allocation. A menu
/// purchase costs c · lambda of the chosen lottery; an item purchase costs
/// the item's production cost.
pub fn expected_profit(
    d: &TypeDistribution,
    pricing: &Pricing,
    costs: &[Rational],
    avail: &AvailabilityDistribution,
) -> Result<Rational, ModelError> {
    match pricing {
        Pricing::Menu(menu) => {
            if !avail.is_full() {
                return Err(ModelError::MenuWithAvailability);
            }
            check_dim("expected_profit costs", menu.items(), costs.len())?;
            let mut total = Rational::zero();
            for (v, pv) in &d.support {
                let choice = best_response_menu(v, menu)?;
                if let Some(k) = choice.index {
                    let (lottery, price) = &menu.options[k];
                    let cost: Rational = lottery.0.iter().zip(costs).map(|(l, c)| l * c).sum();
                    total += pv * (price - cost);
                }
            }
            Ok(total)
        }
        Pricing::Items(rip) => {
            check_dim("expected_profit costs", rip.items(), costs.len())?;
            let mut total = Rational::zero();
            for_each_item_outcome(d, rip, avail, |joint, _, _, choice| {
                if let Some(j) = choice.index {
                    total += joint * (&choice.payment - &costs[j]);
                }
            })?;
            Ok(total)
        }
    }
}

/// Exact per-item purchase probabilities of a random item pricing.
pub fn allocation_vector(
    d: &TypeDistribution,
    pricing: &RandomItemPricing,
    avail: &AvailabilityDistribution,
) -> Result<AllocationVector, ModelError> {
    let m = pricing.items();
    let mut alloc = AllocationVector::zero(m);
    for_each_item_outcome(d, pricing, avail, |joint, _, _, choice| {
        if let Some(j) = choice.index {
            alloc.0[j] += joint;
        }
    })?;
    Ok(alloc)
}
