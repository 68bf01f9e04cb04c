//! Domain types and buyer best-response semantics.
//!
//! Values, menus and pricings are exact rationals throughout. Buyers are
//! unit-demand: the value of a set of items is the maximum single-item value
//! inside it, and the value of a lottery is the expected item value.

mod eval;

pub use eval::*;

use crate::rational::{format_rational, Price, Rational};
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;

/// Per-item values of one unit-demand type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Valuation(pub Vec<Rational>);

impl Valuation {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| v.is_zero())
    }
}

/// Finite-support distribution over valuations of one buyer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeDistribution {
    pub support: Vec<(Valuation, Rational)>,
}

impl TypeDistribution {
    pub fn new(support: Vec<(Valuation, Rational)>) -> Self {
        TypeDistribution { support }
    }

    /// Item count, taken from the first type.
    pub fn items(&self) -> usize {
        self.support.first().map_or(0, |(v, _)| v.len())
    }
}

/// A market: m items, n buyers, optional production costs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub m: usize,
    pub buyers: Vec<TypeDistribution>,
    pub costs: Option<Vec<Rational>>,
}

impl Instance {
    pub fn n(&self) -> usize {
        self.buyers.len()
    }

    /// Cost vector, defaulting to zeros.
    pub fn costs_or_zero(&self) -> Vec<Rational> {
        self.costs
            .clone()
            .unwrap_or_else(|| vec![Rational::zero(); self.m])
    }
}

/// A randomized allocation: per-item probabilities summing to at most 1.
/// Residual mass allocates nothing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lottery(pub Vec<Rational>);

impl Lottery {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn zero(m: usize) -> Self {
        Lottery(vec![Rational::zero(); m])
    }
}

/// Finite menu of priced lotteries. The zero lottery at price 0 is always
/// implicitly available.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LotteryMenu {
    pub options: Vec<(Lottery, Rational)>,
}

impl LotteryMenu {
    pub fn new(options: Vec<(Lottery, Rational)>) -> Self {
        LotteryMenu { options }
    }

    pub fn items(&self) -> usize {
        self.options.first().map_or(0, |(l, _)| l.len())
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }
}

/// Posted price per item; infinity withholds an item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemPricing(pub Vec<Price>);

impl ItemPricing {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn all_infinite(m: usize) -> Self {
        ItemPricing(vec![Price::Infinite; m])
    }

    pub fn from_rationals(prices: Vec<Rational>) -> Self {
        ItemPricing(prices.into_iter().map(Price::Finite).collect())
    }

    /// Items with a finite price, as a bitmask.
    pub fn support_mask(&self) -> u32 {
        let mut mask = 0u32;
        for (j, p) in self.0.iter().enumerate() {
            if p.is_finite() {
                mask |= 1 << j;
            }
        }
        mask
    }

    /// The pricing restricted to `mask`: prices kept inside, infinite outside.
    pub fn restrict(&self, mask: u32) -> ItemPricing {
        ItemPricing(
            self.0
                .iter()
                .enumerate()
                .map(|(j, p)| {
                    if mask & (1 << j) != 0 {
                        p.clone()
                    } else {
                        Price::Infinite
                    }
                })
                .collect(),
        )
    }
}

impl std::fmt::Display for ItemPricing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|p| p.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Finite mixture of deterministic item pricings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomItemPricing {
    pub atoms: Vec<(ItemPricing, Rational)>,
}

impl RandomItemPricing {
    pub fn deterministic(p: ItemPricing) -> Self {
        RandomItemPricing {
            atoms: vec![(p, Rational::one())],
        }
    }

    pub fn items(&self) -> usize {
        self.atoms.first().map_or(0, |(p, _)| p.len())
    }
}

/// Per-item sale probabilities (ex-ante constraints and targets).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationVector(pub Vec<Rational>);

impl AllocationVector {
    pub fn zero(m: usize) -> Self {
        AllocationVector(vec![Rational::zero(); m])
    }

    pub fn ones(m: usize) -> Self {
        AllocationVector(vec![Rational::one(); m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scale(&self, t: &Rational) -> AllocationVector {
        AllocationVector(self.0.iter().map(|x| x * t).collect())
    }

    pub fn add(&self, other: &AllocationVector) -> AllocationVector {
        AllocationVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    /// Componentwise `self <= other`.
    pub fn dominated_by(&self, other: &AllocationVector) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// Dot product against finite prices; items with infinite price must have
    /// zero allocation.
    pub fn dot_prices(&self, prices: &ItemPricing) -> Rational {
        let mut acc = Rational::zero();
        for (x, p) in self.0.iter().zip(&prices.0) {
            match p {
                Price::Finite(r) => acc += x * r,
                Price::Infinite => debug_assert!(x.is_zero()),
            }
        }
        acc
    }

    pub fn dot(&self, other: &[Rational]) -> Rational {
        self.0.iter().zip(other).map(|(a, b)| a * b).sum()
    }
}

/// Exact law of the random set of available items, as bitmask -> probability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AvailabilityDistribution {
    pub m: usize,
    pub atoms: BTreeMap<u32, Rational>,
}

impl AvailabilityDistribution {
    /// All items available with probability 1.
    pub fn full(m: usize) -> Self {
        let mut atoms = BTreeMap::new();
        atoms.insert(full_mask(m), Rational::one());
        AvailabilityDistribution { m, atoms }
    }

    pub fn is_full(&self) -> bool {
        self.atoms.len() == 1 && self.atoms.contains_key(&full_mask(self.m))
    }

    /// Probability that item j is available.
    pub fn item_marginal(&self, j: usize) -> Rational {
        self.atoms
            .iter()
            .filter(|(mask, _)| *mask & (1 << j) != 0)
            .map(|(_, p)| p.clone())
            .sum()
    }
}

pub fn full_mask(m: usize) -> u32 {
    assert!(m <= 32, "item count exceeds bitmask width");
    if m == 32 {
        u32::MAX
    } else {
        (1u32 << m) - 1
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum ModelError {
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("menus are evaluated under full availability only")]
    MenuWithAvailability,
}

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<(), ModelError> {
    if expected == got {
        Ok(())
    } else {
        Err(ModelError::DimensionMismatch {
            context,
            expected,
            got,
        })
    }
}

/// One violated invariant, with the location that triggered it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

/// Checks all instance invariants; returns every violation found.
pub fn validate_instance(inst: &Instance) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    if let Some(costs) = &inst.costs {
        if costs.len() != inst.m {
            out.push(Violation {
                location: "costs".into(),
                message: format!("costs length ≠ m ({} vs {})", costs.len(), inst.m),
            });
        }
        for (j, c) in costs.iter().enumerate() {
            if c.is_negative() {
                out.push(Violation {
                    location: format!("costs[{j}]"),
                    message: format!("cost < 0 ({})", format_rational(c)),
                });
            }
        }
    }
    for (i, buyer) in inst.buyers.iter().enumerate() {
        let mut mass = Rational::zero();
        for (t, (v, p)) in buyer.support.iter().enumerate() {
            if v.len() != inst.m {
                out.push(Violation {
                    location: format!("buyers[{i}].types[{t}].values"),
                    message: format!("valuation length ≠ m ({} vs {})", v.len(), inst.m),
                });
            }
            for (j, val) in v.0.iter().enumerate() {
                if val.is_negative() {
                    out.push(Violation {
                        location: format!("buyers[{i}].types[{t}].values[{j}]"),
                        message: format!("value < 0 ({})", format_rational(val)),
                    });
                }
            }
            if p.is_negative() {
                out.push(Violation {
                    location: format!("buyers[{i}].types[{t}].prob"),
                    message: format!("probability < 0 ({})", format_rational(p)),
                });
            }
            mass += p;
        }
        if !mass.is_one() {
            out.push(Violation {
                location: format!("buyers[{i}]"),
                message: format!("distribution mass ≠ 1 ({})", format_rational(&mass)),
            });
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Checks menu invariants against an expected item count.
pub fn validate_menu(menu: &LotteryMenu, m: usize) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    for (k, (lottery, price)) in menu.options.iter().enumerate() {
        if lottery.len() != m {
            out.push(Violation {
                location: format!("options[{k}].lottery"),
                message: format!("lottery length ≠ m ({} vs {})", lottery.len(), m),
            });
        }
        let mut mass = Rational::zero();
        for (j, q) in lottery.0.iter().enumerate() {
            if q.is_negative() || *q > Rational::one() {
                out.push(Violation {
                    location: format!("options[{k}].lottery[{j}]"),
                    message: format!("lottery entry outside [0,1] ({})", format_rational(q)),
                });
            }
            mass += q;
        }
        if mass > Rational::one() {
            out.push(Violation {
                location: format!("options[{k}].lottery"),
                message: format!("lottery mass > 1 ({})", format_rational(&mass)),
            });
        }
        if price.is_negative() {
            out.push(Violation {
                location: format!("options[{k}].price"),
                message: format!("price < 0 ({})", format_rational(price)),
            });
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}
