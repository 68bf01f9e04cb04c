//! Instance and menu generators, plus file serialization.
//!
//! Files are JSON with every rational carried as a "num/den" string, so that
//! round trips are exact.

use crate::model::*;
use crate::rational::{format_rational, parse_price, parse_rational, pow2, Price, Rational};
use crate::sequential::SequentialPricing;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// The linear-gap family: production costs (0, m, ..., m), geometric types,
/// and the two-item half/half menu priced at each type's value.
#[derive(Debug, Clone)]
pub struct GapInstance {
    pub instance: Instance,
    pub menu: LotteryMenu,
    /// Profit of the menu when each type buys the option written for it:
    /// the closed sum over types of prob * (price - cost), equal to (m-1)/2.
    pub analytic_buy_many_profit: Rational,
}

#[derive(Debug, thiserror::Error)]
pub enum InstancesError {
    #[error("gap family needs at least two items, got {0}")]
    GapTooSmall(usize),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("json error in {path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("field {field}: {source}")]
    Field {
        field: String,
        source: crate::rational::ParseRationalError,
    },
    #[error("invariant violations: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

/// Builds the gap instance with prices lowered by `eps` (zero for the exact
/// tie version; seller-favoring ties make utility-zero types buy).
pub fn gap_instance_eps(m: usize, eps: &Rational) -> Result<GapInstance, InstancesError> {
    if m < 2 {
        return Err(InstancesError::GapTooSmall(m));
    }
    let m_rat = Rational::from_integer((m as i64).into());
    let half = &m_rat / Rational::from_integer(2.into());

    let mut support = Vec::with_capacity(m);
    let mut options = Vec::with_capacity(m - 1);
    let mut residual = Rational::one();
    let mut analytic = Rational::zero();
    for i in 2..=m {
        let mut values = vec![Rational::zero(); m];
        values[0] = pow2(i as i32);
        values[i - 1] = m_rat.clone();
        let prob = pow2(-(i as i32));
        residual -= &prob;
        support.push((Valuation(values), prob.clone()));

        let mut lottery = vec![Rational::zero(); m];
        lottery[0] = crate::rational::frac(1, 2);
        lottery[i - 1] = crate::rational::frac(1, 2);
        let price = pow2(i as i32 - 1) + &half - eps;
        // Cost of the paired option is m/2, so its profit is 2^(i-1) - eps.
        analytic += &prob * (&price - &half);
        options.push((Lottery(lottery), price));
    }
    support.push((Valuation(vec![Rational::zero(); m]), residual));

    let mut costs = vec![m_rat; m];
    costs[0] = Rational::zero();
    let instance = Instance {
        m,
        buyers: vec![TypeDistribution::new(support)],
        costs: Some(costs),
    };
    debug_assert!(validate_instance(&instance).is_ok());
    Ok(GapInstance {
        instance,
        menu: LotteryMenu::new(options),
        analytic_buy_many_profit: analytic,
    })
}

pub fn gap_instance(m: usize) -> Result<GapInstance, InstancesError> {
    gap_instance_eps(m, &Rational::zero())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationStyle {
    /// Item values drawn independently.
    Independent,
    /// Item values sorted ascending within each type.
    Comonotone,
    /// Alternating items move against each other.
    Antithetic,
}

impl std::str::FromStr for CorrelationStyle {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "independent" => Ok(CorrelationStyle::Independent),
            "comonotone" => Ok(CorrelationStyle::Comonotone),
            "antithetic" => Ok(CorrelationStyle::Antithetic),
            other => Err(format!("unknown correlation style {other:?}")),
        }
    }
}

/// Deterministic random instance on a half-integer value grid.
pub fn random_instance(
    n: usize,
    m: usize,
    support: usize,
    value_scale: i64,
    style: CorrelationStyle,
    seed: u64,
) -> Instance {
    assert!(n >= 1 && m >= 1 && support >= 1 && value_scale >= 1);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let grid = 2 * value_scale;
    let mut buyers = Vec::with_capacity(n);
    for _ in 0..n {
        let mut types = Vec::with_capacity(support);
        let weights: Vec<i64> = (0..support).map(|_| rng.gen_range(1..=8)).collect();
        let total: i64 = weights.iter().sum();
        for w in weights {
            let mut raw: Vec<i64> = match style {
                CorrelationStyle::Independent => {
                    (0..m).map(|_| rng.gen_range(0..=grid)).collect()
                }
                CorrelationStyle::Comonotone => {
                    let mut v: Vec<i64> = (0..m).map(|_| rng.gen_range(0..=grid)).collect();
                    v.sort();
                    v
                }
                CorrelationStyle::Antithetic => {
                    let u = rng.gen_range(0..=grid);
                    (0..m)
                        .map(|j| if j % 2 == 0 { u } else { grid - u })
                        .collect()
                }
            };
            let values = Valuation(
                raw.drain(..)
                    .map(|k| Rational::new(k.into(), 2.into()))
                    .collect(),
            );
            types.push((values, Rational::new(w.into(), total.into())));
        }
        buyers.push(TypeDistribution::new(types));
    }
    let inst = Instance {
        m,
        buyers,
        costs: None,
    };
    debug_assert!(validate_instance(&inst).is_ok());
    inst
}

/// Deterministic random cost vector on the same grid.
pub fn random_costs(m: usize, value_scale: i64, seed: u64) -> Vec<Rational> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    (0..m)
        .map(|_| Rational::new(rng.gen_range(0..=value_scale).into(), 2.into()))
        .collect()
}

/// Deterministic random menu on the grid; pair with `buy_many_closure` to
/// obtain a buy-many menu.
pub fn random_menu(m: usize, options: usize, value_scale: i64, seed: u64) -> LotteryMenu {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5851_f42d_4c95_7f2d);
    let mut out = Vec::with_capacity(options);
    for _ in 0..options {
        // Sub-stochastic lottery: denominators of 4, total mass at most 1.
        let mut budget = 4i64;
        let mut lottery = vec![Rational::zero(); m];
        let mut order: Vec<usize> = (0..m).collect();
        for j in 0..m {
            let k = rng.gen_range(0..m);
            order.swap(j, k);
        }
        for &j in &order {
            if budget == 0 {
                break;
            }
            let take = rng.gen_range(0..=budget);
            lottery[j] = Rational::new(take.into(), 4.into());
            budget -= take;
        }
        let price = Rational::new(rng.gen_range(0..=2 * value_scale).into(), 2.into());
        out.push((Lottery(lottery), price));
    }
    LotteryMenu::new(out)
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TypeFile {
    values: Vec<String>,
    prob: String,
}

#[derive(Serialize, Deserialize)]
struct BuyerFile {
    types: Vec<TypeFile>,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    m: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    costs: Option<Vec<String>>,
    buyers: Vec<BuyerFile>,
}

#[derive(Serialize, Deserialize)]
struct OptionFile {
    lottery: Vec<String>,
    price: String,
}

#[derive(Serialize, Deserialize)]
struct MenuFile {
    options: Vec<OptionFile>,
}

#[derive(Serialize, Deserialize)]
struct AtomFile {
    prices: Vec<String>,
    weight: String,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PricingFile {
    Deterministic { prices: Vec<String> },
    Random { atoms: Vec<AtomFile> },
}

#[derive(Serialize, Deserialize)]
struct SequentialFile {
    order: Vec<usize>,
    pricings: Vec<PricingFile>,
}

fn io_err(path: &Path, source: std::io::Error) -> InstancesError {
    InstancesError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_field(field: String, s: &str) -> Result<Rational, InstancesError> {
    parse_rational(s).map_err(|source| InstancesError::Field { field, source })
}

fn parse_price_field(field: String, s: &str) -> Result<Price, InstancesError> {
    parse_price(s).map_err(|source| InstancesError::Field { field, source })
}

pub fn write_instance(path: &Path, inst: &Instance) -> Result<(), InstancesError> {
    let file = InstanceFile {
        m: inst.m,
        costs: inst
            .costs
            .as_ref()
            .map(|cs| cs.iter().map(format_rational).collect()),
        buyers: inst
            .buyers
            .iter()
            .map(|b| BuyerFile {
                types: b
                    .support
                    .iter()
                    .map(|(v, p)| TypeFile {
                        values: v.0.iter().map(format_rational).collect(),
                        prob: format_rational(p),
                    })
                    .collect(),
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&file).expect("instance serialization");
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Reads and parses an instance without checking model invariants.
pub fn read_instance_raw(path: &Path) -> Result<Instance, InstancesError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let file: InstanceFile = serde_json::from_str(&text).map_err(|source| InstancesError::Json {
        path: path.display().to_string(),
        source,
    })?;
    let costs = match file.costs {
        None => None,
        Some(cs) => Some(
            cs.iter()
                .enumerate()
                .map(|(j, s)| parse_field(format!("costs[{j}]"), s))
                .collect::<Result<Vec<_>, _>>()?,
        ),
    };
    let mut buyers = Vec::with_capacity(file.buyers.len());
    for (i, b) in file.buyers.iter().enumerate() {
        let mut support = Vec::with_capacity(b.types.len());
        for (t, ty) in b.types.iter().enumerate() {
            let values = ty
                .values
                .iter()
                .enumerate()
                .map(|(j, s)| parse_field(format!("buyers[{i}].types[{t}].values[{j}]"), s))
                .collect::<Result<Vec<_>, _>>()?;
            let prob = parse_field(format!("buyers[{i}].types[{t}].prob"), &ty.prob)?;
            support.push((Valuation(values), prob));
        }
        buyers.push(TypeDistribution::new(support));
    }
    Ok(Instance {
        m: file.m,
        buyers,
        costs,
    })
}

pub fn read_instance(path: &Path) -> Result<Instance, InstancesError> {
    let inst = read_instance_raw(path)?;
    validate_instance(&inst).map_err(InstancesError::Invalid)?;
    Ok(inst)
}

pub fn write_menu(path: &Path, menu: &LotteryMenu) -> Result<(), InstancesError> {
    let file = MenuFile {
        options: menu
            .options
            .iter()
            .map(|(l, p)| OptionFile {
                lottery: l.0.iter().map(format_rational).collect(),
                price: format_rational(p),
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&file).expect("menu serialization");
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_menu(path: &Path, m: usize) -> Result<LotteryMenu, InstancesError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let file: MenuFile = serde_json::from_str(&text).map_err(|source| InstancesError::Json {
        path: path.display().to_string(),
        source,
    })?;
    let mut options = Vec::with_capacity(file.options.len());
    for (k, opt) in file.options.iter().enumerate() {
        let lottery = opt
            .lottery
            .iter()
            .enumerate()
            .map(|(j, s)| parse_field(format!("options[{k}].lottery[{j}]"), s))
            .collect::<Result<Vec<_>, _>>()?;
        let price = parse_field(format!("options[{k}].price"), &opt.price)?;
        options.push((Lottery(lottery), price));
    }
    let menu = LotteryMenu::new(options);
    validate_menu(&menu, m).map_err(InstancesError::Invalid)?;
    Ok(menu)
}

/// Reads a menu, inferring the item count from its first option.
pub fn read_menu_infer(path: &Path) -> Result<LotteryMenu, InstancesError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let file: MenuFile = serde_json::from_str(&text).map_err(|source| InstancesError::Json {
        path: path.display().to_string(),
        source,
    })?;
    let m = file.options.first().map_or(0, |o| o.lottery.len());
    drop(file);
    read_menu(path, m)
}

fn pricing_to_file(p: &RandomItemPricing) -> PricingFile {
    if p.atoms.len() == 1 && p.atoms[0].1.is_one() {
        PricingFile::Deterministic {
            prices: p.atoms[0].0 .0.iter().map(|x| x.to_string()).collect(),
        }
    } else {
        PricingFile::Random {
            atoms: p
                .atoms
                .iter()
                .map(|(prices, w)| AtomFile {
                    prices: prices.0.iter().map(|x| x.to_string()).collect(),
                    weight: format_rational(w),
                })
                .collect(),
        }
    }
}

fn pricing_from_file(idx: usize, f: &PricingFile) -> Result<RandomItemPricing, InstancesError> {
    match f {
        PricingFile::Deterministic { prices } => {
            let p = prices
                .iter()
                .enumerate()
                .map(|(j, s)| parse_price_field(format!("pricings[{idx}].prices[{j}]"), s))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(RandomItemPricing::deterministic(ItemPricing(p)))
        }
        PricingFile::Random { atoms } => {
            let mut out = Vec::with_capacity(atoms.len());
            for (a, atom) in atoms.iter().enumerate() {
                let p = atom
                    .prices
                    .iter()
                    .enumerate()
                    .map(|(j, s)| {
                        parse_price_field(format!("pricings[{idx}].atoms[{a}].prices[{j}]"), s)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let w = parse_field(format!("pricings[{idx}].atoms[{a}].weight"), &atom.weight)?;
                out.push((ItemPricing(p), w));
            }
            Ok(RandomItemPricing { atoms: out })
        }
    }
}

pub fn write_sequential(path: &Path, seq: &SequentialPricing) -> Result<(), InstancesError> {
    let file = SequentialFile {
        order: seq.order.clone(),
        pricings: seq.pricings.iter().map(pricing_to_file).collect(),
    };
    let text = serde_json::to_string_pretty(&file).expect("sequential serialization");
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_sequential(path: &Path) -> Result<SequentialPricing, InstancesError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let file: SequentialFile =
        serde_json::from_str(&text).map_err(|source| InstancesError::Json {
            path: path.display().to_string(),
            source,
        })?;
    let pricings = file
        .pricings
        .iter()
        .enumerate()
        .map(|(i, p)| pricing_from_file(i, p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut violations = Vec::new();
    for (i, p) in pricings.iter().enumerate() {
        let mut mass = Rational::zero();
        for (a, (_, w)) in p.atoms.iter().enumerate() {
            if w < &Rational::zero() {
                violations.push(Violation {
                    location: format!("pricings[{i}].atoms[{a}].weight"),
                    message: format!("weight < 0 ({})", format_rational(w)),
                });
            }
            mass += w;
        }
        if !mass.is_one() {
            violations.push(Violation {
                location: format!("pricings[{i}]"),
                message: format!("atom mass ≠ 1 ({})", format_rational(&mass)),
            });
        }
    }
    if !violations.is_empty() {
        return Err(InstancesError::Invalid(violations));
    }
    Ok(SequentialPricing {
        order: file.order,
        pricings,
    })
}
