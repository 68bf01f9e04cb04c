//! Sequential item pricing: exact availability dynamics, construction of
//! per-buyer pricings that earn exactly half of the ex-ante optimum, and
//! conditional-expectation derandomization.

use crate::model::*;
use crate::opt::{convex_decompose, exante_global, ExAnteSolution, Guards, OptError};
use crate::rational::{frac, rational_to_f64, Rational};
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use std::collections::BTreeMap;

/// A serving order over buyers and one (possibly random) pricing per buyer.
/// `pricings[i]` is the pricing posted to buyer `i`; `order[k]` is the buyer
/// served at step `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequentialPricing {
    pub order: Vec<usize>,
    pub pricings: Vec<RandomItemPricing>,
}

impl SequentialPricing {
    pub fn is_deterministic(&self) -> bool {
        self.pricings.iter().all(|p| p.atoms.len() == 1)
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum SeqError {
    #[error("guard exceeded: availability DP over 2^{m} subsets > {limit}")]
    Guard { m: usize, limit: u64 },
    #[error("order is not a permutation of the buyers")]
    BadOrder,
    #[error(transparent)]
    Opt(#[from] OptError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("availability bound violated: item {item} reaches buyer {buyer} with probability {marginal} < 1/2")]
    AvailabilityBound {
        buyer: usize,
        item: usize,
        marginal: String,
    },
    #[error("certificate failed: {0}")]
    Certificate(String),
}

fn check_order(inst: &Instance, order: &[usize]) -> Result<(), SeqError> {
    let n = inst.n();
    if order.len() != n {
        return Err(SeqError::BadOrder);
    }
    let mut seen = vec![false; n];
    for &b in order {
        if b >= n || seen[b] {
            return Err(SeqError::BadOrder);
        }
        seen[b] = true;
    }
    Ok(())
}

fn check_guard(m: usize, guards: &Guards) -> Result<(), SeqError> {
    if m >= 63 || (1u64 << m) > guards.subset_limit {
        return Err(SeqError::Guard {
            m,
            limit: guards.subset_limit,
        });
    }
    Ok(())
}

/// One forward step: buyer `buyer` faces `pricing`; sold items leave the
/// availability state.
fn propagate(
    state: &BTreeMap<u32, Rational>,
    d: &TypeDistribution,
    pricing: &RandomItemPricing,
) -> Result<BTreeMap<u32, Rational>, SeqError> {
    let mut next: BTreeMap<u32, Rational> = BTreeMap::new();
    for (mask, pm) in state {
        for (p, w) in &pricing.atoms {
            for (v, pv) in &d.support {
                let choice = best_response_items(v, p, *mask)?;
                let new_mask = match choice.index {
                    Some(j) => mask & !(1 << j),
                    None => *mask,
                };
                let joint = pm * w * pv;
                *next.entry(new_mask).or_insert_with(Rational::zero) += joint;
            }
        }
    }
    Ok(next)
}

/// Exact distribution of the available set seen by the buyer at position
/// `upto` of the serving order (position 0 sees everything).
pub fn availability_dp(
    inst: &Instance,
    seq: &SequentialPricing,
    upto: usize,
    guards: &Guards,
) -> Result<AvailabilityDistribution, SeqError> {
    check_order(inst, &seq.order)?;
    check_guard(inst.m, guards)?;
    let mut state = AvailabilityDistribution::full(inst.m).atoms;
    for k in 0..upto.min(seq.order.len()) {
        let b = seq.order[k];
        state = propagate(&state, &inst.buyers[b], &seq.pricings[b])?;
    }
    Ok(AvailabilityDistribution {
        m: inst.m,
        atoms: state,
    })
}

/// Exact sequential evaluation.
#[derive(Debug, Clone)]
pub struct ExactReport {
    pub total: Rational,
    /// Expected revenue per position in the serving order.
    pub per_position: Vec<Rational>,
    /// Final sale probability per item.
    pub per_item: Vec<Rational>,
    /// Availability marginal of each item when each position arrives.
    pub availability_marginals: Vec<Vec<Rational>>,
}

pub fn evaluate_sequential(
    inst: &Instance,
    seq: &SequentialPricing,
    guards: &Guards,
) -> Result<ExactReport, SeqError> {
    check_order(inst, &seq.order)?;
    check_guard(inst.m, guards)?;
    let m = inst.m;
    let mut state = AvailabilityDistribution::full(m).atoms;
    let mut per_position = Vec::with_capacity(seq.order.len());
    let mut per_item = vec![Rational::zero(); m];
    let mut availability_marginals = Vec::with_capacity(seq.order.len());
    let mut total = Rational::zero();
    for &b in &seq.order {
        let marginals: Vec<Rational> = (0..m)
            .map(|j| {
                state
                    .iter()
                    .filter(|(mask, _)| *mask & (1 << j) != 0)
                    .map(|(_, p)| p.clone())
                    .sum()
            })
            .collect();
        availability_marginals.push(marginals);
        let d = &inst.buyers[b];
        let pricing = &seq.pricings[b];
        let mut rev = Rational::zero();
        for (mask, pm) in &state {
            for (p, w) in &pricing.atoms {
                for (v, pv) in &d.support {
                    let choice = best_response_items(v, p, *mask)?;
                    if let Some(j) = choice.index {
                        let joint = pm * w * pv;
                        rev += &joint * &choice.payment;
                        per_item[j] += joint;
                    }
                }
            }
        }
        total += &rev;
        per_position.push(rev);
        state = propagate(&state, d, pricing)?;
    }
    // Feasibility: an item is sold at most once across all realizations.
    for (j, prob) in per_item.iter().enumerate() {
        if *prob > Rational::one() {
            return Err(SeqError::Certificate(format!(
                "item {j} sold with probability above one"
            )));
        }
    }
    Ok(ExactReport {
        total,
        per_position,
        per_item,
        availability_marginals,
    })
}

/// Monte-Carlo sequential evaluation with a 99% confidence half-width.
#[derive(Debug, Clone)]
pub struct McReport {
    pub mean: f64,
    pub half_width_99: f64,
    pub trials: u64,
    pub seed: u64,
}

pub fn evaluate_sequential_mc(
    inst: &Instance,
    seq: &SequentialPricing,
    trials: u64,
    seed: u64,
) -> Result<McReport, SeqError> {
    check_order(inst, &seq.order)?;
    assert!(trials >= 2, "need at least two trials");
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0f64;
    let mut sumsq = 0.0f64;
    for _ in 0..trials {
        let mut mask = full_mask(inst.m);
        let mut revenue = 0.0f64;
        for &b in &seq.order {
            let d = &inst.buyers[b];
            let pricing = &seq.pricings[b];
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut atom = &pricing.atoms[pricing.atoms.len() - 1].0;
            for (p, w) in &pricing.atoms {
                acc += rational_to_f64(w);
                if u < acc {
                    atom = p;
                    break;
                }
            }
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut ty = &d.support[d.support.len() - 1].0;
            for (v, pv) in &d.support {
                acc += rational_to_f64(pv);
                if u < acc {
                    ty = v;
                    break;
                }
            }
            let choice = best_response_items(ty, atom, mask)?;
            if let Some(j) = choice.index {
                revenue += rational_to_f64(&choice.payment);
                mask &= !(1 << j);
            }
        }
        sum += revenue;
        sumsq += revenue * revenue;
    }
    let n = trials as f64;
    let mean = sum / n;
    let var = (sumsq - sum * sum / n) / (n - 1.0);
    let half_width_99 = 2.5758293035489004 * (var.max(0.0) / n).sqrt();
    Ok(McReport {
        mean,
        half_width_99,
        trials,
        seed,
    })
}

/// Per-buyer certificate of the half-of-ex-ante construction.
#[derive(Debug, Clone)]
pub struct BuyerCertificate {
    pub buyer: usize,
    /// Exact allocation of the built pricing under its availability: x_i / 2.
    pub allocation: AllocationVector,
    /// Exact expected revenue under its availability: half the buyer's
    /// ex-ante revenue.
    pub revenue: Rational,
    /// Availability marginal per item on arrival (each at least 1/2).
    pub availability_marginals: Vec<Rational>,
}

/// Builds a randomized sequential pricing from an ex-ante solution. Each
/// buyer's pricing is decomposed against the exact availability distribution
/// so that the expected allocation is exactly half the buyer's ex-ante
/// allocation and the expected revenue exactly half the ex-ante revenue.
pub fn build_sequential(
    inst: &Instance,
    ea: &ExAnteSolution,
    order: &[usize],
    guards: &Guards,
) -> Result<(SequentialPricing, Vec<BuyerCertificate>), SeqError> {
    check_order(inst, order)?;
    check_guard(inst.m, guards)?;
    let m = inst.m;
    let half = frac(1, 2);
    let full = AvailabilityDistribution::full(m);
    let mut pricings: Vec<RandomItemPricing> = vec![
        RandomItemPricing {
            atoms: vec![(ItemPricing::all_infinite(m), Rational::one())]
        };
        inst.n()
    ];
    let mut certificates = Vec::with_capacity(inst.n());
    let mut state = AvailabilityDistribution::full(m).atoms;

    for &b in order {
        let d = &inst.buyers[b];
        let avail = AvailabilityDistribution {
            m,
            atoms: state.clone(),
        };
        let marginals: Vec<Rational> = (0..m).map(|j| avail.item_marginal(j)).collect();
        for (j, marg) in marginals.iter().enumerate() {
            if *marg < half {
                return Err(SeqError::AvailabilityBound {
                    buyer: b,
                    item: j,
                    marginal: crate::rational::format_rational(marg),
                });
            }
        }

        let mut atoms: Vec<(ItemPricing, Rational)> = Vec::new();
        for (p_a, w_a) in &ea.buyers[b].pricing.atoms {
            let x_full =
                allocation_vector(d, &RandomItemPricing::deterministic(p_a.clone()), &full)?;
            let x_avail =
                allocation_vector(d, &RandomItemPricing::deterministic(p_a.clone()), &avail)?;
            let target = x_full.scale(&half);
            if !target.dominated_by(&x_avail) {
                return Err(SeqError::Certificate(format!(
                    "buyer {b}: availability cut the achievable allocation below half"
                )));
            }
            let dec = convex_decompose(p_a, d, &avail, &target, guards)?;
            for (atom, alpha) in dec.pricing.atoms {
                atoms.push((atom, w_a * &alpha));
            }
        }
        let q = RandomItemPricing { atoms };

        // Exact certificates, evaluated by the DP itself.
        let achieved_alloc = allocation_vector(d, &q, &avail)?;
        let expect_alloc = ea.buyers[b].allocation.scale(&half);
        if achieved_alloc != expect_alloc {
            return Err(SeqError::Certificate(format!(
                "buyer {b}: allocation is not exactly half the ex-ante allocation"
            )));
        }
        let achieved_rev = expected_revenue(d, &Pricing::Items(q.clone()), &avail)?;
        let expect_rev = &ea.buyers[b].revenue * &half;
        if achieved_rev != expect_rev {
            return Err(SeqError::Certificate(format!(
                "buyer {b}: revenue is not exactly half the ex-ante revenue"
            )));
        }

        certificates.push(BuyerCertificate {
            buyer: b,
            allocation: achieved_alloc,
            revenue: achieved_rev,
            availability_marginals: marginals,
        });
        pricings[b] = q;
        state = propagate(&state, d, &pricings[b])?;
    }

    Ok((
        SequentialPricing {
            order: order.to_vec(),
            pricings,
        },
        certificates,
    ))
}

/// Buyer-by-buyer conditional-expectation derandomization: fixes for each
/// buyer the atom maximizing the exact expected total revenue of the fixed
/// prefix plus random suffix. The result never loses revenue.
pub fn derandomize(
    inst: &Instance,
    seq: &SequentialPricing,
    guards: &Guards,
) -> Result<SequentialPricing, SeqError> {
    check_order(inst, &seq.order)?;
    let baseline = evaluate_sequential(inst, seq, guards)?.total;
    let mut current = seq.clone();
    for &b in &seq.order.clone() {
        let atoms = current.pricings[b].atoms.clone();
        if atoms.len() == 1 {
            continue;
        }
        let mut best: Option<(Rational, ItemPricing)> = None;
        for (p, _) in &atoms {
            let mut candidate = current.clone();
            candidate.pricings[b] = RandomItemPricing::deterministic(p.clone());
            let total = evaluate_sequential(inst, &candidate, guards)?.total;
            match &best {
                Some((t, _)) if *t >= total => {}
                _ => best = Some((total, p.clone())),
            }
        }
        let (_, p) = best.expect("pricing has at least one atom");
        current.pricings[b] = RandomItemPricing::deterministic(p);
    }
    let final_total = evaluate_sequential(inst, &current, guards)?.total;
    if final_total < baseline {
        return Err(SeqError::Certificate(
            "derandomized revenue fell below the randomized expectation".into(),
        ));
    }
    Ok(current)
}

/// End-to-end verification of the half-of-ex-ante guarantee.
#[derive(Debug, Clone)]
pub struct VerifyHalf {
    pub exante: ExAnteSolution,
    pub randomized: SequentialPricing,
    pub certificates: Vec<BuyerCertificate>,
    pub randomized_total: Rational,
    pub deterministic: SequentialPricing,
    pub deterministic_total: Rational,
    /// deterministic_total / exante_total; 1 when the ex-ante optimum is 0.
    pub ratio: Rational,
}

pub fn verify_half(
    inst: &Instance,
    order: &[usize],
    guards: &Guards,
) -> Result<VerifyHalf, SeqError> {
    let ea = exante_global(inst, guards)?;
    let (seq, certificates) = build_sequential(inst, &ea, order, guards)?;
    let randomized_total = evaluate_sequential(inst, &seq, guards)?.total;
    let det = derandomize(inst, &seq, guards)?;
    let deterministic_total = evaluate_sequential(inst, &det, guards)?.total;
    let ratio = if ea.total_revenue.is_zero() {
        Rational::one()
    } else {
        &deterministic_total / &ea.total_revenue
    };
    if ratio < frac(1, 2) {
        return Err(SeqError::Certificate(format!(
            "ratio {} fell below one half",
            crate::rational::format_rational(&ratio)
        )));
    }
    Ok(VerifyHalf {
        exante: ea,
        randomized: seq,
        certificates,
        randomized_total,
        deterministic: det,
        deterministic_total,
        ratio,
    })
}
