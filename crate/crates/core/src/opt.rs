//! Exact optimization core: item-pricing oracles, ex-ante constrained
//! revenue, subgradient extraction and convex decomposition.
//!
//! The item-pricing oracle enumerates choice mappings (each type is assigned
//! the item it buys, or none). For a fixed mapping the optimal prices solve a
//! difference-constraint program whose objective weights are non-negative, so
//! the pointwise-maximal feasible point is optimal; it is computed by an
//! exact shortest-path closure over m+1 nodes instead of a simplex call.
//! Every returned pricing is re-evaluated under the actual tie-breaking
//! semantics, and the stored revenue/allocation are the re-evaluated ones.

use crate::lp::{lp_solve, LinearProgram, LpError, LpOutcome, Relation};
use crate::model::*;
use crate::rational::{Price, Rational};
use num_traits::{One, Signed, Zero};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy)]
pub struct Guards {
    /// Cap on the product of per-type candidate counts in the mapping
    /// enumeration (per buyer).
    pub enum_limit: u128,
    /// Cap on 2^|support| subsets in decompositions and availability DPs.
    pub subset_limit: u64,
}

impl Default for Guards {
    fn default() -> Self {
        Guards {
            enum_limit: 2_000_000,
            subset_limit: 4096,
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum OptError {
    #[error("guard exceeded: {what} = {size} > {limit}")]
    Guard {
        what: &'static str,
        size: u128,
        limit: u128,
    },
    #[error("lp error: {0}")]
    Lp(#[from] LpError),
    #[error("model error: {0}")]
    Model(#[from] ModelError),
    #[error("infeasible: {0}")]
    Infeasible(String),
}

/// One vertex of the item-pricing search: the pointwise-maximal prices of a
/// choice mapping, re-evaluated under true best-response semantics.
#[derive(Debug, Clone)]
pub struct VertexPricing {
    pub pricing: ItemPricing,
    /// Per-type purchased item under the actual tie-breaking.
    pub mapping: Vec<Option<usize>>,
    /// Re-evaluated expected payment.
    pub revenue: Rational,
    /// Re-evaluated expected allocation.
    pub allocation: AllocationVector,
    /// Re-evaluated expected profit, when costs were given.
    pub profit: Option<Rational>,
    /// Objective of the defining mapping program (mapped payments).
    pub lp_value: Rational,
}

impl VertexPricing {
    /// Revenue, or profit when the enumeration ran with costs.
    pub fn objective(&self) -> &Rational {
        self.profit.as_ref().unwrap_or(&self.revenue)
    }
}

/// All-pairs shortest-path closure of a difference-constraint system over
/// nodes {ground} ∪ items. Constraint p_b - p_a <= w is the edge a -> b.
#[derive(Clone)]
struct DiffSystem {
    n: usize,
    dist: Vec<Option<Rational>>, // row-major n x n, None = infinity
}

impl DiffSystem {
    fn new(m: usize) -> Self {
        let n = m + 1;
        let mut dist = vec![None; n * n];
        for a in 0..n {
            dist[a * n + a] = Some(Rational::zero());
        }
        let mut sys = DiffSystem { n, dist };
        // Non-negative prices: p_j >= 0, i.e. edge j -> ground with weight 0.
        for j in 0..m {
            sys.set(j + 1, 0, Some(Rational::zero()));
        }
        sys
    }

    fn get(&self, a: usize, b: usize) -> &Option<Rational> {
        &self.dist[a * self.n + b]
    }

    fn set(&mut self, a: usize, b: usize, v: Option<Rational>) {
        self.dist[a * self.n + b] = v;
    }

    /// Adds edge u -> v with weight w; returns false on a negative cycle
    /// (the constraint system became infeasible).
    fn add_edge(&mut self, u: usize, v: usize, w: Rational) -> bool {
        if let Some(back) = self.get(v, u) {
            if &w + back < Rational::zero() {
                return false;
            }
        }
        // Worth updating only if it tightens u -> v.
        if let Some(cur) = self.get(u, v) {
            if *cur <= w {
                return true;
            }
        }
        let n = self.n;
        for a in 0..n {
            let Some(au) = self.get(a, u).clone() else {
                continue;
            };
            for b in 0..n {
                let Some(vb) = self.get(v, b) else {
                    continue;
                };
                let cand = &au + &w + vb;
                let cur = self.get(a, b);
                if cur.is_none() || *cur.as_ref().unwrap() > cand {
                    self.set(a, b, Some(cand));
                }
            }
        }
        true
    }

    /// Pointwise-maximal feasible price of item j.
    fn price(&self, j: usize) -> Price {
        match self.get(0, j + 1) {
            Some(r) => Price::Finite(r.clone()),
            None => Price::Infinite,
        }
    }
}

/// Adds the constraints of assigning `choice` to type `v`; returns false if
/// the system became infeasible. With a positive `margin`, preferences are
/// strict by that margin and no-purchase types are priced strictly out, so
/// the re-evaluated behavior reproduces the mapping exactly.
fn assign_type(
    sys: &mut DiffSystem,
    v: &Valuation,
    choice: Option<usize>,
    margin: &Rational,
) -> bool {
    match choice {
        Some(j) => {
            // Utility >= 0: p_j <= v_j (a zero-utility buyer buys).
            if !sys.add_edge(0, j + 1, v.0[j].clone()) {
                return false;
            }
            // Preference over every other item: p_j - p_k <= v_j - v_k - margin.
            for k in 0..v.len() {
                if k != j && !sys.add_edge(k + 1, j + 1, &v.0[j] - &v.0[k] - margin) {
                    return false;
                }
            }
            true
        }
        None => {
            // No purchase: p_k >= v_k + margin everywhere.
            for k in 0..v.len() {
                let bound = &v.0[k] + margin;
                if bound.is_positive() && !sys.add_edge(k + 1, 0, -bound) {
                    return false;
                }
            }
            true
        }
    }
}

/// A strictness margin small enough not to disturb which constraint paths
/// are binding (all path weights are multiples of 1/D for D the lcm of the
/// value denominators, paths have at most m+1 edges, so any margin below
/// 1/(D(m+2)) preserves the binding structure), then shrunk much further so
/// the value given up to strictness is negligible against the value grid.
fn strict_margin(d: &TypeDistribution, m: usize) -> Rational {
    use num_integer::Integer;
    let mut den = num_bigint::BigInt::from(1);
    for (v, _) in &d.support {
        for x in &v.0 {
            den = den.lcm(x.denom());
        }
    }
    let fine = num_bigint::BigInt::from(1i64 << 30);
    Rational::new(1.into(), den * num_bigint::BigInt::from(m as i64 + 2) * fine)
}

fn reevaluate(
    d: &TypeDistribution,
    pricing: ItemPricing,
    costs: Option<&[Rational]>,
    lp_value: Rational,
) -> Result<VertexPricing, ModelError> {
    let m = pricing.len();
    let mask = full_mask(m);
    let mut mapping = Vec::with_capacity(d.support.len());
    let mut revenue = Rational::zero();
    let mut allocation = AllocationVector::zero(m);
    let mut profit = costs.map(|_| Rational::zero());
    for (v, pv) in &d.support {
        let choice = best_response_items(v, &pricing, mask)?;
        if let Some(j) = choice.index {
            revenue += pv * &choice.payment;
            allocation.0[j] += pv;
            if let (Some(acc), Some(c)) = (&mut profit, costs) {
                *acc += pv * (&choice.payment - &c[j]);
            }
        }
        mapping.push(choice.index);
    }
    Ok(VertexPricing {
        pricing,
        mapping,
        revenue,
        allocation,
        profit,
        lp_value,
    })
}

type DedupKey = (Vec<Rational>, Rational, Option<Rational>);

struct Enumerator<'a> {
    d: &'a TypeDistribution,
    candidates: Vec<Vec<Option<usize>>>,
    costs: Option<&'a [Rational]>,
    cost_slice: &'a [Rational],
    margin: Rational,
    assignment: Vec<Option<usize>>,
    seen: HashMap<DedupKey, ()>,
    out: Vec<VertexPricing>,
}

impl Enumerator<'_> {
    fn mapped_value(&self, pricing: &ItemPricing) -> Rational {
        let mut value = Rational::zero();
        for (t, choice) in self.assignment.iter().enumerate() {
            if let Some(j) = choice {
                let p = pricing.0[*j].unwrap_finite();
                value += &self.d.support[t].1 * (p - &self.cost_slice[*j]);
            }
        }
        value
    }

    fn push(&mut self, vertex: VertexPricing) {
        let key = (
            vertex.allocation.0.clone(),
            vertex.revenue.clone(),
            vertex.profit.clone(),
        );
        if self.seen.insert(key, ()).is_none() {
            self.out.push(vertex);
        }
    }

    /// Re-solves the current assignment with strict preference margins. The
    /// resulting prices make every type reproduce its mapped choice exactly,
    /// recovering (up to the margin) mapping value that tie-breaking toward
    /// higher payments would otherwise lose.
    fn strict_variant(&mut self) -> Result<Option<VertexPricing>, OptError> {
        let m = self.d.items();
        let mut sys = DiffSystem::new(m);
        for (t, choice) in self.assignment.clone().iter().enumerate() {
            if !assign_type(&mut sys, &self.d.support[t].0, *choice, &self.margin.clone()) {
                return Ok(None);
            }
        }
        let pricing = ItemPricing((0..m).map(|j| sys.price(j)).collect());
        let lp_value = self.mapped_value(&pricing);
        let vertex = reevaluate(self.d, pricing, self.costs, lp_value)?;
        // Strict margins force the mapped behavior, so the re-evaluation
        // reproduces the mapped value exactly.
        debug_assert_eq!(*vertex.objective(), vertex.lp_value);
        Ok(Some(vertex))
    }

    fn dfs(&mut self, level: usize, sys: &DiffSystem) -> Result<(), OptError> {
        if level == self.d.support.len() {
            let m = self.d.items();
            let pricing = ItemPricing((0..m).map(|j| sys.price(j)).collect());
            let lp_value = self.mapped_value(&pricing);
            let vertex = reevaluate(self.d, pricing, self.costs, lp_value)?;
            // Ties toward higher payments can route types away from the
            // mapping and lose profit; a strictly-implemented variant then
            // attains the mapping value up to the margin.
            if *vertex.objective() < vertex.lp_value {
                if let Some(strict) = self.strict_variant()? {
                    if strict.objective() > vertex.objective() {
                        self.push(strict);
                    }
                }
            }
            self.push(vertex);
            return Ok(());
        }
        let options = self.candidates[level].clone();
        for choice in options {
            let mut child = sys.clone();
            if assign_type(&mut child, &self.d.support[level].0, choice, &Rational::zero()) {
                self.assignment[level] = choice;
                self.dfs(level + 1, &child)?;
            }
        }
        Ok(())
    }
}

/// Enumerates every feasible choice mapping and returns the vertex pricings,
/// deduplicated on (allocation, revenue, profit).
///
/// Candidate items per type are restricted to those with value strictly above
/// the production cost (above zero without costs): an optimal pricing whose
/// sales are all strictly above cost always exists, because withdrawing items
/// priced at or below cost reroutes buyers to weakly more profitable
/// purchases.
pub fn enumerate_vertex_pricings(
    d: &TypeDistribution,
    costs: Option<&[Rational]>,
    guards: &Guards,
) -> Result<Vec<VertexPricing>, OptError> {
    let m = d.items();
    if let Some(c) = costs {
        check_dim("enumerate costs", m, c.len())?;
    }
    let zero_costs;
    let cost_slice: &[Rational] = match costs {
        Some(c) => c,
        None => {
            zero_costs = vec![Rational::zero(); m];
            &zero_costs
        }
    };

    // Candidates per type: items ascending, then the no-purchase option.
    let mut candidates: Vec<Vec<Option<usize>>> = Vec::with_capacity(d.support.len());
    let mut size: u128 = 1;
    for (v, _) in &d.support {
        check_dim("enumerate valuation", m, v.len())?;
        let mut cs: Vec<Option<usize>> = (0..m)
            .filter(|&j| v.0[j] > cost_slice[j])
            .map(Some)
            .collect();
        cs.push(None);
        size = size.saturating_mul(cs.len() as u128);
        candidates.push(cs);
    }
    if size > guards.enum_limit {
        return Err(OptError::Guard {
            what: "choice-mapping enumeration",
            size,
            limit: guards.enum_limit,
        });
    }

    let mut e = Enumerator {
        d,
        candidates,
        costs,
        cost_slice,
        margin: strict_margin(d, m),
        assignment: vec![None; d.support.len()],
        seen: HashMap::new(),
        out: Vec::new(),
    };
    let sys = DiffSystem::new(m);
    e.dfs(0, &sys)?;
    Ok(e.out)
}

/// The revenue-optimal (or, with costs, profit-optimal) deterministic item
/// pricing over the full mapping enumeration.
pub fn opt_item_pricing(
    d: &TypeDistribution,
    costs: Option<&[Rational]>,
    guards: &Guards,
) -> Result<VertexPricing, OptError> {
    let vertices = enumerate_vertex_pricings(d, costs, guards)?;
    vertices
        .into_iter()
        .max_by(|a, b| a.objective().cmp(b.objective()))
        .ok_or_else(|| OptError::Infeasible("empty enumeration".into()))
}

/// A single buyer's part of an ex-ante solution.
#[derive(Debug, Clone)]
pub struct ExAnteBuyer {
    pub pricing: RandomItemPricing,
    pub allocation: AllocationVector,
    pub revenue: Rational,
}

/// Result of the single-buyer ex-ante revenue program.
#[derive(Debug, Clone)]
pub struct ExAnteSrev {
    pub buyer: ExAnteBuyer,
    /// Dual prices of the per-item allocation constraints.
    pub item_duals: Vec<Rational>,
    /// Constraint slack: x_j minus the achieved allocation.
    pub slack: Vec<Rational>,
}

fn mixture_from_weights(
    m: usize,
    vertices: &[VertexPricing],
    weights: &[Rational],
) -> (RandomItemPricing, AllocationVector, Rational) {
    let mut atoms = Vec::new();
    let mut alloc = AllocationVector::zero(m);
    let mut revenue = Rational::zero();
    for (v, w) in vertices.iter().zip(weights) {
        if w.is_zero() {
            continue;
        }
        atoms.push((v.pricing.clone(), w.clone()));
        alloc = alloc.add(&v.allocation.scale(w));
        revenue += w * &v.revenue;
    }
    if atoms.is_empty() {
        atoms.push((ItemPricing::all_infinite(m), Rational::one()));
    }
    (RandomItemPricing { atoms }, alloc, revenue)
}

/// Optimal revenue of a random item pricing whose expected allocation is
/// bounded by x, as an LP over the vertex-pricing atoms.
pub fn exante_srev(
    d: &TypeDistribution,
    x: &AllocationVector,
    guards: &Guards,
) -> Result<ExAnteSrev, OptError> {
    let m = d.items();
    check_dim("exante_srev x", m, x.len())?;
    let vertices = enumerate_vertex_pricings(d, None, guards)?;
    let n = vertices.len();
    let mut lp = LinearProgram::new(n, vertices.iter().map(|v| v.revenue.clone()).collect());
    for j in 0..m {
        lp.add_row(
            vertices.iter().map(|v| v.allocation.0[j].clone()).collect(),
            Relation::Le,
            x.0[j].clone(),
        );
    }
    lp.add_row(vec![Rational::one(); n], Relation::Eq, Rational::one());
    let sol = match lp_solve(&lp)? {
        LpOutcome::Optimal(s) => s,
        other => {
            return Err(OptError::Infeasible(format!(
                "ex-ante mixture program returned {other:?}"
            )))
        }
    };
    let (pricing, allocation, revenue) = mixture_from_weights(m, &vertices, &sol.primal);
    debug_assert_eq!(revenue, sol.value);
    let slack = (0..m).map(|j| &x.0[j] - &allocation.0[j]).collect();
    Ok(ExAnteSrev {
        buyer: ExAnteBuyer {
            pricing,
            allocation,
            revenue,
        },
        item_duals: sol.duals[..m].to_vec(),
        slack,
    })
}

/// Joint ex-ante solution: per-buyer mixtures with each item sold at most
/// once in expectation across buyers.
#[derive(Debug, Clone)]
pub struct ExAnteSolution {
    pub buyers: Vec<ExAnteBuyer>,
    pub total_revenue: Rational,
    /// Dual prices of the shared per-item constraints.
    pub item_duals: Vec<Rational>,
}

pub fn exante_global(inst: &Instance, guards: &Guards) -> Result<ExAnteSolution, OptError> {
    let m = inst.m;
    let mut per_buyer: Vec<Vec<VertexPricing>> = Vec::with_capacity(inst.n());
    for d in &inst.buyers {
        check_dim("exante_global buyer", m, d.items())?;
        per_buyer.push(enumerate_vertex_pricings(d, None, guards)?);
    }
    let offsets: Vec<usize> = per_buyer
        .iter()
        .scan(0usize, |acc, v| {
            let o = *acc;
            *acc += v.len();
            Some(o)
        })
        .collect();
    let total: usize = per_buyer.iter().map(|v| v.len()).sum();

    let mut objective = vec![Rational::zero(); total];
    for (i, verts) in per_buyer.iter().enumerate() {
        for (k, v) in verts.iter().enumerate() {
            objective[offsets[i] + k] = v.revenue.clone();
        }
    }
    let mut lp = LinearProgram::new(total, objective);
    for j in 0..m {
        let mut row = vec![Rational::zero(); total];
        for (i, verts) in per_buyer.iter().enumerate() {
            for (k, v) in verts.iter().enumerate() {
                row[offsets[i] + k] = v.allocation.0[j].clone();
            }
        }
        lp.add_row(row, Relation::Le, Rational::one());
    }
    for (i, verts) in per_buyer.iter().enumerate() {
        let mut row = vec![Rational::zero(); total];
        for k in 0..verts.len() {
            row[offsets[i] + k] = Rational::one();
        }
        lp.add_row(row, Relation::Eq, Rational::one());
    }
    let sol = match lp_solve(&lp)? {
        LpOutcome::Optimal(s) => s,
        other => {
            return Err(OptError::Infeasible(format!(
                "joint ex-ante program returned {other:?}"
            )))
        }
    };

    let mut buyers = Vec::with_capacity(inst.n());
    let mut total_revenue = Rational::zero();
    for (i, verts) in per_buyer.iter().enumerate() {
        let weights = &sol.primal[offsets[i]..offsets[i] + verts.len()];
        let (pricing, allocation, revenue) = mixture_from_weights(m, verts, weights);
        total_revenue += &revenue;
        buyers.push(ExAnteBuyer {
            pricing,
            allocation,
            revenue,
        });
    }
    debug_assert_eq!(total_revenue, sol.value);
    for j in 0..m {
        let mass: Rational = buyers.iter().map(|b| b.allocation.0[j].clone()).sum();
        debug_assert!(mass <= Rational::one());
    }
    Ok(ExAnteSolution {
        buyers,
        total_revenue,
        item_duals: sol.duals[..m].to_vec(),
    })
}

/// Cost vector extracted from the ex-ante allocation constraints' duals. The
/// supergradient inequality SRev(y) <= SRev(x) + c·(y - x) is verified on a
/// canonical sample of y before returning.
pub fn srev_subgradient(
    d: &TypeDistribution,
    x: &AllocationVector,
    guards: &Guards,
) -> Result<Vec<Rational>, OptError> {
    let at_x = exante_srev(d, x, guards)?;
    let c = at_x.item_duals.clone();
    for y in [
        AllocationVector::zero(x.len()),
        x.clone(),
        AllocationVector::ones(x.len()),
    ] {
        if !supergradient_holds(d, x, &at_x.buyer.revenue, &c, &y, guards)? {
            return Err(OptError::Infeasible(
                "supergradient inequality violated".into(),
            ));
        }
    }
    Ok(c)
}

/// Checks SRev(y) <= SRev(x) + c·(y - x) exactly.
pub fn supergradient_holds(
    d: &TypeDistribution,
    x: &AllocationVector,
    srev_at_x: &Rational,
    c: &[Rational],
    y: &AllocationVector,
    guards: &Guards,
) -> Result<bool, OptError> {
    let at_y = exante_srev(d, y, guards)?;
    let shift: Rational = (0..x.len()).map(|j| &c[j] * (&y.0[j] - &x.0[j])).sum();
    Ok(at_y.buyer.revenue <= srev_at_x + shift)
}

/// A convex decomposition of an allocation target into restrictions of one
/// deterministic pricing.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub pricing: RandomItemPricing,
    pub allocation: AllocationVector,
    pub revenue: Rational,
}

/// Given pricing p with availability-weighted allocation x*, and a target
/// y ⪯ x*, mixes restrictions p_T of p so that the mixture allocates exactly
/// y and earns exactly y·p. Both equalities are asserted in exact rationals.
pub fn convex_decompose(
    p: &ItemPricing,
    d: &TypeDistribution,
    avail: &AvailabilityDistribution,
    y: &AllocationVector,
    guards: &Guards,
) -> Result<Decomposition, OptError> {
    let m = p.len();
    check_dim("convex_decompose y", m, y.len())?;
    let support = p.support_mask();
    let k = support.count_ones();
    let subsets: u64 = 1u64 << k;
    if subsets > guards.subset_limit {
        return Err(OptError::Guard {
            what: "decomposition subsets",
            size: subsets as u128,
            limit: guards.subset_limit as u128,
        });
    }
    for j in 0..m {
        if support & (1 << j) == 0 && !y.0[j].is_zero() {
            return Err(OptError::Infeasible(format!(
                "target allocates item {j} with infinite price"
            )));
        }
    }

    // Materialize the support subsets as full-width masks.
    let support_items: Vec<usize> = (0..m).filter(|j| support & (1 << j) != 0).collect();
    let mut masks = Vec::with_capacity(subsets as usize);
    for pick in 0..subsets {
        let mut mask = 0u32;
        for (bit, item) in support_items.iter().enumerate() {
            if pick & (1 << bit) != 0 {
                mask |= 1 << item;
            }
        }
        masks.push(mask);
    }

    let restrictions: Vec<ItemPricing> = masks.iter().map(|&t| p.restrict(t)).collect();
    let allocs: Vec<AllocationVector> = restrictions
        .iter()
        .map(|pt| allocation_vector(d, &RandomItemPricing::deterministic(pt.clone()), avail))
        .collect::<Result<_, _>>()?;

    let xstar = allocs.last().expect("full restriction present");
    if !y.dominated_by(xstar) {
        return Err(OptError::Infeasible(
            "target is not dominated by the achievable allocation".into(),
        ));
    }

    // Feasibility program: weights alpha_T >= 0, sum 1, sum alpha_T x_T = y.
    let n = restrictions.len();
    let mut lp = LinearProgram::new(n, vec![Rational::zero(); n]);
    for j in 0..m {
        lp.add_row(
            allocs.iter().map(|a| a.0[j].clone()).collect(),
            Relation::Eq,
            y.0[j].clone(),
        );
    }
    lp.add_row(vec![Rational::one(); n], Relation::Eq, Rational::one());
    let sol = match lp_solve(&lp)? {
        LpOutcome::Optimal(s) => s,
        LpOutcome::Infeasible => {
            return Err(OptError::Infeasible(
                "target outside the convex hull of restrictions".into(),
            ))
        }
        LpOutcome::Unbounded => unreachable!("feasibility program cannot be unbounded"),
    };

    let mut atoms = Vec::new();
    let mut achieved = AllocationVector::zero(m);
    let mut revenue = Rational::zero();
    for (idx, w) in sol.primal.iter().enumerate() {
        if w.is_zero() {
            continue;
        }
        atoms.push((restrictions[idx].clone(), w.clone()));
        achieved = achieved.add(&allocs[idx].scale(w));
        revenue += w * allocs[idx].dot_prices(&restrictions[idx]);
    }
    if atoms.is_empty() {
        atoms.push((ItemPricing::all_infinite(m), Rational::one()));
    }
    // Both equalities, exactly.
    if achieved != *y {
        return Err(OptError::Infeasible(
            "decomposition missed the target allocation".into(),
        ));
    }
    let want = y.dot_prices(p);
    if revenue != want {
        return Err(OptError::Infeasible(
            "decomposition missed the target revenue".into(),
        ));
    }
    Ok(Decomposition {
        pricing: RandomItemPricing { atoms },
        allocation: achieved,
        revenue,
    })
}
