//! Property tests for the model invariants: best-response dominance,
//! mixture linearity, allocation feasibility, availability monotonicity,
//! closure behavior and serialization round trips.

use mechlab_core::buymany::{buy_many_closure, check_buy_many, hat_prices};
use mechlab_core::instances::{read_instance, read_menu, write_instance, write_menu};
use mechlab_core::rational::{frac, Price, Rational};
use mechlab_core::*;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

fn rational_grid() -> impl Strategy<Value = Rational> {
    (0i64..=16).prop_map(|n| frac(n, 2))
}

fn valuation(m: usize) -> impl Strategy<Value = Valuation> {
    proptest::collection::vec(rational_grid(), m).prop_map(Valuation)
}

fn distribution(m: usize) -> impl Strategy<Value = TypeDistribution> {
    proptest::collection::vec((valuation(m), 1i64..=8), 1..=4).prop_map(|types| {
        let total: i64 = types.iter().map(|(_, w)| w).sum();
        TypeDistribution::new(
            types
                .into_iter()
                .map(|(v, w)| (v, Rational::new(w.into(), total.into())))
                .collect(),
        )
    })
}

fn item_pricing(m: usize) -> impl Strategy<Value = ItemPricing> {
    proptest::collection::vec(
        prop_oneof![
            4 => (0i64..=16).prop_map(|n| Price::Finite(frac(n, 2))),
            1 => Just(Price::Infinite),
        ],
        m,
    )
    .prop_map(ItemPricing)
}

fn lottery(m: usize) -> impl Strategy<Value = Lottery> {
    proptest::collection::vec(0i64..=4, m).prop_map(|raw| {
        let total: i64 = raw.iter().sum();
        let denom = total.max(4);
        Lottery(raw.into_iter().map(|k| frac(k, denom)).collect())
    })
}

fn menu(m: usize) -> impl Strategy<Value = LotteryMenu> {
    proptest::collection::vec((lottery(m), rational_grid()), 1..=4)
        .prop_map(LotteryMenu::new)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// The chosen option weakly dominates every option and the zero option.
    #[test]
    fn menu_best_response_dominates((v, menu) in (2usize..=4).prop_flat_map(|m| (valuation(m), menu(m)))) {
        let choice = best_response_menu(&v, &menu).unwrap();
        prop_assert!(!choice.utility.is_negative());
        for (lottery, price) in &menu.options {
            let u = lottery_value(&v, lottery).unwrap() - price;
            prop_assert!(choice.utility >= u);
        }
    }

    /// Revenue of a mixture equals the weight-average of per-atom revenues.
    #[test]
    fn mixture_linearity((d, a, b) in (2usize..=3).prop_flat_map(|m| (distribution(m), item_pricing(m), item_pricing(m)))) {
        let m = d.items();
        let full = AvailabilityDistribution::full(m);
        let ra = expected_revenue(&d, &Pricing::Items(RandomItemPricing::deterministic(a.clone())), &full).unwrap();
        let rb = expected_revenue(&d, &Pricing::Items(RandomItemPricing::deterministic(b.clone())), &full).unwrap();
        let w = frac(1, 3);
        let mix = RandomItemPricing { atoms: vec![(a, w.clone()), (b, Rational::one() - &w)] };
        let rm = expected_revenue(&d, &Pricing::Items(mix), &full).unwrap();
        prop_assert_eq!(rm, &w * ra + (Rational::one() - &w) * rb);
    }

    /// A unit-demand buyer's allocation sums to at most one.
    #[test]
    fn allocation_mass_bounded((d, p) in (2usize..=4).prop_flat_map(|m| (distribution(m), item_pricing(m)))) {
        let m = d.items();
        let full = AvailabilityDistribution::full(m);
        let alloc = allocation_vector(&d, &RandomItemPricing::deterministic(p), &full).unwrap();
        let total: Rational = alloc.0.iter().cloned().sum();
        prop_assert!(total <= Rational::one());
        prop_assert!(alloc.0.iter().all(|x| !x.is_negative()));
    }

    /// Restricting availability never decreases the purchase probability of
    /// a still-available item.
    #[test]
    fn restriction_monotonicity((d, p, sup, sub) in (2usize..=4).prop_flat_map(|m| (distribution(m), item_pricing(m), 0u32..(1 << m), 0u32..(1 << m)))) {
        let m = d.items();
        let sup_mask = sup;
        let t_mask = sub & sup_mask;
        let mut at_s = AvailabilityDistribution::full(m);
        at_s.atoms.clear();
        at_s.atoms.insert(sup_mask, Rational::one());
        let mut at_t = AvailabilityDistribution::full(m);
        at_t.atoms.clear();
        at_t.atoms.insert(t_mask, Rational::one());
        let rip = RandomItemPricing::deterministic(p);
        let xs = allocation_vector(&d, &rip, &at_s).unwrap();
        let xt = allocation_vector(&d, &rip, &at_t).unwrap();
        for j in 0..m {
            if t_mask & (1 << j) != 0 {
                prop_assert!(xt.0[j] >= xs.0[j]);
            } else {
                prop_assert!(xt.0[j].is_zero());
            }
        }
    }

    /// Acquisition prices are tight minima: no option beats them, and some
    /// option attains each finite one.
    #[test]
    fn hat_prices_are_tight(menu in (2usize..=4).prop_flat_map(menu)) {
        let hat = hat_prices(&menu);
        for j in 0..hat.0.len() {
            let mut attained = false;
            for (lottery, price) in &menu.options {
                if lottery.0[j].is_positive() {
                    let ratio = price / &lottery.0[j];
                    match &hat.0[j] {
                        Price::Finite(h) => {
                            prop_assert!(*h <= ratio);
                            if *h == ratio {
                                attained = true;
                            }
                        }
                        Price::Infinite => prop_assert!(false, "finite ratio under infinite hat"),
                    }
                }
            }
            if let Price::Finite(_) = &hat.0[j] {
                prop_assert!(attained);
            }
        }
    }

    /// The closure only lowers prices, is idempotent, and its output passes
    /// the buy-many check.
    #[test]
    fn closure_properties(menu in (2usize..=4).prop_flat_map(menu)) {
        let closed = buy_many_closure(&menu);
        prop_assert!(check_buy_many(&closed).is_ok());
        prop_assert_eq!(&buy_many_closure(&closed), &closed);
        for ((l0, p0), (l1, p1)) in menu.options.iter().zip(&closed.options) {
            prop_assert_eq!(l0, l1);
            prop_assert!(p1 <= p0);
        }
    }

    /// Writing and reading an instance or menu is the identity.
    #[test]
    fn serialization_round_trip((d, menu) in (2usize..=4).prop_flat_map(|m| (distribution(m), menu(m)))) {
        let m = d.items();
        let inst = Instance { m, buyers: vec![d], costs: Some(vec![frac(1, 2); m]) };
        let dir = tempfile::tempdir().unwrap();
        let ipath = dir.path().join("inst.json");
        write_instance(&ipath, &inst).unwrap();
        prop_assert_eq!(read_instance(&ipath).unwrap(), inst);
        let mpath = dir.path().join("menu.json");
        write_menu(&mpath, &menu).unwrap();
        prop_assert_eq!(read_menu(&mpath, m).unwrap(), menu);
    }
}
