mod support;

use sensation_core::analyzer::{detect_contradictions, detect_redundancy};
use sensation_core::diagnostic::Witness;
use sensation_core::fixtures;

use support::*;

#[test]
fn contradictions_and_redundancy_match_world_enumeration() {
    let reg = fixtures::smart_home();
    let mut gen = Gen::new(&reg, 0x5eed_0001);
    let (mut contradictions, mut redundancies) = (0, 0);
    for case in 0..300 {
        let (a, b) = gen.pair();
        assert!(domain_product(&reg, &referenced(&[&a, &b])) <= 10_000);
        let rules = [a.clone(), b.clone()];

        let found = detect_contradictions(&rules, &reg).unwrap();
        let expected = oracle_contradiction(&reg, &a, &b);
        assert_eq!(!found.is_empty(), expected, "case {case}: {a:?} / {b:?}");
        for d in &found {
            let Witness::World { event, assignments } = &d.witness else { panic!() };
            assert_eq!(fired(&reg, &with_assignments(&reg, assignments), &rules, event).len(), 2);
            contradictions += 1;
        }

        let found = detect_redundancy(&rules, &reg).unwrap();
        for (x, y) in [(&a, &b), (&b, &a)] {
            let reported = found.iter().any(|d| d.rules == vec![x.id.clone(), y.id.clone()]);
            assert_eq!(reported, oracle_redundant(&reg, x, y), "case {case}: {x:?} covers {y:?}");
        }
        for d in &found {
            let Witness::Subsumption { subsumer, subsumed, event, example, .. } = &d.witness else { panic!() };
            if let Some(example) = example {
                let world = with_assignments(&reg, example);
                let pick = |id: &sensation_core::RuleId| rules.iter().find(|r| &r.id == id).unwrap().clone();
                assert_eq!(fired(&reg, &world, &[pick(subsumed)], event).len(), 1);
                assert_eq!(fired(&reg, &world, &[pick(subsumer)], event).len(), 1);
            }
            redundancies += 1;
        }
    }
    assert!(contradictions > 10 && redundancies > 10, "{contradictions} / {redundancies}");
}
