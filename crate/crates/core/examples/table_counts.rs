//! Prints exact counts for the benchmark property/scope pairs.

use std::time::Duration;

use relcount::counter::count_exact_with_stats;
use relcount::props::{encode, PropertyId, PropertySpec};

fn main() {
    let rows = [
        (PropertyId::Antisymmetric, 5),
        (PropertyId::Connex, 6),
        (PropertyId::Function, 8),
        (PropertyId::Functional, 8),
        (PropertyId::Injective, 8),
        (PropertyId::Irreflexive, 5),
        (PropertyId::Reflexive, 5),
        (PropertyId::NonStrictOrder, 7),
        (PropertyId::StrictOrder, 7),
        (PropertyId::PreOrder, 7),
        (PropertyId::PartialOrder, 6),
        (PropertyId::Transitive, 6),
    ];
    for (p, n) in rows {
        let f = encode(PropertySpec::new(p, n).expect("valid scope"));
        let (r, stats) = count_exact_with_stats(&f, Duration::from_secs(600));
        let count = r.count.map_or("timeout".to_string(), |c| c.to_string());
        println!("{:<16} {:>2} {:>14} {:>8.2?} {:?}", p.name(), n, count, r.elapsed, stats);
    }
}
