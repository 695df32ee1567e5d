mod common;

use common::fixture;
use dystil::strategy::{format_for_prompt, parse_strategy_list};

#[test]
fn initial_fixture_has_ten_items() {
    let list = parse_strategy_list(&fixture("initial_strategies.txt")).unwrap();
    assert_eq!(list.len(), 10);
    assert_eq!(list.items[0].title, "Advance when clear and safe");
    assert!(list
        .items
        .iter()
        .all(|i| !i.body.is_empty() && !i.title.contains('*')));
}

#[test]
fn fixtures_survive_canonical_formatting() {
    for name in ["initial_strategies.txt", "revised_strategies.txt"] {
        let list = parse_strategy_list(&fixture(name)).unwrap();
        let again = parse_strategy_list(&format_for_prompt(&list)).unwrap();
        assert_eq!(again.items, list.items, "{name}");
    }
}
