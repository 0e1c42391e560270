use super::views::{find_cycle, EdgeKind, ProcessEdge};

fn edges(pairs: &[(&str, &str)]) -> Vec<ProcessEdge> {
    pairs
        .iter()
        .map(|(a, b)| ProcessEdge { from: a.to_string(), to: b.to_string(), kind: EdgeKind::Declared })
        .collect()
}

#[test]
fn acyclic_edges_have_no_cycle() {
    assert_eq!(find_cycle(&edges(&[("a", "b"), ("b", "c"), ("a", "c")])), None);
    assert_eq!(find_cycle(&[]), None);
}

#[test]
fn cycle_is_closed_path() {
    let cycle = find_cycle(&edges(&[("a", "b"), ("b", "c"), ("c", "b"), ("c", "d")])).unwrap();
    assert_eq!(cycle, ["b", "c", "b"]);
}

#[test]
fn self_loop_is_a_cycle() {
    assert_eq!(find_cycle(&edges(&[("x", "x")])).unwrap(), ["x", "x"]);
}
