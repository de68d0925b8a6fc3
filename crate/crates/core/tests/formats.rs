//! Golden serialization formats: partition and marked-set JSON, log-scalar
//! JSON, and the trajectory CSV.

use afemlab::driver::{csv_string, run, RunConfig};
use afemlab::params::solve_params;
use afemlab::MarkerConfig;
use afemlab::{Element, LogScalar, MarkedSet, Partition};

fn el(m: u32, g: u32, o: u64) -> Element {
    Element::new(m, g, o).unwrap()
}

#[test]
fn partition_json_golden() {
    let t = Partition::initial(2).unwrap();
    assert_eq!(t.to_json().unwrap(), "[[0,0,0],[1,0,0],[2,0,0]]");

    let t = t
        .refine(&MarkedSet::from_elements([el(1, 0, 0)]))
        .unwrap()
        .refine(&MarkedSet::from_elements([el(1, 1, 1)]))
        .unwrap();
    assert_eq!(
        t.to_json().unwrap(),
        "[[0,0,0],[1,1,0],[1,2,2],[1,2,3],[2,0,0]]"
    );
}

#[test]
fn marked_set_json_expands_cells_in_position_order() {
    let t0 = Partition::initial(2).unwrap();
    let mut cell = MarkedSet::new();
    cell.push_unit_cell(2);
    let t = t0.refine(&cell).unwrap();

    let mut set = MarkedSet::new();
    set.push_unit_cell(2);
    set.push_element(t.zero_element());
    assert_eq!(set.to_json(&t).unwrap(), "[[0,0,0],[2,1,0],[2,1,1]]");
}

#[test]
fn log_scalar_json_round_trips() {
    let v = LogScalar::from_log2(-591.25);
    let json = serde_json::to_string(&v).unwrap();
    assert_eq!(json, "{\"log2\":-591.25}");
    assert_eq!(serde_json::from_str::<LogScalar>(&json).unwrap(), v);
    assert_eq!(
        serde_json::to_string(&LogScalar::ZERO).unwrap(),
        "{\"zero\":true}"
    );
}

#[test]
fn trajectory_csv_golden_prefix() {
    let p = solve_params(0.5, 1.0, 0.1).unwrap().estimator_params();
    let mut config = RunConfig::new(p, MarkerConfig::Ideal);
    config.max_iterations = 2;
    let csv = csv_string(&run(&config).unwrap().records);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "k,cardinality,added,eta_sq_log2,delta_sq_log2,rate_log2,g0,marked_count"
    );
    assert_eq!(lines[1], "0,9,0,3.32894841046804e0,3.32894841046804e0,,0,1");
    assert_eq!(
        lines[2],
        "1,10,1,3.26644841046804e0,3.26644841046804e0,1.63322420523402e0,1,1"
    );
    assert_eq!(lines.len(), 4);
}
