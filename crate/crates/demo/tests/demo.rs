use bdps_demo::{elasticity_json, failover_json, nid_json};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn nid_parts() {
    let v = parse(nid_json(" 1234567890123 ").unwrap());
    assert_eq!(v["district"], 12);
    assert_eq!(v["serial"], 890123);
    assert!(nid_json("12345").is_err());
}

#[test]
fn pulse_scales_up_and_back() {
    let v = parse(elasticity_json(250.0, 100.0, 1.0, 60).unwrap());
    let workers: Vec<u64> = v["rows"].as_array().unwrap().iter().map(|r| r[2].as_u64().unwrap()).collect();
    assert_eq!(workers.len(), 300);
    assert_eq!(*workers.iter().max().unwrap(), 3);
    assert_eq!(workers[0], 1);
    assert_eq!(*workers.last().unwrap(), 1);
    assert!(elasticity_json(10.0, 0.0, 1.0, 60).is_err());
}

#[test]
fn failover_goes_remote() {
    let v = parse(failover_json(1, 10_000, 5.0).unwrap());
    assert_eq!(v["promoted_at_ms"], 11_500);
    assert!(v["answered_remote_after_crash"].as_u64().unwrap() > 50);
    assert!(v["availability"].as_f64().unwrap() > 0.9);
}
