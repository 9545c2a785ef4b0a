use hemoforge::hemonet::{compute_cfpwv, fit_lambda_c, ArterialNetwork, ScaleSet, REFERENCE_NETWORK_JSON};
use proptest::prelude::*;
use serde_json::Value;

fn multiplier() -> impl Strategy<Value = f64> {
    0.25f64..4.0
}

fn scale_set() -> impl Strategy<Value = ScaleSet> {
    (multiplier(), multiplier(), multiplier(), multiplier(), multiplier()).prop_map(|(l, d, c, rt, ct)| ScaleSet {
        lambda_l: l,
        lambda_d: d,
        lambda_c: c,
        lambda_rt: rt,
        lambda_ct: ct,
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaling_composes(s1 in scale_set(), s2 in scale_set()) {
        let net = ArterialNetwork::reference();
        let twice = net.scale(&s1).unwrap().scale(&s2).unwrap();
        let once = net.scale(&s1.compose(&s2)).unwrap();
        for (a, b) in twice.segments().iter().zip(once.segments()) {
            prop_assert!(close(a.length_cm, b.length_cm));
            prop_assert!(close(a.d_prox_cm, b.d_prox_cm));
            prop_assert!(close(a.d_dist_cm, b.d_dist_cm));
            prop_assert!(close(a.distensibility_per_mmhg, b.distensibility_per_mmhg));
        }
        for (a, b) in twice.terminals().iter().zip(once.terminals()) {
            prop_assert!(close(a.r1, b.r1) && close(a.r2, b.r2) && close(a.ct, b.ct));
        }
    }

    #[test]
    fn cfpwv_fit_round_trip(lambda_c in 0.05f64..20.0) {
        let net = ArterialNetwork::reference();
        let v = compute_cfpwv(&net, lambda_c).unwrap();
        let back = fit_lambda_c(&net, v).unwrap();
        prop_assert!((back - lambda_c).abs() <= 1e-10 * lambda_c);
    }
}

/// Every JSON path to a scalar, with the value found there.
fn scalar_paths(v: &Value, path: &mut Vec<Value>, out: &mut Vec<(Vec<Value>, Value)>) {
    match v {
        Value::Object(m) => {
            for (k, child) in m {
                path.push(Value::from(k.as_str()));
                scalar_paths(child, path, out);
                path.pop();
            }
        }
        Value::Array(a) => {
            for (i, child) in a.iter().enumerate() {
                path.push(Value::from(i));
                scalar_paths(child, path, out);
                path.pop();
            }
        }
        _ => out.push((path.clone(), v.clone())),
    }
}

fn parent_of<'a>(root: &'a mut Value, path: &[Value]) -> &'a mut Value {
    path[..path.len() - 1].iter().fold(root, |node, key| match key {
        Value::String(k) => &mut node[k.as_str()],
        Value::Number(i) => &mut node[i.as_u64().unwrap() as usize],
        _ => unreachable!(),
    })
}

fn last_key(path: &[Value]) -> &str {
    path.last().and_then(Value::as_str).unwrap_or("")
}

#[test]
fn loader_rejects_deleted_fields() {
    let base: Value = serde_json::from_str(REFERENCE_NETWORK_JSON).unwrap();
    let mut paths = Vec::new();
    scalar_paths(&base, &mut Vec::new(), &mut paths);
    let mut tried = 0;
    for (path, _) in &paths {
        let key = last_key(path);
        // the file version is optional, root `parent: null` is the default, and
        // child list entries are structural rather than fields
        if key.is_empty() || key == "version" || (key == "parent" && parent_of(&mut base.clone(), path)["parent"].is_null()) {
            continue;
        }
        let mut v = base.clone();
        parent_of(&mut v, path).as_object_mut().unwrap().remove(key);
        tried += 1;
        assert!(
            ArterialNetwork::from_json_str(&v.to_string()).is_err(),
            "deleting {path:?} was accepted"
        );
    }
    assert!(tried > 200, "only {tried} deletions tried");
}

#[test]
fn loader_rejects_sign_flips() {
    const POSITIVE: [&str; 9] = ["length_cm", "d_prox_cm", "d_dist_cm", "distensibility_per_mmhg", "r1", "r2", "ct", "rho", "mu"];
    let base: Value = serde_json::from_str(REFERENCE_NETWORK_JSON).unwrap();
    let mut paths = Vec::new();
    scalar_paths(&base, &mut Vec::new(), &mut paths);
    let mut tried = 0;
    for (path, value) in &paths {
        let key = last_key(path);
        if !POSITIVE.contains(&key) {
            continue;
        }
        let mut v = base.clone();
        parent_of(&mut v, path)[key] = Value::from(-value.as_f64().unwrap());
        tried += 1;
        assert!(
            ArterialNetwork::from_json_str(&v.to_string()).is_err(),
            "negating {path:?} was accepted"
        );
    }
    assert!(tried > 100, "only {tried} flips tried");
}

#[test]
fn loader_rejects_out_of_range_site_positions() {
    let base: Value = serde_json::from_str(REFERENCE_NETWORK_JSON).unwrap();
    for site in ["aortic_root", "brachial", "radial", "carotid", "femoral"] {
        for s in [-0.1, 1.1] {
            let mut v = base.clone();
            v["sites"][site]["s"] = Value::from(s);
            assert!(ArterialNetwork::from_json_str(&v.to_string()).is_err(), "{site} at {s}");
        }
        let mut v = base.clone();
        v["sites"][site]["segment_id"] = Value::from(999);
        assert!(ArterialNetwork::from_json_str(&v.to_string()).is_err());
    }
}
