use berkdyn::affable::{parse_affable_list, standard_battery, BATTERY_JSON};
use berkdyn::arith::{q, qf};
use berkdyn::berkovich::build_skeleton;
use berkdyn::green::PotentialContext;
use berkdyn::harness::{circle_sample, sweep_chi, SweepConfig};
use berkdyn::measures::{equilibrium_arch, equilibrium_nonarch};
use berkdyn::{BerkPoint, CxPoint, Execution, HomogeneousLift, MetricGraph, Place, QPoly};
use num_complex::Complex64;

fn quadratic(c: (i64, i64)) -> HomogeneousLift {
    HomogeneousLift::polynomial(&QPoly::new(vec![qf(c.0, c.1), q(0), q(1)])).unwrap()
}

#[test]
fn parallel_and_sequential_agree_bitwise() {
    let place = Place::complex();
    let f = quadratic((-1, 1));
    let ctx = PotentialContext::new(&place, &f).unwrap();
    let pts = circle_sample(Complex64::new(0.3, 0.0), 1.7, 40);
    let a = ctx.lambda_batch(Execution::Parallel, &pts, 1e-10).unwrap();
    let b = ctx.lambda_batch(Execution::Sequential, &pts, 1e-10).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.value.to_f64().to_bits(), y.value.to_f64().to_bits());
    }
    let ea = equilibrium_arch(Execution::Parallel, &place, &f, CxPoint::finite(2.0, 0.0), 8).unwrap();
    let eb = equilibrium_arch(Execution::Sequential, &place, &f, CxPoint::finite(2.0, 0.0), 8).unwrap();
    assert_eq!(ea.atoms.len(), eb.atoms.len());
    for ((za, wa), (zb, wb)) in ea.atoms.iter().zip(&eb.atoms) {
        assert_eq!(za, zb);
        assert_eq!(wa.to_bits(), wb.to_bits());
    }
}

#[test]
fn map_json_round_trip_preserves_potentials() {
    let f = quadratic((1, 3));
    let g = HomogeneousLift::from_json(&f.to_json()).unwrap();
    let place = Place::padic(3, q(1)).unwrap();
    let x = BerkPoint::disk(q(0), qf(-1, 2));
    let a = PotentialContext::new(&place, &f).unwrap().lambda_limit(&x, 1e-12).unwrap();
    let b = PotentialContext::new(&place, &g).unwrap().lambda_limit(&x, 1e-12).unwrap();
    assert_eq!(a.value, b.value);
}

#[test]
fn battery_parses_and_round_trips() {
    let fns = parse_affable_list(BATTERY_JSON).unwrap();
    assert_eq!(fns.len(), 8);
    for f in &fns {
        let back = berkdyn::affable::AffableFn::from_json(&f.to_json()).unwrap();
        assert_eq!(serde_json::to_string(&back.to_json()).unwrap(), serde_json::to_string(&f.to_json()).unwrap());
    }
    assert_eq!(standard_battery().len(), 8);
}

#[test]
fn chi_sweep_table_has_one_row_per_place_and_function() {
    let cfg = SweepConfig::from_json(r#"{"grid": [{"kind": "arch", "eps": 1}, {"kind": "arch", "eps": "1/2"}, {"kind": "arch", "eps": 0.25}, {"kind": "trivial"}], "select": ["gap_2", "one"]}"#).unwrap();
    let table = sweep_chi(Execution::Parallel, &cfg).unwrap();
    assert_eq!(table.rows.len(), 4 * 2);
    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("place_kind,place_param,fn_id,value,cert_err,n_used"));
    for row in table.rows.iter().filter(|r| r.fn_id == "one") {
        assert!((row.value - 1.0).abs() < 1e-12, "{row:?}");
    }
}

#[test]
fn bad_reduction_measure_is_a_probability_on_the_skeleton() {
    let place = Place::padic(2, q(1)).unwrap();
    let f = quadratic((1, 2));
    let pts: Vec<BerkPoint> = (-4..=4).map(|k| BerkPoint::disk(q(0), qf(k, 2))).collect();
    let sk: MetricGraph<_> = build_skeleton(&place, &pts).unwrap();
    let eq = equilibrium_nonarch(Execution::Parallel, &place, &f, &sk, 1e-12, 2).unwrap();
    assert_eq!(eq.total_mass, q(1));
}
