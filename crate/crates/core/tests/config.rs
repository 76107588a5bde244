use powertrain_sizing::config::*;
use powertrain_sizing::Error;

#[test]
fn empty_document_gives_defaults() {
    let cfg = ToolkitConfig::from_toml_str("").unwrap();
    assert_eq!(cfg, ToolkitConfig::default());
    assert_eq!(cfg.vehicle.m_v, 1850.0);
    assert_eq!(cfg.battery.e_max, 208.8e6);
    assert_eq!(cfg.plan().unwrap().len(), 9);
}

#[test]
fn partial_section_keeps_other_defaults() {
    let cfg =
        ToolkitConfig::from_toml_str("[vehicle]\nm_v = 1500.0\n[solver]\nstarts = 3\n").unwrap();
    assert_eq!(cfg.vehicle.m_v, 1500.0);
    assert_eq!(cfg.vehicle.c_d, 0.29);
    assert_eq!(cfg.solver.starts, 3);
    assert_eq!(cfg.solver.grid, 21);
}

#[test]
fn defaults_round_trip() {
    let cfg = ToolkitConfig::default();
    let back = ToolkitConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
    assert_eq!(back, cfg);
}

fn key_of(doc: &str) -> String {
    match ToolkitConfig::from_toml_str(doc) {
        Err(Error::Config { key, .. }) => key,
        other => panic!("expected config error, got {other:?}"),
    }
}

#[test]
fn type_errors_name_the_key() {
    assert_eq!(key_of("[vehicle]\nm_v = \"heavy\"\n"), "vehicle.m_v");
    assert_eq!(key_of("[battery.cell]\nu_oc = true\n"), "battery.cell.u_oc");
}

#[test]
fn unknown_key_is_rejected() {
    assert_eq!(key_of("[solver]\nstart = 3\n"), "solver.start");
}

#[test]
fn inverted_bounds_name_the_key() {
    assert_eq!(
        key_of("[design]\np_rated_min = 2e5\n"),
        "design.p_rated_min"
    );
    assert_eq!(key_of("[design]\nlambda_min = 5.0\n"), "design.lambda_min");
    assert_eq!(key_of("[battery]\nzeta_min = 0.9\n"), "battery.zeta_min");
    assert_eq!(key_of("[vehicle]\nm_v = -1.0\n"), "vehicle.m_v");
}

#[test]
fn lhs_plan_is_seeded() {
    let cfg = ToolkitConfig::from_toml_str("[doe]\nkind = \"latin_hypercube\"\nn = 12\nseed = 3\n")
        .unwrap();
    let a = cfg.plan().unwrap();
    assert_eq!(a.len(), 12);
    assert_eq!(a, cfg.plan().unwrap());
}
