use super::*;
use crate::model::MultiplicityRange;
use crate::puml;
use std::collections::BTreeMap;
use std::path::PathBuf;

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn fixture_model() -> UmlModel {
    let (model, diags) = puml::load_model(&[
        fixture("model/classes.puml"),
        fixture("model/uv_states.puml"),
        fixture("model/mission_activity.puml"),
    ])
    .unwrap();
    assert!(diags.iter().all(|d| !d.is_error()), "{diags:?}");
    model
}

fn fixture_constraints() -> Vec<Constraint> {
    let text = std::fs::read_to_string(fixture("constraints/case_study.ocl")).unwrap();
    let (constraints, diags) = parse_constraints(&text);
    assert!(diags.iter().all(|d| !d.is_error()), "{diags:?}");
    constraints
}

fn conforming_store() -> InstanceStore {
    let text = std::fs::read_to_string(fixture("instances/conforming.json")).unwrap();
    InstanceStore::from_json(&text).unwrap()
}

fn attrs(pairs: &[(&str, AttrValue)]) -> BTreeMap<String, AttrValue> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn s(v: &str) -> AttrValue {
    AttrValue::Str(v.to_string())
}

fn n(v: f64) -> AttrValue {
    AttrValue::Num(v)
}

#[test]
fn fixture_constraints_cover_all_five_kinds() {
    let constraints = fixture_constraints();
    let kinds: Vec<ConstraintKind> = constraints.iter().map(|c| c.kind).collect();
    assert_eq!(
        kinds,
        vec![
            ConstraintKind::Uniqueness,
            ConstraintKind::Cardinality,
            ConstraintKind::Value,
            ConstraintKind::Precondition,
            ConstraintKind::Postcondition,
        ]
    );
    assert_eq!(constraints[3].operation.as_deref(), Some("receiveTask"));
    assert_eq!(constraints[4].operation.as_deref(), Some("receiveTask"));
}

#[test]
fn inv_kind_inference_follows_expression_shape() {
    let (constraints, diags) = parse_constraints(
        "context UV inv uid: UV.allInstances()->isUnique(uvID)\n\
         context UV inv perf: self.performance >= 0 and self.performance <= 100\n",
    );
    assert!(diags.is_empty());
    assert_eq!(constraints[0].kind, ConstraintKind::Uniqueness);
    assert_eq!(constraints[1].kind, ConstraintKind::Value);
}

#[test]
fn pre_without_operation_parses_with_a_warning() {
    let (constraints, diags) = parse_constraints("context UV pre: self.status = 'Idle'\n");
    assert_eq!(constraints.len(), 1);
    assert_eq!(constraints[0].kind, ConstraintKind::Precondition);
    assert_eq!(constraints[0].operation, None);
    assert!(diags.iter().any(|d| d.code == "missing-operation" && !d.is_error()));
}

#[test]
fn syntax_error_has_line_and_column() {
    let (constraints, diags) = parse_constraints("context UV inv bad: self.performance >=\n");
    assert!(constraints.is_empty());
    assert_eq!(diags.len(), 1);
    assert!(diags[0].is_error());
    assert_eq!(diags[0].line, 1);
    assert!(diags[0].column > 1);
}

#[test]
fn at_pre_is_rejected_in_preconditions() {
    let (constraints, diags) =
        parse_constraints("context UV::receiveTask pre bad: self.status@pre = 'Idle'\n");
    assert!(constraints.is_empty());
    assert!(diags.iter().any(|d| d.code == "pre-in-precondition"));
}

#[test]
fn conforming_store_has_no_violations() {
    let model = fixture_model();
    let store = conforming_store();
    assert!(store.validate(&model).is_empty());
    let violations = check_invariants(&model, &store, &fixture_constraints());
    assert_eq!(violations, vec![]);
}

#[test]
fn duplicate_uv_id_yields_one_uniqueness_violation() {
    let model = fixture_model();
    let mut store = conforming_store();
    store.find_mut("UGV-1").unwrap().attributes.insert("uvID".into(), s("UAV-1"));
    let violations = check_invariants(&model, &store, &fixture_constraints());
    assert_eq!(violations.len(), 1);
    assert_eq!(violations[0].constraint_id, "uniqueUvId");
    assert_eq!(violations[0].observed, "UAV-1");
}

#[test]
fn performance_out_of_range_yields_one_value_violation() {
    let model = fixture_model();
    let mut store = conforming_store();
    store.find_mut("UAV-1").unwrap().attributes.insert("performance".into(), n(150.0));
    let violations = check_invariants(&model, &store, &fixture_constraints());
    assert_eq!(violations.len(), 1);
    assert_eq!(violations[0].constraint_id, "performanceRange");
    assert!(violations[0].observed.contains("performance=150"));
}

#[test]
fn manager_without_uvs_yields_one_cardinality_violation() {
    let model = fixture_model();
    let mut store = conforming_store();
    store.links.retain(|l| l.kind != crate::model::RelationshipKind::Aggregation);
    // Drop the UVs too so only the lower bound is breached, not uniqueness.
    store.instances.remove("UAV");
    store.instances.remove("UGV");
    store.instances.remove("USV");
    store.links.clear();
    let violations = check_invariants(&model, &store, &fixture_constraints());
    assert_eq!(violations.len(), 1);
    assert_eq!(violations[0].constraint_id, "fleetCardinality");
}

#[test]
fn empty_store_flags_nothing() {
    let model = fixture_model();
    let violations =
        check_invariants(&model, &InstanceStore::default(), &fixture_constraints());
    assert_eq!(violations, vec![]);
}

#[test]
fn evaluation_errors_do_not_abort_other_constraints() {
    let model = fixture_model();
    let mut store = conforming_store();
    // Make performance a string on one UV: type mismatch for the value
    // constraint, while uniqueness still runs.
    store.find_mut("USV-1").unwrap().attributes.insert("performance".into(), s("high"));
    store.find_mut("UGV-1").unwrap().attributes.insert("uvID".into(), s("UAV-1"));
    let violations = check_invariants(&model, &store, &fixture_constraints());
    assert!(violations.iter().any(|v| v.message.contains("evaluation error")));
    assert!(violations.iter().any(|v| v.constraint_id == "uniqueUvId"));
}

#[test]
fn transition_contract_accepts_idle_to_active() {
    let constraints = fixture_constraints();
    let before = attrs(&[("status", s("Idle")), ("task", s(""))]);
    let after = attrs(&[("status", s("Active")), ("task", s("t-1"))]);
    let violations =
        check_transition_contract(&constraints, "receiveTask", &before, &after).unwrap();
    assert_eq!(violations, vec![]);
}

#[test]
fn transition_contract_rejects_busy_precondition() {
    let constraints = fixture_constraints();
    let before = attrs(&[("status", s("Active"))]);
    let after = attrs(&[("status", s("Active"))]);
    let violations =
        check_transition_contract(&constraints, "receiveTask", &before, &after).unwrap();
    let pre: Vec<_> =
        violations.iter().filter(|v| v.constraint_id == "idleBeforeTask").collect();
    assert_eq!(pre.len(), 1);
}

#[test]
fn transition_contract_rejects_unchanged_postcondition() {
    let constraints = fixture_constraints();
    let before = attrs(&[("status", s("Idle"))]);
    let after = attrs(&[("status", s("Idle"))]);
    let violations =
        check_transition_contract(&constraints, "receiveTask", &before, &after).unwrap();
    assert_eq!(violations.len(), 1);
    assert_eq!(violations[0].constraint_id, "activeAfterTask");
}

#[test]
fn unknown_operation_is_an_error() {
    let constraints = fixture_constraints();
    let empty = attrs(&[]);
    let err = check_transition_contract(&constraints, "selfDestruct", &empty, &empty);
    assert!(matches!(err, Err(ConstraintError::UnknownOperation(_))));
}

#[test]
fn fixture_cardinality_agrees_with_diagram() {
    let model = fixture_model();
    let defects = reconcile_cardinality(&model, &fixture_constraints());
    assert_eq!(defects, vec![]);
}

#[test]
fn cardinality_disagreement_is_a_model_defect() {
    let model = fixture_model();
    let (constraints, _) =
        parse_constraints("context UVF-Manager inv twoPlus: self.uvs->size() >= 2\n");
    let defects = reconcile_cardinality(&model, &constraints);
    assert_eq!(defects.len(), 1);
    assert_eq!(defects[0].code, DefectCode::CardinalityMismatch);
}

#[test]
fn navigation_respects_multiplicity_declaration() {
    let model = fixture_model();
    let rel = store::resolve_navigation(&model, "UVF-Manager", "uvs").unwrap();
    assert_eq!(rel.target, "UV");
    assert_eq!(rel.target_multiplicity, MultiplicityRange::new(1, None));
}

#[test]
fn adding_duplicate_id_to_conforming_store_always_violates() {
    // Property over randomly generated conforming stores: injecting an
    // instance that copies an existing uvID must produce at least one
    // violation.
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    let model = fixture_model();
    let constraints = fixture_constraints();
    let mut rng = StdRng::seed_from_u64(7);
    let classes = ["UAV", "UGV", "USV"];

    for round in 0..25 {
        let mut store = InstanceStore::default();
        store.instances.insert(
            "UVF-Manager".into(),
            vec![Instance {
                id: "UVF-Manager".into(),
                attributes: attrs(&[
                    ("uvfID", s("uvf-1")),
                    ("uvCount", n(0.0)),
                    ("fleetPlan", s("")),
                    ("fleetPerformance", n(0.0)),
                ]),
            }],
        );
        let count = rng.random_range(1..6);
        for i in 0..count {
            let class = classes[rng.random_range(0..classes.len())];
            let id = format!("{class}-{round}-{i}");
            store.instances.entry(class.to_string()).or_default().push(Instance {
                id: id.clone(),
                attributes: attrs(&[
                    ("uvID", s(&id)),
                    ("task", s("")),
                    ("status", s("Idle")),
                    ("performance", n(rng.random_range(0..101) as f64)),
                ]),
            });
            store.links.push(Link {
                kind: crate::model::RelationshipKind::Aggregation,
                source: "UVF-Manager".into(),
                target: id,
            });
        }
        assert_eq!(check_invariants(&model, &store, &constraints), vec![]);

        // Copy an existing uvID into a fresh instance.
        let victim = format!("{}-{round}-0", classes[0]);
        let dup_id = store
            .instances_of_kind(&model, "UV")
            .iter()
            .find(|i| i.id != victim)
            .map(|i| i.attributes["uvID"].render())
            .unwrap_or_else(|| victim.clone());
        store.instances.entry("UAV".into()).or_default().push(Instance {
            id: format!("intruder-{round}"),
            attributes: attrs(&[
                ("uvID", s(&dup_id)),
                ("task", s("")),
                ("status", s("Idle")),
                ("performance", n(50.0)),
            ]),
        });
        store.links.push(Link {
            kind: crate::model::RelationshipKind::Aggregation,
            source: "UVF-Manager".into(),
            target: format!("intruder-{round}"),
        });
        let violations = check_invariants(&model, &store, &constraints);
        assert!(!violations.is_empty(), "round {round}: duplicate id must violate");
    }
}
