use condcorrupt::model::MixtureModel;
use condcorrupt::score::{CorruptionForm, Perturbation};

#[test]
fn mixture_round_trips_through_json() {
    let m = MixtureModel::new(2, vec![0.25, 0.75], vec![vec![1.0, 0.0], vec![0.0, -2.0]]).unwrap();
    let text = serde_json::to_string(&m).unwrap();
    assert_eq!(serde_json::from_str::<MixtureModel>(&text).unwrap(), m);
}

#[test]
fn mixture_json_is_validated() {
    let bad_weights = r#"{"dim":1,"weights":[0.5,0.6],"means":[[0.0],[1.0]]}"#;
    assert!(serde_json::from_str::<MixtureModel>(bad_weights).is_err());
    let unknown = r#"{"dim":1,"weights":[1.0],"means":[[0.0]],"extra":1}"#;
    assert!(serde_json::from_str::<MixtureModel>(unknown).is_err());
}

#[test]
fn enum_spellings() {
    assert_eq!(serde_json::to_string(&CorruptionForm::RankOne).unwrap(), "\"rank-one\"");
    assert_eq!(serde_json::from_str::<CorruptionForm>("\"isotropic\"").unwrap(), CorruptionForm::Isotropic);
    assert_eq!(serde_json::from_str::<Perturbation>("\"uniform\"").unwrap(), Perturbation::Uniform);
}
