use parimarket_wasm::{decode, settle, simulate};
use serde_json::Value;

fn parse(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

const RACE: &str = r#"{
  "schema_version": 1,
  "environment": {"kind": "iid_categorical", "probabilities": [0.6, 0.4]},
  "agents": [
    {"strategy": {"kind": "truth_teller"}, "initial_wealth": 1.0},
    {"strategy": {"kind": "constant", "allocation": [0.4, 0.6]}, "initial_wealth": 1.0}
  ],
  "rounds": 1000,
  "seed": 5
}"#;

#[test]
fn settle_matches_hand_computed_payouts() {
    // shares 1/2 each, both stake everything; column sums are 3/4 and 1/4
    let out = parse(
        &settle(r#"{"wealth":[1,1],"bets":[{"stake":1,"allocation":[0.5,0.5]},{"stake":1,"allocation":[1,0]}],"outcome":[1,0]}"#)
            .unwrap(),
    );
    assert_eq!(out["valid"], true);
    let f = |v: &Value, i: usize| v[i].as_f64().unwrap();
    assert!((f(&out["forecast"], 0) - 0.75).abs() < 1e-15);
    assert!((f(&out["wealth_after"], 0) - 1.0 / 3.0).abs() < 1e-15);
    assert!((f(&out["wealth_after"], 1) - 2.0 / 3.0).abs() < 1e-15);
    assert!((f(&out["log_growth"], 1) - (4.0f64 / 3.0).ln()).abs() < 1e-15);
}

#[test]
fn settle_reports_invalid_profiles() {
    // nobody with full support stakes anything
    let out = parse(&settle(r#"{"wealth":[1,1],"bets":[{"stake":1,"allocation":[1,0]},{"stake":1,"allocation":[0,1]}],"outcome":[1,0]}"#).unwrap());
    assert_eq!(out["valid"], false);
    assert!(!out["reasons"].as_str().unwrap().is_empty());
    assert!(settle(r#"{"wealth":[1],"bets":[],"outcome":[1,0],"extra":1}"#).is_err());
}

#[test]
fn simulate_downsamples_and_ranks_the_truth_teller_first() {
    let out = parse(&simulate(RACE, 101).unwrap());
    let rounds: Vec<u64> = out["rounds"].as_array().unwrap().iter().map(|r| r.as_u64().unwrap()).collect();
    assert_eq!(rounds.first(), Some(&0));
    assert_eq!(rounds.last(), Some(&999));
    assert!(rounds.len() <= 101);
    assert_eq!(out["log_wealth"].as_array().unwrap().len(), 2);
    assert_eq!(out["verdicts"][0], "SURVIVED");
    let last_lw = |m: usize| out["log_wealth"][m].as_array().unwrap().last().unwrap().as_f64().unwrap();
    assert!(last_lw(0) > last_lw(1));
    assert_eq!(simulate(RACE, 101).unwrap(), simulate(RACE, 101).unwrap());
}

#[test]
fn simulate_rejects_bad_configs() {
    assert!(simulate(&RACE.replace("\"rounds\": 1000", "\"rounds\": 0"), 10).unwrap_err().contains("rounds"));
    assert!(simulate(&RACE.replace("\"rounds\": 1000", "\"rounds\": 10000000"), 10).is_err());
}

#[test]
fn decode_bounded_mean() {
    let out = parse(&decode(r#"{"kind":"bounded_mean","offset":-1,"width":2}"#, &[0.75, 0.25]).unwrap());
    assert!((out["value"].as_f64().unwrap() - 0.5).abs() < 1e-15);
    assert!(decode(r#"{"kind":"nope"}"#, &[0.5, 0.5]).is_err());
}

#[test]
fn page_presets_are_valid_configs() {
    let agents = [
        r#"[{"strategy":{"kind":"truth_teller"},"initial_wealth":1},
            {"strategy":{"kind":"noisy_truth_teller","c":0.1,"alpha":1},"initial_wealth":1},
            {"strategy":{"kind":"noisy_truth_teller","c":0.5,"alpha":0.25,"non_survivor":true},"initial_wealth":1}]"#,
        r#"[{"strategy":{"kind":"empirical_learner","prior_weight":1},"initial_wealth":1},
            {"strategy":{"kind":"constant","allocation":[0.4,0.3,0.3]},"initial_wealth":1}]"#,
    ];
    for a in agents {
        let config = format!(
            r#"{{"schema_version":1,"seed":7,"rounds":300,"environment":{{"kind":"iid_categorical","probabilities":[0.5,0.3,0.2]}},"agents":{a}}}"#
        );
        assert!(parse(&simulate(&config, 50).unwrap())["log_wealth"].is_array(), "{a}");
    }
    let markov = RACE.replace(
        r#"{"kind": "iid_categorical", "probabilities": [0.6, 0.4]}"#,
        r#"{"kind": "markov", "transition": [[0.9, 0.1], [0.2, 0.8]], "emissions": [[1, 0], [0, 1]]}"#,
    );
    assert_eq!(parse(&simulate(&markov, 50).unwrap())["verdicts"][0], "SURVIVED");
}
