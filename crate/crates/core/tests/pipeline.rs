//! End-to-end pipeline tests: generated certificates must survive the
//! verifier byte-for-byte, and any single-field tampering must be caught
//! by the specific check that re-derives the field.

use howson::basegroup::{parse_instance, Instance};
use howson::constructions::{
    certify_theorem2, certify_theorem3, verify_certificate, Certificate, Certify3Options,
    CertifyOptions, Obligation, VerifyError,
};

fn doubling_endo() -> howson::endo::FreeEndo {
    match parse_instance("rank 2; a -> a^2; b -> b^2").unwrap() {
        Instance::Free(base) => base.endo().clone(),
        _ => unreachable!("spec parses as a free instance"),
    }
}

fn small_options() -> CertifyOptions {
    CertifyOptions {
        r_max: 4,
        seed: 3,
        single_complement: true,
        fp_samples: 300,
        l2_samples: 200,
        ..CertifyOptions::default()
    }
}

fn product_certificate() -> Certificate {
    let instance = parse_instance("product; A: dim 1; [[2]]; B: dim 1; [[3]]").unwrap();
    certify_theorem3(&instance, None, &Certify3Options { depth: 6, ..Certify3Options::default() })
        .unwrap()
}

#[test]
fn generated_free_base_certificate_verifies_and_round_trips() {
    let cert = certify_theorem2(&doubling_endo(), &small_options()).unwrap();
    let json = cert.to_json();
    let reparsed = Certificate::from_json(&json).unwrap();
    assert_eq!(reparsed.to_json(), json, "serialization is canonical");
    let report = verify_certificate(&reparsed).unwrap();
    assert!(report.ok(), "first failure: {:?}", report.first_failure());
}

#[test]
fn generated_product_certificate_verifies_and_round_trips() {
    let cert = product_certificate();
    let json = cert.to_json();
    let reparsed = Certificate::from_json(&json).unwrap();
    assert_eq!(reparsed.to_json(), json, "serialization is canonical");
    let report = verify_certificate(&reparsed).unwrap();
    assert!(report.ok(), "first failure: {:?}", report.first_failure());
}

#[test]
fn tampered_level_rank_is_caught_by_the_level_check() {
    let mut cert = certify_theorem2(&doubling_endo(), &small_options()).unwrap();
    cert.levels[2].rank += 1;
    let report = verify_certificate(&cert).unwrap();
    assert!(!report.ok());
    assert_eq!(report.first_failure().unwrap().name, "level_2_rank");
}

#[test]
fn corrupted_complement_word_breaks_rank_additivity() {
    let mut cert = certify_theorem2(&doubling_endo(), &small_options()).unwrap();
    // `a b a^-1` becomes `a b b^-1` = `a`, which lies in a rank-2 join with
    // the image instead of the certified rank-3 one.
    let words = cert.complement.as_mut().unwrap();
    assert_eq!(words[0], "a b a^-1");
    words[0] = "a b b^-1".to_string();
    let report = verify_certificate(&cert).unwrap();
    assert!(!report.ok());
    assert_eq!(report.first_failure().unwrap().name, "complement_rank");
}

#[test]
fn dual_expressions_may_only_name_the_complement_and_t() {
    let mut cert = certify_theorem2(&doubling_endo(), &small_options()).unwrap();
    // A base generator name is not resolvable in a dual expression, so a
    // certificate claiming membership through it must fail the level check.
    cert.levels[0].generators[0].f_expr = "a".to_string();
    let report = verify_certificate(&cert).unwrap();
    assert!(!report.ok());
    assert_eq!(report.first_failure().unwrap().name, "level_0_dual_expressions");
}

#[test]
fn tampered_power_normal_form_is_caught() {
    let mut cert = product_certificate();
    for o in &mut cert.obligations {
        if let Obligation::PowerNoncancellation { m: 3, normal_form } = o {
            assert_eq!(normal_form, "t^3 b^13");
            *normal_form = "t^3 b^12".to_string();
        }
    }
    let report = verify_certificate(&cert).unwrap();
    assert!(!report.ok());
    assert_eq!(report.first_failure().unwrap().name, "power_noncancellation");
}

#[test]
fn witness_inside_the_image_is_caught() {
    let mut cert = product_certificate();
    // b^3 = φ_B(b) lies in the image, so it cannot witness properness.
    cert.witness = Some("b^3".to_string());
    let report = verify_certificate(&cert).unwrap();
    assert!(!report.ok());
    assert_eq!(report.first_failure().unwrap().name, "witness_outside_image");
}

#[test]
fn malformed_input_is_distinguished_from_verification_failure() {
    let cert = certify_theorem2(&doubling_endo(), &small_options()).unwrap();
    let json = cert.to_json();

    // Truncated JSON cannot even be parsed.
    let truncated = &json[..json.len() / 2];
    assert!(matches!(Certificate::from_json(truncated), Err(VerifyError::Malformed(_))));

    // An unsupported schema number parses but is rejected before any check runs.
    let mut bumped = cert;
    bumped.schema = 2;
    assert!(matches!(verify_certificate(&bumped), Err(VerifyError::Malformed(_))));
}
