use std::ffi::CString;
use std::ptr;

use amicus_ip::corpus::{generate_synthetic, save_corpus, SynthConfig};
use amicus_ip::ipmodel::{putil_factor, vote_logit, CaseParams, JusticeParams, ModelKind};
use amicus_ip_ffi::*;

fn last_error() -> String {
    unsafe {
        let n = amip_last_error(ptr::null_mut(), 0);
        let mut buf = vec![0 as std::ffi::c_char; n + 1];
        amip_last_error(buf.as_mut_ptr(), buf.len());
        std::ffi::CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn logit_and_putil_match_the_library() {
    let psi = [0.5, -1.0, 2.0];
    let theta = [0.2, 0.3, 0.5];
    let dp = [0.6, 0.2, 0.2];
    let k = AmipCaseParams { a: 0.1, b: 1.5, c_p: -0.7, c_r: 2.0 };
    let mut out = 0.0;
    let status = unsafe {
        amip_vote_logit(psi.as_ptr(), 3, theta.as_ptr(), dp.as_ptr(), ptr::null(), 3, k, AmipModelKind::Amici, &mut out)
    };
    assert_eq!(status, AmipStatus::Ok);
    let kappa = CaseParams::new(0.1, 1.5, -0.7, 2.0);
    let expect = vote_logit(&psi, &theta, Some(&dp), None, &kappa, ModelKind::Amici).unwrap();
    assert_eq!(out, expect);
    assert!((amip_vote_prob(out, AmipSide::Petitioner) + amip_vote_prob(out, AmipSide::Respondent) - 1.0).abs() < 1e-15);

    let psi_all = [0.5, -1.0, 2.0, -0.3, 0.8, 0.1];
    let status = unsafe {
        amip_putil_factor(psi_all.as_ptr(), 2, theta.as_ptr(), dp.as_ptr(), 3, k, AmipSide::Respondent, 1.0, &mut out)
    };
    assert_eq!(status, AmipStatus::Ok);
    let bench = [JusticeParams::new(psi_all[..3].to_vec()), JusticeParams::new(psi_all[3..].to_vec())];
    let expect = putil_factor(&bench, &theta, &dp, &kappa, amicus_ip::Side::Respondent, 1.0).unwrap();
    assert_eq!(out, expect);
}

#[test]
fn errors_are_reported_not_raised() {
    let theta = [0.5, 0.5];
    let psi = [1.0, 2.0, 3.0];
    let k = AmipCaseParams { a: 0.0, b: 1.0, c_p: 0.0, c_r: 0.0 };
    let mut out = 0.0;
    let s = unsafe { amip_vote_logit(psi.as_ptr(), 3, theta.as_ptr(), ptr::null(), ptr::null(), 2, k, AmipModelKind::Issues, &mut out) };
    assert_eq!(s, AmipStatus::InvalidArgument);
    assert!(!last_error().is_empty());
    let s = unsafe { amip_vote_logit(ptr::null(), 3, theta.as_ptr(), ptr::null(), ptr::null(), 2, k, AmipModelKind::Issues, &mut out) };
    assert_eq!(s, AmipStatus::NullPointer);
    assert!(last_error().contains("psi"));

    let mut corpus = ptr::null_mut();
    let missing = CString::new("/nonexistent/corpus.jsonl").unwrap();
    assert_eq!(unsafe { amip_corpus_load(missing.as_ptr(), &mut corpus) }, AmipStatus::Io);
    assert!(corpus.is_null());
    unsafe { amip_corpus_free(ptr::null_mut()) };
}

#[test]
fn pairwise_accuracy_examples() {
    use AmipSide::{Petitioner as P, Respondent as R};
    let unanimous = [P; 9];
    let eight_one = [P, P, P, P, P, P, P, P, R];
    let mut out = 0.0;
    assert_eq!(unsafe { amip_pairwise_accuracy(unanimous.as_ptr(), eight_one.as_ptr(), 9, &mut out) }, AmipStatus::Ok);
    assert!((out - 28.0 / 36.0).abs() < 1e-15);
    assert_eq!(unsafe { amip_pairwise_accuracy(unanimous.as_ptr(), eight_one.as_ptr(), 1, &mut out) }, AmipStatus::InvalidArgument);
}

#[test]
fn handles_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig { num_cases: 12, num_topics: 2, vocab_size: 30, tokens_per_doc: 20, ..Default::default() };
    let (corpus, truth) = generate_synthetic(&cfg, 3).unwrap();
    let corpus_path = dir.path().join("corpus.jsonl");
    let mix_path = dir.path().join("mix.json");
    let fit_path = dir.path().join("fit.json");
    save_corpus(&corpus, &corpus_path).unwrap();
    truth.mixtures(&corpus).save(&mix_path).unwrap();
    let c = |p: &std::path::Path| CString::new(p.to_str().unwrap()).unwrap();

    unsafe {
        let mut h_corpus = ptr::null_mut();
        let mut h_mix = ptr::null_mut();
        let mut h_fit = ptr::null_mut();
        assert_eq!(amip_corpus_load(c(&corpus_path).as_ptr(), &mut h_corpus), AmipStatus::Ok);
        assert_eq!(amip_corpus_num_cases(h_corpus), 12);
        assert_eq!(amip_corpus_num_justices(h_corpus), 9);
        assert_eq!(amip_mixtures_load(c(&mix_path).as_ptr(), &mut h_mix), AmipStatus::Ok);
        assert_eq!(amip_fit_run(h_corpus, h_mix, AmipModelKind::Amici, 3, 11, &mut h_fit), AmipStatus::Ok);
        assert_eq!(amip_fit_num_justices(h_fit), 9);
        let mut kind = AmipModelKind::Issues;
        assert_eq!(amip_fit_kind(h_fit, &mut kind), AmipStatus::Ok);
        assert_eq!(kind, AmipModelKind::Amici);
        let mut psi = [0.0; 2];
        assert_eq!(amip_fit_ideal_point(h_fit, 0, psi.as_mut_ptr(), 2), AmipStatus::Ok);
        assert!(psi.iter().all(|v| v.is_finite()));
        assert_eq!(amip_fit_ideal_point(h_fit, 0, psi.as_mut_ptr(), 1), AmipStatus::InvalidArgument);
        assert_eq!(amip_fit_save(h_fit, c(&fit_path).as_ptr()), AmipStatus::Ok);

        let mut h_fit2 = ptr::null_mut();
        assert_eq!(amip_fit_load(c(&fit_path).as_ptr(), &mut h_fit2), AmipStatus::Ok);
        let id = CString::new(corpus.cases[0].id.as_str()).unwrap();
        let mut part_a = [AmipSide::Petitioner; 9];
        let mut part_b = [AmipSide::Petitioner; 9];
        let mut marg = [0.0; 9];
        assert_eq!(
            amip_predict_case(h_fit, h_mix, id.as_ptr(), AmipKeep::All, 64, 5, part_a.as_mut_ptr(), marg.as_mut_ptr(), 9),
            AmipStatus::Ok
        );
        assert_eq!(
            amip_predict_case(h_fit2, h_mix, id.as_ptr(), AmipKeep::All, 64, 5, part_b.as_mut_ptr(), ptr::null_mut(), 9),
            AmipStatus::Ok
        );
        assert_eq!(part_a, part_b);
        assert!(marg.iter().all(|m| (0.0..=1.0).contains(m)));
        let bad = CString::new("no-such-case").unwrap();
        assert_eq!(
            amip_predict_case(h_fit, h_mix, bad.as_ptr(), AmipKeep::All, 64, 5, part_a.as_mut_ptr(), ptr::null_mut(), 9),
            AmipStatus::InvalidArgument
        );

        amip_fit_free(h_fit2);
        amip_fit_free(h_fit);
        amip_mixtures_free(h_mix);
        amip_corpus_free(h_corpus);
    }
}

#[test]
fn header_declares_every_export() {
    let src = include_str!("../src/lib.rs");
    let header = include_str!("../include/amicus_ip.h");
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .filter_map(|rest| rest.split('(').next())
        .collect();
    assert!(exports.len() >= 15);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    let v = unsafe { std::ffi::CStr::from_ptr(amip_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
