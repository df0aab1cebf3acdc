use std::sync::Arc;

use scriptoria::document::{binarize_auto, load_gray};
use scriptoria::features::{feature_distance, MeasureId, NormalizationMode};
use scriptoria::layout::{analyze, redetect_words, LayoutConfig, SoOverrides};
use scriptoria::matcher::{search_template, Embedder, EmbeddingNetwork, MatcherConfig, TemplateQuery};
use scriptoria::pipeline::{features_from_measures, measure_document};
use scriptoria::synth::{generate, generate_document, GenConfig, Spread, StripePlan, WriterProfile};

#[test]
fn png_round_trip_reproduces_generated_layout() {
    let (img, gt) = generate_document(&WriterProfile::example(), 9, 4, 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("page.png");
    img.to_gray().save_png(&path).unwrap();
    let (back, b) = binarize_auto(&load_gray(&path).unwrap());
    assert_eq!(back, img);
    assert_eq!(b.method, "otsu");
    let layout = analyze(&back, &LayoutConfig::default());
    let measured = layout.measures();
    let expected = gt.expected_measures();
    assert_eq!(measured.middle_heights, expected.middle_heights);
    assert_eq!(measured.word_gaps, expected.word_gaps);
}

#[test]
fn feature_vector_json_shape() {
    let (img, _) = generate_document(&WriterProfile::example(), 2, 3, 3).unwrap();
    let layout = analyze(&img, &LayoutConfig::default());
    let (m, _) = measure_document(&img, &layout, &[], &MatcherConfig::default(), &Embedder::PixelFallback).unwrap();
    let fv = features_from_measures("doc-1", &m, NormalizationMode::Raw).unwrap();
    let v: serde_json::Value = serde_json::to_value(&fv).unwrap();
    assert_eq!(v["doc_id"], "doc-1");
    assert_eq!(v["mode"], "raw");
    let ids: Vec<&str> = v["entries"].as_array().unwrap().iter().map(|e| e["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["upper", "middle", "lower", "word_gap"]);
    assert!(v["entries"][0]["mean"].is_f64() && v["entries"][0]["std"].is_f64());
}

#[test]
fn scale_invariant_mode_cancels_resolution() {
    let profile = WriterProfile {
        middle_height: Spread::new(32.0, 0.8),
        word_gap: Spread::new(40.0, 2.0),
        ..WriterProfile::example()
    };
    let base = GenConfig {
        lines: 5,
        words_per_line: 5,
        canvas_width: 1200,
        canvas_height: 700,
        ..GenConfig::default()
    };
    let double = GenConfig { scale: 2, ..base.clone() };
    let fv = |cfg: &GenConfig, mode| {
        let (img, _) = generate(&profile, 4, cfg).unwrap();
        let layout = analyze(&img, &LayoutConfig::default());
        let (m, _) = measure_document(&img, &layout, &[], &MatcherConfig::default(), &Embedder::PixelFallback).unwrap();
        features_from_measures("d", &m, mode).unwrap()
    };
    let (a, b) = (fv(&base, NormalizationMode::ScaleInvariant), fv(&double, NormalizationMode::ScaleInvariant));
    for (ea, eb) in a.entries.iter().zip(&b.entries) {
        assert_eq!(ea.id, eb.id);
        assert!((ea.mean - eb.mean).abs() <= 0.02, "{} {} {}", ea.id, ea.mean, eb.mean);
    }
    let (raw_a, raw_b) = (fv(&base, NormalizationMode::Raw), fv(&double, NormalizationMode::Raw));
    let raw = feature_distance(&raw_a, &raw_b).unwrap().0;
    let inv = feature_distance(&a, &b).unwrap().0;
    assert!(inv < raw / 10.0, "raw {raw} invariant {inv}");
}

#[test]
fn larger_so_never_adds_words() {
    let (img, _) = generate_document(&WriterProfile::example(), 6, 4, 6).unwrap();
    let layout = analyze(&img, &LayoutConfig::default());
    let mut prev = usize::MAX;
    for so in [1, 5, 10, 20, 40, 80] {
        let l = redetect_words(&img, &layout, &SoOverrides::global(so)).unwrap();
        assert!(l.word_count() <= prev);
        prev = l.word_count();
        assert_eq!(redetect_words(&img, &layout, &SoOverrides::global(so)).unwrap(), l);
    }
}

#[test]
fn network_embedder_finds_planted_copies() {
    let cfg = GenConfig {
        lines: 3,
        words_per_line: 3,
        canvas_width: 800,
        canvas_height: 400,
        stripes: Some(StripePlan::standard(2, 6)),
        ..GenConfig::default()
    };
    let (img, gt) = generate(&WriterProfile::example(), 8, &cfg).unwrap();
    let bands: Vec<_> = analyze(&img, &LayoutConfig::default()).lines.iter().map(|l| l.band).collect();
    let t = TemplateQuery::from_document("d", &img, gt.stripes[0].template, "s").unwrap();
    let net = Embedder::Network(Arc::new(EmbeddingNetwork::random([4, 8, 16], 1)));
    let found = search_template(&img, &bands, &t, &MatcherConfig::default(), &net).unwrap();
    let windows: Vec<_> = found.iter().map(|m| m.window).collect();
    for st in &gt.stripes {
        assert!(windows.contains(&st.template));
    }
}

#[test]
fn template_occurrences_become_features() {
    let cfg = GenConfig {
        lines: 4,
        words_per_line: 3,
        canvas_width: 800,
        canvas_height: 500,
        stripes: Some(StripePlan::standard(2, 6)),
        ..GenConfig::default()
    };
    let (img, gt) = generate(&WriterProfile::example(), 3, &cfg).unwrap();
    let layout = analyze(&img, &LayoutConfig::default());
    let t = TemplateQuery::from_document("d", &img, gt.stripes[0].template, "s").unwrap();
    let (m, found) = measure_document(&img, &layout, &[t], &MatcherConfig::default(), &Embedder::PixelFallback).unwrap();
    assert_eq!(found[0].matches.len(), 2);
    let fv = features_from_measures("d", &m, NormalizationMode::Raw).unwrap();
    let h = fv.get(&MeasureId::char_height("s")).unwrap();
    assert_eq!((h.mean, h.std), (12.0, 0.0));
    let w = fv.get(&MeasureId::char_width("s")).unwrap();
    assert_eq!((w.mean, w.std), (20.0, 0.0));
}
