use scriptoria::matcher::{EmbeddingNetwork, Layer};
use scriptoria::Error;

/// Writes a file byte by byte, independent of the library encoder.
fn encode(widths: [usize; 3], fill: impl Fn(usize) -> f32) -> (Vec<u8>, Vec<f32>) {
    let mut out = b"HWNET1".to_vec();
    out.push(1);
    out.extend(8u32.to_le_bytes());
    let mut values = Vec::new();
    let mut k = 0;
    let mut put = |out: &mut Vec<u8>, n: usize| {
        for _ in 0..n {
            let v = fill(k);
            k += 1;
            values.push(v);
            out.extend(v.to_le_bytes());
        }
    };
    let mut in_ch = 1;
    for w in widths {
        out.push(1);
        out.extend(4u32.to_le_bytes());
        for d in [w, in_ch, 3, 3] {
            out.extend((d as u32).to_le_bytes());
        }
        put(&mut out, w * in_ch * 9 + w);
        out.push(2);
        out.extend(2u32.to_le_bytes());
        out.extend(2u32.to_le_bytes());
        out.extend(2u32.to_le_bytes());
        in_ch = w;
    }
    for (o, i) in [(128, widths[2]), (36, 128)] {
        out.push(3);
        out.extend(2u32.to_le_bytes());
        out.extend((o as u32).to_le_bytes());
        out.extend((i as u32).to_le_bytes());
        put(&mut out, o * i + o);
    }
    (out, values)
}

#[test]
fn hand_written_file_loads_and_reencodes_identically() {
    let (bytes, values) = encode([2, 3, 4], |k| (k as f32 * 0.37).sin() * 0.5);
    let net = EmbeddingNetwork::from_bytes(&bytes).unwrap();
    assert_eq!(net.conv_widths(), vec![2, 3, 4]);
    let mut loaded = Vec::new();
    for layer in net.layers() {
        if let Layer::Conv { weights, bias, .. } | Layer::Dense { weights, bias, .. } = layer {
            loaded.extend_from_slice(weights);
            loaded.extend_from_slice(bias);
        }
    }
    assert_eq!(loaded, values);
    assert_eq!(net.to_bytes(), bytes);
}

#[test]
fn every_truncation_is_an_io_error() {
    let (bytes, _) = encode([1, 1, 1], |_| 0.25);
    for cut in [0, 3, 6, 7, 10, 11, 20, bytes.len() - 1] {
        match EmbeddingNetwork::from_bytes(&bytes[..cut]) {
            Err(Error::Io { source, .. }) => {
                assert_eq!(source.kind(), std::io::ErrorKind::UnexpectedEof)
            }
            other => panic!("cut at {cut}: {other:?}"),
        }
    }
}

#[test]
fn trailing_bytes_rejected() {
    let (mut bytes, _) = encode([1, 1, 1], |_| 0.25);
    bytes.push(0);
    assert!(matches!(
        EmbeddingNetwork::from_bytes(&bytes),
        Err(Error::Format(_))
    ));
}

#[test]
fn bundled_probe_weights_are_reproducible() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/probe.hwnet");
    let bytes = std::fs::read(path).unwrap();
    assert_eq!(bytes, EmbeddingNetwork::random([4, 8, 16], 2024).to_bytes());
    let net = EmbeddingNetwork::load(path).unwrap();
    assert_eq!(net.embedding(&[0.5; 784]).len(), 128);
    assert!(net.classify(&[0.5; 784]) < 36);
}

#[test]
fn missing_file_names_the_path() {
    match EmbeddingNetwork::load("/nonexistent/w.hwnet") {
        Err(Error::Io { path, .. }) => assert!(path.ends_with("w.hwnet")),
        other => panic!("{other:?}"),
    }
}
