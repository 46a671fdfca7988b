use inr_teach::linalg::Matrix;
use inr_teach::nn::{read_weights, write_weights, Mlp, MlpArch};
use inr_teach::signals::{
    load_occupancy, parse_pnm, parse_wav, save_occupancy, write_pnm, write_wav, Modality, Signal,
    ValueScale,
};
use proptest::prelude::*;

fn pnm_bytes(magic: &str, w: usize, h: usize, pixels: &[u8]) -> Vec<u8> {
    let mut b = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    b.extend_from_slice(pixels);
    b
}

fn wav_bytes(rate: u32, samples: &[i16]) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut b = Vec::new();
    b.extend_from_slice(b"RIFF");
    b.extend_from_slice(&(36 + data_len).to_le_bytes());
    b.extend_from_slice(b"WAVEfmt ");
    b.extend_from_slice(&16u32.to_le_bytes());
    b.extend_from_slice(&1u16.to_le_bytes());
    b.extend_from_slice(&1u16.to_le_bytes());
    b.extend_from_slice(&rate.to_le_bytes());
    b.extend_from_slice(&(rate * 2).to_le_bytes());
    b.extend_from_slice(&2u16.to_le_bytes());
    b.extend_from_slice(&16u16.to_le_bytes());
    b.extend_from_slice(b"data");
    b.extend_from_slice(&data_len.to_le_bytes());
    for s in samples {
        b.extend_from_slice(&s.to_le_bytes());
    }
    b
}

fn image_case() -> impl Strategy<Value = (bool, usize, usize, Vec<u8>)> {
    (any::<bool>(), 1usize..9, 1usize..9).prop_flat_map(|(color, w, h)| {
        let n = w * h * if color { 3 } else { 1 };
        (Just(color), Just(w), Just(h), prop::collection::vec(any::<u8>(), n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pnm_round_trip_is_byte_identical((color, w, h, px) in image_case()) {
        let bytes = pnm_bytes(if color { "P6" } else { "P5" }, w, h, &px);
        let s = parse_pnm(&bytes).unwrap();
        prop_assert_eq!(s.len(), w * h);
        prop_assert_eq!(s.channels(), if color { 3 } else { 1 });
        prop_assert_eq!(write_pnm(&s).unwrap(), bytes);
    }

    #[test]
    fn wav_round_trip_is_exact(rate in 1u32..96_000, samples in prop::collection::vec(any::<i16>(), 1..200)) {
        let bytes = wav_bytes(rate, &samples);
        let s = parse_wav(&bytes).unwrap();
        prop_assert_eq!(s.sample_rate, Some(rate));
        let again = parse_wav(&write_wav(&s).unwrap()).unwrap();
        prop_assert_eq!(again.values, s.values);
    }

    #[test]
    fn parsers_never_panic_on_garbage(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = parse_pnm(&bytes);
        let _ = parse_wav(&bytes);
        let _ = read_weights(&bytes[..]);
    }

    #[test]
    fn truncated_files_are_rejected((color, w, h, px) in image_case(), cut in 1usize..8) {
        let bytes = pnm_bytes(if color { "P6" } else { "P5" }, w, h, &px);
        let keep = bytes.len().saturating_sub(cut.min(px.len()));
        prop_assert!(parse_pnm(&bytes[..keep]).is_err());
        let wav = wav_bytes(8000, &[1, 2, 3, 4]);
        prop_assert!(parse_wav(&wav[..wav.len() - cut.min(8)]).is_err());
    }

    #[test]
    fn wav_values_within_one_lsb(values in prop::collection::vec(-1.0f64..1.0, 1..64)) {
        let s = Signal {
            modality: Modality::Audio1D,
            coords: Matrix::zeros(values.len(), 1),
            values: Matrix::column(&values).unwrap(),
            shape: vec![values.len()],
            value_scale: ValueScale::PCM16,
            sample_rate: Some(16_000),
        };
        let back = parse_wav(&write_wav(&s).unwrap()).unwrap();
        for (a, b) in values.iter().zip(back.values.as_slice()) {
            prop_assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }

    #[test]
    fn weights_round_trip_bit_identical(seed in any::<u64>(), w in 1usize..10, d in 2usize..5) {
        for arch in [MlpArch::siren(2, 1, w, d), MlpArch::ffn(3, 2, w, d, 4, 1.5)] {
            let mlp = Mlp::init(arch, seed).unwrap();
            let mut buf = Vec::new();
            write_weights(&mlp, &mut buf).unwrap();
            let back = read_weights(&buf[..]).unwrap();
            prop_assert_eq!(back.params(), mlp.params());
            prop_assert_eq!(back.arch(), mlp.arch());
            let x = Matrix::from_fn(3, arch.in_dim, |i, j| (i as f64 - j as f64) / 4.0);
            prop_assert_eq!(back.forward(&x).unwrap(), mlp.forward(&x).unwrap());
        }
    }
}

#[test]
fn hand_checked_pixel_values() {
    let s = parse_pnm(&pnm_bytes("P5", 2, 2, &[0, 255, 128, 64])).unwrap();
    let v = s.values.as_slice();
    assert_eq!(v[0], -1.0);
    assert_eq!(v[1], 1.0);
    assert!((v[2] - (2.0 * 128.0 / 255.0 - 1.0)).abs() < 1e-15);
    assert!((v[3] - (2.0 * 64.0 / 255.0 - 1.0)).abs() < 1e-15);
    let one = parse_pnm(&pnm_bytes("P5", 1, 1, &[7])).unwrap();
    assert_eq!(one.coords.row(0), &[0.0, 0.0]);
}

#[test]
fn pcm_extremes() {
    let s = parse_wav(&wav_bytes(8000, &[-32768, 32767, 0])).unwrap();
    assert_eq!(s.values.as_slice(), &[-1.0, 32767.0 / 32768.0, 0.0]);
}

#[test]
fn occupancy_round_trip_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.raw");
    let occ: Vec<u8> = (0..60).map(|i| (i % 3 == 0) as u8).collect();
    save_occupancy(&[3, 4, 5], &occ, &path).unwrap();
    let (dims, back) = load_occupancy(&path).unwrap();
    assert_eq!(dims, vec![3, 4, 5]);
    assert_eq!(back, occ);
    assert!(save_occupancy(&[3, 4, 4], &occ, &path).is_err());
}

#[test]
fn unsupported_variants_are_errors() {
    // 16-bit PGM and ASCII PGM
    assert!(parse_pnm(b"P5\n1 1\n65535\n\x00\x00").is_err());
    assert!(parse_pnm(b"P2\n1 1\n255\n0\n").is_err());
    // 8-bit WAV
    let mut w = wav_bytes(8000, &[0, 0]);
    w[34] = 8;
    assert!(parse_wav(&w).is_err());
}
