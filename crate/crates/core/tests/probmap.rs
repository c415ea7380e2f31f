use proptest::prelude::*;
use servobench_core::ProbabilityMap;

fn map() -> impl Strategy<Value = ProbabilityMap> {
    (1usize..40, 1usize..40).prop_flat_map(|(w, h)| {
        prop::collection::vec(0.0..=1.0f32, w * h).prop_map(move |v| ProbabilityMap::new(w, h, v).unwrap())
    })
}

proptest! {
    #[test]
    fn pfm_roundtrip_is_bit_exact(m in map()) {
        let back = ProbabilityMap::read_pfm(&m.to_pfm_bytes()[..]).unwrap();
        prop_assert_eq!(back.width(), m.width());
        for (a, b) in back.scores().iter().zip(m.scores()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn pgm_roundtrip_within_quantization(m in map()) {
        let mut bytes = Vec::new();
        m.write_pgm(&mut bytes).unwrap();
        let back = ProbabilityMap::read_pgm(&bytes[..]).unwrap();
        for (a, b) in back.scores().iter().zip(m.scores()) {
            prop_assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }
}

#[test]
fn load_dispatches_on_magic() {
    let dir = std::env::temp_dir().join(format!("probmap-load-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let m = ProbabilityMap::new(2, 1, vec![0.25, 1.0]).unwrap();
    std::fs::write(dir.join("a.pfm"), m.to_pfm_bytes()).unwrap();
    assert_eq!(ProbabilityMap::load(dir.join("a.pfm")).unwrap(), m);
    std::fs::write(dir.join("b.bin"), b"XX").unwrap();
    assert!(ProbabilityMap::load(dir.join("b.bin")).is_err());
    std::fs::remove_dir_all(dir).ok();
}
