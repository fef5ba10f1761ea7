use proptest::prelude::*;
use uavchan_core::citygen::{generate_city, generate_link, OracleConfig};
use uavchan_core::pathcodec::{decode_nlos, encode_nlos, fit_codec_scalers};
use uavchan_core::validate_record;

fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % 360.0;
    d.min(360.0 - d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Encoding then decoding a NLOS path set with scalers fitted on the same
    /// data reproduces every present path.
    #[test]
    fn codec_round_trip(seed in any::<u64>()) {
        let city = generate_city(&OracleConfig::default(), 60, seed).unwrap();
        let codec = fit_codec_scalers(&city).unwrap();
        for r in &city.records {
            let nlos = r.paths.without_los();
            let y = encode_nlos(&nlos, &r.condition, &codec).unwrap();
            prop_assert!(y.iter().all(|v| (-1.0..=1.0).contains(v)));
            let back = decode_nlos(&y, &r.condition, &codec, 0.01).unwrap();
            prop_assert_eq!(nlos.present().count(), back.present().count());
            for (p, q) in nlos.entries.iter().zip(&back.entries) {
                prop_assert!((p.loss_db - q.loss_db).abs() < 1e-9);
                prop_assert!(angle_diff(p.aoa_az_deg, q.aoa_az_deg) < 1e-9);
                prop_assert!(angle_diff(p.aod_az_deg, q.aod_az_deg) < 1e-9);
                prop_assert!((p.aoa_el_deg - q.aoa_el_deg).abs() < 1e-9);
                prop_assert!((p.aod_el_deg - q.aod_el_deg).abs() < 1e-9);
                prop_assert!((p.delay_s - q.delay_s).abs() < 1e-15);
            }
        }
    }

    /// Link `i` of a city depends only on the seed and `i`, and every oracle
    /// record is valid.
    #[test]
    fn city_links_are_index_keyed(seed in any::<u64>(), i in 0u64..40) {
        let city = generate_city(&OracleConfig::default(), 40, seed).unwrap();
        let alone = generate_link(&OracleConfig::default(), seed, i).unwrap();
        prop_assert_eq!(&city.records[i as usize], &alone);
        prop_assert!(validate_record(&alone).is_valid());
    }
}
