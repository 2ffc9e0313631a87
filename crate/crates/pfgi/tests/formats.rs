use pfgi::pgm::{encode_pgm, grid_from_pgm, quantize, read_pgm};
use pfgi_core::Grid;
use proptest::prelude::*;

proptest! {
    #[test]
    fn pgm_round_trip(side in 1usize..20, seed in proptest::collection::vec(any::<u8>(), 400)) {
        let pixels: Vec<u8> = seed[..side * side].to_vec();
        let back = read_pgm(&encode_pgm(side, side, &pixels)[..]).unwrap();
        prop_assert_eq!(back.pixels, pixels);
        prop_assert_eq!((back.width, back.height, back.maxval), (side, side, 255));
    }

    #[test]
    fn quantize_is_monotone_and_spans_range(values in proptest::collection::vec(-1e3f64..1e3, 16)) {
        let g = Grid::from_vec(4, values.clone()).unwrap();
        let (bytes, r) = quantize(&g);
        for i in 0..16 {
            for j in 0..16 {
                if values[i] < values[j] {
                    prop_assert!(bytes[i] <= bytes[j]);
                }
            }
        }
        if r.max > r.min {
            prop_assert_eq!(*bytes.iter().min().unwrap(), 0);
            prop_assert_eq!(*bytes.iter().max().unwrap(), 255);
            // the sidecar inverts the map to within half a grey level
            for (v, b) in values.iter().zip(&bytes) {
                prop_assert!((f64::from(*b) / r.scale + r.offset - v).abs() <= 0.5 / r.scale + 1e-9);
            }
        }
    }

    #[test]
    fn eight_bit_scene_values(pixels in proptest::collection::vec(any::<u8>(), 9)) {
        let g = grid_from_pgm(&read_pgm(&encode_pgm(3, 3, &pixels)[..]).unwrap()).unwrap();
        for (v, p) in g.as_slice().iter().zip(&pixels) {
            prop_assert_eq!(*v, f64::from(*p) / 255.0);
        }
    }
}
