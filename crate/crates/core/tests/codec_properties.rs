use ndarray::Array2;
use proptest::prelude::*;
use tactile_snn::event_codec::{
    analysis::analyze_encoding, bin_events, encode, input_copies, io, mse, reconstruct, BinningConfig, EncoderConfig,
    FrameSequence, Polarity,
};

fn signal() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0u8..=255, 2..40).prop_map(|v| v.into_iter().map(f64::from).collect())
}

fn multi_taxel() -> impl Strategy<Value = FrameSequence> {
    (1usize..4, 2usize..30).prop_flat_map(|(taxels, frames)| {
        prop::collection::vec(0u8..=255, taxels * frames).prop_map(move |v| {
            let values = Array2::from_shape_vec((taxels, frames), v.into_iter().map(f64::from).collect()).unwrap();
            FrameSequence::new(values, 40.0, 0).unwrap()
        })
    })
}

fn one_taxel(v: &[f64]) -> FrameSequence {
    FrameSequence::from_frames(&v.iter().map(|&x| vec![x]).collect::<Vec<_>>(), 40.0, 0).unwrap()
}

proptest! {
    #[test]
    fn reconstruction_stays_within_one_threshold(v in signal(), theta in prop::sample::select(vec![1.0, 2.0, 3.5, 5.0, 10.0])) {
        // Rest-at-zero recordings, as in the tactile data.
        let mut v = v;
        v[0] = 0.0;
        let seq = one_taxel(&v);
        let cfg = EncoderConfig::new(theta);
        let rec = reconstruct(&encode(&seq, &cfg).unwrap(), &cfg, seq.n_frames(), 40.0).unwrap();
        for (a, b) in seq.values().iter().zip(rec.iter()) {
            prop_assert!((a - b).abs() < theta, "{a} vs {b}");
        }
    }

    #[test]
    fn integer_signals_are_lossless_at_unit_threshold(v in signal()) {
        let mut v = v;
        v[0] = 0.0;
        let seq = one_taxel(&v);
        let cfg = EncoderConfig::new(1.0);
        let rec = reconstruct(&encode(&seq, &cfg).unwrap(), &cfg, seq.n_frames(), 40.0).unwrap();
        prop_assert_eq!(mse(seq.values(), &rec).unwrap(), 0.0);
    }

    #[test]
    fn coarser_thresholds_emit_fewer_events(seq in multi_taxel()) {
        let counts: Vec<usize> = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|&t| encode(&seq, &EncoderConfig::new(t)).unwrap().len())
            .collect();
        for w in counts.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn events_are_sorted_and_inside_the_window(seq in multi_taxel(), theta in 1.0f64..20.0) {
        let s = encode(&seq, &EncoderConfig::new(theta)).unwrap();
        for w in s.events().windows(2) {
            prop_assert!(w[0].time_s <= w[1].time_s);
        }
        for e in s.events() {
            prop_assert!(e.time_s > 0.0 && e.time_s < seq.duration_s());
        }
    }

    #[test]
    fn scaling_signal_and_threshold_together_changes_nothing(v in signal(), k in prop::sample::select(vec![2.0, 4.0, 0.5])) {
        let scaled: Vec<f64> = v.iter().map(|x| x * k).collect();
        prop_assume!(scaled.iter().all(|x| *x <= 255.0));
        let a = encode(&one_taxel(&v), &EncoderConfig::new(1.0)).unwrap();
        let b = encode(&one_taxel(&scaled), &EncoderConfig::new(k)).unwrap();
        prop_assert_eq!(a.events(), b.events());
    }

    #[test]
    fn returning_signals_balance_polarities(v in signal()) {
        let mut v = v;
        let first = v[0];
        v.push(first);
        let s = encode(&one_taxel(&v), &EncoderConfig::new(2.0)).unwrap();
        let on = s.count(Polarity::On) as i64;
        let off = s.count(Polarity::Off) as i64;
        prop_assert!((on - off).abs() <= 1);
    }

    #[test]
    fn binning_never_creates_events(seq in multi_taxel(), theta in 1.0f64..10.0, bin in prop::sample::select(vec![0.5, 1.0, 3.0, 5.0, 10.0, 25.0])) {
        let s = encode(&seq, &EncoderConfig::new(theta)).unwrap();
        let b = bin_events(&s, &BinningConfig::new(bin)).unwrap();
        prop_assert!(b.total_spikes() <= s.len());
        // every channel with events keeps at least one bit
        let counts = s.channel_counts();
        for (ch, &c) in counts.iter().enumerate() {
            let bits = (0..b.n_steps()).filter(|&t| b.get(t, ch)).count();
            prop_assert!(bits <= c);
            prop_assert_eq!(bits == 0, c == 0);
        }
    }

    #[test]
    fn per_bin_counts_sum_to_the_event_total(seq in multi_taxel(), bin in prop::sample::select(vec![1.0, 3.0, 5.0])) {
        let s = encode(&seq, &EncoderConfig::new(1.0)).unwrap();
        let cfg = BinningConfig::new(bin);
        let n = cfg.n_bins(s.duration_s());
        let mut per_bin = vec![0usize; n];
        for e in s.events() {
            per_bin[cfg.bin_index(e.time_s)] += 1;
        }
        prop_assert_eq!(per_bin.iter().sum::<usize>(), s.len());
    }

    #[test]
    fn event_files_roundtrip(seq in multi_taxel(), theta in 1.0f64..8.0) {
        let s = encode(&seq, &EncoderConfig::new(theta)).unwrap();
        prop_assert_eq!(&io::from_binary(&io::to_binary(&s)).unwrap(), &s);
        prop_assert_eq!(&io::from_text(&io::to_text(&s)).unwrap(), &s);
    }

    #[test]
    fn copies_repeat_channels(seq in multi_taxel(), copies in 1usize..5) {
        let s = encode(&seq, &EncoderConfig::new(1.0)).unwrap();
        let b = bin_events(&s, &BinningConfig::new(5.0)).unwrap();
        let c = input_copies(&b, copies).unwrap();
        prop_assert_eq!(c.n_channels(), b.n_channels() * copies);
        prop_assert_eq!(c.total_spikes(), b.total_spikes() * copies);
    }
}

#[test]
fn compression_and_error_are_monotone_over_a_dataset() {
    let data = tactile_snn::harness::synth_dataset(5, 4, 3).unwrap();
    let r = analyze_encoding(&data.samples, &[1.0, 2.0, 5.0, 10.0], &[1.0], 1000).unwrap();
    assert_eq!(r[0].compression_ratio, 1.0);
    assert_eq!(r[0].reconstruction_mse, 0.0);
    for w in r.windows(2) {
        assert!(w[1].compression_ratio >= w[0].compression_ratio);
        assert!(w[1].reconstruction_mse >= w[0].reconstruction_mse);
    }
}

#[test]
fn worked_encoder_example() {
    let s = encode(&one_taxel(&[0.0, 3.0, 3.0, 1.0]), &EncoderConfig::new(2.0)).unwrap();
    assert_eq!(s.len(), 1);
    assert_eq!(s.events()[0].polarity, Polarity::On);
    assert!(s.events()[0].time_s > 0.0 && s.events()[0].time_s < 0.025);
}
