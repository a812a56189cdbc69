//! Sigma-delta encoding of one tactile recording, its staircase
//! reconstruction and the event file formats.

use tactile_snn::event_codec::{bin_events, encode, io, mse, reconstruct, BinningConfig, EncoderConfig};
use tactile_snn::harness::synth_dataset;

fn main() -> tactile_snn::Result<()> {
    let data = synth_dataset(4, 1, 3)?;
    let seq = &data.samples[3];
    println!("letter `{}`: {} taxels × {} frames", data.class_names[seq.label()], seq.n_taxels(), seq.n_frames());

    for threshold in [1.0, 2.0, 5.0] {
        let cfg = EncoderConfig::new(threshold);
        let events = encode(seq, &cfg)?;
        let rec = reconstruct(&events, &cfg, seq.n_frames(), seq.sampling_rate_hz())?;
        let binned = bin_events(&events, &BinningConfig::new(3.0))?;
        println!(
            "ϑ = {threshold:>3}: {:>3} events ({} ON / {} OFF), MSE {:.3}, {} set bits in {} bins of 3 ms",
            events.len(),
            events.count(tactile_snn::event_codec::Polarity::On),
            events.count(tactile_snn::event_codec::Polarity::Off),
            mse(seq.values(), &rec)?,
            binned.total_spikes(),
            binned.n_steps()
        );
    }

    let events = encode(seq, &EncoderConfig::new(2.0))?;
    let text = io::to_text(&events);
    println!("\ntext form:\n{}", text.lines().take(6).collect::<Vec<_>>().join("\n"));
    assert_eq!(io::from_text(&text)?, events);
    assert_eq!(io::from_binary(&io::to_binary(&events))?, events);
    Ok(())
}
