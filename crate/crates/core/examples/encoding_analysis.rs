//! Event counts, compression, reconstruction error, binning loss and
//! inter-spike intervals over a dataset and a grid of thresholds and bin
//! sizes.
//!
//! `cargo run --release --example encoding_analysis -- [dataset.tsd]`

use tactile_snn::event_codec::analyze_encoding;
use tactile_snn::harness::{load_dataset, synth_dataset, DatasetFormat};

fn main() -> tactile_snn::Result<()> {
    let data = match std::env::args().nth(1) {
        Some(p) => {
            let p = std::path::PathBuf::from(p);
            load_dataset(&p, DatasetFormat::from_path(&p), 40.0, None)?
        }
        None => synth_dataset(10, 20, 0)?,
    };
    let pairs = [(1.0, 5.0), (2.0, 3.0), (5.0, 3.0), (10.0, 5.0)];
    let reports = analyze_encoding(&data.samples, &[1.0, 2.0, 5.0, 10.0], &[3.0, 5.0], 1000)?;
    println!("  ϑ  bin   events      γ       ε   binned  lost%  ISI<1ms%");
    for r in reports
        .iter()
        .filter(|r| pairs.contains(&(r.threshold, r.time_bin_size_ms)))
    {
        println!(
            "{:>3} {:>4} {:>8.2} {:>6.2} {:>7.3} {:>8.2} {:>6.2} {:>8.2}",
            r.threshold,
            r.time_bin_size_ms,
            r.mean_events_per_sample,
            r.compression_ratio,
            r.reconstruction_mse,
            r.mean_events_after_binning,
            100.0 * r.events_lost_fraction,
            100.0 * r.isi_below_1ms_fraction
        );
    }
    Ok(())
}
