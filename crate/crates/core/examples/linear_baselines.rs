//! One-vs-rest linear classifiers on raw frames, time-collapsed frames and
//! event features, plus accuracy as more frames are revealed.

use tactile_snn::baselines::{incremental_frames_curve, run_baseline, BaselineMode, BaselineOptions};
use tactile_snn::harness::synth_dataset;

fn main() -> tactile_snn::Result<()> {
    let data = synth_dataset(10, 30, 0)?;
    let opts = BaselineOptions::default();
    for mode in [BaselineMode::Raw, BaselineMode::Collapsed, BaselineMode::Events, BaselineMode::EventBins] {
        let cv = run_baseline(&data.samples, mode, &opts)?;
        println!("{mode:?}: {:.3} ± {:.3}", cv.mean, cv.std);
    }
    println!("\nframes  time   accuracy");
    for p in incremental_frames_curve(&data.samples, &opts, 6)? {
        println!("{:>6} {:>5.2}s  {:.3} ± {:.3}", p.n_frames, p.time_s, p.mean, p.std);
    }
    Ok(())
}
