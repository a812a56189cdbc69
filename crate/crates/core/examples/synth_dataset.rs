//! Generate seeded synthetic Braille recordings and store them in both
//! dataset formats.

use tactile_snn::harness::{load_dataset, synth_dataset, DatasetFormat};

fn main() -> tactile_snn::Result<()> {
    let data = synth_dataset(27, 3, 42)?;
    println!("{} samples, classes {:?}", data.len(), data.class_names);
    let s = &data.samples[1];
    for t in 0..3 {
        let row: Vec<String> = s.taxel(t).iter().map(|v| format!("{v:>2}")).collect();
        println!("letter b, taxel {t}: {}", row.join(""));
    }
    let dir = std::env::temp_dir();
    for (name, fmt) in [("synth.tsd", DatasetFormat::Binary), ("synth.csv", DatasetFormat::Csv)] {
        let path = dir.join(name);
        data.save(&path, fmt)?;
        let back = load_dataset(&path, fmt, 40.0, None)?;
        assert_eq!(back.samples, data.samples);
        println!("{} sha256 {}", path.display(), back.provenance.checksum.unwrap());
    }
    Ok(())
}
