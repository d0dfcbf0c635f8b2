use std::time::Instant;

use eegconn::connectivity::OrderingMethod;
use eegconn::experiment::{
    run_cv, shuffle_trial_labels, CvConfig, FeatureConfig, FeatureExtractor, FeatureKind, PlantedCorpus,
};
use eegconn::io::ElectrodeLayout;
use eegconn::nn::{ModelKind, TrainConfig};

fn main() -> eegconn::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let feature: FeatureKind = args.get(1).map(String::as_str).unwrap_or("plv").parse()?;
    let epochs: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(10);
    let null_seed: Option<u64> = args.get(3).map(|s| s.parse().unwrap());
    let t0 = Instant::now();
    let band = std::env::var("PLANT_BAND").ok().map(|b| b.parse().unwrap()).unwrap_or(eegconn::dsp::bands::BandName::LowAlpha);
    let corpus = PlantedCorpus { band, ..PlantedCorpus::default() }.generate()?;
    println!("synth {:.1}s", t0.elapsed().as_secs_f64());
    let t0 = Instant::now();
    let ex = FeatureExtractor::new(FeatureConfig::new(feature, OrderingMethod::Dist2), ElectrodeLayout::deap32())?;
    let mut recs = Vec::new();
    for (t, r) in corpus.iter().enumerate() {
        recs.extend(ex.extract(r, t as i32)?);
    }
    println!("features {} in {:.1}s", recs.len(), t0.elapsed().as_secs_f64());
    if let Some(s) = null_seed {
        recs = shuffle_trial_labels(&recs, s)?;
    }
    let t0 = Instant::now();
    let cfg = CvConfig::new(ModelKind::Cnn2, TrainConfig { epochs, ..TrainConfig::default() }, 0);
    let out = run_cv::<f32>(&recs, &cfg)?;
    for f in &out.report.folds {
        println!("fold {} acc {:.4} last train loss {:.4}", f.fold, f.accuracy, f.history.epochs.last().unwrap().train_loss);
    }
    println!("mean {:.4} in {:.1}s", out.report.mean_accuracy, t0.elapsed().as_secs_f64());
    Ok(())
}
