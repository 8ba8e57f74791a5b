//! Library-level round trip: train, checkpoint, reload, infer, evaluate.

use keygrid::data::{DatasetSource, SynthFamilyParams};
use keygrid::evaluation::{das_all_pairs, predict_records};
use keygrid::model::{KeyGrid, ModelConfig};
use keygrid::training::{load_checkpoint, read_log, train, TrainConfig, LOG_FILE};

fn config(dir: &std::path::Path) -> TrainConfig {
    let mut model = ModelConfig::small(96, 5);
    model.level_widths = vec![8, 12, 12, 16];
    model.propagation_widths = vec![8, 8, 12, 12];
    model.decoder_widths = vec![12, 12, 8, 8, 8];
    model.segment_hidden = 8;
    model.grid_size = 8;
    let mut cfg = TrainConfig {
        epochs: 3,
        batch_size: 3,
        model,
        loss: keygrid::losses::LossConfig::for_keypoints(5),
        output_dir: dir.to_path_buf(),
        ..Default::default()
    };
    cfg.loss.warmup_epochs = 2;
    cfg.dataset.points = 96;
    cfg.dataset.source = DatasetSource::Synthetic(SynthFamilyParams { frames: 6, points: 96, magnitude: 0.4, ..Default::default() });
    cfg.dataset.split = [0.5, 0.0, 0.5];
    cfg
}

#[test]
fn train_reload_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let path = train(cfg.clone()).unwrap();
    let log = read_log(&dir.path().join(LOG_FILE)).unwrap();
    assert_eq!(log.iter().map(|e| e.epoch).collect::<Vec<_>>(), vec![0, 1, 2]);
    assert_eq!(log[1].l_total, log[1].l_far);
    assert!(log.iter().all(|e| e.l_total.is_finite()));

    let ckpt = load_checkpoint(&path).unwrap();
    assert_eq!(ckpt.epoch, 3);
    assert_eq!(ckpt.history, log);
    assert!(ckpt.params.all_finite());
    let model = KeyGrid::with_params(ckpt.config.model.clone(), ckpt.params).unwrap();
    let data = keygrid::data::load_dataset(&cfg.dataset).unwrap();
    let test: Vec<_> = data.test.iter().map(|&i| data.shapes[i].clone()).collect();
    let records = predict_records(&model, &test).unwrap();
    let report = das_all_pairs(&records, 0.1).unwrap();
    assert!((0.0..=100.0).contains(&report.score));
    assert_eq!(report.pairs.len(), test.len() * (test.len() - 1) / 2);
}
