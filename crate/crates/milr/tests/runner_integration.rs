//! Runner-level contracts: determinism of outputs, checkpoint/resume
//! transparency, decision-log replay, and the CSV surfaces.

use std::path::Path;

use milr::runner::{
    emit_comparison, emit_csv, parse_csv, records_to_csv, resume_with_batch_size, run_experiment,
    DataKind, EpochRecord, PolicyKind, RunCheckpoint, RunConfig,
};
use milr::scheduler::Branch;

/// Small, fast blob run used by most tests here.
fn small_config(out: &Path) -> RunConfig {
    let mut cfg = RunConfig {
        seed: 41,
        epochs: 8,
        out_dir: out.to_path_buf(),
        ..RunConfig::default()
    };
    cfg.data.kind = DataKind::Blobs;
    cfg.data.n_per_class = 100;
    cfg.data.class_count = 4;
    cfg.data.dim = 8;
    cfg.data.separation = 2.5;
    cfg.network.hidden = vec![16, 8];
    cfg.optimizer.batch_size = 32;
    cfg.probe.size = 200;
    cfg.probe.k = 4;
    cfg.policy.kind = PolicyKind::DynamicChangeValue;
    cfg.policy.desired_lr = 0.01;
    cfg.checkpoint.every = 4;
    cfg
}

#[test]
fn fixed_policy_produces_constant_lr_records() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(&tmp.path().join("fixed"));
    cfg.epochs = 2;
    cfg.policy.kind = PolicyKind::Fixed;
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.records.len(), 2);
    for r in &out.records {
        assert_eq!(r.lrs, vec![0.01]);
        assert_eq!(r.branches, vec![Branch::Scheduled]);
    }
    // one reference for the whole run
    assert!(out.records.windows(2).all(|w| w[0].ixy == w[1].ixy));
}

#[test]
fn warmup_policy_follows_linear_schedule() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(&tmp.path().join("warmup"));
    cfg.epochs = 8;
    cfg.policy.kind = PolicyKind::Warmup;
    cfg.policy.warmup_epochs = 5;
    let out = run_experiment(&cfg).unwrap();
    let lrs: Vec<f64> = out.records.iter().map(|r| r.lrs[0]).collect();
    let (lr0, target) = (0.001, 0.01);
    for (e, &lr) in lrs.iter().enumerate() {
        let expect = if e >= 5 {
            target
        } else {
            lr0 + (target - lr0) * e as f64 / 5.0
        };
        assert!((lr - expect).abs() < 1e-15, "epoch {e}: {lr} vs {expect}");
    }
}

#[test]
fn resume_without_changes_splices_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let base_cfg = small_config(&tmp.path().join("base"));
    let base = run_experiment(&base_cfg).unwrap();
    // cadence 4 over 8 epochs: checkpoints after epochs 3 and 7
    let ck_path = base_cfg.out_dir.join("checkpoint_epoch_0003.json");
    assert!(ck_path.exists());

    let mut resumed_cfg = base_cfg.clone();
    resumed_cfg.out_dir = tmp.path().join("resumed");
    let resumed = resume_with_batch_size(
        &resumed_cfg,
        &ck_path,
        base_cfg.optimizer.batch_size,
        0,
    )
    .unwrap();

    assert_eq!(resumed.records.len(), 4);
    let tail: Vec<EpochRecord> = base.records[4..].to_vec();
    assert_eq!(records_to_csv(&tail), records_to_csv(&resumed.records));
}

#[test]
fn resume_rejects_corrupted_and_mismatched_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let base_cfg = small_config(&tmp.path().join("base"));
    run_experiment(&base_cfg).unwrap();
    let ck_path = base_cfg.out_dir.join("checkpoint_epoch_0003.json");

    // corrupted file fails before any training
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, b"{ nope").unwrap();
    let mut cfg = base_cfg.clone();
    cfg.out_dir = tmp.path().join("r1");
    assert!(matches!(
        resume_with_batch_size(&cfg, &bad, 32, 0),
        Err(milr::Error::Checkpoint(_))
    ));

    // architecture mismatch is a contract error
    let mut cfg = base_cfg.clone();
    cfg.out_dir = tmp.path().join("r2");
    cfg.network.hidden = vec![16, 9];
    assert!(matches!(
        resume_with_batch_size(&cfg, &ck_path, 32, 0),
        Err(milr::Error::Contract(_))
    ));
}

#[test]
fn checkpoint_beyond_configured_epochs_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let base_cfg = small_config(&tmp.path().join("base"));
    run_experiment(&base_cfg).unwrap();
    let final_ck = base_cfg.out_dir.join("checkpoint_epoch_0007.json");
    let mut cfg = base_cfg.clone();
    cfg.out_dir = tmp.path().join("r");
    cfg.epochs = 8; // checkpoint already covers epoch 8
    assert!(resume_with_batch_size(&cfg, &final_ck, 32, 0).is_err());
}

#[test]
fn replaying_decision_log_reproduces_lr_column() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(&tmp.path().join("run"));
    run_experiment(&cfg).unwrap();
    let constants = cfg.constants();

    let (rec_header, rec_rows) = parse_csv(&cfg.out_dir.join("records.csv")).unwrap();
    let (dec_header, dec_rows) = parse_csv(&cfg.out_dir.join("decisions.csv")).unwrap();
    let col = |header: &[String], name: &str| {
        header.iter().position(|h| h == name).expect(name)
    };
    let lr_col = col(&rec_header, "lr");
    let branch_col = col(&dec_header, "branch");
    let d1_col = col(&dec_header, "d1");
    let lr_next_col = col(&dec_header, "lr_next");

    let mut lr = constants.lr_min;
    assert_eq!(rec_rows[0][lr_col], format!("{:.9e}", lr));
    for (e, drow) in dec_rows.iter().enumerate() {
        let branch = Branch::parse(&drow[branch_col]).expect("known branch tag");
        let d1: Option<f64> = drow[d1_col].parse().ok();
        let replayed = match branch {
            Branch::WarmHold => lr,
            Branch::ClampedMin => constants.lr_min,
            Branch::ClampedMax => constants.lr_max,
            Branch::IncreaseOnChange => lr + constants.gamma1 * d1.unwrap(),
            Branch::DecreaseOnSaturation => lr - constants.gamma2 * d1.unwrap(),
            Branch::DecreaseOnViolation => lr + constants.gamma3 * d1.unwrap(),
            Branch::Scheduled => unreachable!("dynamic run"),
        };
        let logged: f64 = drow[lr_next_col].parse().unwrap();
        assert_eq!(
            replayed.to_bits(),
            logged.to_bits(),
            "epoch {e}: replayed {replayed} vs logged {logged}"
        );
        if e + 1 < rec_rows.len() {
            assert_eq!(
                rec_rows[e + 1][lr_col],
                format!("{:.9e}", replayed),
                "epoch {}: lr column does not match the replay",
                e + 1
            );
        }
        lr = replayed;
    }
}

#[test]
fn emit_csv_contract() {
    let tmp = tempfile::tempdir().unwrap();

    // empty record list gives a header-only file
    let empty = tmp.path().join("empty.csv");
    emit_csv(&[], &empty).unwrap();
    let text = std::fs::read_to_string(&empty).unwrap();
    assert_eq!(
        text,
        "epoch,lr,train_loss,train_acc,test_loss,test_acc,ihyll,ixy,branch\n"
    );

    let records = vec![
        EpochRecord {
            epoch: 0,
            lrs: vec![0.001],
            train_loss: 1.3862943611198906,
            train_acc: 0.25,
            test_loss: 1.3912345678901234,
            test_acc: 0.2375,
            ihyll: 0.32978212190123,
            ihy_per_layer: vec![],
            ixy: 0.78881645740456,
            branches: vec![Branch::WarmHold],
            train_ms: 12.5,
            probe_ms: 80.0,
        },
        EpochRecord {
            epoch: 1,
            lrs: vec![0.0123456789012345],
            train_loss: 0.9,
            train_acc: 0.5,
            test_loss: 0.95,
            test_acc: 0.45,
            ihyll: 0.7,
            ihy_per_layer: vec![],
            ixy: 0.78881645740456,
            branches: vec![Branch::IncreaseOnChange],
            train_ms: 12.5,
            probe_ms: 80.0,
        },
    ];
    let path = tmp.path().join("r.csv");
    emit_csv(&records, &path).unwrap();

    // parse-back recovers every real to 1e-9
    let (header, rows) = parse_csv(&path).unwrap();
    assert_eq!(header.len(), 9);
    for (row, rec) in rows.iter().zip(&records) {
        let vals = [
            rec.lrs[0],
            rec.train_loss,
            rec.train_acc,
            rec.test_loss,
            rec.test_acc,
            rec.ihyll,
            rec.ixy,
        ];
        for (cell, expect) in row[1..8].iter().zip(vals) {
            let parsed: f64 = cell.parse().unwrap();
            assert!(
                (parsed - expect).abs() <= 1e-9,
                "{cell} drifted from {expect}"
            );
        }
    }

    // two emissions of the same records are byte-identical
    let path2 = tmp.path().join("r2.csv");
    emit_csv(&records, &path2).unwrap();
    assert_eq!(
        std::fs::read(&path).unwrap(),
        std::fs::read(&path2).unwrap()
    );
}

#[test]
fn comparison_merges_runs_long_format() {
    let tmp = tempfile::tempdir().unwrap();
    let mk_run = |name: &str, rows: &[&str]| {
        let dir = tmp.path().join(name);
        std::fs::create_dir_all(&dir).unwrap();
        let mut text = String::from("epoch,lr,test_acc\n");
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        std::fs::write(dir.join("records.csv"), text).unwrap();
        dir
    };
    let a = mk_run("a", &["0,0.001,0.5", "1,0.002,0.6"]);
    let b = mk_run("b", &["0,0.010,0.4"]);

    let out = tmp.path().join("cmp.csv");
    emit_comparison(&[a, b], &out).unwrap();
    let (header, rows) = parse_csv(&out).unwrap();
    assert_eq!(header, ["run", "epoch", "metric", "value"]);
    // 2 runs x 2 epochs x 2 metrics
    assert_eq!(rows.len(), 8);
    // run b has no epoch 1: explicit absent marker
    let b_epoch1: Vec<_> = rows
        .iter()
        .filter(|r| r[0] == "b" && r[1] == "1")
        .collect();
    assert_eq!(b_epoch1.len(), 2);
    assert!(b_epoch1.iter().all(|r| r[3] == "NA"));
    // single run sanity: epochs x metric count
    let a_rows = rows.iter().filter(|r| r[0] == "a").count();
    assert_eq!(a_rows, 4);
}

#[test]
fn redraw_per_epoch_keeps_single_reference() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(&tmp.path().join("redraw"));
    cfg.epochs = 3;
    cfg.probe.redraw_per_epoch = true;
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.records.len(), 3);
    assert!(out.records.windows(2).all(|w| w[0].ixy == w[1].ixy));
}

#[test]
fn run_output_files_exist_with_config_echo() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(&tmp.path().join("files"));
    cfg.epochs = 2;
    run_experiment(&cfg).unwrap();
    for f in ["records.csv", "decisions.csv", "timing.csv", "config.toml"] {
        assert!(cfg.out_dir.join(f).exists(), "{f} missing");
    }
    // the echoed config parses back to the one that ran
    let echoed = RunConfig::load(&cfg.out_dir.join("config.toml")).unwrap();
    assert_eq!(echoed, cfg);
}

#[test]
fn checkpoint_files_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(&tmp.path().join("ck"));
    cfg.epochs = 4;
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.checkpoints.len(), 1);
    let ck = RunCheckpoint::load(&out.checkpoints[0]).unwrap();
    assert_eq!(ck.nn.epochs_completed, 4);
    assert_eq!(ck.scheduler_states.len(), 1);
    assert!(ck.scheduler_states[0].ixy.is_some());
    assert!(cfg.out_dir.join("checkpoint_final.json").exists());
}

#[test]
fn layerwise_records_carry_per_layer_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(&tmp.path().join("lw"));
    cfg.epochs = 3;
    cfg.policy.kind = PolicyKind::Layerwise;
    let out = run_experiment(&cfg).unwrap();
    for r in &out.records {
        assert_eq!(r.lrs.len(), 3);
        assert_eq!(r.ihy_per_layer.len(), 3);
        assert_eq!(r.branches.len(), 3);
        assert_eq!(r.ihyll, *r.ihy_per_layer.last().unwrap());
    }
    let (header, _) = parse_csv(&cfg.out_dir.join("records.csv")).unwrap();
    for name in ["lr_0", "lr_1", "lr_2", "ihy_0", "ihy_1", "ihy_2"] {
        assert!(header.iter().any(|h| h == name), "{name} missing");
    }
    // layer-tagged decision rows
    let (dheader, drows) = parse_csv(&cfg.out_dir.join("decisions.csv")).unwrap();
    let layer_col = dheader.iter().position(|h| h == "layer").unwrap();
    assert_eq!(drows.len(), 9);
    assert!(drows.iter().any(|r| r[layer_col] == "2"));
}
