use newton_core::bank::{build_bank, default_encoder, entry_raw_features};
use newton_core::matching::{encode, predict, EncoderParams, FusionConfig};
use newton_core::store::{read_params, write_params, BankFile};
use newton_core::Error;

#[test]
fn bank_round_trips_exactly() {
    let file = build_bank(&default_encoder()).unwrap();
    let bytes = file.to_bytes().unwrap();
    assert_eq!(file.payload_len(), 66 * 10 * 64 * 4);
    let header = String::from_utf8_lossy(&bytes[..bytes.len() - 168_960]);
    assert!(header.starts_with("NEWTON-BANK 1\n"));
    assert!(header.ends_with("payload 168960\n"));
    let back = BankFile::from_bytes(&bytes).unwrap();
    assert_eq!(back, file);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bank.nbk");
    file.write(&path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), bytes);
    assert_eq!(BankFile::read(&path).unwrap(), file);
}

#[test]
fn bank_build_is_deterministic() {
    let a = build_bank(&default_encoder()).unwrap().to_bytes().unwrap();
    let b = build_bank(&default_encoder()).unwrap().to_bytes().unwrap();
    assert_eq!(a, b);
}

#[test]
fn damaged_bank_files_are_rejected() {
    let bytes = build_bank(&default_encoder()).unwrap().to_bytes().unwrap();
    let truncated = &bytes[..bytes.len() - 4];
    assert!(matches!(BankFile::from_bytes(truncated), Err(Error::Format(_))));
    let mut wrong_version = bytes.clone();
    let pos = wrong_version.iter().position(|b| *b == b'1').unwrap();
    wrong_version[pos] = b'9';
    assert!(BankFile::from_bytes(&wrong_version).is_err());
    let mut nan = bytes.clone();
    let n = nan.len();
    nan[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
    assert!(BankFile::from_bytes(&nan).is_err());
    let missing = tempfile::tempdir().unwrap().path().join("absent.nbk");
    assert!(matches!(BankFile::read(&missing), Err(Error::Storage { .. })));
}

#[test]
fn every_bank_state_retrieves_itself() {
    let file = build_bank(&default_encoder()).unwrap();
    let enc = default_encoder();
    let head = EncoderParams::zeros(10, 64, 66);
    let cfg = FusionConfig { lambda: 0.0 };
    for (entry, states) in file.bank.catalog().iter().zip(&file.states) {
        for (i, raw) in entry_raw_features(entry, states).iter().enumerate() {
            let x = encode(raw, &enc).unwrap();
            let m = predict(&x, &file.bank, &head, &cfg).unwrap();
            assert_eq!(
                (m.entry_id, m.state),
                (entry.entry_id, i + 1),
                "entry {}",
                entry.entry_id
            );
        }
    }
}

#[test]
fn params_file_round_trips() {
    let params = EncoderParams::gaussian(10, 64, 66, 5);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("enc.nprm");
    write_params(&path, &params).unwrap();
    assert_eq!(read_params(&path).unwrap(), params);
}
