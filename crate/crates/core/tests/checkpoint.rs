use cropgan_core::networks::build;
use cropgan_core::{Checkpoint, Error, Role, Tensor, BANDS, TIMESTEPS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn saved_networks_predict_identically() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for role in Role::ALL {
        let ck = Checkpoint::new(build(role, 5), 17).with_meta("seed", 5);
        let path = dir.path().join(format!("{}.ckpt", role.tag()));
        ck.save(&path).unwrap();
        let back = Checkpoint::load_role(&path, role).unwrap();
        assert_eq!(back.epoch, 17);
        assert_eq!(back.metadata.get("seed").map(String::as_str), Some("5"));
        for _ in 0..25 {
            let n = rng.random_range(1..5);
            let x = Tensor::from_fn(&[n, TIMESTEPS, BANDS, 1], |_| rng.random());
            let a = ck.network.predict(&x).unwrap();
            let b = back.network.predict(&x).unwrap();
            assert_eq!(a.data(), b.data(), "{role}");
        }
    }
}

#[test]
fn truncated_files_are_format_errors() {
    let bytes = Checkpoint::new(build(Role::DiscriminatorY, 1), 3).to_bytes().unwrap();
    for cut in [0, 3, 6, 11, 20, bytes.len() / 2, bytes.len() - 1] {
        assert!(
            matches!(Checkpoint::from_bytes(&bytes[..cut]), Err(Error::Format { .. })),
            "cut at {cut}"
        );
    }
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(matches!(Checkpoint::from_bytes(&extra), Err(Error::Format { .. })));
    let mut bad_magic = bytes;
    bad_magic[0] ^= 0xff;
    assert!(matches!(Checkpoint::from_bytes(&bad_magic), Err(Error::Format { offset: 0, .. })));
}

#[test]
fn wrong_role_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.ckpt");
    Checkpoint::new(build(Role::GeneratorF, 0), 0).save(&path).unwrap();
    assert!(matches!(Checkpoint::load_role(&path, Role::GeneratorG), Err(Error::Usage(_))));
    assert!(matches!(Checkpoint::load(&dir.path().join("missing.ckpt")), Err(Error::Io(_))));
}
