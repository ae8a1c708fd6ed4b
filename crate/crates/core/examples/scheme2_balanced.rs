//! Balanced scheme on the cyclic pair design and on a hand-picked one.

use hetdapac::harness::run_protocol_with;
use hetdapac::{AttributeVector, MessageStore, PairPartition, RunOptions, SchemeKind, SystemParams};

fn main() -> hetdapac::Result<()> {
    let params = SystemParams::new(4, 3, 2, 65537, 6)?;
    let store = MessageStore::random(&params, 3);
    let v = AttributeVector::parse("1,2,1,2", &params)?;
    let out = run_protocol_with(SchemeKind::Het2, &params, &v, &store, 3, &RunOptions::default())?;
    println!("cyclic design: {}", out.metrics.summary());

    let params = SystemParams::new(4, 4, 2, 65537, 10)?;
    let store = MessageStore::random(&params, 3);
    let v = AttributeVector::parse("2,1,1,2", &params)?;
    let design = PairPartition::from_design(4, &[(1, 2), (1, 3), (2, 4), (3, 4)])?;
    let opts = RunOptions {
        partition: Some(design),
        ..RunOptions::default()
    };
    let out = run_protocol_with(SchemeKind::Het2, &params, &v, &store, 3, &opts)?;
    println!("design 12,13,24,34: {}", out.metrics.summary());
    Ok(())
}
