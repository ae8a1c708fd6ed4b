//! Pairwise baseline with three attributes, all verified by dedicated servers.

use hetdapac::{run_protocol, AttributeVector, MessageStore, SchemeKind, SystemParams};

fn main() -> hetdapac::Result<()> {
    let params = SystemParams::new(3, 3, 2, 65537, 3)?;
    let store = MessageStore::random(&params, 1);
    let v = AttributeVector::parse("1,2,2", &params)?;
    let out = run_protocol(SchemeKind::Dapac, &params, &v, &store, 1)?;

    for (server, symbols) in &out.metrics.per_server {
        println!("server {server}: {symbols} symbols");
    }
    println!("{}", out.metrics.summary());
    Ok(())
}
