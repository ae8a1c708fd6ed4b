//! Central-heavy scheme: rate 1/(K+1) at load ratio 1/(KD), for a few sizes.

use hetdapac::access::message_index;
use hetdapac::{run_protocol, AttributeVector, MessageStore, SchemeKind, SystemParams};

fn main() -> hetdapac::Result<()> {
    for (n, d, k) in [(3, 2, 2), (4, 3, 2), (5, 4, 3)] {
        let params = SystemParams::new(n, d, k, 65537, 2 * d)?;
        let store = MessageStore::random(&params, 9);
        let v = AttributeVector::all(&params).remove(params.message_count() / 2);
        let out = run_protocol(SchemeKind::Het1, &params, &v, &store, 9)?;
        assert_eq!(out.message, store.message(message_index(&v, &params)?)?);
        println!("{params} v*={v}: {}", out.metrics.summary());
    }
    Ok(())
}
