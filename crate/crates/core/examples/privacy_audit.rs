//! Exact attribute-privacy check of every server for each scheme.

use hetdapac::audit::{audit_privacy_all, DEFAULT_CAP};
use hetdapac::{Engine, SchemeKind, SystemParams};

fn main() -> hetdapac::Result<()> {
    let cases = [
        (SchemeKind::Het1, SystemParams::new(3, 2, 2, 3, 2)?),
        (SchemeKind::Dapac, SystemParams::new(3, 3, 2, 2, 3)?),
        (SchemeKind::Het2, SystemParams::new(4, 3, 2, 2, 6)?),
    ];
    for (kind, params) in cases {
        let engine = Engine::new(kind, &params)?;
        for o in audit_privacy_all(&engine, DEFAULT_CAP)? {
            println!(
                "{kind} {params} server {}: max TV {} over {} pairs",
                o.server, o.max_tv, o.pairs
            );
        }
    }
    Ok(())
}
