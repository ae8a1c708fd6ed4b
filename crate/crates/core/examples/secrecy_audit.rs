//! Brute force over the shared pool: answers reveal nothing about other
//! messages.

use hetdapac::audit::{audit_db_secrecy, DEFAULT_CAP};
use hetdapac::{AttributeVector, Engine, SchemeKind, SystemParams};

fn main() -> hetdapac::Result<()> {
    let cases = [
        (SchemeKind::Het1, SystemParams::new(3, 2, 2, 3, 2)?, "1,2,2"),
        (SchemeKind::Dapac, SystemParams::new(3, 3, 2, 2, 3)?, "2,1,2"),
        (SchemeKind::Het2, SystemParams::new(4, 3, 2, 2, 6)?, "1,2,1,2"),
    ];
    for (kind, params, v) in cases {
        let engine = Engine::new(kind, &params)?;
        let v = AttributeVector::parse(v, &params)?;
        let o = audit_db_secrecy(&engine, &v, 0, DEFAULT_CAP)?;
        println!(
            "{kind} {params}: max TV {} over {} store pairs, {} pool assignments",
            o.max_tv, o.perturbations, o.pool_assignments
        );
    }
    Ok(())
}
