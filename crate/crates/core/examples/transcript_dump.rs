//! Writes a transcript as JSON lines, reads it back and recounts downloads.

use hetdapac::harness::{read_jsonl, write_jsonl};
use hetdapac::{run_protocol, AttributeVector, MessageStore, SchemeKind, SystemParams};

fn main() -> hetdapac::Result<()> {
    let params = SystemParams::new(3, 2, 2, 65537, 2)?;
    let store = MessageStore::random(&params, 7);
    let v = AttributeVector::parse("1,2,2", &params)?;
    let out = run_protocol(SchemeKind::Het1, &params, &v, &store, 7)?;

    let mut buf = Vec::new();
    write_jsonl(&mut buf, &out.transcript, Some(&out.metrics))?;
    print!("{}", String::from_utf8_lossy(&buf));

    let dump = read_jsonl(buf.as_slice())?;
    println!("# recounted downloads: {:?}", dump.downloads());
    Ok(())
}
