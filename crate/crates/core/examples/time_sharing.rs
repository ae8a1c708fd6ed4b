//! Splits every message between the baseline and the central-heavy scheme
//! and compares the measured downloads with the closed forms.

use hetdapac::mix::{mixed_downloads, rat, rate_of_lambda, run_time_shared};
use hetdapac::{AttributeVector, MessageStore, MixPlan, SystemParams};

fn main() -> hetdapac::Result<()> {
    let params = SystemParams::new(3, 3, 2, 65537, 21)?;
    let store = MessageStore::random(&params, 5);
    let v = AttributeVector::parse("2,1,2", &params)?;
    for lambda in [rat(0, 1), rat(1, 7), rat(3, 7), rat(1, 1)] {
        let plan = MixPlan::baseline_het1(lambda)?;
        let out = run_time_shared(&plan, &params, &v, &store, 5)?;
        let (ded, cen) = mixed_downloads(lambda, params.d, params.k, params.l)?;
        println!(
            "lambda {lambda}: measured {}/{} expected {ded}/{cen}, rate {} (formula {})",
            out.metrics.dedicated,
            out.metrics.central,
            out.metrics.rate,
            rate_of_lambda(lambda, params.k)?
        );
    }

    // Not every length splits: 1/4 of 12 symbols leaves 9 for a scheme that
    // needs an even count.
    let small = SystemParams::new(3, 2, 2, 65537, 12)?;
    if let Err(e) = MixPlan::baseline_het1(rat(1, 4))?.segments(&small) {
        println!("{e}");
    }
    Ok(())
}
