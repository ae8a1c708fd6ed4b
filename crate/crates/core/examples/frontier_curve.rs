//! Prints the curve table for D=4, K=3 as CSV.

use hetdapac::mix::{frontier, write_curve_csv};

fn main() -> hetdapac::Result<()> {
    let (d, k, grid) = (4, 3, 8);
    let rows = frontier(d, k, grid)?;
    write_curve_csv(std::io::stdout().lock(), d, k, grid, &rows)?;
    Ok(())
}
