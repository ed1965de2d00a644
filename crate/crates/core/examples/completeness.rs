//! Informational completeness of the fiducial/germ design, from the rank
//! of a sketched Jacobian at the target gate set.

use spinqubit::gst::completeness::jacobian_rank;
use spinqubit::gst::model::GateSet;
use spinqubit::gst::Design;

fn main() -> spinqubit::Result<()> {
    let design = Design::standard(2)?;
    let r = jacobian_rank(&GateSet::target(), &design, 1600, 9);
    println!("rank {} of {} expected, gap {:.1e}, complete {}", r.rank, r.expected_rank, r.gap, r.complete(1e3));
    Ok(())
}
