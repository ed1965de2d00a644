//! H2 dissociation curve from the one-parameter ansatz, noiseless and with
//! gate and readout noise.

use spinqubit::device::DeviceModel;
use spinqubit::dynamics::NoiseSpec;
use spinqubit::gates::{ideal_params, GateCompiler};
use spinqubit::gst::model::SpamModel;
use spinqubit::vqe::{curve_minimum, dissociation_curve, CoefficientTable, ReadoutModel, VqeConfig};

fn main() -> spinqubit::Result<()> {
    let table = CoefficientTable::reference()?;
    let m = DeviceModel::reference();
    let c = GateCompiler::new(m.clone(), ideal_params(&m)?)?;
    let gs = c.gate_set(&NoiseSpec::from_model(&m, 7), 100, &SpamModel::perfect())?;

    let clean = dissociation_curve(&table, &VqeConfig::noiseless())?;
    let noisy = dissociation_curve(&table, &VqeConfig::noisy(gs, ReadoutModel::reference(), 10_000, 3))?;
    println!("R(A)    E_exact     E_clean     E_noisy");
    for (a, b) in clean.iter().zip(&noisy) {
        println!("{:.3}  {:+.6}  {:+.6}  {:+.6}", a.r_angstrom, a.e_exact_hartree, a.e_vqe_hartree, b.e_vqe_hartree);
    }
    let (mc, mn) = (curve_minimum(&clean).expect("rows"), curve_minimum(&noisy).expect("rows"));
    println!("minimum: clean {:.4} A, noisy {:.4} A", mc.r_angstrom, mn.r_angstrom);
    Ok(())
}
