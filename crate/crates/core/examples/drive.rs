// End-to-end drive of the library pipeline on fresh parameters: operators,
// orbit averages, zero data, gauge pair, JSON out. Used by the repo's verify
// recipe; keep it runnable.
use sgsov_core::averages::{
    a_neq_d_gap, average_monodromy, entry_averages, gauge_coefficients, recursion_residual,
};
use sgsov_core::model::{build_monodromy, transfer};
use sgsov_core::params::sample_twisted;
use sgsov_core::spectrum::{diagonalize_transfer, simplicity_gap};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = sample_twisted(1, 1, 2, 20260816);
    let mono = build_monodromy(&params)?;
    let t = transfer(&params)?;
    println!("transfer window: {:?}", t.window());
    let (_, off) = entry_averages(&params, &mono)?;
    println!("worst off-scalar part of the orbit products: {off:.3e}");
    let avg = average_monodromy(&params)?;
    println!(
        "zero pairs: {}, margin {:.3e}, diagonal gap {:.3e}",
        avg.z_list.len(),
        avg.zero_margin,
        a_neq_d_gap(&avg)
    );
    let rep = recursion_residual(&params, 1)?;
    println!(
        "cut residuals: entry {:.3e}, value {:.3e}, factor {:.3e}, shift {:.3e}",
        rep.entry_residual,
        rep.value_residual,
        rep.factor_residual,
        rep.shift_residual.unwrap_or(f64::NAN)
    );
    let g = gauge_coefficients(&params, &avg)?;
    println!(
        "gauge pair: {} roots, avg residuals {:.3e}/{:.3e}, separations {:.3e}/{:.3e}",
        g.z.len(),
        g.avg_a_residual,
        g.avg_d_residual,
        g.pair_separation,
        g.cross_separation
    );
    println!("{}", serde_json::to_string_pretty(&g.to_json())?);
    let records = diagonalize_transfer(&params)?;
    let worst = records
        .iter()
        .map(|r| r.residual)
        .fold(0.0f64, f64::max);
    println!(
        "spectrum: {} states, simplicity gap {:.3e}, worst residual {:.3e}, sectors {:?}",
        records.len(),
        simplicity_gap(&records),
        worst,
        records.iter().map(|r| r.theta_k).collect::<Vec<_>>()
    );
    Ok(())
}
