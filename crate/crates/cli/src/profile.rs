use std::fmt::Write;

use fk_hetero::lattice::{box_sites, Axis, Configuration};
use fk_hetero::LocalPotential;

use crate::{CliError, StoredSolve};

/// Average of `u` over the level-1 slab `{i_1 = i}` (one period of every
/// other axis).
fn slab_average(u: &Configuration, i: i64) -> f64 {
    let ranges: Vec<(i64, i64)> = u
        .domain()
        .axes()
        .iter()
        .enumerate()
        .map(|(a, axis)| match *axis {
            _ if a == 0 => (i, i),
            Axis::Periodic { period } => (0, period - 1),
            Axis::Hetero { .. } => (0, 0),
        })
        .collect();
    let sites = box_sites(&ranges);
    sites.iter().map(|s| u.lookup(s)).sum::<f64>() / sites.len() as f64
}

/// Plot data: `i,slab_avg,v_ref,w_ref` for level 1 and an `i1,i2,value`
/// grid for higher levels (other axes at 0).
pub fn profile_csv(p: &LocalPotential, stored: &StoredSolve) -> Result<String, CliError> {
    let u = &stored.result.minimizer;
    let level = stored.result.level;
    let r = p.range() as i64;
    let mut out = String::new();
    if level == 1 {
        out.push_str("i,slab_avg,v_ref,w_ref\n");
        let (lo, hi) = u.domain().axis(0).range();
        for i in lo - r..=hi + r {
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e}",
                i,
                slab_average(u, i),
                slab_average(&stored.gap.v, i),
                slab_average(&stored.gap.w, i)
            );
        }
    } else {
        if u.dim() < 2 {
            return Err(CliError::config("grid profiles need dimension at least 2"));
        }
        out.push_str("i1,i2,value\n");
        let (lo1, hi1) = u.domain().axis(0).range();
        let (lo2, hi2) = u.domain().axis(1).range();
        let mut site = vec![0; u.dim()];
        for i1 in lo1..=hi1 {
            for i2 in lo2..=hi2 {
                site[0] = i1;
                site[1] = i2;
                let _ = writeln!(out, "{},{},{:.16e}", i1, i2, u.lookup(&site));
            }
        }
    }
    Ok(out)
}
