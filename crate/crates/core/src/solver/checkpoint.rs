//! Binary checkpoint of the solver state (fields plus per-quadrature-point
//! internal variables), enabling restart mid-schedule.
//!
//! Layout (little endian): magic `MAPCHK01`, then `t`, counts
//! (nodes, pressure dofs, potential flag, elements, points/element,
//! branches/point), then the field vectors, then per point
//! `cbar_inv_n (9) j_n (1)` and per branch `value_n (9) rate_n (9)`.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::solver::newton::{SolverError, Stepper};
use crate::tensor::Tensor2;

const MAGIC: &[u8; 8] = b"MAPCHK01";

pub fn save_checkpoint(stepper: &Stepper, path: &Path) -> Result<(), SolverError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_f64::<LittleEndian>(stepper.t)?;
    w.write_u64::<LittleEndian>(stepper.dofs.n_nodes as u64)?;
    w.write_u64::<LittleEndian>(stepper.dofs.n_pressure as u64)?;
    w.write_u8(u8::from(stepper.dofs.coupled))?;
    w.write_u64::<LittleEndian>(stepper.qp_states.len() as u64)?;
    let per_elem = stepper.qp_states.first().map_or(0, Vec::len);
    w.write_u64::<LittleEndian>(per_elem as u64)?;
    for v in &stepper.fields.u {
        w.write_f64::<LittleEndian>(*v)?;
    }
    for v in &stepper.fields.p {
        w.write_f64::<LittleEndian>(*v)?;
    }
    for v in &stepper.fields.phi {
        w.write_f64::<LittleEndian>(*v)?;
    }
    for qps in &stepper.qp_states {
        for qp in qps {
            w.write_u64::<LittleEndian>(qp.branches.len() as u64)?;
            for c in qp.cbar_inv_n.0 {
                w.write_f64::<LittleEndian>(c)?;
            }
            w.write_f64::<LittleEndian>(qp.j_n)?;
            for b in &qp.branches {
                for c in b.value_n.0 {
                    w.write_f64::<LittleEndian>(c)?;
                }
                for c in b.rate_n.0 {
                    w.write_f64::<LittleEndian>(c)?;
                }
            }
        }
    }
    Ok(())
}

/// Restores a checkpoint into a freshly built stepper. The stepper must have
/// been created from the same problem (the counts are verified).
pub fn load_checkpoint(stepper: &mut Stepper, path: &Path) -> Result<(), SolverError> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(SolverError::CheckpointFormat(
            "bad magic (not a mapfem checkpoint)".into(),
        ));
    }
    let t = r.read_f64::<LittleEndian>()?;
    let n_nodes = r.read_u64::<LittleEndian>()? as usize;
    let n_pressure = r.read_u64::<LittleEndian>()? as usize;
    let coupled = r.read_u8()? != 0;
    let n_elems = r.read_u64::<LittleEndian>()? as usize;
    let per_elem = r.read_u64::<LittleEndian>()? as usize;
    if n_nodes != stepper.dofs.n_nodes
        || n_pressure != stepper.dofs.n_pressure
        || coupled != stepper.dofs.coupled
        || n_elems != stepper.qp_states.len()
        || stepper.qp_states.first().map_or(0, Vec::len) != per_elem
    {
        return Err(SolverError::CheckpointFormat(
            "checkpoint does not match the problem discretisation".into(),
        ));
    }
    stepper.t = t;
    for v in &mut stepper.fields.u {
        *v = r.read_f64::<LittleEndian>()?;
    }
    for v in &mut stepper.fields.p {
        *v = r.read_f64::<LittleEndian>()?;
    }
    for v in &mut stepper.fields.phi {
        *v = r.read_f64::<LittleEndian>()?;
    }
    for qps in &mut stepper.qp_states {
        for qp in qps {
            let nb = r.read_u64::<LittleEndian>()? as usize;
            if nb != qp.branches.len() {
                return Err(SolverError::CheckpointFormat(
                    "branch count mismatch".into(),
                ));
            }
            let read_tensor = |r: &mut dyn Read| -> Result<Tensor2, std::io::Error> {
                let mut t = Tensor2::ZERO;
                for c in &mut t.0 {
                    *c = r.read_f64::<LittleEndian>()?;
                }
                Ok(t)
            };
            qp.cbar_inv_n = read_tensor(&mut r)?;
            qp.j_n = r.read_f64::<LittleEndian>()?;
            qp.cbar_inv_np1 = qp.cbar_inv_n;
            qp.j_np1 = qp.j_n;
            for b in &mut qp.branches {
                b.value_n = read_tensor(&mut r)?;
                b.rate_n = read_tensor(&mut r)?;
                b.value_np1 = b.value_n;
                b.rate_np1 = b.rate_n;
            }
        }
    }
    Ok(())
}
