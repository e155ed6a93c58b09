//! Global unknown numbering: interleaved displacements first, then pressures
//! at the corner nodes, then (for coupled problems) potentials at all nodes.

use crate::fem::mesh::MixedMesh;

#[derive(Debug, Clone)]
pub struct DofMap {
    pub n_nodes: usize,
    /// Pressure slot per node (corner nodes only).
    pub pressure_slot: Vec<Option<usize>>,
    pub n_pressure: usize,
    pub coupled: bool,
    pub total: usize,
}

impl DofMap {
    pub fn build(mesh: &MixedMesh, coupled: bool) -> Self {
        let n_nodes = mesh.n_nodes();
        let mut pressure_slot = vec![None; n_nodes];
        let mut n_pressure = 0;
        for e in &mesh.elems_p {
            for &n in e {
                if pressure_slot[n].is_none() {
                    pressure_slot[n] = Some(n_pressure);
                    n_pressure += 1;
                }
            }
        }
        let total = 3 * n_nodes + n_pressure + if coupled { n_nodes } else { 0 };
        DofMap {
            n_nodes,
            pressure_slot,
            n_pressure,
            coupled,
            total,
        }
    }

    #[inline]
    pub fn u_dof(&self, node: usize, comp: usize) -> usize {
        3 * node + comp
    }

    #[inline]
    pub fn p_dof(&self, node: usize) -> usize {
        3 * self.n_nodes + self.pressure_slot[node].expect("node carries no pressure dof")
    }

    #[inline]
    pub fn p_dof_by_slot(&self, slot: usize) -> usize {
        3 * self.n_nodes + slot
    }

    #[inline]
    pub fn phi_dof(&self, node: usize) -> usize {
        debug_assert!(self.coupled);
        3 * self.n_nodes + self.n_pressure + node
    }
}
