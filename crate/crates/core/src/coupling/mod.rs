//! Grid filtrations, Prohorov distances and the Strassen coupling of the
//! orbit `{n_k x}` with an i.i.d. uniform sequence.

mod distribution;
mod filtration;
mod simulate;

pub use distribution::{
    prohorov_distance, prohorov_distance_exact, strassen_coupling, Coupling, DiscreteDistribution, EXACT_CANDIDATES_LIMIT,
    SUPPORT_LIMIT,
};
pub use filtration::{
    build_filtration, conditional_expectation_step, good_atoms, side_condition_start, ExpectationStep, GoodAtoms, GridFiltration, Q,
    FILTRATION_LIMIT,
};
pub use simulate::{
    simulate_coupling, wilson_interval, CouplingReport, CouplingRow, IndependenceCheck, ReplicaCheck, GRID_LIMIT,
    SIMULATION_TERM_LIMIT, WILSON_Z,
};
