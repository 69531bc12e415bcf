//! Exact orbits `{n_k x}`, the periodic-function catalog and the gap-condition evaluator.

mod condition;
mod fixed;
mod function;
mod modulus;
mod plan;

pub use condition::{admissible_schedule, condition_maingap, tail_measure, truncation_schedule, ConditionReport, ConditionRow, TruncationSchedule, Verdict};
pub use fixed::{check_guard, frac_multiple, required_bits, sample_point, FixedPointSample, GUARD_BITS};
pub use function::PeriodicFunction;
pub use modulus::{l2_modulus, shift_energy};
pub use plan::{orbit_reference, partial_sum, OrbitPlan};
