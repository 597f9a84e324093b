//! Separable Hamiltonian triples and their Vlasov–Maxwell instance.

mod kernel;
mod triple;
mod vm;

pub use kernel::{kernel_correspondence, lift_to_x, schur_margin, KernelReport, SchurReport};
pub use triple::{
    gaussian, restricted_negative_count, spectral_decompose, verify_axioms, AxiomReport, DecompositionReport,
    HamiltonianTriple, RestrictedCount, RestrictedOptions, SpectralDecomposition, SpectralOptions,
};
pub use vm::{assemble_vm_triple, ComponentNorms, VmLayout, VmTriple};
