//! Exact causal identification over directed mixed graphs with input nodes.
//!
//! The crate has two layers. The exact layer works over finite spaces with
//! arbitrary-precision rational probabilities: graphs ([`graph`]), Markov
//! kernels ([`kernel`]), causal models with latent and input nodes ([`cbn`]),
//! transitional conditional independence ([`tci`]), the causal calculus
//! ([`calculus`]) and the identification algorithm built on the fixing
//! operation ([`identify`]). Every identification claim in this layer can be
//! checked against a brute-force interventional oracle with exact equality.
//!
//! The numeric layer ([`continuous`]) evaluates a small set of closed-form
//! density families by adaptive quadrature to reproduce the continuous
//! counterexamples that show where pointwise identification and naive
//! positivity assumptions break down.

pub mod calculus;
pub mod cbn;
pub mod continuous;
pub mod fixtures;
pub mod tci;
pub mod graph;
pub mod identify;
pub mod kernel;
