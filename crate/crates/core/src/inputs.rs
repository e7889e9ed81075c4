//! Source settings and block parameters shared by the channel models,
//! parameter estimation and the key-length engine.

/// Index of a decoy intensity in `[mu, nu, omega]` order.
pub const DECOYS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolInputs {
    /// Key-basis intensity of the MDI scheme. Unused by BB84, whose key
    /// basis uses the decoy intensities.
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
    pub omega: f64,
    /// Probability of the key (Z) basis.
    pub q_z: f64,
    pub p_mu: f64,
    pub p_nu: f64,
    pub p_omega: f64,
    /// Sifted block size per pair.
    pub m: u64,
    /// Transmitted rounds per pair.
    pub n: u64,
    /// Error rate the reconciliation is provisioned for.
    pub e_tol: f64,
    pub f_ec: f64,
}

impl ProtocolInputs {
    pub fn q_x(&self) -> f64 {
        1.0 - self.q_z
    }

    pub fn decoys(&self) -> [f64; DECOYS] {
        [self.mu, self.nu, self.omega]
    }

    pub fn decoy_probs(&self) -> [f64; DECOYS] {
        [self.p_mu, self.p_nu, self.p_omega]
    }

    /// Probabilities valid and intensities strictly ordered `mu > nu > omega >= 0`.
    pub fn is_well_formed(&self) -> bool {
        let probs = [self.q_z, self.p_mu, self.p_nu, self.p_omega];
        probs.iter().all(|p| (0.0..=1.0).contains(p))
            && (self.p_mu + self.p_nu + self.p_omega - 1.0).abs() < 1e-9
            && self.mu > self.nu
            && self.nu > self.omega
            && self.omega >= 0.0
            && self.lambda >= 0.0
    }
}
