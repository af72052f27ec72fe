use serde::{Deserialize, Serialize};

/// Numerical thresholds used throughout the toolkit.
///
/// Every report embeds the full set that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Hermiticity defect accepted for positive operators and projectors.
    pub herm: f64,
    /// Most negative eigenvalue accepted for positive operators.
    pub psd: f64,
    /// Accepted deviation of a state's trace from one.
    pub trace: f64,
    /// Eigenvalues at or below this are outside the numerical support.
    pub supp: f64,
    /// Eigenvalue threshold defining the Choi rank.
    pub rank: f64,
    /// Slack on the largest eigenvalue in the CJ membership test.
    pub membership: f64,
    /// Deviation of `sum V*V` from the identity accepted for channels.
    pub channel: f64,
    /// Entrywise tolerance of the Cauchy detector.
    pub cauchy: f64,
    /// Largest gap still declaring the dual-ladder criterion satisfied.
    pub gap: f64,
    /// Largest tail mass still declaring uniform tail decay.
    pub tail: f64,
    /// Support defect above which a relative entropy is reported infinite.
    pub inf_supp: f64,
    /// Trace-norm tolerance of the reversibility biconditional.
    pub reversibility: f64,
    /// Residual certifying (anti-)degradability.
    pub certificate: f64,
    /// Terminal deviation accepted by the convergence-preservation harness.
    pub convergence: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            herm: 1e-10,
            psd: 1e-10,
            trace: 1e-10,
            supp: 1e-12,
            rank: 1e-10,
            membership: 1e-9,
            channel: 1e-10,
            cauchy: 1e-7,
            gap: 1e-6,
            tail: 1e-6,
            inf_supp: 1e-10,
            reversibility: 1e-6,
            certificate: 1e-6,
            convergence: 1e-6,
        }
    }
}

impl Tolerances {
    /// Names accepted by [`Tolerances::set`].
    pub const NAMES: [&'static str; 14] = [
        "herm",
        "psd",
        "trace",
        "supp",
        "rank",
        "membership",
        "channel",
        "cauchy",
        "gap",
        "tail",
        "inf_supp",
        "reversibility",
        "certificate",
        "convergence",
    ];

    /// Overrides one tolerance by name. Returns `false` for unknown names.
    pub fn set(&mut self, name: &str, value: f64) -> bool {
        let slot = match name {
            "herm" => &mut self.herm,
            "psd" => &mut self.psd,
            "trace" => &mut self.trace,
            "supp" => &mut self.supp,
            "rank" => &mut self.rank,
            "membership" => &mut self.membership,
            "channel" => &mut self.channel,
            "cauchy" => &mut self.cauchy,
            "gap" => &mut self.gap,
            "tail" => &mut self.tail,
            "inf_supp" => &mut self.inf_supp,
            "reversibility" => &mut self.reversibility,
            "certificate" => &mut self.certificate,
            "convergence" => &mut self.convergence,
            _ => return false,
        };
        *slot = value;
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_is_settable() {
        let mut tol = Tolerances::default();
        for name in Tolerances::NAMES {
            assert!(tol.set(name, 0.5), "{name}");
        }
        assert!(!tol.set("bogus", 1.0));
        assert_eq!(tol.cauchy, 0.5);
    }
}
