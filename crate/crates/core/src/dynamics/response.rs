/// Which form of the heterodyne response to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResponseForm {
    /// Full two-term expression, valid for any rotation angle.
    Exact,
    /// Leading-order term, valid for `Ω′τ ≪ 1` and `Δω/Ω′ ≪ 1`.
    SmallAngle,
}

/// `⟨S_z⟩` after the superposition `(|0⟩ + e^{iφ_ref}|−1⟩)/√2` evolves for `t`
/// under a static drive of Rabi frequency `omega` at phase `phi0` with detuning
/// `detuning`.
///
/// Exact form, with `Ω′ = √(Ω² + Δω²)`:
///
/// ```text
/// ⟨S_z⟩ = (Ω/2Ω′) sin(Ω′t) sin(φ_ref − φ0) + (ΩΔω/Ω′²) sin²(Ω′t/2) cos(φ0 − φ_ref)
/// ```
///
/// The small-angle form is `(Ωt/2) sin(φ_ref − φ0)`.
pub fn phase_response(
    omega: f64,
    detuning: f64,
    phi0: f64,
    phi_ref: f64,
    t: f64,
    form: ResponseForm,
) -> f64 {
    match form {
        ResponseForm::SmallAngle => 0.5 * omega * t * (phi_ref - phi0).sin(),
        ResponseForm::Exact => {
            let rabi = omega.hypot(detuning);
            let angle = rabi * t;
            // sin(Ω′t)/Ω′ and sin²(Ω′t/2)/Ω′², with their Ω′ → 0 limits
            let (sinc, half_sq) = if angle.abs() < 1e-6 {
                (t * (1.0 - angle * angle / 6.0), 0.25 * t * t * (1.0 - angle * angle / 12.0))
            } else {
                let half = (0.5 * angle).sin();
                (angle.sin() / rabi, half * half / (rabi * rabi))
            };
            0.5 * omega * sinc * (phi_ref - phi0).sin()
                + omega * detuning * half_sq * (phi0 - phi_ref).cos()
        }
    }
}
