use super::ModelError;

/// One control period's worth of binary valve states.
#[derive(Debug, Clone, PartialEq)]
pub struct PwmSchedule {
    pub n_slots: usize,
    pub pattern: Vec<bool>,
    /// Realized fraction, exactly `on_slots / n_slots`.
    pub duty: f64,
}

/// Quantizes a commanded power into an on/off slot pattern. On slots are
/// placed contiguously from slot 0; the slot count is the nearest integer
/// to `n_slots * u / u_max`, so the duty error is at most `1/(2 n_slots)`.
pub fn pwm_encode(power_w: f64, power_max_w: f64, n_slots: usize) -> Result<PwmSchedule, ModelError> {
    if n_slots == 0 {
        return Err(ModelError::InvalidParameter(
            "PWM slot count must be at least 1".into(),
        ));
    }
    if !(power_max_w > 0.0) || !power_max_w.is_finite() {
        return Err(ModelError::InvalidParameter(format!(
            "maximum power must be positive and finite, got {power_max_w}"
        )));
    }
    if !power_w.is_finite() || power_w < 0.0 || power_w > power_max_w {
        return Err(ModelError::InvalidParameter(format!(
            "commanded power {power_w} outside [0, {power_max_w}]; saturate upstream"
        )));
    }
    let on_slots = (n_slots as f64 * power_w / power_max_w).round() as usize;
    let mut pattern = vec![false; n_slots];
    for slot in pattern.iter_mut().take(on_slots) {
        *slot = true;
    }
    Ok(PwmSchedule {
        n_slots,
        pattern,
        duty: on_slots as f64 / n_slots as f64,
    })
}

/// Period-average power delivered by a schedule.
pub fn pwm_realized_power(schedule: &PwmSchedule, power_max_w: f64) -> f64 {
    schedule.duty * power_max_w
}
