//! Scenario configurations shipped with the crate.

/// `(name, JSON text)` of every bundled scenario.
pub const BUNDLED: &[(&str, &str)] = &[
    ("quad_hover", include_str!("../configs/quad_hover.json")),
    ("ballistic", include_str!("../configs/ballistic.json")),
    (
        "quad_motor_out",
        include_str!("../configs/quad_motor_out.json"),
    ),
    (
        "quad_energy_descent",
        include_str!("../configs/quad_energy_descent.json"),
    ),
    ("fw_wing_loss", include_str!("../configs/fw_wing_loss.json")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}
