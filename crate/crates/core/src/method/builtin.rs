//! Preloaded function families.
//!
//! The arc families treat `(lat, lon)` as the complex number `lat + i·lon`
//! and rotate the chord, so a positive `omega` turns from north towards
//! east. Both reproduce `start` at `u = 0` and `end` at `u = 1` exactly and
//! stay valid for `u` outside that range.

use super::{FunctionSpec, Origin};

pub const LINEAR: &str = "linear";
pub const CUBIC_HERMITE: &str = "cubic-hermite";
pub const CONSTANT_TURN: &str = "constant-turn";
pub const DECELERATE_THEN_ALIGN: &str = "decelerate-then-align";

pub const FAMILIES: [&str; 4] = [LINEAR, CUBIC_HERMITE, CONSTANT_TURN, DECELERATE_THEN_ALIGN];

fn builtin(name: &str, source: &str) -> FunctionSpec {
    FunctionSpec::parse(name, Origin::Builtin, source).expect("builtin IEL source parses")
}

pub fn linear() -> FunctionSpec {
    builtin(LINEAR, linear_source())
}

pub fn linear_source() -> &'static str {
    "lat = lat0 + u * (lat1 - lat0)\nlon = lon0 + u * (lon1 - lon0)"
}

/// Hermite cubic through both anchors using the boundary velocities.
pub fn cubic_hermite() -> FunctionSpec {
    builtin(CUBIC_HERMITE, cubic_hermite_source())
}

pub fn cubic_hermite_source() -> &'static str {
    "h00 = 2 * u ^ 3 - 3 * u ^ 2 + 1
h10 = u ^ 3 - 2 * u ^ 2 + u
h01 = 3 * u ^ 2 - 2 * u ^ 3
h11 = u ^ 3 - u ^ 2
lat = h00 * lat0 + h10 * dt_total * vlat0 + h01 * lat1 + h11 * dt_total * vlat1
lon = h00 * lon0 + h10 * dt_total * vlon0 + h01 * lon1 + h11 * dt_total * vlon1"
}

fn arc_body(progress: &str) -> String {
    format!(
        "theta = omega * dt_total
s = {progress}
a = theta * (s - 1) / 2
r = s * sinc(theta * s / 2) / sinc(theta / 2)
lat = lat0 + r * ((lat1 - lat0) * cos(a) - (lon1 - lon0) * sin(a))
lon = lon0 + r * ((lat1 - lat0) * sin(a) + (lon1 - lon0) * cos(a))"
    )
}

pub fn constant_turn_source(omega: f64) -> String {
    format!("omega = {omega}\n{}", arc_body("u"))
}

/// Circular arc at a fixed turn rate `omega` (radians per second).
pub fn constant_turn(omega: f64) -> FunctionSpec {
    builtin(CONSTANT_TURN, &constant_turn_source(omega))
}

pub fn decelerate_then_align_source(omega: f64, decay: f64) -> String {
    format!("omega = {omega}\ndecay = {decay}\n{}", arc_body("(u + (decay - 1) * u ^ 2 / 2) / (1 + (decay - 1) / 2)"))
}

/// The constant-turn arc traversed with linearly decaying speed; `decay`
/// is the ratio of final to initial speed.
pub fn decelerate_then_align(omega: f64, decay: f64) -> FunctionSpec {
    builtin(DECELERATE_THEN_ALIGN, &decelerate_then_align_source(omega, decay))
}

/// Family name of `spec` if its text is a builtin family instance.
pub fn classify(spec: &FunctionSpec) -> Option<&'static str> {
    let params: std::collections::HashMap<&str, f64> = spec.params().into_iter().collect();
    let candidates = [
        (LINEAR, Some(linear_source().to_string())),
        (CUBIC_HERMITE, Some(cubic_hermite_source().to_string())),
        (CONSTANT_TURN, params.get("omega").map(|w| constant_turn_source(*w))),
        (
            DECELERATE_THEN_ALIGN,
            params.get("omega").zip(params.get("decay")).map(|(w, d)| decelerate_then_align_source(*w, *d)),
        ),
    ];
    candidates.into_iter().find_map(|(name, src)| {
        let canonical = FunctionSpec::parse(name, Origin::Builtin, &src?).ok()?;
        (canonical.source() == spec.source()).then_some(name)
    })
}
