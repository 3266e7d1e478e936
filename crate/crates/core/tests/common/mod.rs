#![allow(dead_code)]

pub mod oracle;

use qubit_thermo::bloch::BlochVector;
use qubit_thermo::schedule::{DriveSchedule, ScheduleInfo};

/// `s ↦ −H(−s)`: running this schedule forward integrates the original
/// backward in time.
pub struct Reversed<'a>(pub &'a dyn DriveSchedule);

impl DriveSchedule for Reversed<'_> {
    fn field(&self, s: f64) -> BlochVector {
        -self.0.field(-s)
    }

    fn info(&self) -> ScheduleInfo {
        let mut info = self.0.info();
        info.label = format!("reversed:{}", info.label);
        info
    }
}
