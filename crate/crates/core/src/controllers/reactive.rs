use serde::{Deserialize, Serialize};

/// Setpoints the reactive controller switches between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReactiveSchedule {
    pub comfort_setpoint: f64,
    pub setback: f64,
}

/// Comfort setpoint when step `now` is occupied, setback otherwise.
///
/// Only `occupied[now]` is read. Steps outside the schedule count as unoccupied.
pub fn reactive_decide(now: usize, occupied: &[bool], schedule: &ReactiveSchedule) -> f64 {
    if occupied.get(now).copied().unwrap_or(false) {
        schedule.comfort_setpoint
    } else {
        schedule.setback
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    const SCHEDULE: ReactiveSchedule = ReactiveSchedule {
        comfort_setpoint: 21.0,
        setback: 16.0,
    };

    #[test]
    fn follows_the_schedule_without_anticipation() {
        assert_eq!(reactive_decide(0, &[true], &SCHEDULE), 21.0);
        assert_eq!(reactive_decide(0, &[false], &SCHEDULE), 16.0);
        assert_eq!(reactive_decide(0, &[false, true], &SCHEDULE), 16.0);
    }

    proptest! {
        #[test]
        fn output_ignores_the_future(
            schedule in proptest::collection::vec(any::<bool>(), 1..48),
            future in proptest::collection::vec(any::<bool>(), 0..48),
            now in 0usize..48,
        ) {
            let now = now % schedule.len();
            let mut altered = schedule[..=now].to_vec();
            altered.extend(future);
            prop_assert_eq!(
                reactive_decide(now, &schedule, &SCHEDULE),
                reactive_decide(now, &altered, &SCHEDULE)
            );
        }
    }
}
