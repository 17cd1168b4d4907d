//! Naive local clock time at one-second resolution.
//!
//! Timestamps are seconds since 1970-01-01 00:00:00 on the recording clock,
//! with no timezone attached; hour buckets and the midnight SOC reset are
//! evaluated on this clock.

pub const SECONDS_PER_DAY: i64 = 86_400;
pub const SECONDS_PER_HOUR: i64 = 3_600;
pub const HOURS_PER_DAY: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Timestamp(pub i64);

/// Calendar day as days since 1970-01-01.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Day(pub i64);

impl Timestamp {
    pub fn day(self) -> Day {
        Day(self.0.div_euclid(SECONDS_PER_DAY))
    }

    /// Hour bucket 1..=24 (clock hour 00 maps to 1).
    pub fn hour_index(self) -> u8 {
        (self.0.rem_euclid(SECONDS_PER_DAY) / SECONDS_PER_HOUR) as u8 + 1
    }

    /// Absolute hour slot, `day * 24 + hour_index - 1`.
    pub fn hour_slot(self) -> i64 {
        self.0.div_euclid(SECONDS_PER_HOUR)
    }
}

impl Day {
    pub fn start(self) -> Timestamp {
        Timestamp(self.0 * SECONDS_PER_DAY)
    }

    pub fn next(self) -> Day {
        Day(self.0 + 1)
    }

    /// Absolute hour slot of the given 1-based hour of this day.
    pub fn slot(self, hour: u8) -> i64 {
        self.0 * HOURS_PER_DAY as i64 + i64::from(hour) - 1
    }
}

/// Inverse of [`Day::slot`].
pub fn slot_to_day_hour(slot: i64) -> (Day, u8) {
    (
        Day(slot.div_euclid(HOURS_PER_DAY as i64)),
        slot.rem_euclid(HOURS_PER_DAY as i64) as u8 + 1,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hour_buckets() {
        let t = Timestamp(13_941 * SECONDS_PER_DAY + 5 * 60);
        assert_eq!(t.day(), Day(13_941));
        assert_eq!(t.hour_index(), 1);
        let t = Timestamp(13_941 * SECONDS_PER_DAY + 23 * 3600 + 3599);
        assert_eq!(t.hour_index(), 24);
        assert_eq!(slot_to_day_hour(t.hour_slot()), (Day(13_941), 24));
    }

    #[test]
    fn negative_times_floor() {
        let t = Timestamp(-1);
        assert_eq!(t.day(), Day(-1));
        assert_eq!(t.hour_index(), 24);
    }
}
