//! Timestamps with a fixed UTC offset and the calendar fields the temporal
//! features need. Pure integer arithmetic on Unix seconds.

/// A visit time: Unix seconds (UTC) plus the local offset in minutes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Timestamp {
    pub utc: i64,
    pub offset_min: i16,
}

/// Local wall-clock fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalTime {
    /// 0 = Monday .. 6 = Sunday
    pub weekday: u8,
    pub hour: u8,
    pub minute: u8,
}

impl LocalTime {
    pub fn is_weekend(&self) -> bool {
        self.weekday >= 5
    }

    /// Fractional hour of day in [0, 24).
    pub fn hour_of_day(&self) -> f64 {
        self.hour as f64 + self.minute as f64 / 60.0
    }
}

pub const MIN_OFFSET_MIN: i16 = -720;
pub const MAX_OFFSET_MIN: i16 = 840;

impl Timestamp {
    pub const fn new(utc: i64, offset_min: i16) -> Self {
        Timestamp { utc, offset_min }
    }

    pub fn offset_is_valid(&self) -> bool {
        (MIN_OFFSET_MIN..=MAX_OFFSET_MIN).contains(&self.offset_min)
    }

    pub fn local(&self) -> LocalTime {
        let secs = self.utc + self.offset_min as i64 * 60;
        let days = secs.div_euclid(86_400);
        let sod = secs.rem_euclid(86_400);
        // 1970-01-01 was a Thursday
        let weekday = (days + 3).rem_euclid(7) as u8;
        LocalTime {
            weekday,
            hour: (sod / 3600) as u8,
            minute: ((sod % 3600) / 60) as u8,
        }
    }
}
