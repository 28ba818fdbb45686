use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Acoustic event classes the simulator renders and the classifier predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventClass {
    SteadyState,
    DoubleTalk,
    EchoPathChange,
    Repositioning,
}

impl EventClass {
    pub const ALL: [EventClass; 4] = [
        EventClass::SteadyState,
        EventClass::DoubleTalk,
        EventClass::EchoPathChange,
        EventClass::Repositioning,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EventClass::SteadyState => "steady_state",
            EventClass::DoubleTalk => "double_talk",
            EventClass::EchoPathChange => "echo_path_change",
            EventClass::Repositioning => "repositioning",
        }
    }
}

impl fmt::Display for EventClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| {
                Error::input(format!(
                    "unknown event class '{s}' (expected one of steady_state, double_talk, echo_path_change, repositioning)"
                ))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for c in EventClass::ALL {
            assert_eq!(c.as_str().parse::<EventClass>().unwrap(), c);
        }
        assert!("dt".parse::<EventClass>().is_err());
        assert_eq!(EventClass::Repositioning.index(), 3);
    }
}
