use core::fmt;

/// Integer result contract shared by every platform operation.
///
/// Exactly one code is zero (`OK`), exactly one is positive
/// (`NO_MESSAGES`, the empty-queue indication) and every error is
/// negative. Unknown negative codes can still be carried and printed.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Status(i32);

impl Status {
    /// Operation succeeded.
    pub const OK: Status = Status(0);
    /// The polled queue holds no message. Not an error.
    pub const NO_MESSAGES: Status = Status(1);
    /// Socket-level failure (bind, connect, read, write, peer reset).
    pub const SOCKET_ERR: Status = Status(-1);
    /// The referenced channel ID is not registered.
    pub const NOT_FOUND: Status = Status(-2);
    /// Malformed creation descriptor, endpoint, or option.
    pub const BAD_INFO: Status = Status(-3);
    /// The target is in a terminal state and cannot serve the call.
    pub const CLOSED: Status = Status(-4);
    /// Protocol-level failure (bad envelope, bad HTTP framing, bad base64).
    pub const PROTO_ERR: Status = Status(-5);

    /// Every named code, for partition checks.
    pub const ALL: [Status; 7] = [
        Status::OK,
        Status::NO_MESSAGES,
        Status::SOCKET_ERR,
        Status::NOT_FOUND,
        Status::BAD_INFO,
        Status::CLOSED,
        Status::PROTO_ERR,
    ];

    pub const fn from_code(code: i32) -> Status {
        Status(code)
    }

    pub const fn code(self) -> i32 {
        self.0
    }

    pub const fn is_ok(self) -> bool {
        self.0 == 0
    }

    /// True for every negative code; `NO_MESSAGES` is not an error.
    pub const fn is_error(self) -> bool {
        self.0 < 0
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Status::OK => f.write_str("CHANNEL_OK"),
            Status::NO_MESSAGES => f.write_str("CHANNEL_NOMESSAGES"),
            Status::SOCKET_ERR => f.write_str("CHANNEL_SOCKETERR"),
            Status::NOT_FOUND => f.write_str("CHANNEL_NOTFOUND"),
            Status::BAD_INFO => f.write_str("CHANNEL_BADINFO"),
            Status::CLOSED => f.write_str("CHANNEL_CLOSED"),
            Status::PROTO_ERR => f.write_str("CHANNEL_PROTOERR"),
            Status(n) => write!(f, "CHANNEL_ERR({n})"),
        }
    }
}

impl fmt::Debug for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Status {}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn canonical_names() {
        assert_eq!(Status::OK.to_string(), "CHANNEL_OK");
        assert_eq!(Status::NO_MESSAGES.to_string(), "CHANNEL_NOMESSAGES");
        assert_eq!(Status::SOCKET_ERR.to_string(), "CHANNEL_SOCKETERR");
        assert_eq!(Status::NOT_FOUND.to_string(), "CHANNEL_NOTFOUND");
        assert_eq!(Status::BAD_INFO.to_string(), "CHANNEL_BADINFO");
        assert_eq!(Status::CLOSED.to_string(), "CHANNEL_CLOSED");
        assert_eq!(Status::PROTO_ERR.to_string(), "CHANNEL_PROTOERR");
    }

    #[test]
    fn unknown_codes_fall_back_to_numeric_form() {
        assert_eq!(Status::from_code(-7).to_string(), "CHANNEL_ERR(-7)");
        assert_eq!(Status::from_code(42).to_string(), "CHANNEL_ERR(42)");
    }

    #[test]
    fn code_partition() {
        let zeros = Status::ALL.iter().filter(|s| s.code() == 0).count();
        let positives = Status::ALL.iter().filter(|s| s.code() > 0).count();
        let negatives = Status::ALL.iter().filter(|s| s.code() < 0).count();
        assert_eq!(zeros, 1);
        assert_eq!(positives, 1);
        assert_eq!(negatives, Status::ALL.len() - 2);
        assert_eq!(Status::NO_MESSAGES.code(), 1);
        assert!(!Status::NO_MESSAGES.is_error());
    }

    #[test]
    fn distinct_codes() {
        for (i, a) in Status::ALL.iter().enumerate() {
            for b in &Status::ALL[i + 1..] {
                assert_ne!(a.code(), b.code());
            }
        }
    }
}
