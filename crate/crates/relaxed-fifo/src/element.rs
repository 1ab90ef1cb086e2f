/// Queue payloads are plain 64-bit words.
pub type Element = u64;

/// Reserved sentinel: marks empty cells inside the queues and is returned by
/// failed pops. It can never be pushed, so callers that need the full 64-bit
/// range must avoid `u64::MAX`.
pub const EMPTY: Element = u64::MAX;
