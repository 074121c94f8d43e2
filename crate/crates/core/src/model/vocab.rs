/// Printable ASCII (0x20..=0x7E) plus one trailing out-of-vocabulary slot.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CharVocabulary;

impl CharVocabulary {
    pub const SIZE: usize = 96;
    pub const OOV: usize = 95;

    pub fn index(c: char) -> usize {
        match c {
            ' '..='~' => c as usize - 0x20,
            _ => Self::OOV,
        }
    }

    /// The 95 printable characters in slot order.
    pub fn printable() -> String {
        (0x20u8..=0x7e).map(char::from).collect()
    }
}
