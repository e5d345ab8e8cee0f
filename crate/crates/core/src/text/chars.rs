/// Punctuation marks of the character alphabet, after letters, digits and
/// the space.
pub const PUNCTUATION: &str = "-,;.!?:'\"/\\|_@#$%^&*~`+=<>()[]{}";

/// Lowercase letters, digits, space, and 32 punctuation marks: 69 symbols
/// with ids 1..=69. Id 0 is shared by padding and unknown characters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharAlphabet {
    symbols: Vec<char>,
    ids: [u32; 128],
}

impl CharAlphabet {
    pub fn standard() -> Self {
        let symbols: Vec<char> = ('a'..='z')
            .chain('0'..='9')
            .chain(std::iter::once(' '))
            .chain(PUNCTUATION.chars())
            .collect();
        let mut ids = [0u32; 128];
        for (i, &c) in symbols.iter().enumerate() {
            ids[c as usize] = i as u32 + 1;
        }
        CharAlphabet { symbols, ids }
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    /// Number of ids including the shared pad/unknown id.
    pub fn vocab_size(&self) -> usize {
        self.symbols.len() + 1
    }

    /// Id of an already-normalized character.
    pub fn id(&self, c: char) -> u32 {
        if c.is_ascii() {
            self.ids[c as usize]
        } else {
            0
        }
    }
}

impl Default for CharAlphabet {
    fn default() -> Self {
        CharAlphabet::standard()
    }
}

/// Lowercases `text`, maps whitespace to a space and characters to ids,
/// then truncates or right-pads with zeros to exactly `length`.
pub fn encode_chars(text: &str, alphabet: &CharAlphabet, length: usize) -> Vec<u32> {
    let mut out: Vec<u32> = text
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_whitespace() { ' ' } else { c })
        .map(|c| alphabet.id(c))
        .take(length)
        .collect();
    out.resize(length, 0);
    out
}
