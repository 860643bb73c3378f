//! Seeded synthetic corpora for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LATIN: &[&str] = &[
    "ka", "lo", "mi", "ne", "ra", "sto", "tri", "va", "der", "ing", "pre", "con", "mar", "ul",
];
const CYRILLIC: &[&str] = &["ра", "бо", "та", "ни", "ко", "ств", "ов", "ле", "ми", "ча"];
const THAI: &[&str] = &["กา", "ระ", "มี", "นํ้า", "ส่ง", "ไป", "คน", "ที่", "ได้"];

/// Lines of space-separated pseudo-words in Latin, Cyrillic, Thai and Han.
pub fn synthetic_lines(lines: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..lines)
        .map(|_| {
            let words = rng.gen_range(4..16);
            let mut line = String::new();
            for w in 0..words {
                if w > 0 {
                    line.push(' ');
                }
                match rng.gen_range(0..4) {
                    0 => push_word(&mut line, LATIN, &mut rng),
                    1 => push_word(&mut line, CYRILLIC, &mut rng),
                    2 => push_word(&mut line, THAI, &mut rng),
                    _ => {
                        for _ in 0..rng.gen_range(1..4) {
                            let cp = 0x4E00 + rng.gen_range(0..800u32);
                            line.push(char::from_u32(cp).unwrap_or('中'));
                        }
                    }
                }
            }
            line
        })
        .collect()
}

fn push_word(out: &mut String, syllables: &[&str], rng: &mut ChaCha8Rng) {
    for _ in 0..rng.gen_range(1..4) {
        out.push_str(syllables[rng.gen_range(0..syllables.len())]);
    }
}
