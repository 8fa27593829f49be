//! Baseline initializations: ReTok (sub-token mean), column mean, random.

use rand::Rng;

use crate::bpe::BpeTokenizer;

use super::heuristics::{RandomFallback, TokenText, WeightedRows};
use super::matrix::EmbeddingMatrix;

/// Uniform weights over the old-tokenizer decomposition.
pub fn retok_weights(new: &TokenText, old_tok: &BpeTokenizer) -> Option<WeightedRows> {
    let ids = old_tok.encode_bytes(&new.bytes);
    if ids.is_empty() {
        return None;
    }
    let w = 1.0 / ids.len() as f64;
    Some(WeightedRows { weights: vec![w; ids.len()], ids })
}

/// Unweighted mean of the sub-token rows; `None` on an empty decomposition.
pub fn retok_init(new: &TokenText, old_tok: &BpeTokenizer, e_old: &EmbeddingMatrix) -> Option<Vec<f32>> {
    retok_weights(new, old_tok).map(|w| w.apply(e_old))
}

pub fn mean_init(e_old: &EmbeddingMatrix) -> Vec<f32> {
    e_old.column_mean().into_iter().map(|x| x as f32).collect()
}

pub fn random_init<R: Rng + ?Sized>(e_old: &EmbeddingMatrix, rng: &mut R) -> Vec<f32> {
    RandomFallback::from_matrix(e_old).sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpe::{byte_level, PreTokenizer};
    use crate::transplant::MatrixRole;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn byte_tokenizer() -> BpeTokenizer {
        let entries = (0..=255u8).map(|b| byte_level::byte_to_char(b).to_string()).collect();
        BpeTokenizer::from_parts(entries, vec![], vec![], PreTokenizer::Whitespace).unwrap()
    }

    fn matrix_with(rows: &[(u8, [f32; 2])]) -> EmbeddingMatrix {
        let mut data = vec![0f32; 512];
        for (b, r) in rows {
            data[*b as usize * 2..*b as usize * 2 + 2].copy_from_slice(r);
        }
        EmbeddingMatrix::new(256, 2, data, MatrixRole::Input).unwrap()
    }

    #[test]
    fn retok_averages_subtokens() {
        let tok = byte_tokenizer();
        let e = matrix_with(&[(b'x', [0.0, 2.0]), (b'y', [2.0, 0.0])]);
        assert_eq!(retok_init(&TokenText::from_text("xy"), &tok, &e).unwrap(), vec![1.0, 1.0]);
        assert_eq!(retok_init(&TokenText::from_text("x"), &tok, &e).unwrap(), vec![0.0, 2.0]);
        assert!(retok_init(&TokenText::from_text(""), &tok, &e).is_none());
    }

    #[test]
    fn mean_and_random() {
        let e = EmbeddingMatrix::from_rows(&[vec![1.0, 1.0], vec![3.0, 3.0]], MatrixRole::Input).unwrap();
        assert_eq!(mean_init(&e), vec![2.0, 2.0]);
        let one = EmbeddingMatrix::from_rows(&[vec![0.25, -4.0]], MatrixRole::Input).unwrap();
        assert_eq!(mean_init(&one), vec![0.25, -4.0]);
        let a = random_init(&e, &mut ChaCha8Rng::seed_from_u64(42));
        let b = random_init(&e, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
        assert_ne!(a, random_init(&e, &mut ChaCha8Rng::seed_from_u64(43)));
    }
}
