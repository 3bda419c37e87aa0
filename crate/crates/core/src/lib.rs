pub mod corpus;
pub mod datasets;
pub mod embeddings;
pub mod evaluation;
pub mod neural;
pub mod tokenizers;

// The guide's code blocks run as doctests from here.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/tokenizers.md")]
    mod tokenizers {}
    #[doc = include_str!("../../../book/src/embeddings.md")]
    mod embeddings {}
    #[doc = include_str!("../../../book/src/similarity.md")]
    mod similarity {}
    #[doc = include_str!("../../../book/src/classification.md")]
    mod classification {}
    #[doc = include_str!("../../../book/src/tagging.md")]
    mod tagging {}
    #[doc = include_str!("../../../book/src/contextual.md")]
    mod contextual {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
