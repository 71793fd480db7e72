//! Synthetic fashion catalog: vocabulary, products, encoders and the
//! attribute index.

mod encode;
mod index;
mod product;
mod vocab;

pub use encode::{
    encode_catalog, encode_image, encode_text, product_text_tokens, token_embedding,
    EncodedProduct, ImageEncoder, Standardizer, ViewScaler, DEFAULT_IMAGE_NOISE, IMAGE_DIM,
    TEXT_DIM,
};
pub use index::{search, AttributeIndex};
pub use product::{generate_catalog, product_id, Catalog, CatalogConfig, Product};
pub use vocab::{
    build_vocabulary, TokenKind, VocabConfig, Vocabulary, BRAND, CATEGORY, COLOR, FAMILIES,
    GENDER, GENDERS, MATERIAL, PATTERN,
};
