#![allow(dead_code)]

pub mod grammar_oracle;
pub mod matching_oracle;
