//! Offline fixture corpus and the five tool servers built over it.

mod corpus;
mod servers;

pub use corpus::{Corpus, CorpusDocument, CorpusError, DocKind};
pub use servers::{
    build_all, build_server, default_exec_ms, extractive_summary, format_number, FixtureServer,
    FixtureShared,
};
