//! Long-form document matching via subtopic-aware view sampling and
//! temporal aggregation.
//!
//! The pipeline: cluster the combined sentences of a document pair into
//! subtopics ([`subtopic`]), sample representative document views from the
//! clusters ([`sampling`]), train a matcher on a different view pair each
//! epoch ([`aggregate`]), and pool multi-view scores at inference. [`corpus`]
//! provides loaders and a planted-subtopic synthetic corpus; [`eval`] the
//! classification and ranking metrics; [`experiment`] end-to-end
//! orchestration.


pub mod aggregate;
pub mod corpus;


pub mod eval;
pub mod experiment;
pub mod linalg;


pub mod matcher;
pub mod sampling;
pub mod seedstream;
pub mod simgraph;
pub mod subtopic;

