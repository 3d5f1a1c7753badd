//! Information-theoretic comparison of two text corpora.
//!
//! The crate covers the full analysis chain: ingesting timestamped posts,
//! tokenizing them into bags of words, measuring Jensen-Shannon divergence
//! with per-word contributions ("word shift" reports), building hashtag
//! co-occurrence networks filtered down to their multiscale backbone, ranking
//! their nodes by centrality, and comparing volume-controlled effective
//! diversities.

pub mod corpus;
pub mod diversity;
pub mod error;
pub mod graphalgs;
pub mod hashnet;
pub mod infotheory;
pub mod synth;
pub mod wordshift;

pub use corpus::{
    build_distribution, extract_hashtags, filter_window, frequency_timeseries, parse_tweet_files, parse_tweet_stream,
    partition_by_anchor, tokenize, write_tweet_stream, CorpusWindow, ParsedStream, RejectedRecord, StopList, TokenBag,
    TokenDistribution, Tokenizer, Tweet,
};
pub use diversity::{
    boxplot_stats, compare_diversity, subsample_diversity, BoxplotStats, DiversityComparison, DiversityKind,
    DiversitySampleSet, PoolOptions,
};
pub use error::{Error, Result};
pub use graphalgs::{CentralityTable, CommunityAssignment, Measure, PageRankParams};
pub use hashnet::{BackboneStats, TopicNetwork, TopicParams, WeightedGraph};
pub use infotheory::{
    effective_diversity, jsd, jsd_contributions, kl_divergence, shannon_entropy, word_context_diversity, Direction,
    JsdWeights, KlDivergence, MixedDistribution, WordContribution,
};
pub use wordshift::{ShiftConfig, ShiftEntry, WeightBasis, WordShiftReport};
