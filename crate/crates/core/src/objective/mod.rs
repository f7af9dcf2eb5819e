//! Training objective and evaluation metrics shared with the training
//! component.

pub mod loss;
pub mod metrics;
pub mod reference;

pub use loss::{
    center_loss, center_loss_gradient, central_difference_gradient, cosine_similarity_matrix,
    cross_entropy, hybrid_loss, supervised_contrastive_loss, supervised_contrastive_loss_with,
    ClassCenters, EmbeddingBatch, LossBreakdown, LossWeights, SelfTerm,
};
pub use metrics::{
    confusion_metrics, majority_vote, selection_score, Confusion, EvalLevel, EvalReport,
};
