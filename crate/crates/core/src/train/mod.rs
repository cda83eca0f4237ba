//! Loss, optimizer and training loops for node and graph classification.

mod adam;
mod loss;
mod trainer;

pub use adam::{adam_step, AdamState, Trainable, BETA1, BETA2, EPSILON};
pub use loss::{argmax, cross_entropy_masked, evaluate};
pub use trainer::{
    evaluate_graph_classifier, evaluate_node_classifier, predict, predict_graphs, train_graph_classifier, train_graph_classifier_with,
    train_node_classifier, train_node_classifier_with, DecayScope, EpochHook, GraphBatch,
    MetricsRecord, TrainConfig, TrainOutcome,
};
