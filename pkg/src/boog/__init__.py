"""Graph foundation model on text-embedded graphs: class-conditioned
super-node encoding, contrastive pre-training, and zero-/few-shot
inference with a frozen backbone.
"""

from .downstream import (FewShotTask, MlpParams, evaluate,
                         extract_representations, link_features,
                         predict_mlp, sample_few_shot, train_mlp)
from .encoder import (EncoderParams, Hyper, SuperNodeBundle,
                      attention_weights, build_super_nodes, encode,
                      encode_grad, init_encoder_params)
from .errors import (ContractViolation, DataValidationError,
                     FileFormatError, NumericalError, ParameterError,
                     ShapeError, UndefinedMetricError)
from .graph_store import (ClassCatalog, DatasetSplit, EmbeddedGraph,
                          GraphCollection, generate_synthetic,
                          load_dataset, load_embeddings, save_dataset,
                          save_embeddings, stub_embed)
from .inference import (MatchResult, link_scores, match_instances,
                        similarity_match, zero_shot_classify,
                        zero_shot_link)
from .pretrain import (Checkpoint, TrainConfig, build_anchors,
                       load_checkpoint, pretrain_loss, pretrain_loss_grad,
                       run_pretraining, save_checkpoint)
from .subgraph import AnchorTask, graph_anchor, khop_neighborhood, \
    node_anchor

__version__ = "1.0.0"

__all__ = [
    "AnchorTask",
    "Checkpoint",
    "ClassCatalog",
    "ContractViolation",
    "DataValidationError",
    "DatasetSplit",
    "EmbeddedGraph",
    "EncoderParams",
    "FewShotTask",
    "FileFormatError",
    "GraphCollection",
    "Hyper",
    "MatchResult",
    "MlpParams",
    "NumericalError",
    "ParameterError",
    "ShapeError",
    "SuperNodeBundle",
    "UndefinedMetricError",
    "attention_weights",
    "build_anchors",
    "build_super_nodes",
    "encode",
    "encode_grad",
    "evaluate",
    "extract_representations",
    "generate_synthetic",
    "graph_anchor",
    "init_encoder_params",
    "khop_neighborhood",
    "link_features",
    "link_scores",
    "load_checkpoint",
    "load_dataset",
    "load_embeddings",
    "match_instances",
    "node_anchor",
    "predict_mlp",
    "pretrain_loss",
    "pretrain_loss_grad",
    "run_pretraining",
    "sample_few_shot",
    "save_checkpoint",
    "save_dataset",
    "save_embeddings",
    "similarity_match",
    "stub_embed",
    "train_mlp",
    "zero_shot_classify",
    "zero_shot_link",
    "__version__",
]
