"""Two-branch co-attentive compact-bilinear embedding network, desk scale.

Subpackages follow the pipeline: tensor_ops/autodiff (numeric core),
sketch/attention/fusion (the embedding machinery), losses/model/training
(the trainable network), synthdata/retrieval/experiments/cli (benchmark
and harness).
"""

from .attention import CoAttentionParams, apply_channel_weights, co_attention_weights
from .fusion import (
    FusionConfig,
    finalize_representation,
    fuse_alternative,
    spatial_cbp,
)
from .losses import (
    AttributeTarget,
    IdTarget,
    LandmarkTarget,
    attribute_bce_loss,
    id_cross_entropy,
    landmark_loss,
)
from .model import ArchConfig, ToyModel, build_toy_model, paper_shape_arch
from .retrieval import (
    Gallery,
    RetrievalReport,
    attribute_average_precision,
    landmark_nme,
    rank_queries,
    topk_accuracy,
)
from .sketch import SketchParams, cbp_gradient, cbp_vector, make_sketch_params, outer_sketch_oracle, project
from .synthdata import DatasetBundle, SampleRecord, SynthSpec, generate_dataset, read_dataset, write_dataset
from .training import TrainConfig, grad_check, pretrain_branch, run_training, train_step

__version__ = "0.1.0"
