"""Pixel-wise uncertainty evaluation for joint semantic segmentation and
monocular depth estimation: sample-stack fusion, decomposed uncertainty
maps, calibration and quality metrics, thresholding strategies, and
percentile sweeps with AUC summaries.
"""

from .depth_metrics import (
    DELTA_THRESHOLDS,
    DepthAccuracyMask,
    RmseAccumulator,
    delta_accuracy,
    rmse,
    valid_depth_mask,
)
from .errors import (
    EmptyStackError,
    InfiniteLossError,
    InputError,
    InvalidInputError,
    InvalidLabelError,
    InvalidParameterError,
    IOFailure,
    ManifestError,
    MissingInputError,
    PixeluqError,
    TensorFormatError,
    UndefinedMetricError,
    UndefinedThresholdError,
    UnsupportedDtypeError,
)
from .fusion import (
    DepthSampleStack,
    FusedPrediction,
    SegSampleStack,
    fuse,
    fuse_depth,
    fuse_segmentation,
)
from .losses_ref import GnllTerm, cross_entropy, gnll, joint_loss, softplus
from .pipeline import (
    PreparedImage,
    evaluate_images,
    evaluate_manifest,
    load_images,
    prepare_from_fused,
    prepare_image,
)
from .seg_metrics import (
    CalibrationBins,
    ConfusionMatrix,
    accumulate_calibration,
    accumulate_confusion,
    ece,
    ece_from_bins,
    miou,
    per_class_iou,
)
from .sweep import SweepResult, auc, sweep_images, write_sweep_csv
from .synth import GroundTruthFrame, SynthConfig, generate, generate_dataset, write_dataset
from .tensor_io import (
    DatasetManifest,
    ManifestEntry,
    load_manifest,
    load_tensor,
    save_manifest,
    save_tensor,
)
from .threshold import CertaintyMask, ThresholdSpec, classify, compute_threshold
from .uq_metrics import (
    UQCounts,
    count_joint,
    p_accurate_given_certain,
    p_uncertain_given_inaccurate,
    pavpu,
)

__version__ = "0.1.0"
